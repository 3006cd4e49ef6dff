//! Modified algebraic Bethe ansatz: reference states, Bethe vectors, the
//! eigenvalue and Bethe-equation functions, off-shell actions of `t(u)`, the
//! modified creation-operator conjecture, and the triangular and constrained
//! boundary limits.

use serde::{Deserialize, Serialize};

use crate::error::{MabaError, Result};
use crate::gauge::{remove, Dynamical};
use crate::lattice::{kron_vecs, rel_residual_vec, Vector};
use crate::scalars::{c, guard, BoundaryParams, Chain, GaugeFrame, ModelParams, Sampler, Structural, C, I, ONE, ZERO};
use crate::transfer::{extract_family, transfer_matrix};

/// `Λ(u) = Π_i b(qu/v_i) b(quv_i)`.
pub fn lambda_product(u: C, model: &ModelParams) -> C {
    model.v.iter().map(|&v| model.b(model.q * u / v) * model.b(model.q * u * v)).product()
}

fn nz(x: C, what: &'static str) -> Result<C> {
    if x.norm() < 1e-300 {
        Err(MabaError::DivisionByZero(what))
    } else {
        Ok(x)
    }
}

/// `α` making `⊗X(v_i, m0+i)` a highest-weight vector.
pub fn alpha_hw(chain: &Chain, m0: i32) -> Result<C> {
    let bp = &chain.bp;
    let n = chain.n() as i32;
    Ok(I * chain.q().powi(m0 + n) * bp.tau * bp.mu()? / (nz(bp.tau_tilde, "tau_tilde")? * bp.mu_tilde()?))
}

/// `β` making `⊗Y(v_i, m0+2N−i)` a lowest-weight vector.
pub fn beta_lw(chain: &Chain, m0: i32) -> Result<C> {
    let bp = &chain.bp;
    let n = chain.n() as i32;
    Ok(I * chain.q().powi(-m0 - n) * bp.tau * bp.mu_tilde()? / (nz(bp.tau_tilde, "tau_tilde")? * bp.mu()?))
}

/// `β` of the B-side frame for `M` creation operators.
pub fn beta_tl(chain: &Chain, m0: i32, m: usize) -> Result<C> {
    let bp = &chain.bp;
    Ok(-I * chain.q().powi(1 - m0 - 2 * m as i32) * bp.xi_tilde()? * bp.kappa_tilde / (bp.xi()? * nz(bp.kappa, "kappa")?))
}

/// `α` of the C-side frame for `M̂` creation operators.
pub fn alpha_tu(chain: &Chain, m0: i32, mh: usize) -> Result<C> {
    let bp = &chain.bp;
    let n = chain.n() as i32;
    Ok(-I * chain.q().powi(1 + m0 + 2 * (n - mh as i32)) * bp.xi()? * bp.kappa_tilde / (bp.xi_tilde()? * nz(bp.kappa, "kappa")?))
}

/// `α` of the frame diagonalizing `t(u)` directly at `τ̃ = 0`.
pub fn alpha_d(chain: &Chain, m0: i32, m: usize) -> Result<C> {
    let bp = &chain.bp;
    Ok(-I * bp.kappa_tilde * bp.xi()? / (nz(bp.kappa, "kappa")? * bp.xi_tilde()?) * chain.q().powi(m0 + 2 * m as i32 + 1))
}

/// `β` of the frame diagonalizing `t(u)` directly at `τ̃ = 0`.
pub fn beta_d(chain: &Chain, m0: i32, m: usize) -> Result<C> {
    let bp = &chain.bp;
    Ok(-I * bp.kappa_tilde * bp.xi_tilde()? / (nz(bp.kappa, "kappa")? * bp.xi()?) * chain.q().powi(-m0 - 2 * m as i32 + 1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WeightKind {
    Highest,
    Lowest,
    Diagonal,
}

/// A reference state together with the frame it was built in.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    pub vector: Vector,
    pub kind: WeightKind,
    pub m0: i32,
    pub frame: GaugeFrame,
}

/// Residual threshold for the action identities checked on construction.
pub const ACTION_CHECK_TOL: f64 = 1e-9;

fn probe_points() -> [C; 3] {
    [C::from_polar(0.83, 0.41), C::from_polar(1.27, -1.13), C::from_polar(0.97, 2.35)]
}

/// `⊗X(v_i, m0+i)`.
pub fn omega(dy: &Dynamical, m0: i32) -> Vector {
    let v = &dy.chain.model.v;
    kron_vecs(&v.iter().enumerate().map(|(i, &vi)| dy.x(vi, m0 + i as i32 + 1)).collect::<Vec<_>>())
}

/// `⊗Y(v_i, m0+2N−i)`.
pub fn omega_hat(dy: &Dynamical, m0: i32) -> Vector {
    let v = &dy.chain.model.v;
    let n = v.len() as i32;
    kron_vecs(&v.iter().enumerate().map(|(i, &vi)| dy.y(vi, m0 + 2 * n - i as i32 - 1)).collect::<Vec<_>>())
}

/// The all-up product state.
pub fn all_up(n: usize) -> Vector {
    let mut v = Vector::zeros(1 << n);
    v[0] = ONE;
    v
}

/// Residuals of the highest-weight actions at `u`:
/// `‖C(u,m0)Ω‖/(‖C‖‖Ω‖)`, `A(u,m0)Ω = u k̃⁻(u)Λ(u)Ω`,
/// `D(u,m0)Ω = u φ(q⁻¹u⁻¹)k̃⁻(q⁻¹u⁻¹)Λ(q⁻¹u⁻¹)Ω`.
pub fn highest_weight_residuals(dy: &Dynamical, m0: i32, u: C) -> Result<[f64; 3]> {
    let (ch, q) = (dy.chain, dy.chain.q());
    let om = omega(dy, m0);
    let fd = dy.family(u, m0)?;
    let ii = (q * u).inv();
    let md = &ch.model;
    let a = u * ch.bp.k_tilde_minus(u)? * lambda_product(u, md);
    let d = u * md.phi(ii)? * ch.bp.k_tilde_minus(ii)? * lambda_product(ii, md);
    Ok([
        (&fd.c * &om).norm() / (fd.c.norm() * om.norm()),
        rel_residual_vec(&(&fd.a * &om), &(&om * a)),
        rel_residual_vec(&(&fd.d * &om), &(&om * d)),
    ])
}

/// Residuals of the lowest-weight actions at `u`:
/// `‖B(u,m0+2N)Ω̂‖/(‖B‖‖Ω̂‖)`, `Â(u,m0+2N)Ω̂ = u φ(q⁻¹u⁻¹)k̃⁻(qu)Λ(q⁻¹u⁻¹)Ω̂`,
/// `D̂(u,m0+2N)Ω̂ = u k̃⁻(u⁻¹)Λ(u)Ω̂`.
pub fn lowest_weight_residuals(dy: &Dynamical, m0: i32, u: C) -> Result<[f64; 3]> {
    let (ch, q) = (dy.chain, dy.chain.q());
    let om = omega_hat(dy, m0);
    let fd = dy.family(u, m0 + 2 * ch.n() as i32)?;
    let ii = (q * u).inv();
    let md = &ch.model;
    let ah = u * md.phi(ii)? * ch.bp.k_tilde_minus(q * u)? * lambda_product(ii, md);
    let dh = u * ch.bp.k_tilde_minus(u.inv())? * lambda_product(u, md);
    Ok([
        (&fd.b * &om).norm() / (fd.b.norm() * om.norm()),
        rel_residual_vec(&(&fd.a_hat * &om), &(&om * ah)),
        rel_residual_vec(&(&fd.d_hat * &om), &(&om * dh)),
    ])
}

impl WeightVector {
    /// `Ω = ⊗X(v_i, m0+i)` in the frame `(α_hw, β)`; the action identities
    /// are verified at fixed probe points.
    pub fn highest(chain: &Chain, beta: C, m0: i32) -> Result<Self> {
        let frame = GaugeFrame::new(alpha_hw(chain, m0)?, beta, m0);
        let dy = Dynamical::new(chain, frame);
        for u in probe_points() {
            let r = highest_weight_residuals(&dy, m0, u)?;
            for (name, x) in ["C(u,m0)|Omega> = 0", "A(u,m0)|Omega>", "D(u,m0)|Omega>"].into_iter().zip(r) {
                if !(x <= ACTION_CHECK_TOL) {
                    return Err(MabaError::ActionCheckFailed { identity: name, residual: x });
                }
            }
        }
        Ok(Self { vector: omega(&dy, m0), kind: WeightKind::Highest, m0, frame })
    }

    /// `Ω̂ = ⊗Y(v_i, m0+2N−i)` in the frame `(α, β_lw)`.
    pub fn lowest(chain: &Chain, alpha: C, m0: i32) -> Result<Self> {
        let frame = GaugeFrame::new(alpha, beta_lw(chain, m0)?, m0);
        let dy = Dynamical::new(chain, frame);
        for u in probe_points() {
            let r = lowest_weight_residuals(&dy, m0, u)?;
            for (name, x) in ["B(u,m0+2N)|Omega^> = 0", "A^(u,m0+2N)|Omega^>", "D^(u,m0+2N)|Omega^>"].into_iter().zip(r) {
                if !(x <= ACTION_CHECK_TOL) {
                    return Err(MabaError::ActionCheckFailed { identity: name, residual: x });
                }
            }
        }
        Ok(Self { vector: omega_hat(&dy, m0), kind: WeightKind::Lowest, m0, frame })
    }

    /// The all-up state, a reference state when `τ̃ = 0`.
    pub fn diagonal(chain: &Chain, frame: GaugeFrame, m0: i32) -> Result<Self> {
        let up = all_up(chain.n());
        for u in probe_points() {
            let c_ = extract_family(u, chain)?.c;
            let r = (&c_ * &up).norm() / c_.norm().max(f64::MIN_POSITIVE);
            if !(r <= ACTION_CHECK_TOL) {
                return Err(MabaError::ActionCheckFailed { identity: "C(u)|up> = 0", residual: r });
            }
        }
        Ok(Self { vector: up, kind: WeightKind::Diagonal, m0, frame })
    }
}

/// `Ψ(ū) = B(u₁, m0+2M−2)…B(u_M, m0) Ω` with `Ω = ⊗X(v_i, m0+i)`.
pub fn bethe_vector(dy: &Dynamical, us: &[C], m0: i32) -> Result<Vector> {
    Ok(dy.string_b(us, m0 + 2 * us.len() as i32)? * omega(dy, m0))
}

/// `Ψ̂(ū) = C(u₁, m0+2(N−M̂)+2)…C(u_M̂, m0+2N) Ω̂`.
pub fn bethe_vector_hat(dy: &Dynamical, us: &[C], m0: i32) -> Result<Vector> {
    let n = dy.chain.n() as i32;
    Ok(dy.string_c(us, m0 + 2 * (n - us.len() as i32))? * omega_hat(dy, m0))
}

/// Bethe vector with `u` in place of `u_i`.
fn replaced(us: &[C], i: usize, u: C) -> Vec<C> {
    let mut r = us.to_vec();
    r[i] = u;
    r
}

/// Spectral functions of a chain (eigenvalue pieces and Bethe-equation pieces).
#[derive(Debug, Clone, Copy)]
pub struct Spectral<'a> {
    pub chain: &'a Chain,
}

/// All named scalars at `(u, ū)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralData {
    pub lambda_gd: C,
    pub lambda_g: C,
    pub lambda_ps: C,
    pub lambda: C,
    pub e_gd: Vec<C>,
    pub e_g: Vec<C>,
    pub e_ps: Vec<C>,
    pub w: Vec<C>,
    pub e: Vec<C>,
}

impl<'a> Spectral<'a> {
    pub fn new(chain: &'a Chain) -> Self {
        Self { chain }
    }

    fn md(&self) -> &ModelParams {
        &self.chain.model
    }

    fn lam(&self, u: C) -> C {
        lambda_product(u, self.md())
    }

    fn pf(&self, u: C, us: &[C]) -> Result<C> {
        self.md().prod(Structural::F, u, us)
    }

    fn ph(&self, u: C, us: &[C]) -> Result<C> {
        self.md().prod(Structural::H, u, us)
    }

    fn km(&self, u: C) -> Result<C> {
        self.chain.bp.k_tilde_minus(u)
    }

    fn kp(&self, u: C) -> Result<C> {
        self.chain.bp.k_tilde_plus(u)
    }

    fn ii(&self, u: C) -> C {
        (self.chain.q() * u).inv()
    }

    /// `φ(u)k̃⁺(u)k̃⁻(u)Λ(u)f(u,ū) + φ(ũ)k̃⁺(ũ)k̃⁻(ũ)Λ(ũ)h(u,ū)`, `ũ = q⁻¹u⁻¹`.
    pub fn lambda_gd(&self, u: C, us: &[C]) -> Result<C> {
        let (md, ii) = (self.md(), self.ii(u));
        Ok(md.phi(u)? * self.kp(u)? * self.km(u)? * self.lam(u) * self.pf(u, us)? + md.phi(ii)? * self.kp(ii)? * self.km(ii)? * self.lam(ii) * self.ph(u, us)?)
    }

    pub fn e_gd(&self, ui: C, rest: &[C]) -> Result<C> {
        let (md, ii) = (self.md(), self.ii(ui));
        Ok(md.phi(ii)? * md.phi(ui)? * (self.kp(ui)? * self.km(ui)? * self.lam(ui) * self.pf(ui, rest)? - self.kp(ii)? * self.km(ii)? * self.lam(ii) * self.ph(ui, rest)?))
    }

    /// `u φ(ũ)(k̃⁻(u)Λ(u)f(u,ū) − k̃⁻(ũ)Λ(ũ)h(u,ū))`; equals `W(u_i, ū_i)` at a root.
    pub fn lambda_ps(&self, u: C, us: &[C]) -> Result<C> {
        let (md, ii) = (self.md(), self.ii(u));
        Ok(u * md.phi(ii)? * (self.km(u)? * self.lam(u) * self.pf(u, us)? - self.km(ii)? * self.lam(ii) * self.ph(u, us)?))
    }

    pub fn w(&self, ui: C, rest: &[C]) -> Result<C> {
        self.lambda_ps(ui, rest)
    }

    pub fn e_ps(&self, ui: C, rest: &[C]) -> Result<C> {
        let (md, ii) = (self.md(), self.ii(ui));
        Ok(ui * md.phi(ii)? * (md.phi(ii)? * self.km(ui)? * self.lam(ui) * self.pf(ui, rest)? + md.phi(ui)? * self.km(ii)? * self.lam(ii) * self.ph(ui, rest)?))
    }

    fn g_coef_with(&self, sign: i32) -> Result<C> {
        let bp = &self.chain.bp;
        let (xi, xt, mu, mt) = (bp.xi()?, bp.xi_tilde()?, bp.mu()?, bp.mu_tilde()?);
        let n1 = sign * (self.chain.n() as i32 + 1);
        let q = self.chain.q();
        let kt = bp.kappa * bp.tau / (bp.kappa_tilde * bp.tau_tilde);
        Ok(bp.kappa * bp.kappa_tilde * bp.tau * bp.tau_tilde * (kt + kt.inv() + xi * mt / (xt * mu) * q.powi(n1) + xt * mu / (xi * mt) * q.powi(-n1)))
    }

    /// Coefficient of the inhomogeneous term,
    /// `κκ̃ττ̃(κτ/(κ̃τ̃) + κ̃τ̃/(κτ) + ξμ̃/(ξ̃μ)q^{N+1} + ξ̃μ/(ξμ̃)q^{−N−1})`.
    pub fn g_coef(&self) -> Result<C> {
        self.g_coef_with(1)
    }

    fn g_shape(&self, u: C, us: &[C]) -> Result<C> {
        let ii = self.ii(u);
        Ok(c(u) * c(ii) * self.lam(u) * self.lam(ii) * self.md().prod(Structural::BigG, u, us)?)
    }

    fn e_shape(&self, ui: C, rest: &[C]) -> Result<C> {
        let q = self.chain.q();
        let bq = guard(self.md().b(q * ui * ui), || "b(qu_i^2) = 0".into())?;
        Ok(self.g_shape(ui, rest)? / bq)
    }

    pub fn lambda_g(&self, u: C, us: &[C]) -> Result<C> {
        Ok(-self.g_coef()? * self.g_shape(u, us)?)
    }

    pub fn e_g(&self, ui: C, rest: &[C]) -> Result<C> {
        Ok(self.g_coef()? * self.e_shape(ui, rest)?)
    }

    /// `Λ^M = Λ_gd + Λ_g`.
    pub fn lambda(&self, u: C, us: &[C]) -> Result<C> {
        Ok(self.lambda_gd(u, us)? + self.lambda_g(u, us)?)
    }

    /// `E^M(u_i, ū_i) = E_gd + E_g`.
    pub fn e(&self, ui: C, rest: &[C]) -> Result<C> {
        Ok(self.e_gd(ui, rest)? + self.e_g(ui, rest)?)
    }

    /// `E^M(u_i, ū_i)` for every root.
    pub fn e_all(&self, us: &[C]) -> Result<Vec<C>> {
        (0..us.len()).map(|i| self.e(us[i], &remove(us, i))).collect()
    }

    pub fn data(&self, u: C, us: &[C]) -> Result<SpectralData> {
        let each = |f: &dyn Fn(C, &[C]) -> Result<C>| -> Result<Vec<C>> { (0..us.len()).map(|i| f(us[i], &remove(us, i))).collect() };
        let (lambda_gd, lambda_g) = (self.lambda_gd(u, us)?, self.lambda_g(u, us)?);
        let (e_gd, e_g) = (each(&|a, r| self.e_gd(a, r))?, each(&|a, r| self.e_g(a, r))?);
        Ok(SpectralData {
            lambda_gd,
            lambda_g,
            lambda_ps: self.lambda_ps(u, us)?,
            lambda: lambda_gd + lambda_g,
            e: e_gd.iter().zip(&e_g).map(|(a, b)| a + b).collect(),
            e_gd,
            e_g,
            e_ps: each(&|a, r| self.e_ps(a, r))?,
            w: each(&|a, r| self.w(a, r))?,
        })
    }

    // C-side (hatted) functions.

    pub fn lambda_gd_hat(&self, u: C, us: &[C]) -> Result<C> {
        let (md, ii, q) = (self.md(), self.ii(u), self.chain.q());
        Ok(md.phi(u)? * self.kp(u.inv())? * self.km(u.inv())? * self.lam(u) * self.pf(u, us)? + md.phi(ii)? * self.kp(q * u)? * self.km(q * u)? * self.lam(ii) * self.ph(u, us)?)
    }

    pub fn e_gd_hat(&self, ui: C, rest: &[C]) -> Result<C> {
        let (md, ii, q) = (self.md(), self.ii(ui), self.chain.q());
        Ok(md.phi(ii)? * md.phi(ui)? * (self.kp(ui.inv())? * self.km(ui.inv())? * self.lam(ui) * self.pf(ui, rest)? - self.kp(q * ui)? * self.km(q * ui)? * self.lam(ii) * self.ph(ui, rest)?))
    }

    pub fn lambda_ps_hat(&self, u: C, us: &[C]) -> Result<C> {
        let (md, ii, q) = (self.md(), self.ii(u), self.chain.q());
        Ok(u * md.phi(ii)? * (self.km(u.inv())? * self.lam(u) * self.pf(u, us)? - self.km(q * u)? * self.lam(ii) * self.ph(u, us)?))
    }

    pub fn w_hat(&self, ui: C, rest: &[C]) -> Result<C> {
        self.lambda_ps_hat(ui, rest)
    }

    pub fn e_ps_hat(&self, ui: C, rest: &[C]) -> Result<C> {
        let (md, ii, q) = (self.md(), self.ii(ui), self.chain.q());
        Ok(ui * md.phi(ii)? * (md.phi(ii)? * self.km(ui.inv())? * self.lam(ui) * self.pf(ui, rest)? + md.phi(ui)? * self.km(q * ui)? * self.lam(ii) * self.ph(ui, rest)?))
    }

    /// The B-side coefficient with `q → q⁻¹` in the `ξ, μ` terms.
    pub fn g_coef_hat(&self) -> Result<C> {
        self.g_coef_with(-1)
    }

    pub fn lambda_g_hat(&self, u: C, us: &[C]) -> Result<C> {
        Ok(-self.g_coef_hat()? * self.g_shape(u, us)?)
    }

    pub fn e_g_hat(&self, ui: C, rest: &[C]) -> Result<C> {
        Ok(self.g_coef_hat()? * self.e_shape(ui, rest)?)
    }

    pub fn lambda_hat(&self, u: C, us: &[C]) -> Result<C> {
        Ok(self.lambda_gd_hat(u, us)? + self.lambda_g_hat(u, us)?)
    }

    pub fn e_hat(&self, ui: C, rest: &[C]) -> Result<C> {
        Ok(self.e_gd_hat(ui, rest)? + self.e_g_hat(ui, rest)?)
    }

    // Triangular (τ̃ = 0) inhomogeneous term.

    /// `iκκ̃(ν₋q^{−N−1}ξ̃/ξ + iκ/κ̃ τ²)`.
    pub fn g_coef_up(&self) -> Result<C> {
        let bp = &self.chain.bp;
        let n = self.chain.n() as i32;
        Ok(I * bp.kappa * bp.kappa_tilde * (bp.nu_minus * self.chain.q().powi(-n - 1) * bp.xi_tilde()? / bp.xi()? + I * bp.kappa / nz(bp.kappa_tilde, "kappa_tilde")? * bp.tau * bp.tau))
    }

    pub fn lambda_g_up(&self, u: C, us: &[C]) -> Result<C> {
        Ok(self.g_coef_up()? * self.g_shape(u, us)?)
    }

    pub fn e_g_up(&self, ui: C, rest: &[C]) -> Result<C> {
        Ok(-self.g_coef_up()? * self.e_shape(ui, rest)?)
    }

    /// `|E(u_i) − b(u_i/u)Λ(u, ū)|/|E(u_i)|` at `u = u_i(1 + h)`.
    pub fn limit_consistency(&self, us: &[C], i: usize, h: f64) -> Result<f64> {
        let ui = us[i];
        let u = ui * (1.0 + h);
        let e = self.e(ui, &remove(us, i))?;
        let lim = self.md().b(ui / u) * self.lambda(u, us)?;
        Ok((e - lim).norm() / e.norm())
    }
}

/// A chain, a gauge frame and the reference level `m0`, with the Bethe
/// vectors built in that frame.
#[derive(Debug, Clone, Copy)]
pub struct BetheSetup<'a> {
    pub dy: Dynamical<'a>,
    pub m0: i32,
}

/// Residuals of the B-side off-shell identities for `M` roots.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OffShellResiduals {
    pub td: f64,
    pub tps: f64,
    pub tlow: f64,
    /// Only for `M = N`.
    pub conjecture: Option<f64>,
    pub full: Option<f64>,
}

/// Residuals of the C-side identities for `M̂` roots.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OffShellHatResiduals {
    pub off_c: f64,
    pub conjecture: Option<f64>,
    pub full: Option<f64>,
}

impl<'a> BetheSetup<'a> {
    /// Frame `(α_hw(m0), β_tl(m0, M))` for `M` B-operators.
    pub fn b_side(chain: &'a Chain, m0: i32, m: usize) -> Result<Self> {
        let fr = GaugeFrame::new(alpha_hw(chain, m0)?, beta_tl(chain, m0, m)?, m0);
        Ok(Self { dy: Dynamical::new(chain, fr), m0 })
    }

    /// Frame `(α_tu(m0, M̂), β_lw(m0))` for `M̂` C-operators.
    pub fn c_side(chain: &'a Chain, m0: i32, mh: usize) -> Result<Self> {
        let fr = GaugeFrame::new(alpha_tu(chain, m0, mh)?, beta_lw(chain, m0)?, m0);
        Ok(Self { dy: Dynamical::new(chain, fr), m0 })
    }

    pub fn with_frame(chain: &'a Chain, frame: GaugeFrame, m0: i32) -> Self {
        Self { dy: Dynamical::new(chain, frame), m0 }
    }

    fn chain(&self) -> &'a Chain {
        self.dy.chain
    }

    pub fn psi(&self, us: &[C]) -> Result<Vector> {
        bethe_vector(&self.dy, us, self.m0)
    }

    pub fn psi_hat(&self, us: &[C]) -> Result<Vector> {
        bethe_vector_hat(&self.dy, us, self.m0)
    }

    /// `Σ_i coef_i · Ψ({u, ū_i})` with `coef_i` from `(u_i, ū_i)`.
    fn unwanted(&self, u: C, us: &[C], hat: bool, coef: impl Fn(usize, C, &[C]) -> Result<C>) -> Result<Vector> {
        Ok(self.unwanted_scaled(u, us, hat, coef)?.0)
    }

    /// As [`Self::unwanted`], also returning `Σ_i ‖coef_i Ψ_i‖`.
    fn unwanted_scaled(&self, u: C, us: &[C], hat: bool, coef: impl Fn(usize, C, &[C]) -> Result<C>) -> Result<(Vector, f64)> {
        let mut acc = Vector::zeros(1 << self.chain().n());
        let mut scale = 0.0;
        for i in 0..us.len() {
            let k = coef(i, us[i], &remove(us, i))?;
            let v = if hat { self.psi_hat(&replaced(us, i, u))? } else { self.psi(&replaced(us, i, u))? } * k;
            scale += v.norm();
            acc += v;
        }
        Ok((acc, scale))
    }

    /// Off-shell actions of `t_d`, `t_ps` and `t` on `Ψ(ū)`; for `M = N` also
    /// the modified creation-operator conjecture and the full action.
    pub fn off_shell(&self, u: C, us: &[C]) -> Result<OffShellResiduals> {
        let ch = self.chain();
        let (q, md, fr) = (ch.q(), &ch.model, &self.dy.frame);
        let sp = Spectral::new(ch);
        let m = us.len();
        let mm = self.m0 + 2 * m as i32;
        let psi = self.psi(us)?;
        let fd = self.dy.family(u, mm)?;
        let cq = c(q * u) / u;
        let (chi, rho, zeta, delta) = (ch.chi(fr, mm)?, ch.rho(fr, mm)?, ch.zeta(fr, mm)?, ch.delta(fr, mm)?);
        let chib = ch.chi_bar(fr, mm)?;
        let (lgd, lps) = (sp.lambda_gd(u, us)?, sp.lambda_ps(u, us)?);

        let lhs_td = self.dy.t_diagonal(u, &fd)? * &psi;
        let rhs_td = &psi * lgd + self.unwanted(u, us, false, |_, ui, r| Ok(md.f_tilde(u, ui)? * sp.e_gd(ui, r)? + chi * cq * sp.w(ui, r)?))?;
        let lhs_ps = self.dy.t_pseudo(u, &fd)? * &psi;
        let rhs_ps = &psi * lps + self.unwanted(u, us, false, |_, ui, r| Ok(md.big_g(u, ui)? * md.b(q * ui * ui) * sp.e_ps(ui, r)? + rho * sp.w(ui, r)?))?;

        let t = transfer_matrix(u, ch)?;
        let tpsi = &t * &psi;
        let bpsi = &fd.b * &psi;
        let rhs_low = &psi * lgd + (&bpsi * zeta - &psi * (delta * lps)) * cq
            + self.unwanted(u, us, false, |_, ui, r| Ok(md.f_tilde(u, ui)? * sp.e_gd(ui, r)? + cq * (chib * sp.w(ui, r)? - delta * md.big_g(u, ui)? * md.b(q * ui * ui) * sp.e_ps(ui, r)?)))?;

        let (conjecture, full) = if m == ch.n() {
            let lhs = &bpsi * (cq * zeta);
            let rhs = &psi * (sp.lambda_g(u, us)? + cq * delta * lps)
                + self.unwanted(u, us, false, |_, ui, r| Ok(cq * (delta * md.big_g(u, ui)? * md.b(q * ui * ui) * sp.e_ps(ui, r)? - chib * sp.w(ui, r)?) + md.f_tilde(u, ui)? * sp.e_g(ui, r)?))?;
            let rhs_full = &psi * sp.lambda(u, us)? + self.unwanted(u, us, false, |_, ui, r| Ok(md.f_tilde(u, ui)? * sp.e(ui, r)?))?;
            (Some(rel_residual_vec(&lhs, &rhs)), Some(rel_residual_vec(&tpsi, &rhs_full)))
        } else {
            (None, None)
        };
        Ok(OffShellResiduals {
            td: rel_residual_vec(&lhs_td, &rhs_td),
            tps: rel_residual_vec(&lhs_ps, &rhs_ps),
            tlow: rel_residual_vec(&tpsi, &rhs_low),
            conjecture,
            full,
        })
    }

    /// Off-shell action of `t` on `Ψ̂(ū)`; for `M̂ = N` also the C-side
    /// conjecture and the full action.
    pub fn off_shell_hat(&self, u: C, us: &[C]) -> Result<OffShellHatResiduals> {
        let ch = self.chain();
        let (q, md, fr) = (ch.q(), &ch.model, &self.dy.frame);
        let sp = Spectral::new(ch);
        let mh = us.len();
        let mm = self.m0 + 2 * (ch.n() as i32 - mh as i32);
        let psi = self.psi_hat(us)?;
        let fd = self.dy.family(u, mm)?;
        let cq = c(q * u) / u;
        let (zt, dl) = (ch.zeta_tilde(fr, mm)?, ch.delta(fr, mm - 2)?);
        let chibh = ch.chi_bar_hat(fr, mm)?;
        let lps = sp.lambda_ps_hat(u, us)?;
        let t = transfer_matrix(u, ch)?;
        let tpsi = &t * &psi;
        let cpsi = &fd.c * &psi;
        let rhs = &psi * (sp.lambda_gd_hat(u, us)? + cq * dl * lps) - &cpsi * (cq * zt)
            + self.unwanted(u, us, true, |_, ui, r| Ok(md.f_tilde(u, ui)? * sp.e_gd_hat(ui, r)? + cq * (chibh * sp.w_hat(ui, r)? + dl * md.big_g(u, ui)? * md.b(q * ui * ui) * sp.e_ps_hat(ui, r)?)))?;
        let (conjecture, full) = if mh == ch.n() {
            let lhs = &cpsi * (-cq * zt);
            let rhs = &psi * (sp.lambda_g_hat(u, us)? - cq * dl * lps)
                + self.unwanted(u, us, true, |_, ui, r| Ok(-cq * (dl * md.big_g(u, ui)? * md.b(q * ui * ui) * sp.e_ps_hat(ui, r)? + chibh * sp.w_hat(ui, r)?) + md.f_tilde(u, ui)? * sp.e_g_hat(ui, r)?))?;
            let rhs_full = &psi * sp.lambda_hat(u, us)? + self.unwanted(u, us, true, |_, ui, r| Ok(md.f_tilde(u, ui)? * sp.e_hat(ui, r)?))?;
            (Some(rel_residual_vec(&lhs, &rhs)), Some(rel_residual_vec(&tpsi, &rhs_full)))
        } else {
            (None, None)
        };
        Ok(OffShellHatResiduals { off_c: rel_residual_vec(&tpsi, &rhs), conjecture, full })
    }

    /// `‖tΨ − Λ_gd Ψ − Σ F̃ E_gd Ψ_i‖`: the size of everything the ordinary
    /// diagonal off-shell action leaves out, relative to the summed norms of
    /// the terms being compared.
    pub fn unwanted_norm(&self, u: C, us: &[C]) -> Result<f64> {
        let ch = self.chain();
        let sp = Spectral::new(ch);
        let psi = self.psi(us)?;
        let tpsi = transfer_matrix(u, ch)? * &psi;
        let lead = &psi * sp.lambda_gd(u, us)?;
        let (rest, scale) = self.unwanted_scaled(u, us, false, |_, ui, r| Ok(ch.model.f_tilde(u, ui)? * sp.e_gd(ui, r)?))?;
        Ok((&tpsi - &lead - rest).norm() / (tpsi.norm() + lead.norm() + scale))
    }

    /// C-side analogue of [`Self::unwanted_norm`].
    pub fn unwanted_norm_hat(&self, u: C, us: &[C]) -> Result<f64> {
        let ch = self.chain();
        let sp = Spectral::new(ch);
        let psi = self.psi_hat(us)?;
        let tpsi = transfer_matrix(u, ch)? * &psi;
        let lead = &psi * sp.lambda_gd_hat(u, us)?;
        let (rest, scale) = self.unwanted_scaled(u, us, true, |_, ui, r| Ok(ch.model.f_tilde(u, ui)? * sp.e_gd_hat(ui, r)?))?;
        Ok((&tpsi - &lead - rest).norm() / (tpsi.norm() + lead.norm() + scale))
    }
}

/// Copy of `bp` with `τ̃ = 0`, keeping the raw couplings.
pub fn triangular(bp: &BoundaryParams) -> BoundaryParams {
    BoundaryParams::from_raw(bp.eps_plus, bp.eps_minus, bp.kappa, bp.kappa_tilde, bp.nu_plus, bp.nu_minus, bp.tau, ZERO)
}

/// Residuals at `τ̃ = 0` of
/// `A(u,m0)|↑⟩ = u²k⁻(u)Λ(u)|↑⟩ + B(u,m0−2)|↑⟩` and
/// `D(u,m0)|↑⟩ = q⁻¹φ(ũ)k⁻(ũ)Λ(ũ)|↑⟩ − φ(u)B(u,m0−2)|↑⟩`, `ũ = q⁻¹u⁻¹`.
pub fn vacuum_action_residuals(dy: &Dynamical, m0: i32, u: C) -> Result<[f64; 2]> {
    let ch = dy.chain;
    let (q, md, bp) = (ch.q(), &ch.model, &ch.bp);
    let up = all_up(ch.n());
    let fd = dy.family(u, m0)?;
    let bup = &dy.family(u, m0 - 2)?.b * &up;
    let ii = (q * u).inv();
    let a = &up * (u * u * bp.k_minus(u) * lambda_product(u, md)) + &bup;
    let d = &up * (md.phi(ii)? * bp.k_minus(ii) * lambda_product(ii, md) / q) - &bup * md.phi(u)?;
    Ok([rel_residual_vec(&(&fd.a * &up), &a), rel_residual_vec(&(&fd.d * &up), &d)])
}

/// `Φ(ū) = B(u₁, m+2M−2)…B(u_M, m)|↑⟩`.
pub fn phi_vector(dy: &Dynamical, us: &[C], m: i32) -> Result<Vector> {
    Ok(dy.string_b(us, m + 2 * us.len() as i32)? * all_up(dy.chain.n()))
}

/// Residual of the `τ̃ = 0` action
/// `tΦ = (Λ_d + Λ_up)Φ + Σ F̃(u,u_i)(E_d + E_up)(u_i)Φ({u, ū_i})`
/// in the frame `(α, β_tl(m0, N))`, `M = N`.
pub fn triangular_action_residual(chain: &Chain, alpha: C, m0: i32, u: C, us: &[C]) -> Result<f64> {
    let n = chain.n();
    if us.len() != n {
        return Err(MabaError::InvalidParams(format!("need N = {n} roots, got {}", us.len())));
    }
    let dy = Dynamical::new(chain, GaugeFrame::new(alpha, beta_tl(chain, m0, n)?, m0));
    let sp = Spectral::new(chain);
    let md = &chain.model;
    let ph = phi_vector(&dy, us, m0)?;
    let lhs = transfer_matrix(u, chain)? * &ph;
    let mut rhs = &ph * (sp.lambda_gd(u, us)? + sp.lambda_g_up(u, us)?);
    for i in 0..n {
        let r = remove(us, i);
        rhs += phi_vector(&dy, &replaced(us, i, u), m0)? * (md.f_tilde(u, us[i])? * (sp.e_gd(us[i], &r)? + sp.e_g_up(us[i], &r)?));
    }
    Ok(rel_residual_vec(&lhs, &rhs))
}

/// Residuals of the direct `τ̃ = 0` construction in the frame
/// `(α_d(m0, M), β_d(m0, M))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectRouteResiduals {
    /// `t(u) = t_d(u, m0+2M)` as operators.
    pub t_equals_td: f64,
    /// Off-shell action with the extra `B`-term kept explicit.
    pub off_shell: f64,
    /// For `M = N`: extra term equals the `Λ_up`/`E_up` expansion.
    pub extra_term: Option<f64>,
}

pub fn direct_route(chain: &Chain, m0: i32, u: C, us: &[C]) -> Result<DirectRouteResiduals> {
    let m = us.len();
    let fr = GaugeFrame::new(alpha_d(chain, m0, m)?, beta_d(chain, m0, m)?, m0);
    let dy = Dynamical::new(chain, fr);
    let (q, md, bp) = (chain.q(), &chain.model, &chain.bp);
    let sp = Spectral::new(chain);
    let mm = m0 + 2 * m as i32;
    let t = transfer_matrix(u, chain)?;
    let fd = dy.family(u, mm)?;
    let td = dy.t_diagonal(u, &fd)?;
    let up = all_up(chain.n());
    let ph = dy.string_b(us, mm)? * &up;
    let ph2 = dy.string_b(us, mm - 2)? * &up;
    let bx = dy.family(u, mm - 2)?.b;
    let extra = (&bx * &ph2) * (bp.kappa * bp.kappa * dy.gm(m0 - 1)? / (q * u) * c(q * u));
    let mut rhs = &ph * sp.lambda_gd(u, us)? + &extra;
    let mut conj = &ph * sp.lambda_g_up(u, us)?;
    for i in 0..m {
        let r = remove(us, i);
        let phi_i = dy.string_b(&replaced(us, i, u), mm)? * &up;
        let ft = md.f_tilde(u, us[i])?;
        rhs += &phi_i * (ft * sp.e_gd(us[i], &r)?);
        conj += &phi_i * (ft * sp.e_g_up(us[i], &r)?);
    }
    Ok(DirectRouteResiduals {
        t_equals_td: crate::lattice::rel_residual_mat(&t, &td),
        off_shell: rel_residual_vec(&(&t * &ph), &rhs),
        extra_term: (m == chain.n()).then(|| rel_residual_vec(&extra, &conj)),
    })
}

/// `|−g(τ̃) − g_up| / |g_up|` along `τ̃ → 0` with raw `(ν±, τ)` fixed.
pub fn triangular_convergence(chain: &Chain, tau_tildes: &[f64]) -> Result<Vec<f64>> {
    let bp = &chain.bp;
    let tri = Chain::new(chain.model.clone(), triangular(bp));
    let target = Spectral::new(&tri).g_coef_up()?;
    tau_tildes
        .iter()
        .map(|&tt| {
            let b = BoundaryParams::from_raw(bp.eps_plus, bp.eps_minus, bp.kappa, bp.kappa_tilde, bp.nu_plus, bp.nu_minus, bp.tau, C::new(tt, 0.0));
            let g = Spectral::new(&Chain::new(chain.model.clone(), b)).g_coef()?;
            Ok((-g - target).norm() / target.norm())
        })
        .collect()
}

/// Left-hand sides of the two boundary constraints.
pub fn constraint_values(chain: &Chain, m: usize, mh: usize) -> Result<[C; 2]> {
    let bp = &chain.bp;
    let (q, n) = (chain.q(), chain.n() as i32);
    let (xi, xt, mu, mt) = (bp.xi()?, bp.xi_tilde()?, bp.mu()?, bp.mu_tilde()?);
    let (k, kt, t, tt) = (bp.kappa, bp.kappa_tilde, bp.tau, bp.tau_tilde);
    Ok([
        -(kt * mt * tt * xi) / (k * mu * t * xt) * q.powi(1 + 2 * m as i32 - n),
        -(k * xi * t * mt) / (kt * tt * xt * mu) * q.powi(n - 1 - 2 * mh as i32),
    ])
}

/// Tolerance on `|constraint − 1|` for a constraint to count as holding.
pub const CONSTRAINT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintReport {
    pub holds_b: bool,
    pub holds_c: bool,
    pub constraint_b: f64,
    pub constraint_c: f64,
    /// Unwanted-term norm of the B-side action with `M` roots.
    pub unwanted_b: f64,
    /// Unwanted-term norm of the C-side action with `M̂` roots.
    pub unwanted_c: f64,
}

/// Evaluate both constraints and measure the non-diagonal parts of the
/// off-shell actions at the probe point `u` with roots `ub` (B-side, `M`
/// of them) and `uc` (C-side, `M̂`).
pub fn constraint_detector(chain: &Chain, m0: i32, u: C, ub: &[C], uc: &[C]) -> Result<ConstraintReport> {
    let [cb, cc] = constraint_values(chain, ub.len(), uc.len())?;
    let (db, dc) = ((cb - ONE).norm(), (cc - ONE).norm());
    let unwanted_b = BetheSetup::b_side(chain, m0, ub.len())?.unwanted_norm(u, ub)?;
    let unwanted_c = BetheSetup::c_side(chain, m0, uc.len())?.unwanted_norm_hat(u, uc)?;
    Ok(ConstraintReport { holds_b: db <= CONSTRAINT_TOL, holds_c: dc <= CONSTRAINT_TOL, constraint_b: db, constraint_c: dc, unwanted_b, unwanted_c })
}

/// Random boundary on which the B-constraint holds for `M` roots; with
/// `both` the C-constraint also holds for `M̂ = N − 1 − M` (requires `M < N`).
pub fn constrained_boundary(s: &mut Sampler, q: C, n: usize, m: usize, both: bool) -> Result<BoundaryParams> {
    let x = s.complexes(7);
    let (k, t, tt, mu, mt, xi) = (x[0], x[1], x[2], x[3], x[4], x[5]);
    let kt = if both { k * t / tt } else { x[6] };
    let xt = -(kt * mt * tt * xi) / (k * mu * t) * q.powi(1 + 2 * m as i32 - n as i32);
    BoundaryParams::factorized(k, kt, xi, xt, t, tt, mu, mt)
}

/// Boundary on which the inhomogeneous coefficient vanishes (B-constraint with `M = N`).
pub fn g_free_boundary(s: &mut Sampler, q: C, n: usize) -> Result<BoundaryParams> {
    constrained_boundary(s, q, n, n, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Mat;

    fn chain(seed: u64, n: usize) -> (Chain, Sampler) {
        let mut s = Sampler::new(seed);
        let ch = s.chain(n);
        (ch, s)
    }

    #[test]
    fn lambda_product_examples() {
        let (ch, mut s) = chain(60, 3);
        assert!(lambda_product(ch.model.v[0] / ch.q(), &ch.model).norm() < 1e-12);
        let m1 = ModelParams::homogeneous(ch.q(), 1).unwrap();
        let u = s.complex();
        let b = m1.b(m1.q * u);
        assert!(crate::scalars::rel_residual(lambda_product(u, &m1), b * b) < 1e-15);
    }

    #[test]
    fn highest_and_lowest_weight_vectors() {
        for n in 1..=4 {
            let (ch, mut s) = chain(61 + n as u64, n);
            let hw = WeightVector::highest(&ch, s.complex(), 1).unwrap();
            let dy = Dynamical::new(&ch, hw.frame);
            for r in highest_weight_residuals(&dy, 1, s.complex()).unwrap() {
                assert!(r < 1e-11, "N={n}: {r}");
            }
            let lw = WeightVector::lowest(&ch, s.complex(), -1).unwrap();
            let dy = Dynamical::new(&ch, lw.frame);
            for r in lowest_weight_residuals(&dy, -1, s.complex()).unwrap() {
                assert!(r < 1e-11, "N={n}: {r}");
            }
        }
    }

    #[test]
    fn weight_check_rejects_wrong_frame() {
        let (ch, mut s) = chain(66, 2);
        let a = alpha_hw(&ch, 0).unwrap();
        // Ω in the frame for m0 = 0 is not highest weight for m0 = 1.
        let dy = Dynamical::new(&ch, GaugeFrame::new(a, s.complex(), 0));
        let r = highest_weight_residuals(&dy, 1, s.complex()).unwrap();
        assert!(r[0] > 1e-6);
    }

    #[test]
    fn strings_are_nilpotent_in_both_frames() {
        for n in 1..=3 {
            let (ch, mut s) = chain(67 + n as u64, n);
            let m0 = 0;
            let fr = GaugeFrame::new(alpha_hw(&ch, m0).unwrap(), beta_lw(&ch, m0).unwrap(), m0);
            let dy = Dynamical::new(&ch, fr);
            let us = s.complexes(n + 1);
            let scale = |xs: &[C], f: &dyn Fn(C, i32) -> Mat| xs.iter().enumerate().map(|(j, &x)| f(x, j as i32).norm()).product::<f64>();
            let nb = dy.string_b(&us, m0 + 2 * (n as i32 + 1)).unwrap().norm();
            let sb = scale(&us, &|x, j| dy.family(x, m0 + 2 * (n as i32 - j)).unwrap().b);
            assert!(nb / sb < 1e-12, "B N={n}: {}", nb / sb);
            let nc = dy.string_c(&us, m0 - 2).unwrap().norm();
            let sc = scale(&us, &|x, j| dy.family(x, m0 + 2 * j).unwrap().c);
            assert!(nc / sc < 1e-12, "C N={n}: {}", nc / sc);
        }
    }

    #[test]
    fn bethe_vector_order_invariance_and_empty_set() {
        let (ch, mut s) = chain(71, 2);
        let bs = BetheSetup::b_side(&ch, 0, 2).unwrap();
        let us = s.complexes(2);
        let a = bs.psi(&us).unwrap();
        let b = bs.psi(&[us[1], us[0]]).unwrap();
        assert!(rel_residual_vec(&a, &b) < 1e-12);
        assert_eq!(bs.psi(&[]).unwrap(), omega(&bs.dy, 0));
    }

    #[test]
    fn single_site_bethe_vector_matches_two_by_two_oracle() {
        let (ch, mut s) = chain(72, 1);
        let bs = BetheSetup::b_side(&ch, 0, 1).unwrap();
        let u = s.complex();
        let fr = bs.dy.frame;
        let q = ch.q();
        // 4×4 monodromy by plain 2×2-block matrix products.
        let r = |x: C| crate::lattice::r_matrix(x, &ch.model);
        let km = crate::lattice::kron(&crate::boundary::k_minus_matrix(u, &ch.bp), &Mat::identity(2, 2));
        let k = r(u / ch.model.v[0]) * km * r(u * ch.model.v[0]);
        // B(u, 0) = Ỹ(u, 0)ᵀ K Y(u⁻¹, 0)
        let g1 = fr.gamma_m(q, 1);
        let yt = [q * u / g1, -q * u / g1 * fr.beta / u];
        let y = [fr.beta * u, ONE];
        let mut bop = Mat::zeros(2, 2);
        for i in 0..2 {
            for j in 0..2 {
                bop += k.view((2 * i, 2 * j), (2, 2)) * (yt[i] * y[j]);
            }
        }
        let om = Vector::from_vec(vec![fr.alpha * q.powi(-1) / ch.model.v[0], ONE]);
        let want = bop * om;
        assert!(rel_residual_vec(&bs.psi(&[u]).unwrap(), &want) < 1e-13);
    }

    #[test]
    fn off_shell_theorems_and_conjecture() {
        for n in 1..=3 {
            for m in 0..=n {
                let (ch, mut s) = chain(80 + 10 * n as u64 + m as u64, n);
                let bs = BetheSetup::b_side(&ch, 0, m).unwrap();
                let r = bs.off_shell(s.complex(), &s.complexes(m)).unwrap();
                assert!(r.td < 1e-10 && r.tps < 1e-10 && r.tlow < 1e-10, "N={n} M={m}: {r:?}");
                if m == n {
                    assert!(r.conjecture.unwrap() < 1e-9 && r.full.unwrap() < 1e-9, "{r:?}");
                }
            }
        }
    }

    #[test]
    fn c_side_identities() {
        for n in 1..=3 {
            for mh in 0..=n {
                let (ch, mut s) = chain(120 + 10 * n as u64 + mh as u64, n);
                let bs = BetheSetup::c_side(&ch, 1, mh).unwrap();
                let r = bs.off_shell_hat(s.complex(), &s.complexes(mh)).unwrap();
                assert!(r.off_c < 1e-10, "N={n} M̂={mh}: {r:?}");
                if mh == n {
                    assert!(r.conjecture.unwrap() < 1e-9 && r.full.unwrap() < 1e-9, "{r:?}");
                }
            }
        }
    }

    #[test]
    fn off_shell_is_m0_covariant() {
        for m0 in [0, 1, -3] {
            let (ch, mut s) = chain(150, 2);
            let bs = BetheSetup::b_side(&ch, m0, 2).unwrap();
            let r = bs.off_shell(s.complex(), &s.complexes(2)).unwrap();
            assert!(r.full.unwrap() < 1e-9, "m0={m0}: {r:?}");
        }
    }

    #[test]
    fn eigenvalue_functions_are_symmetric_and_consistent() {
        let (ch, mut s) = chain(151, 3);
        let sp = Spectral::new(&ch);
        let us = s.complexes(3);
        let u = s.complex();
        let perm = [us[2], us[0], us[1]];
        assert!(crate::scalars::rel_residual(sp.lambda(u, &us).unwrap(), sp.lambda(u, &perm).unwrap()) < 1e-12);
        let e1 = sp.e_all(&us).unwrap();
        let e2 = sp.e_all(&perm).unwrap();
        assert!(crate::scalars::rel_residual(e1[0], e2[1]) < 1e-12);
        for i in 0..3 {
            assert!(sp.limit_consistency(&us, i, 1e-6).unwrap() < 1e-4);
        }
        let d = sp.data(u, &us).unwrap();
        assert_eq!(d.e.len(), 3);
        assert!(crate::scalars::rel_residual(d.lambda, d.lambda_gd + d.lambda_g) < 1e-15);
    }

    #[test]
    fn inhomogeneous_term_vanishes_on_its_locus() {
        let mut s = Sampler::new(152);
        let model = s.model(2);
        let bp = g_free_boundary(&mut s, model.q, 2).unwrap();
        let ch = Chain::new(model, bp);
        let sp = Spectral::new(&ch);
        assert!(sp.g_coef().unwrap().norm() < 1e-12);
        let us = s.complexes(2);
        assert!(sp.lambda_g(s.complex(), &us).unwrap().norm() < 1e-10);
    }

    #[test]
    fn triangular_suite() {
        for n in 1..=2 {
            let mut s = Sampler::new(160 + n as u64);
            let ch0 = s.chain(n);
            let ch = Chain::new(ch0.model.clone(), triangular(&ch0.bp));
            let wv = WeightVector::diagonal(&ch, GaugeFrame::new(s.complex(), s.complex(), 0), 0).unwrap();
            assert_eq!(wv.kind, WeightKind::Diagonal);
            let us = s.complexes(n);
            let r = triangular_action_residual(&ch, s.complex(), 0, s.complex(), &us).unwrap();
            assert!(r < 1e-10, "tPHI N={n}: {r}");
            let dy = Dynamical::new(&ch, GaugeFrame::new(s.complex(), s.complex(), 1));
            for x in vacuum_action_residuals(&dy, 1, s.complex()).unwrap() {
                assert!(x < 1e-11, "vacuum N={n}: {x}");
            }
            for m in 0..=n {
                let d = direct_route(&ch, 1, s.complex(), &s.complexes(m)).unwrap();
                assert!(d.t_equals_td < 1e-11 && d.off_shell < 1e-10, "{d:?}");
                if m == n {
                    assert!(d.extra_term.unwrap() < 1e-10, "{d:?}");
                }
            }
        }
    }

    #[test]
    fn convergence_to_triangular_coefficient() {
        let (ch, _) = chain(170, 2);
        let gaps = triangular_convergence(&ch, &[1e-2, 1e-3, 1e-4]).unwrap();
        assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2], "{gaps:?}");
        let slope = (gaps[0] / gaps[2]).log10() / 2.0;
        assert!((slope - 2.0).abs() < 0.2, "slope {slope}");
    }

    #[test]
    fn constraint_detector_separates_loci() {
        let n = 3;
        let mut s = Sampler::new(171);
        let model = s.model(n);
        let ch = Chain::new(model.clone(), s.boundary());
        let (u, ub, uc) = (s.complex(), s.complexes(1), s.complexes(1));
        let r = constraint_detector(&ch, 0, u, &ub, &uc).unwrap();
        assert!(!r.holds_b && !r.holds_c && r.unwanted_b > 1e-6 && r.unwanted_c > 1e-6, "{r:?}");
        let bp = constrained_boundary(&mut s, model.q, n, 1, true).unwrap();
        let ch = Chain::new(model, bp);
        let r = constraint_detector(&ch, 0, u, &ub, &uc).unwrap();
        assert!(r.holds_b && r.holds_c, "{r:?}");
        assert!(r.unwanted_b < 1e-12 && r.unwanted_c < 1e-12, "{r:?}");
    }
}
