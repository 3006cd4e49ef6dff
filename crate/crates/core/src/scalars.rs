//! Scalar functions of the open XXZ chain: the trigonometric `b`, `c`, `φ`,
//! the fourteen structural functions appearing in the exchange relations,
//! boundary functions `k±`, `k̃±`, the gauge function `γ` and the dynamical
//! coefficients `ζ, ζ̃, δ, χ, ρ` with their hatted variants.
//!
//! Every division goes through a genericity guard: a denominator with modulus
//! below [`EPS_GEN`] yields [`MabaError::SingularPoint`] instead of a huge
//! value.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{MabaError, Result};

pub type C = Complex64;

/// Genericity threshold on denominators.
pub const EPS_GEN: f64 = 1e-6;

pub const I: C = C::new(0.0, 1.0);
pub const ONE: C = C::new(1.0, 0.0);
pub const ZERO: C = C::new(0.0, 0.0);

/// Relative residual `|a - b| / (1 + max(|a|, |b|))`.
pub fn rel_residual(a: C, b: C) -> f64 {
    (a - b).norm() / (1.0 + a.norm().max(b.norm()))
}

#[inline]
pub(crate) fn guard(den: C, what: impl FnOnce() -> String) -> Result<C> {
    let m = den.norm();
    if m < EPS_GEN || !m.is_finite() {
        Err(MabaError::SingularPoint { what: what(), magnitude: m })
    } else {
        Ok(den)
    }
}

#[inline]
fn nonzero(u: C, op: &'static str) -> Result<C> {
    if u.norm() == 0.0 || !u.norm().is_finite() {
        Err(MabaError::ZeroArgument(op))
    } else {
        Ok(u)
    }
}

/// `c(u) = u² − u⁻²`.
pub fn c(u: C) -> C {
    u * u - (u * u).inv()
}

/// Anisotropy, chain length and inhomogeneities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub q: C,
    pub n: usize,
    pub v: Vec<C>,
}

impl ModelParams {
    pub fn new(q: C, v: Vec<C>) -> Result<Self> {
        let n = v.len();
        if n == 0 {
            return Err(MabaError::InvalidParams("chain length must be positive".into()));
        }
        if q.norm() < EPS_GEN {
            return Err(MabaError::InvalidParams("q must be nonzero".into()));
        }
        let mut qk = ONE;
        for k in 1..=(2 * n + 4) {
            qk *= q;
            if (qk - ONE).norm() < EPS_GEN {
                return Err(MabaError::InvalidParams(format!("q^{k} = 1: q is a root of unity")));
            }
        }
        if let Some(i) = v.iter().position(|x| x.norm() < EPS_GEN) {
            return Err(MabaError::InvalidParams(format!("inhomogeneity v_{} vanishes", i + 1)));
        }
        Ok(Self { q, n, v })
    }

    /// All `v_i = 1`.
    pub fn homogeneous(q: C, n: usize) -> Result<Self> {
        Self::new(q, vec![ONE; n])
    }

    pub fn qinv(&self) -> C {
        self.q.inv()
    }

    /// `b(u) = (u − u⁻¹)/(q − q⁻¹)`; `u` must be nonzero.
    #[inline]
    pub fn b(&self, u: C) -> C {
        (u - u.inv()) / (self.q - self.q.inv())
    }

    pub fn checked_b(&self, u: C) -> Result<C> {
        nonzero(u, "b")?;
        Ok(self.b(u))
    }

    /// `φ(u) = b(q²u²)/b(qu²)`.
    pub fn phi(&self, u: C) -> Result<C> {
        nonzero(u, "phi")?;
        let q = self.q;
        let den = guard(self.b(q * u * u), || "phi: b(qu^2) = 0".into())?;
        Ok(self.b(q * q * u * u) / den)
    }

    fn den_b(&self, x: C, label: &'static str) -> Result<C> {
        guard(self.b(x), || label.to_string())
    }

    pub fn f(&self, u: C, v: C) -> Result<C> {
        let q = self.q;
        let d = self.den_b(v / u, "b(v/u) = 0 (u = ±v)")? * self.den_b(q * u * v, "b(quv) = 0 (uv = ±1/q)")?;
        Ok(self.b(q * v / u) * self.b(u * v) / d)
    }

    pub fn g(&self, u: C, v: C) -> Result<C> {
        let q = self.q;
        Ok(self.phi((q * v).inv())? / self.den_b(u / v, "b(u/v) = 0 (u = ±v)")?)
    }

    pub fn w(&self, u: C, v: C) -> Result<C> {
        Ok(-self.den_b(self.q * u * v, "b(quv) = 0 (uv = ±1/q)")?.inv())
    }

    pub fn h(&self, u: C, v: C) -> Result<C> {
        let q = self.q;
        let d = self.den_b(q * u * v, "b(quv) = 0 (uv = ±1/q)")? * self.den_b(u / v, "b(u/v) = 0 (u = ±v)")?;
        Ok(self.b(q * q * u * v) * self.b(q * u / v) / d)
    }

    pub fn k(&self, u: C, v: C) -> Result<C> {
        Ok(self.phi(u)? / self.den_b(v / u, "b(v/u) = 0 (u = ±v)")?)
    }

    pub fn n_fn(&self, u: C, v: C) -> Result<C> {
        let q = self.q;
        Ok(self.phi(u)? * self.phi((q * v).inv())? / self.den_b(q * u * v, "b(quv) = 0 (uv = ±1/q)")?)
    }

    pub fn s(&self, u: C, v: C) -> Result<C> {
        let q = self.q;
        let d = self.den_b(v / u, "b(v/u) = 0 (u = ±v)")? * self.den_b(q * v * v, "b(qv^2) = 0")?;
        Ok(self.phi((q * u).inv())? / d)
    }

    pub fn x(&self, u: C, v: C) -> Result<C> {
        let q = self.q;
        let d = self.den_b(u / v, "b(u/v) = 0 (u = ±v)")? * self.den_b(q * u * v, "b(quv) = 0 (uv = ±1/q)")?;
        Ok(self.phi((q * u).inv())? * self.b(q * u / v) / d)
    }

    pub fn y(&self, u: C, v: C) -> Result<C> {
        let q = self.q;
        let d = self.den_b(q * v * v, "b(qv^2) = 0")? * self.den_b(q * u * v, "b(quv) = 0 (uv = ±1/q)")?;
        Ok(-d.inv())
    }

    pub fn r(&self, u: C, v: C) -> Result<C> {
        let q = self.q;
        Ok(self.phi((q * u).inv())? / self.den_b(v / u, "b(v/u) = 0 (u = ±v)")?)
    }

    pub fn q_fn(&self, u: C, v: C) -> Result<C> {
        let q = self.q;
        let d = self.den_b(u / v, "b(u/v) = 0 (u = ±v)")? * self.den_b(q * u * v, "b(quv) = 0 (uv = ±1/q)")?;
        Ok(self.b(u * v) / d)
    }

    pub fn big_g(&self, u: C, v: C) -> Result<C> {
        let q = self.q;
        let d = self.den_b(u / v, "b(u/v) = 0 (u = ±v)")? * self.den_b(q * u * v, "b(quv) = 0 (uv = ±1/q)")?;
        Ok(d.inv())
    }

    pub fn big_f(&self, u: C, v: C) -> Result<C> {
        let q = self.q;
        let phv = guard(self.phi(v)?, || "phi(v) = 0".into())?;
        Ok(self.big_g(u, v)? * self.b(q * q * u * u) / phv)
    }

    pub fn f_tilde(&self, u: C, v: C) -> Result<C> {
        Ok(v / u * self.big_f(u, v)?)
    }

    pub fn structural(&self, name: Structural, u: C, v: C) -> Result<C> {
        nonzero(u, "structural")?;
        nonzero(v, "structural")?;
        match name {
            Structural::F => self.f(u, v),
            Structural::G => self.g(u, v),
            Structural::W => self.w(u, v),
            Structural::H => self.h(u, v),
            Structural::K => self.k(u, v),
            Structural::N => self.n_fn(u, v),
            Structural::S => self.s(u, v),
            Structural::X => self.x(u, v),
            Structural::Y => self.y(u, v),
            Structural::R => self.r(u, v),
            Structural::QFn => self.q_fn(u, v),
            Structural::BigG => self.big_g(u, v),
            Structural::BigF => self.big_f(u, v),
            Structural::FTilde => self.f_tilde(u, v),
        }
    }

    /// `Π_{x ∈ xs} fn(u, x)`.
    pub fn prod(&self, name: Structural, u: C, xs: &[C]) -> Result<C> {
        xs.iter().try_fold(ONE, |acc, &x| Ok(acc * self.structural(name, u, x)?))
    }
}

/// Names of the structural functions; `QFn` is the function called `q(u,v)`
/// in the usual tables, renamed to avoid clashing with the anisotropy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Structural {
    F,
    G,
    W,
    H,
    K,
    N,
    S,
    X,
    Y,
    R,
    QFn,
    BigG,
    BigF,
    FTilde,
}

impl Structural {
    pub const ALL: [Structural; 14] = [
        Structural::F,
        Structural::G,
        Structural::W,
        Structural::H,
        Structural::K,
        Structural::N,
        Structural::S,
        Structural::X,
        Structural::Y,
        Structural::R,
        Structural::QFn,
        Structural::BigG,
        Structural::BigF,
        Structural::FTilde,
    ];
}

/// A factorized boundary side: `(κ, κ̃, ξ, ξ̃)` on the left or `(τ, τ̃, μ, μ̃)`
/// on the right, stored as the pair `(ξ, ξ̃)` resp. `(μ, μ̃)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Factors {
    pub plain: C,
    pub tilde: C,
}

/// Boundary parameters of both ends.
///
/// Raw couplings are always present. The factorized pairs exist whenever the
/// corresponding product `κκ̃` / `ττ̃` is nonzero; at `τ̃ = 0` (triangular
/// right boundary) `right` is `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryParams {
    pub eps_plus: C,
    pub eps_minus: C,
    pub kappa: C,
    pub kappa_tilde: C,
    pub nu_plus: C,
    pub nu_minus: C,
    pub tau: C,
    pub tau_tilde: C,
    pub left: Option<Factors>,
    pub right: Option<Factors>,
}

/// `(s ± √(s² − 4))/2`, the root with modulus ≥ 1 (ties broken by phase ≥ 0).
fn split_sum(s: C) -> C {
    let d = (s * s - C::new(4.0, 0.0)).sqrt();
    let (a, b) = ((s + d) / 2.0, (s - d) / 2.0);
    if (a.norm() - b.norm()).abs() < 1e-14 {
        if a.arg() >= b.arg() { a } else { b }
    } else if a.norm() > b.norm() {
        a
    } else {
        b
    }
}

/// Recover `(a, ã)` from `a/ã + ã/a = s_ratio`, `aã + 1/(aã) = s_prod`.
fn recover_factors(s_ratio: C, s_prod: C) -> Factors {
    let x = split_sum(s_ratio);
    let y = split_sum(s_prod);
    let a = (x * y).sqrt();
    Factors { plain: a, tilde: y / a }
}

impl BoundaryParams {
    /// Build from the factorized parametrization; raw couplings follow.
    #[allow(clippy::too_many_arguments)]
    pub fn factorized(kappa: C, kappa_tilde: C, xi: C, xi_tilde: C, tau: C, tau_tilde: C, mu: C, mu_tilde: C) -> Result<Self> {
        for (x, name) in [(xi, "xi"), (xi_tilde, "xi_tilde"), (mu, "mu"), (mu_tilde, "mu_tilde")] {
            if x.norm() < EPS_GEN {
                return Err(MabaError::InvalidParams(format!("{name} must be nonzero")));
            }
        }
        let lk = I * kappa_tilde * kappa;
        let rt = I * tau_tilde * tau;
        Ok(Self {
            eps_minus: lk * (xi / xi_tilde + xi_tilde / xi),
            eps_plus: lk * (xi * xi_tilde + (xi * xi_tilde).inv()),
            kappa,
            kappa_tilde,
            nu_minus: rt * (mu / mu_tilde + mu_tilde / mu),
            nu_plus: rt * (mu * mu_tilde + (mu * mu_tilde).inv()),
            tau,
            tau_tilde,
            left: Some(Factors { plain: xi, tilde: xi_tilde }),
            right: Some(Factors { plain: mu, tilde: mu_tilde }),
        })
    }

    /// Build from raw couplings; factorized pairs are recovered where they
    /// exist, choosing the branch `|a/ã| ≥ 1`, `|aã| ≥ 1`.
    #[allow(clippy::too_many_arguments)]
    pub fn from_raw(eps_plus: C, eps_minus: C, kappa: C, kappa_tilde: C, nu_plus: C, nu_minus: C, tau: C, tau_tilde: C) -> Self {
        let lk = I * kappa_tilde * kappa;
        let rt = I * tau_tilde * tau;
        let left = (lk.norm() > 0.0).then(|| recover_factors(eps_minus / lk, eps_plus / lk));
        let right = (rt.norm() > 0.0).then(|| recover_factors(nu_minus / rt, nu_plus / rt));
        Self { eps_plus, eps_minus, kappa, kappa_tilde, nu_plus, nu_minus, tau, tau_tilde, left, right }
    }

    fn left_f(&self) -> Result<Factors> {
        self.left.ok_or_else(|| MabaError::InvalidParams("left boundary has no factorized form (κκ̃ = 0)".into()))
    }

    fn right_f(&self) -> Result<Factors> {
        self.right.ok_or_else(|| MabaError::InvalidParams("right boundary has no factorized form (ττ̃ = 0)".into()))
    }

    pub fn xi(&self) -> Result<C> {
        Ok(self.left_f()?.plain)
    }
    pub fn xi_tilde(&self) -> Result<C> {
        Ok(self.left_f()?.tilde)
    }
    pub fn mu(&self) -> Result<C> {
        Ok(self.right_f()?.plain)
    }
    pub fn mu_tilde(&self) -> Result<C> {
        Ok(self.right_f()?.tilde)
    }

    /// True if the raw couplings agree with the stored factorization.
    pub fn consistency_residual(&self) -> f64 {
        let mut r: f64 = 0.0;
        if let (Some(l), Some(rt)) = (self.left, self.right) {
            let other = Self::factorized(self.kappa, self.kappa_tilde, l.plain, l.tilde, self.tau, self.tau_tilde, rt.plain, rt.tilde);
            if let Ok(o) = other {
                for (a, b) in [(self.eps_plus, o.eps_plus), (self.eps_minus, o.eps_minus), (self.nu_plus, o.nu_plus), (self.nu_minus, o.nu_minus)] {
                    r = r.max(rel_residual(a, b));
                }
            }
        }
        r
    }

    /// `k⁻(u) = ν₋u + ν₊u⁻¹`.
    pub fn k_minus(&self, u: C) -> C {
        self.nu_minus * u + self.nu_plus / u
    }

    /// `k⁺(u) = ε₊u + ε₋u⁻¹`.
    pub fn k_plus(&self, u: C) -> C {
        self.eps_plus * u + self.eps_minus / u
    }

    /// `k̃⁻(u) = iτ̃τ(μu + μ⁻¹u⁻¹)(μ̃⁻¹u + μ̃u⁻¹)`; at `τ̃ = 0` it equals `u k⁻(u)`.
    pub fn k_tilde_minus(&self, u: C) -> Result<C> {
        match self.right {
            Some(f) => Ok(I * self.tau_tilde * self.tau * (f.plain * u + (f.plain * u).inv()) * (u / f.tilde + f.tilde / u)),
            None if self.tau_tilde.norm() == 0.0 => Ok(u * self.k_minus(u)),
            None => Err(MabaError::InvalidParams("k̃⁻ needs a factorized right boundary".into())),
        }
    }

    /// `k̃⁺(u) = iκ̃κ(ξ̃u + ξ̃⁻¹u⁻¹)(ξ⁻¹u + ξu⁻¹)`.
    pub fn k_tilde_plus(&self, u: C) -> Result<C> {
        let f = self.left_f()?;
        Ok(I * self.kappa_tilde * self.kappa * (f.tilde * u + (f.tilde * u).inv()) * (u / f.plain + f.plain / u))
    }

    pub fn boundary_scalar(&self, name: BoundaryScalar, u: C) -> Result<C> {
        nonzero(u, "boundary_scalar")?;
        match name {
            BoundaryScalar::KMinus => Ok(self.k_minus(u)),
            BoundaryScalar::KPlus => Ok(self.k_plus(u)),
            BoundaryScalar::KTildeMinus => self.k_tilde_minus(u),
            BoundaryScalar::KTildePlus => self.k_tilde_plus(u),
        }
    }

    /// Swap `μ ↔ μ̃` (and `ξ ↔ ξ̃`): one generator of the `Z²×Z²` symmetry.
    pub fn swapped(&self) -> Self {
        let sw = |f: Option<Factors>| f.map(|f| Factors { plain: f.tilde, tilde: f.plain });
        Self { left: sw(self.left), right: sw(self.right), ..self.clone() }
    }

    /// Invert all factors: the other generator of the symmetry.
    pub fn inverted(&self) -> Self {
        let inv = |f: Option<Factors>| f.map(|f| Factors { plain: f.plain.inv(), tilde: f.tilde.inv() });
        Self { left: inv(self.left), right: inv(self.right), ..self.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundaryScalar {
    KMinus,
    KPlus,
    KTildeMinus,
    KTildePlus,
}

/// Gauge parameters `α, β` and a reference dynamical integer `m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaugeFrame {
    pub alpha: C,
    pub beta: C,
    pub m: i32,
}

impl GaugeFrame {
    pub fn new(alpha: C, beta: C, m: i32) -> Self {
        Self { alpha, beta, m }
    }

    /// `γ(u, m) = α q^{−m} u − β q^{m} u⁻¹`.
    pub fn gamma_at(&self, q: C, u: C, m: i32) -> C {
        self.alpha * q.powi(-m) * u - self.beta * q.powi(m) / u
    }

    /// `γ_m = γ(1, m)`.
    pub fn gamma_m(&self, q: C, m: i32) -> C {
        self.gamma_at(q, ONE, m)
    }

    pub(crate) fn gamma_den(&self, q: C, m: i32) -> Result<C> {
        guard(self.gamma_m(q, m), || format!("gamma_{m} = 0 (degenerate gauge frame)"))
    }

    /// Reject frames where some `γ_m` vanishes in `[m0 − 2N − 2, m0 + 2N + 2]`.
    pub fn validate_window(&self, q: C, m0: i32, n: usize) -> Result<()> {
        let w = 2 * n as i32 + 2;
        for m in (m0 - w)..=(m0 + w) {
            self.gamma_den(q, m)?;
        }
        Ok(())
    }
}

/// `γ(u, frame.m)`.
pub fn gamma(q: C, u: C, frame: &GaugeFrame) -> C {
    frame.gamma_at(q, u, frame.m)
}

/// Names of the `m`-dependent coefficients entering the transfer-matrix
/// decompositions and off-shell actions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DynCoeff {
    Zeta,
    ZetaTilde,
    Delta,
    Chi,
    Rho,
    ChiBar,
    ChiHat,
    RhoHat,
    ChiBarHat,
}

/// Model parameters together with both boundaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chain {
    pub model: ModelParams,
    pub bp: BoundaryParams,
}

impl Chain {
    pub fn new(model: ModelParams, bp: BoundaryParams) -> Self {
        Self { model, bp }
    }

    pub fn q(&self) -> C {
        self.model.q
    }

    pub fn n(&self) -> usize {
        self.model.n
    }

    pub fn zeta(&self, fr: &GaugeFrame, m: i32) -> Result<C> {
        let (q, bp) = (self.q(), &self.bp);
        let (xi, xt) = (bp.xi()?, bp.xi_tilde()?);
        let a = fr.alpha * q.powi(-m - 1);
        let r = I * bp.kappa_tilde / bp.kappa;
        Ok(bp.kappa * bp.kappa / fr.gamma_den(q, m)? * (a + r * xi / xt) * (a + r * xt / xi))
    }

    pub fn zeta_tilde(&self, fr: &GaugeFrame, m: i32) -> Result<C> {
        let (q, bp) = (self.q(), &self.bp);
        let (xi, xt) = (bp.xi()?, bp.xi_tilde()?);
        let bq = fr.beta * q.powi(m - 1);
        let r = I * bp.kappa_tilde / bp.kappa;
        Ok(bp.kappa * bp.kappa / fr.gamma_den(q, m)? * (bq + r * xi / xt) * (bq + r * xt / xi))
    }

    pub fn delta(&self, fr: &GaugeFrame, m: i32) -> Result<C> {
        let (q, bp) = (self.q(), &self.bp);
        let (xi, xt) = (bp.xi()?, bp.xi_tilde()?);
        let r = I * bp.kappa_tilde / bp.kappa;
        Ok(bp.kappa * bp.kappa / fr.gamma_den(q, m + 1)?
            * (fr.alpha * q.powi(-m - 1) + r * xi / xt)
            * (fr.beta * q.powi(m + 1) + r * xt / xi))
    }

    pub fn chi(&self, fr: &GaugeFrame, m: i32) -> Result<C> {
        let (q, bp) = (self.q(), &self.bp);
        let ratio = bp.xi_tilde()? / bp.xi()?;
        Ok(I * bp.kappa_tilde * bp.kappa * (q - q.inv()) * fr.gamma_at(q, ratio, m) / fr.gamma_den(q, m - 1)?)
    }

    pub fn rho(&self, fr: &GaugeFrame, m: i32) -> Result<C> {
        let q = self.q();
        Ok((q - q.inv()) * (q.powi(-m) * fr.alpha + q.powi(m) * fr.beta) / fr.gamma_den(q, m - 1)?)
    }

    pub fn chi_bar(&self, fr: &GaugeFrame, m: i32) -> Result<C> {
        Ok(self.chi(fr, m)? - self.delta(fr, m)? * self.rho(fr, m)?)
    }

    fn hat_ratio(&self, fr: &GaugeFrame, m: i32) -> Result<C> {
        let q = self.q();
        Ok(fr.gamma_m(q, m - 1) / fr.gamma_den(q, m + 1)?)
    }

    pub fn chi_hat(&self, fr: &GaugeFrame, m: i32) -> Result<C> {
        Ok(self.chi(fr, m)? * self.hat_ratio(fr, m)?)
    }

    pub fn rho_hat(&self, fr: &GaugeFrame, m: i32) -> Result<C> {
        Ok(self.rho(fr, m)? * self.hat_ratio(fr, m)?)
    }

    /// `χ̂_m − δ_{m−2} ρ̂_m`.
    pub fn chi_bar_hat(&self, fr: &GaugeFrame, m: i32) -> Result<C> {
        Ok(self.chi_hat(fr, m)? - self.delta(fr, m - 2)? * self.rho_hat(fr, m)?)
    }

    pub fn dyn_coeff(&self, name: DynCoeff, m: i32, fr: &GaugeFrame) -> Result<C> {
        match name {
            DynCoeff::Zeta => self.zeta(fr, m),
            DynCoeff::ZetaTilde => self.zeta_tilde(fr, m),
            DynCoeff::Delta => self.delta(fr, m),
            DynCoeff::Chi => self.chi(fr, m),
            DynCoeff::Rho => self.rho(fr, m),
            DynCoeff::ChiBar => self.chi_bar(fr, m),
            DynCoeff::ChiHat => self.chi_hat(fr, m),
            DynCoeff::RhoHat => self.rho_hat(fr, m),
            DynCoeff::ChiBarHat => self.chi_bar_hat(fr, m),
        }
    }
}

/// Seeded sampler for generic parameters: moduli log-uniform in `[0.5, 2]`,
/// phases uniform.
#[derive(Debug, Clone)]
pub struct Sampler {
    rng: ChaCha8Rng,
}

impl Sampler {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn complex(&mut self) -> C {
        let lr = self.rng.random_range(0.5f64.ln()..2.0f64.ln());
        let th = self.rng.random_range(0.0..std::f64::consts::TAU);
        C::from_polar(lr.exp(), th)
    }

    /// Modulus in `[lo, hi]` (uniform), uniform phase.
    pub fn complex_in(&mut self, lo: f64, hi: f64) -> C {
        let r = self.rng.random_range(lo..hi);
        let th = self.rng.random_range(0.0..std::f64::consts::TAU);
        C::from_polar(r, th)
    }

    pub fn complexes(&mut self, k: usize) -> Vec<C> {
        (0..k).map(|_| self.complex()).collect()
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.random_range(0.0..1.0)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.random()
    }

    /// Generic model with random inhomogeneities; redraws until the guards
    /// pass and all pairwise `b`-arguments stay generic.
    pub fn model(&mut self, n: usize) -> ModelParams {
        loop {
            let q = self.complex();
            let v = self.complexes(n);
            let Ok(m) = ModelParams::new(q, v) else { continue };
            if generic_inhomogeneities(&m) {
                return m;
            }
        }
    }

    pub fn homogeneous_model(&mut self, n: usize) -> ModelParams {
        loop {
            if let Ok(m) = ModelParams::homogeneous(self.complex(), n) {
                return m;
            }
        }
    }

    pub fn boundary(&mut self) -> BoundaryParams {
        loop {
            let x = self.complexes(8);
            if let Ok(bp) = BoundaryParams::factorized(x[0], x[1], x[2], x[3], x[4], x[5], x[6], x[7]) {
                return bp;
            }
        }
    }

    pub fn chain(&mut self, n: usize) -> Chain {
        let model = self.model(n);
        Chain::new(model, self.boundary())
    }

    /// Random frame whose `γ` window around `m0` is generic.
    pub fn frame(&mut self, q: C, m0: i32, n: usize) -> GaugeFrame {
        loop {
            let fr = GaugeFrame::new(self.complex(), self.complex(), m0);
            if fr.validate_window(q, m0, n).is_ok() {
                return fr;
            }
        }
    }
}

fn generic_inhomogeneities(m: &ModelParams) -> bool {
    let q = m.q;
    for (i, &a) in m.v.iter().enumerate() {
        for &bv in &m.v[..i] {
            for x in [a / bv, a * bv, q * a / bv, q * bv / a, q * a * bv] {
                if m.b(x).norm() < 1e-2 {
                    return false;
                }
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn model_q(q: C) -> ModelParams {
        ModelParams::new(q, vec![ONE]).unwrap()
    }

    fn close(a: C, b: C, tol: f64) -> bool {
        rel_residual(a, b) <= tol
    }

    #[test]
    fn b_special_values() {
        let m = model_q(C::new(0.7, 0.4));
        let q = m.q;
        assert!(m.b(ONE).norm() < 1e-15);
        assert!(close(m.b(q), ONE, 1e-15));
        assert!(close(m.b(q * q), q + q.inv(), 1e-14));
        assert_eq!(m.checked_b(ZERO), Err(MabaError::ZeroArgument("b")));
    }

    #[test]
    fn c_and_phi_special_values() {
        let m = model_q(C::new(1.3, -0.2));
        let q = m.q;
        assert_eq!(c(ONE), ZERO);
        let u = C::new(0.3, 1.1);
        assert!((c(u) + c(u.inv())).norm() < 1e-14);
        assert!(close(m.phi(ONE).unwrap(), q + q.inv(), 1e-14));
        let pole = (q.inv()).sqrt();
        assert!(matches!(m.phi(pole), Err(MabaError::SingularPoint { .. })));
    }

    #[test]
    fn w_at_q_two() {
        let m = model_q(C::new(2.0, 0.0));
        assert!(close(m.w(ONE, ONE).unwrap(), -ONE, 1e-15));
    }

    #[test]
    fn structural_poles_are_reported() {
        let m = model_q(C::new(0.9, 0.5));
        let u = C::new(0.8, 0.3);
        for s in [Structural::F, Structural::G, Structural::H, Structural::K] {
            let e = m.structural(s, u, u).unwrap_err();
            assert!(matches!(e, MabaError::SingularPoint { .. }), "{s:?}");
        }
        let v = (m.q * u).inv();
        for s in [Structural::W, Structural::N] {
            assert!(m.structural(s, u, v).is_err(), "{s:?}");
        }
    }

    #[test]
    fn f_tilde_is_scaled_f() {
        let m = model_q(C::new(0.9, 0.5));
        let (u, v) = (C::new(0.8, 0.3), C::new(-0.4, 1.2));
        assert!(close(m.f_tilde(u, v).unwrap(), v / u * m.big_f(u, v).unwrap(), 1e-14));
        assert!(close(m.big_g(u, v).unwrap(), (m.b(u / v) * m.b(m.q * u * v)).inv(), 1e-14));
    }

    #[test]
    fn gamma_examples() {
        let q = C::new(1.1, 0.3);
        let fr = GaugeFrame::new(ONE, ONE, 0);
        assert!(gamma(q, ONE, &fr).norm() < 1e-15);
        let fr = GaugeFrame::new(C::new(0.4, 0.2), C::new(-0.7, 1.0), 2);
        let u2 = fr.beta * q.powi(4) / fr.alpha;
        assert!(gamma(q, u2.sqrt(), &fr).norm() < 1e-13);
        let m = 3;
        let bad = GaugeFrame::new(I * q.powi(m), I * q.powi(-m), 0);
        assert!(bad.gamma_m(q, m).norm() < 1e-14);
        assert!(bad.validate_window(q, m, 1).is_err());
    }

    #[test]
    fn boundary_scalar_examples() {
        let mut s = Sampler::new(3);
        let bp = s.boundary();
        assert!(close(bp.k_minus(ONE), bp.nu_minus + bp.nu_plus, 1e-15));
        let mu = bp.mu().unwrap();
        assert!(bp.k_tilde_minus(I / mu).unwrap().norm() < 1e-13);
        let u = s.complex();
        let lhs = u * bp.k_minus(u) - bp.k_tilde_minus(u).unwrap();
        let rhs = I * bp.tau * bp.tau_tilde * bp.mu_tilde().unwrap() / mu * c(u);
        assert!(close(lhs, rhs, 1e-13));
    }

    #[test]
    fn raw_roundtrip_recovers_couplings() {
        let mut s = Sampler::new(11);
        for _ in 0..20 {
            let bp = s.boundary();
            let raw = BoundaryParams::from_raw(bp.eps_plus, bp.eps_minus, bp.kappa, bp.kappa_tilde, bp.nu_plus, bp.nu_minus, bp.tau, bp.tau_tilde);
            assert!(raw.consistency_residual() < 1e-12);
            let r = raw.right.unwrap();
            assert!((r.plain / r.tilde).norm() >= 1.0 - 1e-12);
        }
        let tri = BoundaryParams::from_raw(ONE, ONE, ONE, ONE, C::new(0.3, 0.1), ONE, ONE, ZERO);
        assert!(tri.right.is_none());
        let u = C::new(0.7, 0.2);
        assert_eq!(tri.k_tilde_minus(u).unwrap(), u * tri.k_minus(u));
    }

    #[test]
    fn dyn_coeff_zeros() {
        let mut s = Sampler::new(5);
        let ch = s.chain(2);
        let q = ch.q();
        let bp = &ch.bp;
        let (xi, xt) = (bp.xi().unwrap(), bp.xi_tilde().unwrap());
        let m = 1;
        let fr = GaugeFrame::new(-I * q.powi(m + 1) * bp.kappa_tilde * xi / (bp.kappa * xt), s.complex(), m);
        assert!(ch.dyn_coeff(DynCoeff::Zeta, m, &fr).unwrap().norm() < 1e-12);
        let fr = GaugeFrame::new(s.complex(), -I * q.powi(-m - 1) * bp.kappa_tilde * xt / (bp.kappa * xi), m);
        assert!(ch.dyn_coeff(DynCoeff::Delta, m, &fr).unwrap().norm() < 1e-12);
        let alpha = s.complex();
        let fr = GaugeFrame::new(alpha, (xt / xi).powi(2) * alpha * q.powi(-2 * m), m);
        assert!(ch.dyn_coeff(DynCoeff::Chi, m, &fr).unwrap().norm() < 1e-12);
        let fr = s.frame(q, m, 2);
        let cb = ch.chi_bar(&fr, m).unwrap();
        assert!(close(cb, ch.chi(&fr, m).unwrap() - ch.delta(&fr, m).unwrap() * ch.rho(&fr, m).unwrap(), 1e-14));
    }

    #[test]
    fn sampler_is_deterministic() {
        let a: Vec<C> = Sampler::new(42).complexes(5);
        let b: Vec<C> = Sampler::new(42).complexes(5);
        assert_eq!(a, b);
        assert!(a.iter().all(|z| z.norm() >= 0.5 && z.norm() <= 2.0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn f_matches_its_definition(seed in any::<u64>()) {
            let mut s = Sampler::new(seed);
            let m = s.model(1);
            let (u, v) = (s.complex(), s.complex());
            let q = m.q;
            if let Ok(f) = m.f(u, v) {
                let lhs = f * m.b(v / u) * m.b(q * u * v);
                prop_assert!(rel_residual(lhs, m.b(q * v / u) * m.b(u * v)) <= 1e-12);
            }
        }

        #[test]
        fn exchange_identities_for_both_boundary_functions(seed in any::<u64>()) {
            let mut s = Sampler::new(seed);
            let ch = s.chain(1);
            let m = &ch.model;
            let q = m.q;
            let (u, v) = (s.complex(), s.complex());
            let eval = || -> Result<Vec<(C, C)>> {
                let mut out = Vec::new();
                let ks: [fn(&BoundaryParams, C) -> C; 2] = [BoundaryParams::k_minus, BoundaryParams::k_plus];
                for k in ks {
                    let kk = |x: C| k(&ch.bp, x);
                    let uwt1 = m.g(u, v)? * m.phi(u)? * kk(u) + m.n_fn(u, v)? * kk((q * u).inv());
                    out.push((uwt1, m.big_f(u, v)? * m.phi((q * v).inv())? * m.phi(v)? * kk(v)));
                    let uwt2 = m.k(u, v)? * kk((q * u).inv()) + m.w(u, v)? * m.phi(u)? * kk(u);
                    out.push((uwt2, -m.big_f(u, v)? * m.phi(v)? * kk((q * v).inv())));
                }
                Ok(out)
            };
            if let Ok(pairs) = eval() {
                for (a, b) in pairs {
                    prop_assert!(rel_residual(a, b) <= 1e-11);
                }
            }
        }

        #[test]
        fn symmetry_leaves_raw_couplings_fixed(seed in any::<u64>()) {
            let mut s = Sampler::new(seed);
            let bp = s.boundary();
            for other in [bp.swapped(), bp.inverted()] {
                let l = other.left.unwrap();
                let r = other.right.unwrap();
                let re = BoundaryParams::factorized(bp.kappa, bp.kappa_tilde, l.plain, l.tilde, bp.tau, bp.tau_tilde, r.plain, r.tilde).unwrap();
                for (a, b) in [(re.eps_plus, bp.eps_plus), (re.eps_minus, bp.eps_minus), (re.nu_plus, bp.nu_plus), (re.nu_minus, bp.nu_minus)] {
                    prop_assert!(rel_residual(a, b) <= 1e-13);
                }
            }
        }
    }
}
