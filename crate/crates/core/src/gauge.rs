//! Gauge (vertex–face) transformation: the local gauge vectors, the
//! dynamical operator family obtained by sandwiching the monodromy between
//! them, their exchange relations, the transfer-matrix decompositions and the
//! off-shell actions of `t(u)` on strings of dynamical `B`s and `C`s.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::lattice::{kron, r_matrix, rel_residual_mat, rel_residual_vec, Mat, QuantumOperator, Vector};
use crate::scalars::{c, rel_residual, Chain, GaugeFrame, Structural, C, ONE};
use crate::transfer::{double_row_monodromy, extract_family, transfer_matrix, OperatorFamily};

fn v2(a: C, b: C) -> Vector {
    Vector::from_vec(vec![a, b])
}

/// Names of the `m`-dependent exchange coefficients; `Hat*` belong to the
/// `{Â, D̂, C}` sector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DynStructural {
    G,
    W,
    K,
    N,
    HatG,
    HatW,
    HatK,
    HatN,
}

/// The diagonal coefficients of the decompositions of `t(u)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagonalCoeffs {
    /// `φ(u)k̃⁺(u)/u`
    pub at: C,
    /// `k̃⁺(q⁻¹u⁻¹)/u`
    pub dt: C,
    /// `k̃⁺(qu)/u`
    pub ah: C,
    /// `φ(u)k̃⁺(u⁻¹)/u`
    pub dh: C,
}

impl DiagonalCoeffs {
    pub fn new(chain: &Chain, u: C) -> Result<Self> {
        let q = chain.q();
        let bp = &chain.bp;
        let phi = chain.model.phi(u)?;
        Ok(Self {
            at: phi * bp.k_tilde_plus(u)? / u,
            dt: bp.k_tilde_plus((q * u).inv())? / u,
            ah: bp.k_tilde_plus(q * u)? / u,
            dh: phi * bp.k_tilde_plus(u.inv())? / u,
        })
    }
}

/// Actions of `t(u)`-pieces on strings, checked by [`Dynamical::string_action_residual`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StringAction {
    AOnB,
    DOnB,
    DiagonalOnB,
    PseudoOnB,
    HatDiagonalOnC,
    HatPseudoOnC,
}

impl StringAction {
    pub const ALL: [StringAction; 6] = [Self::AOnB, Self::DOnB, Self::DiagonalOnB, Self::PseudoOnB, Self::HatDiagonalOnC, Self::HatPseudoOnC];
}

/// Exchange relations of the dynamical family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DynamicalRelation {
    BB,
    AB,
    DB,
    CC,
    AhatC,
    DhatC,
}

impl DynamicalRelation {
    pub const ALL: [DynamicalRelation; 6] = [Self::BB, Self::AB, Self::DB, Self::CC, Self::AhatC, Self::DhatC];

    pub fn label(self) -> &'static str {
        match self {
            Self::BB => "comBdBd",
            Self::AB => "comAdBd",
            Self::DB => "comDdBd",
            Self::CC => "comCdCd",
            Self::AhatC => "comhAdCd",
            Self::DhatC => "comhDdCd",
        }
    }
}

/// A chain seen through a gauge frame `(α, β)`.
#[derive(Debug, Clone, Copy)]
pub struct Dynamical<'a> {
    pub chain: &'a Chain,
    pub frame: GaugeFrame,
}

impl<'a> Dynamical<'a> {
    pub fn new(chain: &'a Chain, frame: GaugeFrame) -> Self {
        Self { chain, frame }
    }

    fn q(&self) -> C {
        self.chain.q()
    }

    /// `γ(u, m)`.
    pub fn gamma(&self, u: C, m: i32) -> C {
        self.frame.gamma_at(self.q(), u, m)
    }

    /// `γ_m`, rejected when it vanishes.
    pub fn gm(&self, m: i32) -> Result<C> {
        self.frame.gamma_den(self.q(), m)
    }

    /// `X(u, m) = (α q^{−m}/u, 1)`.
    pub fn x(&self, u: C, m: i32) -> Vector {
        v2(self.frame.alpha * self.q().powi(-m) / u, ONE)
    }

    /// `Y(u, m) = (β q^{m}/u, 1)`.
    pub fn y(&self, u: C, m: i32) -> Vector {
        v2(self.frame.beta * self.q().powi(m) / u, ONE)
    }

    /// `X̃(u, m) = qu/γ_{m−1} · (−1, α q^{−m}/u)`, a row vector.
    pub fn x_tilde(&self, u: C, m: i32) -> Result<Vector> {
        let s = self.q() * u / self.gm(m - 1)?;
        Ok(v2(-s, s * self.frame.alpha * self.q().powi(-m) / u))
    }

    /// `Ỹ(u, m) = qu/γ_{m+1} · (1, −β q^{m}/u)`, a row vector.
    pub fn y_tilde(&self, u: C, m: i32) -> Result<Vector> {
        let s = self.q() * u / self.gm(m + 1)?;
        Ok(v2(s, -s * self.frame.beta * self.q().powi(m) / u))
    }

    /// Biorthogonality and closure of the gauge vectors; `(name, residual)`.
    pub fn vector_identities(&self, u: C, m: i32) -> Result<Vec<(&'static str, f64)>> {
        let dot = |a: &Vector, b: &Vector| a.transpose() * b;
        let d = |a: &Vector, b: &Vector| dot(a, b)[(0, 0)];
        let xt = self.x_tilde(u, m)?;
        let yt = self.y_tilde(u, m)?;
        let closure = self.y(u, m - 1) * self.x_tilde(u, m + 1)?.transpose() + self.x(u, m + 1) * self.y_tilde(u, m - 1)?.transpose();
        Ok(vec![
            ("XtX", d(&xt, &self.x(u, m)).norm()),
            ("YtY", d(&yt, &self.y(u, m)).norm()),
            ("XtY", rel_residual(d(&self.x_tilde(u, m + 1)?, &self.y(u, m - 1)), ONE)),
            ("YtX", rel_residual(d(&self.y_tilde(u, m - 1)?, &self.x(u, m + 1)), ONE)),
            ("closure", rel_residual_mat(&closure, &Mat::identity(2, 2))),
        ])
    }

    /// The eight intertwining relations of `R(u/v)` with the gauge vectors.
    pub fn intertwining_residuals(&self, u: C, v: C, m: i32) -> Result<Vec<(&'static str, f64)>> {
        let model = &self.chain.model;
        let q = self.q();
        let r = r_matrix(u / v, model);
        let rt = r.transpose();
        let kv = |a: Vector, b: Vector| kron(&Mat::from_column_slice(2, 1, a.as_slice()), &Mat::from_column_slice(2, 1, b.as_slice())).column(0).into_owned();
        let bq = model.b(q * u / v);
        let buv = model.b(u / v);
        let (x, y) = (|s: C, k: i32| self.x(s, k), |s: C, k: i32| self.y(s, k));
        let (xt, yt) = (|s: C, k: i32| self.x_tilde(s, k), |s: C, k: i32| self.y_tilde(s, k));
        let g = |k: i32| self.gm(k);
        Ok(vec![
            ("RXX", rel_residual_vec(&(&r * kv(x(u, m + 1), x(v, m))), &(kv(x(u, m), x(v, m + 1)) * bq))),
            ("RYY", rel_residual_vec(&(&r * kv(y(u, m), y(v, m + 1))), &(kv(y(u, m + 1), y(v, m)) * bq))),
            (
                "RXY",
                rel_residual_vec(
                    &(&r * kv(x(u, m + 1), y(v, m))),
                    &(kv(x(u, m + 2), y(v, m + 1)) * (buv * g(m)? / g(m + 1)?) + kv(y(u, m), x(v, m + 1)) * (self.gamma(v / u, m + 1) / g(m + 1)?)),
                ),
            ),
            (
                "RYX",
                rel_residual_vec(
                    &(&r * kv(y(u, m), x(v, m + 1))),
                    &(kv(y(u, m - 1), x(v, m)) * (buv * g(m + 1)? / g(m)?) + kv(x(u, m + 1), y(v, m)) * (self.gamma(u / v, m) / g(m)?)),
                ),
            ),
            ("XtXtR", rel_residual_vec(&(&rt * kv(xt(u, m + 1)?, xt(v, m)?)), &(kv(xt(u, m)?, xt(v, m + 1)?) * bq))),
            ("YtYtR", rel_residual_vec(&(&rt * kv(yt(u, m)?, yt(v, m + 1)?)), &(kv(yt(u, m + 1)?, yt(v, m)?) * bq))),
            (
                "XtYtR",
                rel_residual_vec(
                    &(&rt * kv(xt(u, m + 1)?, yt(v, m - 2)?)),
                    &(kv(xt(u, m + 2)?, yt(v, m - 1)?) * (buv * g(m + 1)? / g(m)?) + kv(yt(u, m - 2)?, xt(v, m + 1)?) * (self.gamma(v / u, m) / g(m)?)),
                ),
            ),
            (
                "YtXtR",
                rel_residual_vec(
                    &(&rt * kv(yt(u, m - 1)?, xt(v, m + 2)?)),
                    &(kv(yt(u, m - 2)?, xt(v, m + 1)?) * (buv * g(m - 1)? / g(m)?) + kv(xt(u, m + 2)?, yt(v, m - 1)?) * (self.gamma(u / v, m) / g(m)?)),
                ),
            ),
        ])
    }

    /// `Σ_ij row_i col_j K_ij` over the monodromy's auxiliary blocks.
    fn sandwich(k: &QuantumOperator, row: &Vector, col: &Vector) -> Mat {
        let mut out = Mat::zeros(k.dim() / 2, k.dim() / 2);
        for i in 0..2 {
            for j in 0..2 {
                out += k.aux_block(i, j) * (row[i] * col[j]);
            }
        }
        out
    }

    /// Dynamical operators `A(u,m), B(u,m), C(u,m), D(u,m), Â(u,m), D̂(u,m)`.
    pub fn family(&self, u: C, m: i32) -> Result<OperatorFamily> {
        let k = double_row_monodromy(u, self.chain)?;
        self.family_from(&k, u, m)
    }

    pub fn family_from(&self, k: &QuantumOperator, u: C, m: i32) -> Result<OperatorFamily> {
        let model = &self.chain.model;
        let bq = crate::scalars::guard(model.b(self.q() * u * u), || "b(qu^2) = 0 (u^2 = ±1/q)".into())?;
        let ui = u.inv();
        let c_ = Self::sandwich(k, &self.x_tilde(u, m)?, &self.x(ui, m));
        let b_ = Self::sandwich(k, &self.y_tilde(u, m)?, &self.y(ui, m));
        let a_ = Self::sandwich(k, &self.y_tilde(u, m - 2)?, &self.x(ui, m));
        let dh = Self::sandwich(k, &self.x_tilde(u, m + 2)?, &self.y(ui, m));
        let gmm = self.gm(m)?;
        let ah = &a_ * (self.gm(m - 1)? / gmm) - &dh * (self.gamma(u * u, m - 1) / (bq * gmm));
        let d_ = &dh * (self.gm(m + 1)? / gmm) - &a_ * (self.gamma(ui * ui, m + 1) / (bq * gmm));
        Ok(OperatorFamily { a: a_, b: b_, c: c_, d: d_, a_hat: ah, d_hat: dh })
    }

    /// Dynamical operators re-expressed through `{A, B, C, D}`;
    /// residuals for `(B, A, D, C)`.
    pub fn expansion_residuals(&self, u: C, m: i32) -> Result<[f64; 4]> {
        let model = &self.chain.model;
        let q = self.q();
        let (al, be) = (self.frame.alpha, self.frame.beta);
        let f0 = extract_family(u, self.chain)?;
        let fd = self.family(u, m)?;
        let (a, b, cc, d) = (&f0.a, &f0.b, &f0.c, &f0.d);
        let pq = model.phi((q * u).inv())?;
        let pu = model.phi(u)?;
        let bq = model.b(q * u * u);
        let qu = q * u;
        let bm = q.powi(m) * be;
        let bx = (b + (a * (qu * pq) - d / u) * bm - cc * (bm * bm)) * (qu / self.gm(m + 1)?);
        let pre = qu / self.gm(m - 1)?;
        let ax = (b + a * (u * q.powi(-m) * al) - a * (q.powi(m - 2) * be / (u * bq)) - d * (q.powi(m - 2) * be / u) - cc * (q.powi(-2) * al * be)) * pre;
        let dx = (d * (q.powi(-m - 1) * al / u + q.powi(m - 1) * be * u / bq) - a * (q.powi(m - 1) * be * u * pu * pq) - (b - cc * (q.powi(-2) * al * be)) * pu) * pre;
        let cx = (cc * (q.powi(-2 * m) * al * al) - (a * (qu * pq) - d / u) * (q.powi(-m) * al) - b) * pre;
        Ok([rel_residual_mat(&fd.b, &bx), rel_residual_mat(&fd.a, &ax), rel_residual_mat(&fd.d, &dx), rel_residual_mat(&fd.c, &cx)])
    }

    /// The dynamical exchange coefficients at `(u, v, m)`.
    pub fn structural(&self, name: DynStructural, u: C, v: C, m: i32) -> Result<C> {
        let md = &self.chain.model;
        Ok(match name {
            DynStructural::G => self.gamma(u / v, m + 1) / self.gm(m + 1)? * md.g(u, v)?,
            DynStructural::W => self.gamma(u * v, m) / self.gm(m + 1)? * md.w(u, v)?,
            DynStructural::K => self.gamma(v / u, m + 1) / self.gm(m + 1)? * md.k(u, v)?,
            DynStructural::N => self.gamma((u * v).inv(), m + 2) / self.gm(m + 1)? * md.n_fn(u, v)?,
            DynStructural::HatG => self.gamma(v / u, m - 1) / self.gm(m - 1)? * md.g(u, v)?,
            DynStructural::HatW => self.gamma((u * v).inv(), m) / self.gm(m - 1)? * md.w(u, v)?,
            DynStructural::HatK => self.gamma(u / v, m - 1) / self.gm(m - 1)? * md.k(u, v)?,
            DynStructural::HatN => self.gamma(u * v, m - 2) / self.gm(m - 1)? * md.n_fn(u, v)?,
        })
    }

    /// Relative residual of one dynamical exchange relation.
    pub fn relation_residual(&self, rel: DynamicalRelation, u: C, v: C, m: i32) -> Result<f64> {
        use DynStructural as S;
        use DynamicalRelation as R;
        let md = &self.chain.model;
        let s = |n, m| self.structural(n, u, v, m);
        let (lhs, rhs) = match rel {
            R::BB => (&self.family(u, m + 2)?.b * &self.family(v, m)?.b, &self.family(v, m + 2)?.b * &self.family(u, m)?.b),
            R::CC => (&self.family(u, m - 2)?.c * &self.family(v, m)?.c, &self.family(v, m - 2)?.c * &self.family(u, m)?.c),
            R::AB | R::DB => {
                let (hi, fv, fu) = (self.family(u, m + 2)?, self.family(v, m)?, self.family(u, m)?);
                if rel == R::AB {
                    (&hi.a * &fv.b, &fv.b * &fu.a * md.f(u, v)? + &fu.b * &fv.a * s(S::G, m)? + &fu.b * &fv.d * s(S::W, m)?)
                } else {
                    (&hi.d * &fv.b, &fv.b * &fu.d * md.h(u, v)? + &fu.b * &fv.d * s(S::K, m)? + &fu.b * &fv.a * s(S::N, m)?)
                }
            }
            R::AhatC | R::DhatC => {
                let (lo, fv, fu) = (self.family(u, m - 2)?, self.family(v, m)?, self.family(u, m)?);
                if rel == R::AhatC {
                    (&lo.a_hat * &fv.c, &fv.c * &fu.a_hat * md.h(u, v)? + &fu.c * &fv.a_hat * s(S::HatK, m)? + &fu.c * &fv.d_hat * s(S::HatN, m)?)
                } else {
                    (&lo.d_hat * &fv.c, &fv.c * &fu.d_hat * md.f(u, v)? + &fu.c * &fv.d_hat * s(S::HatG, m)? + &fu.c * &fv.a_hat * s(S::HatW, m)?)
                }
            }
        };
        Ok(rel_residual_mat(&lhs, &rhs))
    }

    /// `t_d(u, m) = at·A(u,m) + dt·D(u,m)`.
    pub fn t_diagonal(&self, u: C, fam: &OperatorFamily) -> Result<Mat> {
        let dc = DiagonalCoeffs::new(self.chain, u)?;
        Ok(&fam.a * dc.at + &fam.d * dc.dt)
    }

    /// `t_ps(u, m) = φ(q⁻¹u⁻¹)A(u,m) − D(u,m)`.
    pub fn t_pseudo(&self, u: C, fam: &OperatorFamily) -> Result<Mat> {
        Ok(&fam.a * self.chain.model.phi((self.q() * u).inv())? - &fam.d)
    }

    /// `t̂_d(u, m) = ah·Â(u,m) + dh·D̂(u,m)`.
    pub fn t_hat_diagonal(&self, u: C, fam: &OperatorFamily) -> Result<Mat> {
        let dc = DiagonalCoeffs::new(self.chain, u)?;
        Ok(&fam.a_hat * dc.ah + &fam.d_hat * dc.dh)
    }

    /// `t̂_ps(u, m) = −Â(u,m) + φ(q⁻¹u⁻¹)D̂(u,m)`.
    pub fn t_hat_pseudo(&self, u: C, fam: &OperatorFamily) -> Result<Mat> {
        Ok(&fam.d_hat * self.chain.model.phi((self.q() * u).inv())? - &fam.a_hat)
    }

    /// Residuals of `t = t_d + c(qu)/u (ζ_m B − ζ̃_m C − δ_m t_ps)` and
    /// `t = t̂_d + c(qu)/u (ζ_m B − ζ̃_m C + δ_{m−2} t̂_ps)`.
    pub fn decomposition_residuals(&self, u: C, m: i32) -> Result<[f64; 2]> {
        let t = transfer_matrix(u, self.chain)?;
        let fd = self.family(u, m)?;
        let fr = &self.frame;
        let ch = self.chain;
        let pre = c(self.q() * u) / u;
        let off = &fd.b * ch.zeta(fr, m)? - &fd.c * ch.zeta_tilde(fr, m)?;
        let plain = self.t_diagonal(u, &fd)? + (&off - self.t_pseudo(u, &fd)? * ch.delta(fr, m)?) * pre;
        let hat = self.t_hat_diagonal(u, &fd)? + (&off + self.t_hat_pseudo(u, &fd)? * ch.delta(fr, m - 2)?) * pre;
        Ok([rel_residual_mat(&t, &plain), rel_residual_mat(&t, &hat)])
    }

    /// The four plain and four hatted functional relations among the
    /// exchange and diagonal coefficients, as `(name, residual)`.
    pub fn functional_relations(&self, u: C, v: C, m: i32) -> Result<Vec<(&'static str, f64)>> {
        use DynStructural as S;
        let md = &self.chain.model;
        let (ch, fr, q) = (self.chain, &self.frame, self.q());
        let (du, dv) = (DiagonalCoeffs::new(ch, u)?, DiagonalCoeffs::new(ch, v)?);
        let s = |n| self.structural(n, u, v, m);
        let ft = md.f_tilde(u, v)?;
        let gg = md.big_g(u, v)?;
        let pqu = md.phi((q * u).inv())?;
        let pqv = md.phi((q * v).inv())?;
        let pv = md.phi(v)?;
        let cq = c(q * u) / u;
        let bvv = md.b(v * v);
        let bvi = md.b((q * q * v * v).inv());
        let (chi, rho) = (ch.chi(fr, m + 2)?, ch.rho(fr, m + 2)?);
        let (chih, rhoh) = (ch.chi_hat(fr, m - 2)?, ch.rho_hat(fr, m - 2)?);
        Ok(vec![
            ("FR1", rel_residual(du.at * s(S::G)? + du.dt * s(S::N)?, ft * pqv * dv.at + chi * cq * pqv)),
            ("FR2", rel_residual(du.at * s(S::W)? + du.dt * s(S::K)?, -ft * pv * dv.dt - chi * cq)),
            ("FR3", rel_residual(pqu * s(S::G)? - s(S::N)?, pqv * (gg * bvv + rho))),
            ("FR4", rel_residual(pqu * s(S::W)? - s(S::K)?, -(gg * bvi + rho))),
            ("hFR1", rel_residual(du.dh * s(S::HatG)? + du.ah * s(S::HatN)?, ft * pqv * dv.dh + chih * cq * pqv)),
            ("hFR2", rel_residual(du.ah * s(S::HatK)? + du.dh * s(S::HatW)?, -ft * pv * dv.ah - chih * cq)),
            ("hFR3", rel_residual(pqu * s(S::HatW)? - s(S::HatK)?, -gg * bvi + rhoh)),
            ("hFR4", rel_residual(pqu * s(S::HatG)? - s(S::HatN)?, pqv * (gg * bvv - rhoh))),
        ])
    }

    /// Residuals of the two summation identities over `ū`:
    /// `Σᵢ (g_i Πf − w_i Πh φ(uᵢ)) = γ_{m−2M+1}/γ_{m+1} − Π f(u, ū)` and its
    /// `(n, k)` companion.
    pub fn summation_identities(&self, u: C, us: &[C], m: i32) -> Result<[f64; 2]> {
        use DynStructural as S;
        let md = &self.chain.model;
        let (mut s1, mut s2) = (C::default(), C::default());
        for (i, &ui) in us.iter().enumerate() {
            let rest = remove(us, i);
            let pf = md.prod(Structural::F, ui, &rest)?;
            let ph = md.prod(Structural::H, ui, &rest)? * md.phi(ui)?;
            s1 += self.structural(S::G, u, ui, m)? * pf - self.structural(S::W, u, ui, m)? * ph;
            s2 += self.structural(S::N, u, ui, m)? * pf - self.structural(S::K, u, ui, m)? * ph;
        }
        let ratio = self.gm(m - 2 * us.len() as i32 + 1)? / self.gm(m + 1)?;
        Ok([
            rel_residual(s1, ratio - md.prod(Structural::F, u, us)?),
            rel_residual(s2, -md.phi(u)? * (ratio - md.prod(Structural::H, u, us)?)),
        ])
    }

    /// `B(u₁, m−2)B(u₂, m−4)…B(u_M, m−2M)`.
    pub fn string_b(&self, us: &[C], m: i32) -> Result<Mat> {
        let mut r = Mat::identity(1 << self.chain.n(), 1 << self.chain.n());
        for (j, &u) in us.iter().enumerate() {
            r *= self.family(u, m - 2 * (j as i32 + 1))?.b;
        }
        Ok(r)
    }

    /// `C(u₁, m+2)C(u₂, m+4)…C(u_M, m+2M)`.
    pub fn string_c(&self, us: &[C], m: i32) -> Result<Mat> {
        let mut r = Mat::identity(1 << self.chain.n(), 1 << self.chain.n());
        for (j, &u) in us.iter().enumerate() {
            r *= self.family(u, m + 2 * (j as i32 + 1))?.c;
        }
        Ok(r)
    }

    /// Relative residual of an off-shell action on a string of `M = ū.len()`
    /// dynamical creation operators, with reference level `m`.
    pub fn string_action_residual(&self, which: StringAction, u: C, us: &[C], m: i32) -> Result<f64> {
        use DynStructural as S;
        use StringAction as A;
        let md = &self.chain.model;
        let (ch, fr, q) = (self.chain, &self.frame, self.q());
        let mm = us.len() as i32;
        let on_c = matches!(which, A::HatDiagonalOnC | A::HatPseudoOnC);
        let shifted = if on_c { m + 2 * mm } else { m - 2 * mm };
        let s = if on_c { self.string_c(us, m)? } else { self.string_b(us, m)? };
        let fu = self.family(u, m)?;
        let fs = self.family(u, shifted)?;
        let pf = md.prod(Structural::F, u, us)?;
        let ph = md.prod(Structural::H, u, us)?;
        let pqu = md.phi((q * u).inv())?;
        let du = DiagonalCoeffs::new(ch, u)?;
        let cq = c(q * u) / u;
        let (lhs, mut rhs) = match which {
            A::AOnB => (&fu.a * &s, &s * &fs.a * pf),
            A::DOnB => (&fu.d * &s, &s * &fs.d * ph),
            A::DiagonalOnB => (self.t_diagonal(u, &fu)? * &s, &s * (&fs.a * (pf * du.at) + &fs.d * (ph * du.dt))),
            A::PseudoOnB => (self.t_pseudo(u, &fu)? * &s, &s * (&fs.a * (pqu * pf) - &fs.d * ph)),
            A::HatDiagonalOnC => (self.t_hat_diagonal(u, &fu)? * &s, &s * (&fs.a_hat * (ph * du.ah) + &fs.d_hat * (pf * du.dh))),
            A::HatPseudoOnC => (self.t_hat_pseudo(u, &fu)? * &s, &s * (&fs.d_hat * (pqu * pf) - &fs.a_hat * ph)),
        };
        for (i, &ui) in us.iter().enumerate() {
            let rest = remove(us, i);
            let fi = self.family(ui, shifted)?;
            let mut rep = us.to_vec();
            rep[i] = u;
            let si = if on_c { self.string_c(&rep, m)? } else { self.string_b(&rep, m)? };
            let pfi = md.prod(Structural::F, ui, &rest)?;
            let phi_ = md.prod(Structural::H, ui, &rest)?;
            let pqi = md.phi((q * ui).inv())?;
            let pi = md.phi(ui)?;
            let di = DiagonalCoeffs::new(ch, ui)?;
            let ft = md.f_tilde(u, ui)?;
            let gg = md.big_g(u, ui)?;
            let st = |n| self.structural(n, u, ui, m - 2);
            let term = match which {
                A::AOnB => &fi.a * (st(S::G)? * pfi) + &fi.d * (st(S::W)? * phi_),
                A::DOnB => &fi.d * (st(S::K)? * phi_) + &fi.a * (st(S::N)? * pfi),
                A::DiagonalOnB => {
                    (&fi.a * (pqi * pfi * di.at) - &fi.d * (pi * phi_ * di.dt)) * ft + (&fi.a * (pqi * pfi) - &fi.d * phi_) * (ch.chi(fr, m)? * cq)
                }
                A::PseudoOnB => {
                    &fi.a * (gg * md.b(ui * ui) * pqi * pfi) - &fi.d * (gg * md.b((q * q * ui * ui).inv()) * phi_) + (&fi.a * (pqi * pfi) - &fi.d * phi_) * ch.rho(fr, m)?
                }
                A::HatDiagonalOnC => {
                    (&fi.d_hat * (pqi * pfi * di.dh) - &fi.a_hat * (pi * phi_ * di.ah)) * ft + (&fi.d_hat * (pqi * pfi) - &fi.a_hat * phi_) * (ch.chi_hat(fr, m)? * cq)
                }
                A::HatPseudoOnC => {
                    &fi.d_hat * (gg * md.b(ui * ui) * pqi * pfi) - &fi.a_hat * (gg * md.b((q * q * ui * ui).inv()) * phi_) - (&fi.d_hat * (pqi * pfi) - &fi.a_hat * phi_) * ch.rho_hat(fr, m)?
                }
            };
            rhs += si * term;
        }
        Ok(rel_residual_mat(&lhs, &rhs))
    }
}

pub(crate) fn remove(us: &[C], i: usize) -> Vec<C> {
    us.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &x)| x).collect()
}
