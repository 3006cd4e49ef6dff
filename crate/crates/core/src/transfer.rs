//! Double-row monodromy, the operator families `{A, B, C, D}` and
//! `{Â, D̂}`, the transfer matrix, the Hamiltonian (built directly and from
//! the logarithmic derivative of `t(u)`), and the exchange relations.

use serde::{Deserialize, Serialize};

use crate::boundary::{hamiltonian_couplings, k_minus_matrix, k_plus_matrix, HamiltonianCouplings};
use crate::error::{MabaError, Result};
use crate::lattice::{pauli_on_site, r_matrix, rel_residual_mat, sites, Mat, Pauli, QuantumOperator, Space};
use crate::scalars::{guard, Chain, ModelParams, C, ONE};

/// `R_{a1}(u/v₁)…R_{aN}(u/v_N) K⁻_a(u) R_{aN}(uv_N)…R_{a1}(uv₁)` on the
/// given layout, which must contain `aux` and all sites.
pub fn monodromy_in(u: C, chain: &Chain, aux: Space, layout: Vec<Space>) -> Result<QuantumOperator> {
    if u.norm() == 0.0 {
        return Err(MabaError::ZeroArgument("double_row_monodromy"));
    }
    let m = &chain.model;
    let mut k = QuantumOperator::identity(layout);
    for i in 0..m.n {
        k.apply_left(&r_matrix(u * m.v[i], m), &[aux, Space::Site(i + 1)])?;
    }
    k.apply_left(&k_minus_matrix(u, &chain.bp), &[aux])?;
    for i in (0..m.n).rev() {
        k.apply_left(&r_matrix(u / m.v[i], m), &[aux, Space::Site(i + 1)])?;
    }
    Ok(k)
}

fn aux_layout(n: usize) -> Vec<Space> {
    let mut l = vec![Space::Aux(0)];
    l.extend(sites(n));
    l
}

/// Double-row monodromy on `V_a ⊗ ℋ` with the auxiliary space outermost.
pub fn double_row_monodromy(u: C, chain: &Chain) -> Result<QuantumOperator> {
    monodromy_in(u, chain, Space::Aux(0), aux_layout(chain.n()))
}

/// The six quantum operators read off the monodromy's auxiliary blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorFamily {
    pub a: Mat,
    pub b: Mat,
    pub c: Mat,
    pub d: Mat,
    pub a_hat: Mat,
    pub d_hat: Mat,
}

impl OperatorFamily {
    /// `A = K₁₁`, `B = K₁₂`, `C = K₂₁`, `D = K₂₂ − A/b(qu²)`,
    /// `D̂ = K₂₂`, `Â = K₁₁ − D̂/b(qu²)`.
    pub fn from_monodromy(k: &QuantumOperator, u: C, model: &ModelParams) -> Result<Self> {
        let bq = guard(model.b(model.q * u * u), || "b(qu^2) = 0 (u^2 = ±1/q)".into())?;
        let (k11, k12, k21, k22) = (k.aux_block(0, 0), k.aux_block(0, 1), k.aux_block(1, 0), k.aux_block(1, 1));
        Ok(Self {
            d: &k22 - &k11 / bq,
            a_hat: &k11 - &k22 / bq,
            a: k11,
            b: k12,
            c: k21,
            d_hat: k22,
        })
    }
}

pub fn extract_family(u: C, chain: &Chain) -> Result<OperatorFamily> {
    OperatorFamily::from_monodromy(&double_row_monodromy(u, chain)?, u, &chain.model)
}

/// `t(u) = tr_a K⁺_a(u) K_a(u)`.
pub fn transfer_matrix(u: C, chain: &Chain) -> Result<Mat> {
    let mut k = double_row_monodromy(u, chain)?;
    k.apply_left(&k_plus_matrix(u, chain.q(), &chain.bp), &[Space::Aux(0)])?;
    Ok(k.partial_trace(Space::Aux(0))?.into_matrix())
}

/// `t(u)` expanded as `φ(u)k⁺(u)A + k⁺(q⁻¹u⁻¹)D + c(qu)(κ²B + κ̃²C)`.
pub fn transfer_expansion(u: C, chain: &Chain, fam: &OperatorFamily) -> Result<Mat> {
    let (q, bp) = (chain.q(), &chain.bp);
    let m = &chain.model;
    let cq = crate::scalars::c(q * u);
    Ok(&fam.a * (m.phi(u)? * bp.k_plus(u)) + &fam.d * bp.k_plus((q * u).inv()) + (&fam.b * (bp.kappa * bp.kappa) + &fam.c * (bp.kappa_tilde * bp.kappa_tilde)) * cq)
}

/// `t(u)` expanded as `k⁺(qu)Â + φ(u)k⁺(u⁻¹)D̂ + c(qu)(κ²B + κ̃²C)`.
pub fn transfer_expansion_hat(u: C, chain: &Chain, fam: &OperatorFamily) -> Result<Mat> {
    let (q, bp) = (chain.q(), &chain.bp);
    let m = &chain.model;
    let cq = crate::scalars::c(q * u);
    Ok(&fam.a_hat * bp.k_plus(q * u) + &fam.d_hat * (m.phi(u)? * bp.k_plus(u.inv())) + (&fam.b * (bp.kappa * bp.kappa) + &fam.c * (bp.kappa_tilde * bp.kappa_tilde)) * cq)
}

/// Residual of the monodromy's own reflection equation on `V_a ⊗ V_b ⊗ ℋ`.
pub fn monodromy_reflection_residual(chain: &Chain, u1: C, u2: C) -> Result<f64> {
    let (a, b) = (Space::Aux(0), Space::Aux(1));
    let mut lay = vec![a, b];
    lay.extend(sites(chain.n()));
    let ka = monodromy_in(u1, chain, a, lay.clone())?;
    let kb = monodromy_in(u2, chain, b, lay.clone())?;
    let m = &chain.model;
    let r1 = QuantumOperator::embed(&r_matrix(u1 / u2, m), &[a, b], lay.clone())?;
    let r2 = QuantumOperator::embed(&r_matrix(u1 * u2, m), &[a, b], lay)?;
    let lhs = r1.compose(&ka)?.compose(&r2)?.compose(&kb)?;
    let rhs = kb.compose(&r2)?.compose(&ka)?.compose(&r1)?;
    Ok(rel_residual_mat(lhs.matrix(), rhs.matrix()))
}

/// The open XXZ Hamiltonian assembled from Pauli terms.
pub fn hamiltonian_direct(n: usize, hc: &HamiltonianCouplings) -> Result<Mat> {
    let d = 1usize << n;
    let mut h = Mat::zeros(d, d);
    let p = |w: Pauli, i: usize| pauli_on_site(w, i, n).map(QuantumOperator::into_matrix);
    for k in 1..n {
        h += p(Pauli::X, k)? * p(Pauli::X, k + 1)? + p(Pauli::Y, k)? * p(Pauli::Y, k + 1)? + p(Pauli::Z, k)? * p(Pauli::Z, k + 1)? * hc.delta;
    }
    h += p(Pauli::Z, 1)? * hc.eps + p(Pauli::Minus, 1)? * hc.kappa_minus + p(Pauli::Plus, 1)? * hc.kappa_plus;
    h += p(Pauli::Z, n)? * hc.nu + p(Pauli::Minus, n)? * hc.tau_minus + p(Pauli::Plus, n)? * hc.tau_plus;
    Ok(h)
}

/// Hamiltonian from the transfer matrix with diagnostics.
#[derive(Debug, Clone)]
pub struct TransferHamiltonian {
    pub h: Mat,
    /// `‖[t(1), t′(1)]‖ / (‖t(1)‖‖t′(1)‖)`.
    pub commutator: f64,
    /// Distance of `t(1)` from a multiple of the identity, relative.
    pub t1_identity_deviation: f64,
    /// Relative spread between the two Richardson stages.
    pub richardson_spread: f64,
}

/// Relative step of the finite-difference derivative at `u = 1`.
pub const DERIVATIVE_STEP: f64 = 1e-3;

/// `(q − q⁻¹)/2 · t(1)⁻¹t′(1) − (N(q + q⁻¹)/2 + (q − q⁻¹)²/(2(q + q⁻¹)))·I`
/// at the homogeneous point, `t′(1)` by fourth-order central differences
/// with one Richardson step.
pub fn hamiltonian_from_transfer(chain: &Chain) -> Result<TransferHamiltonian> {
    let m = &chain.model;
    if m.v.iter().any(|&v| (v - ONE).norm() > 0.0) {
        return Err(MabaError::InvalidParams("the Hamiltonian map needs homogeneous v_i = 1".into()));
    }
    let n = m.n;
    let q = m.q;
    let t = |x: f64| transfer_matrix(C::new(x, 0.0), chain);
    let deriv = |h: f64| -> Result<Mat> { Ok((t(1.0 + 2.0 * h)? * -ONE + t(1.0 + h)? * C::new(8.0, 0.0) - t(1.0 - h)? * C::new(8.0, 0.0) + t(1.0 - 2.0 * h)?) / C::new(12.0 * h, 0.0)) };
    let d1 = deriv(DERIVATIVE_STEP)?;
    let d2 = deriv(DERIVATIVE_STEP / 2.0)?;
    let dt = (&d2 * C::new(16.0, 0.0) - &d1) / C::new(15.0, 0.0);
    let spread = (&d1 - &d2).norm() / dt.norm().max(f64::MIN_POSITIVE);
    if !spread.is_finite() || spread > 1e-2 {
        return Err(MabaError::DerivativeUnstable(spread));
    }
    let t1 = t(1.0)?;
    let lu = t1.clone().lu();
    let logd = lu.solve(&dt).ok_or_else(|| MabaError::SingularPoint { what: "t(1) is not invertible".into(), magnitude: 0.0 })?;
    let qq = q - q.inv();
    let qs = q + q.inv();
    let dim = 1usize << n;
    let shift = C::new(n as f64, 0.0) * qs / 2.0 + qq * qq / (qs * 2.0);
    let h = logd * (qq / 2.0) - Mat::identity(dim, dim) * shift;
    let comm = (&t1 * &dt - &dt * &t1).norm() / (t1.norm() * dt.norm());
    let scal = t1.trace() / C::new(dim as f64, 0.0);
    let dev = (&t1 - Mat::identity(dim, dim) * scal).norm() / t1.norm();
    Ok(TransferHamiltonian { h, commutator: comm, t1_identity_deviation: dev, richardson_spread: spread })
}

/// `‖H_direct − H_transfer‖ / ‖H_direct‖` at the homogeneous point.
pub fn hamiltonian_mismatch(chain: &Chain) -> Result<f64> {
    let hc = hamiltonian_couplings(&chain.bp, chain.q())?;
    let hd = hamiltonian_direct(chain.n(), &hc)?;
    let ht = hamiltonian_from_transfer(chain)?;
    Ok((&hd - &ht.h).norm() / hd.norm())
}

/// The exchange relations among `{A, B, C, D}` and `{Â, D̂}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CommutationRelation {
    AB,
    CA,
    DB,
    CD,
    CB,
    AD,
    AA,
    DD,
    BB,
    CC,
    AhatC,
    DhatC,
}

impl CommutationRelation {
    pub const ALL: [CommutationRelation; 12] = [
        Self::AB,
        Self::CA,
        Self::DB,
        Self::CD,
        Self::CB,
        Self::AD,
        Self::AA,
        Self::DD,
        Self::BB,
        Self::CC,
        Self::AhatC,
        Self::DhatC,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Self::AB => "comAB",
            Self::CA => "comCA",
            Self::DB => "comDB",
            Self::CD => "comCD",
            Self::CB => "comCB",
            Self::AD => "comAD",
            Self::AA => "comAA",
            Self::DD => "comDD",
            Self::BB => "comBB",
            Self::CC => "comCC",
            Self::AhatC => "comAtC",
            Self::DhatC => "comDtC",
        }
    }
}

/// Relative residual of one exchange relation at `(u, v)`.
pub fn check_commutation(chain: &Chain, rel: CommutationRelation, u: C, v: C) -> Result<f64> {
    let fu = extract_family(u, chain)?;
    let fv = extract_family(v, chain)?;
    check_commutation_with(chain, rel, u, v, &fu, &fv)
}

/// As [`check_commutation`] with precomputed families.
pub fn check_commutation_with(chain: &Chain, rel: CommutationRelation, u: C, v: C, fu: &OperatorFamily, fv: &OperatorFamily) -> Result<f64> {
    use CommutationRelation as R;
    let m = &chain.model;
    let (a, b, c, d, ah, dh) = (&fu.a, &fu.b, &fu.c, &fu.d, &fu.a_hat, &fu.d_hat);
    let (a2, b2, c2, d2, ah2, dh2) = (&fv.a, &fv.b, &fv.c, &fv.d, &fv.a_hat, &fv.d_hat);
    let (lhs, rhs): (Mat, Mat) = match rel {
        R::AB => (a * b2, b2 * a * m.f(u, v)? + b * a2 * m.g(u, v)? + b * d2 * m.w(u, v)?),
        R::CA => (c2 * a, a * c2 * m.f(u, v)? + a2 * c * m.g(u, v)? + d2 * c * m.w(u, v)?),
        R::DB => (d * b2, b2 * d * m.h(u, v)? + b * d2 * m.k(u, v)? + b * a2 * m.n_fn(u, v)?),
        R::CD => (c2 * d, d * c2 * m.h(u, v)? + d2 * c * m.k(u, v)? + a2 * c * m.n_fn(u, v)?),
        R::CB => (
            c * b2,
            b2 * c
                + a * a2 * m.s(u, v)?
                + a2 * a * m.x(u, v)?
                + d * a2 * m.y(u, v)?
                + a * d2 * m.r(u, v)?
                + a2 * d * m.q_fn(u, v)?
                + d * d2 * m.w(u, v)?,
        ),
        R::AD => (a * d2, d2 * a + (b * c2 - b2 * c) * m.k(v, u)?),
        R::AA => (a * a2, a2 * a + (b * c2 - b2 * c) * m.w(u, v)?),
        R::DD => (d * d2, d2 * d - (b * c2 - b2 * c) * (m.phi(u)? * m.phi(v)? * m.w(u, v)?)),
        R::BB => (b * b2, b2 * b),
        R::CC => (c * c2, c2 * c),
        R::AhatC => (ah * c2, c2 * ah * m.h(u, v)? + c * ah2 * m.k(u, v)? + c * dh2 * m.n_fn(u, v)?),
        R::DhatC => (dh * c2, c2 * dh * m.f(u, v)? + c * dh2 * m.g(u, v)? + c * ah2 * m.w(u, v)?),
    };
    Ok(rel_residual_mat(&lhs, &rhs))
}
