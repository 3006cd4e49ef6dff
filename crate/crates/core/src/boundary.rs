//! Boundary reflection matrices `K⁻`, `K⁺`, the (dual) reflection equations,
//! quantum determinants, and the map from boundary parameters to the
//! Hamiltonian's boundary couplings.

use serde::{Deserialize, Serialize};

use crate::error::{MabaError, Result};
use crate::lattice::{flip, kron, r_matrix, rel_residual_mat, Mat};
use crate::scalars::{c, rel_residual, BoundaryParams, ModelParams, C, ONE};

fn m2(a: C, b: C, c_: C, d: C) -> Mat {
    Mat::from_row_slice(2, 2, &[a, b, c_, d])
}

/// `K⁻(u) = [[k⁻(u), τ²c(u)], [τ̃²c(u), k⁻(u⁻¹)]]`.
pub fn k_minus_matrix(u: C, bp: &BoundaryParams) -> Mat {
    let cu = c(u);
    m2(bp.k_minus(u), bp.tau * bp.tau * cu, bp.tau_tilde * bp.tau_tilde * cu, bp.k_minus(u.inv()))
}

/// `K⁺(u) = [[k⁺(qu), κ̃²c(qu)], [κ²c(qu), k⁺(q⁻¹u⁻¹)]]`.
pub fn k_plus_matrix(u: C, q: C, bp: &BoundaryParams) -> Mat {
    let qu = q * u;
    let cq = c(qu);
    m2(bp.k_plus(qu), bp.kappa_tilde * bp.kappa_tilde * cq, bp.kappa * bp.kappa * cq, bp.k_plus(qu.inv()))
}

fn id2() -> Mat {
    Mat::identity(2, 2)
}

/// Residual of `R(u₁/u₂)K⁻₁(u₁)R(u₁u₂)K⁻₂(u₂) = K⁻₂(u₂)R(u₁u₂)K⁻₁(u₁)R(u₁/u₂)`.
pub fn check_reflection(model: &ModelParams, bp: &BoundaryParams, u1: C, u2: C) -> f64 {
    check_reflection_with(model, |u| k_minus_matrix(u, bp), u1, u2)
}

/// Reflection-equation residual for an arbitrary 2×2 matrix function.
pub fn check_reflection_with(model: &ModelParams, k: impl Fn(C) -> Mat, u1: C, u2: C) -> f64 {
    let ka = kron(&k(u1), &id2());
    let kb = kron(&id2(), &k(u2));
    let (r1, r2) = (r_matrix(u1 / u2, model), r_matrix(u1 * u2, model));
    rel_residual_mat(&(&r1 * &ka * &r2 * &kb), &(&kb * &r2 * &ka * &r1))
}

/// Residual of the dual reflection equation
/// `R(u₂/u₁)K⁺₁(u₁)R(q⁻²u₁⁻¹u₂⁻¹)K⁺₂(u₂) = K⁺₂(u₂)R(q⁻²u₁⁻¹u₂⁻¹)K⁺₁(u₁)R(u₂/u₁)`.
pub fn check_dual_reflection(model: &ModelParams, bp: &BoundaryParams, u1: C, u2: C) -> f64 {
    let q = model.q;
    let ka = kron(&k_plus_matrix(u1, q, bp), &id2());
    let kb = kron(&id2(), &k_plus_matrix(u2, q, bp));
    let (r1, r2) = (r_matrix(u2 / u1, model), r_matrix((q * q * u1 * u2).inv(), model));
    rel_residual_mat(&(&r1 * &ka * &r2 * &kb), &(&kb * &r2 * &ka * &r1))
}

/// Antisymmetrizer `P⁻ = (1 − P)/2` on `V ⊗ V`.
pub fn antisymmetrizer() -> Mat {
    (Mat::identity(4, 4) - flip()) * C::new(0.5, 0.0)
}

/// `tr₁₂ P⁻ K⁻₁(u) R(qu²) K⁻₂(qu)`.
pub fn q_det_minus(model: &ModelParams, bp: &BoundaryParams, u: C) -> C {
    let q = model.q;
    let m = antisymmetrizer() * kron(&k_minus_matrix(u, bp), &id2()) * r_matrix(q * u * u, model) * kron(&id2(), &k_minus_matrix(q * u, bp));
    m.trace()
}

/// `tr₁₂ P⁻ K⁺₂(qu) R(q⁻³u⁻²) K⁺₁(u)`.
pub fn q_det_plus(model: &ModelParams, bp: &BoundaryParams, u: C) -> C {
    let q = model.q;
    let m = antisymmetrizer()
        * kron(&id2(), &k_plus_matrix(q * u, q, bp))
        * r_matrix((q * q * q * u * u).inv(), model)
        * kron(&k_plus_matrix(u, q, bp), &id2());
    m.trace()
}

/// `|Det_q K⁻(u) − b(u²)k̃⁻(qu)k̃⁻(q⁻¹u⁻¹)|`, relative.
pub fn q_det_minus_factorization(model: &ModelParams, bp: &BoundaryParams, u: C) -> Result<f64> {
    let q = model.q;
    let rhs = model.b(u * u) * bp.k_tilde_minus(q * u)? * bp.k_tilde_minus((q * u).inv())?;
    Ok(rel_residual(q_det_minus(model, bp, u), rhs))
}

/// `|Det_q K⁺(u) − b(q⁻⁴u⁻²)k̃⁺(qu)k̃⁺(q⁻¹u⁻¹)|`, relative.
pub fn q_det_plus_factorization(model: &ModelParams, bp: &BoundaryParams, u: C) -> Result<f64> {
    let q = model.q;
    let rhs = model.b((q.powi(4) * u * u).inv()) * bp.k_tilde_plus(q * u)? * bp.k_tilde_plus((q * u).inv())?;
    Ok(rel_residual(q_det_plus(model, bp, u), rhs))
}

/// Boundary couplings of the open XXZ Hamiltonian and the anisotropy `Δ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianCouplings {
    pub eps: C,
    pub kappa_minus: C,
    pub kappa_plus: C,
    pub nu: C,
    pub tau_minus: C,
    pub tau_plus: C,
    pub delta: C,
}

pub fn hamiltonian_couplings(bp: &BoundaryParams, q: C) -> Result<HamiltonianCouplings> {
    let qq = q - q.inv();
    let se = bp.eps_plus + bp.eps_minus;
    let sn = bp.nu_plus + bp.nu_minus;
    if se.norm() < 1e-300 {
        return Err(MabaError::DivisionByZero("eps_plus + eps_minus"));
    }
    if sn.norm() < 1e-300 {
        return Err(MabaError::DivisionByZero("nu_plus + nu_minus"));
    }
    let two = C::new(2.0, 0.0);
    Ok(HamiltonianCouplings {
        eps: qq / two * (bp.eps_plus - bp.eps_minus) / se,
        kappa_minus: two * qq / se * bp.kappa * bp.kappa,
        kappa_plus: two * qq / se * bp.kappa_tilde * bp.kappa_tilde,
        nu: qq / two * (bp.nu_minus - bp.nu_plus) / sn,
        tau_minus: two * qq / sn * bp.tau_tilde * bp.tau_tilde,
        tau_plus: two * qq / sn * bp.tau * bp.tau,
        delta: (q + q.inv()) / two,
    })
}

/// `K⁻(1)`, which is `(ν₋ + ν₊)·I`.
pub fn k_minus_at_one(bp: &BoundaryParams) -> Mat {
    k_minus_matrix(ONE, bp)
}

/// The two exchange identities between `k±(u)`, `k±(q⁻¹u⁻¹)`, `k±(v)` and
/// `k±(q⁻¹v⁻¹)`, for `k⁻` then `k⁺`: `[first(k⁻), second(k⁻), first(k⁺), second(k⁺)]`.
pub fn exchange_identity_residuals(model: &ModelParams, bp: &BoundaryParams, u: C, v: C) -> Result<[f64; 4]> {
    let q = model.q;
    let mut out = [0.0; 4];
    let ks: [fn(&BoundaryParams, C) -> C; 2] = [BoundaryParams::k_minus, BoundaryParams::k_plus];
    for (i, k) in ks.into_iter().enumerate() {
        let kk = |x: C| k(bp, x);
        let first = model.g(u, v)? * model.phi(u)? * kk(u) + model.n_fn(u, v)? * kk((q * u).inv());
        out[2 * i] = rel_residual(first, model.big_f(u, v)? * model.phi((q * v).inv())? * model.phi(v)? * kk(v));
        let second = model.k(u, v)? * kk((q * u).inv()) + model.w(u, v)? * model.phi(u)? * kk(u);
        out[2 * i + 1] = rel_residual(second, -model.big_f(u, v)? * model.phi(v)? * kk((q * v).inv()));
    }
    Ok(out)
}
