//! Solving the modified Bethe equations `E^N(u_i, ū_i) = 0` (damped Newton in
//! log variables, multistart, homotopy in the boundary parameters) and
//! matching the resulting `Λ^N` against dense spectra of `t(u)`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{MabaError, Result};
use crate::gauge::remove;
use crate::lattice::{Mat, Vector};
use crate::maba::{constraint_values, BetheSetup, Spectral};
use crate::scalars::{BoundaryParams, Chain, Sampler, C};
use crate::transfer::transfer_matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Convergence threshold on the normalized residual.
    pub tol: f64,
    pub max_iter: usize,
    /// Central-difference step in the log variables.
    pub fd_step: f64,
    /// Damping stops halving below this factor.
    pub min_damping: f64,
    /// Root sets closer than this (after canonicalization) are the same.
    pub dedup_tol: f64,
    pub starts: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { tol: 1e-12, max_iter: 80, fd_step: 1e-6, min_damping: 1e-4, dedup_tol: 1e-7, starts: 200 }
    }
}

/// Outcome of one solve, optionally enriched by [`spectrum_match`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    /// Canonical representatives, sorted by modulus then phase.
    pub roots: Vec<C>,
    pub residual_max: f64,
    pub iterations: usize,
    pub fd_step: f64,
    pub seed: Option<u64>,
    pub matched_eigenvalue_index: Option<usize>,
    pub eigen_gap: Option<f64>,
    pub eigvec_angle: Option<f64>,
    /// Continuation parameters visited, when produced by homotopy.
    pub homotopy_path: Option<Vec<f64>>,
}

/// `E^N(u_i, ū_i)` for every root.
pub fn residuals(chain: &Chain, us: &[C]) -> Result<Vec<C>> {
    Spectral::new(chain).e_all(us)
}

/// `E^N(u_i, ū_i) / (|Λ_gd(u_i, ū_i)| + |Λ_g(u_i, ū_i)|)`.
pub fn normalized_residuals(chain: &Chain, us: &[C]) -> Result<Vec<C>> {
    let sp = Spectral::new(chain);
    (0..us.len())
        .map(|i| {
            let r = remove(us, i);
            let scale = sp.lambda_gd(us[i], &r)?.norm() + sp.lambda_g(us[i], &r)?.norm();
            Ok(sp.e(us[i], &r)? / scale)
        })
        .collect()
}

fn max_abs(v: &[C]) -> f64 {
    v.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

/// Describe the first singular locus `ū` sits on, if any.
pub fn singular_locus(q: C, us: &[C]) -> Option<String> {
    let near = |x: C| x.norm() < 1e-6;
    for (i, &x) in us.iter().enumerate() {
        let x4 = x.powi(4);
        if near(x4 - 1.0) || near(x4 * q.powi(4) - 1.0) || near(x4 * q * q - 1.0) {
            return Some(format!("u_{} on a pole of the spectral functions", i + 1));
        }
        if !(1e-4..=1e4).contains(&x.norm()) {
            return Some(format!("u_{} escaped to 0 or infinity", i + 1));
        }
        for (j, &y) in us[..i].iter().enumerate() {
            if near(x * x - y * y) || near((q * x * y).powi(2) - 1.0) {
                return Some(format!("u_{} and u_{} coincide modulo sign or crossing", j + 1, i + 1));
            }
        }
    }
    None
}

/// Representative of `{u, −u, q⁻¹u⁻¹, −q⁻¹u⁻¹}` with `|u| ≥ |q⁻¹u⁻¹|`, then `Re u > 0`.
pub fn canonical_root(q: C, x: C) -> C {
    let all = [x, -x, (q * x).inv(), -(q * x).inv()];
    let big: Vec<C> = all.iter().copied().filter(|z| z.norm() >= (q * z).inv().norm() - 1e-12).collect();
    let pool = if big.is_empty() { all.to_vec() } else { big };
    pool.iter().copied().find(|z| z.re > 0.0).unwrap_or(pool[0])
}

/// Canonicalize each root and sort by modulus, then phase.
pub fn canonicalize(q: C, us: &[C]) -> Vec<C> {
    let mut v: Vec<C> = us.iter().map(|&x| canonical_root(q, x)).collect();
    v.sort_by(|a, b| a.norm().total_cmp(&b.norm()).then(a.arg().total_cmp(&b.arg())));
    v
}

/// Distance between two canonical root sets.
pub fn root_set_distance(a: &[C], b: &[C]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter().zip(b).map(|(x, y)| (x - y).norm() / (1.0 + x.norm())).fold(0.0, f64::max)
}

fn log_residual(chain: &Chain, z: &[C]) -> Result<Vec<C>> {
    let us: Vec<C> = z.iter().map(|x| x.exp()).collect();
    normalized_residuals(chain, &us)
}

fn finite_max(chain: &Chain, z: &[C]) -> f64 {
    match log_residual(chain, z) {
        Ok(r) => {
            let m = max_abs(&r);
            if m.is_finite() { m } else { f64::INFINITY }
        }
        Err(_) => f64::INFINITY,
    }
}

/// Damped Newton on `ū ↦ (E^N(u_i, ū_i))_i` in `z = ln u`, Jacobian by
/// central differences.
pub fn newton_solve(chain: &Chain, initial: &[C], cfg: &SolverConfig) -> Result<SolveReport> {
    let q = chain.q();
    if let Some(why) = singular_locus(q, initial) {
        return Err(MabaError::StuckAtSingularLocus(why));
    }
    let n = initial.len();
    let mut z: Vec<C> = initial.iter().map(|u| u.ln()).collect();
    let mut f = log_residual(chain, &z)?;
    for it in 0..=cfg.max_iter {
        let r = max_abs(&f);
        if !r.is_finite() {
            return Err(MabaError::Diverged { iterations: it, residual: r });
        }
        if r <= cfg.tol {
            let us: Vec<C> = z.iter().map(|x| x.exp()).collect();
            if let Some(why) = singular_locus(q, &us) {
                return Err(MabaError::StuckAtSingularLocus(why));
            }
            return Ok(SolveReport {
                roots: canonicalize(q, &us),
                residual_max: r,
                iterations: it,
                fd_step: cfg.fd_step,
                seed: None,
                matched_eigenvalue_index: None,
                eigen_gap: None,
                eigvec_angle: None,
                homotopy_path: None,
            });
        }
        if it == cfg.max_iter {
            return Err(MabaError::Diverged { iterations: it, residual: r });
        }
        let mut jac = Mat::zeros(n, n);
        for j in 0..n {
            let (mut zp, mut zm) = (z.clone(), z.clone());
            zp[j] += cfg.fd_step;
            zm[j] -= cfg.fd_step;
            let (fp, fm) = (log_residual(chain, &zp)?, log_residual(chain, &zm)?);
            for i in 0..n {
                jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * cfg.fd_step);
            }
        }
        let rhs = -DVector::from_vec(f.clone());
        let step = jac.lu().solve(&rhs).filter(|s| s.iter().all(|x| x.is_finite())).ok_or(MabaError::SingularJacobian(it))?;
        let mut lam = 1.0;
        let mut zn;
        loop {
            zn = z.iter().zip(step.iter()).map(|(a, s)| a + s * lam).collect::<Vec<_>>();
            if finite_max(chain, &zn) < r || lam < cfg.min_damping {
                break;
            }
            lam /= 2.0;
        }
        let us: Vec<C> = zn.iter().map(|x| x.exp()).collect();
        if let Some(why) = singular_locus(q, &us) {
            return Err(MabaError::StuckAtSingularLocus(why));
        }
        z = zn;
        f = log_residual(chain, &z)?;
    }
    unreachable!("loop returns on its last iteration")
}

/// Newton from `starts` seeded random starts; distinct converged root sets.
pub fn multistart(chain: &Chain, seed: u64, cfg: &SolverConfig) -> Vec<SolveReport> {
    let mut s = Sampler::new(seed);
    let mut found: Vec<SolveReport> = Vec::new();
    for _ in 0..cfg.starts {
        let start = s.complexes(chain.n());
        if let Ok(mut rep) = newton_solve(chain, &start, cfg) {
            rep.seed = Some(seed);
            if !found.iter().any(|f| root_set_distance(&f.roots, &rep.roots) <= cfg.dedup_tol) {
                found.push(rep);
            }
        }
    }
    found
}

/// Result of matching `Λ^N(u₀, ū)` against the dense spectrum of `t(u₀)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumMatch {
    /// Position in the eigenvalues of `t` at the first probe, sorted by (re, im).
    pub index: usize,
    /// Worst `|λ − Λ|/(1 + |Λ|)` over probes.
    pub eigen_gap: f64,
    /// Worst angle between `Ψ(ū)` and the matched eigenvector.
    pub eigvec_angle: f64,
    /// Whether the matched eigenvector is the same at every probe.
    pub consistent: bool,
    pub psi_norm: f64,
}

/// Eigenvalues of a dense complex matrix, sorted by (re, im).
pub fn eigenvalues(m: &Mat) -> Result<Vec<C>> {
    let ev = m.clone().schur().eigenvalues().ok_or_else(|| MabaError::SingularPoint { what: "Schur decomposition failed".into(), magnitude: f64::NAN })?;
    let mut v: Vec<C> = ev.iter().copied().collect();
    v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    Ok(v)
}

/// Unit null vector of `m − λI` from the smallest singular value.
pub fn eigenvector(m: &Mat, lambda: C) -> Vector {
    let d = m.nrows();
    let shifted = m - Mat::identity(d, d) * lambda;
    let svd = shifted.svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let k = svd.singular_values.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i).unwrap_or(0);
    vt.row(k).transpose().map(|x| x.conj())
}

/// Angle between two vectors, accurate near zero.
pub fn angle(a: &Vector, b: &Vector) -> f64 {
    let (a, b) = (a / C::from(a.norm()), b / C::from(b.norm()));
    let proj = b.dotc(&a);
    (a - b * proj).norm().min(1.0).asin()
}

/// Three generic probe points derived from a seed.
pub fn probe_points(seed: u64) -> [C; 3] {
    let mut s = Sampler::new(seed ^ 0x9e37_79b9_7f4a_7c15);
    [s.complex_in(0.6, 1.7), s.complex_in(0.6, 1.7), s.complex_in(0.6, 1.7)]
}

/// Match an on-shell root set to an eigenvalue of `t(u₀)` at each probe.
pub fn spectrum_match(chain: &Chain, us: &[C], probes: &[C], m0: i32) -> Result<SpectrumMatch> {
    let sp = Spectral::new(chain);
    let psi = BetheSetup::b_side(chain, m0, us.len())?.psi(us)?;
    let (mut gap, mut ang) = (0.0f64, 0.0f64);
    let mut first: Option<(usize, Vector)> = None;
    let mut consistent = true;
    for &u0 in probes {
        let t = transfer_matrix(u0, chain)?;
        let ev = eigenvalues(&t)?;
        let lam = sp.lambda(u0, us)?;
        let (idx, best) = ev.iter().enumerate().map(|(i, e)| (i, (e - lam).norm())).min_by(|a, b| a.1.total_cmp(&b.1)).expect("nonempty spectrum");
        if let Some(d) = ev.iter().enumerate().filter(|&(i, _)| i != idx).map(|(_, e)| (e - ev[idx]).norm()).reduce(f64::min) {
            if d <= 1e-8 * (1.0 + lam.norm()) {
                return Err(MabaError::AmbiguousMatch(d));
            }
        }
        gap = gap.max(best / (1.0 + lam.norm()));
        let vec = eigenvector(&t, ev[idx]);
        ang = ang.max(angle(&psi, &vec));
        match &first {
            None => first = Some((idx, vec)),
            Some((_, v0)) => consistent &= angle(v0, &vec) < 1e-6,
        }
    }
    let (index, _) = first.ok_or_else(|| MabaError::InvalidParams("no probe points".into()))?;
    Ok(SpectrumMatch { index, eigen_gap: gap, eigvec_angle: ang, consistent, psi_norm: psi.norm() })
}

/// Attach spectrum-match data to a report.
pub fn annotate(chain: &Chain, rep: &mut SolveReport, probes: &[C], m0: i32) -> Result<SpectrumMatch> {
    let m = spectrum_match(chain, &rep.roots, probes, m0)?;
    rep.matched_eigenvalue_index = Some(m.index);
    rep.eigen_gap = Some(m.eigen_gap);
    rep.eigvec_angle = Some(m.eigvec_angle);
    Ok(m)
}

/// Boundary parameters as the factorized 8-tuple
/// `(κ, κ̃, ξ, ξ̃, τ, τ̃, μ, μ̃)`.
pub fn factor_tuple(bp: &BoundaryParams) -> Result<[C; 8]> {
    Ok([bp.kappa, bp.kappa_tilde, bp.xi()?, bp.xi_tilde()?, bp.tau, bp.tau_tilde, bp.mu()?, bp.mu_tilde()?])
}

/// Log-linear interpolation of the factorized boundary parameters.
pub fn interpolate(a: &[C; 8], b: &[C; 8], t: f64) -> Result<BoundaryParams> {
    let p: Vec<C> = a.iter().zip(b).map(|(x, y)| (x.ln() * (1.0 - t) + y.ln() * t).exp()).collect();
    BoundaryParams::factorized(p[0], p[1], p[2], p[3], p[4], p[5], p[6], p[7])
}

/// Same chain with `ξ̃` moved so the inhomogeneous term vanishes
/// (the B-constraint with `M = N`), where ordinary Bethe equations hold.
pub fn constrained_start(chain: &Chain) -> Result<BoundaryParams> {
    let bp = &chain.bp;
    let n = chain.n();
    let [cb, _] = constraint_values(chain, n, 0)?;
    // constraint_b is linear in 1/ξ̃: rescale ξ̃ by its current value.
    let xt = bp.xi_tilde()? * cb;
    BoundaryParams::factorized(bp.kappa, bp.kappa_tilde, bp.xi()?, xt, bp.tau, bp.tau_tilde, bp.mu()?, bp.mu_tilde()?)
}

/// Step control for continuation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomotopyConfig {
    pub initial_step: f64,
    pub max_step: f64,
    pub min_step: f64,
    /// Newton iterations allowed per corrector.
    pub corrector_iter: usize,
    /// Largest accepted change of `ln u` per step.
    pub max_jump: f64,
}

impl Default for HomotopyConfig {
    fn default() -> Self {
        Self { initial_step: 0.05, max_step: 0.2, min_step: 1e-6, corrector_iter: 12, max_jump: 0.3 }
    }
}

fn track(model: &crate::scalars::ModelParams, from: &[C; 8], to: &[C; 8], start: &[C], cfg: &SolverConfig, hc: &HomotopyConfig) -> Result<SolveReport> {
    let corr = SolverConfig { max_iter: hc.corrector_iter, ..*cfg };
    let mut t = 0.0;
    let mut h = hc.initial_step;
    let mut roots: Vec<C> = start.to_vec();
    let mut path = vec![0.0];
    let mut last = None;
    while t < 1.0 {
        let tn = (t + h).min(1.0);
        let ch = Chain::new(model.clone(), interpolate(from, to, tn)?);
        let ok = newton_solve(&ch, &roots, &corr).ok().and_then(|rep| {
            // keep the root ordering of the tracked set: match each old root to the nearest new one
            let sol = align(ch.q(), &roots, &rep.roots);
            let jump = roots.iter().zip(&sol).map(|(a, b)| (a.ln() - b.ln()).norm()).fold(0.0, f64::max);
            (jump <= hc.max_jump).then_some((rep, sol))
        });
        match ok {
            Some((rep, sol)) => {
                roots = sol;
                t = tn;
                path.push(t);
                last = Some(rep);
                h = (h * 1.5).min(hc.max_step);
            }
            None => {
                h /= 2.0;
                if h < hc.min_step {
                    return Err(MabaError::StepUnderflow { t });
                }
            }
        }
    }
    let mut rep = match last {
        Some(r) => r,
        None => newton_solve(&Chain::new(model.clone(), interpolate(from, to, 1.0)?), &roots, cfg)?,
    };
    rep.homotopy_path = Some(path);
    Ok(rep)
}

/// Reorder the canonical solution to follow the tracked roots, picking for
/// each tracked root the nearest member of the symmetry orbit.
fn align(q: C, tracked: &[C], canon: &[C]) -> Vec<C> {
    let mut pool: Vec<C> = canon.to_vec();
    tracked
        .iter()
        .map(|&x| {
            let (k, rep) = pool
                .iter()
                .enumerate()
                .flat_map(|(k, &c)| [c, -c, (q * c).inv(), -(q * c).inv()].into_iter().map(move |r| (k, r)))
                .min_by(|a, b| (a.1 - x).norm().total_cmp(&(b.1 - x).norm()))
                .expect("same cardinality");
            pool.remove(k);
            rep
        })
        .collect()
}

/// Continue each start root set from boundary `from` to boundary `to`.
/// Errors with [`MabaError::PathCollision`] if two tracked sets merge.
pub fn homotopy_solve(model: &crate::scalars::ModelParams, from: &BoundaryParams, to: &BoundaryParams, starts: &[Vec<C>], cfg: &SolverConfig, hc: &HomotopyConfig) -> Result<Vec<SolveReport>> {
    let (a, b) = (factor_tuple(from)?, factor_tuple(to)?);
    let mut out: Vec<SolveReport> = Vec::new();
    for s in starts {
        let rep = track(model, &a, &b, s, cfg, hc)?;
        if out.iter().any(|o| root_set_distance(&o.roots, &rep.roots) <= cfg.dedup_tol) {
            return Err(MabaError::PathCollision { t: 1.0 });
        }
        out.push(rep);
    }
    Ok(out)
}

/// Multistart and homotopy union with spectrum matching.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Completeness {
    /// Verified root sets, one per distinct level.
    pub levels: Vec<SolveReport>,
    pub distinct_levels: usize,
    pub expected: usize,
    /// Root sets that converged but failed the spectrum match.
    pub unmatched: usize,
}

/// Tolerances for accepting a root set as an eigenstate.
pub const EIGEN_GAP_TOL: f64 = 1e-8;
pub const EIGVEC_ANGLE_TOL: f64 = 1e-6;

/// Multistart at the target plus homotopy from the constrained start; every
/// candidate is matched against `t(u₀)` at three probes.
pub fn solve_all(chain: &Chain, seed: u64, m0: i32, cfg: &SolverConfig) -> Result<Completeness> {
    let probes = probe_points(seed);
    let mut cands = multistart(chain, seed, cfg);
    if let Ok(start_bp) = constrained_start(chain) {
        let start = Chain::new(chain.model.clone(), start_bp.clone());
        let seeds: Vec<Vec<C>> = multistart(&start, seed.wrapping_add(1), cfg).into_iter().map(|r| r.roots).collect();
        for s in &seeds {
            if let Ok(mut v) = homotopy_solve(&chain.model, &start_bp, &chain.bp, std::slice::from_ref(s), cfg, &HomotopyConfig::default()) {
                cands.append(&mut v);
            }
        }
    }
    let mut levels: Vec<SolveReport> = Vec::new();
    let mut unmatched = 0;
    for mut rep in cands {
        if levels.iter().any(|l| root_set_distance(&l.roots, &rep.roots) <= cfg.dedup_tol) {
            continue;
        }
        match annotate(chain, &mut rep, &probes, m0) {
            Ok(m) if m.consistent && m.eigen_gap <= EIGEN_GAP_TOL && m.eigvec_angle <= EIGVEC_ANGLE_TOL => {
                if !levels.iter().any(|l| l.matched_eigenvalue_index == rep.matched_eigenvalue_index) {
                    levels.push(rep);
                }
            }
            _ => unmatched += 1,
        }
    }
    levels.sort_by_key(|l| l.matched_eigenvalue_index);
    Ok(Completeness { distinct_levels: levels.len(), expected: 1 << chain.n(), levels, unmatched })
}
