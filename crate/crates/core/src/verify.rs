//! Named identity suites. Each suite evaluates its checks at seeded random
//! spectral points (and frames, roots) for a fixed chain and reports the
//! worst residual per check.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::boundary::{check_dual_reflection, check_reflection, exchange_identity_residuals, q_det_minus_factorization, q_det_plus_factorization};
use crate::error::{MabaError, Result};
use crate::gauge::{Dynamical, DynamicalRelation, StringAction};
use crate::lattice::{rel_residual_mat, ybe_residual};
use crate::maba::{
    constrained_boundary, constraint_detector, direct_route, highest_weight_residuals, lowest_weight_residuals, triangular, triangular_action_residual, triangular_convergence,
    vacuum_action_residuals, BetheSetup, WeightVector,
};
use crate::scalars::{Chain, GaugeFrame, Sampler};
use crate::transfer::{check_commutation_with, extract_family, monodromy_reflection_residual, transfer_matrix, CommutationRelation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Ybe,
    Reflection,
    Qdet,
    Commutation,
    Dynamical,
    Weights,
    OffshellTheorems,
    Conjecture,
    Triangular,
    Constrained,
}

impl Suite {
    pub const ALL: [Suite; 10] = [
        Suite::Ybe,
        Suite::Reflection,
        Suite::Qdet,
        Suite::Commutation,
        Suite::Dynamical,
        Suite::Weights,
        Suite::OffshellTheorems,
        Suite::Conjecture,
        Suite::Triangular,
        Suite::Constrained,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Ybe => "ybe",
            Suite::Reflection => "reflection",
            Suite::Qdet => "qdet",
            Suite::Commutation => "commutation",
            Suite::Dynamical => "dynamical",
            Suite::Weights => "weights",
            Suite::OffshellTheorems => "offshell-theorems",
            Suite::Conjecture => "conjecture",
            Suite::Triangular => "triangular",
            Suite::Constrained => "constrained",
        }
    }

    fn salt(self) -> u64 {
        Suite::ALL.iter().position(|&s| s == self).unwrap() as u64 + 1
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = MabaError;
    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL.into_iter().find(|x| x.name() == s).ok_or_else(|| MabaError::InvalidParams(format!("unknown suite {s:?}")))
    }
}

/// One evaluated check: the worst residual over all draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub suite: Suite,
    pub check: String,
    /// Label of the identity being checked.
    pub eq: String,
    pub residual: f64,
    pub tol: f64,
    pub pass: bool,
}

/// Inputs shared by all suites.
#[derive(Debug, Clone)]
pub struct VerifyContext {
    pub chain: Chain,
    pub m0: i32,
    pub seed: u64,
    /// Random points per check.
    pub draws: usize,
    /// Per-check tolerance overrides, keyed by `suite/check` or `suite`.
    pub tolerances: BTreeMap<String, f64>,
}

impl VerifyContext {
    pub fn new(chain: Chain, seed: u64) -> Self {
        Self { chain, m0: 0, seed, draws: 3, tolerances: BTreeMap::new() }
    }
}

/// Accumulates worst residuals per check, keeping first-seen order.
struct Acc<'a> {
    suite: Suite,
    ctx: &'a VerifyContext,
    rows: Vec<Check>,
}

impl<'a> Acc<'a> {
    fn push(&mut self, check: &str, eq: &str, residual: f64, tol: f64) {
        let tol = self
            .ctx
            .tolerances
            .get(&format!("{}/{}", self.suite, check))
            .or_else(|| self.ctx.tolerances.get(self.suite.name()))
            .copied()
            .unwrap_or(tol);
        // NaN counts as a failure and is kept as the worst value.
        let worse = |old: f64| residual.is_nan() || (!old.is_nan() && residual > old);
        match self.rows.iter_mut().find(|r| r.check == check) {
            Some(r) => {
                if worse(r.residual) {
                    r.residual = residual;
                }
                r.pass = r.residual <= r.tol;
            }
            None => self.rows.push(Check { suite: self.suite, check: check.into(), eq: eq.into(), residual, tol, pass: residual <= tol }),
        }
    }

    /// Record an evaluation error as a failed check.
    fn push_result(&mut self, check: &str, eq: &str, r: Result<f64>, tol: f64) {
        self.push(check, eq, r.unwrap_or(f64::NAN), tol);
    }
}

/// Tolerance of the conjectured creation-operator action, by chain length.
pub fn conjecture_tol(n: usize) -> f64 {
    match n {
        0 | 1 => 1e-11,
        2 => 1e-10,
        _ => 1e-8,
    }
}

/// Run one suite.
pub fn run_suite(suite: Suite, ctx: &VerifyContext) -> Vec<Check> {
    let mut acc = Acc { suite, ctx, rows: Vec::new() };
    let mut s = Sampler::new(ctx.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(suite.salt()));
    let ch = &ctx.chain;
    let (n, m0) = (ch.n(), ctx.m0);
    for _ in 0..ctx.draws.max(1) {
        match suite {
            Suite::Ybe => acc.push("yang-baxter", "YB", ybe_residual(&ch.model, s.complex(), s.complex(), s.complex()), 1e-11),
            Suite::Reflection => reflection(&mut acc, &mut s),
            Suite::Qdet => {
                acc.push("parametrization", "NpKm", ch.bp.consistency_residual(), 1e-12);
                let u = s.complex();
                acc.push_result("qdet-minus", "qdetKm", q_det_minus_factorization(&ch.model, &ch.bp, u), 1e-11);
                acc.push_result("qdet-plus", "qdetKp", q_det_plus_factorization(&ch.model, &ch.bp, u), 1e-11);
            }
            Suite::Commutation => commutation(&mut acc, &mut s),
            Suite::Dynamical => dynamical(&mut acc, &mut s),
            Suite::Weights => weights(&mut acc, &mut s),
            Suite::OffshellTheorems => {
                for m in 0..=n {
                    let (u, us) = (s.complex(), s.complexes(m));
                    match BetheSetup::b_side(ch, m0, m).and_then(|bs| bs.off_shell(u, &us)) {
                        Ok(r) => {
                            acc.push(&format!("td-action/M={m}"), "tdPsi", r.td, 1e-9);
                            acc.push(&format!("tps-action/M={m}"), "tpsPsi", r.tps, 1e-9);
                            acc.push(&format!("t-action/M={m}"), "tlowPsi", r.tlow, 1e-9);
                        }
                        Err(_) => acc.push(&format!("t-action/M={m}"), "tlowPsi", f64::NAN, 1e-9),
                    }
                    let (u, us) = (s.complex(), s.complexes(m));
                    let r = BetheSetup::c_side(ch, m0, m).and_then(|bs| bs.off_shell_hat(u, &us)).map(|r| r.off_c);
                    acc.push_result(&format!("t-action-dual/M={m}"), "Off-C", r, 1e-9);
                }
            }
            Suite::Conjecture => {
                let tol = conjecture_tol(n);
                let (u, us) = (s.complex(), s.complexes(n));
                match BetheSetup::b_side(ch, m0, n).and_then(|bs| bs.off_shell(u, &us)) {
                    Ok(r) => {
                        acc.push("creation-action", "offshellB", r.conjecture.unwrap_or(f64::NAN), tol);
                        acc.push("t-on-bethe-vector", "tronBV", r.full.unwrap_or(f64::NAN), tol);
                    }
                    Err(_) => acc.push("creation-action", "offshellB", f64::NAN, tol),
                }
                let (u, us) = (s.complex(), s.complexes(n));
                match BetheSetup::c_side(ch, m0, n).and_then(|bs| bs.off_shell_hat(u, &us)) {
                    Ok(r) => {
                        acc.push("creation-action-dual", "BonBVC", r.conjecture.unwrap_or(f64::NAN), tol);
                        acc.push("t-on-dual-bethe-vector", "LamEC", r.full.unwrap_or(f64::NAN), tol);
                    }
                    Err(_) => acc.push("creation-action-dual", "BonBVC", f64::NAN, tol),
                }
            }
            Suite::Triangular => triangular_suite(&mut acc, &mut s),
            Suite::Constrained => constrained(&mut acc, &mut s),
        }
    }
    if suite == Suite::Triangular {
        // τ̃ → 0: the gap to the triangular coefficient must shrink monotonically.
        let r = triangular_convergence(ch, &[1e-2, 1e-3, 1e-4]).map(|g| g.windows(2).map(|w| w[1] / w[0]).fold(0.0, f64::max));
        acc.push_result("convergence-ratio", "tPHI", r, 0.5);
    }
    acc.rows
}

fn reflection(acc: &mut Acc, s: &mut Sampler) {
    let ch = &acc.ctx.chain;
    let (u1, u2) = (s.complex(), s.complex());
    acc.push("reflection", "RE", check_reflection(&ch.model, &ch.bp, u1, u2), 1e-11);
    acc.push("dual-reflection", "DRE", check_dual_reflection(&ch.model, &ch.bp, u1, u2), 1e-11);
    acc.push_result("monodromy-reflection", "RE", monodromy_reflection_residual(ch, u1, u2), 1e-11);
    match exchange_identity_residuals(&ch.model, &ch.bp, u1, u2) {
        Ok(r) => {
            for (i, (name, eq)) in [("k-exchange-1/minus", "idUWT1"), ("k-exchange-2/minus", "idUWT2"), ("k-exchange-1/plus", "idUWT1"), ("k-exchange-2/plus", "idUWT2")].into_iter().enumerate() {
                acc.push(name, eq, r[i], 1e-11);
            }
        }
        Err(_) => acc.push("k-exchange-1/minus", "idUWT1", f64::NAN, 1e-11),
    }
}

fn commutation(acc: &mut Acc, s: &mut Sampler) {
    let ch = &acc.ctx.chain;
    let (u, v) = (s.complex(), s.complex());
    let fams = extract_family(u, ch).and_then(|fu| Ok((fu, extract_family(v, ch)?)));
    let (fu, fv) = match fams {
        Ok(f) => f,
        Err(_) => return acc.push("family", "K", f64::NAN, 1e-10),
    };
    for rel in CommutationRelation::ALL {
        acc.push_result(rel.label(), rel.label(), check_commutation_with(ch, rel, u, v, &fu, &fv), 1e-10);
    }
    let r = transfer_matrix(u, ch).and_then(|a| {
        let b = transfer_matrix(v, ch)?;
        Ok(rel_residual_mat(&(&a * &b), &(&b * &a)))
    });
    acc.push_result("transfer-commute", "tr", r, 1e-10);
}

fn dynamical(acc: &mut Acc, s: &mut Sampler) {
    let ch = &acc.ctx.chain;
    let m = acc.ctx.m0;
    let fr = s.frame(ch.q(), m, ch.n());
    let dy = Dynamical::new(ch, fr);
    let (u, v) = (s.complex(), s.complex());
    let named = |acc: &mut Acc, r: Result<Vec<(&'static str, f64)>>, tol: f64| match r {
        Ok(v) => v.into_iter().for_each(|(k, x)| acc.push(k, k, x, tol)),
        Err(_) => acc.push("frame", "coVec", f64::NAN, tol),
    };
    named(acc, dy.vector_identities(u, m), 1e-11);
    named(acc, dy.intertwining_residuals(u, v, m), 1e-11);
    match dy.expansion_residuals(u, m) {
        Ok(r) => {
            for (i, name) in ["A", "B", "C", "D-hat"].into_iter().enumerate() {
                acc.push(&format!("dyn-to-plain/{name}"), "DyntoK", r[i], 1e-11);
            }
        }
        Err(_) => acc.push("dyn-to-plain/A", "DyntoK", f64::NAN, 1e-11),
    }
    match dy.decomposition_residuals(u, m) {
        Ok([a, b]) => {
            acc.push("decomposition", "t", a, 1e-11);
            acc.push("decomposition-hat", "th", b, 1e-11);
        }
        Err(_) => acc.push("decomposition", "t", f64::NAN, 1e-11),
    }
    for rel in DynamicalRelation::ALL {
        acc.push_result(rel.label(), rel.label(), dy.relation_residual(rel, u, v, m), 1e-10);
    }
    named(acc, dy.functional_relations(u, v, m), 1e-11);
    let us = s.complexes(ch.n());
    for a in StringAction::ALL {
        acc.push_result(&format!("string/{a:?}"), string_label(a), dy.string_action_residual(a, u, &us, m + 2 * ch.n() as i32 + 1), 1e-10);
    }
}

fn string_label(a: StringAction) -> &'static str {
    match a {
        StringAction::AOnB => "AonSB",
        StringAction::DOnB => "DonSB",
        StringAction::DiagonalOnB => "Atd",
        StringAction::PseudoOnB => "Atps",
        StringAction::HatDiagonalOnC => "Athd",
        StringAction::HatPseudoOnC => "Athps",
    }
}

fn weights(acc: &mut Acc, s: &mut Sampler) {
    let ch = &acc.ctx.chain;
    let m0 = acc.ctx.m0;
    let u = s.complex();
    let hw = WeightVector::highest(ch, s.complex(), m0).and_then(|w| highest_weight_residuals(&Dynamical::new(ch, w.frame), m0, u));
    match hw {
        Ok(r) => r.iter().enumerate().for_each(|(i, &x)| acc.push(&format!("highest-weight/{i}"), "actDhwv", x, 1e-11)),
        Err(_) => acc.push("highest-weight/0", "actDhwv", f64::NAN, 1e-11),
    }
    let lw = WeightVector::lowest(ch, s.complex(), m0).and_then(|w| lowest_weight_residuals(&Dynamical::new(ch, w.frame), m0, u));
    match lw {
        Ok(r) => r.iter().enumerate().for_each(|(i, &x)| acc.push(&format!("lowest-weight/{i}"), "ADlwv", x, 1e-11)),
        Err(_) => acc.push("lowest-weight/0", "ADlwv", f64::NAN, 1e-11),
    }
}

fn triangular_suite(acc: &mut Acc, s: &mut Sampler) {
    let base = &acc.ctx.chain;
    let ch = Chain::new(base.model.clone(), triangular(&base.bp));
    let (n, m0) = (ch.n(), acc.ctx.m0);
    let us = s.complexes(n);
    acc.push_result("diagonal-vacuum-action", "tPHI", triangular_action_residual(&ch, s.complex(), m0, s.complex(), &us), 1e-10);
    let dy = Dynamical::new(&ch, GaugeFrame::new(s.complex(), s.complex(), m0 + 1));
    match vacuum_action_residuals(&dy, m0 + 1, s.complex()) {
        Ok([a, d]) => {
            acc.push("vacuum-action/A", "actdynvacA", a, 1e-10);
            acc.push("vacuum-action/D", "actdynvacD", d, 1e-10);
        }
        Err(_) => acc.push("vacuum-action/A", "actdynvacA", f64::NAN, 1e-10),
    }
    match dy.summation_identities(s.complex(), &us, m0 + 2 * n as i32 + 2) {
        Ok([a, b]) => {
            acc.push("summation/1", "sum1", a, 1e-10);
            acc.push("summation/2", "sum2", b, 1e-10);
        }
        Err(_) => acc.push("summation/1", "sum1", f64::NAN, 1e-10),
    }
    for m in 0..=n {
        match direct_route(&ch, m0 + 1, s.complex(), &s.complexes(m)) {
            Ok(d) => {
                acc.push(&format!("t-is-diagonal/M={m}"), "albetd", d.t_equals_td, 1e-10);
                acc.push(&format!("off-shell/M={m}"), "tdPsi", d.off_shell, 1e-10);
                if let Some(x) = d.extra_term {
                    acc.push("on-shell-extra-term", "tPHI", x, 1e-10);
                }
            }
            Err(_) => acc.push(&format!("off-shell/M={m}"), "tdPsi", f64::NAN, 1e-10),
        }
    }
}

/// The unwanted terms vanish (≤ 1e−12) exactly on the constraint loci:
/// residual 0 when the detector's verdicts agree, 1 otherwise.
fn constrained(acc: &mut Acc, s: &mut Sampler) {
    let base = &acc.ctx.chain;
    let (n, m0, q) = (base.n(), acc.ctx.m0, base.q());
    let m = n.saturating_sub(1) / 2;
    let mh = n - 1 - m.min(n - 1);
    let agree = |r: &crate::maba::ConstraintReport| {
        let b = r.holds_b == (r.unwanted_b <= 1e-12);
        let c = r.holds_c == (r.unwanted_c <= 1e-12);
        (if b { 0.0 } else { 1.0 }, if c { 0.0 } else { 1.0 })
    };
    let (u, ub, uc) = (s.complex(), s.complexes(m), s.complexes(mh));
    let cases: Vec<(&str, Result<Chain>)> = vec![
        ("generic", Ok(base.clone())),
        ("locus-b", constrained_boundary(s, q, n, m, false).map(|bp| Chain::new(base.model.clone(), bp))),
        ("locus-bc", constrained_boundary(s, q, n, m, true).map(|bp| Chain::new(base.model.clone(), bp))),
    ];
    for (name, chain) in cases {
        match chain.and_then(|c| constraint_detector(&c, m0, u, &ub, &uc)) {
            Ok(r) => {
                let (b, c) = agree(&r);
                acc.push(&format!("{name}/b"), "constraintB", b, 0.5);
                acc.push(&format!("{name}/c"), "constraintC", c, 0.5);
                if r.holds_b {
                    acc.push(&format!("{name}/unwanted-b"), "conditionB", r.unwanted_b, 1e-12);
                }
                if r.holds_c {
                    acc.push(&format!("{name}/unwanted-c"), "conditionC", r.unwanted_c, 1e-12);
                }
            }
            Err(_) => acc.push(&format!("{name}/b"), "constraintB", f64::NAN, 0.5),
        }
    }
}

/// Run several suites on a scoped worker pool; output ordered by suite, then
/// check order within the suite.
pub fn run_suites(suites: &[Suite], ctx: &VerifyContext) -> Vec<Check> {
    let mut sorted: Vec<Suite> = suites.to_vec();
    sorted.sort();
    sorted.dedup();
    let results: Vec<Vec<Check>> = std::thread::scope(|sc| {
        let handles: Vec<_> = sorted.iter().map(|&su| sc.spawn(move || run_suite(su, ctx))).collect();
        handles.into_iter().map(|h| h.join().expect("suite worker panicked")).collect()
    });
    results.into_iter().flatten().collect()
}

/// Draw a fresh chain per seed and run the listed suites on each; used for
/// statistics over random parameter draws.
pub fn run_over_draws(suites: &[Suite], n: usize, seeds: impl IntoIterator<Item = u64>, draws: usize) -> Vec<Check> {
    let mut out = Vec::new();
    for seed in seeds {
        let mut ctx = VerifyContext::new(Sampler::new(seed).chain(n), seed);
        ctx.draws = draws;
        out.extend(run_suites(suites, &ctx));
    }
    out
}

/// Fold checks with the same (suite, check) into their worst case.
pub fn worst(checks: &[Check]) -> Vec<Check> {
    let mut out: Vec<Check> = Vec::new();
    for c in checks {
        match out.iter_mut().find(|o| o.suite == c.suite && o.check == c.check) {
            Some(o) => {
                if c.residual.is_nan() || c.residual > o.residual {
                    o.residual = c.residual;
                }
                o.pass &= c.pass;
            }
            None => out.push(c.clone()),
        }
    }
    out
}
