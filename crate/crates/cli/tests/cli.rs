use std::process::Command;

use xxz_maba_cli::{cmd_spectrum, cmd_verify, Record, RunConfig};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_xxz-maba"))
}

#[test]
fn verify_default_config_passes_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"));
    for p in [&a, &b] {
        let st = bin().args(["verify", "--seed", "42", "--out"]).arg(p).status().unwrap();
        assert_eq!(st.code(), Some(0));
    }
    let (ta, tb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert!(!ta.is_empty());
    assert_eq!(ta, tb);
    for line in String::from_utf8(ta).unwrap().lines() {
        let r: Record = serde_json::from_str(line).unwrap();
        assert!(r.pass && r.seed == 42 && r.params_digest.len() == 16);
    }
}

#[test]
fn config_file_with_explicit_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(
        &cfg,
        r#"{"schema":1,"params":{"q":[0.9,0.3],"v":[[1,0],[1.1,-0.2]]},
            "bp":{"factorized":{"kappa":[0.8,0.1],"kappa_tilde":[1.2,-0.3],"xi":[0.7,0.5],"xi_tilde":[1.3,0.2],
                                "tau":[0.9,-0.4],"tau_tilde":[0.6,0.6],"mu":[1.1,0.3],"mu_tilde":[0.8,-0.7]}},
            "suites":["qdet","commutation"],"seed":5,"output":{"format":"csv"}}"#,
    )
    .unwrap();
    let out = bin().args(["verify", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("suite,check,eq,residual,tol,pass,seed,params_digest\n"));
    assert!(text.lines().skip(1).all(|l| l.starts_with("qdet,") || l.starts_with("commutation,")));
}

#[test]
fn bad_inputs_exit_with_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"schema":1,"n":1,"seed":"seven"}"#).unwrap();
    assert_eq!(bin().args(["solve", "--config"]).arg(&cfg).status().unwrap().code(), Some(2));
    assert_eq!(bin().args(["verify", "--suite", "nope"]).status().unwrap().code(), Some(2));
}

#[test]
fn empty_suite_list_gives_empty_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("empty.json");
    std::fs::write(&cfg, r#"{"schema":1,"n":2,"suites":[]}"#).unwrap();
    let out = bin().args(["verify", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
}

#[test]
fn solve_single_site_finds_both_levels() {
    let out = bin().args(["solve", "--n", "1", "--seed", "11"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let last: serde_json::Value = serde_json::from_str(text.lines().last().unwrap()).unwrap();
    assert_eq!(last["kind"], "completeness");
    assert_eq!((last["found"].as_u64(), last["expected"].as_u64()), (Some(2), Some(2)));
}

fn homogeneous(n: usize, q: [f64; 2]) -> RunConfig {
    let mut c: RunConfig = serde_json::from_str(&format!(r#"{{"schema":1,"params":{{"q":[{},{}],"v":{}}},"seed":3}}"#, q[0], q[1], serde_json::to_string(&vec![[1.0, 0.0]; n]).unwrap())).unwrap();
    c.validate().unwrap();
    c.n = Some(n);
    c
}

#[test]
fn spectrum_reports_transfer_and_hamiltonian() {
    let rows = cmd_spectrum(&homogeneous(1, [0.9, 0.2])).unwrap();
    assert_eq!(rows.iter().filter(|r| r.kind == "transfer").count(), 2);
    let rows = cmd_spectrum(&homogeneous(2, [0.9, 0.2])).unwrap();
    let direct: Vec<_> = rows.iter().filter(|r| r.kind == "hamiltonian").collect();
    let from_t: Vec<_> = rows.iter().filter(|r| r.kind == "hamiltonian-from-transfer").collect();
    assert_eq!(direct.len(), 4);
    for (a, b) in direct.iter().zip(&from_t) {
        let d = ((a.re - b.re).powi(2) + (a.im - b.im).powi(2)).sqrt();
        assert!(d < 1e-6 * (1.0 + a.re.hypot(a.im)), "{a:?} vs {b:?}");
    }
}

#[test]
fn diagonal_boundaries_conserve_magnetization() {
    // τ = τ̃ = 0 makes both K-matrices diagonal: H commutes with total S^z.
    let mut c = homogeneous(2, [0.95, 0.25]);
    c.bp = Some(serde_json::from_str(
        r#"{"raw":{"eps_plus":[0.3,0.1],"eps_minus":[0.7,-0.2],"kappa":[0,0],"kappa_tilde":[0,0],
                  "nu_plus":[0.5,0.4],"nu_minus":[1.1,0.1],"tau":[0,0],"tau_tilde":[0,0]}}"#,
    )
    .unwrap());
    let chain = c.chain().unwrap();
    let hc = xxz_maba::boundary::hamiltonian_couplings(&chain.bp, chain.q()).unwrap();
    let h = xxz_maba::transfer::hamiltonian_direct(2, &hc).unwrap();
    for i in 0..4usize {
        for j in 0..4usize {
            if i.count_ones() != j.count_ones() {
                assert!(h[(i, j)].norm() < 1e-14);
            }
        }
    }
    // eigenvalues from the CLI equal those of the magnetization blocks
    let mut want: Vec<(f64, f64)> = Vec::new();
    for block in [vec![0usize], vec![1, 2], vec![3]] {
        let m = xxz_maba::lattice::Mat::from_fn(block.len(), block.len(), |a, b| h[(block[a], block[b])]);
        want.extend(xxz_maba::solver::eigenvalues(&m).unwrap().iter().map(|z| (z.re, z.im)));
    }
    want.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let rows = cmd_spectrum(&c).unwrap();
    let got: Vec<_> = rows.iter().filter(|r| r.kind == "hamiltonian").map(|r| (r.re, r.im)).collect();
    for (g, w) in got.iter().zip(&want) {
        assert!((g.0 - w.0).hypot(g.1 - w.1) < 1e-9, "{got:?} vs {want:?}");
    }
}

#[test]
fn verify_reports_failures_with_exit_one() {
    let mut c = RunConfig { suites: vec!["ybe".into()], ..Default::default() };
    c.tolerances.insert("ybe".into(), -1.0);
    let out = cmd_verify(&c).unwrap();
    assert_eq!(out.exit_code, 1);
    assert!(!out.records.is_empty() && out.records.iter().all(|r| !r.pass));
}

#[test]
fn hermitian_regime_has_real_spectrum() {
    // |q| = 1, ε± = a ± ib, ν± = c ∓ id, κ̃ = i·conj(κ), τ̃ = i·conj(τ): all couplings hermitian.
    let (eta, kappa, tau) = (0.7f64, [0.6, 0.3], [0.4, -0.5]);
    let mut c = homogeneous(3, [eta.cos(), eta.sin()]);
    c.bp = Some(serde_json::from_value(serde_json::json!({"raw": {
        "eps_plus": [0.8, 0.35], "eps_minus": [0.8, -0.35],
        "nu_plus": [1.1, -0.2], "nu_minus": [1.1, 0.2],
        "kappa": kappa, "kappa_tilde": [kappa[1], kappa[0]],
        "tau": tau, "tau_tilde": [tau[1], tau[0]],
    }}))
    .unwrap());
    let rows = cmd_spectrum(&c).unwrap();
    let h: Vec<_> = rows.iter().filter(|r| r.kind == "hamiltonian").collect();
    assert_eq!(h.len(), 8);
    assert!(h.iter().all(|r| r.im.abs() < 1e-9), "{h:?}");
}
