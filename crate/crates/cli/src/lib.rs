//! Batch front-end: JSON run configs in, JSON-lines or CSV records out.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64 as C;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use xxz_maba::boundary::hamiltonian_couplings;
use xxz_maba::solver::{solve_all, SolverConfig};
use xxz_maba::transfer::{hamiltonian_direct, hamiltonian_from_transfer, transfer_matrix};
use xxz_maba::verify::{run_suites, Suite, VerifyContext};
use xxz_maba::{BoundaryParams, Chain, MabaError, ModelParams, Sampler};

pub const SCHEMA: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("config parse: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Model(#[from] MabaError),
}

/// A complex number as `[re, im]`.
pub type Pair = [f64; 2];

fn cx(p: Pair) -> C {
    C::new(p[0], p[1])
}

fn pair(z: C) -> Pair {
    [z.re, z.im]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    pub q: Pair,
    /// Inhomogeneities; length is the chain length.
    pub v: Vec<Pair>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawBoundary {
    pub eps_plus: Pair,
    pub eps_minus: Pair,
    pub kappa: Pair,
    pub kappa_tilde: Pair,
    pub nu_plus: Pair,
    pub nu_minus: Pair,
    pub tau: Pair,
    pub tau_tilde: Pair,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorizedBoundary {
    pub kappa: Pair,
    pub kappa_tilde: Pair,
    pub xi: Pair,
    pub xi_tilde: Pair,
    pub tau: Pair,
    pub tau_tilde: Pair,
    pub mu: Pair,
    pub mu_tilde: Pair,
}

/// Exactly one parametrization style.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundaryConfig {
    Raw(RawBoundary),
    Factorized(FactorizedBoundary),
}

impl BoundaryConfig {
    pub fn build(&self) -> Result<BoundaryParams, CliError> {
        Ok(match self {
            BoundaryConfig::Raw(r) => BoundaryParams::from_raw(cx(r.eps_plus), cx(r.eps_minus), cx(r.kappa), cx(r.kappa_tilde), cx(r.nu_plus), cx(r.nu_minus), cx(r.tau), cx(r.tau_tilde)),
            BoundaryConfig::Factorized(f) => BoundaryParams::factorized(cx(f.kappa), cx(f.kappa_tilde), cx(f.xi), cx(f.xi_tilde), cx(f.tau), cx(f.tau_tilde), cx(f.mu), cx(f.mu_tilde))?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Jsonl,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
}

/// A run configuration. Missing `params`/`bp` are drawn from `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: u32,
    /// Chain length when `params` is absent.
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub params: Option<ParamsConfig>,
    #[serde(default)]
    pub bp: Option<BoundaryConfig>,
    #[serde(default)]
    pub m0: i32,
    #[serde(default = "all_suites")]
    pub suites: Vec<String>,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Random points per check.
    #[serde(default = "default_draws")]
    pub draws: usize,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    /// Spectral point for `spectrum`.
    #[serde(default)]
    pub probe: Option<Pair>,
    /// Multistart count for `solve`.
    #[serde(default)]
    pub starts: Option<usize>,
    #[serde(default)]
    pub output: OutputConfig,
}

fn all_suites() -> Vec<String> {
    Suite::ALL.iter().map(|s| s.name().to_string()).collect()
}

fn default_draws() -> usize {
    3
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema: SCHEMA,
            n: Some(2),
            params: None,
            bp: None,
            m0: 0,
            suites: all_suites(),
            seed: Some(42),
            draws: default_draws(),
            tolerances: BTreeMap::new(),
            probe: None,
            starts: None,
            output: OutputConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(s: &str) -> Result<Self, CliError> {
        let c: RunConfig = serde_json::from_str(s)?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.schema != SCHEMA {
            return Err(CliError::Config(format!("unsupported schema {} (expected {SCHEMA})", self.schema)));
        }
        if let (Some(n), Some(p)) = (self.n, &self.params) {
            if n != p.v.len() {
                return Err(CliError::Config(format!("n = {n} disagrees with {} inhomogeneities", p.v.len())));
            }
        }
        if self.params.is_none() && self.n.is_none() {
            return Err(CliError::Config("either n or params is required".into()));
        }
        self.suite_list()?;
        Ok(())
    }

    pub fn suite_list(&self) -> Result<Vec<Suite>, CliError> {
        self.suites.iter().map(|s| s.parse::<Suite>().map_err(|e| CliError::Config(e.to_string()))).collect()
    }

    fn seed_required(&self) -> Result<u64, CliError> {
        self.seed.ok_or_else(|| CliError::Config("seed is required for randomized runs".into()))
    }

    /// Resolve the chain, drawing missing pieces from the seed.
    pub fn chain(&self) -> Result<Chain, CliError> {
        let mut s = Sampler::new(self.seed.unwrap_or(0));
        let drawn = match (&self.params, &self.bp) {
            (Some(_), Some(_)) => None,
            _ => Some(s.chain(self.params.as_ref().map_or(self.n.unwrap_or(2), |p| p.v.len()))),
        };
        let model = match &self.params {
            Some(p) => ModelParams::new(cx(p.q), p.v.iter().map(|&x| cx(x)).collect())?,
            None => drawn.as_ref().unwrap().model.clone(),
        };
        let bp = match &self.bp {
            Some(b) => b.build()?,
            None => drawn.unwrap().bp,
        };
        Ok(Chain::new(model, bp))
    }

    /// Apply command-line overrides. `--n` resets the inhomogeneities to 1.
    pub fn apply_overrides(&mut self, o: &Overrides) -> Result<(), CliError> {
        if let Some(seed) = o.seed {
            self.seed = Some(seed);
        }
        if !o.suite.is_empty() {
            self.suites = o.suite.clone();
        }
        if let Some(n) = o.n {
            self.n = Some(n);
            if let Some(p) = &mut self.params {
                p.v = vec![[1.0, 0.0]; n];
            }
        }
        if o.q_re.is_some() || o.q_im.is_some() {
            let p = self.params.get_or_insert_with(|| {
                let n = self.n.unwrap_or(2);
                ParamsConfig { q: [1.0, 0.0], v: vec![[1.0, 0.0]; n] }
            });
            if let Some(re) = o.q_re {
                p.q[0] = re;
            }
            if let Some(im) = o.q_im {
                p.q[1] = im;
            }
        }
        if let Some(out) = &o.out {
            self.output.path = Some(out.clone());
        }
        if let Some(f) = o.format {
            self.output.format = f;
        }
        self.validate()
    }
}

/// Short SHA-256 digest of the resolved chain and reference level.
pub fn params_digest(chain: &Chain, m0: i32) -> String {
    let body = serde_json::to_string(&(&chain.model, &chain.bp, m0)).expect("serializable");
    Sha256::digest(body.as_bytes()).iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// One line of a `verify` report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub suite: String,
    pub check: String,
    pub eq: String,
    pub residual: f64,
    pub tol: f64,
    pub pass: bool,
    pub seed: u64,
    pub params_digest: String,
}

pub struct VerifyOutcome {
    pub exit_code: i32,
    pub records: Vec<Record>,
}

pub fn cmd_verify(cfg: &RunConfig) -> Result<VerifyOutcome, CliError> {
    let suites = cfg.suite_list()?;
    if suites.is_empty() {
        return Ok(VerifyOutcome { exit_code: 0, records: Vec::new() });
    }
    let seed = cfg.seed_required()?;
    let chain = cfg.chain()?;
    let digest = params_digest(&chain, cfg.m0);
    let mut ctx = VerifyContext::new(chain, seed);
    ctx.m0 = cfg.m0;
    ctx.draws = cfg.draws;
    ctx.tolerances = cfg.tolerances.clone();
    let records: Vec<Record> = run_suites(&suites, &ctx)
        .into_iter()
        .map(|c| Record { suite: c.suite.name().into(), check: c.check, eq: c.eq, residual: c.residual, tol: c.tol, pass: c.pass, seed, params_digest: digest.clone() })
        .collect();
    let exit_code = if records.iter().all(|r| r.pass) { 0 } else { 1 };
    Ok(VerifyOutcome { exit_code, records })
}

/// One eigenvalue of `t(u₀)` or of the Hamiltonian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRow {
    /// `transfer`, `hamiltonian` (direct) or `hamiltonian-from-transfer`.
    pub kind: String,
    pub index: usize,
    pub re: f64,
    pub im: f64,
}

pub fn cmd_spectrum(cfg: &RunConfig) -> Result<Vec<SpectrumRow>, CliError> {
    let chain = cfg.chain()?;
    let u0 = cfg.probe.map(cx).unwrap_or(C::new(0.83, 0.29));
    let mut rows = Vec::new();
    let mut push = |kind: &str, ev: Vec<C>| rows.extend(ev.into_iter().enumerate().map(|(index, z)| SpectrumRow { kind: kind.into(), index, re: z.re, im: z.im }));
    push("transfer", xxz_maba::solver::eigenvalues(&transfer_matrix(u0, &chain)?)?);
    if chain.model.v.iter().all(|v| (v - 1.0).norm() == 0.0) {
        let h = hamiltonian_direct(chain.n(), &hamiltonian_couplings(&chain.bp, chain.q())?)?;
        push("hamiltonian", xxz_maba::solver::eigenvalues(&h)?);
        push("hamiltonian-from-transfer", xxz_maba::solver::eigenvalues(&hamiltonian_from_transfer(&chain)?.h)?);
    }
    Ok(rows)
}

/// One line of a `solve` report: a matched level or the final count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SolveRow {
    Level {
        roots: Vec<Pair>,
        residual_max: f64,
        iterations: usize,
        matched_eigenvalue_index: Option<usize>,
        eigen_gap: Option<f64>,
        eigvec_angle: Option<f64>,
        homotopy: bool,
        seed: u64,
    },
    Completeness { found: usize, expected: usize, unmatched: usize, seed: u64, params_digest: String },
}

pub fn cmd_solve(cfg: &RunConfig) -> Result<Vec<SolveRow>, CliError> {
    let seed = cfg.seed_required()?;
    let chain = cfg.chain()?;
    let scfg = SolverConfig { starts: cfg.starts.unwrap_or(SolverConfig::default().starts), ..Default::default() };
    let all = solve_all(&chain, seed, cfg.m0, &scfg)?;
    let mut rows: Vec<SolveRow> = all
        .levels
        .iter()
        .map(|l| SolveRow::Level {
            roots: l.roots.iter().map(|&z| pair(z)).collect(),
            residual_max: l.residual_max,
            iterations: l.iterations,
            matched_eigenvalue_index: l.matched_eigenvalue_index,
            eigen_gap: l.eigen_gap,
            eigvec_angle: l.eigvec_angle,
            homotopy: l.homotopy_path.is_some(),
            seed,
        })
        .collect();
    rows.push(SolveRow::Completeness { found: all.distinct_levels, expected: all.expected, unmatched: all.unmatched, seed, params_digest: params_digest(&chain, cfg.m0) });
    Ok(rows)
}

/// Serialize rows as JSON lines.
pub fn to_jsonl<T: Serialize>(rows: &[T]) -> String {
    rows.iter().map(|r| serde_json::to_string(r).expect("serializable") + "\n").collect()
}

fn csv_field(v: &serde_json::Value) -> String {
    let s = match v {
        serde_json::Value::String(s) => s.clone(),
        serde_json::Value::Null => String::new(),
        other => other.to_string(),
    };
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s
    }
}

/// Flatten rows to CSV; the header is the union of keys in first-seen order.
pub fn to_csv<T: Serialize>(rows: &[T]) -> String {
    let vals: Vec<serde_json::Map<String, serde_json::Value>> = rows
        .iter()
        .map(|r| match serde_json::to_value(r).expect("serializable") {
            serde_json::Value::Object(m) => m,
            other => serde_json::Map::from_iter([("value".to_string(), other)]),
        })
        .collect();
    let mut header: Vec<String> = Vec::new();
    for m in &vals {
        for k in m.keys() {
            if !header.contains(k) {
                header.push(k.clone());
            }
        }
    }
    let mut out = header.join(",") + "\n";
    for m in &vals {
        let line: Vec<String> = header.iter().map(|k| m.get(k).map(csv_field).unwrap_or_default()).collect();
        out += &(line.join(",") + "\n");
    }
    out
}

pub fn render<T: Serialize>(rows: &[T], format: Format) -> String {
    match format {
        Format::Jsonl => to_jsonl(rows),
        Format::Csv => to_csv(rows),
    }
}

#[derive(Debug, Parser)]
#[command(name = "xxz-maba", version, about = "Open XXZ chain: identity checks, spectra and Bethe roots")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run identity suites; exit 1 if any check fails.
    Verify(Overrides),
    /// Dense eigenvalues of t(u₀) and of the Hamiltonian.
    Spectrum(Overrides),
    /// Solve the Bethe equations and match against the spectrum.
    Solve(Overrides),
}

#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Suite to run (repeatable); replaces the config's list.
    #[arg(long)]
    pub suite: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub q_re: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub q_im: Option<f64>,
}

pub fn load_config(o: &Overrides) -> Result<RunConfig, CliError> {
    let mut cfg = match &o.config {
        Some(p) => RunConfig::from_json(&std::fs::read_to_string(p)?)?,
        None => RunConfig::default(),
    };
    cfg.apply_overrides(o)?;
    Ok(cfg)
}

fn emit(cfg: &RunConfig, body: &str) -> Result<(), CliError> {
    match &cfg.output.path {
        Some(p) => std::fs::write(p, body)?,
        None => std::io::stdout().lock().write_all(body.as_bytes())?,
    }
    Ok(())
}

/// Run a parsed command line; returns the process exit code.
/// Configuration errors map to 2, failed checks to 1.
pub fn run(cli: Cli) -> i32 {
    let res = (|| -> Result<i32, CliError> {
        match cli.command {
            Command::Verify(o) => {
                let cfg = load_config(&o)?;
                let out = cmd_verify(&cfg)?;
                emit(&cfg, &render(&out.records, cfg.output.format))?;
                Ok(out.exit_code)
            }
            Command::Spectrum(o) => {
                let cfg = load_config(&o)?;
                emit(&cfg, &render(&cmd_spectrum(&cfg)?, cfg.output.format))?;
                Ok(0)
            }
            Command::Solve(o) => {
                let cfg = load_config(&o)?;
                emit(&cfg, &render(&cmd_solve(&cfg)?, cfg.output.format))?;
                Ok(0)
            }
        }
    })();
    match res {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_round_trips() {
        let c = RunConfig::default();
        let s = serde_json::to_string(&c).unwrap();
        assert_eq!(RunConfig::from_json(&s).unwrap(), c);
    }

    #[test]
    fn rejects_both_parametrizations_and_bad_schema() {
        let both = r#"{"schema":1,"n":1,"bp":{"raw":{},"factorized":{}}}"#;
        assert!(RunConfig::from_json(both).is_err());
        assert!(RunConfig::from_json(r#"{"schema":2,"n":1}"#).is_err());
        assert!(RunConfig::from_json(r#"{"schema":1,"n":1,"seed":"x"}"#).is_err());
        assert!(RunConfig::from_json(r#"{"schema":1,"n":1,"suites":["bogus"]}"#).is_err());
    }

    #[test]
    fn empty_suite_list_is_empty_success() {
        let c = RunConfig { suites: vec![], seed: None, ..Default::default() };
        let out = cmd_verify(&c).unwrap();
        assert_eq!(out.exit_code, 0);
        assert!(out.records.is_empty());
    }

    #[test]
    fn missing_seed_is_a_config_error() {
        let c = RunConfig { seed: None, ..Default::default() };
        assert!(matches!(cmd_verify(&c), Err(CliError::Config(_))));
    }

    #[test]
    fn csv_quotes_and_unions_keys() {
        #[derive(Serialize)]
        struct R {
            a: String,
            b: Option<f64>,
        }
        let s = to_csv(&[R { a: "x,y".into(), b: None }, R { a: "z".into(), b: Some(1.5) }]);
        assert_eq!(s, "a,b\n\"x,y\",\nz,1.5\n");
    }

    #[test]
    fn overrides_replace_q_and_n() {
        let mut c = RunConfig::default();
        c.apply_overrides(&Overrides { n: Some(3), q_re: Some(0.5), q_im: Some(-0.2), ..Default::default() }).unwrap();
        let ch = c.chain().unwrap();
        assert_eq!(ch.n(), 3);
        assert_eq!(ch.q(), C::new(0.5, -0.2));
    }
}
