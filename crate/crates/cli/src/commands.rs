use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use mra_core::divergence::{kl_sandwich, SandwichOptions};
use mra_core::estimators::{
    em_fit, estimate_s0, estimate_s1, estimate_support, log_likelihood, modified_mle, spectrum_stats, EmOptions,
    FitResult,
};
use mra_core::experiments::{
    lower_bound_pair, lower_bound_pair_discrete, pair_divergence, rate_curve, EstimatorSpec, RateAxis, RateConfig,
    RateCurve,
};
use mra_core::io::{self, to_json};
use mra_core::moments::{delta_norm, matched_pair_continuous, matched_pair_discrete, moment_tensor};
use mra_core::signal::{orbit_distance, random_signal, ZERO_TOL};
use mra_core::{sample, GroupKind, ModelConfig, MraError, Signal, SignalClassParams, SupportSet};
use serde::Serialize;

use crate::args::{Cli, Command, EmArgs, EstimatorKind, Method};
use crate::manifest::{hash_file, RunManifest, MANIFEST_NAME};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Domain(String),
    NotConverged(String),
    Mismatch(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::NotConverged(_) => 2,
            CliError::Domain(_) => 3,
            CliError::Mismatch(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "error: {m}"),
            CliError::Domain(m) => write!(f, "domain error: {m}"),
            CliError::NotConverged(m) => write!(f, "not converged: {m}"),
            CliError::Mismatch(m) => write!(f, "replay mismatch: {m}"),
        }
    }
}

impl From<MraError> for CliError {
    fn from(e: MraError) -> Self {
        match e {
            MraError::Domain(_) | MraError::ResourceLimit(_) => CliError::Domain(e.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

type CliResult<T> = Result<T, CliError>;

/// Files produced by one command.
#[derive(Default)]
struct Outputs {
    dir: PathBuf,
    files: Vec<PathBuf>,
    plot: Option<String>,
    not_converged: Option<String>,
}

impl Outputs {
    fn write(&mut self, name: &str, bytes: impl AsRef<[u8]>) -> CliResult<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes)?;
        self.files.push(path);
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        self.write(name, to_json(value)?)
    }
}

fn absolute(path: &Path) -> CliResult<PathBuf> {
    fs::canonicalize(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

/// Rewrites input paths as absolute paths and returns them.
fn resolve_inputs(command: &mut Command) -> CliResult<Vec<PathBuf>> {
    let mut paths: Vec<&mut PathBuf> = Vec::new();
    match command {
        Command::Simulate(a) => paths.push(&mut a.signal),
        Command::Estimate(a) => paths.push(&mut a.batch),
        Command::Support(a) => paths.push(&mut a.batch),
        Command::Moments(a) => {
            paths.push(&mut a.signal);
            if let Some(o) = a.other.as_mut() {
                paths.push(o);
            }
        }
        Command::Kl(a) => {
            paths.push(&mut a.theta);
            paths.push(&mut a.phi);
        }
        Command::Rate(a) => {
            if let Some(s) = a.signal.as_mut() {
                paths.push(s);
            }
        }
        Command::Matchpair(_) | Command::Lowerbound(_) | Command::Replay(_) => {}
    }
    let mut resolved = Vec::new();
    for p in paths {
        *p = absolute(p)?;
        resolved.push(p.clone());
    }
    Ok(resolved)
}

fn command_name(command: &Command) -> &'static str {
    match command {
        Command::Simulate(_) => "simulate",
        Command::Estimate(_) => "estimate",
        Command::Support(_) => "support",
        Command::Moments(_) => "moments",
        Command::Kl(_) => "kl",
        Command::Matchpair(_) => "matchpair",
        Command::Rate(_) => "rate",
        Command::Lowerbound(_) => "lowerbound",
        Command::Replay(_) => "replay",
    }
}

/// Runs a parsed invocation, writing outputs and the manifest.
pub fn execute(mut cli: Cli) -> CliResult<()> {
    if let Command::Replay(args) = &cli.command {
        return replay(&args.manifest, cli.out.clone());
    }
    let start = Instant::now();
    let out_dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&out_dir)?;
    let out_dir = absolute(&out_dir)?;
    cli.out = Some(out_dir.clone());
    let inputs = resolve_inputs(&mut cli.command)?;
    let mut outputs = Outputs {
        dir: out_dir.clone(),
        ..Default::default()
    };
    run_command(&cli, &mut outputs)?;

    let mut hashes = std::collections::BTreeMap::new();
    for f in &outputs.files {
        hashes.insert(f.clone(), hash_file(f)?);
    }
    let manifest = RunManifest {
        command: command_name(&cli.command).to_string(),
        seed: cli.seed,
        options: cli,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        inputs,
        outputs: hashes,
        duration_secs: start.elapsed().as_secs_f64(),
        plot: outputs.plot.take(),
    };
    fs::write(out_dir.join(MANIFEST_NAME), to_json(&manifest)?)?;
    match outputs.not_converged {
        Some(msg) => Err(CliError::NotConverged(msg)),
        None => Ok(()),
    }
}

fn replay(manifest_path: &Path, out: Option<PathBuf>) -> CliResult<()> {
    let manifest: RunManifest = io::read_json(manifest_path)?;
    let mut cli = manifest.options.clone();
    if out.is_some() {
        cli.out = out;
    }
    let out_dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
    let result = execute(cli);
    if let Err(e) = &result {
        if !matches!(e, CliError::NotConverged(_)) {
            return result;
        }
    }
    let mut mismatched = Vec::new();
    for (path, hash) in &manifest.outputs {
        let name = path.file_name().ok_or_else(|| CliError::Usage("bad output path in manifest".into()))?;
        let fresh = out_dir.join(name);
        let ok = hash_file(&fresh).map(|h| &h == hash).unwrap_or(false);
        println!("{} {}", if ok { "identical" } else { "DIFFERS" }, fresh.display());
        if !ok {
            mismatched.push(fresh.display().to_string());
        }
    }
    if !mismatched.is_empty() {
        return Err(CliError::Mismatch(mismatched.join(", ")));
    }
    result
}

fn em_options(em: &EmArgs, quad: usize, c0: f64) -> EmOptions {
    EmOptions {
        k_quad: quad,
        restarts: em.restarts,
        max_iter: em.max_iter,
        tol: em.tol,
        c0,
        accelerate: em.accelerate,
        pilot: em.pilot,
    }
}

#[derive(Serialize)]
struct KlReport {
    lower: f64,
    upper: f64,
    mc_mean: f64,
    mc_stderr: f64,
    delta_norms: Vec<f64>,
    k_used: usize,
    m_max: usize,
    n_mc: usize,
    #[serde(rename = "K_quad")]
    k_quad: usize,
    guaranteed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    note: Option<&'static str>,
}

#[derive(Serialize)]
struct RateSummary<'a> {
    truth: &'a Signal,
    estimator: &'a EstimatorSpec,
    #[serde(flatten)]
    curve: &'a RateCurve,
}

#[derive(Serialize)]
struct LowerboundReport {
    rho: f64,
    kl_single: f64,
    kl_single_stderr: f64,
    /// `n` times the single-sample divergence.
    kl_n: f64,
    kl_n_stderr: f64,
    kl_budget: f64,
    within_budget: bool,
    n_mc: usize,
    #[serde(rename = "K_quad")]
    k_quad: usize,
}

fn run_command(cli: &Cli, out: &mut Outputs) -> CliResult<()> {
    match &cli.command {
        Command::Simulate(a) => {
            let theta = io::read_signal(&a.signal)?;
            let config = ModelConfig::new(theta.len(), a.sigma, cli.group, cli.seed)?;
            let batch = sample(&theta, &config, a.n)?;
            let mut buf = Vec::new();
            io::write_batch_csv(&mut buf, batch.observations())?;
            out.write("batch.csv", buf)?;
        }
        Command::Estimate(a) => {
            let obs = io::read_batch(&a.batch)?;
            let fit = match a.method {
                Method::Mle => {
                    let opts = em_options(&a.em, cli.quad, a.c0);
                    match &a.support {
                        Some(s) => em_fit(&obs, &SupportSet::new(s.iter().copied(), obs.len())?, &opts, cli.seed)?,
                        None => modified_mle(&obs, a.c0, &opts, cli.seed)?,
                    }
                }
                Method::S0 | Method::S1 => {
                    let estimate = if a.method == Method::S0 {
                        estimate_s0(&obs)?
                    } else {
                        estimate_s1(&obs, a.c0)?
                    };
                    FitResult {
                        loglik: log_likelihood(&obs, &estimate, cli.quad)?,
                        support: estimate.support(ZERO_TOL),
                        estimate,
                        iterations: 0,
                        restarts_used: 0,
                        converged: true,
                        trace: Vec::new(),
                    }
                }
            };
            out.json("fit.json", &fit)?;
            out.json("estimate.json", &fit.estimate)?;
            if !fit.converged {
                out.not_converged = Some(format!("EM stopped after {} iterations", fit.iterations));
            }
        }
        Command::Support(a) => {
            let obs = io::read_batch(&a.batch)?;
            let est = estimate_support(&spectrum_stats(&obs)?, a.c0)?;
            out.json("support.json", &est)?;
        }
        Command::Moments(a) => {
            let theta = io::read_signal(&a.signal)?;
            match &a.other {
                Some(other) => {
                    let phi = io::read_signal(other)?;
                    let rows = (1..=a.m)
                        .map(|m| Ok((m, delta_norm(&theta, &phi, m, cli.group)?)))
                        .collect::<Result<Vec<_>, MraError>>()?;
                    let mut buf = Vec::new();
                    io::write_delta_norms_csv(&mut buf, &rows)?;
                    out.write("delta_norms.csv", buf)?;
                }
                None => {
                    let t = moment_tensor(&theta, a.m, cli.group)?;
                    out.json("tensor.json", &t)?;
                }
            }
        }
        Command::Kl(a) => {
            let theta = io::read_signal(&a.theta)?;
            let phi = io::read_signal(&a.phi)?;
            let opts = SandwichOptions {
                m_max: a.m_max,
                k: a.k,
                n_mc: a.n_mc,
                k_quad: cli.quad,
                seed: cli.seed,
                group: cli.group,
                force: a.force,
            };
            let r = kl_sandwich(&theta, &phi, a.sigma, &opts)?;
            let report = KlReport {
                lower: r.lower_bound,
                upper: r.upper_bound,
                mc_mean: r.mc.mean,
                mc_stderr: r.mc.stderr,
                delta_norms: r.delta_norms,
                k_used: r.k_used,
                m_max: r.m_max,
                n_mc: r.mc.n_mc,
                k_quad: r.mc.k_quad,
                guaranteed: r.guaranteed,
                note: (!r.guaranteed).then_some("bounds not guaranteed"),
            };
            print!("{}", to_json(&report)?);
            out.json("kl.json", &report)?;
        }
        Command::Matchpair(a) => {
            let (theta, phi) = match cli.group {
                GroupKind::Continuous => matched_pair_continuous(a.len.unwrap_or(2 * a.s + 1), a.s, a.delta, a.modulus)?,
                GroupKind::Discrete => matched_pair_discrete(a.len.unwrap_or(5), a.delta)?,
            };
            out.json("theta.json", &theta)?;
            out.json("phi.json", &phi)?;
        }
        Command::Rate(a) => {
            let len = a.len.unwrap_or(2 * a.s + 1);
            let truth = match &a.signal {
                Some(p) => io::read_signal(p)?,
                None => random_signal(&SignalClassParams::new(a.s, a.c0, SignalClassParams::DEFAULT_C)?, len, cli.seed)?,
            };
            let em = em_options(&a.em, cli.quad, a.c0);
            let spec = match a.estimator {
                EstimatorKind::Oracle => EstimatorSpec::OracleEm { em },
                EstimatorKind::Mle => EstimatorSpec::ModifiedMle { c0: a.c0, em },
                EstimatorKind::S0 => EstimatorSpec::S0,
                EstimatorKind::S1 => EstimatorSpec::S1 { c0: a.c0 },
            };
            let base = RateConfig {
                sigma: a.sigma,
                n0: a.n0,
                coupling_exponent: a.coupling_exponent,
                trials: a.trials,
                group: cli.group,
            };
            let curve = rate_curve(&spec, &truth, a.axis, &a.grid, &base, cli.seed)?;
            let mut buf = Vec::new();
            io::write_rate_csv(&mut buf, &curve)?;
            out.write("rate.csv", buf)?;
            out.json(
                "rate.json",
                &RateSummary {
                    truth: &truth,
                    estimator: &spec,
                    curve: &curve,
                },
            )?;
            let ylabel = match a.axis {
                RateAxis::N => "risk",
                RateAxis::Sigma => "risk*sqrt(n)",
            };
            let column = match a.axis {
                RateAxis::N => "5",
                RateAxis::Sigma => "($5*sqrt($2))",
            };
            out.plot = Some(format!(
                "set datafile separator ','; set logscale xy; set xlabel '{}'; set ylabel '{ylabel}'; plot 'rate.csv' skip 1 using 1:{column} with linespoints title 'slope {:.3}'",
                a.axis, curve.fitted_slope
            ));
        }
        Command::Lowerbound(a) => {
            let pair = match cli.group {
                GroupKind::Continuous => lower_bound_pair(a.len.unwrap_or((2 * a.s + 1).max(3)), a.s, a.sigma, a.n, a.c1)?,
                GroupKind::Discrete => lower_bound_pair_discrete(a.len.unwrap_or(5), a.sigma, a.n, a.c1)?,
            };
            let kl = pair_divergence(&pair, a.n_mc, cli.quad, cli.seed)?;
            let n = a.n as f64;
            let report = LowerboundReport {
                rho: orbit_distance(&pair.theta, &pair.phi, pair.group)?,
                kl_single: kl.mean,
                kl_single_stderr: kl.stderr,
                kl_n: n * kl.mean,
                kl_n_stderr: n * kl.stderr,
                kl_budget: pair.kl_budget,
                within_budget: n * kl.mean <= pair.kl_budget + 3.0 * n * kl.stderr,
                n_mc: kl.n_mc,
                k_quad: kl.k_quad,
            };
            out.json("pair.json", &pair)?;
            out.json("kl.json", &report)?;
        }
        Command::Replay(_) => unreachable!("handled by execute"),
    }
    Ok(())
}
