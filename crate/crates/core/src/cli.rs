//! Command-line front end.
//!
//! Exit codes: 0 success, 2 configuration error, 3 domain error (the error
//! name is printed), 4 a convergence trend or oracle check failed.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::{GwiError, Result};
use crate::exact::{brute_force_law, harmonic_moment_integral, harmonic_moment_sum, law_of_zn, write_law_csv};
use crate::experiments::{manifest_json, run_experiment, write_rows_csv};
use crate::limits::{
    classify_regime, i_below_closed_form, i_below_quadrature, i_constant, upsilon, upsilon_quadrature,
    write_constants_csv, ConstantRow, EpsSequence, LimitConstants, MomentCondition,
};
use crate::model::{validate_condition_a, DistributionSpec, ModelParams};
use crate::series::{linear_fractional_oracle, offspring_iterate};
use crate::simulate::{estimate_large_deviation, write_mc_csv, ManifestEntry, RunManifest, SHARDS};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DOMAIN: i32 = 3;
pub const EXIT_FAILED: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "gwi", version, about = "Critical Galton–Watson processes with immigration")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct Common {
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Directory for output files.
    #[arg(long, default_value = ".")]
    pub output_dir: PathBuf,
    /// Configuration override `section.key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub paths: Option<u64>,
}

#[derive(Debug, Args, Clone, Default)]
pub struct ConstantArgs {
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub sigma0sq: Option<f64>,
    /// Tail index of the increments.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Tail constant of the increments.
    #[arg(long = "tail-constant")]
    pub tail_constant: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Law of Z_n from the generating-function iteration.
    Law {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n: usize,
        #[arg(long = "K", visible_alias = "order")]
        k: usize,
    },
    /// Harmonic moment E(Z_n^{-r} | Z_n > 0).
    Harmonic {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        r: f64,
        /// Also evaluate the direct sum at this truncation order.
        #[arg(long = "K", visible_alias = "order")]
        k: Option<usize>,
    },
    /// Table of limit constants.
    Constants {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        consts: ConstantArgs,
        /// Extra orders r for I(r, sigma); r > sigma needs a model config.
        #[arg(long, value_delimiter = ',')]
        r: Vec<f64>,
    },
    /// Regime of a deviation sequence.
    Classify {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        consts: ConstantArgs,
        /// Fixed deviation level.
        #[arg(long, conflicts_with_all = ["eps_exponent", "eps_log_exponent"])]
        eps: Option<f64>,
        /// eps_n = c n^{-e}.
        #[arg(long)]
        eps_exponent: Option<f64>,
        /// eps_n = c (log n)^{-p}.
        #[arg(long, conflicts_with = "eps_exponent")]
        eps_log_exponent: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        eps_coefficient: f64,
        /// q(eps) for the fixed-eps light-tail regime.
        #[arg(long)]
        q: Option<f64>,
    },
    /// Monte Carlo estimate of P(S_{Z_n} >= eps Z_n, Z_n > 0).
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n: usize,
        #[arg(long, conflicts_with = "eps_exponent")]
        eps: Option<f64>,
        #[arg(long)]
        eps_exponent: Option<f64>,
    },
    /// Convergence study described by the [experiment] section.
    Experiment {
        #[command(flatten)]
        common: Common,
    },
    /// Built-in oracle checks.
    OracleCheck {
        #[command(flatten)]
        common: Common,
    },
}

fn load_config(common: &Common) -> Result<Option<RunConfig>> {
    let mut overrides = common.overrides.clone();
    if let Some(seed) = common.seed {
        overrides.push(format!("experiment.seed={seed}"));
    }
    if let Some(paths) = common.paths {
        overrides.push(format!("experiment.paths={paths}"));
    }
    match &common.config {
        Some(path) => RunConfig::load(path, &overrides).map(Some),
        None if common.overrides.is_empty() => Ok(None),
        None => Err(GwiError::Config("--set needs --config".into())),
    }
}

fn require_model(config: &Option<RunConfig>) -> Result<ModelParams> {
    config
        .as_ref()
        .ok_or_else(|| GwiError::Config("this command needs --config with a [model] section".into()))?
        .model()
}

fn create(dir: &Path, name: &str) -> Result<(PathBuf, BufWriter<File>)> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let file = File::create(&path)?;
    Ok((path, BufWriter::new(file)))
}

/// Constants from flags, falling back to the model and increments of a config.
fn limit_constants(args: &ConstantArgs, config: &Option<RunConfig>) -> Result<LimitConstants> {
    let model = match config {
        Some(c) if c.model.is_some() => Some(c.model()?),
        _ => None,
    };
    let law = match config {
        Some(c) => c.increments()?,
        None => None,
    };
    let missing = |what: &str| GwiError::Config(format!("--{what} is required without a config"));
    let sigma = args.sigma.or(model.as_ref().map(|m| m.sigma())).ok_or_else(|| missing("sigma"))?;
    let gamma = args.gamma.or(model.as_ref().map(|m| m.gamma())).ok_or_else(|| missing("gamma"))?;
    let sigma0_sq = args
        .sigma0sq
        .or(law.as_ref().map(|l| l.sigma0_sq()))
        .ok_or_else(|| missing("sigma0sq"))?;
    let alpha = args.alpha.or(law.as_ref().and_then(|l| l.alpha()));
    let a = args.tail_constant.or(law.as_ref().and_then(|l| l.tail_constant()));
    let tail = match (alpha, a) {
        (Some(al), Some(a)) => Some((al, a)),
        (Some(al), None) => Some((al, 1.0)),
        _ => None,
    };
    LimitConstants::new(sigma, gamma, sigma0_sq, tail)
}

fn cmd_law(common: &Common, n: usize, k: usize) -> Result<i32> {
    let config = load_config(common)?;
    let model = require_model(&config)?;
    let law = law_of_zn(&model, n, k)?;
    let (path, mut w) = create(&common.output_dir, &format!("law_n{n}_K{k}.csv"))?;
    write_law_csv(std::slice::from_ref(&law), &mut w)?;
    w.flush()?;
    println!(
        "law n={n} K={k} survival={:.12e} tail_mass={:.3e} -> {}",
        law.survival,
        law.tail_mass,
        path.display()
    );
    Ok(EXIT_OK)
}

fn cmd_harmonic(common: &Common, n: usize, r: f64, k: Option<usize>) -> Result<i32> {
    let config = load_config(common)?;
    let model = require_model(&config)?;
    let integral = harmonic_moment_integral(&model, n, r)?;
    let (path, mut w) = create(&common.output_dir, &format!("harmonic_n{n}_r{r}.csv"))?;
    writeln!(w, "n,r,route,J")?;
    writeln!(w, "{n},{r},integral,{integral:.15e}")?;
    let mut line = format!("harmonic n={n} r={r} J_integral={integral:.12e}");
    if let Some(k) = k {
        let sum = harmonic_moment_sum(&law_of_zn(&model, n, k)?, r)?;
        writeln!(w, "{n},{r},sum,{:.15e}", sum.value)?;
        line.push_str(&format!(" J_sum={:.12e} remainder<={:.3e}", sum.value, sum.remainder));
    }
    w.flush()?;
    println!("{line} -> {}", path.display());
    Ok(EXIT_OK)
}

fn cmd_constants(common: &Common, args: &ConstantArgs, rs: &[f64]) -> Result<i32> {
    let config = load_config(common)?;
    let consts = limit_constants(args, &config)?;
    let (sigma, gamma) = (consts.sigma(), consts.gamma());
    let model = match &config {
        Some(c) if c.model.is_some() => Some(c.model()?),
        _ => None,
    };
    let row = |name: String, alpha: Option<f64>, value: f64| ConstantRow {
        name,
        sigma,
        gamma,
        sigma0_sq: Some(consts.sigma0_sq()),
        alpha,
        value,
    };
    let mut rows = vec![row("upsilon".into(), None, upsilon(sigma, consts.sigma0_sq(), gamma)?)];
    rows.push(row("I(sigma,sigma)".into(), None, i_constant(sigma, sigma, gamma, None)?));
    if let Some(alpha) = consts.alpha() {
        if alpha - 1.0 < sigma {
            rows.push(row(
                "I(alpha-1,sigma)".into(),
                Some(alpha),
                i_constant(alpha - 1.0, sigma, gamma, None)?,
            ));
        }
        if let Some(rho) = consts.rho() {
            rows.push(row("rho".into(), Some(alpha), rho));
        }
    }
    for &r in rs {
        rows.push(row(format!("I({r},sigma)"), None, i_constant(r, sigma, gamma, model.as_ref())?));
    }
    let (path, mut w) = create(&common.output_dir, "constants.csv")?;
    write_constants_csv(&rows, &mut w)?;
    w.flush()?;
    write_constants_csv(&rows, std::io::stdout().lock())?;
    println!("constants rows={} -> {}", rows.len(), path.display());
    Ok(EXIT_OK)
}

#[allow(clippy::too_many_arguments)]
fn cmd_classify(
    common: &Common,
    args: &ConstantArgs,
    eps: Option<f64>,
    eps_exponent: Option<f64>,
    eps_log_exponent: Option<f64>,
    coefficient: f64,
    q: Option<f64>,
) -> Result<i32> {
    let config = load_config(common)?;
    let consts = limit_constants(args, &config)?;
    let seq = match (eps, eps_exponent, eps_log_exponent) {
        (Some(eps), _, _) => EpsSequence::Fixed { eps },
        (_, Some(exponent), _) => EpsSequence::Power { coefficient, exponent },
        (_, _, Some(exponent)) => EpsSequence::LogPower { coefficient, exponent },
        _ => {
            return Err(GwiError::Config(
                "one of --eps, --eps-exponent, --eps-log-exponent is required".into(),
            ))
        }
    };
    let moment = if consts.alpha().is_some() {
        MomentCondition::Tail
    } else {
        MomentCondition::Light
    };
    let report = classify_regime(&consts, &seq, moment, q)?;
    println!(
        "regime={} tau={} scaling={} limit={}",
        report.regime.name(),
        report.tau.map(|t| t.to_string()).unwrap_or_else(|| "-".into()),
        report.scaling_text,
        report.limit_value
    );
    Ok(EXIT_OK)
}

fn cmd_simulate(common: &Common, n: usize, eps: Option<f64>, eps_exponent: Option<f64>) -> Result<i32> {
    let config = load_config(common)?;
    let model = require_model(&config)?;
    let cfg = config.as_ref().expect("model came from a config");
    let law = cfg
        .increments()?
        .ok_or_else(|| GwiError::Config("simulate needs an [increments] section".into()))?;
    let exp = cfg.experiment.as_ref();
    let seed = common.seed.or(exp.and_then(|e| e.seed)).unwrap_or(0);
    let paths = common.paths.or(exp.and_then(|e| e.paths)).unwrap_or(100_000);
    let eps = match (eps, eps_exponent) {
        (Some(e), _) => e,
        (None, Some(x)) => (n as f64).powf(-x),
        _ => return Err(GwiError::Config("--eps or --eps-exponent is required".into())),
    };
    let est = estimate_large_deviation(&model, &law, n, eps, paths, seed)?;
    let (path, mut w) = create(&common.output_dir, &format!("mc_n{n}.csv"))?;
    write_mc_csv(std::slice::from_ref(&est), &mut w)?;
    w.flush()?;
    let manifest = RunManifest {
        offspring: model.offspring().clone(),
        immigration: model.immigration().clone(),
        increments: Some(law),
        root_seed: seed,
        shards: SHARDS,
        entries: vec![ManifestEntry { n, eps, paths, seed }],
    };
    let (_, mut m) = create(&common.output_dir, &format!("mc_n{n}.json"))?;
    writeln!(m, "{}", serde_json::to_string_pretty(&manifest).expect("manifest serializes"))?;
    m.flush()?;
    println!(
        "simulate n={n} eps={eps} paths={paths} hits={} p_hat={:.6e} std_err={:.3e} -> {}",
        est.hits,
        est.probability,
        est.std_error,
        path.display()
    );
    Ok(EXIT_OK)
}

fn cmd_experiment(common: &Common) -> Result<i32> {
    let config = load_config(common)?
        .ok_or_else(|| GwiError::Config("experiment needs --config".into()))?;
    let exp = config.experiment()?;
    let report = run_experiment(&exp)?;
    let csv_name = exp
        .output_path
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{}.csv", exp.study.name())));
    let csv_path = common.output_dir.join(&csv_name);
    if let Some(parent) = csv_path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut w = BufWriter::new(File::create(&csv_path)?);
    write_rows_csv(&report.rows, &mut w)?;
    w.flush()?;
    let json = manifest_json(&exp, &report).expect("manifest serializes");
    fs::write(csv_path.with_extension("json"), format!("{json}\n"))?;
    println!("{} -> {}", report.summary(), csv_path.display());
    for f in &report.failed {
        println!("FAILED {f}");
    }
    Ok(if report.is_failed() { EXIT_FAILED } else { EXIT_OK })
}

/// Fast self-checks against closed forms; one line per check.
pub fn oracle_checks() -> Result<Vec<(String, bool)>> {
    let geo = validate_condition_a(&DistributionSpec::geometric(0.5), &DistributionSpec::geometric(1.0 / 3.0))?;
    let tri = validate_condition_a(
        &DistributionSpec::explicit(vec![0.25, 0.5, 0.25]),
        &DistributionSpec::explicit(vec![0.5, 0.5]),
    )?;
    let mut out = Vec::new();
    for (name, model) in [("geometric", &geo), ("explicit", &tri)] {
        let mut worst: f64 = 0.0;
        for n in 1..=5 {
            let a = law_of_zn(model, n, 128)?;
            let b = brute_force_law(model, n, 128)?;
            for (x, y) in a.pmf.iter().zip(&b.pmf) {
                worst = worst.max((x - y).abs());
            }
        }
        out.push((format!("law vs brute force ({name}) max diff {worst:.2e}"), worst <= 1e-12));
    }
    let mut worst: f64 = 0.0;
    for k in 1..=50 {
        let f = offspring_iterate(geo.offspring(), k, 200)?;
        worst = worst.max((f.coeffs()[0] - linear_fractional_oracle(1.0, k, 0.0)).abs());
    }
    out.push((format!("f_k(0) vs k/(k+1) max diff {worst:.2e}"), worst <= 1e-9));
    let mut worst: f64 = 0.0;
    for r in [0.5, 1.0, 1.5] {
        for s in [2.0, 3.0] {
            for g in [0.5, 1.0, 2.0] {
                worst = worst.max((i_below_quadrature(r, s, g)? - i_below_closed_form(r, s, g)).abs());
            }
        }
    }
    out.push((format!("I(r,sigma) quadrature vs closed form max diff {worst:.2e}"), worst <= 1e-8));
    let u = upsilon(2.0, 1.0, 1.0)?;
    out.push((format!("upsilon(2,1,1) = {u}"), (u - 0.75).abs() <= 1e-12));
    let q = upsilon_quadrature(2.0, 1.0, 1.0)?;
    out.push((format!("upsilon quadrature = {q}"), (q - 0.75).abs() <= 1e-8));
    Ok(out)
}

fn cmd_oracle_check(common: &Common) -> Result<i32> {
    load_config(common)?;
    let checks = oracle_checks()?;
    let mut ok = true;
    for (line, pass) in &checks {
        println!("{} {line}", if *pass { "PASS" } else { "FAIL" });
        ok &= pass;
    }
    Ok(if ok { EXIT_OK } else { EXIT_FAILED })
}

pub fn dispatch(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Law { common, n, k } => cmd_law(common, *n, *k),
        Command::Harmonic { common, n, r, k } => cmd_harmonic(common, *n, *r, *k),
        Command::Constants { common, consts, r } => cmd_constants(common, consts, r),
        Command::Classify {
            common,
            consts,
            eps,
            eps_exponent,
            eps_log_exponent,
            eps_coefficient,
            q,
        } => cmd_classify(common, consts, *eps, *eps_exponent, *eps_log_exponent, *eps_coefficient, *q),
        Command::Simulate {
            common,
            n,
            eps,
            eps_exponent,
        } => cmd_simulate(common, *n, *eps, *eps_exponent),
        Command::Experiment { common } => cmd_experiment(common),
        Command::OracleCheck { common } => cmd_oracle_check(common),
    }
}

/// Runs the CLI and maps errors to exit codes.
pub fn run(cli: &Cli) -> i32 {
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) if e.is_config_error() => {
            eprintln!("ConfigError: {e}");
            EXIT_CONFIG
        }
        Err(e) => {
            println!("{}", e.name());
            eprintln!("{}: {e}", e.name());
            EXIT_DOMAIN
        }
    }
}
