//! The `lse-lab` command-line interface.
//!
//! Every subcommand takes its parameters from flags, from a JSON config file
//! (`--config`, keys named like the flags with underscores), or both; flags
//! win. The resolved configuration is echoed to standard error as one JSON
//! line before any work starts.
//!
//! Exit codes: 0 on success, 1 on usage or input errors, 2 when a numerical
//! procedure fails (divergent RS branch, no convergence, no bracket).

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::experiments::{self, McConfig, RunManifest, Solver, SweepSpec};
use crate::replica_core::{self, Constellation, RsConfig};
use crate::replica_rsb::{self, FourthEquation, KernelChoice, RsbOptions};
use crate::spectra::{PathLossModel, SpectrumModel};

#[derive(Debug, Parser)]
#[command(
    name = "lse-lab",
    version,
    about = "Replica predictions and simulations for LSE precoding"
)]
struct Cli {
    /// JSON file with parameters for the subcommand; flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Write results here instead of standard output.
    #[arg(long, short, global = true, value_name = "PATH")]
    output: Option<PathBuf>,

    /// Print timing information to standard error.
    #[arg(long, short, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Replica-symmetric fixed point, distortion and entropy.
    ReplicaRs(RsArgs),
    /// One-step RSB saddle point for M-PSK.
    ReplicaRsb(RsbArgs),
    /// Monte Carlo distortion of a precoder on iid channels.
    Simulate(SimArgs),
    /// Replica and Monte Carlo distortion over a list of loads, as CSV.
    Sweep(SweepArgs),
    /// Closed-form rate-optimal RZF parameters.
    TuneRzf(TuneRzfArgs),
    /// Rate-optimal gamma and lambda for a given average power.
    Tune(TuneArgs),
    /// Union-bound distortion floor for M-ary alphabets.
    UnionBound(UnionArgs),
    /// Gramian spectrum of the equivalent OFDM channel vs an iid channel.
    OfdmEig(OfdmArgs),
    /// Decay exponent of the power needed for a target distortion.
    PowerDecay(DecayArgs),
}

/// Output alphabet selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SetKind {
    /// The whole complex plane (linear RZF precoding).
    Full,
    /// Per-antenna peak power `|x|^2 <= peak`.
    Disk,
    /// Constant envelope `|x|^2 = power`.
    Circle,
    /// M-PSK with power `p`.
    Mpsk,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct SetArgs {
    /// Output alphabet of the precoder.
    #[arg(long, value_enum)]
    pub set: Option<SetKind>,
    /// Peak power per antenna for `--set disk`.
    #[arg(long)]
    pub peak: Option<f64>,
    /// Envelope power for `--set circle` [default: 1].
    #[arg(long)]
    pub power: Option<f64>,
    /// Constellation size for `--set mpsk`.
    #[arg(long = "M", value_name = "M")]
    #[serde(rename = "M")]
    pub m: Option<usize>,
    /// Symbol power for `--set mpsk` [default: 1].
    #[arg(long)]
    pub p: Option<f64>,
}

impl SetArgs {
    fn constellation(&self) -> Result<Constellation> {
        let x = match self.set {
            None => return Err(Error::invalid("--set is required")),
            Some(SetKind::Full) => Constellation::FullComplex,
            Some(SetKind::Disk) => Constellation::Disk {
                peak: self.peak.ok_or_else(|| Error::invalid("--set disk needs --peak"))?,
            },
            Some(SetKind::Circle) => Constellation::Circle {
                power: self.power.unwrap_or(1.0),
            },
            Some(SetKind::Mpsk) => Constellation::Mpsk {
                m: self.m.ok_or_else(|| Error::invalid("--set mpsk needs --M"))?,
                p: self.p.unwrap_or(1.0),
            },
        };
        x.validate()?;
        Ok(x)
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct RsArgs {
    /// Antennas per user N/K; sets the R-transform of the channel Gramian.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub set: SetArgs,
    /// Power scaling gamma of the target sqrt(gamma) u [default: 1].
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Data variance sigma_u^2; enters only through gamma sigma_u^2 [default: 1].
    #[arg(long)]
    pub sigma_u2: Option<f64>,
    /// Power penalty lambda of the LSE objective [default: 0].
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Path-loss exponent; with --kappa switches to the path-loss spectrum.
    #[arg(long)]
    pub nu: Option<f64>,
    /// Ratio of largest to smallest user distance for the path-loss spectrum.
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Use the quadrature fixed-point solver even where a closed form exists.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub generic: Option<bool>,
    /// Quadrature order of the generic solver [default: 80].
    #[arg(long)]
    pub quad_order: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FourthArg {
    Stationary,
    ExtraChiTerm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelArg {
    Auto,
    Polar,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct RsbArgs {
    /// Antennas per user N/K.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub set: SetArgs,
    /// Power scaling gamma [default: 1].
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Data variance sigma_u^2 [default: 1].
    #[arg(long)]
    pub sigma_u2: Option<f64>,
    /// Upper end of the mu1 scan [default: 300].
    #[arg(long)]
    pub mu_max: Option<f64>,
    /// Lower end of the mu1 scan [default: 0.5].
    #[arg(long)]
    pub mu_min: Option<f64>,
    /// Number of scan points [default: 40].
    #[arg(long)]
    pub scan_points: Option<usize>,
    /// Resolution of the z quadrature [default: 32].
    #[arg(long)]
    pub quad_order: Option<usize>,
    /// Form of the scalar equation fixing mu1 [default: stationary].
    #[arg(long, value_enum)]
    pub fourth: Option<FourthArg>,
    /// Quadrature kernel for the (y, z) averages [default: auto].
    #[arg(long, value_enum)]
    pub kernel: Option<KernelArg>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverArg {
    Auto,
    Rzf,
    ProjectedGradient,
    CoordinateDescent,
    Exhaustive,
    Null,
}

impl From<SolverArg> for Solver {
    fn from(s: SolverArg) -> Self {
        match s {
            SolverArg::Auto => Solver::Auto,
            SolverArg::Rzf => Solver::Rzf,
            SolverArg::ProjectedGradient => Solver::ProjectedGradient,
            SolverArg::CoordinateDescent => Solver::CoordinateDescent,
            SolverArg::Exhaustive => Solver::Exhaustive,
            SolverArg::Null => Solver::Null,
        }
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct McArgs {
    /// Number of users K [default: 100].
    #[arg(long = "K", value_name = "K")]
    #[serde(rename = "K")]
    pub k: Option<usize>,
    /// Independent channel and data draws [default: 50].
    #[arg(long)]
    pub trials: Option<usize>,
    /// Base seed; trial t uses seed + t [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub set: SetArgs,
    /// Power scaling gamma [default: 1].
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Power penalty lambda of the LSE objective [default: 0].
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Data variance sigma_u^2 [default: 1].
    #[arg(long)]
    pub sigma_u2: Option<f64>,
    /// Receiver noise variance sigma_n^2, used by the rate bound [default: 1].
    #[arg(long)]
    pub sigma_n2: Option<f64>,
    /// Precoder used on each instance [default: auto].
    #[arg(long, value_enum)]
    pub solver: Option<SolverArg>,
    /// Random restarts of coordinate descent [default: 10].
    #[arg(long)]
    pub restarts: Option<usize>,
}

impl McArgs {
    fn config(&self, alpha: f64) -> Result<McConfig> {
        let mut c = McConfig::new(self.k.unwrap_or(100), alpha, self.set.constellation()?);
        c.trials = self.trials.unwrap_or(50);
        c.seed = self.seed.unwrap_or(0);
        c.gamma = self.gamma.unwrap_or(1.0);
        c.lambda = self.lambda.unwrap_or(0.0);
        c.sigma_u2 = self.sigma_u2.unwrap_or(1.0);
        c.sigma_n2 = self.sigma_n2.unwrap_or(1.0);
        c.solver = self.solver.map(Solver::from).unwrap_or_default();
        c.restarts = self.restarts.unwrap_or(10);
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct SimArgs {
    /// Antennas per user; N = round(alpha K).
    #[arg(long)]
    pub alpha: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub mc: McArgs,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct SweepArgs {
    /// Comma-separated loads N/K.
    #[arg(long, value_delimiter = ',')]
    pub alphas: Option<Vec<f64>>,
    #[command(flatten)]
    #[serde(flatten)]
    pub mc: McArgs,
    /// Also solve the 1-RSB saddle point (M-PSK only).
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub rsb: Option<bool>,
    /// Run manifest path [default: <output>.manifest.json when --output is set].
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct TuneRzfArgs {
    /// Antennas per user N/K.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Average transmit power per antenna q.
    #[arg(long)]
    pub q: Option<f64>,
    /// Receiver noise variance sigma_n^2 [default: 1].
    #[arg(long)]
    pub sigma_n2: Option<f64>,
    /// Data variance sigma_u^2 [default: 1].
    #[arg(long)]
    pub sigma_u2: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct TuneArgs {
    /// Antennas per user N/K.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub set: SetArgs,
    /// Target average power per antenna q (fixed to the set power for constant-modulus sets).
    #[arg(long)]
    pub q: Option<f64>,
    /// Peak-to-average power ratio in dB; for `--set disk` sets peak = q 10^(papr/10).
    #[arg(long)]
    pub papr_db: Option<f64>,
    /// Receiver noise variance sigma_n^2 [default: 1].
    #[arg(long)]
    pub sigma_n2: Option<f64>,
    /// Data variance sigma_u^2 [default: 1].
    #[arg(long)]
    pub sigma_u2: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct UnionArgs {
    /// Antennas per user N/K.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Alphabet size M.
    #[arg(long = "M", value_name = "M")]
    #[serde(rename = "M")]
    pub m: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct OfdmArgs {
    /// Number of subcarriers L [default: 64].
    #[arg(long = "L", value_name = "L")]
    #[serde(rename = "L")]
    pub l: Option<usize>,
    /// Transmit antennas N [default: 128].
    #[arg(long = "N", value_name = "N")]
    #[serde(rename = "N")]
    pub n: Option<usize>,
    /// Users K [default: 128].
    #[arg(long = "K", value_name = "K")]
    #[serde(rename = "K")]
    pub k: Option<usize>,
    /// Seed for the channel draws [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Largest KL * NL for which the dense cross-check runs [default: 4194304].
    #[arg(long)]
    pub dense_cap: Option<usize>,
    /// Also write both spectra as CSV to this file.
    #[arg(long)]
    pub spectra: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct DecayArgs {
    /// Target distortion (linear, below gamma sigma_u^2 = 1) [default: 0.1].
    #[arg(long)]
    pub d_target: Option<f64>,
    /// Comma-separated loads N/K [default: 10,20,30,50,70,100].
    #[arg(long, value_delimiter = ',')]
    pub alphas: Option<Vec<f64>>,
    /// Peak power per antenna [default: 1].
    #[arg(long)]
    pub peak: Option<f64>,
}

/// Merges a config-file object under the flags. Unknown keys in the file are
/// rejected.
fn resolve<T: Serialize + DeserializeOwned + Default>(flags: &T, file: Option<&Value>) -> Result<T> {
    let Some(file) = file else {
        return Ok(serde_json::from_value(serde_json::to_value(flags)?)?);
    };
    let Value::Object(file) = file else {
        return Err(Error::invalid("config file must hold a JSON object"));
    };
    let Value::Object(known) = serde_json::to_value(T::default())? else {
        unreachable!("argument structs serialize to objects");
    };
    if let Some(k) = file.keys().find(|k| !known.contains_key(*k)) {
        let mut names: Vec<&String> = known.keys().collect();
        names.sort();
        return Err(Error::invalid(format!(
            "unknown config key `{k}` (expected one of: {})",
            names.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", ")
        )));
    }
    let mut merged = file.clone();
    if let Value::Object(cli) = serde_json::to_value(flags)? {
        for (k, v) in cli {
            if !v.is_null() {
                merged.insert(k, v);
            }
        }
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| Error::invalid(format!("config file: {e}")))
}

fn need<T>(v: Option<T>, flag: &str) -> Result<T> {
    v.ok_or_else(|| Error::invalid(format!("{flag} is required")))
}

struct Io<'a> {
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
    output: Option<PathBuf>,
    verbose: bool,
}

impl Io<'_> {
    fn echo(&mut self, command: &str, config: &Value) -> Result<()> {
        writeln!(self.err, "config: {}", json!({ "command": command, "config": config }))?;
        Ok(())
    }

    fn emit_json(&mut self, v: &Value) -> Result<()> {
        let text = serde_json::to_string_pretty(v)?;
        match &self.output {
            Some(path) => std::fs::write(path, text + "\n")?,
            None => writeln!(self.out, "{text}")?,
        }
        Ok(())
    }
}

fn rs_config(alpha: f64, gamma: f64, sigma_u2: f64, spectrum: Option<SpectrumModel>) -> Result<RsConfig> {
    let sp = match spectrum {
        Some(sp) => sp,
        None => SpectrumModel::iid(alpha)?,
    };
    let cfg = RsConfig::new(sp).with_gamma(gamma).with_sigma_u2(sigma_u2);
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_replica_rs(a: RsArgs, io: &mut Io) -> Result<()> {
    let alpha = need(a.alpha, "--alpha")?;
    let x = a.set.constellation()?;
    let spectrum = match (a.nu, a.kappa) {
        (None, None) => None,
        (Some(nu), Some(kappa)) => Some(SpectrumModel::PathLossNumeric(
            PathLossModel::new(alpha, nu, kappa)?.with_grid(200.0, 400)?,
        )),
        _ => return Err(Error::invalid("--nu and --kappa must be given together")),
    };
    let mut cfg = rs_config(alpha, a.gamma.unwrap_or(1.0), a.sigma_u2.unwrap_or(1.0), spectrum)?
        .with_lambda(a.lambda.unwrap_or(0.0));
    if let Some(n) = a.quad_order {
        cfg = cfg.with_quad_order(n);
    }
    let generic = a.generic.unwrap_or(false);
    io.echo(
        "replica-rs",
        &json!({
            "alpha": alpha, "constellation": x, "gamma": cfg.gamma, "sigma_u2": cfg.sigma_u2,
            "lambda": cfg.lambda, "nu": a.nu, "kappa": a.kappa, "generic": generic,
            "quad_order": cfg.quad_order,
        }),
    )?;
    let sol = if generic {
        replica_core::solve_rs_generic(&x, &cfg)?
    } else {
        replica_core::solve_rs(&x, &cfg)?
    };
    io.emit_json(&serde_json::to_value(sol)?)
}

fn cmd_replica_rsb(a: RsbArgs, io: &mut Io) -> Result<()> {
    let alpha = need(a.alpha, "--alpha")?;
    let x = a.set.constellation()?;
    let cfg = rs_config(alpha, a.gamma.unwrap_or(1.0), a.sigma_u2.unwrap_or(1.0), None)?;
    let d = RsbOptions::default();
    let opts = RsbOptions {
        quad_order: a.quad_order.unwrap_or(d.quad_order),
        mu_max: a.mu_max.unwrap_or(d.mu_max),
        mu_min: a.mu_min.unwrap_or(d.mu_min),
        scan_points: a.scan_points.unwrap_or(d.scan_points),
        fourth: match a.fourth {
            Some(FourthArg::ExtraChiTerm) => FourthEquation::ExtraChiTerm,
            _ => FourthEquation::Stationary,
        },
        kernel: match a.kernel {
            Some(KernelArg::Polar) => KernelChoice::Polar,
            _ => KernelChoice::Auto,
        },
        ..d
    };
    io.echo(
        "replica-rsb",
        &json!({
            "alpha": alpha, "constellation": x, "gamma": cfg.gamma, "sigma_u2": cfg.sigma_u2,
            "mu_max": opts.mu_max, "mu_min": opts.mu_min, "scan_points": opts.scan_points,
            "quad_order": opts.quad_order, "fourth": opts.fourth, "kernel": opts.kernel,
        }),
    )?;
    let sol = replica_rsb::solve_rsb1(&x, &cfg, &opts)?;
    io.emit_json(&serde_json::to_value(sol)?)
}

fn cmd_simulate(a: SimArgs, io: &mut Io) -> Result<()> {
    let mc = a.mc.config(need(a.alpha, "--alpha")?)?;
    io.echo("simulate", &serde_json::to_value(&mc)?)?;
    let r = experiments::monte_carlo_distortion(&mc)?;
    let mut v = serde_json::to_value(r)?;
    v["k"] = json!(mc.k);
    v["n"] = json!(mc.n());
    io.emit_json(&v)
}

fn default_manifest(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_os_string();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn cmd_sweep(a: SweepArgs, io: &mut Io) -> Result<()> {
    let started = Instant::now();
    let alphas = need(a.alphas.clone(), "--alphas")?;
    if alphas.is_empty() {
        return Err(Error::invalid("--alphas must not be empty"));
    }
    let spec = SweepSpec {
        mc: a.mc.config(alphas[0])?,
        alphas,
        rsb: a.rsb.unwrap_or(false),
    };
    let config = serde_json::to_value(&spec)?;
    io.echo("sweep", &config)?;
    let rows = match &io.output {
        Some(path) => experiments::run_sweep(&spec, BufWriter::new(File::create(path)?)),
        None => experiments::run_sweep(&spec, &mut *io.out),
    }?;
    let manifest_path = a.manifest.or_else(|| io.output.as_deref().map(default_manifest));
    if let Some(path) = manifest_path {
        let seeds = (0..spec.mc.trials as u64)
            .map(|t| spec.mc.seed.wrapping_add(t))
            .collect();
        let m = RunManifest::new("sweep", config, seeds, started);
        std::fs::write(path, serde_json::to_string_pretty(&m)? + "\n")?;
    }
    if io.verbose {
        writeln!(io.err, "{} rows in {:.2?}", rows.len(), started.elapsed())?;
    }
    Ok(())
}

fn cmd_tune_rzf(a: TuneRzfArgs, io: &mut Io) -> Result<()> {
    let (alpha, q) = (need(a.alpha, "--alpha")?, need(a.q, "--q")?);
    let (sn, su) = (a.sigma_n2.unwrap_or(1.0), a.sigma_u2.unwrap_or(1.0));
    io.echo(
        "tune-rzf",
        &json!({ "alpha": alpha, "q": q, "sigma_n2": sn, "sigma_u2": su }),
    )?;
    io.emit_json(&serde_json::to_value(experiments::tune_rzf(alpha, q, sn, su)?)?)
}

fn cmd_tune(a: TuneArgs, io: &mut Io) -> Result<()> {
    let alpha = need(a.alpha, "--alpha")?;
    let mut set = a.set.clone();
    if let (Some(SetKind::Disk), Some(papr), None) = (set.set, a.papr_db, set.peak) {
        set.peak = Some(need(a.q, "--q")? * 10f64.powf(papr / 10.0));
    }
    let x = set.constellation()?;
    let q = match (x.modulus_sq(), a.q) {
        (Some(p), None) => p,
        (_, q) => need(q, "--q")?,
    };
    let (sn, su) = (a.sigma_n2.unwrap_or(1.0), a.sigma_u2.unwrap_or(1.0));
    io.echo(
        "tune",
        &json!({ "alpha": alpha, "constellation": x, "q": q, "sigma_n2": sn, "sigma_u2": su }),
    )?;
    io.emit_json(&serde_json::to_value(experiments::tune_constellation(
        &x, alpha, q, sn, su,
    )?)?)
}

fn cmd_union_bound(a: UnionArgs, io: &mut Io) -> Result<()> {
    let (alpha, m) = (need(a.alpha, "--alpha")?, need(a.m, "--M")?);
    io.echo("union-bound", &json!({ "alpha": alpha, "M": m }))?;
    io.emit_json(&serde_json::to_value(experiments::union_bound_epsilon(alpha, m)?)?)
}

fn cmd_ofdm(a: OfdmArgs, io: &mut Io) -> Result<()> {
    let (l, n, k) = (a.l.unwrap_or(64), a.n.unwrap_or(128), a.k.unwrap_or(128));
    let (seed, cap) = (a.seed.unwrap_or(0), a.dense_cap.unwrap_or(1 << 22));
    io.echo(
        "ofdm-eig",
        &json!({ "L": l, "N": n, "K": k, "seed": seed, "dense_cap": cap }),
    )?;
    let r = experiments::ofdm_equivalence(l, n, k, seed, cap)?;
    if let Some(path) = &a.spectra {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["source", "eigenvalue"])?;
        for (src, eig) in [("ofdm", &r.eig_ofdm), ("iid", &r.eig_iid)] {
            for e in eig.iter() {
                w.write_record([src, &format!("{e:.12e}")])?;
            }
        }
        w.flush()?;
    }
    io.emit_json(&json!({
        "ks_distance": r.ks_distance,
        "unitarity_error": r.unitarity_error,
        "coupling": r.coupling,
        "eigenvalues_ofdm": r.eig_ofdm.len(),
        "eigenvalues_iid": r.eig_iid.len(),
    }))
}

fn cmd_power_decay(a: DecayArgs, io: &mut Io) -> Result<()> {
    let d = a.d_target.unwrap_or(0.1);
    let alphas = a.alphas.unwrap_or_else(|| vec![10.0, 20.0, 30.0, 50.0, 70.0, 100.0]);
    let peak = a.peak.unwrap_or(1.0);
    io.echo("power-decay", &json!({ "d_target": d, "alphas": alphas, "peak": peak }))?;
    io.emit_json(&serde_json::to_value(experiments::power_decay_fit(d, &alphas, peak)?)?)
}

fn dispatch(cli: Cli, io: &mut Io) -> Result<()> {
    let file: Option<Value> = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            Some(serde_json::from_str(&text).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?)
        }
        None => None,
    };
    let f = file.as_ref();
    let started = Instant::now();
    let res = match cli.command {
        Command::ReplicaRs(a) => cmd_replica_rs(resolve(&a, f)?, io),
        Command::ReplicaRsb(a) => cmd_replica_rsb(resolve(&a, f)?, io),
        Command::Simulate(a) => cmd_simulate(resolve(&a, f)?, io),
        Command::Sweep(a) => cmd_sweep(resolve(&a, f)?, io),
        Command::TuneRzf(a) => cmd_tune_rzf(resolve(&a, f)?, io),
        Command::Tune(a) => cmd_tune(resolve(&a, f)?, io),
        Command::UnionBound(a) => cmd_union_bound(resolve(&a, f)?, io),
        Command::OfdmEig(a) => cmd_ofdm(resolve(&a, f)?, io),
        Command::PowerDecay(a) => cmd_power_decay(resolve(&a, f)?, io),
    };
    if io.verbose {
        let _ = writeln!(io.err, "elapsed: {:.3?}", started.elapsed());
    }
    res
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("LSE_LAB_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| Error::invalid(format!("LSE_LAB_THREADS must be a non-negative integer, got `{v}`")))?;
    if n > 0 {
        // A pool may already exist when called twice in one process.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

/// Runs the CLI with explicit streams and returns the process exit code.
pub fn run_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    0
                }
                _ => {
                    let _ = write!(err, "{text}");
                    1
                }
            };
        }
    };
    if let Err(e) = configure_threads() {
        let _ = writeln!(err, "error: {e}");
        return 1;
    }
    let mut io = Io {
        out,
        err,
        output: cli.output.clone(),
        verbose: cli.verbose,
    };
    match dispatch(cli, &mut io) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(io.err, "error: {e}");
            if e.is_numerical() {
                2
            } else {
                1
            }
        }
    }
}

/// Runs the CLI on the process streams.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(argv, &mut stdout.lock(), &mut stderr.lock())
}
