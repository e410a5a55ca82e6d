//! `nf-music`: simulate wideband near-field radar echoes and estimate target
//! directions and ranges with squint-corrected MUSIC.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 configuration/usage error,
//! 3 identifiability violation (more targets than the array or snapshot
//! budget can resolve).

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use nf_music::array::{nearfield_steering, SPEED_OF_LIGHT};
use nf_music::bench::{array_gain_scan, single_run, snr_sweep, Scenario};
use nf_music::estimator::{registered_modes, squint_transform};
use nf_music::io::{
    write_estimates_json, write_gain_csv, write_manifest_json, write_spectrum_csv,
    write_sweep_csv,
};
use nf_music::scene::reflection_coefficients;
use nf_music::subspace::{eigendecompose, sample_covariance};

const EXIT_RUNTIME: i32 = 1;
const EXIT_CONFIG: i32 = 2;
const EXIT_IDENTIFIABILITY: i32 = 3;

#[derive(Parser)]
#[command(
    name = "nf-music",
    version,
    about = "Wideband near-field radar simulation and direction/range estimation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scene and write the spatial spectrum for each mode
    Spectrum(SpectrumArgs),
    /// Monte Carlo RMSE-vs-SNR sweep across modes
    Sweep(CommonArgs),
    /// Array-gain scan showing per-subcarrier beam drift
    Gain(GainArgs),
    /// Self-check the configured scenario and core identities
    Validate(CommonArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    /// Reduced subcarriers/snapshots, one fixed target; minutes per sweep
    Desk,
    /// Full-scale reference configuration; hours per sweep
    Paper,
}

#[derive(Args)]
struct CommonArgs {
    /// Built-in scenario
    #[arg(long, value_enum, default_value = "desk", conflicts_with = "scenario")]
    preset: Preset,
    /// TOML scenario file (strict: unknown keys are rejected)
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Base seed override
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated estimator modes, or "all"
    #[arg(long)]
    mode: Option<String>,
    /// SNR in dB: a single value, a comma list, or start:step:stop; "inf"
    /// means noiseless. `spectrum` takes exactly one point (default inf)
    #[arg(long, allow_hyphen_values = true)]
    snr: Option<String>,
    /// Trials per SNR point
    #[arg(long)]
    trials: Option<usize>,
    /// Direction grid step (directional sine)
    #[arg(long)]
    grid_step_u: Option<f64>,
    /// Range grid step in meters
    #[arg(long)]
    grid_step_r: Option<f64>,
    /// Bandwidth override in Hz
    #[arg(long)]
    bandwidth: Option<f64>,
    /// Subcarrier count override
    #[arg(long)]
    subcarriers: Option<usize>,
}

#[derive(Args)]
struct SpectrumArgs {
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct GainArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Beam design direction (directional sine)
    #[arg(long, default_value_t = std::f64::consts::FRAC_1_SQRT_2)]
    u0: f64,
    /// Beam design range in meters
    #[arg(long, default_value_t = 10.0)]
    r0: f64,
}

#[derive(Debug)]
struct CliError {
    code: i32,
    message: String,
}

impl CliError {
    fn config(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }

    fn silent(code: i32) -> Self {
        Self {
            code,
            message: String::new(),
        }
    }
}

impl From<nf_music::Error> for CliError {
    fn from(err: nf_music::Error) -> Self {
        let code = match &err {
            nf_music::Error::Config(_) => EXIT_CONFIG,
            nf_music::Error::Identifiability(_) => EXIT_IDENTIFIABILITY,
            _ => EXIT_RUNTIME,
        };
        Self {
            code,
            message: err.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        Self {
            code: EXIT_RUNTIME,
            message: err.to_string(),
        }
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Err(err) = setup_threads().and_then(|()| dispatch(cli)) {
        if !err.message.is_empty() {
            eprintln!("error: {}", err.message);
        }
        std::process::exit(err.code);
    }
}

/// `NF_MUSIC_THREADS` caps the worker pool; unset means one worker per core.
fn setup_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("NF_MUSIC_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .parse()
        .ok()
        .filter(|n| *n >= 1)
        .ok_or_else(|| CliError::config(format!("NF_MUSIC_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::config(format!("could not size the worker pool: {e}")))
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Spectrum(args) => cmd_spectrum(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Gain(args) => cmd_gain(args),
        Command::Validate(args) => cmd_validate(args),
    }
}

/// Resolve preset/file plus flag overrides into one scenario. The SNR flag
/// is interpreted per command and handled by the callers.
fn build_scenario(common: &CommonArgs) -> Result<Scenario, CliError> {
    let mut scenario = match &common.scenario {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| {
                CliError::config(format!("cannot read scenario file {}: {e}", path.display()))
            })?;
            toml::from_str(&text).map_err(|e| {
                CliError::config(format!("invalid scenario file {}: {e}", path.display()))
            })?
        }
        None => match common.preset {
            Preset::Desk => Scenario::desk(),
            Preset::Paper => Scenario::paper(),
        },
    };
    if let Some(seed) = common.seed {
        scenario.seed = seed;
    }
    if let Some(mode) = &common.mode {
        scenario.modes = parse_modes(mode)?;
    }
    if let Some(trials) = common.trials {
        scenario.trials = trials;
    }
    if let Some(step) = common.grid_step_u {
        scenario.grid_step_u = step;
    }
    if let Some(step) = common.grid_step_r {
        scenario.grid_step_r = step;
    }
    if let Some(bandwidth) = common.bandwidth {
        scenario.bandwidth_hz = bandwidth;
    }
    if let Some(m) = common.subcarriers {
        scenario.n_subcarriers = m;
    }
    Ok(scenario)
}

fn parse_modes(text: &str) -> Result<Vec<String>, CliError> {
    if text.trim() == "all" {
        return Ok(registered_modes().iter().map(|m| m.name().to_string()).collect());
    }
    let modes: Vec<String> = text
        .split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect();
    if modes.is_empty() {
        return Err(CliError::config("mode list is empty"));
    }
    Ok(modes)
}

/// Accepts `a`, `a,b,c`, or `start:step:stop`; `inf` is a noiseless point.
fn parse_snr_list(text: &str) -> Result<Vec<f64>, CliError> {
    let text = text.trim();
    if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(CliError::config(format!(
                "SNR range must be start:step:stop, got {text:?}"
            )));
        }
        let nums: Vec<f64> = parts
            .iter()
            .map(|p| parse_snr_value(p))
            .collect::<Result<_, _>>()?;
        let (start, step, stop) = (nums[0], nums[1], nums[2]);
        if !(start.is_finite() && step.is_finite() && stop.is_finite() && step > 0.0) {
            return Err(CliError::config(format!(
                "SNR range needs finite bounds and a positive step, got {text:?}"
            )));
        }
        if stop < start {
            return Err(CliError::config(format!(
                "SNR range runs backwards: {text:?}"
            )));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        return Ok((0..count).map(|i| start + i as f64 * step).collect());
    }
    let list: Vec<f64> = text
        .split(',')
        .map(parse_snr_value)
        .collect::<Result<_, _>>()?;
    if list.is_empty() {
        return Err(CliError::config("SNR list is empty"));
    }
    Ok(list)
}

fn parse_snr_value(text: &str) -> Result<f64, CliError> {
    let text = text.trim();
    if text.eq_ignore_ascii_case("inf") || text.eq_ignore_ascii_case("+inf") {
        return Ok(f64::INFINITY);
    }
    text.parse::<f64>()
        .ok()
        .filter(|v| !v.is_nan())
        .ok_or_else(|| CliError::config(format!("invalid SNR value {text:?}")))
}

fn cmd_spectrum(args: SpectrumArgs) -> Result<(), CliError> {
    let mut scenario = build_scenario(&args.common)?;
    let snr = match &args.common.snr {
        None => f64::INFINITY,
        Some(text) => {
            let list = parse_snr_list(text)?;
            if list.len() != 1 {
                return Err(CliError::config(
                    "spectrum takes exactly one SNR point; use `sweep` for curves",
                ));
            }
            list[0]
        }
    };
    scenario.snr_db = vec![snr];
    scenario.validate()?;
    fs::create_dir_all(&args.common.out)?;

    log::info!(
        "spectrum: scenario '{}', SNR {snr} dB, {} modes",
        scenario.label,
        scenario.modes.len()
    );
    let run = single_run(&scenario, snr, 0)?;
    for (spectrum, outcome) in run.spectra.iter().zip(&run.trial.outcomes) {
        let path = args.common.out.join(format!("spectrum_{}.csv", outcome.mode));
        write_spectrum_csv(&path, spectrum)?;
        println!("wrote {}", path.display());
    }
    let estimates: Vec<_> = run
        .trial
        .outcomes
        .iter()
        .map(|o| o.estimates.clone())
        .collect();
    let est_path = args.common.out.join("estimates.json");
    write_estimates_json(&est_path, &estimates)?;
    println!("wrote {}", est_path.display());
    write_manifest(&args.common.out, &scenario)?;

    for outcome in &run.trial.outcomes {
        for peak in &outcome.estimates.peaks {
            match peak.range_m {
                Some(r) => println!(
                    "{:>9}: u = {:+.6}, r = {:.3} m (peak {:.3e})",
                    outcome.mode, peak.direction_sine, r, peak.value
                ),
                None => println!(
                    "{:>9}: u = {:+.6} (direction-only, peak {:.3e})",
                    outcome.mode, peak.direction_sine, peak.value
                ),
            }
        }
    }
    Ok(())
}

fn cmd_sweep(args: CommonArgs) -> Result<(), CliError> {
    let mut scenario = build_scenario(&args)?;
    if let Some(text) = &args.snr {
        scenario.snr_db = parse_snr_list(text)?;
    }
    if scenario.trials == 0 {
        return Err(CliError::config("sweep needs at least one trial per SNR point"));
    }
    scenario.validate()?;
    fs::create_dir_all(&args.out)?;

    let curve = snr_sweep(&scenario)?;
    let path = args.out.join("sweep.csv");
    write_sweep_csv(&path, &curve)?;
    println!("wrote {}", path.display());
    write_manifest(&args.out, &scenario)?;

    for row in &curve.rows {
        match row.rmse_range_m {
            Some(r) => println!(
                "SNR {:>6} dB {:>9}: rmse {:.4} deg, {:.4} m ({} trials)",
                row.snr_db, row.mode, row.rmse_theta_deg, r, row.n_trials
            ),
            None => println!(
                "SNR {:>6} dB {:>9}: rmse {:.4} deg ({} trials)",
                row.snr_db, row.mode, row.rmse_theta_deg, row.n_trials
            ),
        }
    }
    Ok(())
}

fn cmd_gain(args: GainArgs) -> Result<(), CliError> {
    let mut scenario = build_scenario(&args.common)?;
    if let Some(text) = &args.common.snr {
        scenario.snr_db = parse_snr_list(text)?;
    }
    scenario.validate()?;
    fs::create_dir_all(&args.common.out)?;

    let scan = array_gain_scan(args.u0, args.r0, &scenario)?;
    let path = args.common.out.join("gain.csv");
    write_gain_csv(&path, &scan)?;
    println!("wrote {}", path.display());
    write_manifest(&args.common.out, &scenario)?;

    println!("beam designed at u0 = {:+.6}, r0 = {} m", args.u0, args.r0);
    for peak in &scan.peaks {
        println!(
            "m = {:>3} ({:7.3} GHz): gain peak at u = {:+.6} (drift {:+.6}, gain {:.4})",
            peak.subcarrier,
            peak.frequency_hz / 1e9,
            peak.direction_sine,
            peak.direction_sine - args.u0,
            peak.gain
        );
    }
    Ok(())
}

struct CheckRow {
    name: &'static str,
    passed: bool,
    detail: String,
}

fn cmd_validate(args: CommonArgs) -> Result<(), CliError> {
    let mut scenario = build_scenario(&args)?;
    if let Some(text) = &args.snr {
        scenario.snr_db = parse_snr_list(text)?;
    }

    let mut rows: Vec<CheckRow> = Vec::new();
    let mut identifiability_failed = false;

    let scenario_check = scenario.validate();
    rows.push(CheckRow {
        name: "scenario consistency",
        passed: scenario_check.is_ok(),
        detail: match &scenario_check {
            Ok(()) => format!(
                "label '{}': N={}, N_RF={}, M={}, T={}, K={}",
                scenario.label,
                scenario.n_antennas,
                scenario.n_rf,
                scenario.n_subcarriers,
                scenario.snapshots,
                scenario.n_targets
            ),
            Err(e) => {
                if matches!(e, nf_music::Error::Identifiability(_)) {
                    identifiability_failed = true;
                }
                e.to_string()
            }
        },
    });

    // The remaining checks need a consistent geometry; run them even when the
    // scenario check failed for non-geometric reasons, but bail out if the
    // array itself cannot be built.
    match (scenario.array_config(), scenario.wideband_grid()) {
        (Ok(cfg), Ok(grid)) => {
            let d_f = cfg.fraunhofer_distance();
            let sample_r = (0.6 * d_f).max(0.5);

            let norm_detail;
            let norm_ok;
            match nearfield_steering(&cfg, 0.5, sample_r, grid.carrier_hz()) {
                Ok(steer) => {
                    let norm: f64 = steer
                        .entries()
                        .iter()
                        .map(|z| z.norm_sqr())
                        .sum::<f64>()
                        .sqrt();
                    norm_ok = (norm - 1.0).abs() < 1e-12;
                    norm_detail = format!("||a|| - 1 = {:+.3e}", norm - 1.0);
                }
                Err(e) => {
                    norm_ok = false;
                    norm_detail = e.to_string();
                }
            }
            rows.push(CheckRow {
                name: "steering normalization",
                passed: norm_ok,
                detail: norm_detail,
            });

            // Two aperture conventions are in circulation: (N-1)d with the
            // exact speed of light (used here), and N*d with c = 3e8 m/s,
            // which reads about 0.85% higher. Both are reported so numbers
            // can be compared across either convention.
            let lambda_round = 3e8 / grid.carrier_hz();
            let alt = 2.0 * (cfg.n_antennas() as f64 * lambda_round / 2.0).powi(2) / lambda_round;
            rows.push(CheckRow {
                name: "fraunhofer conventions",
                passed: d_f.is_finite() && d_f > 0.0,
                detail: format!(
                    "(N-1)d, c={SPEED_OF_LIGHT}: {d_f:.4} m; N*d, c=3e8: {alt:.4} m"
                ),
            });

            let data = reflection_coefficients(32, 96, scenario.seed);
            let cov = sample_covariance(&data);
            match eigendecompose(&cov, 4) {
                Ok(pair) => {
                    let n = cov.nrows();
                    let identity = nalgebra_identity_residual(&pair, n);
                    let trace: f64 = (0..n).map(|i| cov[(i, i)].re).sum();
                    let trace_rel =
                        (pair.eigenvalues().iter().sum::<f64>() - trace).abs() / trace.abs();
                    let cross = (pair.signal().adjoint() * pair.noise()).norm();
                    let ok = identity < 1e-8 && trace_rel < 1e-8 && cross < 1e-8;
                    rows.push(CheckRow {
                        name: "subspace identities",
                        passed: ok,
                        detail: format!(
                            "projector {identity:.2e}, trace {trace_rel:.2e}, cross {cross:.2e}"
                        ),
                    });
                }
                Err(e) => rows.push(CheckRow {
                    name: "subspace identities",
                    passed: false,
                    detail: e.to_string(),
                }),
            }

            if grid.is_degenerate() {
                // Zero bandwidth: every subcarrier ratio is one and the
                // squint correction is the identity by construction.
                let mut max_dev = 0.0f64;
                for m in 0..grid.len() {
                    if let Ok(t) = squint_transform(&cfg, &grid, 0.4, sample_r, m) {
                        for z in t.entries().iter() {
                            max_dev = max_dev
                                .max((z - num_one()).norm());
                        }
                    }
                }
                rows.push(CheckRow {
                    name: "squint correction",
                    passed: max_dev < 1e-12,
                    detail: format!(
                        "degenerate pass: zero bandwidth, ratio = 1 everywhere, |tau - 1| <= {max_dev:.2e}"
                    ),
                });
            } else {
                let mut max_spread = 0.0f64;
                let mut checked = 0usize;
                for &u in &[-0.62, 0.33, std::f64::consts::FRAC_1_SQRT_2] {
                    for &frac in &[0.55, 0.9] {
                        let r = (frac * d_f).max(0.5);
                        for m in [0, grid.len() / 2, grid.len() - 1] {
                            if let Ok(t) = squint_transform(&cfg, &grid, u, r, m) {
                                let first = t.entries()[0];
                                for z in t.entries().iter() {
                                    max_spread = max_spread.max((z - first).norm());
                                }
                                checked += 1;
                            }
                        }
                    }
                }
                rows.push(CheckRow {
                    name: "squint correction",
                    passed: checked > 0 && max_spread < 1e-8,
                    detail: format!(
                        "{checked} hypotheses: correction is a pure beam shift, phase spread {max_spread:.2e}"
                    ),
                });
            }
        }
        (Err(e), _) | (_, Err(e)) => rows.push(CheckRow {
            name: "array geometry",
            passed: false,
            detail: e.to_string(),
        }),
    }

    let mut all_ok = true;
    for row in &rows {
        let status = if row.passed { "PASS" } else { "FAIL" };
        all_ok &= row.passed;
        println!("{status}  {:<24} {}", row.name, row.detail);
    }
    if all_ok {
        println!("all checks passed");
        Ok(())
    } else if identifiability_failed {
        Err(CliError::silent(EXIT_IDENTIFIABILITY))
    } else {
        Err(CliError::silent(EXIT_RUNTIME))
    }
}

fn num_one() -> nf_music::Complex64 {
    nf_music::Complex64::new(1.0, 0.0)
}

fn nalgebra_identity_residual(pair: &nf_music::subspace::SubspacePair, n: usize) -> f64 {
    let projector = pair.signal() * pair.signal().adjoint() + pair.noise() * pair.noise().adjoint();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let expect = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((projector[(i, j)] - num_one() * expect).norm());
        }
    }
    worst
}

fn write_manifest(out: &Path, scenario: &Scenario) -> Result<(), CliError> {
    let path = out.join("manifest.json");
    write_manifest_json(&path, scenario)?;
    println!("wrote {}", path.display());
    Ok(())
}
