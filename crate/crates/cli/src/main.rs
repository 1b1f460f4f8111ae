//! `fringe`: config-driven simulation and fringe-skewness analysis for
//! θ-deformed interference patterns.
//!
//! Exit codes: 0 success, 2 config error, 3 compute error, 4 acceptance
//! failure (from `check`).

mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use fringe_core::analysis::{estimate_theta, local_moments, skewness_null_test};
use fringe_core::fixtures;
use fringe_core::noise::{apply_psf, sample_shots, shot_pattern};
use fringe_core::pipeline::{
    analyze_pattern, central_record, central_skewness, noiseless_pattern, run_scenario,
    run_solver_scenario,
};
use fringe_core::{
    acceptance, AnalysisOptions, CalibrationTable, DeformationParams, FringeRecord,
    ProbabilityField,
};

use config::{Mode, RunConfig};
use output::{config_hash, g17, Headers};

#[derive(Parser)]
#[command(name = "fringe", version, about = "θ-deformed interference pattern toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides [output].dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// RNG seed (overrides [noise].seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for sweeps and ensembles.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Suppress progress output.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one pattern and analyze its fringes.
    Simulate,
    /// Analyze an existing pattern CSV (columns x,p[,masked]).
    Analyze {
        #[arg(long)]
        input: PathBuf,
    },
    /// Run the θ × r sweep from [sweep] and fit 𝒮 = K·θ·r.
    Sweep,
    /// θ = 0 noise ensemble: per-fringe skewness z-scores.
    NullTest,
    /// Run the acceptance suite; exits 4 when any criterion fails.
    Check {
        /// Full-size noise ensemble (slower).
        #[arg(long)]
        slow: bool,
    },
    /// Oracle operations.
    Oracle {
        #[command(subcommand)]
        op: OracleOp,
    },
}

#[derive(Subcommand)]
enum OracleOp {
    /// Regenerate fixtures/derived.toml from the oracles.
    Regen,
}

enum CliError {
    Config(String),
    Compute(String),
    Acceptance,
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Compute(_) => 3,
            CliError::Acceptance => 4,
        }
    }
}

fn compute<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Compute(e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        // Ignore the error if a pool already exists (tests call run twice).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                CliError::Config(msg) => eprintln!("config error: {msg}"),
                CliError::Compute(msg) => eprintln!("compute error: {msg}"),
                CliError::Acceptance => eprintln!("acceptance check failed"),
            }
            ExitCode::from(e.code())
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Simulate => simulate(cli),
        Command::Analyze { input } => analyze(cli, input),
        Command::Sweep => sweep(cli),
        Command::NullTest => null_test(cli),
        Command::Check { slow } => check(cli, *slow),
        Command::Oracle { op: OracleOp::Regen } => oracle_regen(cli),
    }
}

struct Loaded {
    cfg: RunConfig,
    hash: String,
    out_dir: PathBuf,
}

fn load(cli: &Cli) -> Result<Loaded, CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config PATH is required for this command".into()))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let cfg = RunConfig::parse(&text).map_err(CliError::Config)?;
    let hash = config_hash(&text);
    let out_dir = cli
        .out
        .clone()
        .or_else(|| cfg.output.dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    Ok(Loaded { cfg, hash, out_dir })
}

fn say(cli: &Cli, msg: &str) {
    if !cli.quiet {
        println!("{msg}");
    }
}

/// Calibration table: fixtures when present, live measurement otherwise.
fn calibration(options: &AnalysisOptions) -> Result<(CalibrationTable, &'static str), CliError> {
    if let Ok(set) = fixtures::builtin() {
        if let Ok(table) = set.calibration_table() {
            return Ok((table, "fixtures"));
        }
    }
    let table = fringe_core::pipeline::calibrate(
        &fixtures::CALIBRATION_RS,
        fixtures::CALIBRATION_THETA,
        1.0,
        options,
    )
    .map_err(compute)?;
    Ok((table, "live"))
}

fn write_records(
    out_dir: &Path,
    headers: &Headers,
    pattern: &ProbabilityField,
    records: &[FringeRecord],
    stem: &str,
) -> Result<(), CliError> {
    output::write_file(
        &out_dir.join(format!("{stem}_pattern.csv")),
        headers,
        &output::pattern_csv(pattern),
    )
    .map_err(compute)?;
    output::write_file(
        &out_dir.join(format!("{stem}_fringes.csv")),
        headers,
        &output::fringe_csv(records),
    )
    .map_err(compute)?;
    for (i, rec) in records.iter().enumerate() {
        output::write_file(
            &out_dir.join(format!("{stem}_fringe_{i}.csv")),
            headers,
            &output::fringe_window_csv(pattern, rec.window),
        )
        .map_err(compute)?;
    }
    Ok(())
}

/// Invariance spot-checks on the central fringe: 𝒮 must survive a rigid
/// scale and a rigid translation of the whole pattern.
fn invariant_checks(
    pattern: &ProbabilityField,
    records: &[FringeRecord],
) -> Vec<(&'static str, bool)> {
    let mut checks = vec![(
        "pattern_nonnegative",
        pattern.values().iter().all(|&v| v >= 0.0 || !v.is_finite()),
    )];
    if let Some(rec) = central_record(records) {
        let scaled = pattern.scaled(3.0);
        let shift = 0.37;
        let translated = pattern.translated(shift);
        let s_scaled = local_moments(&scaled, rec.x_peak, rec.window)
            .map(|(_, _, s)| s)
            .unwrap_or(f64::NAN);
        let s_shifted = local_moments(
            &translated,
            rec.x_peak + shift,
            (rec.window.0 + shift, rec.window.1 + shift),
        )
        .map(|(_, _, s)| s)
        .unwrap_or(f64::NAN);
        checks.push(("scale_invariance_1e10", (s_scaled - rec.skewness).abs() < 1e-10));
        checks.push(("translation_invariance_1e10", (s_shifted - rec.skewness).abs() < 1e-10));
    }
    checks
}

fn summary_common(cfg: &RunConfig, hash: &str) -> String {
    let mut s = String::new();
    s.push_str(&format!("config_sha256 = \"{hash}\"\n"));
    s.push_str(&format!("fixture_version = \"{}\"\n", fixtures::FIXTURE_VERSION));
    s.push_str(&format!("theta = {}\n", g17(cfg.params.theta)));
    s.push_str(&format!("re_kappa = {}\n", g17(cfg.params.re_kappa)));
    s
}

fn push_checks(s: &mut String, checks: &[(&str, bool)]) {
    s.push_str("\n[invariants]\n");
    for (name, ok) in checks {
        s.push_str(&format!("{name} = {ok}\n"));
    }
}

fn simulate(cli: &Cli) -> Result<(), CliError> {
    let Loaded { cfg, hash, out_dir } = load(cli)?;
    let params = cfg.params();
    let options = cfg.analysis_options();
    let noise = cfg.noise(cli.seed);
    let seed = noise.as_ref().map(|n| n.seed);
    let headers = Headers { config_sha256: &hash, seed };

    let (pattern, records) = match cfg.run.mode {
        Mode::AnalyticTwoPacket => {
            run_scenario(&cfg.scenario(), &params, noise.as_ref(), &options).map_err(compute)?
        }
        Mode::SolverTwoPacket => {
            if noise.is_some() {
                return Err(CliError::Config(
                    "[noise] is only supported in analytic_two_packet mode".into(),
                ));
            }
            let scenario = cfg
                .solver_scenario()
                .expect("validated: solver section present");
            let (_, pattern) = run_solver_scenario(&scenario, &params).map_err(compute)?;
            let records = analyze_pattern(&pattern, None, &options).map_err(compute)?;
            (pattern, records)
        }
    };
    write_records(&out_dir, &headers, &pattern, &records, "simulate")?;

    let mut summary = summary_common(&cfg, &hash);
    summary.push_str(&format!("mode = \"{:?}\"\n", cfg.run.mode));
    summary.push_str(&format!("n_records = {}\n", records.len()));
    summary.push_str(&format!(
        "n_usable = {}\n",
        records.iter().filter(|r| r.usable()).count()
    ));
    if let Some(s) = central_skewness(&records) {
        summary.push_str(&format!("central_skewness = {}\n", g17(s)));
    }
    if cfg.run.mode == Mode::AnalyticTwoPacket && cfg.model.imbalance_r != 0.0 {
        let (table, source) = calibration(&options)?;
        if let Some(rec) = central_record(&records) {
            let est = estimate_theta(std::slice::from_ref(rec), &table).map_err(compute)?;
            summary.push_str(&format!("theta_hat = {}\n", g17(est.theta_hat)));
            summary.push_str(&format!("theta_std_error = {}\n", g17(est.std_error)));
            summary.push_str(&format!("calibration_source = \"{source}\"\n"));
        }
    }
    push_checks(&mut summary, &invariant_checks(&pattern, &records));
    output::write_file(&out_dir.join("simulate_summary.toml"), &headers, &summary)
        .map_err(compute)?;
    say(cli, &format!("simulate: {} fringes -> {}", records.len(), out_dir.display()));
    Ok(())
}

fn read_pattern(path: &Path) -> Result<ProbabilityField, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let mut xs = Vec::new();
    let mut ps = Vec::new();
    let mut mask = Vec::new();
    for line in text.lines() {
        let line = line.trim_end_matches('\r');
        if line.is_empty() || line.starts_with('#') || line.starts_with('x') {
            continue;
        }
        let mut cols = line.split(',');
        let x: f64 = cols
            .next()
            .and_then(|c| c.trim().parse().ok())
            .ok_or_else(|| CliError::Config(format!("bad pattern row: {line}")))?;
        let p: f64 = cols
            .next()
            .and_then(|c| c.trim().parse().ok())
            .ok_or_else(|| CliError::Config(format!("bad pattern row: {line}")))?;
        let masked = cols.next().map(|c| c.trim() == "1").unwrap_or(false);
        xs.push(x);
        ps.push(p);
        mask.push(masked);
    }
    if xs.len() < 3 {
        return Err(CliError::Config("pattern needs at least 3 rows".into()));
    }
    let dx = xs[1] - xs[0];
    for w in xs.windows(2) {
        if ((w[1] - w[0]) - dx).abs() > 1e-9 * dx.abs().max(1.0) {
            return Err(CliError::Config("pattern grid must be uniform".into()));
        }
    }
    ProbabilityField::new(ps, mask, xs[0], dx).map_err(compute)
}

fn analyze(cli: &Cli, input: &Path) -> Result<(), CliError> {
    // Config is optional here; defaults cover the analysis knobs.
    let (options, hash, out_dir) = match &cli.config {
        Some(_) => {
            let Loaded { cfg, hash, out_dir } = load(cli)?;
            (cfg.analysis_options(), hash, out_dir)
        }
        None => (
            AnalysisOptions::default(),
            config_hash(""),
            cli.out.clone().unwrap_or_else(|| PathBuf::from("out")),
        ),
    };
    let pattern = read_pattern(input)?;
    let records = analyze_pattern(&pattern, None, &options).map_err(compute)?;
    let headers = Headers { config_sha256: &hash, seed: None };
    write_records(&out_dir, &headers, &pattern, &records, "analyze")?;
    let mut summary = format!("config_sha256 = \"{hash}\"\n");
    summary.push_str(&format!("input = \"{}\"\n", input.display()));
    summary.push_str(&format!("n_records = {}\n", records.len()));
    if let Some(s) = central_skewness(&records) {
        summary.push_str(&format!("central_skewness = {}\n", g17(s)));
    }
    push_checks(&mut summary, &invariant_checks(&pattern, &records));
    output::write_file(&out_dir.join("analyze_summary.toml"), &headers, &summary)
        .map_err(compute)?;
    say(cli, &format!("analyze: {} fringes -> {}", records.len(), out_dir.display()));
    Ok(())
}

fn sweep(cli: &Cli) -> Result<(), CliError> {
    let Loaded { cfg, hash, out_dir } = load(cli)?;
    let sweep = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Config("[sweep] section with thetas and rs is required".into()))?;
    let options = cfg.analysis_options();
    let (table, source) = calibration(&options)?;
    let headers = Headers { config_sha256: &hash, seed: None };

    let points: Vec<(usize, f64, f64)> = sweep
        .thetas
        .iter()
        .flat_map(|&t| sweep.rs.iter().map(move |&r| (t, r)))
        .enumerate()
        .map(|(i, (t, r))| (i, t, r))
        .collect();

    // Each point is independent; aggregation below is ordered by index.
    let results: Vec<Result<(usize, f64, f64, f64, Vec<FringeRecord>), String>> = points
        .par_iter()
        .map(|&(idx, theta, r)| {
            let params = DeformationParams::new(cfg.params.re_kappa, theta)
                .map_err(|e| e.to_string())?;
            let mut scenario = cfg.scenario();
            scenario.imbalance_r = r;
            let (_, records) =
                run_scenario(&scenario, &params, None, &options).map_err(|e| e.to_string())?;
            let s = central_skewness(&records).ok_or("no usable fringe records")?;
            Ok((idx, theta, r, s, records))
        })
        .collect();

    let mut rows = String::from("index,theta,r,skewness,prediction,rel_deviation\r\n");
    let mut sum_y2 = 0.0;
    let mut sum_res2 = 0.0;
    let mut worst_dev: f64 = 0.0;
    for res in results {
        let (idx, theta, r, s, records) = res.map_err(CliError::Compute)?;
        let prediction = table.k_at(r) * theta * r;
        let rel = if prediction != 0.0 { s / prediction - 1.0 } else { s };
        if r != 0.0 {
            sum_y2 += s * s;
            sum_res2 += (s - prediction) * (s - prediction);
            worst_dev = worst_dev.max(rel.abs());
        }
        rows.push_str(&format!(
            "{idx},{},{},{},{},{}\r\n",
            g17(theta),
            g17(r),
            g17(s),
            g17(prediction),
            g17(rel)
        ));
        output::write_file(
            &out_dir.join(format!("sweep_{idx}_fringes.csv")),
            &headers,
            &output::fringe_csv(&records),
        )
        .map_err(compute)?;
    }
    output::write_file(&out_dir.join("sweep.csv"), &headers, &rows).map_err(compute)?;

    let r2 = if sum_y2 > 0.0 { 1.0 - sum_res2 / sum_y2 } else { f64::NAN };
    let mut summary = summary_common(&cfg, &hash);
    summary.push_str(&format!("n_points = {}\n", points.len()));
    summary.push_str(&format!("calibration_source = \"{source}\"\n"));
    summary.push_str(&format!("r_squared = {}\n", g17(r2)));
    summary.push_str(&format!("worst_rel_deviation = {}\n", g17(worst_dev)));
    output::write_file(&out_dir.join("sweep_summary.toml"), &headers, &summary)
        .map_err(compute)?;
    say(cli, &format!("sweep: {} points, R² = {r2:.6} -> {}", points.len(), out_dir.display()));
    Ok(())
}

fn null_test(cli: &Cli) -> Result<(), CliError> {
    let Loaded { cfg, hash, out_dir } = load(cli)?;
    let noise = cfg
        .noise(cli.seed)
        .ok_or_else(|| CliError::Config("[noise] section is required for null-test".into()))?;
    let realizations = cfg.noise.as_ref().map(|n| n.realizations).unwrap_or(200);
    let options = cfg.analysis_options();
    // The null holds at θ = 0 regardless of the configured θ.
    let params = DeformationParams::undeformed(cfg.params.re_kappa);
    let model = cfg.scenario().build_model(&params).map_err(compute)?;
    let clean = noiseless_pattern(&model, &params).map_err(compute)?;
    let anchor = clean
        .values()
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let windows: Vec<(f64, (f64, f64))> = analyze_pattern(&clean, None, &options)
        .map_err(compute)?
        .iter()
        .filter(|r| r.usable())
        .map(|r| (r.x_peak, r.window))
        .collect();
    if windows.is_empty() {
        return Err(CliError::Compute("no usable fringes in the clean pattern".into()));
    }

    let per_real: Vec<Result<Vec<f64>, String>> = (0..realizations as u64)
        .into_par_iter()
        .map(|i| {
            let pat = shot_pattern(&model, &params, &noise, i, anchor).map_err(|e| e.to_string())?;
            let pat = apply_psf(&pat, noise.psf_sigma).map_err(|e| e.to_string())?;
            let pat = if noise.events_per_shot > 0 {
                let counts =
                    sample_shots(&pat, noise.events_per_shot, noise.seed.wrapping_add(i))
                        .map_err(|e| e.to_string())?;
                ProbabilityField::unmasked(
                    counts.iter().map(|&c| c as f64).collect(),
                    pat.x0(),
                    pat.dx(),
                )
                .map_err(|e| e.to_string())?
            } else {
                pat
            };
            windows
                .iter()
                .map(|&(center, window)| {
                    local_moments(&pat, center, window)
                        .map(|(_, _, s)| s)
                        .map_err(|e| e.to_string())
                })
                .collect()
        })
        .collect();

    let mut per_fringe: Vec<Vec<f64>> = vec![Vec::with_capacity(realizations); windows.len()];
    for res in per_real {
        let ss = res.map_err(CliError::Compute)?;
        for (f, s) in ss.into_iter().enumerate() {
            per_fringe[f].push(s);
        }
    }

    let headers = Headers { config_sha256: &hash, seed: Some(noise.seed) };
    let mut rows = String::from("fringe,x_peak,mean,std,z,pass\r\n");
    let mut all_pass = true;
    for (f, samples) in per_fringe.iter().enumerate() {
        let (mean, std, z) = skewness_null_test(samples).map_err(compute)?;
        let pass = z.abs() <= 3.0;
        all_pass &= pass;
        rows.push_str(&format!(
            "{f},{},{},{},{},{}\r\n",
            g17(windows[f].0),
            g17(mean),
            g17(std),
            g17(z),
            u8::from(pass)
        ));
    }
    output::write_file(&out_dir.join("null_test.csv"), &headers, &rows).map_err(compute)?;
    let mut summary = summary_common(&cfg, &hash);
    summary.push_str(&format!("realizations = {realizations}\n"));
    summary.push_str(&format!("n_fringes = {}\n", windows.len()));
    summary.push_str(&format!("all_pass = {all_pass}\n"));
    output::write_file(&out_dir.join("null_test_summary.toml"), &headers, &summary)
        .map_err(compute)?;
    say(cli, &format!("null-test: {} fringes, pass = {all_pass}", windows.len()));
    Ok(())
}

fn check(_cli: &Cli, slow: bool) -> Result<(), CliError> {
    let outcomes = acceptance::run_all(slow);
    let mut all_pass = true;
    for o in &outcomes {
        all_pass &= o.passed;
        let status = if o.passed { "PASS" } else { "FAIL" };
        println!("criterion {:>2} {status}  {} — {}", o.id, o.name, o.detail);
    }
    if all_pass {
        Ok(())
    } else {
        Err(CliError::Acceptance)
    }
}

fn oracle_regen(cli: &Cli) -> Result<(), CliError> {
    let set = fixtures::regenerate(&fixtures::today_utc()).map_err(compute)?;
    let text = set.to_toml().map_err(compute)?;
    let path = match &cli.out {
        Some(dir) => dir.join("derived.toml"),
        None => Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/derived.toml"),
    };
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(compute)?;
    }
    std::fs::write(&path, text).map_err(compute)?;
    say(cli, &format!("regenerated {} constants -> {}", set.constants.len(), path.display()));
    Ok(())
}
