use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use leonav::config::ScenarioConfig;
use leonav::error::{HarnessError, Result};
use leonav::io::{self, AssociationRow, VisibilityRow};
use leonav::scenario::{self, PreparedScenario, BOUND_SLACK};
use leonav::{catalog, fixture, replay};
use leonav_core::frames::GeodeticPosition;
use leonav_core::propagate::visible_satellites;
use leonav_core::spectral::RidgeTrace;
use leonav_core::tle::{parse_tle_file, Constellation, ParseMode};
use leonav_core::UtcInstant;

/// LEO Doppler-rate aided navigation: simulation, bounds and log replay.
#[derive(Parser, Debug)]
#[command(name = "leonav", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Scenario configuration (JSON); built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads for Monte Carlo runs (all cores by default).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Element-set catalog tools.
    #[command(subcommand)]
    Catalog(CatalogCommand),
    /// Satellites above the masks over the scenario window.
    Visibility {
        #[command(flatten)]
        window: WindowOverrides,
        /// Sampling interval (s).
        #[arg(long, default_value_t = 1.0)]
        step: f64,
    },
    /// One Monte Carlo run: truth, IMU, measurements and per-mode trajectories.
    Simulate {
        /// Starlink satellites used (first configured count by default).
        #[arg(long)]
        n_leo: Option<usize>,
        #[arg(long, default_value_t = 0)]
        run: usize,
    },
    /// Matches one ridge trace to a satellite.
    Associate {
        #[arg(long)]
        ridge: PathBuf,
        #[arg(long)]
        tle: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        lat: f64,
        #[arg(long, allow_hyphen_values = true)]
        lon: f64,
        #[arg(long, allow_hyphen_values = true)]
        alt: f64,
        /// UTC time of the ridge's zero (ISO-8601).
        #[arg(long)]
        t0: String,
        /// Beacon carrier (Hz).
        #[arg(long, default_value_t = leonav_core::observables::DEFAULT_CARRIER_HZ)]
        fc: f64,
        /// Reference frequency subtracted from the ridge (Hz).
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        f_ref: f64,
    },
    /// Replays logged GPS, IMU and ridge files.
    Replay {
        #[arg(long)]
        gps: PathBuf,
        #[arg(long)]
        imu: PathBuf,
        /// Ridge CSVs, one Doppler-rate update each.
        #[arg(long = "ridge")]
        ridges: Vec<PathBuf>,
        /// Element sets; the configured catalog otherwise.
        #[arg(long)]
        tle: Option<PathBuf>,
    },
    /// Posterior bound per mode and Starlink count.
    Pcrb,
    /// Monte Carlo sweep over modes and Starlink counts.
    Sweep,
    /// Writes a synthetic replay fixture.
    Fixture,
}

/// Per-invocation overrides of the configured site, window, catalog and masks.
#[derive(Args, Debug)]
struct WindowOverrides {
    #[arg(long)]
    tle: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    lat: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    lon: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    alt: Option<f64>,
    /// Window start (ISO-8601 UTC).
    #[arg(long)]
    start: Option<String>,
    /// Window length (s).
    #[arg(long)]
    duration: Option<f64>,
    /// GPS elevation mask (deg).
    #[arg(long)]
    mask_gps: Option<f64>,
    /// Starlink elevation mask (deg).
    #[arg(long)]
    mask_leo: Option<f64>,
}

impl WindowOverrides {
    fn apply(&self, cfg: &mut ScenarioConfig) -> Result<()> {
        if let Some(t) = &self.tle {
            cfg.tle_path = Some(t.to_string_lossy().into_owned());
        }
        cfg.user.lat_deg = self.lat.unwrap_or(cfg.user.lat_deg);
        cfg.user.lon_deg = self.lon.unwrap_or(cfg.user.lon_deg);
        cfg.user.alt_m = self.alt.unwrap_or(cfg.user.alt_m);
        if let Some(s) = &self.start {
            cfg.start = s.clone();
        }
        cfg.duration_s = self.duration.unwrap_or(cfg.duration_s);
        cfg.mask_gps_deg = self.mask_gps.unwrap_or(cfg.mask_gps_deg);
        cfg.mask_leo_deg = self.mask_leo.unwrap_or(cfg.mask_leo_deg);
        cfg.validate()
    }
}

#[derive(Subcommand, Debug)]
enum CatalogCommand {
    /// Parses a catalog and reports its contents.
    Validate {
        file: PathBuf,
        /// Skip malformed records instead of failing.
        #[arg(long)]
        lenient: bool,
    },
    /// Writes the built-in synthetic catalog.
    Synth {
        /// Element epoch (ISO-8601); the configured start by default.
        #[arg(long)]
        epoch: Option<String>,
    },
}

fn load_config(g: &Global) -> Result<ScenarioConfig> {
    let mut cfg = match &g.config {
        Some(p) => ScenarioConfig::load(p)?,
        None => ScenarioConfig::default(),
    };
    if let Some(seed) = g.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn print_csv<T: serde::Serialize>(rows: &[T]) -> Result<()> {
    print!("{}", io::rows_to_csv(rows)?);
    Ok(())
}

fn catalog_cmd(cmd: &CatalogCommand, g: &Global) -> Result<()> {
    match cmd {
        CatalogCommand::Validate { file, lenient } => {
            let text = std::fs::read_to_string(file).map_err(|e| HarnessError::io(file, e))?;
            let mode = if *lenient { ParseMode::Lenient } else { ParseMode::Strict };
            let report = parse_tle_file(&text, mode)?;
            let count = |c: Constellation| report.catalog.records.iter().filter(|r| r.constellation == c).count();
            println!("records,{}", report.catalog.len());
            println!("starlink,{}", count(Constellation::Starlink));
            println!("navstar,{}", count(Constellation::Navstar));
            println!("other,{}", count(Constellation::Other));
            println!("skipped,{}", report.skipped.len());
            for e in &report.skipped {
                eprintln!("skipped: {e}");
            }
            Ok(())
        }
        CatalogCommand::Synth { epoch } => {
            let epoch = match epoch {
                Some(s) => UtcInstant::parse_iso8601(s).map_err(|e| HarnessError::Config(format!("epoch: {e}")))?,
                None => load_config(g)?.start_instant()?,
            };
            let path = g.out.join("catalog.tle");
            io::write_text(&path, &catalog::synthetic_catalog_text(epoch))?;
            println!("{}", path.display());
            Ok(())
        }
    }
}

fn visibility_cmd(cfg: &ScenarioConfig, step: f64, out: &Path) -> Result<()> {
    if step.is_nan() || step <= 0.0 {
        return Err(HarnessError::Config("step must be positive".into()));
    }
    let cat = scenario::load_catalog(cfg)?;
    let start = cfg.start_instant()?;
    let user = cfg.user.geodetic()?;
    let n = (cfg.duration_s / step).floor() as usize;
    let mut reports = Vec::new();
    for k in 0..=n {
        let t = start.add_seconds(k as f64 * step);
        reports.push(
            visible_satellites(&cat, &user, &t, cfg.mask_gps_deg.to_radians(), cfg.mask_leo_deg.to_radians())
                .map_err(|e| HarnessError::Data(e.to_string()))?,
        );
    }
    let rows: Vec<VisibilityRow> = io::visibility_rows(&reports, &start);
    io::write_rows(&out.join("visibility.csv"), &rows)?;
    let min_leo = reports.iter().map(|r| r.visible_starlink.len()).min().unwrap_or(0);
    let min_gps = reports.iter().map(|r| r.visible_navstar.len()).min().unwrap_or(0);
    println!("min_visible_starlink,{min_leo}");
    println!("min_visible_navstar,{min_gps}");
    Ok(())
}

fn simulate_cmd(cfg: &ScenarioConfig, n_leo: Option<usize>, run: usize, out: &Path) -> Result<()> {
    let mut cfg = cfg.clone();
    let n = n_leo.unwrap_or(cfg.n_leo[0]);
    cfg.n_leo = vec![n];
    let prep = PreparedScenario::prepare(&cfg)?;
    let inputs = prep.simulate(n, run)?;
    let outputs = scenario::write_run(&prep, &inputs, out)?;
    println!("mode,pos_rmse_m,vel_rmse_mps,att_rmse_rad,applied,gated");
    for (mode, o) in outputs {
        let r = leonav_core::metrics::compute_rmse(&o.states, &prep.truth).map_err(|e| HarnessError::Data(e.to_string()))?;
        println!("{},{},{},{},{},{}", mode.label(), r.aggregate.pos, r.aggregate.vel, r.aggregate.att, o.applied, o.gated);
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn associate_cmd(ridge: &Path, tle: &Path, lat: f64, lon: f64, alt: f64, t0: &str, fc: f64, f_ref: f64) -> Result<()> {
    let user = GeodeticPosition::from_degrees(lat, lon, alt).map_err(|e| HarnessError::Config(e.to_string()))?;
    let start = UtcInstant::parse_iso8601(t0).map_err(|e| HarnessError::Config(format!("t0: {e}")))?;
    let text = std::fs::read_to_string(tle).map_err(|e| HarnessError::io(tle, e))?;
    let cat = parse_tle_file(&text, ParseMode::Lenient)?.catalog;
    let trace: RidgeTrace = io::read_ridge(ridge, f_ref)?;
    let last = trace.points.last().map_or(0.0, |p| p.0);
    let mut cfg = ScenarioConfig { carrier_hz: fc, ..ScenarioConfig::default() };
    cfg.validate()?;
    cfg.duration_s = last.ceil() + 1.0;
    let res = replay::associate_ridge(&trace, &cat, &user, &start, cfg.duration_s, &cfg)?;
    let name = ridge.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
    print_csv(&[AssociationRow::new(&name, &res)])
}

fn pcrb_cmd(cfg: &ScenarioConfig, out: &Path) -> Result<()> {
    let prep = PreparedScenario::prepare(cfg)?;
    let mut rows = Vec::new();
    for &n in &cfg.n_leo {
        for &mode in &prep.modes {
            let b = prep.bound(mode, n)?;
            let agg = scenario::aggregate_bound(&b);
            println!("{},{},{},{},{}", mode.label(), n, agg.pos, agg.vel, agg.att);
            rows.extend(io::bound_rows(&b, &prep.start, mode, n));
        }
    }
    io::write_rows(&out.join("bound.csv"), &rows)
}

fn sweep_cmd(cfg: &ScenarioConfig, threads: Option<usize>, out: &Path) -> Result<()> {
    let prep = PreparedScenario::prepare(cfg)?;
    let res = scenario::sweep(&prep, threads)?;
    scenario::write_sweep(&res, out)?;
    println!("mode,n_sats,pos_rmse_m,pos_bound_m,vel_rmse_mps,vel_bound_mps,att_rmse_rad,att_bound_rad,bound_violated");
    for p in &res.points {
        let (r, b) = (&p.rmse.aggregate, &p.bound_aggregate);
        println!(
            "{},{},{:.4},{:.4},{:.4},{:.4},{:.6},{:.6},{}",
            p.mode.label(),
            p.n_sats,
            r.pos,
            b.pos,
            r.vel,
            b.vel,
            r.att,
            b.att,
            p.violates_bound(BOUND_SLACK)
        );
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    let g = &cli.global;
    match &cli.command {
        Command::Catalog(c) => catalog_cmd(c, g),
        Command::Visibility { window, step } => {
            let mut cfg = load_config(g)?;
            window.apply(&mut cfg)?;
            visibility_cmd(&cfg, *step, &g.out)
        }
        Command::Simulate { n_leo, run } => simulate_cmd(&load_config(g)?, *n_leo, *run, &g.out),
        Command::Associate { ridge, tle, lat, lon, alt, t0, fc, f_ref } => associate_cmd(ridge, tle, *lat, *lon, *alt, t0, *fc, *f_ref),
        Command::Replay { gps, imu, ridges, tle } => {
            let mut cfg = load_config(g)?;
            if let Some(t) = tle {
                cfg.tle_path = Some(t.to_string_lossy().into_owned());
            }
            let res = replay::replay_files(gps, imu, ridges, &cfg, &g.out)?;
            print_csv(&res.summary)
        }
        Command::Pcrb => pcrb_cmd(&load_config(g)?, &g.out),
        Command::Sweep => sweep_cmd(&load_config(g)?, g.threads, &g.out),
        Command::Fixture => {
            let m = fixture::generate(&load_config(g)?, &fixture::FixtureParams::default(), &g.out)?;
            println!("{}", m.config_path.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
