//! Simulated scenarios and the Monte Carlo sweep over modes and LEO counts.
//!
//! Every random draw is addressed by the master seed and the run index, so a
//! run sees the same IMU noise, measurement noise and initial error whatever
//! the mode, the LEO count or the thread that executes it. Runs are reduced
//! in index order, which keeps aggregates bit-identical across thread counts.

use std::path::Path;

use leonav_core::bound::{pcrb_trajectory, BoundPoint};
use leonav_core::frames::enu_frame_at;
use leonav_core::fusion::{initial_covariance, run_filter, Covariance, EphemerisTable, FilterOutput, FilterState, FusionMode};
use leonav_core::inertial::{synthesize_imu, trajectories, StateVector};
use leonav_core::metrics::{EnsembleAccumulator, NeesAccumulator, Rmse, RmseReport};
use leonav_core::noise::{derive_seed, keyed_normal};
use leonav_core::observables::{simulate_measurements, EpochSatellites, SimulationConfig};
use leonav_core::propagate::{elevation, propagate, visible_satellites};
use leonav_core::tle::{parse_tle_file, ParseMode};
use leonav_core::{EnuFrame, ImuSample, Measurement, NavState, SatStateEcef, TleCatalog, UtcInstant, Vec3};
use rayon::prelude::*;
use serde::Serialize;

use crate::catalog;
use crate::config::ScenarioConfig;
use crate::error::{HarnessError, Result};
use crate::io;

const IMU_KEY: u64 = 1;
const MEAS_KEY: u64 = 2;
const INIT_KEY: u64 = 3;

/// Fewest satellites of a constellation a mode can work with.
pub const MIN_VISIBLE: usize = 4;

/// Loads the configured catalog, or builds the synthetic one at the start.
pub fn load_catalog(cfg: &ScenarioConfig) -> Result<TleCatalog> {
    match &cfg.tle_path {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
            Ok(parse_tle_file(&text, ParseMode::Lenient)?.catalog)
        }
        None => Ok(catalog::synthetic_catalog(cfg.start_instant()?)?),
    }
}

/// Everything shared by the runs of one scenario.
#[derive(Clone, Debug)]
pub struct PreparedScenario {
    pub config: ScenarioConfig,
    pub modes: Vec<FusionMode>,
    pub start: UtcInstant,
    pub frame: EnuFrame,
    pub truth: Vec<NavState>,
    /// Noiseless samples reproducing `truth`; drives the bound.
    pub imu_clean: Vec<ImuSample>,
    /// Navstar ids above the mask at both ends of the window.
    pub gps_ids: Vec<u32>,
    /// Starlink ids above the mask at the midpoint, highest first, with
    /// their midpoint elevation.
    pub leo_ranked: Vec<(u32, f64)>,
    gps_states: Vec<Vec<SatStateEcef>>,
    leo_states: Vec<Vec<(SatStateEcef, f64)>>,
    pub ephemeris: EphemerisTable,
}

/// Random inputs of one Monte Carlo run.
#[derive(Clone, Debug)]
pub struct RunInputs {
    pub run: usize,
    pub n_leo: usize,
    pub imu: Vec<ImuSample>,
    pub measurements: Vec<Measurement>,
    pub init: NavState,
    pub p0: Covariance,
}

impl PreparedScenario {
    pub fn prepare(cfg: &ScenarioConfig) -> Result<Self> {
        let cat = load_catalog(cfg)?;
        Self::with_catalog(cfg, &cat)
    }

    pub fn with_catalog(cfg: &ScenarioConfig, cat: &TleCatalog) -> Result<Self> {
        cfg.validate()?;
        let modes = cfg.fusion_modes()?;
        let start = cfg.start_instant()?;
        let user = cfg.user.geodetic()?;
        let frame = enu_frame_at(&user);
        let rate = cfg.rates.imu_hz;
        let truth = trajectories::stationary(start, Vec3::zeros(), cfg.attitude0(), cfg.duration_s, rate);
        let imu_clean =
            synthesize_imu(&truth, &leonav_core::ImuNoiseModel::NOISELESS, rate, 0).map_err(|e| HarnessError::Data(e.to_string()))?;

        let (mask_gps, mask_leo) = (cfg.mask_gps_deg.to_radians(), cfg.mask_leo_deg.to_radians());
        let vis = |t: &UtcInstant| visible_satellites(cat, &user, t, mask_gps, mask_leo).map_err(|e| HarnessError::Data(e.to_string()));
        let end = truth.last().expect("non-empty truth").t;
        let at_start = vis(&start)?;
        let at_end = vis(&end)?;
        let at_mid = vis(&start.add_seconds(0.5 * cfg.duration_s))?;
        let mut gps_ids: Vec<u32> = at_start
            .visible_navstar
            .iter()
            .map(|v| v.norad_id)
            .filter(|id| at_end.visible_navstar.iter().any(|v| v.norad_id == *id))
            .collect();
        gps_ids.sort_unstable();
        let leo_ranked: Vec<(u32, f64)> = at_mid.visible_starlink.iter().map(|v| (v.norad_id, v.elevation)).collect();

        if modes.iter().any(|m| m.uses_gps()) && gps_ids.len() < MIN_VISIBLE {
            return Err(HarnessError::InsufficientVisibility { constellation: "Navstar", visible: gps_ids.len(), required: MIN_VISIBLE });
        }
        if modes.iter().any(|m| m.uses_leo()) {
            let required = cfg.n_leo.iter().copied().max().unwrap_or(0).max(MIN_VISIBLE);
            if leo_ranked.len() < required {
                return Err(HarnessError::InsufficientVisibility { constellation: "Starlink", visible: leo_ranked.len(), required });
            }
        }

        let n_max = cfg.n_leo.iter().copied().max().unwrap_or(0).min(leo_ranked.len());
        let state = |id: u32, t: &UtcInstant| -> Result<SatStateEcef> {
            let rec = cat.get(id).ok_or_else(|| HarnessError::Data(format!("satellite {id} missing from catalog")))?;
            propagate(rec, t).map_err(|e| HarnessError::Data(format!("satellite {id}: {e}")))
        };
        let mut ephemeris = EphemerisTable::new();
        let mut gps_states = Vec::with_capacity(truth.len());
        let mut leo_states = Vec::with_capacity(truth.len());
        for nav in &truth {
            let gps = gps_ids.iter().map(|&id| state(id, &nav.t)).collect::<Result<Vec<_>>>()?;
            let leo = leo_ranked[..n_max]
                .iter()
                .map(|&(id, _)| state(id, &nav.t).map(|s| (s, elevation(&s, &frame.origin_ecef, &frame))))
                .collect::<Result<Vec<_>>>()?;
            ephemeris.extend(gps.iter().copied());
            ephemeris.extend(leo.iter().map(|(s, _)| *s));
            gps_states.push(gps);
            leo_states.push(leo);
        }
        Ok(PreparedScenario {
            config: cfg.clone(),
            modes,
            start,
            frame,
            truth,
            imu_clean,
            gps_ids,
            leo_ranked,
            gps_states,
            leo_states,
            ephemeris,
        })
    }

    /// Satellites in view per truth epoch with the `n_leo` highest Starlinks.
    pub fn epoch_satellites(&self, n_leo: usize) -> Vec<EpochSatellites> {
        self.truth
            .iter()
            .zip(self.gps_states.iter().zip(&self.leo_states))
            .map(|(nav, (gps, leo))| EpochSatellites { t: nav.t, gps: gps.clone(), leo: leo[..n_leo.min(leo.len())].to_vec() })
            .collect()
    }

    pub fn run_seed(&self, run: usize) -> u64 {
        derive_seed(self.config.seed, &[run as u64])
    }

    pub fn initial_covariance(&self) -> Covariance {
        let i = &self.config.init;
        initial_covariance(i.sigma_pos_m, i.sigma_vel_mps, i.sigma_att_deg.to_radians())
    }

    fn measurements(&self, n_leo: usize, seed: u64, noise_scale: f64) -> Result<Vec<Measurement>> {
        let cfg = &self.config;
        let sim =
            SimulationConfig { sigmas: cfg.noise_sigmas(), rates: cfg.measurement_rates(), carrier: cfg.carrier(), seed, noise_scale };
        let out = simulate_measurements(&self.frame, &self.truth, &self.epoch_satellites(n_leo), &sim)
            .map_err(|e| HarnessError::Data(e.to_string()))?;
        Ok(out.measurements)
    }

    /// Draws the noisy inputs of run `run` with `n_leo` Starlink satellites.
    pub fn simulate(&self, n_leo: usize, run: usize) -> Result<RunInputs> {
        let cfg = &self.config;
        let seed = self.run_seed(run);
        let imu = synthesize_imu(&self.truth, &cfg.imu_noise(), cfg.rates.imu_hz, derive_seed(seed, &[IMU_KEY]))
            .map_err(|e| HarnessError::Data(e.to_string()))?;
        let scale = if cfg.noise_free { 0.0 } else { 1.0 };
        let measurements = self.measurements(n_leo, derive_seed(seed, &[MEAS_KEY]), scale)?;
        let p0 = self.initial_covariance();
        let mut dx = StateVector::zeros();
        if !cfg.noise_free {
            for i in 0..9 {
                dx[i] = p0[(i, i)].sqrt() * keyed_normal(seed, &[INIT_KEY, i as u64]);
            }
        }
        let init = self.truth[0].retract(&dx);
        Ok(RunInputs { run, n_leo, imu, measurements, init, p0 })
    }

    /// Filters one run in one mode.
    pub fn run_mode(&self, inputs: &RunInputs, mode: FusionMode) -> Result<FilterOutput> {
        let init = FilterState::new(inputs.init, inputs.p0, self.frame, mode);
        Ok(run_filter(&inputs.imu, &mode.select(&inputs.measurements), &self.ephemeris, init, &self.config.filter_config())?)
    }

    /// Posterior bound for `mode` with `n_leo` Starlink satellites.
    pub fn bound(&self, mode: FusionMode, n_leo: usize) -> Result<Vec<BoundPoint>> {
        let schedule = self.measurements(n_leo, 0, 0.0)?;
        Ok(pcrb_trajectory(
            &self.truth,
            &self.imu_clean,
            &schedule,
            &self.ephemeris,
            &self.frame,
            mode,
            &self.initial_covariance(),
            &self.config.filter_config(),
        )?)
    }
}

/// Monte Carlo statistics for one (mode, LEO count) cell.
#[derive(Clone, Debug)]
pub struct SweepPoint {
    pub mode: FusionMode,
    pub n_sats: usize,
    pub rmse: RmseReport,
    pub final_epoch: Rmse,
    pub bound: Vec<BoundPoint>,
    /// Bound combined over epochs the way the aggregate RMSE is.
    pub bound_aggregate: Rmse,
    pub nees: Vec<f64>,
    pub applied: usize,
    pub gated: usize,
}

impl SweepPoint {
    /// Whether any aggregate RMSE falls below the bound by more than `slack`.
    pub fn violates_bound(&self, slack: f64) -> bool {
        let (r, b) = (&self.rmse.aggregate, &self.bound_aggregate);
        r.pos < (1.0 - slack) * b.pos || r.vel < (1.0 - slack) * b.vel || r.att < (1.0 - slack) * b.att
    }
}

#[derive(Clone, Debug)]
pub struct SweepResult {
    pub start: UtcInstant,
    pub n_runs: usize,
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    pub fn point(&self, mode: FusionMode, n_sats: usize) -> Option<&SweepPoint> {
        self.points.iter().find(|p| p.mode == mode && p.n_sats == n_sats)
    }

    /// Aggregate position RMSE of `mode` along the LEO sweep.
    pub fn position_series(&self, mode: FusionMode) -> Vec<(usize, f64)> {
        self.points.iter().filter(|p| p.mode == mode).map(|p| (p.n_sats, p.rmse.aggregate.pos)).collect()
    }
}

/// Bound folded over epochs as an RMS.
pub fn aggregate_bound(points: &[BoundPoint]) -> Rmse {
    let n = points.len().max(1) as f64;
    let ms = |f: fn(&BoundPoint) -> f64| (points.iter().map(|b| f(b) * f(b)).sum::<f64>() / n).sqrt();
    Rmse { pos: ms(|b| b.pos), vel: ms(|b| b.vel), att: ms(|b| b.att) }
}

struct RunStats {
    rmse: EnsembleAccumulator,
    nees: NeesAccumulator,
    applied: usize,
    gated: usize,
}

fn run_all_modes(prep: &PreparedScenario, n_leo: usize, run: usize) -> Result<Vec<RunStats>> {
    let inputs = prep.simulate(n_leo, run)?;
    prep.modes
        .iter()
        .map(|&mode| {
            let out = prep.run_mode(&inputs, mode)?;
            let mut rmse = EnsembleAccumulator::default();
            rmse.add_run(&out.states, &prep.truth).map_err(|e| HarnessError::Data(e.to_string()))?;
            let mut nees = NeesAccumulator::default();
            nees.add_run(&out.states, &prep.truth, &out.covariances).map_err(|e| HarnessError::Divergence(e.to_string()))?;
            Ok(RunStats { rmse, nees, applied: out.applied, gated: out.gated })
        })
        .collect()
}

fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().map_err(|e| HarnessError::Config(e.to_string()))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

/// Runs every configured mode, LEO count and run, plus the bounds.
pub fn sweep(prep: &PreparedScenario, threads: Option<usize>) -> Result<SweepResult> {
    let cfg = &prep.config;
    let cells: Vec<(usize, usize)> = cfg.n_leo.iter().flat_map(|&n| (0..cfg.n_runs).map(move |r| (n, r))).collect();
    let bounds_for: Vec<(FusionMode, usize)> = cfg.n_leo.iter().flat_map(|&n| prep.modes.iter().map(move |&m| (m, n))).collect();
    let (runs, bounds) = with_threads(threads, || {
        let runs: Vec<Result<Vec<RunStats>>> = cells.par_iter().map(|&(n, r)| run_all_modes(prep, n, r)).collect();
        let bounds: Vec<Result<Vec<BoundPoint>>> = bounds_for.par_iter().map(|&(m, n)| prep.bound(m, n)).collect();
        (runs, bounds)
    })?;

    let mut points = Vec::new();
    let mut runs = runs.into_iter();
    let mut bounds = bounds.into_iter();
    for &n in &cfg.n_leo {
        let mut acc: Vec<RunStats> = prep
            .modes
            .iter()
            .map(|_| RunStats { rmse: EnsembleAccumulator::default(), nees: NeesAccumulator::default(), applied: 0, gated: 0 })
            .collect();
        for _ in 0..cfg.n_runs {
            let stats = runs.next().expect("one result per cell")?;
            for (a, s) in acc.iter_mut().zip(stats) {
                a.rmse.merge(&s.rmse).map_err(|e| HarnessError::Data(e.to_string()))?;
                a.nees.merge(&s.nees).map_err(|e| HarnessError::Data(e.to_string()))?;
                a.applied += s.applied;
                a.gated += s.gated;
            }
        }
        for (&mode, a) in prep.modes.iter().zip(acc) {
            let bound = bounds.next().expect("one bound per cell")?;
            points.push(SweepPoint {
                mode,
                n_sats: n,
                rmse: a.rmse.report(),
                final_epoch: a.rmse.final_epoch().unwrap_or_default(),
                bound_aggregate: aggregate_bound(&bound),
                bound,
                nees: a.nees.average(),
                applied: a.applied,
                gated: a.gated,
            });
        }
    }
    Ok(SweepResult { start: prep.start, n_runs: cfg.n_runs, points })
}

#[derive(Serialize)]
struct RmseRow<'a> {
    mode: &'a str,
    n_sats: usize,
    statistic: &'a str,
    pos_rmse_m: f64,
    vel_rmse_mps: f64,
    att_rmse_rad: f64,
    pos_bound_m: f64,
    vel_bound_mps: f64,
    att_bound_rad: f64,
    bound_violated: bool,
}

#[derive(Serialize)]
struct EpochRow<'a> {
    mode: &'a str,
    n_sats: usize,
    t_s: f64,
    pos_rmse_m: f64,
    vel_rmse_mps: f64,
    att_rmse_rad: f64,
    pos_bound_m: f64,
    vel_bound_mps: f64,
    att_bound_rad: f64,
    nees: f64,
}

/// Slack allowed between Monte Carlo RMSE and the bound before a row is
/// flagged.
pub const BOUND_SLACK: f64 = 0.10;

/// Writes `rmse.csv`, `rmse_epochs.csv`, `bound.csv` and the plot script.
pub fn write_sweep(result: &SweepResult, out: &Path) -> Result<()> {
    let mut summary = Vec::new();
    let mut epochs = Vec::new();
    let mut bound_rows = Vec::new();
    for p in &result.points {
        let label = p.mode.label();
        let b = &p.bound_aggregate;
        let last = p.bound.last().copied();
        for (statistic, r, bp, bv, ba) in [
            ("aggregate", &p.rmse.aggregate, b.pos, b.vel, b.att),
            ("final", &p.final_epoch, last.map_or(f64::NAN, |x| x.pos), last.map_or(f64::NAN, |x| x.vel), last.map_or(f64::NAN, |x| x.att)),
        ] {
            let violated = r.pos < (1.0 - BOUND_SLACK) * bp || r.vel < (1.0 - BOUND_SLACK) * bv || r.att < (1.0 - BOUND_SLACK) * ba;
            summary.push(RmseRow {
                mode: label,
                n_sats: p.n_sats,
                statistic,
                pos_rmse_m: r.pos,
                vel_rmse_mps: r.vel,
                att_rmse_rad: r.att,
                pos_bound_m: bp,
                vel_bound_mps: bv,
                att_bound_rad: ba,
                bound_violated: violated,
            });
        }
        for (k, ((t, r), bnd)) in p.rmse.per_epoch.iter().zip(&p.bound).enumerate() {
            epochs.push(EpochRow {
                mode: label,
                n_sats: p.n_sats,
                t_s: t.seconds_since(&result.start),
                pos_rmse_m: r.pos,
                vel_rmse_mps: r.vel,
                att_rmse_rad: r.att,
                pos_bound_m: bnd.pos,
                vel_bound_mps: bnd.vel,
                att_bound_rad: bnd.att,
                nees: p.nees.get(k).copied().unwrap_or(f64::NAN),
            });
        }
        bound_rows.extend(io::bound_rows(&p.bound, &result.start, p.mode, p.n_sats));
    }
    io::write_rows(&out.join("rmse.csv"), &summary)?;
    io::write_rows(&out.join("rmse_epochs.csv"), &epochs)?;
    io::write_rows(&out.join("bound.csv"), &bound_rows)?;
    io::write_text(&out.join("plot_sweep.py"), crate::plot::SWEEP_SCRIPT)
}

/// Truth and per-mode trajectories of a single run.
pub fn write_run(prep: &PreparedScenario, inputs: &RunInputs, out: &Path) -> Result<Vec<(FusionMode, FilterOutput)>> {
    let zero = vec![Covariance::zeros(); prep.truth.len()];
    io::write_text(&out.join("truth.csv"), &io::trajectory_csv(&prep.truth, &zero, &prep.start))?;
    io::write_rows(&out.join("imu.csv"), &io::imu_rows(&inputs.imu, &prep.start))?;
    io::write_rows(&out.join("measurements.csv"), &io::measurement_rows(&inputs.measurements, &prep.start))?;
    let mut outputs = Vec::new();
    for &mode in &prep.modes {
        let o = prep.run_mode(inputs, mode)?;
        let name = format!("trajectory_{}.csv", mode.label().replace('+', "_"));
        io::write_text(&out.join(name), &io::trajectory_csv(&o.states, &o.covariances, &prep.start))?;
        outputs.push((mode, o));
    }
    io::write_text(&out.join("plot_trajectories.py"), crate::plot::TRAJECTORY_SCRIPT)?;
    Ok(outputs)
}
