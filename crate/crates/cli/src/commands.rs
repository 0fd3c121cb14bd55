use std::fmt;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use superrad::dynamics::{find_peak, integrate, Peak, Trajectory};
use superrad::oracle::propagate;
use superrad::scan::{fit_scaling, sweep, ScalingFit, ScanRow, MIN_FIT_ROWS};
use superrad::spectral::{chirp_kk, gamma_spectrum, sinh_grid, SpectralProfile};
use superrad::types::{reconstruct, reduce};
use superrad::Error;

use crate::config::{Profile, RunConfig};

#[derive(Debug)]
pub enum Failure {
    Io(io::Error),
    Config(String),
    Solver(String),
    Mismatch(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::Config(_) => 2,
            Failure::Solver(_) => 3,
            Failure::Mismatch(_) => 4,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Io(e) => write!(f, "i/o error: {e}"),
            Failure::Config(msg) => write!(f, "configuration error: {msg}"),
            Failure::Solver(msg) => write!(f, "solver failure: {msg}"),
            Failure::Mismatch(msg) => write!(f, "oracle mismatch: {msg}"),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::OracleIntegrity { .. } => Failure::Mismatch(e.to_string()),
            e => Failure::Solver(e.to_string()),
        }
    }
}

/// Round-trip exact and independent of locale.
fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn create(dir: &Path, name: &str) -> io::Result<BufWriter<File>> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_json(dir: &Path, name: &str, value: &impl Serialize) -> io::Result<()> {
    let mut out = create(dir, name)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()
}

#[derive(Serialize)]
struct FinalState {
    t: f64,
    a: f64,
    d: f64,
    n: f64,
    x: f64,
    rho_pp: f64,
    rho_mm: f64,
}

#[derive(Serialize)]
struct SimulationSummary<'a> {
    config: &'a RunConfig,
    samples: usize,
    accepted_steps: usize,
    rejected_steps: usize,
    peak: Peak,
    final_state: FinalState,
    max_gamma: f64,
    max_gammabar: f64,
    max_x: f64,
    max_rho_mm: f64,
    max_witness: f64,
    emitted_energy: f64,
}

fn write_trajectory(dir: &Path, config: &RunConfig, traj: &Trajectory) -> io::Result<()> {
    let mut out = create(dir, "trajectory.csv")?;
    writeln!(out, "# two-atom reduced state of a dense superradiant gas")?;
    writeln!(
        out,
        "# coop = {}, rho_size = {}, gamma = {}, delta_mode = {}, size_mode = {}",
        config.coop,
        config.rho_size,
        config.gamma,
        serde_json::to_value(config.delta_mode)?,
        serde_json::to_value(config.size_mode)?
    )?;
    writeln!(out, "# t: time in units of 1/gamma")?;
    writeln!(out, "# a, d, n, x, rho_pp, rho_mm, witness: dimensionless")?;
    writeln!(
        out,
        "# Gamma, Gammabar: cooperative rates in units of gamma"
    )?;
    writeln!(
        out,
        "# intensity: photons per atom per unit time, in units of gamma"
    )?;
    writeln!(
        out,
        "t,a,d,n,x,Gamma,Gammabar,intensity,rho_pp,rho_mm,witness"
    )?;
    for s in traj.samples() {
        let row = [
            s.t,
            s.state.a,
            s.state.d,
            s.state.n,
            s.state.x,
            s.rates.gamma_plus,
            s.rates.gammabar_plus,
            s.intensity,
            s.rho_pp,
            s.rho_mm,
            s.witness,
        ];
        let row: Vec<String> = row.into_iter().map(num).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    out.flush()
}

pub fn simulate(config: &RunConfig) -> Result<(), Failure> {
    let traj = integrate(&config.integrator(), &config.parameters())?;
    let peak = find_peak(&traj)?;
    if peak.boundary {
        eprintln!(
            "superrad: warning: intensity peaks at the boundary (t = {}); no burst inside [0, t_end]",
            peak.t_max
        );
    }
    let last = traj.last().expect("trajectory holds the initial sample");
    let summary = SimulationSummary {
        config,
        samples: traj.len(),
        accepted_steps: traj.stats.accepted,
        rejected_steps: traj.stats.rejected,
        peak,
        final_state: FinalState {
            t: last.t,
            a: last.state.a,
            d: last.state.d,
            n: last.state.n,
            x: last.state.x,
            rho_pp: last.rho_pp,
            rho_mm: last.rho_mm,
        },
        max_gamma: traj.max_by(|s| s.rates.gamma_plus),
        max_gammabar: traj.max_by(|s| s.rates.gammabar_plus),
        max_x: traj.max_by(|s| s.state.x),
        max_rho_mm: traj.max_by(|s| s.rho_mm),
        max_witness: traj.max_by(|s| s.witness),
        emitted_energy: traj.emitted_energy(last.t),
    };
    write_trajectory(&config.output_dir, config, &traj)?;
    write_json(&config.output_dir, "summary.json", &summary)?;
    Ok(())
}

#[derive(Serialize)]
struct RowFailure {
    coop: f64,
    error: String,
}

#[derive(Serialize)]
struct ScanSummary<'a> {
    rho_size: f64,
    fit: Option<ScalingFit>,
    fit_note: Option<String>,
    /// Rows left out of the fit: no burst (`C = 0`) or peak on the boundary.
    excluded: Vec<f64>,
    rows: &'a [ScanRow],
    failures: Vec<RowFailure>,
}

pub fn scan(config: &RunConfig) -> Result<(), Failure> {
    let results = sweep(
        &config.c_values,
        config.rho_size,
        &config.parameters(),
        &config.integrator(),
    );
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (&coop, result) in config.c_values.iter().zip(results) {
        match result {
            Ok(row) => rows.push(row),
            Err(e) => failures.push(RowFailure {
                coop,
                error: e.to_string(),
            }),
        }
    }

    let (fitted, excluded): (Vec<ScanRow>, Vec<ScanRow>) =
        rows.iter().partition(|r| r.coop > 0.0 && !r.boundary_peak);
    let (fit, fit_note) = if fitted.len() < MIN_FIT_ROWS {
        (
            None,
            Some(format!(
                "{} row(s) with a burst, at least {MIN_FIT_ROWS} needed for a fit",
                fitted.len()
            )),
        )
    } else {
        match fit_scaling(&fitted) {
            Ok(f) => (Some(f), None),
            Err(e) => (None, Some(e.to_string())),
        }
    };
    for r in &excluded {
        eprintln!(
            "superrad: warning: C = {} has no burst inside [0, t_end]",
            r.coop
        );
    }

    let dir = &config.output_dir;
    let mut out = create(dir, "scan.csv")?;
    writeln!(out, "# cooperativity sweep, rho_size = {}", config.rho_size)?;
    writeln!(
        out,
        "# C: atoms per cubic reduced wavelength; rho: diameter over reduced wavelength"
    )?;
    writeln!(out, "# tau_max: time of peak intensity in units of 1/gamma")?;
    writeln!(
        out,
        "# peak_intensity, max_Gamma: units of gamma; max_x, max_rho_mm: dimensionless"
    )?;
    writeln!(
        out,
        "C,rho,tau_max,peak_intensity,max_Gamma,max_x,max_rho_mm"
    )?;
    for r in &rows {
        let v = [
            r.coop,
            r.rho_size,
            r.tau_max,
            r.peak_intensity,
            r.max_gamma,
            r.max_x,
            r.max_rho_mm,
        ];
        let v: Vec<String> = v.into_iter().map(num).collect();
        writeln!(out, "{}", v.join(","))?;
    }
    out.flush()?;

    let first_failure = failures
        .first()
        .map(|f| format!("C = {}: {}", f.coop, f.error));
    write_json(
        dir,
        "scan_fit.json",
        &ScanSummary {
            rho_size: config.rho_size,
            fit,
            fit_note,
            excluded: excluded.iter().map(|r| r.coop).collect(),
            rows: &rows,
            failures,
        },
    )?;
    match first_failure {
        Some(msg) => Err(Failure::Solver(format!(
            "sweep row failed, remaining rows written: {msg}"
        ))),
        None => Ok(()),
    }
}

pub fn spectrum(config: &RunConfig) -> Result<(), Failure> {
    let grid = sinh_grid(
        config.grid_half_width,
        config.grid_points,
        config.grid_scale,
    )
    .map_err(|e| Failure::Config(e.to_string()))?;
    let profile = match config.profile {
        Profile::Rates => gamma_spectrum(config.a0, config.x0, &config.parameters(), &grid)?,
        Profile::Lorentzian => {
            let (amp, w) = (config.lorentz_amplitude, config.lorentz_width);
            SpectralProfile::from_fn(grid, |d| amp * w * w / (d * d + w * w))?
        }
    };
    let last = profile.len() - 1;
    let mut out = create(&config.output_dir, "spectrum.csv")?;
    match config.profile {
        Profile::Rates => writeln!(
            out,
            "# self-consistent Gamma(delta') at a = {}, x = {}, coop = {}, rho_size = {}",
            config.a0, config.x0, config.coop, config.rho_size
        )?,
        Profile::Lorentzian => writeln!(
            out,
            "# Lorentzian profile, amplitude = {}, half width = {}",
            config.lorentz_amplitude, config.lorentz_width
        )?,
    }
    writeln!(out, "# delta_prime, Gamma, chirp: units of gamma")?;
    writeln!(
        out,
        "# chirp is the principal-value transform over the grid; NaN at the two grid ends"
    )?;
    writeln!(out, "delta_prime,Gamma,chirp")?;
    for (i, (d, g)) in profile.iter().enumerate() {
        let chirp = if i == 0 || i == last {
            f64::NAN
        } else {
            chirp_kk(&profile, d)?.chirp
        };
        writeln!(out, "{},{},{}", num(d), num(g), num(chirp))?;
    }
    out.flush()?;
    Ok(())
}

/// Largest deviation of one reduced variable over all compared samples.
#[derive(Debug, Clone, Copy)]
struct Deviation {
    name: &'static str,
    value: f64,
    t: f64,
}

pub fn oracle_check(config: &RunConfig) -> Result<(), Failure> {
    let mut integ = config.integrator();
    integ.sample_interval.get_or_insert(integ.t_end / 1000.0);
    let params = config.parameters();
    let reduced = integrate(&integ, &params)?;
    let rho0 = reconstruct(&integ.initial)?;
    let full = propagate(&rho0, &params, &integ, &config.oracle_options())?;

    let mut worst = ["a", "d", "n", "x"].map(|name| Deviation {
        name,
        value: 0.0,
        t: 0.0,
    });
    let reduced_points: Vec<_> = reduced.checkpoints().collect();
    let full_points: Vec<_> = full.iter().filter(|s| s.checkpoint).collect();
    if reduced_points.len() != full_points.len() {
        return Err(Failure::Mismatch(format!(
            "reduced run reached {} sample times, full run {}",
            reduced_points.len(),
            full_points.len()
        )));
    }
    for (r, f) in reduced_points.iter().zip(&full_points) {
        let s = reduce(&f.rho)?;
        let got = s.to_array();
        let want = r.state.to_array();
        for (k, w) in worst.iter_mut().enumerate() {
            let dev = (got[k] - want[k]).abs();
            // NaN must count as a failure
            if dev > w.value || dev.is_nan() {
                *w = Deviation {
                    name: w.name,
                    value: dev,
                    t: r.t,
                };
            }
        }
    }

    println!(
        "compared {} samples on [0, {}], threshold {:e}",
        reduced_points.len(),
        integ.t_end,
        config.oracle_threshold
    );
    println!("variable,max_deviation,t");
    for w in &worst {
        println!("{},{},{}", w.name, num(w.value), num(w.t));
    }
    let bad = worst
        .iter()
        .filter(|w| !(w.value < config.oracle_threshold))
        .max_by(|a, b| a.value.total_cmp(&b.value));
    match bad {
        Some(w) => Err(Failure::Mismatch(format!(
            "`{}` deviates by {:e} at t = {} (threshold {:e})",
            w.name, w.value, w.t, config.oracle_threshold
        ))),
        None => Ok(()),
    }
}
