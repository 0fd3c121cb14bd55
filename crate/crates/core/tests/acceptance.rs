//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so every line is printed even
//! when all criteria pass.

use std::process::ExitCode;

use superrad::dynamics::{find_peak, integrate, IntegratorConfig, Trajectory};
use superrad::oracle::{propagate, OracleOptions};
use superrad::rates::solve_self_consistent;
use superrad::scan::{fit_scaling, sweep, ScanRow};
use superrad::spectral::{chirp_kk, sinh_grid, SpectralProfile};
use superrad::types::{entanglement_witness, reconstruct, reduce, super_sub_populations, Parameters};

const REF_C: [f64; 3] = [10.0, 20.0, 30.0];
const REF_PEAK: [f64; 3] = [57.0, 115.0, 172.0];
const REF_TAU: [f64; 3] = [0.0018, 0.0008, 0.0006];

struct Report {
    failures: usize,
}

impl Report {
    fn record(&mut self, id: u32, title: &str, pass: bool, detail: String) {
        if !pass {
            self.failures += 1;
        }
        let verdict = if pass { "PASS" } else { "FAIL" };
        println!("criterion {id:>2} [{verdict}] {title}: {detail}");
    }
}

/// Root of `G = e^{100/(1/2 + G)} - 1` by plain bisection in log space,
/// written out independently of the library solver.
fn golden_bisection() -> f64 {
    let f = |g: f64| (100.0 / (0.5 + g)).exp_m1() - g;
    let (mut lo, mut hi) = (1e-300_f64, 200f64.exp());
    while hi - lo > 1e-14 * hi {
        let mid = if hi / lo > 2.0 { (lo * hi).sqrt() } else { 0.5 * (lo + hi) };
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn reference_params(coop: f64) -> Parameters {
    Parameters::new(coop, 10.0).expect("valid parameters")
}

fn run(coop: f64, config: IntegratorConfig) -> Trajectory {
    integrate(&config, &reference_params(coop)).expect("integration succeeds")
}

fn table_rows(config: &IntegratorConfig) -> Vec<ScanRow> {
    sweep(&REF_C, 10.0, &reference_params(10.0), config)
        .into_iter()
        .map(|r| r.expect("row integrates"))
        .collect()
}

fn main() -> ExitCode {
    let mut report = Report { failures: 0 };
    let mut worst_witness = f64::NEG_INFINITY;

    // 1, 2: published peak table
    let rows = table_rows(&IntegratorConfig::default());
    let peaks: Vec<f64> = rows.iter().map(|r| r.peak_intensity).collect();
    let taus: Vec<f64> = rows.iter().map(|r| r.tau_max).collect();
    {
        let within = peaks
            .iter()
            .zip(REF_PEAK)
            .all(|(p, want)| (p - want).abs() <= 0.25 * want);
        let (r2, r3) = (peaks[1] / peaks[0], peaks[2] / peaks[0]);
        let ratios = (1.9..=2.1).contains(&r2) && (2.85..=3.15).contains(&r3);
        let boundary = rows.iter().any(|r| r.boundary_peak);
        report.record(
            1,
            "peak intensity vs C",
            within && ratios && !boundary,
            format!(
                "peaks {:.3} / {:.3} / {:.3} (reference 57 / 115 / 172, +-25%), ratios {r2:.4} in [1.9, 2.1], {r3:.4} in [2.85, 3.15]",
                peaks[0], peaks[1], peaks[2]
            ),
        );
    }
    {
        let within = taus
            .iter()
            .zip(REF_TAU)
            .all(|(t, want)| (t - want).abs() <= 0.35 * want);
        let exponent = fit_scaling(&rows).map(|f| f.tau_exponent).unwrap_or(f64::NAN);
        report.record(
            2,
            "peak time vs C",
            within && (-1.35..=-0.75).contains(&exponent),
            format!(
                "tau_max {:.6} / {:.6} / {:.6} (reference 0.0018 / 0.0008 / 0.0006, +-35%), log-log slope {exponent:.4} in [-1.35, -0.75]",
                taus[0], taus[1], taus[2]
            ),
        );
    }

    // 3: free decay
    {
        let traj = run(
            0.0,
            IntegratorConfig {
                sample_interval: Some(0.01),
                ..IntegratorConfig::new(10.0)
            },
        );
        let mut worst: f64 = 0.0;
        for s in traj.samples() {
            let e = (-s.t).exp();
            worst = worst
                .max((s.state.a - e).abs())
                .max((s.state.n - (2.0 * s.state.a - 1.0).powi(2)).abs())
                .max(s.state.x.abs());
            worst_witness = worst_witness.max(s.witness);
        }
        let reached = traj.last().map_or(0.0, |s| s.t);
        report.record(
            3,
            "free decay at C = 0",
            worst <= 1e-8 && reached == 10.0,
            format!("max deviation {worst:.3e} over [0, {reached}] ({} samples)", traj.len()),
        );
    }

    // 4: full vs reduced
    {
        let mut worst: f64 = 0.0;
        let mut shared = 0;
        let mut detail = String::new();
        for coop in [0.0, 10.0] {
            let config = IntegratorConfig {
                sample_interval: Some(if coop > 0.0 { 5e-4 } else { 0.01 }),
                ..IntegratorConfig::new(if coop > 0.0 { 2.0 } else { 10.0 })
            };
            let params = reference_params(coop);
            let reduced: Vec<_> = run(coop, config).checkpoints().copied().collect();
            let rho0 = reconstruct(&config.initial).unwrap();
            let full: Vec<_> = propagate(&rho0, &params, &config, &OracleOptions::default())
                .expect("full propagation succeeds")
                .into_iter()
                .filter(|s| s.checkpoint)
                .collect();
            let mut case_worst: f64 = 0.0;
            for (r, f) in reduced.iter().zip(&full) {
                assert_eq!(r.t, f.t, "checkpoint times differ");
                let s = reduce(&f.rho).expect("unit trace");
                case_worst = case_worst
                    .max((s.a - r.state.a).abs())
                    .max((s.n - r.state.n).abs())
                    .max((s.x - r.state.x).abs());
                worst_witness = worst_witness.max(entanglement_witness(&f.rho));
            }
            shared += reduced.len().min(full.len());
            if reduced.len() != full.len() {
                case_worst = f64::INFINITY;
            }
            worst = worst.max(case_worst);
            detail += &format!("C = {coop}: {case_worst:.3e} over {} samples; ", reduced.len());
        }
        report.record(
            4,
            "full 4x4 vs reduced equations",
            worst <= 1e-6 && shared > 0,
            format!("{detail}max {worst:.3e} (tolerance 1e-6)"),
        );
    }

    // the C = 10 trajectory used by 5-9
    let burst = run(10.0, IntegratorConfig::new(20.0));
    for s in burst.samples() {
        worst_witness = worst_witness.max(s.witness);
    }

    // 5: physicality
    {
        let (mut trace_err, mut min_eig, mut min_pop, mut dicke_err): (f64, f64, f64, f64) =
            (0.0, f64::INFINITY, f64::INFINITY, 0.0);
        let mut a_range = true;
        for s in burst.samples() {
            let rho = reconstruct(&s.state).expect("physical state");
            trace_err = trace_err.max((rho.trace() - 1.0).abs());
            min_eig = min_eig.min(rho.min_eigenvalue());
            let (pp, mm) = super_sub_populations(&s.state);
            min_pop = min_pop.min(pp).min(mm);
            // one rounding in each of rho_pp, rho_mm and their difference
            let ulp = 4.0 * f64::EPSILON * pp.abs().max(mm.abs()).max(s.state.x.abs());
            dicke_err = dicke_err.max(((pp - mm) - 2.0 * s.state.x).abs() / ulp.max(f64::MIN_POSITIVE));
            a_range &= (0.0..=1.0).contains(&s.state.a);
        }
        report.record(
            5,
            "physicality along C = 10",
            trace_err <= 1e-10 && min_eig >= -1e-8 && min_pop >= -1e-10 && dicke_err <= 1.0 && a_range,
            format!(
                "|tr-1| {trace_err:.2e}, min eigenvalue {min_eig:.3e}, min(rho_pp, rho_mm) {min_pop:.3e}, rho_pp - rho_mm - 2x within {dicke_err:.2} x 4 ulp"
            ),
        );
    }

    // 6: entanglement witness over every trajectory above plus the table rows
    {
        for coop in REF_C {
            let traj = run(coop, IntegratorConfig::new(20.0));
            worst_witness = worst_witness.max(traj.max_by(|s| s.witness));
            let peak = find_peak(&traj).unwrap();
            assert!(!peak.boundary);
        }
        report.record(
            6,
            "no entanglement",
            worst_witness <= 1e-8,
            format!("largest witness |rho_ab,ba| - sqrt(P_aa P_bb) = {worst_witness:.3e}"),
        );
    }

    // 7: correlation burst
    {
        let xs = burst.samples();
        let (k_max, x_max) = xs
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |b, (k, s)| if s.state.x > b.1 { (k, s.state.x) } else { b });
        let t_xmax = xs[k_max].t;
        let last = burst.last().unwrap();
        let monotone = xs.windows(2).all(|w| w[1].state.a <= w[0].state.a);
        let pass = xs[0].state.x == 0.0
            && x_max > 0.0
            && t_xmax < 0.05
            && last.t == 20.0
            && last.state.x.abs() < 0.01 * x_max
            && monotone;
        report.record(
            7,
            "correlation burst shape",
            pass,
            format!(
                "x(0) = {}, max x = {x_max:.5} at t = {t_xmax:.5}, x(20) = {:.3e}, a non-increasing: {monotone}",
                xs[0].state.x, last.state.x
            ),
        );
    }

    // 8: subradiant population
    {
        let max_mm = burst.max_by(|s| s.rho_mm);
        let max_pp = burst.max_by(|s| s.rho_pp);
        let last = burst.last().unwrap();
        let gap = (last.rho_pp - last.rho_mm).abs();
        report.record(
            8,
            "subradiant population",
            max_mm > 0.0 && gap < 0.05 * max_pp && last.t == 20.0,
            format!(
                "max rho_mm {max_mm:.5}, |rho_pp - rho_mm|(20) = {gap:.3e} vs 5% of max rho_pp = {:.3e}",
                0.05 * max_pp
            ),
        );
    }

    // 9: rate magnitude
    {
        let max_gamma = burst.max_by(|s| s.rates.gamma_plus);
        let golden = golden_bisection();
        let solved = solve_self_consistent(1.0, 0.0, 0.0, &reference_params(10.0), None)
            .expect("Gamma* exists")
            .gamma;
        report.record(
            9,
            "rate magnitude",
            max_gamma >= 25.0 && (solved - golden).abs() <= 1e-8,
            format!("max Gamma {max_gamma:.3}, Gamma* {solved:.12} vs bisection {golden:.12}"),
        );
    }

    // 10: Kramers-Kronig
    {
        let (amp, w) = (2.5, 1.7);
        let lorentz = SpectralProfile::from_fn(sinh_grid(1e5, 40_001, 0.05).unwrap(), |d| {
            amp * w * w / (w * w + d * d)
        })
        .unwrap();
        let mut pair_err: f64 = 0.0;
        for delta in [0.5 * w, w, 3.0 * w] {
            let got = chirp_kk(&lorentz, delta).unwrap().chirp;
            pair_err = pair_err.max((got - amp * w * delta / (w * w + delta * delta)).abs());
        }
        let grid = sinh_grid(1e3, 2001, 0.3).unwrap();
        let mut even_err: f64 = 0.0;
        for f in [
            (|d: f64| 1.0 / (1.0 + d * d)) as fn(f64) -> f64,
            |d: f64| (-d * d).exp(),
            |d: f64| (d.abs() + 1.0).recip().powi(3),
        ] {
            let p = SpectralProfile::from_fn(grid.clone(), f).unwrap();
            even_err = even_err.max(chirp_kk(&p, 0.0).unwrap().chirp.abs());
        }
        report.record(
            10,
            "Kramers-Kronig chirp",
            pair_err <= 1e-4 && even_err <= 1e-10,
            format!("Lorentzian pair error {pair_err:.3e}, even-profile chirp at 0 {even_err:.3e}"),
        );
    }

    // 11: convergence
    {
        let base = IntegratorConfig::default();
        let fine = IntegratorConfig {
            rel_tol: base.rel_tol / 2.0,
            abs_tol: base.abs_tol / 2.0,
            ..base
        };
        let refined = table_rows(&fine);
        let change = refined
            .iter()
            .zip(&peaks)
            .map(|(r, p)| (r.peak_intensity - p).abs() / p)
            .fold(0.0, f64::max);
        report.record(
            11,
            "tolerance halving",
            change < 1e-3,
            format!("largest relative peak change {change:.3e} (limit 1e-3)"),
        );
    }

    if report.failures == 0 {
        println!("acceptance: all criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {} criteria fail", report.failures);
        ExitCode::FAILURE
    }
}
