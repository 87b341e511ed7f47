//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use tdcr_core::control::{backstepping_control, BacksteppingGains, PlantTerms, RefPoint, SmcGains};
use tdcr_core::dynamics::{bdf_coeffs, BdfCoeffs, Lagged, Rod};
use tdcr_core::math::{Vec3, Vec6};
use tdcr_core::rod::{RodParams, TendonLayout};
use tdcr_core::scenario::{
    compute_metrics, run_closed_loop, ClosedLoopSetup, Controller, Scenario, SimTrace,
};
use tdcr_core::shooting::{solve_static, ShootingConfig, Simulation};

const TARGET_MM: f64 = 340.0;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed())
}

fn run(controller: Controller, scenario: Scenario) -> (SimTrace, Duration) {
    let setup = ClosedLoopSetup::new(controller, scenario);
    let (trace, elapsed) = timed(|| run_closed_loop(&setup));
    (trace.expect("closed-loop run failed"), elapsed)
}

fn backstepping() -> Controller {
    Controller::Backstepping(BacksteppingGains::default())
}

fn sliding_mode() -> Controller {
    Controller::SlidingMode(SmcGains::default())
}

fn static_sanity() -> Verdict {
    let params = RodParams {
        gravity: [0.0; 3],
        ..Default::default()
    };
    let rod = Rod::new(params, TendonLayout::default()).unwrap();
    let coeffs = BdfCoeffs::new(0.01, -0.2).unwrap();
    let ((drift, max_iters), elapsed) = timed(|| {
        let mut sim = Simulation::new(
            rod,
            coeffs,
            ShootingConfig::default(),
            &[0.0; 4],
            &Vec3::zeros(),
        )
        .unwrap();
        let mut drift: f64 = 0.0;
        let mut iters = 0;
        for _ in 0..100 {
            let rec = sim.dynamic_step(&[0.0; 4], &Vec3::zeros()).unwrap();
            drift = drift.max((rec.tip - Vec3::new(0.0, 0.0, 0.5)).norm() * 1e3);
            iters = iters.max(rec.report.iterations);
        }
        (drift, iters)
    });
    verdict(
        drift <= 1e-6 && max_iters <= 2 && elapsed < Duration::from_secs(10),
        format!(
            "max tip drift {drift:.2e} mm, max shooting iterations {max_iters}, {:.2} s",
            elapsed.as_secs_f64()
        ),
    )
}

fn cantilever() -> Verdict {
    let params = RodParams {
        gravity: [0.0; 3],
        ..Default::default()
    };
    let e = params.youngs_modulus;
    let i = std::f64::consts::PI * params.radius.powi(4) / 4.0;
    let (force, length) = (0.01, params.length);
    let oracle_mm = force * length.powi(3) / (3.0 * e * i) * 1e3;
    let rod = Rod::new(params, TendonLayout::default()).unwrap();
    let (_, step, _) = solve_static(
        &rod,
        &[0.0; 4],
        &Vec3::new(force, 0.0, 0.0),
        &Vec6::zeros(),
        &ShootingConfig::default(),
    )
    .unwrap();
    let tip_mm = step.tip().p.x * 1e3;
    let rel = (tip_mm - oracle_mm).abs() / oracle_mm;
    verdict(
        rel <= 0.02,
        format!(
            "tip deflection {tip_mm:.4} mm vs FL³/3EI = {oracle_mm:.4} mm ({:.3}%)",
            rel * 100.0
        ),
    )
}

/// Global error of ẏ = −y on [0, 1] started from exact history.
fn decay_error(dt: f64, alpha: f64) -> f64 {
    let c = bdf_coeffs(dt, alpha);
    let x = |v: f64| Vec3::new(v, 0.0, 0.0);
    let mut lag = Lagged {
        prev: x(1.0),
        prev2: x(dt.exp()),
        prev_rate: x(-1.0),
    };
    let mut y = 1.0;
    for _ in 0..(1.0 / dt).round() as usize {
        y = -lag.history_term(&c).x / (1.0 + c.c0);
        lag.advance(x(y), &c);
    }
    (y - (-1.0f64).exp()).abs()
}

fn bdf_order() -> Verdict {
    let ratios: Vec<f64> = [0.0, -0.2]
        .iter()
        .map(|&a| decay_error(0.01, a) / decay_error(0.005, a))
        .collect();
    verdict(
        ratios.iter().all(|r| (3.5..=4.5).contains(r)),
        format!(
            "error ratios α=0: {:.3}, α=−0.2: {:.3}",
            ratios[0], ratios[1]
        ),
    )
}

fn main() {
    let mut results: Vec<(usize, &str, Verdict)> = Vec::new();
    results.push((1, "static sanity", static_sanity()));
    results.push((2, "cantilever oracle", cantilever()));
    results.push((3, "BDF-α order", bdf_order()));

    let (bs, bs_time) = run(backstepping(), Scenario::nominal());
    let (smc, _) = run(sliding_mode(), Scenario::nominal());
    let bs_m = compute_metrics(&bs, TARGET_MM).unwrap();
    let smc_m = compute_metrics(&smc, TARGET_MM).unwrap();

    let tpl_rel = (bs_m.tpl_mm - 407.79).abs() / 407.79;
    results.push((
        4,
        "nominal backstepping",
        verdict(
            bs_m.steady_state_error_mm < 1.0
                && (14..=30).contains(&bs_m.settling_iterations)
                && bs_m.overshoot_percent <= 15.0
                && tpl_rel <= 0.20
                && bs_time < Duration::from_secs(300),
            format!(
                "sse {:.4} mm, settling {}, overshoot {:.2}%, TPL {:.2} mm ({:+.1}% vs 407.79), {:.2} s",
                bs_m.steady_state_error_mm,
                bs_m.settling_iterations,
                bs_m.overshoot_percent,
                bs_m.tpl_mm,
                (bs_m.tpl_mm / 407.79 - 1.0) * 100.0,
                bs_time.as_secs_f64()
            ),
        ),
    ));

    let within = |x: f64, paper: f64| (x - paper).abs() <= 0.3 * paper;
    results.push((
        5,
        "nominal sliding mode",
        verdict(
            smc_m.steady_state_error_mm < 1.0
                && smc_m.tpl_mm >= 2.0 * bs_m.tpl_mm
                && smc_m.settling_iterations > bs_m.settling_iterations
                && within(smc_m.tpl_mm, 1300.12)
                && within(smc_m.settling_iterations as f64, 43.0)
                && within(smc_m.overshoot_percent, 18.2),
            format!(
                "sse {:.4} mm, TPL {:.2} mm (backstepping {:.2}), settling {} (backstepping {}), overshoot {:.2}%",
                smc_m.steady_state_error_mm,
                smc_m.tpl_mm,
                bs_m.tpl_mm,
                smc_m.settling_iterations,
                bs_m.settling_iterations,
                smc_m.overshoot_percent
            ),
        ),
    ));

    let after: Vec<f64> = bs
        .records
        .iter()
        .skip(5)
        .map(|r| bs.lyapunov_of(r))
        .collect();
    let steps = after.len() - 1;
    let non_increasing = after.windows(2).filter(|w| w[1] <= w[0]).count();
    let fraction = non_increasing as f64 / steps as f64;
    let identity = lyapunov_identity();
    results.push((
        6,
        "Lyapunov monotonicity",
        verdict(
            fraction >= 0.95 && identity.is_ok(),
            format!(
                "V non-increasing on {non_increasing}/{steps} iterations ({:.1}%); identity: {}",
                fraction * 100.0,
                identity.err().unwrap_or_else(|| "holds".into())
            ),
        ),
    ));

    let mut weight_ok = true;
    let mut weight_detail = Vec::new();
    for mass in [0.020, 0.050] {
        let (b, _) = run(backstepping(), Scenario::tip_weight(mass));
        let (s, _) = run(sliding_mode(), Scenario::tip_weight(mass));
        let final_error = b.records.last().unwrap().error.abs() * 1e3;
        let (b_tpl, s_tpl) = (tpl(&b), tpl(&s));
        weight_ok &= final_error < 2.0 && s_tpl > b_tpl;
        weight_detail.push(format!(
            "{:.0} g: final error {final_error:.3} mm, TPL sliding {s_tpl:.1} vs backstepping {b_tpl:.1}",
            mass * 1e3
        ));
    }
    results.push((
        7,
        "tip weights",
        verdict(weight_ok, weight_detail.join("; ")),
    ));

    let mut dist_ok = true;
    let mut dist_detail = Vec::new();
    for (name, controller) in [
        ("backstepping", backstepping()),
        ("sliding", sliding_mode()),
    ] {
        let (t, _) = run(controller, Scenario::disturbance());
        let before = t.records[49].tip;
        let excursion = t.records[50..60]
            .iter()
            .map(|r| (r.tip - before).norm() * 1e3)
            .fold(0.0, f64::max);
        let recovered = t
            .records
            .iter()
            .rposition(|r| r.error.abs() * 1e3 >= 5.0)
            .map_or(0, |k| t.records[k].iteration);
        let ok = excursion > 1.0 && recovered <= 50 + 30;
        dist_ok &= ok;
        dist_detail.push(format!(
            "{name}: excursion {excursion:.1} mm, error < 5 mm from iteration {}",
            recovered + 1
        ));
    }
    results.push((
        8,
        "disturbance recovery",
        verdict(dist_ok, dist_detail.join("; ")),
    ));

    let displacement = bs.records.last().unwrap().displacement * 1e3;
    results.push((
        9,
        "tendon displacement endpoint",
        verdict(
            (displacement - 58.0).abs() <= 6.0,
            format!("{displacement:.2} mm"),
        ),
    ));

    let (again, _) = run(backstepping(), Scenario::nominal());
    let worst = [&bs, &smc]
        .iter()
        .flat_map(|t| t.records.iter())
        .map(|r| r.shooting.residual_norm)
        .fold(0.0, f64::max);
    let identical = format!("{:?}", again) == format!("{:?}", bs);
    results.push((
        10,
        "determinism and residuals",
        verdict(
            worst <= 1e-6 && identical,
            format!("worst accepted residual {worst:.2e}, repeated run identical: {identical}"),
        ),
    ));

    let mut failed = 0;
    for (id, name, v) in &results {
        if !v.pass {
            failed += 1;
        }
        println!(
            "criterion {id:2} {:<30} {}  {}",
            name,
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        );
    }
    println!(
        "{} of {} criteria passed",
        results.len() - failed,
        results.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}

fn tpl(trace: &SimTrace) -> f64 {
    compute_metrics(trace, TARGET_MM).unwrap().tpl_mm
}

/// Checks V̇ = −α₁z₁² − α₂z₂² on random states, with V̇ formed from the
/// closed-loop derivatives of z₁ and z₂.
fn lyapunov_identity() -> Result<(), String> {
    let mut runner = TestRunner::new(Config {
        cases: 2000,
        ..Config::default()
    });
    let state = (
        (-1e3..1e3f64, 0.1..10.0f64, -1.0..1.0f64, -2.0..2.0f64),
        (-1.0..1.0f64, -2.0..2.0f64, -100.0..100.0f64),
        (1.0..2000.0f64, 1.0..50.0f64),
    );
    runner
        .run(
            &state,
            |((a_c, b_c, x1, x2), (x, v, a), (alpha1, alpha2))| {
                let plant = PlantTerms { a_c, b_c, x1, x2 };
                let reference = RefPoint { x, v, a };
                let gains = BacksteppingGains { alpha1, alpha2 };
                let u = backstepping_control(&plant, &reference, &gains);
                let z1 = x - x1;
                let z2 = x2 - v - alpha1 * z1;
                let z1_dot = v - x2;
                let z2_dot = a_c + b_c * u - a - alpha1 * z1_dot;
                let v_dot = z1 * z1_dot + z2 * z2_dot;
                let expected = -alpha1 * z1 * z1 - alpha2 * z2 * z2;
                let scale = (alpha1 * z1 * z1)
                    .max(alpha2 * z2 * z2)
                    .max(z1.abs() * z2.abs())
                    .max(1e-300);
                prop_assert!(
                    (v_dot - expected).abs() <= 1e-9 * scale,
                    "{v_dot} vs {expected}"
                );
                Ok(())
            },
        )
        .map_err(|e| e.to_string())
}
