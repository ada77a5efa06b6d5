//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

mod common;

use std::process::ExitCode;

use common::{analytic_series_resistance, fg_steady_power, load, Linear, Riccati, StiffForced, Thresholds, SHIPPED};
use tes_core::geometry::TesParameters;
use tes_core::harness::{compare_models, fg_trajectory_csv, mb_trajectory_csv, run_scenario, sweep_grid, ScenarioRuns};
use tes_core::solver::{integrate, integrate_fixed, SolverConfig};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn fg_convergence() -> Outcome {
    let scn = load("fig2_sweep");
    let rows = match sweep_grid(&scn, &[5, 10, 20, 35, 50], 1) {
        Ok(r) => r,
        Err(e) => return outcome(false, e.to_string()),
    };
    let t: Vec<f64> = rows.iter().filter(|r| r.n_sections.is_some()).filter_map(|r| r.t_freeze_s).collect();
    if t.len() != 5 {
        return outcome(false, format!("only {} of 5 runs froze", t.len()));
    }
    let diffs: Vec<f64> = t.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let shrinking = diffs.windows(2).all(|d| d[1] < d[0]);
    let rel = (t[4] - t[3]).abs() / t[4];
    let detail = format!(
        "t_freeze = [{}] s, |t50 - t35|/t50 = {:.2}%",
        t.iter().map(|v| format!("{v:.1}")).collect::<Vec<_>>().join(", "),
        100.0 * rel
    );
    outcome(shrinking && rel <= 0.02, detail)
}

fn solver_oracles() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;

    let cfg = SolverConfig::default();
    let x1 = integrate(&mut Linear, &[1.0], 0.0, 1.0, &cfg).unwrap().trajectory.last_state()[0];
    let decay = ((x1 - (-1.0f64).exp()) / (-1.0f64).exp()).abs();
    ok &= decay <= 10.0 * cfg.rtol;
    notes.push(format!("decay rel err {decay:.1e}"));

    let mut stiff = StiffForced { lambda: 1e6 };
    let scfg = SolverConfig {
        output_interval: 1.0,
        ..SolverConfig::default()
    };
    let sol = integrate(&mut stiff, &[0.0], 0.0, 10.0, &scfg).unwrap();
    let err = (sol.trajectory.last_state()[0] - stiff.particular(10.0)).abs();
    ok &= err < 1e-2 && sol.stats.accepted < 2_000;
    notes.push(format!("stiff err {err:.1e} in {} steps", sol.stats.accepted));

    let ecfg = SolverConfig {
        rtol: 1e-10,
        atol_enthalpy: 1e-12,
        ..SolverConfig::default()
    };
    let mut th = Thresholds::new(&[0.5]);
    let sol = integrate(&mut th, &[1.0], 0.0, 2.0, &ecfg).unwrap();
    let ev_err = sol.events.first().map_or(f64::INFINITY, |e| (e.t - std::f64::consts::LN_2).abs());
    ok &= sol.events.len() == 1 && ev_err <= ecfg.event_tol;
    notes.push(format!("event err {ev_err:.1e}"));

    let errs: Vec<f64> = [20usize, 40, 80, 160]
        .iter()
        .map(|&n| (integrate_fixed(&Riccati, &[1.0], 0.0, 1.0, n).unwrap()[0] - 0.5).abs())
        .collect();
    let order = errs.windows(2).map(|w| (w[0] / w[1]).log2()).fold(f64::INFINITY, f64::min);
    ok &= order >= 2.0 - 0.05;
    notes.push(format!("order {order:.3}"));

    outcome(ok, notes.join(", "))
}

fn steady_state() -> Outcome {
    let p = TesParameters::default();
    let (tf, to) = (50.0, 10.0);
    let expected = (tf - to) / analytic_series_resistance(&p);
    let rels: Vec<f64> = [1, 5, 35]
        .iter()
        .map(|&n| (fg_steady_power(&p, n, tf, to) - expected).abs() / expected)
        .collect();
    let worst = rels.iter().copied().fold(0.0, f64::max);
    outcome(worst <= 1e-3, format!("worst relative error {:.2e} over n = 1, 5, 35", worst))
}

fn trajectory_csvs(runs: &ScenarioRuns) -> Vec<String> {
    let mut out = Vec::new();
    if let Some((m, r)) = &runs.fg {
        out.push(fg_trajectory_csv(m, r));
    }
    if let Some((m, r)) = &runs.mb {
        out.push(mb_trajectory_csv(m, r));
    }
    out
}

fn line(n: usize, o: &Outcome) -> bool {
    println!("criterion {n}: {} {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    o.pass
}

fn main() -> ExitCode {
    let mut all = true;

    all &= line(1, &fg_convergence());

    let (fig5_runs, fig5) = compare_models(&load("fig5_complete_cycles")).unwrap();
    all &= line(
        2,
        &outcome(
            fig5.max_delta_soc <= 0.08 && fig5.mean_delta_soc <= 0.05,
            format!("max {:.4}, mean {:.4}", fig5.max_delta_soc, fig5.mean_delta_soc),
        ),
    );
    all &= line(
        3,
        &outcome(
            fig5.t_comp_ratio >= 3.0 && fig5.mb.n_steps < fig5.fg.n_steps,
            format!(
                "t_comp ratio {:.1}, steps MB {} vs FG {}",
                fig5.t_comp_ratio, fig5.mb.n_steps, fig5.fg.n_steps
            ),
        ),
    );

    let (_, fig6) = compare_models(&load("fig6_partial_cycles")).unwrap();
    let ctx = &fig6.max_context;
    all &= line(
        4,
        &outcome(
            (0.15..=0.35).contains(&fig6.max_delta_soc) && ctx.mb_mode == 4 && ctx.entered_from == Some(2),
            format!(
                "max {:.4} at t = {:.1} s in mode {} entered from {:?}",
                fig6.max_delta_soc, ctx.t_s, ctx.mb_mode, ctx.entered_from
            ),
        ),
    );

    let seq = fig5_runs.mb.as_ref().unwrap().1.mode_sequence();
    all &= line(5, &outcome(seq == [1, 2, 3, 4, 1, 2, 3, 4, 1], format!("sequence {seq:?}")));

    let mut audit_ok = true;
    let mut deterministic = true;
    let mut notes = Vec::new();
    for name in SHIPPED {
        let scn = load(name);
        let first = run_scenario(&scn).unwrap();
        let second = run_scenario(&scn).unwrap();
        deterministic &= trajectory_csvs(&first) == trajectory_csvs(&second);
        let fg = &first.fg.as_ref().unwrap().1.audit;
        let mb = &first.mb.as_ref().unwrap().1.audit;
        audit_ok &= fg.within(0.01) && mb.within(0.005);
        notes.push(format!(
            "{name}: FG {:.1e} kJ / {:.0} kJ, MB {:.1e} kJ / {:.0} kJ",
            fg.residual_kj, fg.throughput_kj, mb.residual_kj, mb.throughput_kj
        ));
    }
    all &= line(6, &outcome(audit_ok, notes.join("; ")));
    all &= line(7, &solver_oracles());
    all &= line(8, &steady_state());
    all &= line(
        9,
        &outcome(deterministic, format!("{} scenarios run twice, trajectory CSVs compared byte for byte", SHIPPED.len())),
    );

    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
