mod common;

use std::process::Command;

use common::{load, scenario_path, SHIPPED};
use tes_core::harness::{
    compare_models, dump_graph, events_csv, fg_trajectory_csv, mb_trajectory_csv, run_fg_with, run_mb_with, run_scenario, sweep_csv, sweep_grid,
    write_outputs,
};
use tes_core::scenario::Scenario;

fn first_line(s: &str) -> &str {
    s.lines().next().unwrap()
}

#[test]
fn shipped_scenarios_roundtrip() {
    for name in SHIPPED {
        let scn = load(name);
        assert_eq!(scn.name, name);
        let text = scn.to_toml_string().unwrap();
        let again = Scenario::from_toml_str(&text).unwrap();
        assert_eq!(scn, again, "{name}");
    }
}

#[test]
fn trajectory_headers_are_stable() {
    let mut scn = load("null");
    scn.horizon_s = 10.0;
    let (fg, run) = run_fg_with(&scn, 2).unwrap();
    assert_eq!(
        first_line(&fg_trajectory_csv(&fg, &run)),
        "t_s,t_in_c,soc,T_wf_c,T_inner_wall_c,T_pcm_1_c,T_pcm_2_c,T_outer_wall_c,\
         h_wf_kj_per_kg,h_inner_wall_kj_per_kg,h_pcm_1_kj_per_kg,h_pcm_2_kj_per_kg,h_outer_wall_kj_per_kg"
    );
    let (mb, run) = run_mb_with(&scn).unwrap();
    assert_eq!(
        first_line(&mb_trajectory_csv(&mb, &run)),
        "t_s,mode,t_in_c,soc,T_wf_c,T_inner_wall_c,T_solid_c,T_interface_c,T_liquid_c,T_outer_wall_c,\
         h_wf_kj_per_kg,h_inner_wall_kj_per_kg,h_solid_kj_per_kg,h_liquid_kj_per_kg,h_outer_wall_kj_per_kg"
    );
    assert_eq!(first_line(&events_csv(&run)), "t_s,mode_before,mode_after,fired,reason");
}

#[test]
fn null_scenario_is_quiet() {
    let runs = run_scenario(&load("null")).unwrap();
    for run in [&runs.fg.as_ref().unwrap().1, &runs.mb.as_ref().unwrap().1] {
        assert!(run.soc.iter().all(|s| *s == run.soc[0]));
        assert!(run.solution.events.is_empty());
    }
    assert_eq!(runs.mb.unwrap().1.mode_sequence(), vec![1]);
}

#[test]
fn comparison_starts_at_zero_difference() {
    let mut scn = load("fig2_sweep");
    scn.horizon_s = 500.0;
    let (_, report) = compare_models(&scn).unwrap();
    assert_eq!(report.delta.times[0], 0.0);
    assert_eq!(report.delta.delta[0], 0.0);
    assert!(report.max_delta_soc >= report.mean_delta_soc);
    assert!(report.to_text().contains("max delta SOC"));
}

#[test]
fn sweep_rows_and_failures() {
    let mut scn = load("fig2_sweep");
    scn.horizon_s = 600.0;
    let rows = sweep_grid(&scn, &[35], 1).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].model, "fg35");
    assert_eq!(rows[1].model, "mb");
    // A broken row is reported and the sweep carries on.
    let rows = sweep_grid(&scn, &[0, 3], 2).unwrap();
    assert!(!rows[0].ok && rows[0].error.is_some());
    assert!(rows[1].ok && rows[1].repetitions == 2);
    let csv = sweep_csv(&rows);
    assert_eq!(first_line(&csv), "model,n_sections,status,t_freeze_s,mean_t_comp_s,mean_n_steps,repetitions,error");
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn written_outputs_are_reproducible() {
    let mut scn = load("fig6_partial_cycles");
    scn.horizon_s = 4000.0;
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let written = write_outputs(a.path(), &scn, &run_scenario(&scn).unwrap()).unwrap();
    write_outputs(b.path(), &scn, &run_scenario(&scn).unwrap()).unwrap();
    let mut compared = 0;
    for p in written {
        let name = p.file_name().unwrap();
        if name.to_string_lossy().ends_with(".csv") {
            assert_eq!(std::fs::read(&p).unwrap(), std::fs::read(b.path().join(name)).unwrap(), "{name:?}");
            compared += 1;
        }
    }
    assert_eq!(compared, 4);
}

#[test]
fn graph_dump_lists_every_edge() {
    let dir = tempfile::tempdir().unwrap();
    let mut scn = load("null");
    scn.model.fg_sections = 3;
    let files = dump_graph(dir.path(), &scn).unwrap();
    assert_eq!(files.len(), 6);
    let edges = std::fs::read_to_string(dir.path().join("null_mb_edges.csv")).unwrap();
    assert_eq!(edges.lines().count(), 11);
}

#[test]
fn cli_reports_errors_as_json() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "name = \"bad\"\nhorizon_s = -5.0\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_tes-sim")).arg("simulate").arg(&bad).output().unwrap();
    assert!(!out.status.success());
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "scenario");
    assert!(err["message"].as_str().unwrap().contains("bad.toml"));
}

#[test]
fn cli_simulate_writes_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_tes-sim"))
        .arg("--out-dir")
        .arg(dir.path())
        .arg("simulate")
        .arg(scenario_path("null"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["null_fg35_trajectory.csv", "null_mb_trajectory.csv", "null_mb_events.csv", "null_stats.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}
