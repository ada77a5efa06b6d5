//! Scenario execution and output files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Result, TesError};
use crate::fg::{FgModel, INPUT_NAMES};
use crate::mb::{MbModel, STATE_IDS};
use crate::metrics::{compare, run_stats_summary, ComparisonReport, ModelSummary};
use crate::scenario::Scenario;
use crate::sim::{label_mode, run_fg, run_mb, ModelRun};
use crate::solver::RunStats;

/// Built models and their runs for one scenario.
pub struct ScenarioRuns {
    pub fg: Option<(FgModel, ModelRun)>,
    pub mb: Option<(MbModel, ModelRun)>,
}

pub fn run_fg_with(scn: &Scenario, n: usize) -> Result<(FgModel, ModelRun)> {
    let model = FgModel::build(&scn.parameters, n)?;
    let x0 = scn.fg_initial(&model)?;
    let run = run_fg(&model, &scn.inputs, &x0, scn.horizon_s, &scn.solver)?;
    Ok((model, run))
}

pub fn run_mb_with(scn: &Scenario) -> Result<(MbModel, ModelRun)> {
    let model = MbModel::build(&scn.parameters)?;
    let (x0, mode) = scn.mb_initial(&model)?;
    let run = run_mb(&model, &scn.inputs, &x0, mode, scn.horizon_s, &scn.solver)?;
    Ok((model, run))
}

pub fn run_scenario(scn: &Scenario) -> Result<ScenarioRuns> {
    scn.validate()?;
    let fg = if scn.model.runs_fg() { Some(run_fg_with(scn, scn.model.fg_sections)?) } else { None };
    let mb = if scn.model.runs_mb() { Some(run_mb_with(scn)?) } else { None };
    Ok(ScenarioRuns { fg, mb })
}

pub fn compare_models(scn: &Scenario) -> Result<(ScenarioRuns, ComparisonReport)> {
    let mut both = scn.clone();
    both.model.kind = crate::scenario::ModelKind::Both;
    let runs = run_scenario(&both)?;
    let report = compare(&scn.name, &runs.fg.as_ref().unwrap().1, &runs.mb.as_ref().unwrap().1);
    Ok((runs, report))
}

fn num(s: &mut String, v: f64) {
    let _ = write!(s, ",{v}");
}

/// Trajectory table for an FG run.
pub fn fg_trajectory_csv(model: &FgModel, run: &ModelRun) -> String {
    let ids = model.vertex_ids();
    let mut s = String::from("t_s,t_in_c,soc");
    for id in &ids {
        let _ = write!(s, ",T_{id}_c");
    }
    for id in &ids {
        let _ = write!(s, ",h_{id}_kj_per_kg");
    }
    s.push('\n');
    let traj = &run.solution.trajectory;
    for k in 0..traj.len() {
        let x = traj.state(k);
        let _ = write!(s, "{}", traj.times[k]);
        num(&mut s, run.t_in[k]);
        num(&mut s, run.soc[k]);
        for t in model.temperatures(x) {
            num(&mut s, t);
        }
        for h in x {
            num(&mut s, *h);
        }
        s.push('\n');
    }
    s
}

/// Trajectory table for an MB run.
pub fn mb_trajectory_csv(model: &MbModel, run: &ModelRun) -> String {
    let mut s = String::from("t_s,mode,t_in_c,soc");
    for id in STATE_IDS {
        let _ = write!(s, ",T_{id}_c");
    }
    for (i, id) in STATE_IDS.iter().enumerate() {
        if i != crate::mb::IDX_SOC {
            let _ = write!(s, ",h_{id}_kj_per_kg");
        }
    }
    s.push('\n');
    let traj = &run.solution.trajectory;
    for k in 0..traj.len() {
        let x = traj.state(k);
        let _ = write!(s, "{},{}", traj.times[k], label_mode(traj.labels[k]));
        num(&mut s, run.t_in[k]);
        num(&mut s, run.soc[k]);
        for t in model.temperatures(x) {
            num(&mut s, t);
        }
        for (i, h) in x.iter().enumerate() {
            if i != crate::mb::IDX_SOC {
                num(&mut s, *h);
            }
        }
        s.push('\n');
    }
    s
}

pub fn events_csv(run: &ModelRun) -> String {
    let mut s = String::from("t_s,mode_before,mode_after,fired,reason\n");
    for e in &run.solution.events {
        let fired: Vec<String> = e.fired.iter().map(usize::to_string).collect();
        let _ = writeln!(
            s,
            "{},{},{},{},\"{}\"",
            e.t,
            label_mode(e.label_before),
            label_mode(e.label_after),
            fired.join(" "),
            e.reason.replace('"', "'")
        );
    }
    s
}

pub fn delta_soc_csv(report: &ComparisonReport) -> String {
    let mut s = String::from("t_s,delta_soc\n");
    for (t, d) in report.delta.times.iter().zip(&report.delta.delta) {
        let _ = writeln!(s, "{t},{d}");
    }
    s
}

#[derive(Debug, Serialize)]
struct StatsFile<'a> {
    scenario: &'a str,
    models: Vec<ModelStats<'a>>,
}

#[derive(Debug, Serialize)]
struct ModelStats<'a> {
    summary: ModelSummary,
    solver: &'a RunStats,
}

/// Writes outputs into `dir` and returns the paths written. File stems
/// carry the model tag when a scenario runs both models.
pub fn write_outputs(dir: &Path, scn: &Scenario, runs: &ScenarioRuns) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let tagged = runs.fg.is_some() && runs.mb.is_some();
    let stem = |tag: &str| if tagged { format!("{}_{tag}", scn.name) } else { scn.name.clone() };
    let mut written = Vec::new();
    let mut put = |name: String, body: String| -> Result<()> {
        let p = dir.join(name);
        std::fs::write(&p, body)?;
        written.push(p);
        Ok(())
    };
    let mut stats = StatsFile {
        scenario: &scn.name,
        models: Vec::new(),
    };
    if let Some((model, run)) = &runs.fg {
        put(format!("{}_trajectory.csv", stem(&run.name)), fg_trajectory_csv(model, run))?;
        put(format!("{}_events.csv", stem(&run.name)), events_csv(run))?;
        stats.models.push(ModelStats {
            summary: ModelSummary::from(run),
            solver: &run.solution.stats,
        });
    }
    if let Some((model, run)) = &runs.mb {
        put(format!("{}_trajectory.csv", stem(&run.name)), mb_trajectory_csv(model, run))?;
        put(format!("{}_events.csv", stem(&run.name)), events_csv(run))?;
        stats.models.push(ModelStats {
            summary: ModelSummary::from(run),
            solver: &run.solution.stats,
        });
    }
    put(format!("{}_stats.json", scn.name), to_json(&stats)?)?;
    Ok(written)
}

pub fn write_report(dir: &Path, report: &ComparisonReport) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let json = dir.join(format!("{}_report.json", report.scenario));
    std::fs::write(&json, to_json(report)?)?;
    let delta = dir.join(format!("{}_delta_soc.csv", report.scenario));
    std::fs::write(&delta, delta_soc_csv(report))?;
    Ok(vec![json, delta])
}

pub fn to_json<T: Serialize>(v: &T) -> Result<String> {
    serde_json::to_string_pretty(v).map_err(|e| TesError::Scenario(format!("serializing output: {e}")))
}

/// One line of a sweep table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub model: String,
    pub n_sections: Option<usize>,
    pub ok: bool,
    pub t_freeze_s: Option<f64>,
    pub mean_t_comp_s: f64,
    pub mean_n_steps: f64,
    pub repetitions: usize,
    pub error: Option<String>,
}

fn sweep_row<F>(model: String, n: Option<usize>, reps: usize, mut run: F) -> SweepRow
where
    F: FnMut() -> Result<ModelRun>,
{
    let mut stats = Vec::with_capacity(reps);
    let mut t_freeze = None;
    for _ in 0..reps {
        match run() {
            Ok(r) => {
                t_freeze = r.t_freeze;
                stats.push(r.solution.stats);
            }
            Err(e) => {
                return SweepRow {
                    model,
                    n_sections: n,
                    ok: false,
                    t_freeze_s: None,
                    mean_t_comp_s: f64::NAN,
                    mean_n_steps: f64::NAN,
                    repetitions: stats.len(),
                    error: Some(e.to_string()),
                }
            }
        }
    }
    let summary = run_stats_summary(&stats);
    SweepRow {
        model,
        n_sections: n,
        ok: true,
        t_freeze_s: t_freeze,
        mean_t_comp_s: summary.mean_t_comp_s,
        mean_n_steps: summary.mean_n_steps,
        repetitions: reps,
        error: None,
    }
}

/// FG rows for each `n` plus one MB row. Runs execute one after another so
/// that timings do not compete for the CPU.
pub fn sweep_grid(scn: &Scenario, sections: &[usize], reps: usize) -> Result<Vec<SweepRow>> {
    if sections.is_empty() {
        return Err(TesError::invalid("sweep.sections", "must not be empty"));
    }
    if reps == 0 {
        return Err(TesError::invalid("sweep.repetitions", "must be >= 1"));
    }
    scn.validate()?;
    let mut rows = Vec::new();
    for &n in sections {
        rows.push(sweep_row(format!("fg{n}"), Some(n), reps, || run_fg_with(scn, n).map(|r| r.1)));
    }
    rows.push(sweep_row("mb".into(), None, reps, || run_mb_with(scn).map(|r| r.1)));
    Ok(rows)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("model,n_sections,status,t_freeze_s,mean_t_comp_s,mean_n_steps,repetitions,error\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},\"{}\"",
            r.model,
            r.n_sections.map_or(String::new(), |n| n.to_string()),
            if r.ok { "ok" } else { "failed" },
            r.t_freeze_s.map_or(String::new(), |t| t.to_string()),
            r.mean_t_comp_s,
            r.mean_n_steps,
            r.repetitions,
            r.error.as_deref().unwrap_or("").replace('"', "'")
        );
    }
    s
}

/// Incidence matrix, input map and edge table for the scenario's models.
pub fn dump_graph(dir: &Path, scn: &Scenario) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut put = |name: String, body: String| -> Result<()> {
        let p = dir.join(name);
        std::fs::write(&p, body)?;
        written.push(p);
        Ok(())
    };
    if scn.model.runs_fg() {
        let m = FgModel::build(&scn.parameters, scn.model.fg_sections)?;
        let tag = format!("{}_fg{}", scn.name, scn.model.fg_sections);
        put(format!("{tag}_incidence.csv"), m.graph().incidence_csv())?;
        put(format!("{tag}_input_map.csv"), m.graph().input_map_csv(&INPUT_NAMES))?;
        put(format!("{tag}_edges.csv"), m.graph().edge_table_csv())?;
    }
    if scn.model.runs_mb() {
        let m = MbModel::build(&scn.parameters)?;
        let tag = format!("{}_mb", scn.name);
        put(format!("{tag}_incidence.csv"), m.graph().incidence_csv())?;
        put(format!("{tag}_input_map.csv"), m.graph().input_map_csv(&INPUT_NAMES))?;
        put(format!("{tag}_edges.csv"), m.graph().edge_table_csv())?;
    }
    Ok(written)
}
