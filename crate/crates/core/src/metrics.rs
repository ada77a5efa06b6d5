//! Model-comparison metrics: SOC difference, freeze time, run statistics
//! and the combined comparison report.

use std::fmt::Write as _;

use serde::Serialize;

use crate::graph::EnergyAudit;
use crate::sim::{label_mode, ModelRun};
use crate::solver::RunStats;

/// `|SOC_a − SOC_b|` on a common grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaSoc {
    pub times: Vec<f64>,
    pub delta: Vec<f64>,
    pub max: f64,
    pub mean: f64,
    pub t_at_max: f64,
    /// Set when the horizons differ and only their overlap was compared.
    pub truncated: bool,
}

/// Linear interpolation of a sampled series. At repeated time stamps the
/// later sample wins.
pub fn interpolate(times: &[f64], values: &[f64], t: f64) -> f64 {
    let k = times.partition_point(|&s| s <= t);
    if k == 0 {
        return values[0];
    }
    if k == times.len() {
        return values[k - 1];
    }
    let (t0, t1) = (times[k - 1], times[k]);
    if t1 == t0 {
        return values[k];
    }
    let w = (t - t0) / (t1 - t0);
    values[k - 1] + w * (values[k] - values[k - 1])
}

/// Compares two SOC series on the union of their time grids, restricted to
/// the overlap of their horizons.
pub fn delta_soc(times_a: &[f64], soc_a: &[f64], times_b: &[f64], soc_b: &[f64]) -> DeltaSoc {
    assert!(!times_a.is_empty() && !times_b.is_empty(), "empty SOC series");
    let lo = times_a[0].max(times_b[0]);
    let hi = times_a[times_a.len() - 1].min(times_b[times_b.len() - 1]);
    let truncated = times_a[0] != times_b[0] || times_a[times_a.len() - 1] != times_b[times_b.len() - 1];
    let mut grid: Vec<f64> = times_a
        .iter()
        .chain(times_b)
        .copied()
        .filter(|&t| t >= lo && t <= hi)
        .collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let delta: Vec<f64> = grid
        .iter()
        .map(|&t| (interpolate(times_a, soc_a, t) - interpolate(times_b, soc_b, t)).abs())
        .collect();
    let (mut max, mut t_at_max) = (0.0, lo);
    for (&t, &d) in grid.iter().zip(&delta) {
        if d > max {
            max = d;
            t_at_max = t;
        }
    }
    let mean = if delta.is_empty() { 0.0 } else { delta.iter().sum::<f64>() / delta.len() as f64 };
    DeltaSoc {
        times: grid,
        delta,
        max,
        mean,
        t_at_max,
        truncated,
    }
}

/// First time the series reaches `threshold`, linearly interpolated
/// between samples; `None` if it never does.
pub fn freeze_time(times: &[f64], soc: &[f64], threshold: f64) -> Option<f64> {
    let k = soc.iter().position(|&s| s >= threshold)?;
    if k == 0 {
        return Some(times[0]);
    }
    let (t0, t1, s0, s1) = (times[k - 1], times[k], soc[k - 1], soc[k]);
    if s1 == s0 {
        return Some(t1);
    }
    Some(t0 + (threshold - s0) / (s1 - s0) * (t1 - t0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StatsSummary {
    pub runs: usize,
    pub mean_t_comp_s: f64,
    pub mean_n_steps: f64,
}

pub fn run_stats_summary(runs: &[RunStats]) -> StatsSummary {
    let n = runs.len().max(1) as f64;
    StatsSummary {
        runs: runs.len(),
        mean_t_comp_s: runs.iter().map(|r| r.t_comp_s).sum::<f64>() / n,
        mean_n_steps: runs.iter().map(|r| r.n_steps as f64).sum::<f64>() / n,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AuditSummary {
    pub delta_stored_kj: f64,
    pub boundary_energy_kj: f64,
    pub residual_kj: f64,
    pub throughput_kj: f64,
    pub residual_percent: f64,
}

impl From<&EnergyAudit> for AuditSummary {
    fn from(a: &EnergyAudit) -> Self {
        AuditSummary {
            delta_stored_kj: a.delta_stored_kj,
            boundary_energy_kj: a.boundary_energy_kj,
            residual_kj: a.residual_kj,
            throughput_kj: a.throughput_kj,
            residual_percent: 100.0 * a.residual_fraction(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelSummary {
    pub model: String,
    /// `None` when the run never froze completely.
    pub t_freeze_s: Option<f64>,
    pub t_comp_s: f64,
    pub n_steps: usize,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub events: usize,
    pub energy: AuditSummary,
}

impl From<&ModelRun> for ModelSummary {
    fn from(run: &ModelRun) -> Self {
        let s = &run.solution.stats;
        ModelSummary {
            model: run.name.clone(),
            t_freeze_s: run.t_freeze,
            t_comp_s: s.t_comp_s,
            n_steps: s.n_steps,
            accepted_steps: s.accepted,
            rejected_steps: s.rejected,
            events: s.events,
            energy: AuditSummary::from(&run.audit),
        }
    }
}

/// Where the largest SOC difference occurred in the MB mode history.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MaxContext {
    pub t_s: f64,
    pub mb_mode: u32,
    /// Mode the MB model was in before entering `mb_mode`.
    pub entered_from: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub scenario: String,
    pub max_delta_soc: f64,
    pub mean_delta_soc: f64,
    pub max_context: MaxContext,
    pub horizons_truncated: bool,
    pub mb_mode_sequence: Vec<u32>,
    pub t_comp_ratio: f64,
    pub fg: ModelSummary,
    pub mb: ModelSummary,
    #[serde(skip)]
    pub delta: DeltaSoc,
}

/// MB mode active at `t` and the mode it was entered from. At an event
/// time the post-event mode is reported.
pub fn mb_mode_at(mb: &ModelRun, t: f64) -> (u32, Option<u32>) {
    let mut mode = label_mode(mb.solution.trajectory.labels[0]);
    let mut from = None;
    for ev in mb.solution.events.iter().take_while(|e| e.t <= t) {
        let (a, b) = (label_mode(ev.label_before), label_mode(ev.label_after));
        if a != b {
            from = Some(a);
            mode = b;
        }
    }
    (mode, from)
}

pub fn compare(scenario: &str, fg: &ModelRun, mb: &ModelRun) -> ComparisonReport {
    let delta = delta_soc(fg.times(), &fg.soc, mb.times(), &mb.soc);
    let (mb_mode, entered_from) = mb_mode_at(mb, delta.t_at_max);
    let fg_s = ModelSummary::from(fg);
    let mb_s = ModelSummary::from(mb);
    ComparisonReport {
        scenario: scenario.to_string(),
        max_delta_soc: delta.max,
        mean_delta_soc: delta.mean,
        max_context: MaxContext {
            t_s: delta.t_at_max,
            mb_mode,
            entered_from,
        },
        horizons_truncated: delta.truncated,
        mb_mode_sequence: mb.mode_sequence(),
        t_comp_ratio: if mb_s.t_comp_s > 0.0 { fg_s.t_comp_s / mb_s.t_comp_s } else { f64::INFINITY },
        fg: fg_s,
        mb: mb_s,
        delta,
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "did not freeze".into(), |t| format!("{t:.1}"))
}

impl ComparisonReport {
    /// Aligned plain-text rendering.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "scenario          {}", self.scenario);
        let _ = writeln!(s, "max delta SOC     {:.4}  (t = {:.1} s, MB mode {})", self.max_delta_soc, self.max_context.t_s, self.max_context.mb_mode);
        let _ = writeln!(s, "mean delta SOC    {:.4}", self.mean_delta_soc);
        let seq: Vec<String> = self.mb_mode_sequence.iter().map(u32::to_string).collect();
        let _ = writeln!(s, "MB mode sequence  {}", seq.join(" "));
        let _ = writeln!(s, "t_comp ratio      {:.2}", self.t_comp_ratio);
        let _ = writeln!(s);
        let _ = writeln!(
            s,
            "{:<8} {:>14} {:>10} {:>8} {:>8} {:>13} {:>10}",
            "model", "t_freeze_s", "t_comp_s", "n_steps", "events", "residual_kj", "residual%"
        );
        for m in [&self.fg, &self.mb] {
            let _ = writeln!(
                s,
                "{:<8} {:>14} {:>10.4} {:>8} {:>8} {:>13.4} {:>10.4}",
                m.model,
                opt(m.t_freeze_s),
                m.t_comp_s,
                m.n_steps,
                m.events,
                m.energy.residual_kj,
                m.energy.residual_percent
            );
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identical_series_have_zero_difference() {
        let t = [0.0, 1.0, 2.0];
        let s = [0.0, 0.5, 1.0];
        let d = delta_soc(&t, &s, &t, &s);
        assert_eq!(d.max, 0.0);
        assert_eq!(d.mean, 0.0);
        assert!(!d.truncated);
    }

    #[test]
    fn constant_offset() {
        let t = [0.0, 1.0, 2.0, 3.0];
        let a = [0.1, 0.2, 0.3, 0.4];
        let b = [0.15, 0.25, 0.35, 0.45];
        let d = delta_soc(&t, &a, &t, &b);
        assert!((d.max - 0.05).abs() < 1e-12);
        assert!((d.mean - 0.05).abs() < 1e-12);
    }

    #[test]
    fn union_grid_and_overlap() {
        let d = delta_soc(&[0.0, 2.0, 4.0], &[0.0, 0.2, 0.4], &[0.0, 1.0, 3.0], &[0.0, 0.1, 0.3]);
        assert_eq!(d.times, vec![0.0, 1.0, 2.0, 3.0]);
        assert!(d.truncated);
        assert!(d.max < 1e-12);
    }

    #[test]
    fn jump_freeze_time() {
        let t = [0.0, 50.0, 100.0, 150.0];
        let s = [0.0, 0.0, 1.0, 1.0];
        assert_eq!(freeze_time(&t, &s, 1.0), Some(100.0));
        assert_eq!(freeze_time(&t, &[0.0, 0.1, 0.2, 0.3], 0.999), None);
    }

    #[test]
    fn interpolated_freeze_time() {
        let t = [0.0, 10.0];
        let s = [0.99, 1.0];
        let tf = freeze_time(&t, &s, 0.999).unwrap();
        assert!((tf - 9.0).abs() < 1e-9);
    }

    #[test]
    fn stats_means() {
        let one = RunStats {
            n_steps: 10,
            t_comp_s: 0.5,
            ..RunStats::default()
        };
        let s = run_stats_summary(std::slice::from_ref(&one));
        assert_eq!((s.mean_n_steps, s.mean_t_comp_s), (10.0, 0.5));
        let s = run_stats_summary(&vec![one; 50]);
        assert_eq!((s.runs, s.mean_n_steps, s.mean_t_comp_s), (50, 10.0, 0.5));
    }

    proptest! {
        #[test]
        fn delta_is_symmetric(a in prop::collection::vec(0.0f64..1.0, 5), b in prop::collection::vec(0.0f64..1.0, 5)) {
            let t = [0.0, 1.0, 2.0, 3.0, 4.0];
            let ab = delta_soc(&t, &a, &t, &b);
            let ba = delta_soc(&t, &b, &t, &a);
            prop_assert_eq!(ab.max, ba.max);
            prop_assert_eq!(ab.mean, ba.mean);
            prop_assert!(ab.max >= ab.mean && ab.mean >= 0.0);
        }

        #[test]
        fn freeze_time_monotone_in_threshold(steps in prop::collection::vec(0.0f64..0.1, 20), lo in 0.0f64..0.5, gap in 0.0f64..0.4) {
            let mut s = vec![0.0];
            for d in &steps {
                let last = *s.last().unwrap();
                s.push((last + d).min(1.0));
            }
            let t: Vec<f64> = (0..s.len()).map(|k| k as f64).collect();
            if let (Some(a), Some(b)) = (freeze_time(&t, &s, lo), freeze_time(&t, &s, lo + gap)) {
                prop_assert!(a <= b);
            }
        }
    }
}
