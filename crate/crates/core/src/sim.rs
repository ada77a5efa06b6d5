//! Runs either plant model under an input schedule: wraps each model as a
//! [`HybridSystem`], drives schedule changes through breakpoints or SOC
//! events, and post-processes the trajectory into SOC and energy series.

use serde::{Deserialize, Serialize};

use crate::error::{Result, TesError};
use crate::fg::{FgModel, INPUT_MDOT, INPUT_T_AIR, INPUT_T_IN};
use crate::graph::{energy_audit, AuditSample, EnergyAudit};
use crate::mb::{fsm_step, on_transition_reinit, FsmMode, MbModel, IDX_SOC};
use crate::solver::{integrate, Direction, HybridSystem, Solution, SolverConfig, StateClass};

/// One piece of a time-based inlet schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    pub duration_s: f64,
    pub t_in_c: f64,
}

/// Which level a SOC-toggled schedule applies first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TogglePhase {
    Freeze,
    Melt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InletSchedule {
    Constant {
        t_in_c: f64,
    },
    /// Piecewise constant in time; the last segment extends to the horizon.
    Segments {
        segments: Vec<Segment>,
    },
    /// Alternates between a cold and a warm inlet temperature each time the
    /// SOC reaches `soc_high` (while freezing) or `soc_low` (while melting).
    SocToggle {
        freeze_t_in_c: f64,
        melt_t_in_c: f64,
        start: TogglePhase,
        soc_low: f64,
        soc_high: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_toggles: Option<usize>,
    },
}

impl InletSchedule {
    pub fn validate(&self, horizon: f64) -> Result<()> {
        match self {
            InletSchedule::Constant { t_in_c } => finite("inputs.t_in.t_in_c", *t_in_c),
            InletSchedule::Segments { segments } => {
                if segments.is_empty() {
                    return Err(TesError::invalid("inputs.t_in.segments", "at least one segment required"));
                }
                for (k, s) in segments.iter().enumerate() {
                    if !(s.duration_s.is_finite() && s.duration_s > 0.0) {
                        return Err(TesError::invalid(format!("inputs.t_in.segments[{k}].duration_s"), "must be > 0"));
                    }
                    finite(&format!("inputs.t_in.segments[{k}].t_in_c"), s.t_in_c)?;
                }
                let covered: f64 = segments.iter().map(|s| s.duration_s).sum();
                if covered < horizon {
                    return Err(TesError::invalid(
                        "inputs.t_in.segments",
                        format!("segments cover {covered} s, horizon is {horizon} s"),
                    ));
                }
                Ok(())
            }
            InletSchedule::SocToggle {
                freeze_t_in_c,
                melt_t_in_c,
                soc_low,
                soc_high,
                ..
            } => {
                finite("inputs.t_in.freeze_t_in_c", *freeze_t_in_c)?;
                finite("inputs.t_in.melt_t_in_c", *melt_t_in_c)?;
                if !(0.0 <= *soc_low && soc_low < soc_high && *soc_high <= 1.0) {
                    return Err(TesError::invalid(
                        "inputs.t_in",
                        format!("need 0 <= soc_low < soc_high <= 1, got {soc_low}, {soc_high}"),
                    ));
                }
                Ok(())
            }
        }
    }

    fn segment_starts(&self) -> Vec<f64> {
        match self {
            InletSchedule::Segments { segments } => {
                let mut t = 0.0;
                segments
                    .iter()
                    .map(|s| {
                        let start = t;
                        t += s.duration_s;
                        start
                    })
                    .collect()
            }
            _ => vec![0.0],
        }
    }
}

fn finite(field: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(TesError::invalid(field, format!("must be finite, got {v}")))
    }
}

/// Boundary conditions shared by both models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Inputs {
    pub t_air_c: f64,
    pub mdot_kg_per_s: f64,
    pub t_in: InletSchedule,
}

impl Inputs {
    pub fn validate(&self, horizon: f64) -> Result<()> {
        finite("inputs.t_air_c", self.t_air_c)?;
        if !(self.mdot_kg_per_s.is_finite() && self.mdot_kg_per_s >= 0.0) {
            return Err(TesError::invalid("inputs.mdot_kg_per_s", "must be finite and >= 0"));
        }
        self.t_in.validate(horizon)
    }
}

/// Discrete schedule position: segment index for time schedules, number of
/// toggles so far for SOC schedules.
#[derive(Debug, Clone)]
pub struct ScheduleState {
    inputs: Inputs,
    starts: Vec<f64>,
    slot: usize,
}

impl ScheduleState {
    pub fn new(inputs: &Inputs) -> Self {
        ScheduleState {
            starts: inputs.t_in.segment_starts(),
            inputs: inputs.clone(),
            slot: 0,
        }
    }

    pub fn slot(&self) -> usize {
        self.slot
    }

    /// Inlet temperature in a given slot.
    pub fn t_in_at_slot(&self, slot: usize) -> f64 {
        match &self.inputs.t_in {
            InletSchedule::Constant { t_in_c } => *t_in_c,
            InletSchedule::Segments { segments } => segments[slot.min(segments.len() - 1)].t_in_c,
            InletSchedule::SocToggle {
                freeze_t_in_c,
                melt_t_in_c,
                ..
            } => match self.toggle_phase(slot) {
                TogglePhase::Freeze => *freeze_t_in_c,
                TogglePhase::Melt => *melt_t_in_c,
            },
        }
    }

    fn toggle_phase(&self, slot: usize) -> TogglePhase {
        match &self.inputs.t_in {
            InletSchedule::SocToggle { start, .. } => match (start, slot % 2) {
                (TogglePhase::Freeze, 0) | (TogglePhase::Melt, 1) => TogglePhase::Freeze,
                _ => TogglePhase::Melt,
            },
            _ => TogglePhase::Freeze,
        }
    }

    pub fn input_vector(&self, slot: usize) -> [f64; 3] {
        let mut u = [0.0; 3];
        u[INPUT_T_IN] = self.t_in_at_slot(slot);
        u[INPUT_T_AIR] = self.inputs.t_air_c;
        u[INPUT_MDOT] = self.inputs.mdot_kg_per_s;
        u
    }

    pub fn u(&self) -> [f64; 3] {
        self.input_vector(self.slot)
    }

    fn next_breakpoint(&self, t: f64) -> Option<f64> {
        self.starts.get(self.slot + 1).copied().filter(|&b| b > t)
    }

    fn advance_segment(&mut self, t: f64) -> bool {
        let mut moved = false;
        while self.starts.get(self.slot + 1).is_some_and(|&b| b <= t) {
            self.slot += 1;
            moved = true;
        }
        moved
    }

    /// Event function and direction of the SOC trigger, when one is armed.
    fn soc_trigger(&self, soc: f64) -> Option<(f64, Direction)> {
        match &self.inputs.t_in {
            InletSchedule::SocToggle {
                soc_low,
                soc_high,
                max_toggles,
                ..
            } => {
                if max_toggles.is_some_and(|m| self.slot >= m) {
                    return None;
                }
                Some(match self.toggle_phase(self.slot) {
                    TogglePhase::Freeze => (soc - soc_high, Direction::Rising),
                    TogglePhase::Melt => (soc - soc_low, Direction::Falling),
                })
            }
            _ => None,
        }
    }

    fn toggle(&mut self) -> String {
        self.slot += 1;
        format!("t_in={}", self.t_in_at_slot(self.slot))
    }
}

/// Packs the model mode and schedule slot into a trajectory label.
pub fn pack_label(mode: u32, slot: usize) -> u32 {
    mode | ((slot as u32) << 8)
}

pub fn label_mode(label: u32) -> u32 {
    label & 0xff
}

pub fn label_slot(label: u32) -> usize {
    (label >> 8) as usize
}

/// Fixed-grid model driven by a schedule.
pub struct FgSystem<'a> {
    pub model: &'a FgModel,
    pub schedule: ScheduleState,
}

impl HybridSystem for FgSystem<'_> {
    fn dim(&self) -> usize {
        self.model.n_states()
    }

    fn rhs(&self, _t: f64, x: &[f64], dx: &mut [f64]) -> Result<()> {
        self.model.rhs(x, &self.schedule.u(), dx)
    }

    fn n_events(&self) -> usize {
        1
    }

    fn events(&self, _t: f64, x: &[f64], g: &mut [f64]) {
        g[0] = match self.schedule.soc_trigger(self.model.soc(x)) {
            Some((v, _)) => v,
            None => 1.0,
        };
    }

    fn event_direction(&self, _i: usize) -> Direction {
        self.schedule.soc_trigger(0.5).map_or(Direction::Either, |(_, d)| d)
    }

    fn next_breakpoint(&self, t: f64) -> Option<f64> {
        self.schedule.next_breakpoint(t)
    }

    fn on_event(&mut self, t: f64, _x: &mut [f64], fired: &[usize]) -> Result<Option<String>> {
        if fired.is_empty() {
            return Ok(self
                .schedule
                .advance_segment(t)
                .then(|| format!("t_in={}", self.schedule.u()[INPUT_T_IN])));
        }
        Ok(Some(self.schedule.toggle()))
    }

    fn label(&self) -> u32 {
        pack_label(0, self.schedule.slot())
    }
}

const EV_SOC_BOUND: usize = 0;
const EV_SURFACE: usize = 1;
const EV_SCHEDULE: usize = 2;

/// Moving-boundary model with its state machine and a schedule.
pub struct MbSystem<'a> {
    pub model: &'a MbModel,
    pub mode: FsmMode,
    pub schedule: ScheduleState,
}

impl MbSystem<'_> {
    fn soc_bound(&self, soc: f64) -> Option<(f64, Direction)> {
        match self.mode {
            FsmMode::Freezing => Some((soc - 1.0, Direction::Rising)),
            FsmMode::Melting => Some((soc, Direction::Falling)),
            _ => None,
        }
    }

    fn surface_direction(&self) -> Direction {
        match self.mode {
            FsmMode::AllLiquid | FsmMode::Melting => Direction::Falling,
            FsmMode::Freezing | FsmMode::AllSolid => Direction::Rising,
        }
    }
}

impl HybridSystem for MbSystem<'_> {
    fn dim(&self) -> usize {
        6
    }

    fn rhs(&self, _t: f64, x: &[f64], dx: &mut [f64]) -> Result<()> {
        self.model.rhs(x, &self.schedule.u(), self.mode, dx)
    }

    fn state_class(&self, i: usize) -> StateClass {
        if i == IDX_SOC {
            StateClass::Fraction
        } else {
            StateClass::Enthalpy
        }
    }

    fn n_events(&self) -> usize {
        3
    }

    fn events(&self, _t: f64, x: &[f64], g: &mut [f64]) {
        let soc = x[IDX_SOC];
        g[EV_SOC_BOUND] = self.soc_bound(soc).map_or(1.0, |(v, _)| v);
        g[EV_SURFACE] = self.model.surface_temperature(x, self.mode) - self.model.params().pcm.t_sat;
        g[EV_SCHEDULE] = self.schedule.soc_trigger(soc).map_or(1.0, |(v, _)| v);
    }

    fn event_direction(&self, i: usize) -> Direction {
        match i {
            EV_SOC_BOUND => self.soc_bound(0.5).map_or(Direction::Either, |(_, d)| d),
            EV_SURFACE => self.surface_direction(),
            _ => self.schedule.soc_trigger(0.5).map_or(Direction::Either, |(_, d)| d),
        }
    }

    fn next_breakpoint(&self, t: f64) -> Option<f64> {
        self.schedule.next_breakpoint(t)
    }

    fn on_event(&mut self, t: f64, x: &mut [f64], fired: &[usize]) -> Result<Option<String>> {
        let mut reasons = Vec::new();
        if fired.is_empty() && self.schedule.advance_segment(t) {
            reasons.push(format!("t_in={}", self.schedule.u()[INPUT_T_IN]));
        }
        if fired.contains(&EV_SCHEDULE) {
            reasons.push(self.schedule.toggle());
        }
        let t_sat = self.model.params().pcm.t_sat;
        let mode_event = if fired.contains(&EV_SOC_BOUND) {
            let soc = if self.mode == FsmMode::Freezing { 1.0 } else { 0.0 };
            Some(fsm_step(self.mode, soc, t_sat, t_sat))
        } else if fired.contains(&EV_SURFACE) {
            let t_si = match self.surface_direction() {
                Direction::Rising => f64::INFINITY,
                _ => f64::NEG_INFINITY,
            };
            Some(fsm_step(self.mode, x[IDX_SOC], t_si, t_sat))
        } else {
            None
        };
        if let Some((next, Some(reason))) = mode_event {
            let y = on_transition_reinit(self.mode, next, x, self.model.params().pcm.h_f);
            x.copy_from_slice(&y);
            reasons.push(format!("mode {}->{}: {}", self.mode, next, reason));
            self.mode = next;
        }
        Ok((!reasons.is_empty()).then(|| reasons.join("; ")))
    }

    fn project(&self, x: &mut [f64]) {
        x[IDX_SOC] = x[IDX_SOC].clamp(0.0, 1.0);
    }

    fn label(&self) -> u32 {
        pack_label(self.mode.number(), self.schedule.slot())
    }
}

/// A completed run with its derived series.
#[derive(Debug, Clone)]
pub struct ModelRun {
    pub name: String,
    pub solution: Solution,
    pub soc: Vec<f64>,
    pub t_in: Vec<f64>,
    pub stored_kj: Vec<f64>,
    pub boundary_kw: Vec<f64>,
    pub audit: EnergyAudit,
    pub t_freeze: Option<f64>,
}

impl ModelRun {
    pub fn times(&self) -> &[f64] {
        &self.solution.trajectory.times
    }

    pub fn modes(&self) -> Vec<u32> {
        self.solution.trajectory.labels.iter().map(|&l| label_mode(l)).collect()
    }

    /// Mode numbers visited in order, starting with the initial mode.
    pub fn mode_sequence(&self) -> Vec<u32> {
        let mut seq = vec![label_mode(self.solution.trajectory.labels[0])];
        for ev in &self.solution.events {
            let m = label_mode(ev.label_after);
            if m != *seq.last().unwrap() {
                seq.push(m);
            }
        }
        seq
    }
}

/// FG freeze detection threshold on SOC.
pub const FG_FREEZE_THRESHOLD: f64 = 0.999;

fn audit(times: &[f64], stored: &[f64], power: &[f64]) -> EnergyAudit {
    let samples: Vec<AuditSample> = times
        .iter()
        .zip(stored)
        .zip(power)
        .map(|((&t, &s), &p)| AuditSample {
            t,
            stored_kj: s,
            boundary_kw: p,
        })
        .collect();
    energy_audit(&samples)
}

pub fn run_fg(model: &FgModel, inputs: &Inputs, x0: &[f64], horizon: f64, cfg: &SolverConfig) -> Result<ModelRun> {
    inputs.validate(horizon)?;
    let mut sys = FgSystem {
        model,
        schedule: ScheduleState::new(inputs),
    };
    let solution = integrate(&mut sys, x0, 0.0, horizon, cfg)?;
    let traj = &solution.trajectory;
    let schedule = ScheduleState::new(inputs);
    let mut soc = Vec::with_capacity(traj.len());
    let mut t_in = Vec::with_capacity(traj.len());
    let mut stored = Vec::with_capacity(traj.len());
    let mut power = Vec::with_capacity(traj.len());
    for k in 0..traj.len() {
        let x = traj.state(k);
        let u = schedule.input_vector(label_slot(traj.labels[k]));
        soc.push(model.soc(x));
        t_in.push(u[INPUT_T_IN]);
        stored.push(model.stored_energy(x));
        power.push(model.boundary_power(x, &u)?);
    }
    let audit = audit(&traj.times, &stored, &power);
    let t_freeze = crate::metrics::freeze_time(&traj.times, &soc, FG_FREEZE_THRESHOLD);
    Ok(ModelRun {
        name: format!("fg{}", model.n_sections()),
        solution,
        soc,
        t_in,
        stored_kj: stored,
        boundary_kw: power,
        audit,
        t_freeze,
    })
}

pub fn run_mb(model: &MbModel, inputs: &Inputs, x0: &[f64], mode0: FsmMode, horizon: f64, cfg: &SolverConfig) -> Result<ModelRun> {
    inputs.validate(horizon)?;
    let mut sys = MbSystem {
        model,
        mode: mode0,
        schedule: ScheduleState::new(inputs),
    };
    let solution = integrate(&mut sys, x0, 0.0, horizon, cfg)?;
    let traj = &solution.trajectory;
    let schedule = ScheduleState::new(inputs);
    let mut soc = Vec::with_capacity(traj.len());
    let mut t_in = Vec::with_capacity(traj.len());
    let mut stored = Vec::with_capacity(traj.len());
    let mut power = Vec::with_capacity(traj.len());
    for k in 0..traj.len() {
        let x = traj.state(k);
        let label = traj.labels[k];
        let u = schedule.input_vector(label_slot(label));
        let mode = FsmMode::from_number(label_mode(label)).expect("label carries a valid mode");
        soc.push(x[IDX_SOC]);
        t_in.push(u[INPUT_T_IN]);
        stored.push(model.stored_energy(x));
        power.push(model.boundary_power(x, &u, mode)?);
    }
    let audit = audit(&traj.times, &stored, &power);
    let t_freeze = solution
        .events
        .iter()
        .find(|e| label_mode(e.label_before) == 2 && label_mode(e.label_after) == 3)
        .map(|e| e.t);
    Ok(ModelRun {
        name: "mb".into(),
        solution,
        soc,
        t_in,
        stored_kj: stored,
        boundary_kw: power,
        audit,
        t_freeze,
    })
}
