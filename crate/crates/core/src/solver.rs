//! Variable-step TR-BDF2 integrator with event localization.
//!
//! Each step is a trapezoidal stage to `t + γh` followed by a BDF2 stage to
//! `t + h` (`γ = 2 − √2`), both solved by simplified Newton with a shared
//! iteration matrix `I − d h J`. The local error is the difference to the
//! embedded third-order solution, filtered through the same matrix so that
//! stiff components do not inflate it. Between accepted steps the solution
//! is a cubic Hermite interpolant, which is used both for the fixed output
//! grid and for bisection of event functions.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Result, TesError};

const GAMMA: f64 = 2.0 - std::f64::consts::SQRT_2;
const D: f64 = GAMMA / 2.0;
const W: f64 = std::f64::consts::SQRT_2 / 4.0;

/// Which absolute tolerance applies to a state component.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateClass {
    Enthalpy,
    Fraction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JacobianMode {
    FiniteDifference,
    /// Iteration matrix fixed at the identity (functional iteration).
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub rtol: f64,
    #[serde(rename = "atol_enthalpy_kj_per_kg")]
    pub atol_enthalpy: f64,
    pub atol_soc: f64,
    #[serde(rename = "min_step_s")]
    pub min_step: f64,
    /// Defaults to a tenth of the integration span.
    #[serde(rename = "max_step_s", skip_serializing_if = "Option::is_none")]
    pub max_step: Option<f64>,
    #[serde(rename = "initial_step_s", skip_serializing_if = "Option::is_none")]
    pub initial_step: Option<f64>,
    #[serde(rename = "event_tol_s")]
    pub event_tol: f64,
    pub max_newton_iters: usize,
    pub jacobian: JacobianMode,
    #[serde(rename = "output_interval_s")]
    pub output_interval: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            rtol: 1e-3,
            atol_enthalpy: 1e-3,
            atol_soc: 1e-6,
            min_step: 1e-12,
            max_step: None,
            initial_step: None,
            event_tol: 1e-6,
            max_newton_iters: 8,
            jacobian: JacobianMode::FiniteDifference,
            output_interval: 1.0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("rtol", self.rtol),
            ("atol_enthalpy_kj_per_kg", self.atol_enthalpy),
            ("atol_soc", self.atol_soc),
            ("min_step_s", self.min_step),
            ("event_tol_s", self.event_tol),
            ("output_interval_s", self.output_interval),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(TesError::invalid(format!("solver.{name}"), format!("must be > 0, got {v}")));
            }
        }
        if let Some(h) = self.max_step {
            if !(h >= self.min_step) {
                return Err(TesError::invalid("solver.max_step_s", "must be >= min_step_s"));
            }
        }
        if self.max_newton_iters == 0 {
            return Err(TesError::invalid("solver.max_newton_iters", "must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Rising,
    Falling,
    Either,
}

impl Direction {
    fn crossed(self, before: f64, after: f64) -> bool {
        match self {
            Direction::Rising => before < 0.0 && after >= 0.0,
            Direction::Falling => before > 0.0 && after <= 0.0,
            Direction::Either => (before < 0.0 && after >= 0.0) || (before > 0.0 && after <= 0.0),
        }
    }
}

/// A continuous system with optional discrete state changed only at events
/// and breakpoints.
pub trait HybridSystem {
    fn dim(&self) -> usize;

    fn rhs(&self, t: f64, x: &[f64], dx: &mut [f64]) -> Result<()>;

    fn state_class(&self, _i: usize) -> StateClass {
        StateClass::Enthalpy
    }

    fn n_events(&self) -> usize {
        0
    }

    fn events(&self, _t: f64, _x: &[f64], _g: &mut [f64]) {}

    fn event_direction(&self, _i: usize) -> Direction {
        Direction::Either
    }

    /// Next time strictly after `t` at which the discrete inputs change.
    fn next_breakpoint(&self, _t: f64) -> Option<f64> {
        None
    }

    /// Handles fired events (or a breakpoint when `fired` is empty). Returns
    /// a reason string when the discrete state changed.
    fn on_event(&mut self, _t: f64, _x: &mut [f64], _fired: &[usize]) -> Result<Option<String>> {
        Ok(None)
    }

    /// Applied to every accepted state (e.g. clamping bounded states).
    fn project(&self, _x: &mut [f64]) {}

    /// Discrete-state label recorded alongside samples.
    fn label(&self) -> u32 {
        0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventRecord {
    pub t: f64,
    pub fired: Vec<usize>,
    pub label_before: u32,
    pub label_after: u32,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RunStats {
    pub accepted: usize,
    pub rejected: usize,
    /// Attempted steps, accepted plus rejected.
    pub n_steps: usize,
    pub newton_failures: usize,
    pub rhs_evals: usize,
    pub jacobian_evals: usize,
    pub events: usize,
    pub t_comp_s: f64,
}

/// Samples on the output grid plus pre/post samples at every event.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub dim: usize,
    pub times: Vec<f64>,
    pub states: Vec<f64>,
    pub labels: Vec<u32>,
}

impl Trajectory {
    fn new(dim: usize) -> Self {
        Trajectory { dim, ..Default::default() }
    }

    fn push(&mut self, t: f64, x: &[f64], label: u32) {
        self.times.push(t);
        self.states.extend_from_slice(x);
        self.labels.push(label);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k * self.dim..(k + 1) * self.dim]
    }

    pub fn last_state(&self) -> &[f64] {
        self.state(self.len() - 1)
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub trajectory: Trajectory,
    pub events: Vec<EventRecord>,
    pub stats: RunStats,
}

/// Cubic Hermite interpolation on `[t0, t0 + h]`.
pub fn hermite(t0: f64, h: f64, y0: &[f64], f0: &[f64], y1: &[f64], f1: &[f64], t: f64, out: &mut [f64]) {
    let s = (t - t0) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    for i in 0..out.len() {
        out[i] = h00 * y0[i] + h10 * h * f0[i] + h01 * y1[i] + h11 * h * f1[i];
    }
}

struct Weights {
    atol: Vec<f64>,
    rtol: f64,
}

impl Weights {
    fn norm(&self, v: &[f64], ya: &[f64], yb: &[f64]) -> f64 {
        v.iter()
            .enumerate()
            .map(|(i, e)| e.abs() / (self.atol[i] + self.rtol * ya[i].abs().max(yb[i].abs())))
            .fold(0.0, f64::max)
    }
}

enum StepOutcome {
    Converged { y: Vec<f64>, f: Vec<f64>, err: f64, max_iters: usize },
    NewtonFailed,
}

struct Stepper<'a, S: HybridSystem> {
    sys: &'a S,
    cfg: &'a SolverConfig,
    weights: Weights,
    stats: RunStats,
    jac: Option<DMatrix<f64>>,
    lu: Option<(f64, nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>)>,
}

impl<'a, S: HybridSystem> Stepper<'a, S> {
    fn rhs(&mut self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        let mut dx = vec![0.0; x.len()];
        self.stats.rhs_evals += 1;
        self.sys.rhs(t, x, &mut dx)?;
        if let Some((i, v)) = dx.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(TesError::NonFinite {
                quantity: "derivative",
                location: format!("state {i} at t = {t}"),
                value: *v,
            });
        }
        Ok(dx)
    }

    fn refresh_jacobian(&mut self, t: f64, x: &[f64], f: &[f64]) -> Result<()> {
        let n = x.len();
        let mut j = DMatrix::zeros(n, n);
        if self.cfg.jacobian == JacobianMode::FiniteDifference {
            self.stats.jacobian_evals += 1;
            let sqrt_eps = f64::EPSILON.sqrt();
            let mut xp = x.to_vec();
            for c in 0..n {
                let scale = x[c].abs().max(self.weights.atol[c] / self.weights.rtol).max(1e-8);
                let delta = sqrt_eps * scale;
                xp[c] = x[c] + delta;
                let fp = self.rhs(t, &xp)?;
                xp[c] = x[c];
                for r in 0..n {
                    j[(r, c)] = (fp[r] - f[r]) / delta;
                }
            }
        }
        self.jac = Some(j);
        self.lu = None;
        Ok(())
    }

    fn factor(&mut self, h: f64) -> Result<()> {
        if matches!(&self.lu, Some((hh, _)) if *hh == h) {
            return Ok(());
        }
        let j = self.jac.as_ref().expect("jacobian computed before factoring");
        let n = j.nrows();
        let m = DMatrix::<f64>::identity(n, n) - j * (D * h);
        self.lu = Some((h, m.lu()));
        Ok(())
    }

    fn solve(&self, rhs: &[f64]) -> Option<Vec<f64>> {
        let (_, lu) = self.lu.as_ref()?;
        lu.solve(&DVector::from_column_slice(rhs)).map(|v| v.iter().copied().collect())
    }

    /// Solves `z − d h f(t_s, z) = base` starting from `guess`.
    fn newton(&mut self, t_s: f64, h: f64, base: &[f64], mut z: Vec<f64>, y_ref: &[f64]) -> Result<Option<(Vec<f64>, Vec<f64>, usize)>> {
        let n = z.len();
        let mut prev_norm = f64::INFINITY;
        for iter in 1..=self.cfg.max_newton_iters {
            let fz = self.rhs(t_s, &z)?;
            let resid: Vec<f64> = (0..n).map(|i| base[i] + D * h * fz[i] - z[i]).collect();
            let delta = match self.solve(&resid) {
                Some(d) => d,
                None => return Ok(None),
            };
            for i in 0..n {
                z[i] += delta[i];
            }
            let norm = self.weights.norm(&delta, y_ref, &z);
            if !norm.is_finite() {
                return Ok(None);
            }
            if norm <= 1e-3 || (iter > 1 && norm <= 0.1 && norm / prev_norm < 0.5) {
                let fz = self.rhs(t_s, &z)?;
                return Ok(Some((z, fz, iter)));
            }
            if iter > 1 && norm > 2.0 * prev_norm {
                return Ok(None);
            }
            prev_norm = norm;
        }
        Ok(None)
    }

    fn step(&mut self, t: f64, y: &[f64], f0: &[f64], h: f64) -> Result<StepOutcome> {
        let n = y.len();
        self.factor(h)?;
        let base2: Vec<f64> = (0..n).map(|i| y[i] + D * h * f0[i]).collect();
        let guess2: Vec<f64> = (0..n).map(|i| y[i] + GAMMA * h * f0[i]).collect();
        let (z2, f2, it2) = match self.newton(t + GAMMA * h, h, &base2, guess2, y)? {
            Some(v) => v,
            None => return Ok(StepOutcome::NewtonFailed),
        };
        let base3: Vec<f64> = (0..n).map(|i| y[i] + W * h * (f0[i] + f2[i])).collect();
        let guess3: Vec<f64> = (0..n).map(|i| z2[i] + (1.0 - GAMMA) * h * f2[i]).collect();
        let (y1, f1, it3) = match self.newton(t + h, h, &base3, guess3, y)? {
            Some(v) => v,
            None => return Ok(StepOutcome::NewtonFailed),
        };
        let c1 = (4.0 * W - 1.0) / 3.0;
        let c2 = -1.0 / 3.0;
        let c3 = 2.0 * D / 3.0;
        let raw: Vec<f64> = (0..n).map(|i| h * (c1 * f0[i] + c2 * f2[i] + c3 * f1[i])).collect();
        let filtered = self.solve(&raw).unwrap_or(raw);
        let err = self.weights.norm(&filtered, y, &y1);
        Ok(StepOutcome::Converged { y: y1, f: f1, err, max_iters: it2.max(it3) })
    }
}

/// Integrates `sys` from `t0` to `t1`, localizing events and restarting
/// after each one.
pub fn integrate<S: HybridSystem>(sys: &mut S, x0: &[f64], t0: f64, t1: f64, cfg: &SolverConfig) -> Result<Solution> {
    cfg.validate()?;
    if !(t1 >= t0) {
        return Err(TesError::invalid("t_span", format!("end {t1} precedes start {t0}")));
    }
    let start = Instant::now();
    let n = sys.dim();
    if x0.len() != n {
        return Err(TesError::invalid("x0", format!("expected {n} states, got {}", x0.len())));
    }
    let atol: Vec<f64> = (0..n)
        .map(|i| match sys.state_class(i) {
            StateClass::Enthalpy => cfg.atol_enthalpy,
            StateClass::Fraction => cfg.atol_soc,
        })
        .collect();
    let h_max = cfg.max_step.unwrap_or(0.1 * (t1 - t0)).max(cfg.min_step);

    let mut traj = Trajectory::new(n);
    let mut events = Vec::new();
    let mut stats = RunStats::default();

    let mut t = t0;
    let mut x = x0.to_vec();
    sys.project(&mut x);
    traj.push(t, &x, sys.label());
    if t1 == t0 {
        stats.t_comp_s = start.elapsed().as_secs_f64();
        return Ok(Solution { trajectory: traj, events, stats });
    }

    let mut next_out = t0 + cfg.output_interval;
    let mut g_prev = vec![0.0; sys.n_events()];
    sys.events(t, &x, &mut g_prev);

    // The stepper borrows the system immutably; it is rebuilt after each
    // discrete update.
    let mut h = cfg.initial_step.unwrap_or(0.0);
    let mut f;
    let mut need_jac = true;
    let mut tmp = vec![0.0; n];

    loop {
        let mut st = Stepper {
            sys: &*sys,
            cfg,
            weights: Weights { atol: atol.clone(), rtol: cfg.rtol },
            stats: std::mem::take(&mut stats),
            jac: None,
            lu: None,
        };
        f = st.rhs(t, &x)?;
        if h <= 0.0 {
            let d0 = st.weights.norm(&x, &x, &x);
            let d1 = st.weights.norm(&f, &x, &x);
            h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        }
        h = h.min(h_max).max(cfg.min_step);

        // Advance until an event, a breakpoint or the end.
        let mut handled: Option<(Vec<usize>, bool)> = None;
        while t < t1 {
            let t_stop = match sys.next_breakpoint(t) {
                Some(b) if b > t && b < t1 => b,
                _ => t1,
            };
            let mut h_try = h.min(t_stop - t);
            if t + h_try > t_stop || t_stop - (t + h_try) < 1e-12 * t_stop.abs().max(1.0) {
                h_try = t_stop - t;
            }
            if need_jac || st.jac.is_none() {
                st.refresh_jacobian(t, &x, &f)?;
                need_jac = false;
            }
            let outcome = st.step(t, &x, &f, h_try)?;
            st.stats.n_steps += 1;
            let (y1, f1, err, iters) = match outcome {
                StepOutcome::NewtonFailed => {
                    st.stats.rejected += 1;
                    st.stats.newton_failures += 1;
                    st.refresh_jacobian(t, &x, &f)?;
                    h = 0.25 * h_try;
                    if h < cfg.min_step {
                        return Err(TesError::NewtonFailure { t });
                    }
                    continue;
                }
                StepOutcome::Converged { y, f, err, max_iters } => (y, f, err, max_iters),
            };
            if err > 1.0 {
                st.stats.rejected += 1;
                h = h_try * (0.9 * err.powf(-1.0 / 3.0)).clamp(0.1, 0.9);
                if h < cfg.min_step {
                    return Err(TesError::StepUnderflow { t, h, state: x.clone() });
                }
                continue;
            }
            st.stats.accepted += 1;
            let t_new = if h_try == t_stop - t { t_stop } else { t + h_try };
            let mut y1p = y1.clone();
            sys.project(&mut y1p);

            // Event scan over the accepted step.
            let mut g_new = vec![0.0; g_prev.len()];
            sys.events(t_new, &y1p, &mut g_new);
            let crossed: Vec<usize> = (0..g_prev.len())
                .filter(|&i| sys.event_direction(i).crossed(g_prev[i], g_new[i]))
                .collect();
            if !crossed.is_empty() {
                let (t_ev, fired) = localize(&*sys, &g_prev, t, h_try, &x, &f, &y1, &f1, cfg.event_tol, &mut tmp);
                let mut x_ev = vec![0.0; n];
                hermite(t, h_try, &x, &f, &y1, &f1, t_ev, &mut x_ev);
                sys.project(&mut x_ev);
                emit_outputs(&mut traj, &mut next_out, cfg.output_interval, t, h_try, &x, &f, &y1, &f1, t_ev, true, sys.label(), &mut tmp);
                t = t_ev;
                x = x_ev;
                handled = Some((fired, false));
                h = h_try.min(h_max);
                break;
            }
            emit_outputs(&mut traj, &mut next_out, cfg.output_interval, t, h_try, &x, &f, &y1, &f1, t_new, false, sys.label(), &mut tmp);
            t = t_new;
            x = y1p;
            f = f1;
            g_prev = g_new;
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-1.0 / 3.0)).clamp(0.2, 5.0) };
            h = (h_try * factor).min(h_max);
            if iters > 4 {
                need_jac = true;
            }
            if t == t_stop && t < t1 {
                handled = Some((Vec::new(), true));
                break;
            }
        }
        stats = st.stats;

        let Some((fired, _breakpoint)) = handled else { break };
        let label_before = sys.label();
        traj.push(t, &x, label_before);
        let reason = sys.on_event(t, &mut x, &fired)?;
        sys.project(&mut x);
        let label_after = sys.label();
        traj.push(t, &x, label_after);
        if !fired.is_empty() || reason.is_some() {
            stats.events += 1;
            events.push(EventRecord {
                t,
                fired,
                label_before,
                label_after,
                reason: reason.unwrap_or_default(),
            });
        }
        g_prev = vec![0.0; sys.n_events()];
        sys.events(t, &x, &mut g_prev);
        need_jac = true;
        // Output samples already emitted up to t; keep the grid aligned.
        while next_out <= t {
            next_out += cfg.output_interval;
        }
    }

    if *traj.times.last().unwrap() < t1 || traj.len() == 1 {
        traj.push(t, &x, sys.label());
    }
    stats.t_comp_s = start.elapsed().as_secs_f64();
    Ok(Solution { trajectory: traj, events, stats })
}

#[allow(clippy::too_many_arguments)]
fn emit_outputs(
    traj: &mut Trajectory,
    next_out: &mut f64,
    dt_out: f64,
    t0: f64,
    h: f64,
    y0: &[f64],
    f0: &[f64],
    y1: &[f64],
    f1: &[f64],
    t_end: f64,
    exclusive_end: bool,
    label: u32,
    tmp: &mut [f64],
) {
    while *next_out < t_end || (!exclusive_end && *next_out <= t_end) {
        let tq = *next_out;
        if tq == t0 + h {
            traj.push(tq, y1, label);
        } else {
            hermite(t0, h, y0, f0, y1, f1, tq, tmp);
            traj.push(tq, tmp, label);
        }
        *next_out += dt_out;
    }
}

/// Bisects the earliest crossing inside `[t0, t0 + h]`. Returns the upper
/// bracket and every event crossed by then.
#[allow(clippy::too_many_arguments)]
fn localize<S: HybridSystem>(
    sys: &S,
    g0: &[f64],
    t0: f64,
    h: f64,
    y0: &[f64],
    f0: &[f64],
    y1: &[f64],
    f1: &[f64],
    tol: f64,
    tmp: &mut [f64],
) -> (f64, Vec<usize>) {
    let mut g = vec![0.0; g0.len()];
    let crossed_at = |tq: f64, g: &mut Vec<f64>, tmp: &mut [f64]| -> Vec<usize> {
        hermite(t0, h, y0, f0, y1, f1, tq, tmp);
        sys.events(tq, tmp, g);
        (0..g0.len()).filter(|&i| sys.event_direction(i).crossed(g0[i], g[i])).collect()
    };
    let mut lo = t0;
    let mut hi = t0 + h;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if crossed_at(mid, &mut g, tmp).is_empty() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut fired = crossed_at(hi, &mut g, tmp);
    if fired.is_empty() {
        // Interpolant and endpoint disagree; fall back to the step end.
        hi = t0 + h;
        fired = crossed_at(hi, &mut g, tmp);
    }
    (hi, fired)
}

/// Fixed-step TR-BDF2 without error control or events, for order studies.
pub fn integrate_fixed<S: HybridSystem>(sys: &S, x0: &[f64], t0: f64, t1: f64, steps: usize) -> Result<Vec<f64>> {
    let cfg = SolverConfig { max_newton_iters: 50, ..SolverConfig::default() };
    let n = x0.len();
    let mut st = Stepper {
        sys,
        cfg: &cfg,
        weights: Weights { atol: vec![1e-14; n], rtol: 1e-14 },
        stats: RunStats::default(),
        jac: None,
        lu: None,
    };
    let h = (t1 - t0) / steps as f64;
    let mut x = x0.to_vec();
    let mut t = t0;
    for _ in 0..steps {
        let f = st.rhs(t, &x)?;
        st.refresh_jacobian(t, &x, &f)?;
        match st.step(t, &x, &f, h)? {
            StepOutcome::Converged { y, .. } => x = y,
            StepOutcome::NewtonFailed => return Err(TesError::NewtonFailure { t }),
        }
        t += h;
    }
    Ok(x)
}
