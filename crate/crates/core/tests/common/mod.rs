#![allow(dead_code)]

use std::f64::consts::PI;
use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};
use tes_core::fg::FgModel;
use tes_core::geometry::TesParameters;
use tes_core::scenario::Scenario;
use tes_core::solver::{Direction, HybridSystem};
use tes_core::thermo::{pcm_enthalpy, single_phase_enthalpy, Phase};
use tes_core::Result;

pub fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(format!("{name}.toml"))
}

pub fn load(name: &str) -> Scenario {
    Scenario::load(&scenario_path(name)).unwrap()
}

pub const SHIPPED: [&str; 4] = ["fig2_sweep", "fig5_complete_cycles", "fig6_partial_cycles", "null"];

/// ẋ = −x
pub struct Linear;

impl HybridSystem for Linear {
    fn dim(&self) -> usize {
        1
    }
    fn rhs(&self, _t: f64, x: &[f64], dx: &mut [f64]) -> Result<()> {
        dx[0] = -x[0];
        Ok(())
    }
}

/// ẋ = λ (cos t − x)
pub struct StiffForced {
    pub lambda: f64,
}

impl StiffForced {
    pub fn particular(&self, t: f64) -> f64 {
        let l = self.lambda;
        l * (l * t.cos() + t.sin()) / (l * l + 1.0)
    }
}

impl HybridSystem for StiffForced {
    fn dim(&self) -> usize {
        1
    }
    fn rhs(&self, t: f64, x: &[f64], dx: &mut [f64]) -> Result<()> {
        dx[0] = self.lambda * (t.cos() - x[0]);
        Ok(())
    }
}

/// ẏ = −y², y(0) = 1 → y = 1/(1 + t)
pub struct Riccati;

impl HybridSystem for Riccati {
    fn dim(&self) -> usize {
        1
    }
    fn rhs(&self, _t: f64, x: &[f64], dx: &mut [f64]) -> Result<()> {
        dx[0] = -x[0] * x[0];
        Ok(())
    }
}

/// Exponential decay watched by falling threshold crossings.
pub struct Thresholds {
    pub levels: Vec<f64>,
    pub seen: Vec<f64>,
}

impl Thresholds {
    pub fn new(levels: &[f64]) -> Self {
        Thresholds {
            levels: levels.to_vec(),
            seen: vec![],
        }
    }
}

impl HybridSystem for Thresholds {
    fn dim(&self) -> usize {
        1
    }
    fn rhs(&self, _t: f64, x: &[f64], dx: &mut [f64]) -> Result<()> {
        dx[0] = -x[0];
        Ok(())
    }
    fn n_events(&self) -> usize {
        self.levels.len()
    }
    fn events(&self, _t: f64, x: &[f64], g: &mut [f64]) {
        for (gi, l) in g.iter_mut().zip(&self.levels) {
            *gi = x[0] - l;
        }
    }
    fn event_direction(&self, _i: usize) -> Direction {
        Direction::Falling
    }
    fn on_event(&mut self, t: f64, _x: &mut [f64], fired: &[usize]) -> Result<Option<String>> {
        self.seen.push(t);
        Ok(Some(format!("{fired:?}")))
    }
}

/// Steady radial power (kW) through the FG network with the fluid and the
/// outer wall held at fixed temperatures and the PCM kept liquid.
pub fn fg_steady_power(params: &TesParameters, n: usize, t_fluid: f64, t_outer: f64) -> f64 {
    let model = FgModel::build(params, n).unwrap();
    let pcm = params.pcm;
    let mut x = model.uniform_state(0.5 * (t_fluid + t_outer)).unwrap();
    x[0] = single_phase_enthalpy(t_fluid, &params.working_fluid);
    x[n + 2] = single_phase_enthalpy(t_outer, &params.outer_wall);
    let free: Vec<usize> = (1..=n + 1).collect();
    let u = [t_fluid, t_outer, 0.0];
    let residual = |x: &[f64]| -> Vec<f64> {
        let p = model.power_flows(x, &u).unwrap();
        let net = model.graph().net_power_dense(&p);
        free.iter().map(|&i| net[i]).collect()
    };
    for _ in 0..4 {
        let r0 = residual(&x);
        let m = free.len();
        let mut jac = DMatrix::zeros(m, m);
        for (c, &i) in free.iter().enumerate() {
            let delta = 1e-6 * x[i].abs().max(1.0);
            let mut xp = x.clone();
            xp[i] += delta;
            let rp = residual(&xp);
            for r in 0..m {
                jac[(r, c)] = (rp[r] - r0[r]) / delta;
            }
        }
        let step = jac.lu().solve(&-DVector::from_vec(r0)).expect("nonsingular steady-state system");
        for (c, &i) in free.iter().enumerate() {
            x[i] += step[c];
        }
    }
    for i in model.pcm_range() {
        assert!(x[i] > pcm.h_f, "section {i} left the liquid phase");
    }
    let p = model.power_flows(&x, &u).unwrap();
    // e2 carries heat from the inner wall into the fluid.
    -p[model.graph().edge_index("e2").unwrap()]
}

/// Series resistance of the composite cylinder from the fluid to the
/// outer-wall mid radius, °C/kW.
pub fn analytic_series_resistance(p: &TesParameters) -> f64 {
    let g = &p.geometry;
    let l = g.length;
    let h_wf = p.working_fluid.h_conv.unwrap();
    let film = 1.0 / (2.0 * PI * g.r1 * l * h_wf);
    let copper = (g.r_pcm_inner() / g.r1).ln() / (2.0 * PI * l * p.inner_wall.k);
    let pcm = (g.r_pcm_outer() / g.r_pcm_inner()).ln() / (2.0 * PI * l * p.pcm.k_liquid);
    let pvc = (g.r_outer_wall_mid() / g.r_pcm_outer()).ln() / (2.0 * PI * l * p.outer_wall.k);
    (film + copper + pcm + pvc) * 1e3
}

/// Liquid enthalpy helper for hand-built states.
pub fn liquid(t: f64, params: &TesParameters) -> f64 {
    pcm_enthalpy(t, Phase::Liquid, &params.pcm).unwrap()
}
