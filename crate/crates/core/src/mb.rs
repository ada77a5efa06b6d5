//! Switched moving-boundary model.
//!
//! Six states `[h_wf, h_inner_wall, h_S, SOC, h_L, h_outer_wall]`: one lumped
//! solid region, one lumped liquid region and the interface between them,
//! whose state is the solid mass fraction. A four-mode state machine gates
//! the PCM-side edges and selects the region layout:
//!
//! | mode | layout (inner → outer)        | edges on        |
//! |------|-------------------------------|-----------------|
//! | 1    | liquid                        | P4 P8           |
//! | 2    | solid, interface, liquid      | P3 P5 P6 P8     |
//! | 3    | solid                         | P3 P7           |
//! | 4    | liquid, interface, solid      | P4 P5 P6 P7     |
//!
//! The interface vertex sits at `T_sat` and has the negative capacitance
//! `M (h_S − h_L)`, so its state rises as energy leaves the PCM.

use std::fmt;

use serde::Serialize;

use crate::error::Result;
use crate::geometry::{equal_volume_mid, TesParameters, WallResistances};
use crate::graph::{GraphBuilder, ThermalGraph};
use crate::thermo::{pcm_enthalpy, pcm_temperature, single_phase_enthalpy, single_phase_temperature, Phase};

pub use crate::fg::{INPUT_MDOT, INPUT_NAMES, INPUT_T_AIR, INPUT_T_IN};

/// Lower/upper bound applied to SOC inside capacitance and resistance
/// evaluation only.
pub const SOC_EPS: f64 = 1e-6;

/// Smallest radial extent given to a region when computing resistances, m.
pub const MIN_REGION_THICKNESS: f64 = 1e-8;

pub const IDX_WF: usize = 0;
pub const IDX_INNER_WALL: usize = 1;
pub const IDX_SOLID: usize = 2;
pub const IDX_SOC: usize = 3;
pub const IDX_LIQUID: usize = 4;
pub const IDX_OUTER_WALL: usize = 5;

pub const STATE_IDS: [&str; 6] = ["wf", "inner_wall", "solid", "interface", "liquid", "outer_wall"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum FsmMode {
    AllLiquid = 1,
    Freezing = 2,
    AllSolid = 3,
    Melting = 4,
}

impl FsmMode {
    pub fn number(self) -> u32 {
        self as u32
    }

    pub fn from_number(n: u32) -> Option<FsmMode> {
        match n {
            1 => Some(FsmMode::AllLiquid),
            2 => Some(FsmMode::Freezing),
            3 => Some(FsmMode::AllSolid),
            4 => Some(FsmMode::Melting),
            _ => None,
        }
    }

    /// Arcs of the state machine.
    pub fn can_transition_to(self, next: FsmMode) -> bool {
        use FsmMode::*;
        matches!(
            (self, next),
            (AllLiquid, Freezing) | (Freezing, AllSolid) | (AllSolid, Melting) | (Melting, AllLiquid) | (Freezing, Melting) | (Melting, Freezing)
        )
    }
}

impl fmt::Display for FsmMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

/// On/off state of `P3 ..= P8` for a mode.
pub fn gate_edges(mode: FsmMode) -> [bool; 6] {
    match mode {
        FsmMode::AllLiquid => [false, true, false, false, false, true],
        FsmMode::Freezing => [true, false, true, true, false, true],
        FsmMode::AllSolid => [true, false, false, false, true, false],
        FsmMode::Melting => [false, true, true, true, true, false],
    }
}

/// Gate vector over every graph edge `[e1 .. e8, in1, in2]`.
pub fn gate_vector(mode: FsmMode) -> [bool; 10] {
    let g = gate_edges(mode);
    [true, true, g[0], g[1], g[2], g[3], g[4], g[5], true, true]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TransitionReason {
    SurfaceBelowSaturation,
    SurfaceAboveSaturation,
    FullySolid,
    FullyLiquid,
}

impl fmt::Display for TransitionReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TransitionReason::SurfaceBelowSaturation => "surface_below_saturation",
            TransitionReason::SurfaceAboveSaturation => "surface_above_saturation",
            TransitionReason::FullySolid => "fully_solid",
            TransitionReason::FullyLiquid => "fully_liquid",
        };
        f.write_str(s)
    }
}

/// One evaluation of the switching rules. SOC bounds take priority over a
/// surface-temperature crossing in the same instant.
pub fn fsm_step(mode: FsmMode, soc: f64, t_si: f64, t_sat: f64) -> (FsmMode, Option<TransitionReason>) {
    use FsmMode::*;
    use TransitionReason::*;
    match mode {
        AllLiquid if t_si < t_sat => (Freezing, Some(SurfaceBelowSaturation)),
        Freezing if soc >= 1.0 => (AllSolid, Some(FullySolid)),
        Freezing if t_si > t_sat => (Melting, Some(SurfaceAboveSaturation)),
        AllSolid if t_si > t_sat => (Melting, Some(SurfaceAboveSaturation)),
        Melting if soc <= 0.0 => (AllLiquid, Some(FullyLiquid)),
        Melting if t_si < t_sat => (Freezing, Some(SurfaceBelowSaturation)),
        m => (m, None),
    }
}

/// Region radii (m) for the current mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MbGeometry {
    pub r_pcm_inner: f64,
    pub r_pcm_outer: f64,
    pub r_interface: f64,
    pub r_solid_mid: f64,
    pub r_liquid_mid: f64,
}

/// Per-evaluation context: mode, geometry and the PCM-side resistances
/// `R3 ..= R8` (°C/kW, indexed 0..6); entries for gated-off edges are NaN.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MbContext {
    pub mode: FsmMode,
    pub geometry: MbGeometry,
    pub resistances: [f64; 6],
}

impl MbContext {
    pub fn r(&self, edge: usize) -> f64 {
        self.resistances[edge - 3]
    }
}

pub struct MbModel {
    params: TesParameters,
    walls: WallResistances,
    graph: ThermalGraph<MbContext>,
}

impl MbModel {
    pub fn build(params: &TesParameters) -> Result<MbModel> {
        params.validate()?;
        let pcm = params.pcm;
        let wf = params.working_fluid;
        let inner = params.inner_wall;
        let outer = params.outer_wall;
        let m_wf = params.fluid_mass();
        let m_inn = params.inner_wall_mass();
        let m_out = params.outer_wall_mass();
        let m_tot = params.pcm_mass;
        let walls = params.wall_resistances();
        let cp_wf = wf.cp;
        let r2 = walls.fluid_to_wall();
        let r_air = walls.outer_to_air();

        let conduct = |edge: usize| -> crate::graph::PowerLaw<MbContext> {
            Box::new(move |a, ctx: &MbContext| (a.tail_temp - a.head_temp) / ctx.r(edge))
        };
        let c4_floor = m_tot * SOC_EPS * pcm.h_f;

        let graph = GraphBuilder::<MbContext>::new()
            .dynamic_vertex(
                "wf",
                Box::new(move |_, _| m_wf),
                Box::new(move |h| single_phase_temperature(h, &wf)),
                Box::new(move |x, _| m_wf * x[IDX_WF]),
            )
            .dynamic_vertex(
                "inner_wall",
                Box::new(move |_, _| m_inn),
                Box::new(move |h| single_phase_temperature(h, &inner)),
                Box::new(move |x, _| m_inn * x[IDX_INNER_WALL]),
            )
            .dynamic_vertex(
                "solid",
                Box::new(move |x, _| m_tot * x[IDX_SOC].clamp(SOC_EPS, 1.0 - SOC_EPS)),
                Box::new(move |h| pcm_temperature(h, &pcm)),
                Box::new(move |x, _| m_tot * x[IDX_SOC].clamp(0.0, 1.0) * x[IDX_SOLID]),
            )
            .dynamic_vertex(
                "interface",
                Box::new(move |x, _| (m_tot * (x[IDX_SOLID] - x[IDX_LIQUID])).min(-c4_floor)),
                Box::new(move |_| pcm.t_sat),
                Box::new(|_, _| 0.0),
            )
            .dynamic_vertex(
                "liquid",
                Box::new(move |x, _| m_tot * (1.0 - x[IDX_SOC].clamp(SOC_EPS, 1.0 - SOC_EPS))),
                Box::new(move |h| pcm_temperature(h, &pcm)),
                Box::new(move |x, _| m_tot * (1.0 - x[IDX_SOC].clamp(0.0, 1.0)) * x[IDX_LIQUID]),
            )
            .dynamic_vertex(
                "outer_wall",
                Box::new(move |_, _| m_out),
                Box::new(move |h| single_phase_temperature(h, &outer)),
                Box::new(move |x, _| m_out * x[IDX_OUTER_WALL]),
            )
            .sink_vertex("outlet", Box::new(move |h| single_phase_temperature(h, &wf)))
            .edge("e1", "wf", "outlet", Box::new(move |a, _| a.virtual_input * cp_wf * a.tail_temp))
            .edge("e2", "inner_wall", "wf", Box::new(move |a, _| (a.tail_temp - a.head_temp) / r2))
            .edge("e3", "solid", "inner_wall", conduct(3))
            .edge("e4", "liquid", "inner_wall", conduct(4))
            .edge("e5", "interface", "solid", conduct(5))
            .edge("e6", "liquid", "interface", conduct(6))
            .edge("e7", "outer_wall", "solid", conduct(7))
            .edge("e8", "outer_wall", "liquid", conduct(8))
            .source_edge("in1", "wf", Box::new(move |a, _| a.inputs[INPUT_MDOT] * cp_wf * a.inputs[INPUT_T_IN]))
            .source_edge("in2", "outer_wall", Box::new(move |a, _| (a.inputs[INPUT_T_AIR] - a.head_temp) / r_air))
            .inputs(3)
            .link_input("e1", INPUT_MDOT)
            .build()?;
        Ok(MbModel {
            params: *params,
            walls,
            graph,
        })
    }

    pub fn params(&self) -> &TesParameters {
        &self.params
    }

    pub fn walls(&self) -> &WallResistances {
        &self.walls
    }

    pub fn graph(&self) -> &ThermalGraph<MbContext> {
        &self.graph
    }

    pub fn n_states(&self) -> usize {
        6
    }

    pub fn total_mass(&self) -> f64 {
        self.params.pcm_mass
    }

    /// Region radii for `mode` at solid fraction `soc`.
    pub fn geometry(&self, soc: f64, mode: FsmMode) -> MbGeometry {
        let g = &self.params.geometry;
        let pcm = &self.params.pcm;
        let r3 = g.r_pcm_inner();
        let r_out = g.r_pcm_outer();
        let s = soc.clamp(SOC_EPS, 1.0 - SOC_EPS);
        let lo = r3 + MIN_REGION_THICKNESS;
        let hi = r_out - MIN_REGION_THICKNESS;
        let inner_region_radius = |mass: f64, rho: f64| (r3 * r3 + mass / (rho * std::f64::consts::PI * g.length)).sqrt().clamp(lo, hi);
        let mid_all = equal_volume_mid(r3, r_out);
        match mode {
            FsmMode::AllLiquid => MbGeometry {
                r_pcm_inner: r3,
                r_pcm_outer: r_out,
                r_interface: r3,
                r_solid_mid: r3,
                r_liquid_mid: mid_all,
            },
            FsmMode::AllSolid => MbGeometry {
                r_pcm_inner: r3,
                r_pcm_outer: r_out,
                r_interface: r_out,
                r_solid_mid: mid_all,
                r_liquid_mid: r_out,
            },
            FsmMode::Freezing => {
                let r_int = inner_region_radius(self.params.pcm_mass * s, pcm.rho_solid);
                MbGeometry {
                    r_pcm_inner: r3,
                    r_pcm_outer: r_out,
                    r_interface: r_int,
                    r_solid_mid: equal_volume_mid(r3, r_int),
                    r_liquid_mid: equal_volume_mid(r_int, r_out),
                }
            }
            FsmMode::Melting => {
                let r_int = inner_region_radius(self.params.pcm_mass * (1.0 - s), pcm.rho_liquid);
                MbGeometry {
                    r_pcm_inner: r3,
                    r_pcm_outer: r_out,
                    r_interface: r_int,
                    r_liquid_mid: equal_volume_mid(r3, r_int),
                    r_solid_mid: equal_volume_mid(r_int, r_out),
                }
            }
        }
    }

    /// `R3 ..= R8` for the gated-on edges of `mode`, °C/kW.
    pub fn resistances(&self, geom: &MbGeometry, mode: FsmMode) -> [f64; 6] {
        let g = &self.params.geometry;
        let pcm = &self.params.pcm;
        let w = &self.walls;
        let ks = pcm.k(Phase::Solid);
        let kl = pcm.k(Phase::Liquid);
        let (r3, r_out, r_int) = (geom.r_pcm_inner, geom.r_pcm_outer, geom.r_interface);
        let mut r = [f64::NAN; 6];
        match mode {
            FsmMode::AllLiquid => {
                let m = geom.r_liquid_mid;
                r[1] = w.inner_wall_outer_half + g.conduction(r3, m, kl);
                r[5] = g.conduction(m, r_out, kl) + w.outer_wall_inner_half;
            }
            FsmMode::AllSolid => {
                let m = geom.r_solid_mid;
                r[0] = w.inner_wall_outer_half + g.conduction(r3, m, ks);
                r[4] = g.conduction(m, r_out, ks) + w.outer_wall_inner_half;
            }
            FsmMode::Freezing => {
                let (sm, lm) = (geom.r_solid_mid, geom.r_liquid_mid);
                r[0] = w.inner_wall_outer_half + g.conduction(r3, sm, ks);
                r[2] = g.conduction(sm, r_int, ks);
                r[3] = g.conduction(r_int, lm, kl);
                r[5] = g.conduction(lm, r_out, kl) + w.outer_wall_inner_half;
            }
            FsmMode::Melting => {
                let (sm, lm) = (geom.r_solid_mid, geom.r_liquid_mid);
                r[1] = w.inner_wall_outer_half + g.conduction(r3, lm, kl);
                r[3] = g.conduction(lm, r_int, kl);
                r[2] = g.conduction(r_int, sm, ks);
                r[4] = g.conduction(sm, r_out, ks) + w.outer_wall_inner_half;
            }
        }
        r
    }

    pub fn context(&self, x: &[f64], mode: FsmMode) -> MbContext {
        let geometry = self.geometry(x[IDX_SOC], mode);
        MbContext {
            mode,
            geometry,
            resistances: self.resistances(&geometry, mode),
        }
    }

    pub fn sink_state(&self, x: &[f64]) -> [f64; 1] {
        [x[IDX_WF]]
    }

    pub fn rhs(&self, x: &[f64], u: &[f64], mode: FsmMode, dx: &mut [f64]) -> Result<()> {
        let ctx = self.context(x, mode);
        self.graph.assemble_rhs(x, &self.sink_state(x), u, &ctx, &gate_vector(mode), dx)
    }

    /// Edge powers `[P1 .. P8, P_in1, P_in2]`, kW; gated-off entries are 0.
    pub fn power_flows(&self, x: &[f64], u: &[f64], mode: FsmMode) -> Result<Vec<f64>> {
        let ctx = self.context(x, mode);
        let sink = self.sink_state(x);
        let temps = self.graph.temperatures(x, &sink);
        self.graph.edge_powers(x, &sink, u, &ctx, &gate_vector(mode), &temps)
    }

    pub fn temperatures(&self, x: &[f64]) -> Vec<f64> {
        let mut t = self.graph.temperatures(x, &self.sink_state(x));
        t.truncate(6);
        t
    }

    /// Temperature at the inner-wall/PCM surface, from the wall temperature
    /// and the power on the mode's inner PCM edge.
    pub fn surface_temperature(&self, x: &[f64], mode: FsmMode) -> f64 {
        let ctx = self.context(x, mode);
        let t_inn = single_phase_temperature(x[IDX_INNER_WALL], &self.params.inner_wall);
        let (edge, region) = match mode {
            FsmMode::Freezing | FsmMode::AllSolid => (3, IDX_SOLID),
            FsmMode::AllLiquid | FsmMode::Melting => (4, IDX_LIQUID),
        };
        let t_region = pcm_temperature(x[region], &self.params.pcm);
        let power = (t_region - t_inn) / ctx.r(edge);
        t_inn + self.walls.inner_wall_outer_half * power
    }

    pub fn soc(&self, x: &[f64]) -> f64 {
        x[IDX_SOC]
    }

    pub fn stored_energy(&self, x: &[f64]) -> f64 {
        // Context does not enter any energy law.
        let ctx = self.context(x, FsmMode::AllLiquid);
        self.graph.stored_energy(x, &ctx)
    }

    pub fn boundary_power(&self, x: &[f64], u: &[f64], mode: FsmMode) -> Result<f64> {
        Ok(self.graph.boundary_power(&self.power_flows(x, u, mode)?))
    }

    /// State and mode with every vertex at temperature `t`.
    pub fn uniform_state(&self, t: f64) -> Result<(Vec<f64>, FsmMode)> {
        let p = &self.params;
        let pcm = &p.pcm;
        let mut x = vec![0.0; 6];
        x[IDX_WF] = single_phase_enthalpy(t, &p.working_fluid);
        x[IDX_INNER_WALL] = single_phase_enthalpy(t, &p.inner_wall);
        x[IDX_OUTER_WALL] = single_phase_enthalpy(t, &p.outer_wall);
        let mode = if t < pcm.t_sat {
            x[IDX_SOLID] = pcm_enthalpy(t, Phase::Solid, pcm)?;
            x[IDX_SOC] = 1.0;
            x[IDX_LIQUID] = pcm.h_f;
            FsmMode::AllSolid
        } else {
            x[IDX_SOLID] = 0.0;
            x[IDX_SOC] = 0.0;
            x[IDX_LIQUID] = pcm_enthalpy(t, Phase::Liquid, pcm)?;
            FsmMode::AllLiquid
        };
        Ok((x, mode))
    }
}

/// Resets the enthalpy of a region that is born or vanishes at a
/// transition; the solid fraction is never touched.
pub fn on_transition_reinit(old: FsmMode, new: FsmMode, x: &[f64], h_f: f64) -> Vec<f64> {
    use FsmMode::*;
    let mut y = x.to_vec();
    match (old, new) {
        (AllLiquid, Freezing) | (Melting, AllLiquid) => y[IDX_SOLID] = 0.0,
        (AllSolid, Melting) | (Freezing, AllSolid) => y[IDX_LIQUID] = h_f,
        _ => {}
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn model() -> MbModel {
        MbModel::build(&TesParameters::default()).unwrap()
    }

    #[test]
    fn graph_shape() {
        let m = model();
        let inc = m.graph().incidence();
        assert_eq!(inc.n_dynamic, 6);
        assert_eq!(inc.m_bar().nrows(), 6);
        assert_eq!(inc.m_sink().nrows(), 1);
        assert_eq!(m.graph().n_edges(), 10);
        for j in 0..8 {
            assert_eq!(inc.matrix.column(j).sum(), 0.0, "edge e{}", j + 1);
        }
    }

    #[test]
    fn gating_table() {
        use FsmMode::*;
        let on = |m| gate_edges(m).iter().filter(|g| **g).count();
        assert_eq!(gate_edges(AllLiquid), [false, true, false, false, false, true]);
        assert_eq!(gate_edges(Freezing), [true, false, true, true, false, true]);
        assert_eq!(gate_edges(AllSolid), [true, false, false, false, true, false]);
        assert_eq!(gate_edges(Melting), [false, true, true, true, true, false]);
        assert_eq!([on(AllLiquid), on(Freezing), on(AllSolid), on(Melting)], [2, 4, 2, 4]);
    }

    #[test]
    fn capacitances_at_full_solid() {
        let m = model();
        let pcm = m.params().pcm;
        let x = [0.0, 0.0, 0.0, 1.0, pcm.h_f, 0.0];
        let ctx = m.context(&x, FsmMode::AllSolid);
        let c = m.graph().capacitances(&x, &ctx);
        assert_relative_eq!(c[2], 1.90, max_relative = 1e-5);
        assert_relative_eq!(c[3], -634.6, max_relative = 1e-12);
        assert!(c[4] > 0.0 && c[4] < 1e-5);
    }

    #[test]
    fn interface_capacitance_negative() {
        let m = model();
        let x = [0.0, 0.0, -20.0, 0.3, 400.0, 0.0];
        let c = m.graph().capacitances(&x, &m.context(&x, FsmMode::Freezing));
        assert!(c[3] < 0.0);
    }

    #[test]
    fn interface_radius_half_frozen() {
        let m = model();
        let g = m.geometry(0.5, FsmMode::Freezing);
        let expect = (0.0068f64.powi(2) + 0.95 / (916.0 * std::f64::consts::PI)).sqrt();
        assert_relative_eq!(g.r_interface, expect, max_relative = 1e-12);
        assert!((g.r_interface - 0.019400).abs() < 5e-7);
    }

    #[test]
    fn vanishing_solid_collapses_to_inner_face() {
        let m = model();
        let g = m.geometry(0.0, FsmMode::Freezing);
        let r3 = m.params().geometry.r_pcm_inner();
        assert!(g.r_interface - r3 < 1e-7);
        let r = m.resistances(&g, FsmMode::Freezing);
        assert!((r[0] - m.walls().inner_wall_outer_half) / r[0] < 2e-2);
    }

    #[test]
    fn interface_radius_monotone_in_freezing() {
        let m = model();
        let mut prev = 0.0;
        for k in 1..100 {
            let r = m.geometry(k as f64 / 100.0, FsmMode::Freezing).r_interface;
            assert!(r >= prev);
            prev = r;
        }
        let a = m.geometry(0.2, FsmMode::Freezing).r_interface;
        let b = m.geometry(0.3, FsmMode::Freezing).r_interface;
        assert!(b > a);
    }

    #[test]
    fn surface_temperature_signs() {
        let m = model();
        let cu = m.params().inner_wall;
        // Liquid hotter than the wall: heat flows inward, surface above wall.
        let x = [0.0, 2.0 * cu.cp, 0.0, 0.0, 400.0, 0.0];
        let t_inn = 2.0;
        let t_si = m.surface_temperature(&x, FsmMode::AllLiquid);
        assert!(t_si > t_inn);
        // No power on P3: surface equals wall temperature.
        let x = [0.0, 0.0, 0.0, 1.0, 334.0, 0.0];
        assert_eq!(m.surface_temperature(&x, FsmMode::AllSolid), 0.0);
    }

    #[test]
    fn fsm_rules() {
        use FsmMode::*;
        assert_eq!(fsm_step(Freezing, 1.0, -3.0, 0.0).0, AllSolid);
        assert_eq!(fsm_step(Melting, 0.0, 3.0, 0.0).0, AllLiquid);
        assert_eq!(fsm_step(Freezing, 0.4, 0.1, 0.0).0, Melting);
        assert_eq!(fsm_step(Melting, 0.4, -0.1, 0.0).0, Freezing);
        assert_eq!(fsm_step(AllLiquid, 0.0, -0.1, 0.0).0, Freezing);
        assert_eq!(fsm_step(AllSolid, 1.0, 0.1, 0.0).0, Melting);
        assert_eq!(fsm_step(AllLiquid, 0.0, 0.1, 0.0), (AllLiquid, None));
        // SOC bound wins over a simultaneous surface crossing.
        assert_eq!(fsm_step(Freezing, 1.0, 0.5, 0.0), (AllSolid, Some(TransitionReason::FullySolid)));
        assert_eq!(fsm_step(Melting, 0.0, -0.5, 0.0), (AllLiquid, Some(TransitionReason::FullyLiquid)));
        for a in [AllLiquid, Freezing, AllSolid, Melting] {
            for (soc, t) in [(0.0, -1.0), (0.0, 1.0), (1.0, -1.0), (1.0, 1.0), (0.5, -1.0), (0.5, 1.0)] {
                let (b, reason) = fsm_step(a, soc, t, 0.0);
                if reason.is_some() {
                    assert!(a.can_transition_to(b), "{a} -> {b}");
                }
            }
        }
    }

    #[test]
    fn reinit_rules() {
        use FsmMode::*;
        let h_f = 334.0;
        let x = [1.0, 2.0, -5.0, 0.0, 400.0, 3.0];
        let y = on_transition_reinit(AllLiquid, Freezing, &x, h_f);
        assert_eq!((y[IDX_SOLID], y[IDX_SOC], y[IDX_LIQUID]), (0.0, 0.0, 400.0));
        let x = [1.0, 2.0, -30.0, 1.0, 350.0, 3.0];
        assert_eq!(on_transition_reinit(AllSolid, Melting, &x, h_f)[IDX_LIQUID], 334.0);
        let x = [1.0, 2.0, -10.0, 0.4, 340.0, 3.0];
        assert_eq!(on_transition_reinit(Freezing, Melting, &x, h_f), x.to_vec());
        assert_eq!(on_transition_reinit(Melting, Freezing, &x, h_f), x.to_vec());
    }

    #[test]
    fn frozen_states_in_all_liquid() {
        let m = model();
        let (x, mode) = m.uniform_state(18.0).unwrap();
        let mut x = x;
        x[IDX_INNER_WALL] = -5.0 * m.params().inner_wall.cp;
        let mut dx = [0.0; 6];
        m.rhs(&x, &[-18.0, 18.0, 0.1], mode, &mut dx).unwrap();
        assert_eq!(dx[IDX_SOLID], 0.0);
        assert_eq!(dx[IDX_SOC], 0.0);
        assert!(dx[IDX_LIQUID] < 0.0);
    }

    #[test]
    fn freezing_raises_soc() {
        let m = model();
        // Solid below saturation, liquid at saturation, wall cold.
        let x = [-18.0 * 3.4, -15.0 * 0.39, -20.0, 0.3, 334.0, 0.0];
        let mut dx = [0.0; 6];
        m.rhs(&x, &[-18.0, 18.0, 0.1], FsmMode::Freezing, &mut dx).unwrap();
        assert!(dx[IDX_SOC] > 0.0);
    }
}
