//! Fixed-grid reference model: the PCM annulus split into `n` sections of
//! equal radial width, giving `n + 3` enthalpy states
//! `[h_wf, h_inner_wall, h_1 .. h_n, h_outer_wall]`.
//!
//! Section properties switch phase at the half-latent point `h = h_f / 2`;
//! outside the mushy band this agrees with the temperature-based phase.

use std::sync::Arc;

use crate::error::{Result, TesError};
use crate::geometry::{TesParameters, WallResistances};
use crate::graph::{GraphBuilder, ThermalGraph};
use crate::thermo::{pcm_enthalpy, pcm_temperature, single_phase_enthalpy, single_phase_temperature, Phase, PcmProperties};

/// Index of each system input in `u`.
pub const INPUT_T_IN: usize = 0;
pub const INPUT_T_AIR: usize = 1;
pub const INPUT_MDOT: usize = 2;
pub const INPUT_NAMES: [&str; 3] = ["t_in_c", "t_air_c", "mdot_kg_per_s"];

/// Phase used for a section's density and conductivity.
pub fn section_phase(h: f64, pcm: &PcmProperties) -> Phase {
    if h < 0.5 * pcm.h_f {
        Phase::Solid
    } else {
        Phase::Liquid
    }
}

/// Stored energy of a section whose capacitance switches from `ρ_S V` to
/// `ρ_L V` at `h_f / 2`; this is the quantity the section dynamics conserve.
pub fn section_energy(h: f64, volume: f64, pcm: &PcmProperties) -> f64 {
    let h_switch = 0.5 * pcm.h_f;
    if h < h_switch {
        pcm.rho_solid * volume * h
    } else {
        pcm.rho_solid * volume * h_switch + pcm.rho_liquid * volume * (h - h_switch)
    }
}

/// Solid mass fraction from section enthalpies and masses, normalized by
/// the current total mass.
pub fn soc_fg(pcm_enthalpies: &[f64], masses: &[f64], pcm: &PcmProperties) -> f64 {
    let m_tot: f64 = masses.iter().sum();
    if m_tot <= 0.0 {
        return 0.0;
    }
    let solid: f64 = pcm_enthalpies
        .iter()
        .zip(masses)
        .map(|(h, m)| m * (1.0 - h.clamp(0.0, pcm.h_f) / pcm.h_f))
        .sum();
    (solid / m_tot).clamp(0.0, 1.0)
}

pub struct FgModel {
    params: TesParameters,
    n: usize,
    dr: f64,
    centers: Vec<f64>,
    volumes: Vec<f64>,
    walls: WallResistances,
    graph: ThermalGraph<()>,
    gates: Vec<bool>,
}

impl FgModel {
    pub fn build(params: &TesParameters, n: usize) -> Result<FgModel> {
        if n == 0 {
            return Err(TesError::invalid("n_sections", "must be >= 1"));
        }
        params.validate()?;
        let g = params.geometry;
        let pcm = params.pcm;
        let dr = g.dr_pcm / n as f64;
        let r3 = g.r_pcm_inner();
        let centers: Vec<f64> = (0..n).map(|s| r3 + (s as f64 + 0.5) * dr).collect();
        let volumes: Vec<f64> = centers.iter().map(|c| g.annulus_volume(c - 0.5 * dr, c + 0.5 * dr)).collect();
        let walls = params.wall_resistances();

        // Half-section resistances indexed [section][phase]; phase 0 = solid.
        let half = |a: f64, b: f64| [g.conduction(a, b, pcm.k_solid), g.conduction(a, b, pcm.k_liquid)];
        let inner_half: Arc<Vec<[f64; 2]>> = Arc::new(centers.iter().map(|c| half(c - 0.5 * dr, *c)).collect());
        let outer_half: Arc<Vec<[f64; 2]>> = Arc::new(centers.iter().map(|c| half(*c, c + 0.5 * dr)).collect());
        let pidx = move |h: f64| match section_phase(h, &pcm) {
            Phase::Solid => 0,
            Phase::Liquid => 1,
        };

        let wf = params.working_fluid;
        let inner = params.inner_wall;
        let outer = params.outer_wall;
        let m_wf = params.fluid_mass();
        let m_inn = params.inner_wall_mass();
        let m_out = params.outer_wall_mass();
        let out_idx = n + 2;

        let mut b = GraphBuilder::<()>::new()
            .dynamic_vertex(
                "wf",
                Box::new(move |_, _| m_wf),
                Box::new(move |h| single_phase_temperature(h, &wf)),
                Box::new(move |x, _| m_wf * x[0]),
            )
            .dynamic_vertex(
                "inner_wall",
                Box::new(move |_, _| m_inn),
                Box::new(move |h| single_phase_temperature(h, &inner)),
                Box::new(move |x, _| m_inn * x[1]),
            );
        for (s, v) in volumes.iter().copied().enumerate() {
            let i = s + 2;
            b = b.dynamic_vertex(
                &format!("pcm_{}", s + 1),
                Box::new(move |x, _| pcm.rho(section_phase(x[i], &pcm)) * v),
                Box::new(move |h| pcm_temperature(h, &pcm)),
                Box::new(move |x, _| section_energy(x[i], v, &pcm)),
            );
        }
        b = b
            .dynamic_vertex(
                "outer_wall",
                Box::new(move |_, _| m_out),
                Box::new(move |h| single_phase_temperature(h, &outer)),
                Box::new(move |x, _| m_out * x[out_idx]),
            )
            .sink_vertex("outlet", Box::new(move |h| single_phase_temperature(h, &wf)));

        // e1: advective outflow to the sink at the (well-mixed) fluid temperature.
        let cp_wf = wf.cp;
        b = b.edge("e1", "wf", "outlet", Box::new(move |a, _| a.virtual_input * cp_wf * a.tail_temp));
        let r2 = walls.fluid_to_wall();
        b = b.edge("e2", "inner_wall", "wf", Box::new(move |a, _| (a.tail_temp - a.head_temp) / r2));
        {
            let r3a = walls.inner_wall_outer_half;
            let ih = inner_half.clone();
            b = b.edge(
                "e3",
                "pcm_1",
                "inner_wall",
                Box::new(move |a, _| (a.tail_temp - a.head_temp) / (r3a + ih[0][pidx(a.tail_state)])),
            );
        }
        for s in 1..n {
            let ih = inner_half.clone();
            let oh = outer_half.clone();
            b = b.edge(
                &format!("e{}", s + 3),
                &format!("pcm_{}", s + 1),
                &format!("pcm_{s}"),
                Box::new(move |a, _| {
                    let r = oh[s - 1][pidx(a.head_state)] + ih[s][pidx(a.tail_state)];
                    (a.tail_temp - a.head_temp) / r
                }),
            );
        }
        {
            let rb = walls.outer_wall_inner_half;
            let oh = outer_half.clone();
            b = b.edge(
                &format!("e{}", n + 3),
                "outer_wall",
                &format!("pcm_{n}"),
                Box::new(move |a, _| (a.tail_temp - a.head_temp) / (oh[n - 1][pidx(a.head_state)] + rb)),
            );
        }
        b = b.source_edge(
            "in1",
            "wf",
            Box::new(move |a, _| a.inputs[INPUT_MDOT] * cp_wf * a.inputs[INPUT_T_IN]),
        );
        let r_air = walls.outer_to_air();
        b = b.source_edge(
            "in2",
            "outer_wall",
            Box::new(move |a, _| (a.inputs[INPUT_T_AIR] - a.head_temp) / r_air),
        );
        let graph = b.inputs(3).link_input("e1", INPUT_MDOT).build()?;
        let gates = vec![true; graph.n_edges()];
        Ok(FgModel {
            params: *params,
            n,
            dr,
            centers,
            volumes,
            walls,
            graph,
            gates,
        })
    }

    pub fn n_sections(&self) -> usize {
        self.n
    }

    pub fn n_states(&self) -> usize {
        self.n + 3
    }

    pub fn section_width(&self) -> f64 {
        self.dr
    }

    pub fn section_centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn section_volumes(&self) -> &[f64] {
        &self.volumes
    }

    pub fn params(&self) -> &TesParameters {
        &self.params
    }

    pub fn walls(&self) -> &WallResistances {
        &self.walls
    }

    pub fn graph(&self) -> &ThermalGraph<()> {
        &self.graph
    }

    pub fn pcm_range(&self) -> std::ops::Range<usize> {
        2..self.n + 2
    }

    pub fn vertex_ids(&self) -> Vec<String> {
        self.graph.vertices()[..self.n_states()].iter().map(|v| v.id.clone()).collect()
    }

    /// Outlet (sink) state: the outflow leaves at the fluid enthalpy.
    pub fn sink_state(&self, x: &[f64]) -> [f64; 1] {
        [x[0]]
    }

    pub fn rhs(&self, x: &[f64], u: &[f64], dx: &mut [f64]) -> Result<()> {
        self.graph.assemble_rhs(x, &self.sink_state(x), u, &(), &self.gates, dx)
    }

    /// Edge powers `[P1 .. P_{n+3}, P_in1, P_in2]` in kW.
    pub fn power_flows(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        let temps = self.graph.temperatures(x, &self.sink_state(x));
        self.graph.edge_powers(x, &self.sink_state(x), u, &(), &self.gates, &temps)
    }

    pub fn temperatures(&self, x: &[f64]) -> Vec<f64> {
        let mut t = self.graph.temperatures(x, &self.sink_state(x));
        t.truncate(self.n_states());
        t
    }

    pub fn section_masses(&self, x: &[f64]) -> Vec<f64> {
        let pcm = &self.params.pcm;
        self.pcm_range()
            .zip(&self.volumes)
            .map(|(i, v)| pcm.rho(section_phase(x[i], pcm)) * v)
            .collect()
    }

    pub fn soc(&self, x: &[f64]) -> f64 {
        soc_fg(&x[self.pcm_range()], &self.section_masses(x), &self.params.pcm)
    }

    pub fn stored_energy(&self, x: &[f64]) -> f64 {
        self.graph.stored_energy(x, &())
    }

    /// `Σ C_j h_j` with the instantaneous section masses. Differs from
    /// [`Self::stored_energy`] by the mass jump at the phase switch.
    pub fn naive_stored_energy(&self, x: &[f64]) -> f64 {
        let caps = self.graph.capacitances(x, &());
        caps.iter().zip(x).map(|(c, h)| c * h).sum()
    }

    pub fn boundary_power(&self, x: &[f64], u: &[f64]) -> Result<f64> {
        Ok(self.graph.boundary_power(&self.power_flows(x, u)?))
    }

    /// Every vertex at temperature `t`. PCM at exactly `t_sat` starts as
    /// saturated liquid.
    pub fn uniform_state(&self, t: f64) -> Result<Vec<f64>> {
        let pcm = &self.params.pcm;
        let h_pcm = if t < pcm.t_sat {
            pcm_enthalpy(t, Phase::Solid, pcm)?
        } else {
            pcm_enthalpy(t, Phase::Liquid, pcm)?
        };
        let mut x = vec![h_pcm; self.n_states()];
        x[0] = single_phase_enthalpy(t, &self.params.working_fluid);
        x[1] = single_phase_enthalpy(t, &self.params.inner_wall);
        x[self.n + 2] = single_phase_enthalpy(t, &self.params.outer_wall);
        Ok(x)
    }
}
