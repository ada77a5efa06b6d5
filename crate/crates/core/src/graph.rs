//! Graph representation of lumped thermal networks.
//!
//! Dynamic vertices store energy, edges carry power from tail to head, and a
//! sink vertex absorbs the working-fluid outlet. The state dynamics are
//! assembled as `C ẋ = −M̄ P`, where source edges appear in `M` as columns with
//! a single `−1` on their head vertex.
//!
//! Vertex and edge laws are closures over a model-specific context `C`, which
//! the model recomputes from the full state once per right-hand-side call
//! (for example the moving-boundary geometry).

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, TesError};

pub type CapacitanceLaw<C> = Box<dyn Fn(&[f64], &C) -> f64 + Send + Sync>;
pub type TemperatureLaw = Box<dyn Fn(f64) -> f64 + Send + Sync>;
pub type EnergyLaw<C> = Box<dyn Fn(&[f64], &C) -> f64 + Send + Sync>;
pub type PowerLaw<C> = Box<dyn Fn(&EdgeArgs<'_>, &C) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VertexKind {
    Dynamic,
    Sink,
}

pub struct Vertex<C> {
    pub id: String,
    pub kind: VertexKind,
    capacitance: Option<CapacitanceLaw<C>>,
    temperature: TemperatureLaw,
    energy: Option<EnergyLaw<C>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeKind {
    Interior { tail: usize, head: usize },
    /// External inflow with no tail vertex.
    Source { head: usize },
}

pub struct Edge<C> {
    pub id: String,
    pub kind: EdgeKind,
    law: PowerLaw<C>,
}

impl<C> Edge<C> {
    pub fn head(&self) -> usize {
        match self.kind {
            EdgeKind::Interior { head, .. } | EdgeKind::Source { head } => head,
        }
    }

    pub fn tail(&self) -> Option<usize> {
        match self.kind {
            EdgeKind::Interior { tail, .. } => Some(tail),
            EdgeKind::Source { .. } => None,
        }
    }
}

/// Arguments handed to an edge's power law.
///
/// For source edges the tail fields are `NaN`.
#[derive(Debug, Clone, Copy)]
pub struct EdgeArgs<'a> {
    pub tail_state: f64,
    pub head_state: f64,
    pub tail_temp: f64,
    pub head_temp: f64,
    /// Virtual input `ũ_j = (Φ u)_j`.
    pub virtual_input: f64,
    /// Full system input vector, read directly by source edges.
    pub inputs: &'a [f64],
}

/// Dense incidence matrix with dynamic rows first, then sinks.
#[derive(Debug, Clone, PartialEq)]
pub struct IncidenceMatrix {
    pub matrix: DMatrix<f64>,
    /// Number of dynamic rows; rows `0..n_dynamic` form `M̄`.
    pub n_dynamic: usize,
}

impl IncidenceMatrix {
    pub fn m_bar(&self) -> DMatrix<f64> {
        self.matrix.rows(0, self.n_dynamic).into_owned()
    }

    pub fn m_sink(&self) -> DMatrix<f64> {
        self.matrix
            .rows(self.n_dynamic, self.matrix.nrows() - self.n_dynamic)
            .into_owned()
    }
}

/// Builds the incidence matrix per vertex ordering: `+1` at the tail, `−1`
/// at the head.
pub fn build_incidence<C>(vertices: &[Vertex<C>], edges: &[Edge<C>]) -> Result<IncidenceMatrix> {
    let n_dynamic = vertices.iter().take_while(|v| v.kind == VertexKind::Dynamic).count();
    if vertices[n_dynamic..].iter().any(|v| v.kind == VertexKind::Dynamic) {
        return Err(TesError::Graph("dynamic vertices must precede sinks".into()));
    }
    let mut m = DMatrix::zeros(vertices.len(), edges.len());
    for (j, e) in edges.iter().enumerate() {
        let head = e.head();
        if head >= vertices.len() {
            return Err(TesError::Graph(format!("edge {} has dangling head {head}", e.id)));
        }
        if let Some(tail) = e.tail() {
            if tail >= vertices.len() {
                return Err(TesError::Graph(format!("edge {} has dangling tail {tail}", e.id)));
            }
            if tail == head {
                return Err(TesError::Graph(format!("edge {} is a self-loop", e.id)));
            }
            m[(tail, j)] = 1.0;
        }
        m[(head, j)] = -1.0;
    }
    Ok(IncidenceMatrix { matrix: m, n_dynamic })
}

/// Fluent builder; endpoints are referenced by vertex id.
pub struct GraphBuilder<C> {
    dynamic: Vec<Vertex<C>>,
    sinks: Vec<Vertex<C>>,
    edges: Vec<(String, Option<String>, String, PowerLaw<C>)>,
    n_inputs: usize,
    input_links: Vec<(String, usize)>,
}

impl<C> Default for GraphBuilder<C> {
    fn default() -> Self {
        Self::new()
    }
}

impl<C> GraphBuilder<C> {
    pub fn new() -> Self {
        GraphBuilder {
            dynamic: Vec::new(),
            sinks: Vec::new(),
            edges: Vec::new(),
            n_inputs: 0,
            input_links: Vec::new(),
        }
    }

    pub fn dynamic_vertex(
        mut self,
        id: &str,
        capacitance: CapacitanceLaw<C>,
        temperature: TemperatureLaw,
        energy: EnergyLaw<C>,
    ) -> Self {
        self.dynamic.push(Vertex {
            id: id.to_string(),
            kind: VertexKind::Dynamic,
            capacitance: Some(capacitance),
            temperature,
            energy: Some(energy),
        });
        self
    }

    pub fn sink_vertex(mut self, id: &str, temperature: TemperatureLaw) -> Self {
        self.sinks.push(Vertex {
            id: id.to_string(),
            kind: VertexKind::Sink,
            capacitance: None,
            temperature,
            energy: None,
        });
        self
    }

    pub fn edge(mut self, id: &str, tail: &str, head: &str, law: PowerLaw<C>) -> Self {
        self.edges.push((id.to_string(), Some(tail.to_string()), head.to_string(), law));
        self
    }

    pub fn source_edge(mut self, id: &str, head: &str, law: PowerLaw<C>) -> Self {
        self.edges.push((id.to_string(), None, head.to_string(), law));
        self
    }

    pub fn inputs(mut self, n_inputs: usize) -> Self {
        self.n_inputs = n_inputs;
        self
    }

    /// Routes system input `input` to the virtual input of edge `edge_id`.
    pub fn link_input(mut self, edge_id: &str, input: usize) -> Self {
        self.input_links.push((edge_id.to_string(), input));
        self
    }

    pub fn build(self) -> Result<ThermalGraph<C>> {
        let mut vertices = self.dynamic;
        let n_dynamic = vertices.len();
        vertices.extend(self.sinks);
        let lookup = |name: &str| -> Result<usize> {
            vertices
                .iter()
                .position(|v| v.id == name)
                .ok_or_else(|| TesError::Graph(format!("unknown vertex `{name}`")))
        };
        for (i, v) in vertices.iter().enumerate() {
            if vertices[..i].iter().any(|w| w.id == v.id) {
                return Err(TesError::Graph(format!("duplicate vertex id `{}`", v.id)));
            }
        }
        let mut edges = Vec::with_capacity(self.edges.len());
        for (id, tail, head, law) in self.edges {
            let head = lookup(&head)?;
            let kind = match tail {
                Some(t) => EdgeKind::Interior { tail: lookup(&t)?, head },
                None => {
                    if head >= n_dynamic {
                        return Err(TesError::Graph(format!("source edge {id} must feed a dynamic vertex")));
                    }
                    EdgeKind::Source { head }
                }
            };
            edges.push(Edge { id, kind, law });
        }
        let incidence = build_incidence(&vertices, &edges)?;
        let mut phi = DMatrix::zeros(edges.len(), self.n_inputs);
        for (edge_id, input) in self.input_links {
            let j = edges
                .iter()
                .position(|e| e.id == edge_id)
                .ok_or_else(|| TesError::Graph(format!("input map names unknown edge `{edge_id}`")))?;
            if input >= self.n_inputs {
                return Err(TesError::Graph(format!("input index {input} out of range")));
            }
            phi[(j, input)] = 1.0;
        }
        Ok(ThermalGraph {
            vertices,
            edges,
            incidence,
            input_map: phi,
            n_dynamic,
        })
    }
}

/// An assembled, immutable thermal network.
pub struct ThermalGraph<C> {
    vertices: Vec<Vertex<C>>,
    edges: Vec<Edge<C>>,
    incidence: IncidenceMatrix,
    input_map: DMatrix<f64>,
    n_dynamic: usize,
}

/// Everything computed during one evaluation of the network.
#[derive(Debug, Clone, Default)]
pub struct Flows {
    pub temperatures: Vec<f64>,
    pub capacitances: Vec<f64>,
    pub powers: Vec<f64>,
}

impl<C> ThermalGraph<C> {
    pub fn n_dynamic(&self) -> usize {
        self.n_dynamic
    }

    pub fn n_sinks(&self) -> usize {
        self.vertices.len() - self.n_dynamic
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> &[Vertex<C>] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge<C>] {
        &self.edges
    }

    pub fn incidence(&self) -> &IncidenceMatrix {
        &self.incidence
    }

    pub fn input_map(&self) -> &DMatrix<f64> {
        &self.input_map
    }

    pub fn edge_index(&self, id: &str) -> Option<usize> {
        self.edges.iter().position(|e| e.id == id)
    }

    pub fn vertex_index(&self, id: &str) -> Option<usize> {
        self.vertices.iter().position(|v| v.id == id)
    }

    /// Vertex temperatures for dynamic states followed by sink states.
    pub fn temperatures(&self, x: &[f64], x_out: &[f64]) -> Vec<f64> {
        self.vertices
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let s = if i < self.n_dynamic { x[i] } else { x_out[i - self.n_dynamic] };
                (v.temperature)(s)
            })
            .collect()
    }

    pub fn capacitances(&self, x: &[f64], ctx: &C) -> Vec<f64> {
        self.vertices[..self.n_dynamic]
            .iter()
            .map(|v| (v.capacitance.as_ref().expect("dynamic vertex"))(x, ctx))
            .collect()
    }

    /// Power on every edge; gated-off edges are exactly zero and their laws
    /// are never called.
    pub fn edge_powers(&self, x: &[f64], x_out: &[f64], u: &[f64], ctx: &C, gates: &[bool], temps: &[f64]) -> Result<Vec<f64>> {
        debug_assert_eq!(gates.len(), self.edges.len());
        let state_of = |i: usize| if i < self.n_dynamic { x[i] } else { x_out[i - self.n_dynamic] };
        let mut powers = vec![0.0; self.edges.len()];
        for (j, e) in self.edges.iter().enumerate() {
            if !gates[j] {
                continue;
            }
            let virtual_input: f64 = (0..self.input_map.ncols()).map(|k| self.input_map[(j, k)] * u[k]).sum();
            let head = e.head();
            let (tail_state, tail_temp) = match e.tail() {
                Some(t) => (state_of(t), temps[t]),
                None => (f64::NAN, f64::NAN),
            };
            let args = EdgeArgs {
                tail_state,
                head_state: state_of(head),
                tail_temp,
                head_temp: temps[head],
                virtual_input,
                inputs: u,
            };
            let p = (e.law)(&args, ctx);
            if !p.is_finite() {
                return Err(TesError::NonFinite {
                    quantity: "power",
                    location: format!("edge {}", e.id),
                    value: p,
                });
            }
            powers[j] = p;
        }
        Ok(powers)
    }

    /// Evaluates temperatures, capacitances and powers in one pass.
    pub fn evaluate(&self, x: &[f64], x_out: &[f64], u: &[f64], ctx: &C, gates: &[bool]) -> Result<Flows> {
        let temperatures = self.temperatures(x, x_out);
        let powers = self.edge_powers(x, x_out, u, ctx, gates, &temperatures)?;
        let capacitances = self.capacitances(x, ctx);
        Ok(Flows { temperatures, capacitances, powers })
    }

    /// `ẋ = C⁻¹ (−M̄ P)` with source edges folded into `M̄`.
    pub fn assemble_rhs(&self, x: &[f64], x_out: &[f64], u: &[f64], ctx: &C, gates: &[bool], dx: &mut [f64]) -> Result<()> {
        let flows = self.evaluate(x, x_out, u, ctx, gates)?;
        self.rhs_from_flows(&flows, dx)
    }

    pub fn rhs_from_flows(&self, flows: &Flows, dx: &mut [f64]) -> Result<()> {
        dx[..self.n_dynamic].fill(0.0);
        let m = &self.incidence.matrix;
        for (j, p) in flows.powers.iter().enumerate() {
            if *p == 0.0 {
                continue;
            }
            for i in 0..self.n_dynamic {
                let mij = m[(i, j)];
                if mij != 0.0 {
                    dx[i] -= mij * p;
                }
            }
        }
        for (i, c) in flows.capacitances.iter().enumerate() {
            if !c.is_finite() || *c == 0.0 {
                return Err(TesError::NonFinite {
                    quantity: "capacitance",
                    location: format!("vertex {}", self.vertices[i].id),
                    value: *c,
                });
            }
            dx[i] /= c;
        }
        Ok(())
    }

    /// Literal dense product `−M̄ P`, kept for cross-checking.
    pub fn net_power_dense(&self, powers: &[f64]) -> Vec<f64> {
        let p = DVector::from_column_slice(powers);
        (-(self.incidence.m_bar() * p)).iter().copied().collect()
    }

    pub fn stored_energy(&self, x: &[f64], ctx: &C) -> f64 {
        self.vertices[..self.n_dynamic]
            .iter()
            .map(|v| (v.energy.as_ref().expect("dynamic vertex"))(x, ctx))
            .sum()
    }

    /// Power entering through source edges minus power leaving into sinks.
    pub fn boundary_power(&self, powers: &[f64]) -> f64 {
        self.edges
            .iter()
            .zip(powers)
            .map(|(e, p)| match e.kind {
                EdgeKind::Source { .. } => *p,
                EdgeKind::Interior { tail, head } => {
                    let tail_sink = tail >= self.n_dynamic;
                    let head_sink = head >= self.n_dynamic;
                    match (tail_sink, head_sink) {
                        (false, true) => -p,
                        (true, false) => *p,
                        _ => 0.0,
                    }
                }
            })
            .sum()
    }

    pub fn incidence_csv(&self) -> String {
        let mut out = String::from("vertex");
        for e in &self.edges {
            let _ = write!(out, ",{}", e.id);
        }
        out.push('\n');
        for (i, v) in self.vertices.iter().enumerate() {
            out.push_str(&v.id);
            for j in 0..self.edges.len() {
                let _ = write!(out, ",{}", self.incidence.matrix[(i, j)] as i32);
            }
            out.push('\n');
        }
        out
    }

    pub fn input_map_csv(&self, input_names: &[&str]) -> String {
        let mut out = String::from("edge");
        for name in input_names {
            let _ = write!(out, ",{name}");
        }
        out.push('\n');
        for (j, e) in self.edges.iter().enumerate() {
            out.push_str(&e.id);
            for k in 0..self.input_map.ncols() {
                let _ = write!(out, ",{}", self.input_map[(j, k)] as i32);
            }
            out.push('\n');
        }
        out
    }

    pub fn edge_table_csv(&self) -> String {
        let mut out = String::from("edge,kind,tail,head\n");
        for e in &self.edges {
            let (kind, tail) = match e.kind {
                EdgeKind::Interior { tail, .. } => ("interior", self.vertices[tail].id.as_str()),
                EdgeKind::Source { .. } => ("source", ""),
            };
            let _ = writeln!(out, "{},{},{},{}", e.id, kind, tail, self.vertices[e.head()].id);
        }
        out
    }
}

/// One point of an energy audit: time, total stored energy and net power
/// crossing the boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditSample {
    pub t: f64,
    pub stored_kj: f64,
    pub boundary_kw: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct EnergyAudit {
    pub delta_stored_kj: f64,
    pub boundary_energy_kj: f64,
    pub residual_kj: f64,
    /// `∫|net boundary power| dt`.
    pub throughput_kj: f64,
}

/// Residuals below this are floating-point noise, kJ.
pub const AUDIT_ROUNDOFF_KJ: f64 = 1e-9;

impl EnergyAudit {
    /// True when the residual is within `fraction` of the throughput, or at
    /// round-off level.
    pub fn within(&self, fraction: f64) -> bool {
        self.residual_kj <= fraction * self.throughput_kj || self.residual_kj <= AUDIT_ROUNDOFF_KJ
    }

    pub fn residual_fraction(&self) -> f64 {
        if self.throughput_kj > 0.0 {
            self.residual_kj / self.throughput_kj
        } else {
            0.0
        }
    }
}

/// Compares the change in stored energy with the trapezoidal integral of
/// boundary power. Repeated time stamps (pre/post event samples) contribute
/// zero-width intervals.
pub fn energy_audit(samples: &[AuditSample]) -> EnergyAudit {
    if samples.len() < 2 {
        return EnergyAudit {
            delta_stored_kj: 0.0,
            boundary_energy_kj: 0.0,
            residual_kj: 0.0,
            throughput_kj: 0.0,
        };
    }
    let mut boundary = 0.0;
    let mut throughput = 0.0;
    for w in samples.windows(2) {
        let dt = w[1].t - w[0].t;
        boundary += 0.5 * dt * (w[0].boundary_kw + w[1].boundary_kw);
        throughput += 0.5 * dt * (w[0].boundary_kw.abs() + w[1].boundary_kw.abs());
    }
    let delta = samples[samples.len() - 1].stored_kj - samples[0].stored_kj;
    EnergyAudit {
        delta_stored_kj: delta,
        boundary_energy_kj: boundary,
        residual_kj: (delta - boundary).abs(),
        throughput_kj: throughput,
    }
}
