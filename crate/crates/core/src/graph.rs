//! Star graphs, edge meshes and sampled functions on them.
//!
//! Every edge is parametrized by `tau >= 0` with the vertex at `tau = 0`;
//! derivatives at the vertex point into the edge. Semi-infinite edges are
//! truncated at a common length `T`.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `n` half-lines glued at one vertex, truncated at `truncation` for numerics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StarGraph {
    n: usize,
    truncation: f64,
}

impl StarGraph {
    pub fn new(n: usize, truncation: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::Domain(format!("star graph needs n >= 2 edges, got {n}")));
        }
        if !(truncation.is_finite() && truncation >= 2.0) {
            return Err(Error::Domain(format!(
                "truncation length must be >= 2, got {truncation}"
            )));
        }
        Ok(Self { n, truncation })
    }

    pub fn edge_count(&self) -> usize {
        self.n
    }

    pub fn truncation(&self) -> f64 {
        self.truncation
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Grading {
    Uniform,
    /// Steps grow geometrically away from the vertex.
    Geometric { ratio: f64, min_step: f64 },
    /// Arbitrary node set (breakpoints merged, refined copies, ...).
    Custom,
}

/// Node set on one edge. Edge indices are zero-based.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeMesh {
    edge: usize,
    nodes: Vec<f64>,
    grading: Grading,
}

impl EdgeMesh {
    pub fn from_nodes(edge: usize, nodes: Vec<f64>, grading: Grading) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::Domain(format!(
                "edge {edge}: mesh needs at least two nodes"
            )));
        }
        if nodes[0] != 0.0 {
            return Err(Error::Domain(format!(
                "edge {edge}: first node must be 0, got {}",
                nodes[0]
            )));
        }
        if let Some(w) = nodes.windows(2).find(|w| w[1].is_nan() || w[1] <= w[0]) {
            return Err(Error::Domain(format!(
                "edge {edge}: nodes not strictly increasing near {}",
                w[0]
            )));
        }
        Ok(Self { edge, nodes, grading })
    }

    pub fn uniform(edge: usize, length: f64, cells: usize) -> Result<Self> {
        let cells = cells.max(1);
        let h = length / cells as f64;
        let mut nodes: Vec<f64> = (0..cells).map(|i| i as f64 * h).collect();
        nodes.push(length);
        Self::from_nodes(edge, nodes, Grading::Uniform)
    }

    /// Geometric grading toward the vertex: the first step is `min_step`,
    /// each following step is `ratio` times the previous one, capped at
    /// `max_step`. `breakpoints` inside `(0, length)` are inserted as nodes.
    pub fn geometric(
        edge: usize,
        length: f64,
        min_step: f64,
        ratio: f64,
        max_step: f64,
        breakpoints: &[f64],
    ) -> Result<Self> {
        let policy = StepPolicy {
            fine_until: 0.0,
            fine_step: min_step,
            growth: ratio,
            max_step,
        };
        let nodes = policy.build(length, breakpoints)?;
        Self::from_nodes(edge, nodes, Grading::Geometric { ratio, min_step })
    }

    pub fn edge(&self) -> usize {
        self.edge
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn grading(&self) -> &Grading {
        &self.grading
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn length(&self) -> f64 {
        *self.nodes.last().expect("mesh has nodes")
    }

    /// Largest cell width.
    pub fn max_step(&self) -> f64 {
        self.nodes
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }

    /// Trapezoidal weights; `sum(w_i g(tau_i))` approximates the integral.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let m = self.nodes.len();
        let mut w = vec![0.0; m];
        for i in 0..m - 1 {
            let h = self.nodes[i + 1] - self.nodes[i];
            w[i] += 0.5 * h;
            w[i + 1] += 0.5 * h;
        }
        w
    }

    /// Each cell split in half.
    pub fn refined(&self) -> Self {
        let mut nodes = Vec::with_capacity(2 * self.nodes.len());
        for w in self.nodes.windows(2) {
            nodes.push(w[0]);
            nodes.push(0.5 * (w[0] + w[1]));
        }
        nodes.push(self.length());
        Self {
            edge: self.edge,
            nodes,
            grading: Grading::Custom,
        }
    }
}

/// Step-size rule shared by the solvers' mesh builders: a uniform fine
/// region `[0, fine_until]` with step `fine_step`, then geometric growth by
/// `growth` up to `max_step`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepPolicy {
    pub fine_until: f64,
    pub fine_step: f64,
    pub growth: f64,
    pub max_step: f64,
}

impl StepPolicy {
    pub fn build(&self, length: f64, breakpoints: &[f64]) -> Result<Vec<f64>> {
        if !(self.fine_step > 0.0 && self.max_step >= self.fine_step && self.growth >= 1.0) {
            return Err(Error::Domain(format!("invalid step policy {self:?}")));
        }
        if length.is_nan() || length <= 0.0 {
            return Err(Error::Domain(format!("invalid edge length {length}")));
        }
        let mut stops: Vec<f64> = breakpoints
            .iter()
            .copied()
            .chain(std::iter::once(self.fine_until))
            .filter(|&b| b > 0.0 && b < length)
            .collect();
        stops.sort_by(f64::total_cmp);
        stops.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * length);

        let mut nodes = vec![0.0];
        let mut tau = 0.0;
        let mut step = self.fine_step;
        let mut first = true;
        let mut next_stop = stops.iter().copied().peekable();
        while tau < length {
            step = if first || tau < self.fine_until * (1.0 - 1e-12) {
                self.fine_step
            } else {
                (step * self.growth).min(self.max_step)
            };
            first = false;
            let mut next = tau + step;
            while let Some(&s) = next_stop.peek() {
                if s <= tau * (1.0 + 1e-14) {
                    next_stop.next();
                } else {
                    break;
                }
            }
            let target = next_stop.peek().copied().unwrap_or(length);
            if next >= target - 0.25 * step {
                next = target;
            }
            nodes.push(next);
            tau = next;
        }
        Ok(nodes)
    }
}

/// One mesh per edge.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphMesh {
    edges: Vec<EdgeMesh>,
}

impl GraphMesh {
    pub fn new(edges: Vec<EdgeMesh>) -> Result<Self> {
        if edges.is_empty() {
            return Err(Error::Domain("graph mesh needs at least one edge".into()));
        }
        for (k, e) in edges.iter().enumerate() {
            if e.edge != k {
                return Err(Error::Domain(format!(
                    "edge mesh at position {k} is labelled {}",
                    e.edge
                )));
            }
        }
        Ok(Self { edges })
    }

    /// Same uniform mesh on every edge.
    pub fn uniform(n: usize, length: f64, cells: usize) -> Result<Self> {
        Self::new(
            (0..n)
                .map(|k| EdgeMesh::uniform(k, length, cells))
                .collect::<Result<_>>()?,
        )
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[EdgeMesh] {
        &self.edges
    }

    pub fn edge(&self, k: usize) -> &EdgeMesh {
        &self.edges[k]
    }

    pub fn refined(&self) -> Self {
        Self {
            edges: self.edges.iter().map(EdgeMesh::refined).collect(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.edges.iter().map(EdgeMesh::len).sum()
    }
}

/// Complex samples on a [`GraphMesh`].
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    mesh: Arc<GraphMesh>,
    values: Vec<Vec<Complex64>>,
}

impl GridFunction {
    pub fn new(mesh: Arc<GraphMesh>, values: Vec<Vec<Complex64>>) -> Result<Self> {
        if values.len() != mesh.edge_count() {
            return Err(Error::MeshMismatch(format!(
                "{} value arrays for {} edges",
                values.len(),
                mesh.edge_count()
            )));
        }
        for (k, (v, e)) in values.iter().zip(mesh.edges()).enumerate() {
            if v.len() != e.len() {
                return Err(Error::MeshMismatch(format!(
                    "edge {k}: {} samples for {} nodes",
                    v.len(),
                    e.len()
                )));
            }
        }
        Ok(Self { mesh, values })
    }

    pub fn zeros(mesh: Arc<GraphMesh>) -> Self {
        let values = mesh
            .edges()
            .iter()
            .map(|e| vec![Complex64::new(0.0, 0.0); e.len()])
            .collect();
        Self { mesh, values }
    }

    /// Samples `f(edge, tau)` at every node.
    pub fn from_fn(mesh: Arc<GraphMesh>, f: impl Fn(usize, f64) -> Complex64) -> Self {
        let values = mesh
            .edges()
            .iter()
            .enumerate()
            .map(|(k, e)| e.nodes().iter().map(|&t| f(k, t)).collect())
            .collect();
        Self { mesh, values }
    }

    pub fn mesh(&self) -> &Arc<GraphMesh> {
        &self.mesh
    }

    pub fn edge_values(&self, k: usize) -> &[Complex64] {
        &self.values[k]
    }

    pub fn values(&self) -> &[Vec<Complex64>] {
        &self.values
    }

    pub fn edge_count(&self) -> usize {
        self.values.len()
    }

    fn check_same_mesh(&self, other: &Self) -> Result<()> {
        if Arc::ptr_eq(&self.mesh, &other.mesh) || self.mesh == other.mesh {
            Ok(())
        } else {
            Err(Error::MeshMismatch(
                "grid functions live on different meshes".into(),
            ))
        }
    }

    /// Trapezoidal approximation of `∫ f conj(g)` over the truncated graph.
    pub fn l2_inner(&self, other: &Self) -> Result<Complex64> {
        self.check_same_mesh(other)?;
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, e) in self.mesh.edges().iter().enumerate() {
            for ((w, a), b) in e
                .trapezoid_weights()
                .iter()
                .zip(&self.values[k])
                .zip(&other.values[k])
            {
                acc += a * b.conj() * *w;
            }
        }
        Ok(acc)
    }

    pub fn l2_norm(&self) -> f64 {
        let mut acc = 0.0;
        for (k, e) in self.mesh.edges().iter().enumerate() {
            for (w, a) in e.trapezoid_weights().iter().zip(&self.values[k]) {
                acc += w * a.norm_sqr();
            }
        }
        acc.sqrt()
    }

    pub fn edge_l2_norm(&self, k: usize) -> f64 {
        self.mesh
            .edge(k)
            .trapezoid_weights()
            .iter()
            .zip(&self.values[k])
            .map(|(w, a)| w * a.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values
            .iter()
            .flatten()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    pub fn edge_sup_norm(&self, k: usize) -> f64 {
        self.values[k].iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `(f_1(0), ..., f_n(0))`.
    pub fn vertex_values(&self) -> Vec<Complex64> {
        self.values.iter().map(|v| v[0]).collect()
    }

    /// Piecewise-linear interpolation on edge `k`; zero beyond the last node.
    pub fn interpolate(&self, k: usize, tau: f64) -> Complex64 {
        interpolate_linear(self.mesh.edge(k).nodes(), &self.values[k], tau)
    }

    /// Linear interpolation onto another mesh with the same edge count.
    pub fn resample(&self, target: Arc<GraphMesh>) -> Result<Self> {
        if target.edge_count() != self.edge_count() {
            return Err(Error::MeshMismatch(format!(
                "cannot resample {} edges onto {}",
                self.edge_count(),
                target.edge_count()
            )));
        }
        let values = target
            .edges()
            .iter()
            .enumerate()
            .map(|(k, e)| e.nodes().iter().map(|&t| self.interpolate(k, t)).collect())
            .collect();
        Ok(Self {
            mesh: target,
            values,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_mesh(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
            .collect();
        Ok(Self {
            mesh: self.mesh.clone(),
            values,
        })
    }
}

pub(crate) fn interpolate_linear(nodes: &[f64], values: &[Complex64], tau: f64) -> Complex64 {
    let last = nodes.len() - 1;
    if tau <= nodes[0] {
        return values[0];
    }
    if tau > nodes[last] {
        return Complex64::new(0.0, 0.0);
    }
    let i = nodes.partition_point(|&x| x <= tau).min(last).max(1);
    let (a, b) = (nodes[i - 1], nodes[i]);
    let s = (tau - a) / (b - a);
    values[i - 1] * (1.0 - s) + values[i] * s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn constant_function_integrates_to_total_length() {
        let mesh = Arc::new(GraphMesh::uniform(3, 2.0, 50).unwrap());
        let one = GridFunction::from_fn(mesh, |_, _| c(1.0));
        let ip = one.l2_inner(&one).unwrap();
        assert!((ip.re - 6.0).abs() < 1e-13 && ip.im.abs() < 1e-15);
    }

    #[test]
    fn zero_function_gives_zero_inner_product() {
        let mesh = Arc::new(GraphMesh::uniform(3, 2.0, 10).unwrap());
        let one = GridFunction::from_fn(mesh.clone(), |_, _| c(1.0));
        let zero = GridFunction::zeros(mesh);
        assert_eq!(one.l2_inner(&zero).unwrap(), c(0.0));
    }

    #[test]
    fn tau_squared_integral_is_second_order() {
        // ∫_0^1 tau^2 = 1/3 on one edge, zero elsewhere.
        let err = |cells| {
            let mesh = Arc::new(GraphMesh::uniform(2, 1.0, cells).unwrap());
            let f = GridFunction::from_fn(mesh, |k, t| if k == 0 { c(t) } else { c(0.0) });
            (f.l2_inner(&f).unwrap().re - 1.0 / 3.0).abs()
        };
        let (e1, e2) = (err(20), err(40));
        assert!(e1 < 1e-3);
        assert!(e1 / e2 >= 3.5, "ratio {}", e1 / e2);
    }

    #[test]
    fn mismatched_meshes_are_rejected() {
        let a = Arc::new(GraphMesh::uniform(2, 2.0, 10).unwrap());
        let b = Arc::new(GraphMesh::uniform(2, 2.0, 12).unwrap());
        let f = GridFunction::zeros(a);
        let g = GridFunction::zeros(b);
        assert!(matches!(f.l2_inner(&g), Err(Error::MeshMismatch(_))));
    }

    #[test]
    fn vertex_values_read_first_node() {
        let mesh = Arc::new(GraphMesh::uniform(3, 2.0, 8).unwrap());
        let one = GridFunction::from_fn(mesh.clone(), |_, _| c(1.0));
        assert_eq!(one.vertex_values(), vec![c(1.0); 3]);
        let ramp = GridFunction::from_fn(mesh.clone(), |k, t| c((k + 1) as f64 * t));
        assert_eq!(ramp.vertex_values(), vec![c(0.0); 3]);
        // cos(pi (tau - 1) / 2) is the constant-potential half-bound state profile.
        let hb = GridFunction::from_fn(mesh, |_, t| {
            c((std::f64::consts::PI * (t - 1.0) / 2.0).cos())
        });
        for v in hb.vertex_values() {
            assert!(v.norm() < 1e-15);
        }
    }

    #[test]
    fn star_graph_validation() {
        assert!(StarGraph::new(1, 5.0).is_err());
        assert!(StarGraph::new(3, 1.5).is_err());
        assert!(StarGraph::new(3, 2.0).is_ok());
    }

    #[test]
    fn geometric_mesh_hits_breakpoints_and_end() {
        let m = EdgeMesh::geometric(0, 10.0, 1e-6, 1.1, 0.5, &[1.0, 3.25]).unwrap();
        assert_eq!(m.nodes()[0], 0.0);
        assert_eq!(m.nodes()[1], 1e-6);
        assert_eq!(m.length(), 10.0);
        assert!(m.nodes().contains(&1.0));
        assert!(m.nodes().contains(&3.25));
        assert!(m.max_step() <= 0.5 + 1e-12);
    }

    #[test]
    fn bad_nodes_are_rejected() {
        assert!(EdgeMesh::from_nodes(0, vec![0.1, 1.0], Grading::Custom).is_err());
        assert!(EdgeMesh::from_nodes(0, vec![0.0, 1.0, 1.0], Grading::Custom).is_err());
    }

    proptest::proptest! {
        #[test]
        fn inner_product_is_conjugate_symmetric(seed in 0u64..1000) {
            let mesh = Arc::new(GraphMesh::uniform(3, 2.0, 17).unwrap());
            let s = seed as f64;
            let f = GridFunction::from_fn(mesh.clone(), |k, t| {
                Complex64::new((s + t * (k as f64 + 1.0)).sin(), (s * t).cos())
            });
            let g = GridFunction::from_fn(mesh, |k, t| {
                Complex64::new((t - s).cos() * k as f64, (2.0 * t + s).sin())
            });
            let fg = f.l2_inner(&g).unwrap();
            let gf = g.l2_inner(&f).unwrap();
            proptest::prop_assert!((fg - gf.conj()).norm() <= 1e-14 * (1.0 + fg.norm()));
        }
    }
}
