//! Resolvent solves `(H - zeta) y = f` on the truncated star graph.
//!
//! * `H_eps` (Kirchhoff vertex, potential `W_eps`) is discretized by a
//!   lumped-mass finite-volume scheme: dual cells around every node, exact
//!   cell integrals of the potential and of `f`. The vertex is one unknown
//!   shared by all edges; the system is solved by eliminating each edge with
//!   a pivoted tridiagonal LU and a scalar Schur complement at the vertex.
//! * The limit operator (`-y'' + q_k y / tau` with `A y(0) + B y^[1](0) = 0`)
//!   is solved edge by edge with a Green's-function construction: the
//!   solution decaying toward `T` is integrated inward, the solution regular
//!   at the vertex outward, and the behaviour at `tau -> 0` is matched to the
//!   two-term Frobenius expansion. Only an `n x n` system couples the edges.
//!
//! Both use a Dirichlet condition at `tau = T`.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coupling::VertexConditions;
use crate::error::{Error, Result};
use crate::graph::{EdgeMesh, GraphMesh, Grading, GridFunction, StarGraph, StepPolicy};
use crate::linalg::{self, c, CMatrix, TridiagonalLu};
use crate::ode::{self, Tolerances};
use crate::potentials::{CoulombSpec, Profile, RegularizedPotential};

/// Right-hand side `f`, one real profile per edge in `tau` units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Forcing {
    pub edges: Vec<Profile>,
}

impl Forcing {
    pub fn new(edges: Vec<Profile>) -> Result<Self> {
        for p in &edges {
            p.validate()?;
            if let Some((lo, _)) = p.support() {
                if lo < 0.0 {
                    return Err(Error::Domain(format!("forcing support starts at {lo} < 0")));
                }
            }
        }
        Ok(Self { edges })
    }

    pub fn zero(n: usize) -> Self {
        Self {
            edges: vec![Profile::Zero; n],
        }
    }

    /// `profile` on `edge`, zero elsewhere.
    pub fn on_edge(n: usize, edge: usize, profile: Profile) -> Result<Self> {
        let mut edges = vec![Profile::Zero; n];
        *edges
            .get_mut(edge)
            .ok_or_else(|| Error::Domain(format!("edge {edge} out of range for n = {n}")))? = profile;
        Self::new(edges)
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_zero(&self) -> bool {
        self.edges.iter().all(Profile::is_zero)
    }

    pub fn sample(&self, mesh: Arc<GraphMesh>) -> GridFunction {
        GridFunction::from_fn(mesh, |k, t| c(self.edges[k].eval(t)))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OperatorSpec {
    Regularized(RegularizedPotential),
    Limit {
        coulomb: CoulombSpec,
        conditions: VertexConditions,
    },
    DirichletSum(CoulombSpec),
}

impl OperatorSpec {
    fn edge_count(&self) -> usize {
        match self {
            Self::Regularized(p) => p.edge_count(),
            Self::Limit { coulomb, .. } | Self::DirichletSum(coulomb) => coulomb.edge_count(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResolventProblem {
    pub graph: StarGraph,
    pub zeta: Complex64,
    pub forcing: Forcing,
    pub operator: OperatorSpec,
}

impl ResolventProblem {
    pub fn new(
        graph: StarGraph,
        zeta: Complex64,
        forcing: Forcing,
        operator: OperatorSpec,
    ) -> Result<Self> {
        check_zeta(zeta)?;
        let n = graph.edge_count();
        if forcing.edge_count() != n || operator.edge_count() != n {
            return Err(Error::Domain(format!(
                "graph has {n} edges, forcing {}, operator {}",
                forcing.edge_count(),
                operator.edge_count()
            )));
        }
        if let OperatorSpec::Limit { conditions, .. } = &operator {
            if conditions.edge_count() != n {
                return Err(Error::Domain("vertex conditions have the wrong size".into()));
            }
        }
        Ok(Self {
            graph,
            zeta,
            forcing,
            operator,
        })
    }
}

pub(crate) fn check_zeta(zeta: Complex64) -> Result<()> {
    if zeta.im == 0.0 || !zeta.re.is_finite() || !zeta.im.is_finite() {
        Err(Error::Domain(format!(
            "zeta must be finite with nonzero imaginary part, got {zeta}"
        )))
    } else {
        Ok(())
    }
}

/// `sqrt(-zeta)` on the branch with positive real part.
pub fn decay_rate(zeta: Complex64) -> Complex64 {
    let k = (-zeta).sqrt();
    if k.re < 0.0 {
        -k
    } else {
        k
    }
}

/// `8 / Re sqrt(-zeta)`, at least 2.
pub fn default_truncation(zeta: Complex64) -> f64 {
    (8.0 / decay_rate(zeta).re).max(2.0)
}

// ---------------------------------------------------------------------------
// regularized operator

/// Step control for meshes resolving `[0, eps]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularizedMeshPolicy {
    /// Uniform cells across `[0, eps]`.
    pub inner_cells: usize,
    /// Ratio of consecutive steps beyond `eps`.
    pub growth: f64,
    pub max_step: f64,
}

impl Default for RegularizedMeshPolicy {
    fn default() -> Self {
        Self {
            inner_cells: 1000,
            growth: 1.02,
            max_step: 2e-3,
        }
    }
}

impl RegularizedMeshPolicy {
    pub fn mesh(
        &self,
        graph: &StarGraph,
        potential: &RegularizedPotential,
        forcing: &Forcing,
    ) -> Result<Arc<GraphMesh>> {
        if self.inner_cells < 2 {
            return Err(Error::Domain("inner_cells must be at least 2".into()));
        }
        let eps = potential.epsilon;
        let fine = eps / self.inner_cells as f64;
        let policy = StepPolicy {
            fine_until: eps,
            fine_step: fine,
            growth: self.growth,
            max_step: self.max_step.max(fine),
        };
        let edges = (0..graph.edge_count())
            .map(|k| {
                let mut stops = potential.breakpoints(k);
                stops.extend(forcing.edges[k].breakpoints());
                let nodes = policy.build(graph.truncation(), &stops)?;
                EdgeMesh::from_nodes(k, nodes, Grading::Custom)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Arc::new(GraphMesh::new(edges)?))
    }
}

/// Finite-volume system: per edge the interior tridiagonal block, the
/// coupling to the vertex through the first flux, and the vertex row.
struct FvSystem {
    /// Per edge: (sub, diag, sup) for the interior unknowns `1..N-1`.
    bands: Vec<(Vec<Complex64>, Vec<Complex64>, Vec<Complex64>)>,
    /// Per edge: interior right-hand side.
    rhs: Vec<Vec<Complex64>>,
    /// Per edge: `1/h_1`.
    first_flux: Vec<f64>,
    vertex_diag: Complex64,
    vertex_rhs: Complex64,
}

impl FvSystem {
    fn assemble(p: &ResolventProblem, mesh: &GraphMesh) -> Result<Self> {
        let pot = match &p.operator {
            OperatorSpec::Regularized(pot) => pot,
            _ => return Err(Error::Domain("finite-volume solver needs a regularized operator".into())),
        };
        let zeta = p.zeta;
        let mut bands = Vec::new();
        let mut rhs = Vec::new();
        let mut first_flux = Vec::new();
        let mut vertex_diag = c(0.0);
        let mut vertex_rhs = c(0.0);
        for (k, e) in mesh.edges().iter().enumerate() {
            let t = e.nodes();
            let nn = t.len();
            if nn < 3 {
                return Err(Error::Domain(format!("edge {k} needs at least two cells")));
            }
            let f = &p.forcing.edges[k];
            let h: Vec<f64> = t.windows(2).map(|w| w[1] - w[0]).collect();
            // dual cell of node i: [t_i - h_{i-1}/2, t_i + h_i/2]
            let lo = |i: usize| if i == 0 { 0.0 } else { t[i] - 0.5 * h[i - 1] };
            let hi = |i: usize| t[i] + 0.5 * h[i];
            let m = nn - 2;
            let mut sub = vec![c(0.0); m.saturating_sub(1)];
            let mut diag = vec![c(0.0); m];
            let mut sup = vec![c(0.0); m.saturating_sub(1)];
            let mut b = vec![c(0.0); m];
            for i in 1..nn - 1 {
                let (a, bb) = (lo(i), hi(i));
                let w = pot.cell_integral(k, a, bb);
                let d = bb - a;
                diag[i - 1] = c(1.0 / h[i - 1] + 1.0 / h[i] + w) - zeta * d;
                if i + 1 < nn - 1 {
                    sup[i - 1] = c(-1.0 / h[i]);
                    sub[i - 1] = c(-1.0 / h[i]);
                }
                b[i - 1] = c(f.integral(a, bb));
            }
            let w0 = pot.cell_integral(k, 0.0, hi(0));
            vertex_diag += c(1.0 / h[0] + w0) - zeta * (0.5 * h[0]);
            vertex_rhs += c(f.integral(0.0, hi(0)));
            first_flux.push(1.0 / h[0]);
            bands.push((sub, diag, sup));
            rhs.push(b);
        }
        Ok(Self {
            bands,
            rhs,
            first_flux,
            vertex_diag,
            vertex_rhs,
        })
    }

    /// `(values, min pivot ratio)`.
    fn solve(&self) -> Result<(Vec<Vec<Complex64>>, f64)> {
        struct Edge {
            u: Vec<Complex64>,
            v: Vec<Complex64>,
            ratio: f64,
        }
        let parts: Vec<Edge> = self
            .bands
            .par_iter()
            .zip(&self.rhs)
            .zip(&self.first_flux)
            .map(|(((sub, diag, sup), b), &g)| {
                let lu = TridiagonalLu::factor(sub, diag, sup)?;
                let mut u = b.clone();
                lu.solve_in_place(&mut u);
                let mut v = vec![c(0.0); b.len()];
                v[0] = c(g);
                lu.solve_in_place(&mut v);
                Ok(Edge {
                    u,
                    v,
                    ratio: lu.pivot_ratio(),
                })
            })
            .collect::<Result<_>>()?;
        let mut denom = self.vertex_diag;
        let mut num = self.vertex_rhs;
        for (p, &g) in parts.iter().zip(&self.first_flux) {
            denom -= p.v[0] * g;
            num += p.u[0] * g;
        }
        if denom.norm() == 0.0 || !denom.is_finite() {
            return Err(Error::Numerical("vertex Schur complement vanished".into()));
        }
        let y0 = num / denom;
        let ratio = parts.iter().map(|p| p.ratio).fold(f64::INFINITY, f64::min);
        let values = parts
            .into_iter()
            .map(|p| {
                let mut out = Vec::with_capacity(p.u.len() + 2);
                out.push(y0);
                out.extend(p.u.iter().zip(&p.v).map(|(u, v)| u + v * y0));
                out.push(c(0.0));
                out
            })
            .collect();
        Ok((values, ratio))
    }

    /// Normwise backward error `‖A y - F‖ / (‖A‖ ‖y‖ + ‖F‖)` in max norms.
    fn residual(&self, y: &[Vec<Complex64>]) -> f64 {
        let y0 = y[0][0];
        let mut worst: f64 = 0.0;
        let mut a_norm: f64 = 0.0;
        let mut y_norm: f64 = y0.norm();
        let mut f_norm: f64 = self.vertex_rhs.norm();
        let mut vertex = self.vertex_diag * y0 - self.vertex_rhs;
        let mut vertex_row = self.vertex_diag.norm();
        for (k, (sub, diag, sup)) in self.bands.iter().enumerate() {
            let yk = &y[k];
            let g = self.first_flux[k];
            vertex -= yk[1] * g;
            vertex_row += g.abs();
            let m = diag.len();
            for i in 0..m {
                let mut r = diag[i] * yk[i + 1] - self.rhs[k][i];
                let mut row = diag[i].norm();
                if i > 0 {
                    r += sub[i - 1] * yk[i];
                    row += sub[i - 1].norm();
                } else {
                    r -= y0 * g;
                    row += g.abs();
                }
                if i + 1 < m {
                    r += sup[i] * yk[i + 2];
                    row += sup[i].norm();
                }
                worst = worst.max(r.norm());
                a_norm = a_norm.max(row);
                y_norm = y_norm.max(yk[i + 1].norm());
                f_norm = f_norm.max(self.rhs[k][i].norm());
            }
        }
        worst = worst.max(vertex.norm());
        a_norm = a_norm.max(vertex_row);
        let scale = a_norm * y_norm + f_norm;
        if scale > 0.0 {
            worst / scale
        } else {
            worst
        }
    }

    /// Full matrix of the system (vertex first, then edges in order).
    fn dense(&self) -> (CMatrix, Vec<Complex64>) {
        let size = 1 + self.bands.iter().map(|b| b.1.len()).sum::<usize>();
        let mut a = CMatrix::zeros(size, size);
        let mut f = vec![c(0.0); size];
        a[(0, 0)] = self.vertex_diag;
        f[0] = self.vertex_rhs;
        let mut off = 1;
        for (k, (sub, diag, sup)) in self.bands.iter().enumerate() {
            let g = self.first_flux[k];
            a[(0, off)] = c(-g);
            a[(off, 0)] = c(-g);
            for i in 0..diag.len() {
                a[(off + i, off + i)] = diag[i];
                if i + 1 < diag.len() {
                    a[(off + i, off + i + 1)] = sup[i];
                    a[(off + i + 1, off + i)] = sub[i];
                }
                f[off + i] = self.rhs[k][i];
            }
            off += diag.len();
        }
        (a, f)
    }
}

#[derive(Clone, Debug)]
pub struct RegularizedSolution {
    pub y: GridFunction,
    /// Normwise backward error of the discrete solve.
    pub residual: f64,
    /// Smallest over largest pivot among the edge factorizations.
    pub pivot_ratio: f64,
}

/// Solves `(H_eps - zeta) y = f` with the finite-volume scheme on `mesh`.
pub fn solve_regularized(p: &ResolventProblem, mesh: Arc<GraphMesh>) -> Result<RegularizedSolution> {
    check_mesh(p, &mesh)?;
    let sys = FvSystem::assemble(p, &mesh)?;
    let (values, pivot_ratio) = sys.solve()?;
    let residual = sys.residual(&values);
    if residual.is_nan() || residual > 1e-8 {
        return Err(Error::Numerical(format!(
            "finite-volume residual {residual:.3e} too large (pivot ratio {pivot_ratio:.3e})"
        )));
    }
    Ok(RegularizedSolution {
        y: GridFunction::new(mesh, values)?,
        residual,
        pivot_ratio,
    })
}

/// Same discretization solved with a dense LU; an oracle for small meshes.
pub fn solve_regularized_dense(p: &ResolventProblem, mesh: Arc<GraphMesh>) -> Result<GridFunction> {
    check_mesh(p, &mesh)?;
    let sys = FvSystem::assemble(p, &mesh)?;
    let (a, f) = sys.dense();
    let x = linalg::dense_solve(a, &f)?;
    let mut values = Vec::new();
    let mut off = 1;
    for (_, diag, _) in &sys.bands {
        let mut v = vec![x[0]];
        v.extend_from_slice(&x[off..off + diag.len()]);
        v.push(c(0.0));
        off += diag.len();
        values.push(v);
    }
    GridFunction::new(mesh, values)
}

fn check_mesh(p: &ResolventProblem, mesh: &GraphMesh) -> Result<()> {
    if mesh.edge_count() != p.graph.edge_count() {
        return Err(Error::MeshMismatch(format!(
            "mesh has {} edges, graph {}",
            mesh.edge_count(),
            p.graph.edge_count()
        )));
    }
    let t = p.graph.truncation();
    for e in mesh.edges() {
        let nodes = e.nodes();
        if nodes[0] != 0.0 || (nodes[nodes.len() - 1] - t).abs() > 1e-12 * t {
            return Err(Error::MeshMismatch(format!(
                "edge {} mesh must span [0, {t}]",
                e.edge()
            )));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// limit operator

/// Graded mesh used for the limit operator and for comparisons: geometric
/// from `min_step` with ratio `growth`, capped at `max_step`.
pub fn graded_mesh(
    graph: &StarGraph,
    min_step: f64,
    growth: f64,
    max_step: f64,
    forcing: &Forcing,
) -> Result<Arc<GraphMesh>> {
    let edges = (0..graph.edge_count())
        .map(|k| {
            EdgeMesh::geometric(
                k,
                graph.truncation(),
                min_step,
                growth,
                max_step,
                &forcing.edges[k].breakpoints(),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Arc::new(GraphMesh::new(edges)?))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitOptions {
    /// Matching point for the expansion at the vertex (capped by the first
    /// positive mesh node).
    pub tau_match: f64,
    /// Window for the finite-difference cross-check of the quasi-derivative.
    pub window: (f64, f64),
    /// Fits with a larger relative residual are flagged unreliable.
    pub fit_cap: f64,
    pub rtol: f64,
}

impl Default for LimitOptions {
    fn default() -> Self {
        Self {
            tau_match: 1e-6,
            window: (1e-5, 1e-2),
            fit_cap: 1e-3,
            rtol: 1e-12,
        }
    }
}

/// Vertex data `(phi(a), phi^[1](a))` of a limit solution.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QuasiDerivativeData {
    pub values: Vec<Complex64>,
    /// From the expansion match; these enter the vertex conditions.
    pub qderivs: Vec<Complex64>,
    pub fit_window: (f64, f64),
    /// Same quantities from finite differences on the window (cross-check);
    /// `None` where the fit failed.
    pub fit_qderivs: Vec<Option<Complex64>>,
    /// Largest relative fit residual over the edges.
    pub fit_residual: f64,
    pub reliable: bool,
}

#[derive(Clone, Debug)]
pub struct LimitSolution {
    pub y: GridFunction,
    pub quasi: QuasiDerivativeData,
    /// `‖A y(0) + B y^[1](0)‖`.
    pub vertex_residual: f64,
    /// Relative mismatch of the Wronskian evaluated at both ends.
    pub wronskian_drift: f64,
}

/// Per-edge pieces of the limit solution.
struct EdgeGreen {
    /// `Y0 / Y0(0)` at the nodes; equals 1 at `tau = 0`.
    y0hat: Vec<Complex64>,
    /// Particular solution vanishing at both ends.
    yf: Vec<Complex64>,
    /// `Y0^[1](0) / Y0(0)`.
    gamma: Complex64,
    /// `Yf^[1](0)`.
    delta: Complex64,
    drift: f64,
}

/// `[u1, u2, u1', u2']` of the two-term expansion at the vertex:
/// `u1 = 1 + q (t ln t - t) - zeta t²/2 + q² (t² ln t / 2 - 5 t² / 4)`,
/// `u2 = t + q t² / 2`.
fn frobenius(q: f64, zeta: Complex64, t: f64) -> [Complex64; 4] {
    let l = t.ln();
    let u1 = c(1.0 + q * (t * l - t) + q * q * (0.5 * t * t * l - 1.25 * t * t)) - zeta * (0.5 * t * t);
    let du1 = c(q * l + q * q * (t * l - 2.0 * t)) - zeta * t;
    let u2 = c(t + 0.5 * q * t * t);
    let du2 = c(1.0 + q * t);
    [u1, u2, du1, du2]
}

fn edge_green(
    q: f64,
    f: &Profile,
    zeta: Complex64,
    nodes: &[f64],
    opts: &LimitOptions,
    edge: usize,
) -> Result<EdgeGreen> {
    let m = nodes.len();
    let t_end = nodes[m - 1];
    let tm = opts.tau_match.min(nodes[1]);
    let tol = Tolerances {
        rtol: opts.rtol,
        atol: 1e-300,
        max_steps: 200_000,
    };
    let integration = |e: Error| Error::Integration {
        edge,
        message: e.to_string(),
    };

    // segment ends: nodes (except 0), forcing breakpoints, and tm
    let mut stops: Vec<f64> = nodes[1..].to_vec();
    stops.extend(f.breakpoints().into_iter().filter(|&b| b > tm && b < t_end));
    stops.push(tm);
    stops.sort_by(f64::total_cmp);
    stops.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * b.abs());

    let f_seg = |a: f64, b: f64| {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let pad = 1e-12 * (hi - lo);
        move |t: f64| f.eval(t.clamp(lo + pad, hi - pad))
    };

    // inward: [Y0, Y0', I2], I2(t) = ∫_t^T Y0 f
    let mut inward = vec![[c(0.0); 3]; stops.len()];
    let mut state = [c(0.0), c(-1.0), c(0.0)];
    let last = stops.len() - 1;
    inward[last] = state;
    let mut h = 1e-2;
    for i in (0..last).rev() {
        let (a, b) = (stops[i + 1], stops[i]);
        let fs = f_seg(a, b);
        let rhs = |t: f64, s: &[Complex64; 3]| [s[1], s[0] * (c(q / t) - zeta), -s[0] * fs(t)];
        let (next, hh) = ode::integrate(rhs, a, b, state, h, &tol).map_err(integration)?;
        state = next;
        h = hh;
        inward[i] = state;
    }
    // stops[0] == tm
    let [y_m, dy_m, i2_m] = inward[0];
    let [u1, u2, du1, du2] = frobenius(q, zeta, tm);
    let det = u1 * du2 - u2 * du1;
    let y0c = (y_m * du2 - u2 * dy_m) / det;
    let b0c = (u1 * dy_m - du1 * y_m) / det;
    if y0c.norm() == 0.0 || !y0c.is_finite() {
        return Err(Error::Numerical(format!(
            "decaying solution vanishes at the vertex on edge {edge}"
        )));
    }

    // outward: [Z, Z', I1], I1(t) = ∫_0^t Z f
    let f0 = f.eval(0.5 * tm);
    let mut outward = vec![[c(0.0); 3]; stops.len()];
    let mut state = [c(tm + 0.5 * q * tm * tm), c(1.0 + q * tm), c(0.5 * f0 * tm * tm)];
    outward[0] = state;
    let mut h = tm;
    for i in 0..last {
        let (a, b) = (stops[i], stops[i + 1]);
        let fs = f_seg(a, b);
        let rhs = |t: f64, s: &[Complex64; 3]| [s[1], s[0] * (c(q / t) - zeta), s[0] * fs(t)];
        let (next, hh) = ode::integrate(rhs, a, b, state, h, &tol).map_err(integration)?;
        state = next;
        h = hh;
        outward[i + 1] = state;
    }

    let w = outward[0][0] * dy_m - outward[0][1] * y_m;
    let w_end = -outward[last][0];
    let drift = (w - w_end).norm() / w.norm();

    let mut y0hat = Vec::with_capacity(m);
    let mut yf = Vec::with_capacity(m);
    y0hat.push(c(1.0));
    yf.push(c(0.0));
    let mut j = 0;
    for &t in &nodes[1..] {
        while stops[j] < t {
            j += 1;
        }
        let [y0v, _, i2] = inward[j];
        let [z, _, i1] = outward[j];
        y0hat.push(y0v / y0c);
        yf.push(-(y0v * i1 + z * i2) / w);
    }
    let i2_0 = i2_m + y0c * f0 * tm;
    Ok(EdgeGreen {
        y0hat,
        yf,
        gamma: b0c / y0c,
        delta: -i2_0 / w,
        drift,
    })
}

fn solve_with_conditions(
    p: &ResolventProblem,
    coulomb: &CoulombSpec,
    conditions: Option<&VertexConditions>,
    mesh: Arc<GraphMesh>,
    opts: &LimitOptions,
) -> Result<LimitSolution> {
    check_mesh(p, &mesh)?;
    let n = p.graph.edge_count();
    let parts: Vec<EdgeGreen> = (0..n)
        .into_par_iter()
        .map(|k| {
            edge_green(
                coulomb.q[k],
                &p.forcing.edges[k],
                p.zeta,
                mesh.edge(k).nodes(),
                opts,
                k,
            )
        })
        .collect::<Result<_>>()?;
    let gamma: Vec<Complex64> = parts.iter().map(|e| e.gamma).collect();
    let delta: Vec<Complex64> = parts.iter().map(|e| e.delta).collect();

    let (b, vertex_residual) = match conditions {
        None => (vec![c(0.0); n], 0.0),
        Some(vc) => {
            let mut sys = vc.a.clone();
            for i in 0..n {
                for k in 0..n {
                    sys[(i, k)] += vc.b[(i, k)] * gamma[k];
                }
            }
            let rhs: Vec<Complex64> = (0..n)
                .map(|i| -(0..n).map(|k| vc.b[(i, k)] * delta[k]).sum::<Complex64>())
                .collect();
            let sv = linalg::singular_values(&sys);
            if sv[n - 1] <= 1e-13 * sv[0] {
                return Err(Error::Numerical(format!(
                    "vertex system is ill-conditioned (sigma ratio {:.3e})",
                    sv[n - 1] / sv[0]
                )));
            }
            let b = linalg::dense_solve(sys, &rhs)?;
            let qd: Vec<Complex64> = (0..n).map(|k| b[k] * gamma[k] + delta[k]).collect();
            let bv = nalgebra::DVector::from_column_slice(&b);
            let qv = nalgebra::DVector::from_column_slice(&qd);
            let res = (&vc.a * bv + &vc.b * qv).norm();
            (b, res)
        }
    };

    let values: Vec<Vec<Complex64>> = parts
        .iter()
        .zip(&b)
        .map(|(e, &bk)| e.y0hat.iter().zip(&e.yf).map(|(y0, yf)| bk * y0 + yf).collect())
        .collect();
    let y = GridFunction::new(mesh, values)?;
    let qderivs: Vec<Complex64> = (0..n).map(|k| b[k] * gamma[k] + delta[k]).collect();

    let mut fit_qderivs = Vec::with_capacity(n);
    let mut fit_residual: f64 = 0.0;
    let mut fit_ok = true;
    for k in 0..n {
        match extract_quasi_derivative(&y, k, coulomb.q[k], b[k], opts.window) {
            Ok(fit) => {
                let scale = qderivs[k].norm().max(b[k].norm()).max(1e-300);
                fit_residual = fit_residual.max(fit.residual / scale);
                fit_qderivs.push(Some(fit.b));
            }
            Err(_) => {
                fit_ok = false;
                fit_qderivs.push(None);
            }
        }
    }
    let wronskian_drift = parts.iter().map(|e| e.drift).fold(0.0, f64::max);
    Ok(LimitSolution {
        y,
        quasi: QuasiDerivativeData {
            values: b,
            qderivs,
            fit_window: opts.window,
            fit_qderivs,
            fit_residual,
            reliable: fit_ok && fit_residual <= opts.fit_cap,
        },
        vertex_residual,
        wronskian_drift,
    })
}

/// Solves `(H - zeta) y = f` for the limit operator with `A y(0) + B y^[1](0) = 0`.
pub fn solve_limit(
    p: &ResolventProblem,
    mesh: Arc<GraphMesh>,
    opts: &LimitOptions,
) -> Result<LimitSolution> {
    match &p.operator {
        OperatorSpec::Limit { coulomb, conditions } => {
            solve_with_conditions(p, coulomb, Some(conditions), mesh, opts)
        }
        OperatorSpec::DirichletSum(coulomb) => solve_with_conditions(p, coulomb, None, mesh, opts),
        OperatorSpec::Regularized(_) => {
            Err(Error::Domain("solve_limit needs a limit or Dirichlet-sum operator".into()))
        }
    }
}

/// Decoupled edges with `y_k(0) = 0`.
pub fn solve_dirichlet_sum(
    p: &ResolventProblem,
    mesh: Arc<GraphMesh>,
    opts: &LimitOptions,
) -> Result<LimitSolution> {
    match &p.operator {
        OperatorSpec::DirichletSum(coulomb) | OperatorSpec::Limit { coulomb, .. } => {
            solve_with_conditions(p, coulomb, None, mesh, opts)
        }
        OperatorSpec::Regularized(_) => Err(Error::Domain(
            "solve_dirichlet_sum needs a Coulomb specification".into(),
        )),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuasiFit {
    pub b: Complex64,
    /// Root-mean-square deviation of the differenced data from `b`.
    pub residual: f64,
    pub nodes_used: usize,
}

/// Fits `y'(tau) ≈ q y0 ln tau + b` on `window` (plus a linear drift term).
///
/// The known singular primitive `q y0 (tau ln tau - tau)` is subtracted
/// before differencing, so the differences act on a smooth remainder;
/// centered three-point formulas inside the window, one-sided at its ends.
pub fn extract_quasi_derivative(
    y: &GridFunction,
    edge: usize,
    q: f64,
    y0: Complex64,
    window: (f64, f64),
) -> Result<QuasiFit> {
    let (lo, hi) = window;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::Domain(format!("bad fit window [{lo}, {hi}]")));
    }
    if edge >= y.edge_count() {
        return Err(Error::Domain(format!("edge {edge} out of range")));
    }
    let nodes = y.mesh().edge(edge).nodes();
    let vals = y.edge_values(edge);
    let idx: Vec<usize> = (0..nodes.len())
        .filter(|&i| nodes[i] >= lo && nodes[i] <= hi)
        .collect();
    if idx.len() < 4 {
        return Err(Error::Domain(format!(
            "fit window [{lo}, {hi}] holds {} nodes, need at least 4",
            idx.len()
        )));
    }
    let t: Vec<f64> = idx.iter().map(|&i| nodes[i]).collect();
    let g: Vec<Complex64> = idx
        .iter()
        .map(|&i| {
            let s = nodes[i];
            vals[i] - y0 * (q * (s * s.ln() - s))
        })
        .collect();
    let m = t.len();
    let d3 = |x0: f64, x1: f64, x2: f64, g0: Complex64, g1: Complex64, g2: Complex64, at: f64| {
        // derivative at `at` of the quadratic through the three points
        let l0 = ((at - x1) + (at - x2)) / ((x0 - x1) * (x0 - x2));
        let l1 = ((at - x0) + (at - x2)) / ((x1 - x0) * (x1 - x2));
        let l2 = ((at - x0) + (at - x1)) / ((x2 - x0) * (x2 - x1));
        g0 * l0 + g1 * l1 + g2 * l2
    };
    let mut d = Vec::with_capacity(m);
    for i in 0..m {
        let (a, b, cc) = if i == 0 {
            (0, 1, 2)
        } else if i == m - 1 {
            (m - 3, m - 2, m - 1)
        } else {
            (i - 1, i, i + 1)
        };
        d.push(d3(t[a], t[b], t[cc], g[a], g[b], g[cc], t[i]));
    }
    // least squares for d ≈ b + c tau (+ e tau ln tau when q != 0): the
    // extra terms absorb the next order of the expansion across the window
    let basis = |tt: f64| -> [f64; 3] { [1.0, tt, if q != 0.0 { tt * tt.ln() } else { 0.0 }] };
    let p = if q != 0.0 { 3 } else { 2 };
    let mut ata = CMatrix::zeros(p, p);
    let mut atd = CMatrix::zeros(p, 1);
    for (x, &tt) in d.iter().zip(&t) {
        let phi = basis(tt);
        for i in 0..p {
            atd[(i, 0)] += x * phi[i];
            for j in 0..p {
                ata[(i, j)] += c(phi[i] * phi[j]);
            }
        }
    }
    let coef = ata
        .lu()
        .solve(&atd)
        .ok_or_else(|| Error::Numerical("singular quasi-derivative fit".into()))?;
    let b = coef[(0, 0)];
    let mf = m as f64;
    let residual = (d
        .iter()
        .zip(&t)
        .map(|(x, &tt)| {
            let phi = basis(tt);
            let model: Complex64 = (0..p).map(|i| coef[(i, 0)] * phi[i]).sum();
            (x - model).norm_sqr()
        })
        .sum::<f64>()
        / mf)
        .sqrt();
    Ok(QuasiFit {
        b,
        residual,
        nodes_used: m,
    })
}
