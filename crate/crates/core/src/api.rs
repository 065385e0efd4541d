//! Request and response types for the top-level operations, shared by the
//! HTTP service, its client and the in-process CLI path.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coupling::{
    assemble_vertex_conditions, build_matrices, check_convergence_condition, decompose,
    green_identity_residual, green_identity_sampled, self_adjoint_report, ConvergenceCheck,
    CouplingMatrices, SelfAdjointReport, VertexConditions,
};
use crate::error::{Error, Result};
use crate::experiments::{run_sweep, scenario_library, ConvergenceReport, MeshSettings, SweepSpec};
use crate::graph::{GridFunction, StarGraph};
use crate::linalg::{serde_cmatrix, CMatrix};
use crate::potentials::{CoulombSpec, ShortRangeSpec};
use crate::resonance::{is_injective, solve_half_bound_states, ResonanceOptions, ResonanceResiduals};
use crate::solver::{
    graded_mesh, solve_dirichlet_sum, solve_limit, solve_regularized, OperatorSpec,
    QuasiDerivativeData, ResolventProblem,
};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResonanceRequest {
    pub short_range: ShortRangeSpec,
    #[serde(default)]
    pub options: ResonanceOptions,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResonanceResponse {
    pub rank: usize,
    /// Asymptotic values of the orthonormal half-bound states, one column each.
    #[serde(with = "serde_cmatrix")]
    pub l: CMatrix,
    pub singular_values: Vec<f64>,
    pub tol: f64,
    pub injective: bool,
    pub residuals: ResonanceResiduals,
}

pub fn resonance(req: &ResonanceRequest) -> Result<ResonanceResponse> {
    let data = solve_half_bound_states(&req.short_range, &req.options)?;
    Ok(ResonanceResponse {
        rank: data.rank(),
        l: data.l_matrix().clone(),
        singular_values: data.singular_values().to_vec(),
        tol: data.tol(),
        injective: is_injective(data.l_matrix(), req.options.tol),
        residuals: data.verify(&req.short_range.v),
    })
}

fn default_condition_tol() -> f64 {
    1e-9
}

fn default_self_adjoint_tol() -> f64 {
    1e-10
}

fn default_samples() -> usize {
    64
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConditionsRequest {
    pub coulomb: CoulombSpec,
    pub short_range: ShortRangeSpec,
    #[serde(default)]
    pub resonance: ResonanceOptions,
    #[serde(default = "default_condition_tol")]
    pub condition_tol: f64,
    #[serde(default = "default_self_adjoint_tol")]
    pub self_adjoint_tol: f64,
    /// Extra `(A, B)` to check for self-adjointness.
    #[serde(default)]
    pub user: Option<VertexConditions>,
    /// Seeds the random domain vectors of the sampled Green identity.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BlockSummary {
    /// 0-based edges.
    pub edges: Vec<usize>,
    pub columns: Vec<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PartitionSummary {
    pub non_resonant_edges: Vec<usize>,
    pub blocks: Vec<BlockSummary>,
    pub leakage: f64,
    pub exact: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct UserVerdict {
    pub conditions: VertexConditions,
    pub self_adjoint: SelfAdjointReport,
    pub green_residual: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConditionsResponse {
    pub rank: usize,
    pub matrices: CouplingMatrices,
    pub convergence: ConvergenceCheck,
    pub conditions: VertexConditions,
    pub self_adjoint: SelfAdjointReport,
    /// Symplectic form on basis pairs of the condition subspace.
    pub green_residual: f64,
    /// Same on random pairs (normalized).
    pub green_sampled: f64,
    pub partition: PartitionSummary,
    pub user: Option<UserVerdict>,
}

pub fn conditions(req: &ConditionsRequest) -> Result<ConditionsResponse> {
    let n = req.coulomb.edge_count();
    if n != req.short_range.edge_count() {
        return Err(Error::Domain(format!(
            "q has {n} entries, short-range spec {} edges",
            req.short_range.edge_count()
        )));
    }
    let res = solve_half_bound_states(&req.short_range, &req.resonance)?;
    let cm = build_matrices(&res, &req.coulomb, &req.short_range)?;
    let convergence = check_convergence_condition(&cm, req.condition_tol);
    let vc = assemble_vertex_conditions(&cm);
    let mut rng = ChaCha8Rng::seed_from_u64(req.seed);
    let dec = decompose(&res, 1e-9)?;
    let user = match &req.user {
        Some(u) => {
            let u = VertexConditions::new(u.a.clone(), u.b.clone(), u.kind)?;
            if u.edge_count() != n {
                return Err(Error::Domain(format!(
                    "user conditions are {}x{}, graph has {n} edges",
                    u.edge_count(),
                    u.edge_count()
                )));
            }
            Some(UserVerdict {
                self_adjoint: self_adjoint_report(&u, req.self_adjoint_tol),
                green_residual: green_identity_residual(&u),
                conditions: u,
            })
        }
        None => None,
    };
    Ok(ConditionsResponse {
        rank: cm.rank(),
        self_adjoint: self_adjoint_report(&vc, req.self_adjoint_tol),
        green_residual: green_identity_residual(&vc),
        green_sampled: green_identity_sampled(&vc, req.samples, &mut rng),
        partition: PartitionSummary {
            non_resonant_edges: dec.non_resonant_edges.clone(),
            blocks: dec
                .blocks
                .iter()
                .map(|b| BlockSummary {
                    edges: b.edges.clone(),
                    columns: b.columns.clone(),
                })
                .collect(),
            leakage: dec.leakage,
            exact: dec.exact,
        },
        matrices: cm,
        convergence,
        conditions: vc,
        user,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveRequest {
    pub problem: ResolventProblem,
    #[serde(default)]
    pub mesh: MeshSettings,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EdgeSolution {
    pub tau: Vec<f64>,
    pub values: Vec<Complex64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveResponse {
    pub zeta: Complex64,
    pub edges: Vec<EdgeSolution>,
    pub vertex_values: Vec<Complex64>,
    pub l2_norm: f64,
    pub forcing_l2_norm: f64,
    /// Backward error (regularized) or vertex-condition residual (limit).
    pub residual: f64,
    pub quasi: Option<QuasiDerivativeData>,
}

fn edges_of(y: &GridFunction) -> Vec<EdgeSolution> {
    y.mesh()
        .edges()
        .iter()
        .zip(y.values())
        .map(|(m, v)| EdgeSolution {
            tau: m.nodes().to_vec(),
            values: v.clone(),
        })
        .collect()
}

pub fn solve(req: &SolveRequest) -> Result<SolveResponse> {
    let p = &req.problem;
    // deserialized input bypasses the constructors
    let graph = StarGraph::new(p.graph.edge_count(), p.graph.truncation())?;
    let p = ResolventProblem::new(graph, p.zeta, p.forcing.clone(), p.operator.clone())?;
    let s = &req.mesh;
    let (y, residual, quasi) = match &p.operator {
        OperatorSpec::Regularized(pot) => {
            let mesh = s.regularized.mesh(&graph, pot, &p.forcing)?;
            let sol = solve_regularized(&p, mesh)?;
            (sol.y, sol.residual, None)
        }
        OperatorSpec::Limit { .. } | OperatorSpec::DirichletSum(_) => {
            let mesh = graded_mesh(
                &graph,
                s.comparison_min_step,
                s.comparison_growth,
                s.comparison_max_step,
                &p.forcing,
            )?;
            let sol = if matches!(p.operator, OperatorSpec::Limit { .. }) {
                solve_limit(&p, mesh, &s.limit)?
            } else {
                solve_dirichlet_sum(&p, mesh, &s.limit)?
            };
            (sol.y, sol.vertex_residual, Some(sol.quasi))
        }
    };
    let forcing_l2_norm = p.forcing.sample(y.mesh().clone()).l2_norm();
    Ok(SolveResponse {
        zeta: p.zeta,
        edges: edges_of(&y),
        vertex_values: y.vertex_values(),
        l2_norm: y.l2_norm(),
        forcing_l2_norm,
        residual,
        quasi,
    })
}

pub fn sweep(spec: &SweepSpec) -> Result<ConvergenceReport> {
    run_sweep(spec)
}

/// JSON body of a failed request.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub kind: String,
    pub message: String,
}

impl From<&Error> for ErrorBody {
    fn from(e: &Error) -> Self {
        ErrorBody {
            kind: e.kind().to_string(),
            message: e.to_string(),
        }
    }
}

pub fn scenarios() -> Vec<SweepSpec> {
    scenario_library()
}
