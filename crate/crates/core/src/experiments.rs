//! Epsilon sweeps comparing the regularized resolvent with the limit
//! operators, rate fits, and the canonical scenario library.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coupling::{
    assemble_vertex_conditions, build_matrices, check_convergence_condition, ConditionKind,
    CouplingMatrices, VertexConditions,
};
use crate::error::{Error, Result};
use crate::graph::{GraphMesh, GridFunction, StarGraph};
use crate::linalg::CMatrix;
use crate::potentials::{check_eps, CoulombSpec, Profile, RegularizedPotential, ShortRangeSpec};
use crate::resonance::{solve_half_bound_states, ResonanceOptions};
use crate::solver::{
    check_zeta, default_truncation, graded_mesh, solve_dirichlet_sum, solve_limit,
    solve_regularized, Forcing, LimitOptions, OperatorSpec, QuasiDerivativeData,
    RegularizedMeshPolicy, ResolventProblem,
};

/// Which limit the regularized family should approach.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    ConvergesToLimit,
    ConvergesToDirichlet,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub id: String,
    pub description: String,
    pub coulomb: CoulombSpec,
    pub short_range: ShortRangeSpec,
    #[serde(default)]
    pub resonance: ResonanceOptions,
    /// Absolute tolerance for the convergence condition.
    #[serde(default = "default_condition_tol")]
    pub condition_tol: f64,
    pub expected: Outcome,
}

fn default_condition_tol() -> f64 {
    1e-9
}

impl ScenarioSpec {
    pub fn edge_count(&self) -> usize {
        self.coulomb.edge_count()
    }

    pub fn validate(&self) -> Result<()> {
        self.short_range.validate()?;
        if self.coulomb.edge_count() != self.short_range.edge_count() {
            return Err(Error::Config(format!(
                "scenario {}: q has {} entries but the short-range spec has {} edges",
                self.id,
                self.coulomb.edge_count(),
                self.short_range.edge_count()
            )));
        }
        if self.edge_count() < 2 {
            return Err(Error::Config(format!("scenario {}: need n >= 2", self.id)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeshSettings {
    pub regularized: RegularizedMeshPolicy,
    /// Comparison (and limit-solver) mesh: geometric from `min_step`.
    pub comparison_min_step: f64,
    pub comparison_growth: f64,
    pub comparison_max_step: f64,
    pub limit: LimitOptions,
}

impl Default for MeshSettings {
    fn default() -> Self {
        Self {
            regularized: RegularizedMeshPolicy::default(),
            comparison_min_step: 1e-7,
            comparison_growth: 1.05,
            comparison_max_step: 2e-3,
            limit: LimitOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub scenario: ScenarioSpec,
    pub zetas: Vec<Complex64>,
    pub forcing: Forcing,
    /// Strictly decreasing values in `(0, 1)`.
    pub eps: Vec<f64>,
    /// Defaults to `8 / Re sqrt(-zeta)` over the zeta list.
    #[serde(default)]
    pub truncation: Option<f64>,
    #[serde(default)]
    pub mesh: MeshSettings,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        if self.eps.is_empty() {
            return Err(Error::Config("empty epsilon list".into()));
        }
        for &e in &self.eps {
            check_eps(e)?;
        }
        if !self.eps.windows(2).all(|w| w[1] < w[0]) {
            return Err(Error::Config("epsilon list must be strictly decreasing".into()));
        }
        if self.zetas.is_empty() {
            return Err(Error::Config("empty zeta list".into()));
        }
        for &z in &self.zetas {
            check_zeta(z)?;
        }
        if self.forcing.edge_count() != self.scenario.edge_count() {
            return Err(Error::Config(format!(
                "forcing has {} edges, scenario {}",
                self.forcing.edge_count(),
                self.scenario.edge_count()
            )));
        }
        self.graph()?;
        Ok(())
    }

    pub fn truncation(&self) -> f64 {
        self.truncation.unwrap_or_else(|| {
            self.zetas
                .iter()
                .map(|&z| default_truncation(z))
                .fold(2.0, f64::max)
        })
    }

    pub fn graph(&self) -> Result<StarGraph> {
        StarGraph::new(self.scenario.edge_count(), self.truncation())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepRow {
    pub eps: f64,
    pub zeta: Complex64,
    pub err_vs_limit: f64,
    pub err_vs_dirichlet: f64,
    /// Step inside `[0, eps]` of the regularized mesh.
    pub mesh_h: f64,
    pub truncation: f64,
    /// `max_k |y_eps,k(0)|`.
    pub vertex_abs: f64,
    /// `max_{k,l} |y_eps,k(eps) - y_eps,l(eps)|`.
    pub continuity_defect: f64,
    pub solver_residual: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    /// Slope of `ln e` against `ln eps`; NaN when inconclusive.
    #[serde(with = "crate::linalg::serde_nonfinite")]
    pub p: f64,
    #[serde(with = "crate::linalg::serde_nonfinite")]
    pub std_error: f64,
    pub points: usize,
    pub conclusive: bool,
}

/// Least-squares slope of `ln e` against `ln eps` using the points whose
/// error exceeds ten times `floor`. Fewer than four such points, or any
/// nonpositive error among them, gives an inconclusive fit.
pub fn fit_rate(points: &[(f64, f64)], floor: f64) -> RateFit {
    let used: Vec<(f64, f64)> = points
        .iter()
        .copied()
        .filter(|&(eps, e)| eps > 0.0 && e > 10.0 * floor && e > 0.0)
        .map(|(eps, e)| (eps.ln(), e.ln()))
        .collect();
    let m = used.len();
    if m < 4 {
        return RateFit {
            p: f64::NAN,
            std_error: f64::NAN,
            points: m,
            conclusive: false,
        };
    }
    let mf = m as f64;
    let mx = used.iter().map(|p| p.0).sum::<f64>() / mf;
    let my = used.iter().map(|p| p.1).sum::<f64>() / mf;
    let sxx: f64 = used.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = used.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let p = sxy / sxx;
    let ssr: f64 = used
        .iter()
        .map(|q| (q.1 - my - p * (q.0 - mx)).powi(2))
        .sum();
    let std_error = (ssr / (mf - 2.0) / sxx).sqrt();
    RateFit {
        p,
        std_error,
        points: m,
        conclusive: true,
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ZetaSummary {
    pub zeta: Complex64,
    pub fit_vs_limit: RateFit,
    pub fit_vs_dirichlet: RateFit,
    /// `‖y^h - y^{h/2}‖` at the smallest epsilon.
    pub error_floor: f64,
    pub limit_quasi: QuasiDerivativeData,
    pub limit_vertex_residual: f64,
    pub outcome: Outcome,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub scenario: String,
    pub resonance_rank: usize,
    pub condition_holds: bool,
    pub condition_residual: f64,
    pub conditions: VertexConditions,
    pub rows: Vec<SweepRow>,
    pub zetas: Vec<ZetaSummary>,
    pub outcome: Outcome,
    pub expected: Outcome,
    pub passed: bool,
}

impl ConvergenceReport {
    /// Rows for one zeta, in sweep order.
    pub fn rows_for(&self, zeta: Complex64) -> Vec<&SweepRow> {
        self.rows.iter().filter(|r| r.zeta == zeta).collect()
    }
}

/// Matrices and conditions of a scenario.
pub fn scenario_conditions(s: &ScenarioSpec) -> Result<(CouplingMatrices, VertexConditions, bool, f64)> {
    let res = solve_half_bound_states(&s.short_range, &s.resonance)?;
    let cm = build_matrices(&res, &s.coulomb, &s.short_range)?;
    let chk = check_convergence_condition(&cm, s.condition_tol);
    let vc = assemble_vertex_conditions(&cm);
    Ok((cm, vc, chk.holds, chk.residual))
}

/// Errors decay along the sweep: the last error is at most 0.6 times the
/// first and the second half of the sweep is monotone.
fn decays(errors: &[f64]) -> bool {
    let m = errors.len();
    if m < 2 {
        return false;
    }
    let tail = &errors[m / 2..];
    errors[m - 1] <= 0.6 * errors[0] && tail.windows(2).all(|w| w[1] <= w[0])
}

fn classify(err_lim: &[f64], err_dir: &[f64], kind: ConditionKind) -> Outcome {
    let lim = decays(err_lim);
    let dir = decays(err_dir);
    if dir && (kind == ConditionKind::DirichletSum || !lim) {
        Outcome::ConvergesToDirichlet
    } else if lim {
        Outcome::ConvergesToLimit
    } else {
        Outcome::Inconclusive
    }
}

fn comparison_mesh(spec: &SweepSpec, graph: &StarGraph) -> Result<Arc<GraphMesh>> {
    graded_mesh(
        graph,
        spec.mesh.comparison_min_step,
        spec.mesh.comparison_growth,
        spec.mesh.comparison_max_step,
        &spec.forcing,
    )
}

/// Regularized solution resampled onto `target`, with diagnostics.
fn regularized_on(
    spec: &SweepSpec,
    graph: &StarGraph,
    zeta: Complex64,
    eps: f64,
    policy: &RegularizedMeshPolicy,
    target: &Arc<GraphMesh>,
) -> Result<(GridFunction, f64, f64, f64)> {
    let s = &spec.scenario;
    let pot = RegularizedPotential::new(s.coulomb.clone(), s.short_range.clone(), eps)?;
    let mesh = policy.mesh(graph, &pot, &spec.forcing)?;
    let p = ResolventProblem::new(
        *graph,
        zeta,
        spec.forcing.clone(),
        OperatorSpec::Regularized(pot),
    )?;
    let sol = solve_regularized(&p, mesh)?;
    let vertex_abs = sol.y.vertex_values().iter().map(|z| z.norm()).fold(0.0, f64::max);
    let at_eps: Vec<Complex64> = (0..graph.edge_count()).map(|k| sol.y.interpolate(k, eps)).collect();
    let mut defect: f64 = 0.0;
    for a in &at_eps {
        for b in &at_eps {
            defect = defect.max((a - b).norm());
        }
    }
    Ok((sol.y.resample(target.clone())?, vertex_abs, defect, sol.residual))
}

/// Runs every `(eps, zeta)` cell and classifies the outcome per zeta.
pub fn run_sweep(spec: &SweepSpec) -> Result<ConvergenceReport> {
    spec.validate()?;
    let s = &spec.scenario;
    let graph = spec.graph()?;
    let (cm, vc, holds, residual) = scenario_conditions(s)?;
    let target = comparison_mesh(spec, &graph)?;

    struct Limits {
        coupled: GridFunction,
        dirichlet: GridFunction,
        quasi: QuasiDerivativeData,
        vertex_residual: f64,
    }
    let limits: Vec<Limits> = spec
        .zetas
        .par_iter()
        .map(|&zeta| {
            let lp = ResolventProblem::new(
                graph,
                zeta,
                spec.forcing.clone(),
                OperatorSpec::Limit {
                    coulomb: s.coulomb.clone(),
                    conditions: vc.clone(),
                },
            )?;
            let coupled = solve_limit(&lp, target.clone(), &spec.mesh.limit)?;
            let dirichlet = solve_dirichlet_sum(&lp, target.clone(), &spec.mesh.limit)?;
            Ok(Limits {
                coupled: coupled.y,
                dirichlet: dirichlet.y,
                quasi: coupled.quasi,
                vertex_residual: coupled.vertex_residual,
            })
        })
        .collect::<Result<_>>()?;

    let cells: Vec<(usize, f64)> = (0..spec.zetas.len())
        .flat_map(|z| spec.eps.iter().map(move |&e| (z, e)))
        .collect();
    let policy = spec.mesh.regularized;
    let t = graph.truncation();
    let rows: Vec<SweepRow> = cells
        .par_iter()
        .map(|&(zi, eps)| {
            let zeta = spec.zetas[zi];
            let (y, vertex_abs, continuity_defect, solver_residual) =
                regularized_on(spec, &graph, zeta, eps, &policy, &target)
                    .map_err(|e| Error::Sweep {
                        eps,
                        source: Box::new(e),
                    })?;
            Ok(SweepRow {
                eps,
                zeta,
                err_vs_limit: y.sub(&limits[zi].coupled)?.l2_norm(),
                err_vs_dirichlet: y.sub(&limits[zi].dirichlet)?.l2_norm(),
                mesh_h: eps / policy.inner_cells as f64,
                truncation: t,
                vertex_abs,
                continuity_defect,
                solver_residual,
            })
        })
        .collect::<Result<_>>()?;

    // discretization floor at the smallest epsilon
    let eps_min = *spec.eps.last().unwrap();
    let fine = RegularizedMeshPolicy {
        inner_cells: policy.inner_cells * 2,
        growth: policy.growth.sqrt(),
        max_step: policy.max_step / 2.0,
    };
    let floors: Vec<f64> = spec
        .zetas
        .par_iter()
        .map(|&zeta| {
            let wrap = |e| Error::Sweep {
                eps: eps_min,
                source: Box::new(e),
            };
            let (coarse, ..) = regularized_on(spec, &graph, zeta, eps_min, &policy, &target).map_err(wrap)?;
            let (finer, ..) = regularized_on(spec, &graph, zeta, eps_min, &fine, &target).map_err(wrap)?;
            Ok(coarse.sub(&finer)?.l2_norm())
        })
        .collect::<Result<_>>()?;

    let mut zetas = Vec::new();
    for (zi, &zeta) in spec.zetas.iter().enumerate() {
        let rs: Vec<&SweepRow> = rows.iter().filter(|r| r.zeta == zeta).collect();
        let lim: Vec<f64> = rs.iter().map(|r| r.err_vs_limit).collect();
        let dir: Vec<f64> = rs.iter().map(|r| r.err_vs_dirichlet).collect();
        let pts = |e: &[f64]| -> Vec<(f64, f64)> { spec.eps.iter().copied().zip(e.iter().copied()).collect() };
        zetas.push(ZetaSummary {
            zeta,
            fit_vs_limit: fit_rate(&pts(&lim), floors[zi]),
            fit_vs_dirichlet: fit_rate(&pts(&dir), floors[zi]),
            error_floor: floors[zi],
            limit_quasi: limits[zi].quasi.clone(),
            limit_vertex_residual: limits[zi].vertex_residual,
            outcome: classify(&lim, &dir, vc.kind),
        });
    }
    let first = zetas[0].outcome;
    let outcome = if zetas.iter().all(|z| z.outcome == first) {
        first
    } else {
        Outcome::Inconclusive
    };
    Ok(ConvergenceReport {
        scenario: s.id.clone(),
        resonance_rank: cm.rank(),
        condition_holds: holds,
        condition_residual: residual,
        conditions: vc,
        rows,
        zetas,
        outcome,
        expected: s.expected,
        passed: outcome == s.expected,
    })
}

#[derive(Serialize)]
struct CsvRow {
    eps: f64,
    zeta_re: f64,
    zeta_im: f64,
    err_vs_limit: f64,
    err_vs_dirichlet: f64,
    mesh_h: f64,
    #[serde(rename = "T")]
    t: f64,
}

/// `eps,zeta_re,zeta_im,err_vs_limit,err_vs_dirichlet,mesh_h,T`.
pub fn write_sweep_csv(report: &ConvergenceReport, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in &report.rows {
        w.serialize(CsvRow {
            eps: r.eps,
            zeta_re: r.zeta.re,
            zeta_im: r.zeta.im,
            err_vs_limit: r.err_vs_limit,
            err_vs_dirichlet: r.err_vs_dirichlet,
            mesh_h: r.mesh_h,
            t: r.truncation,
        })?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct Summary<'a> {
    scenario: &'a str,
    resonance_rank: usize,
    condition_holds: bool,
    condition_residual: f64,
    condition_kind: ConditionKind,
    outcome: Outcome,
    expected: Outcome,
    passed: bool,
    zetas: &'a [ZetaSummary],
    rows: &'a [SweepRow],
}

/// Writes `<id>.csv` and `<id>.summary.json` into `dir`, which must exist.
pub fn write_report(report: &ConvergenceReport, dir: &Path) -> Result<()> {
    if !dir.is_dir() {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("output directory {} does not exist", dir.display()),
        )));
    }
    write_sweep_csv(report, &dir.join(format!("{}.csv", report.scenario)))?;
    let summary = Summary {
        scenario: &report.scenario,
        resonance_rank: report.resonance_rank,
        condition_holds: report.condition_holds,
        condition_residual: report.condition_residual,
        condition_kind: report.conditions.kind,
        outcome: report.outcome,
        expected: report.expected,
        passed: report.passed,
        zetas: &report.zetas,
        rows: &report.rows,
    };
    let json = serde_json::to_string_pretty(&summary).map_err(|e| Error::Numerical(e.to_string()))?;
    fs::write(dir.join(format!("{}.summary.json", report.scenario)), json)?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MankoForm {
    /// `r = 1`: `phi_k(a)/theta_k` equal, `sum theta_k phi'_k(a) = 0`.
    SimpleResonance,
    /// `r = n - 1`: `sum eta_k phi_k(a) = 0`, `phi'_k(a)/eta_k` equal.
    DoubleResonance,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MankoReport {
    pub form: MankoForm,
    /// Largest cross-multiplied ratio defect, relative to the data scale.
    pub ratio_defect: f64,
    /// Weighted-sum defect, relative to the data scale.
    pub sum_defect: f64,
}

/// Checks the ratio form of scale-invariant conditions on limit vertex data.
/// `theta` (for `r = 1`) spans the resonant space, `eta` (for `r = n - 1`)
/// its complement; both are taken from `cm`. Ratios are compared
/// cross-multiplied so zero entries follow the usual convention.
pub fn manko_check(cm: &CouplingMatrices, quasi: &QuasiDerivativeData) -> Result<MankoReport> {
    let n = cm.edge_count();
    let r = cm.rank();
    let (form, dir, vals, ders) = if r == 1 {
        (MankoForm::SimpleResonance, cm.l.column(0).into_owned(), &quasi.values, &quasi.qderivs)
    } else if r + 1 == n {
        (MankoForm::DoubleResonance, cm.r_perp.column(0).into_owned(), &quasi.qderivs, &quasi.values)
    } else {
        return Err(Error::Domain(format!(
            "ratio conditions need r = 1 or r = n - 1, got r = {r}, n = {n}"
        )));
    };
    // `ratio` applies to `vals`, the weighted sum to `ders`
    let scale = vals
        .iter()
        .chain(ders.iter())
        .map(|z| z.norm())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let mut ratio_defect: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            ratio_defect = ratio_defect.max((vals[i] * dir[j] - vals[j] * dir[i]).norm());
        }
    }
    let sum: Complex64 = (0..n).map(|k| dir[k].conj() * ders[k]).sum();
    Ok(MankoReport {
        form,
        ratio_defect: ratio_defect / scale,
        sum_defect: sum.norm() / scale,
    })
}

fn unit_forcing(n: usize) -> Forcing {
    let mut edges = vec![Profile::Zero; n];
    edges[0] = Profile::constant_on(1.0, 0.0, 1.0);
    edges[1] = Profile::constant_on(0.5, 0.5, 1.5);
    Forcing::new(edges).expect("valid forcing")
}

/// `2^-4, ..., 2^-10`.
pub fn default_eps() -> Vec<f64> {
    (4..=10).map(|j| 2f64.powi(-j)).collect()
}

fn sweep(id: &str, description: &str, coulomb: CoulombSpec, short_range: ShortRangeSpec, expected: Outcome) -> SweepSpec {
    let n = coulomb.edge_count();
    SweepSpec {
        scenario: ScenarioSpec {
            id: id.into(),
            description: description.into(),
            coulomb,
            short_range,
            resonance: ResonanceOptions::default(),
            condition_tol: default_condition_tol(),
            expected,
        },
        zetas: vec![Complex64::new(0.0, 1.0)],
        forcing: unit_forcing(n),
        eps: default_eps(),
        truncation: None,
        mesh: MeshSettings::default(),
    }
}

/// Canonical scenarios; ids are stable and used by the CLI.
pub fn scenario_library() -> Vec<SweepSpec> {
    let well = -PI * PI / 4.0;
    let z = Profile::Zero;
    let mut out = vec![
        sweep(
            "a_delta",
            "delta coupling: n = 3, U = 1, V = kappa = q = 0",
            CoulombSpec::zero(3),
            ShortRangeSpec::uniform(3, z.clone(), Profile::unit(1.0), z.clone()),
            Outcome::ConvergesToLimit,
        ),
        sweep(
            "b_resonant_delta_prime",
            "resonant well V = -pi^2/4 on all three edges (r = 2), U = 0: scale-invariant limit",
            CoulombSpec::zero(3),
            ShortRangeSpec::uniform(3, z.clone(), z.clone(), Profile::unit(well)),
            Outcome::ConvergesToLimit,
        ),
        sweep(
            "c_nonresonant_delta_prime",
            "non-resonant V = 10 on all three edges: Dirichlet direct sum",
            CoulombSpec::zero(3),
            ShortRangeSpec::uniform(3, z.clone(), Profile::unit(1.0), Profile::unit(10.0)),
            Outcome::ConvergesToDirichlet,
        ),
        sweep(
            "d_alpha_delta_prime_beta_delta",
            "U = lambda V with V = -pi^2/4, lambda = 0.5",
            CoulombSpec::zero(3),
            ShortRangeSpec::uniform(3, z.clone(), Profile::unit(0.5 * well), Profile::unit(well)),
            Outcome::ConvergesToLimit,
        ),
        sweep(
            "e_coulomb_balanced",
            "q = (1, 2, 3), kappa = 2, U = 1: sum q = integral of kappa",
            CoulombSpec::new(vec![1.0, 2.0, 3.0]).unwrap(),
            ShortRangeSpec::uniform(3, Profile::unit(2.0), Profile::unit(1.0), z.clone()),
            Outcome::ConvergesToLimit,
        ),
        sweep(
            "f_coulomb_unbalanced",
            "q = (1, 2, 3), kappa = 0, U = 1: condition violated, Dirichlet direct sum",
            CoulombSpec::new(vec![1.0, 2.0, 3.0]).unwrap(),
            ShortRangeSpec::uniform(3, z.clone(), Profile::unit(1.0), z.clone()),
            Outcome::ConvergesToDirichlet,
        ),
        sweep(
            "g_block_resonant",
            "n = 4: V = -pi^2/4 on edges 1, 2 and V = 10 on edges 3, 4, U = 1",
            CoulombSpec::zero(4),
            ShortRangeSpec::new(
                vec![z.clone(); 4],
                vec![Profile::unit(1.0); 4],
                vec![Profile::unit(well), Profile::unit(well), Profile::unit(10.0), Profile::unit(10.0)],
            )
            .unwrap(),
            Outcome::ConvergesToLimit,
        ),
        sweep(
            "h_line_coulomb",
            "line: q = 1 on the left, 2 on the right (star q = (-1, 2)), kappa = 0.5, U = 0.5",
            CoulombSpec::from_line(1.0, 2.0),
            ShortRangeSpec::uniform(2, Profile::unit(0.5), Profile::unit(0.5), z.clone()),
            Outcome::ConvergesToLimit,
        ),
        sweep(
            "i_line_cutoff",
            "line cutoff family: q = -1 on the left, 1 on the right (even potential), kappa = 0",
            CoulombSpec::from_line(-1.0, 1.0),
            ShortRangeSpec::zero(2),
            Outcome::ConvergesToDirichlet,
        ),
    ];
    // the resonance of the discrete well must be resolved well below eps
    out[1].mesh.regularized.inner_cells = 2000;
    out[3].mesh.regularized.inner_cells = 2000;
    out[6].mesh.regularized.inner_cells = 2000;
    out
}

/// Looks up a scenario by id or by its one-letter prefix.
pub fn find_scenario(id: &str) -> Option<SweepSpec> {
    scenario_library()
        .into_iter()
        .find(|s| s.scenario.id == id || s.scenario.id.split('_').next() == Some(id))
}

/// Per-block `L` column sets used by the (E; L0) comparison form: for an
/// `L` whose top `r x r` block is invertible, returns `X` with
/// `L X = (E; L0)`.
pub fn echelon_basis_change(l: &CMatrix) -> Result<CMatrix> {
    let r = l.ncols();
    let top = l.rows(0, r).into_owned();
    top.try_inverse()
        .ok_or_else(|| Error::Domain("top block of L is singular; rearrange the edges".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    #[test]
    fn fit_rate_synthetic() {
        let eps = default_eps();
        let half: Vec<(f64, f64)> = eps.iter().map(|&e| (e, e.sqrt())).collect();
        let fit = fit_rate(&half, 0.0);
        assert!(fit.conclusive);
        assert!((fit.p - 0.5).abs() < 1e-12);
        assert!(fit.std_error < 1e-10);
        let quarter: Vec<(f64, f64)> = eps.iter().map(|&e| (e, 3.0 * e.powf(0.25))).collect();
        assert!((fit_rate(&quarter, 0.0).p - 0.25).abs() < 1e-12);
        // floor excludes everything
        let fit = fit_rate(&quarter, 1.0);
        assert!(!fit.conclusive);
        assert!(fit.p.is_nan());
    }

    #[test]
    fn library_is_valid() {
        let lib = scenario_library();
        assert_eq!(lib.len(), 9);
        for s in &lib {
            s.validate().unwrap();
        }
        let e = find_scenario("e").unwrap();
        let (_, _, holds, _) = scenario_conditions(&e.scenario).unwrap();
        assert!(holds);
        let f = find_scenario("f_coulomb_unbalanced").unwrap();
        assert!(!scenario_conditions(&f.scenario).unwrap().2);
        assert!(find_scenario("zz").is_none());
    }

    #[test]
    fn sweep_spec_validation() {
        let mut s = find_scenario("a").unwrap();
        s.eps = vec![0.1, 0.2];
        assert!(s.validate().is_err());
        s.eps = vec![0.5, 1.0];
        assert!(s.validate().is_err());
        s.eps = vec![0.1];
        s.zetas = vec![c(1.0)];
        assert!(s.validate().is_err());
    }

    #[test]
    fn decay_classification() {
        let down = [1.0, 0.7, 0.5, 0.3, 0.2];
        let flat = [1.0, 1.0, 0.99, 1.01, 1.0];
        assert_eq!(classify(&down, &flat, ConditionKind::Delta), Outcome::ConvergesToLimit);
        assert_eq!(classify(&flat, &down, ConditionKind::Delta), Outcome::ConvergesToDirichlet);
        assert_eq!(classify(&down, &down, ConditionKind::DirichletSum), Outcome::ConvergesToDirichlet);
        assert_eq!(classify(&flat, &flat, ConditionKind::Generic), Outcome::Inconclusive);
    }
}
