//! Run configuration: one TOML (or JSON, by extension) file fully
//! determines a run.
//!
//! ```toml
//! scenario = "a"              # optional library entry to start from
//! [graph]
//! n = 3
//! [potentials]
//! q = [0.0, 0.0, 0.0]
//! u = { kind = "constant", value = 1.0 }
//! [solver]
//! zeta = [0.0, 1.0]
//! [sweep]
//! eps = [6.25e-2, 3.125e-2]
//! ```

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::api::{ConditionsRequest, ResonanceRequest, SolveRequest};
use crate::coupling::{
    assemble_vertex_conditions, build_matrices, check_convergence_condition, ConditionKind,
    VertexConditions,
};
use crate::error::{Error, Result};
use crate::experiments::{
    default_eps, find_scenario, MeshSettings, Outcome, ScenarioSpec, SweepSpec,
};
use crate::graph::StarGraph;
use crate::linalg::CMatrix;
use crate::potentials::{check_eps, CoulombSpec, Profile, RegularizedPotential, ShortRangeSpec};
use crate::resonance::{solve_half_bound_states, ResonanceOptions};
use crate::solver::{check_zeta, default_truncation, Forcing, OperatorSpec, ResolventProblem};

/// An inline profile, or `{ csv = "path" }` naming a two-column
/// `tau,value` table (relative paths are taken from the config's directory).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProfileEntry {
    File { csv: PathBuf },
    Inline(Profile),
}

impl ProfileEntry {
    fn resolve(&self, root: Option<&Path>) -> Result<Profile> {
        match self {
            Self::Inline(p) => Ok(p.clone()),
            Self::File { csv } => {
                let path = match root {
                    Some(r) if csv.is_relative() => r.join(csv),
                    _ => csv.clone(),
                };
                Profile::from_csv(&path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
            }
        }
    }
}

/// One profile for every edge, or one per edge.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EdgeProfiles {
    PerEdge(Vec<ProfileEntry>),
    Uniform(ProfileEntry),
}

impl EdgeProfiles {
    fn expand(&self, n: usize, what: &str, root: Option<&Path>) -> Result<Vec<Profile>> {
        match self {
            Self::Uniform(p) => Ok(vec![p.resolve(root)?; n]),
            Self::PerEdge(v) if v.len() == n => v.iter().map(|p| p.resolve(root)).collect(),
            Self::PerEdge(v) => Err(Error::Config(format!(
                "{what}: {} profiles given for {n} edges",
                v.len()
            ))),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSection {
    pub n: Option<usize>,
    pub truncation: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSection {
    /// Star coefficients `q_k`.
    pub q: Option<Vec<f64>>,
    /// Line coefficients `(q_left, q_right)` for `n = 2`.
    pub line_q: Option<[f64; 2]>,
    pub kappa: Option<EdgeProfiles>,
    pub u: Option<EdgeProfiles>,
    pub v: Option<EdgeProfiles>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorChoice {
    Regularized,
    #[default]
    Limit,
    DirichletSum,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    /// `[re, im]`.
    pub zeta: Option<Complex64>,
    pub operator: Option<OperatorChoice>,
    /// Required for the regularized operator.
    pub eps: Option<f64>,
    pub resonance: Option<ResonanceOptions>,
    pub condition_tol: Option<f64>,
    pub self_adjoint_tol: Option<f64>,
    pub mesh: Option<MeshSettings>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub eps: Option<Vec<f64>>,
    pub zetas: Option<Vec<Complex64>>,
    pub expected: Option<Outcome>,
}

/// User-supplied `(A, B)`; rows of real parts plus optional imaginary parts.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionsSection {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub a_im: Option<Vec<Vec<f64>>>,
    pub b_im: Option<Vec<Vec<f64>>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub scenario: Option<String>,
    #[serde(default)]
    pub graph: GraphSection,
    #[serde(default)]
    pub potentials: PotentialSection,
    #[serde(default)]
    pub forcing: Option<EdgeProfiles>,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub sweep: SweepSection,
    pub conditions: Option<ConditionsSection>,
    #[serde(default)]
    pub output: OutputSection,
    pub seed: Option<u64>,
    /// Directory of the file this was loaded from.
    #[serde(skip)]
    pub root: Option<PathBuf>,
}

impl Config {
    /// Parses TOML, or JSON when the extension is `.json`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            Self::from_json(&text)?
        } else {
            Self::from_toml(&text)?
        };
        cfg.root = path.parent().map(Path::to_path_buf);
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    fn base(&self) -> Result<Option<SweepSpec>> {
        match &self.scenario {
            None => Ok(None),
            Some(id) => find_scenario(id)
                .map(Some)
                .ok_or_else(|| Error::Config(format!("unknown scenario {id:?}"))),
        }
    }

    fn edge_count(&self, base: Option<&SweepSpec>) -> Result<usize> {
        let pot = &self.potentials;
        let n = self
            .graph
            .n
            .or(pot.q.as_ref().map(Vec::len))
            .or(pot.line_q.map(|_| 2))
            .or(base.map(|b| b.scenario.edge_count()))
            .ok_or_else(|| Error::Config("graph.n is required".into()))?;
        if n < 2 {
            return Err(Error::Config(format!("need n >= 2, got {n}")));
        }
        Ok(n)
    }

    /// Potential data, with the library scenario (if any) as the default.
    pub fn potentials(&self) -> Result<(CoulombSpec, ShortRangeSpec)> {
        let base = self.base()?;
        let n = self.edge_count(base.as_ref())?;
        let pot = &self.potentials;
        let (base_q, base_sr) = match &base {
            Some(b) if b.scenario.edge_count() == n => {
                (b.scenario.coulomb.clone(), b.scenario.short_range.clone())
            }
            Some(b) => {
                return Err(Error::Config(format!(
                    "scenario {} has {} edges, config asks for {n}",
                    b.scenario.id,
                    b.scenario.edge_count()
                )))
            }
            None => (CoulombSpec::zero(n), ShortRangeSpec::zero(n)),
        };
        let coulomb = match (&pot.q, pot.line_q) {
            (Some(_), Some(_)) => return Err(Error::Config("give either q or line_q".into())),
            (Some(q), None) => CoulombSpec::new(q.clone())?,
            (None, Some([l, r])) => CoulombSpec::from_line(l, r),
            (None, None) => base_q,
        };
        if coulomb.edge_count() != n {
            return Err(Error::Config(format!(
                "q has {} entries, graph has {n} edges",
                coulomb.edge_count()
            )));
        }
        let pick = |p: &Option<EdgeProfiles>, dflt: &[Profile], what: &str| match p {
            Some(p) => p.expand(n, what, self.root.as_deref()),
            None => Ok(dflt.to_vec()),
        };
        let sr = ShortRangeSpec::new(
            pick(&pot.kappa, &base_sr.kappa, "kappa")?,
            pick(&pot.u, &base_sr.u, "u")?,
            pick(&pot.v, &base_sr.v, "v")?,
        )
        .map_err(|e| Error::Config(e.to_string()))?;
        Ok((coulomb, sr))
    }

    fn resonance_options(&self) -> ResonanceOptions {
        self.solver.resonance.unwrap_or_default()
    }

    fn condition_tol(&self) -> f64 {
        self.solver.condition_tol.unwrap_or(1e-9)
    }

    fn zeta(&self) -> Result<Complex64> {
        let z = self.solver.zeta.unwrap_or(Complex64::new(0.0, 1.0));
        check_zeta(z).map_err(|e| Error::Config(e.to_string()))?;
        Ok(z)
    }

    fn forcing(&self, n: usize, base: Option<&SweepSpec>) -> Result<Forcing> {
        let edges = match (&self.forcing, base) {
            (Some(p), _) => p.expand(n, "forcing", self.root.as_deref())?,
            (None, Some(b)) if b.forcing.edge_count() == n => return Ok(b.forcing.clone()),
            (None, _) => {
                let mut e = vec![Profile::Zero; n];
                e[0] = Profile::unit(1.0);
                e
            }
        };
        Forcing::new(edges).map_err(|e| Error::Config(e.to_string()))
    }

    fn mesh(&self, base: Option<&SweepSpec>) -> MeshSettings {
        self.solver
            .mesh
            .or(base.map(|b| b.mesh))
            .unwrap_or_default()
    }

    pub fn user_conditions(&self) -> Result<Option<VertexConditions>> {
        let Some(s) = &self.conditions else {
            return Ok(None);
        };
        let build = |re: &[Vec<f64>], im: Option<&Vec<Vec<f64>>>, what: &str| -> Result<CMatrix> {
            let n = re.len();
            if n == 0 || re.iter().any(|r| r.len() != n) {
                return Err(Error::Config(format!("conditions.{what} must be square")));
            }
            if let Some(im) = im {
                if im.len() != n || im.iter().any(|r| r.len() != n) {
                    return Err(Error::Config(format!("conditions.{what}_im has the wrong shape")));
                }
            }
            Ok(CMatrix::from_fn(n, n, |i, j| {
                Complex64::new(re[i][j], im.map_or(0.0, |m| m[i][j]))
            }))
        };
        let a = build(&s.a, s.a_im.as_ref(), "a")?;
        let b = build(&s.b, s.b_im.as_ref(), "b")?;
        VertexConditions::new(a, b, ConditionKind::Generic)
            .map(Some)
            .map_err(|e| Error::Config(e.to_string()))
    }

    pub fn resonance_request(&self) -> Result<ResonanceRequest> {
        let (_, short_range) = self.potentials()?;
        Ok(ResonanceRequest {
            short_range,
            options: self.resonance_options(),
        })
    }

    pub fn conditions_request(&self, seed: Option<u64>) -> Result<ConditionsRequest> {
        let (coulomb, short_range) = self.potentials()?;
        Ok(ConditionsRequest {
            coulomb,
            short_range,
            resonance: self.resonance_options(),
            condition_tol: self.condition_tol(),
            self_adjoint_tol: self.solver.self_adjoint_tol.unwrap_or(1e-10),
            user: self.user_conditions()?,
            seed: seed.or(self.seed).unwrap_or(0),
            samples: 64,
        })
    }

    pub fn solve_request(&self) -> Result<SolveRequest> {
        let base = self.base()?;
        let (coulomb, short_range) = self.potentials()?;
        let n = coulomb.edge_count();
        let zeta = self.zeta()?;
        let t = self.graph.truncation.unwrap_or_else(|| default_truncation(zeta));
        let graph = StarGraph::new(n, t).map_err(|e| Error::Config(e.to_string()))?;
        let operator = match self.solver.operator.unwrap_or_default() {
            OperatorChoice::Regularized => {
                let eps = self
                    .solver
                    .eps
                    .ok_or_else(|| Error::Config("solver.eps is required for the regularized operator".into()))?;
                check_eps(eps).map_err(|e| Error::Config(e.to_string()))?;
                OperatorSpec::Regularized(RegularizedPotential::new(coulomb, short_range, eps)?)
            }
            OperatorChoice::Limit => {
                let res = solve_half_bound_states(&short_range, &self.resonance_options())?;
                let cm = build_matrices(&res, &coulomb, &short_range)?;
                let conditions = match self.user_conditions()? {
                    Some(u) if u.edge_count() == n => u,
                    Some(_) => return Err(Error::Config("conditions have the wrong size".into())),
                    None => assemble_vertex_conditions(&cm),
                };
                OperatorSpec::Limit { coulomb, conditions }
            }
            OperatorChoice::DirichletSum => OperatorSpec::DirichletSum(coulomb),
        };
        let problem = ResolventProblem::new(graph, zeta, self.forcing(n, base.as_ref())?, operator)?;
        Ok(SolveRequest {
            problem,
            mesh: self.mesh(base.as_ref()),
        })
    }

    pub fn sweep_spec(&self) -> Result<SweepSpec> {
        let base = self.base()?;
        let (coulomb, short_range) = self.potentials()?;
        let n = coulomb.edge_count();
        let eps = self
            .sweep
            .eps
            .clone()
            .or(base.as_ref().map(|b| b.eps.clone()))
            .unwrap_or_else(default_eps);
        for &e in &eps {
            check_eps(e).map_err(|e| Error::Config(e.to_string()))?;
        }
        let zetas = match (&self.sweep.zetas, self.solver.zeta) {
            (Some(z), _) => z.clone(),
            (None, Some(z)) => vec![z],
            (None, None) => base
                .as_ref()
                .map(|b| b.zetas.clone())
                .unwrap_or_else(|| vec![Complex64::new(0.0, 1.0)]),
        };
        for &z in &zetas {
            check_zeta(z).map_err(|e| Error::Config(e.to_string()))?;
        }
        let resonance = self.resonance_options();
        let condition_tol = self.condition_tol();
        let expected = match (self.sweep.expected, &base) {
            (Some(e), _) => e,
            (None, Some(b)) if b.scenario.coulomb == coulomb && b.scenario.short_range == short_range => {
                b.scenario.expected
            }
            _ => {
                let res = solve_half_bound_states(&short_range, &resonance)?;
                let cm = build_matrices(&res, &coulomb, &short_range)?;
                predicted_outcome(cm.rank(), check_convergence_condition(&cm, condition_tol).holds)
            }
        };
        let (id, description) = match &base {
            Some(b) => (b.scenario.id.clone(), b.scenario.description.clone()),
            None => ("custom".to_string(), "user-defined scenario".to_string()),
        };
        let spec = SweepSpec {
            scenario: ScenarioSpec {
                id,
                description,
                coulomb,
                short_range,
                resonance,
                condition_tol,
                expected,
            },
            zetas,
            forcing: self.forcing(n, base.as_ref())?,
            eps,
            truncation: self.graph.truncation,
            mesh: self.mesh(base.as_ref()),
        };
        spec.validate().map_err(|e| match e {
            Error::Config(_) => e,
            other => Error::Config(other.to_string()),
        })?;
        Ok(spec)
    }

    /// Checks everything any subcommand would need that the config sets.
    pub fn validate(&self) -> Result<()> {
        self.potentials()?;
        self.zeta()?;
        if let Some(eps) = self.solver.eps {
            check_eps(eps).map_err(|e| Error::Config(e.to_string()))?;
        }
        if let Some(list) = &self.sweep.eps {
            for &e in list {
                check_eps(e).map_err(|e| Error::Config(e.to_string()))?;
            }
        }
        if let Some(z) = &self.sweep.zetas {
            for &z in z {
                check_zeta(z).map_err(|e| Error::Config(e.to_string()))?;
            }
        }
        self.user_conditions()?;
        Ok(())
    }
}

/// Without a nontrivial resonance, or when the convergence condition fails,
/// only the Dirichlet direct sum can be the limit.
pub fn predicted_outcome(rank: usize, condition_holds: bool) -> Outcome {
    if rank > 0 && condition_holds {
        Outcome::ConvergesToLimit
    } else {
        Outcome::ConvergesToDirichlet
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_config_from_toml() {
        let cfg = Config::from_toml(
            r#"
            [graph]
            n = 3
            [potentials]
            u = { kind = "constant", value = 1.0 }
            [solver]
            zeta = [0.0, 1.0]
            "#,
        )
        .unwrap();
        let (q, sr) = cfg.potentials().unwrap();
        assert!(q.is_zero());
        assert_eq!(sr.u_integral(), 3.0);
        let spec = cfg.sweep_spec().unwrap();
        assert_eq!(spec.scenario.expected, Outcome::ConvergesToLimit);
        assert_eq!(spec.eps, default_eps());
    }

    #[test]
    fn scenario_base_with_override() {
        let cfg = Config::from_toml("scenario = \"f\"\n[potentials]\nkappa = { kind = \"constant\", value = 2.0 }\n").unwrap();
        let spec = cfg.sweep_spec().unwrap();
        assert_eq!(spec.scenario.id, "f_coulomb_unbalanced");
        // kappa = 2 restores the balance, so the prediction changes
        assert_eq!(spec.scenario.expected, Outcome::ConvergesToLimit);
    }

    #[test]
    fn rejects_bad_values() {
        let bad = [
            "[graph]\nn = 1\n",
            "[graph]\nn = 3\n[solver]\nzeta = [1.0, 0.0]\n",
            "[graph]\nn = 3\n[sweep]\neps = [0.5, 1.5]\n",
            "[graph]\nn = 3\n[solver]\neps = 0.0\n",
            "[graph]\nn = 3\nbogus = 1\n",
            "[graph]\nn = 3\n[potentials]\nq = [1.0]\n",
        ];
        for text in bad {
            let r = Config::from_toml(text).and_then(|c| c.validate());
            assert!(matches!(r, Err(Error::Config(_))), "{text}: {r:?}");
        }
    }

    #[test]
    fn json_and_scientific_notation() {
        let cfg = Config::from_json(
            r#"{"graph": {"n": 2}, "potentials": {"line_q": [1e0, 2e0]}, "sweep": {"eps": [1e-2, 5e-3]}}"#,
        )
        .unwrap();
        let (q, _) = cfg.potentials().unwrap();
        assert_eq!(q.q, vec![-1.0, 2.0]);
        assert_eq!(cfg.sweep_spec().unwrap().eps, vec![1e-2, 5e-3]);
    }

    #[test]
    fn user_conditions_parse() {
        let cfg = Config::from_toml(
            "[graph]\nn = 2\n[conditions]\na = [[1.0, 0.0], [0.0, 1.0]]\nb = [[0.0, 1.0], [0.0, 0.0]]\n",
        )
        .unwrap();
        let vc = cfg.user_conditions().unwrap().unwrap();
        assert_eq!(vc.edge_count(), 2);
    }

    #[test]
    fn tabulated_profiles_load_relative_to_the_config() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("v.csv"), "tau,value\n0,-1\n0.5,-2\n1,-1\n").unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "[graph]\nn = 2\n[potentials]\nv = { csv = \"v.csv\" }\n").unwrap();
        let (_, sr) = Config::load(&path).unwrap().potentials().unwrap();
        assert_eq!(
            sr.v[1],
            Profile::Tabulated {
                taus: vec![0.0, 0.5, 1.0],
                values: vec![-1.0, -2.0, -1.0]
            }
        );
        std::fs::write(&path, "[graph]\nn = 2\n[potentials]\nv = { csv = \"missing.csv\" }\n").unwrap();
        assert!(matches!(Config::load(&path).unwrap().potentials(), Err(Error::Config(_))));
    }
}
