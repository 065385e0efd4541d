//! Zero-energy resonances of `-psi'' + V psi` on the star graph.
//!
//! A half-bound state is constant on each edge beyond the support of `V`,
//! so it is determined by its restriction to the core graph (`n` unit
//! edges) where it solves `-psi'' + V psi = 0` with Kirchhoff conditions at
//! the centre and `psi' = 0` at the outer ends. On edge `k` the Neumann end
//! condition fixes the solution up to a factor: `psi_k = c_k phi_k` with
//! `phi_k(1) = 1, phi_k'(1) = 0`. Continuity and Kirchhoff at the centre
//! then form an `n x n` linear system for `c`, whose null space is the
//! space of half-bound states.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{EdgeMesh, GraphMesh, Grading, GridFunction};
use crate::linalg::{self, c, gauss_legendre5, hermite, CMatrix};
use crate::ode::{self, Tolerances};
use crate::potentials::{Profile, ShortRangeSpec};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResonanceOptions {
    /// Relative singular-value threshold for the null space.
    pub tol: f64,
    /// Uniform cells per core edge (breakpoints are added on top).
    pub core_cells: usize,
}

impl Default for ResonanceOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            core_cells: 400,
        }
    }
}

/// `phi_k` sampled on the core edge together with its derivative.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeShot {
    nodes: Vec<f64>,
    values: Vec<f64>,
    derivs: Vec<f64>,
}

impl EdgeShot {
    /// `(phi(0), phi'(0))`, the derivative pointing into the edge.
    pub fn centre_data(&self) -> (f64, f64) {
        (self.values[0], self.derivs[0])
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn derivs(&self) -> &[f64] {
        &self.derivs
    }

    /// `∫_0^1 w phi^2` with Gauss rules on the Hermite interpolant.
    pub fn moment(&self, w: &Profile) -> f64 {
        self.cell_quadrature(|t, phi| w.eval(t) * phi * phi)
    }

    fn eval_hermite(&self, i: usize, t: f64) -> f64 {
        hermite(
            self.nodes[i],
            self.nodes[i + 1],
            self.values[i],
            self.values[i + 1],
            self.derivs[i],
            self.derivs[i + 1],
            t,
        )
    }

    fn cell_quadrature(&self, g: impl Fn(f64, f64) -> f64) -> f64 {
        let (x, w) = gauss_legendre5();
        let mut acc = 0.0;
        for i in 0..self.nodes.len() - 1 {
            let (a, b) = (self.nodes[i], self.nodes[i + 1]);
            let half = 0.5 * (b - a);
            for j in 0..5 {
                let t = 0.5 * (a + b) + half * x[j];
                acc += half * w[j] * g(t, self.eval_hermite(i, t));
            }
        }
        acc
    }

    /// Cell-wise defect of `phi'(b) - phi'(a) = ∫_a^b V phi`, root-summed.
    fn integrated_residual(&self, v: &Profile) -> f64 {
        let (x, w) = gauss_legendre5();
        let mut acc = 0.0;
        for i in 0..self.nodes.len() - 1 {
            let (a, b) = (self.nodes[i], self.nodes[i + 1]);
            let half = 0.5 * (b - a);
            let mut integral = 0.0;
            for j in 0..5 {
                let t = 0.5 * (a + b) + half * x[j];
                integral += half * w[j] * v.eval(t) * self.eval_hermite(i, t);
            }
            let defect = self.derivs[i + 1] - self.derivs[i] - integral;
            acc += defect * defect;
        }
        acc.sqrt()
    }
}

/// Half-bound states of `V`: the dimension `r`, the basis, and the matrix
/// `L` of their limits along the edges.
#[derive(Clone, Debug)]
pub struct ResonanceData {
    shots: Vec<EdgeShot>,
    /// `n x r`; basis function `j` equals `coefficients[(k, j)] * phi_k` on edge `k`.
    coefficients: CMatrix,
    singular_values: Vec<f64>,
    tol: f64,
}

impl ResonanceData {
    pub fn edge_count(&self) -> usize {
        self.shots.len()
    }

    /// `r = dim` of the half-bound-state space.
    pub fn rank(&self) -> usize {
        self.coefficients.ncols()
    }

    /// `L`: column `j` holds the edge limits of basis function `j`. Since
    /// `phi_k(1) = 1`, these are exactly the coefficients.
    pub fn l_matrix(&self) -> &CMatrix {
        &self.coefficients
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn shots(&self) -> &[EdgeShot] {
        &self.shots
    }

    pub fn core_mesh(&self) -> Arc<GraphMesh> {
        let edges = self
            .shots
            .iter()
            .enumerate()
            .map(|(k, s)| EdgeMesh::from_nodes(k, s.nodes.clone(), Grading::Custom))
            .collect::<Result<Vec<_>>>()
            .expect("shot nodes form a valid mesh");
        Arc::new(GraphMesh::new(edges).expect("edge labels are sequential"))
    }

    /// Basis function `j` sampled on [`Self::core_mesh`].
    pub fn basis_function(&self, j: usize) -> GridFunction {
        let mesh = self.core_mesh();
        let values = self
            .shots
            .iter()
            .enumerate()
            .map(|(k, s)| {
                let ck = self.coefficients[(k, j)];
                s.values.iter().map(|&v| ck * v).collect()
            })
            .collect();
        GridFunction::new(mesh, values).expect("shapes agree")
    }

    /// New basis `psi_hat = psi X`, i.e. `L_hat = L X`.
    pub fn with_basis_change(&self, x: &CMatrix) -> Result<Self> {
        let r = self.rank();
        if x.nrows() != r || x.ncols() != r {
            return Err(Error::Domain(format!(
                "basis change must be {r}x{r}, got {}x{}",
                x.nrows(),
                x.ncols()
            )));
        }
        let sv = linalg::singular_values(x);
        if r > 0 && sv.last().copied().unwrap_or(0.0) <= 1e-12 * sv[0] {
            return Err(Error::Domain("basis change matrix is singular".into()));
        }
        Ok(Self {
            coefficients: &self.coefficients * x,
            ..self.clone()
        })
    }

    /// `G_ij = ∫ w psi_j conj(psi_i)` with `w` given per edge.
    pub fn weighted_gram(&self, w: &[Profile]) -> CMatrix {
        let mu: Vec<f64> = self
            .shots
            .iter()
            .zip(w)
            .map(|(s, wk)| if wk.is_zero() { 0.0 } else { s.moment(wk) })
            .collect();
        let d = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            mu.len(),
            mu.iter().map(|&m| c(m)),
        ));
        self.coefficients.adjoint() * d * &self.coefficients
    }

    /// Restriction to a subset of edges and basis columns.
    pub fn restrict(&self, edges: &[usize], columns: &[usize]) -> Self {
        let coefficients = CMatrix::from_fn(edges.len(), columns.len(), |i, j| {
            self.coefficients[(edges[i], columns[j])]
        });
        Self {
            shots: edges.iter().map(|&k| self.shots[k].clone()).collect(),
            coefficients,
            singular_values: self.singular_values.clone(),
            tol: self.tol,
        }
    }

    /// Builds data from an explicit `L`; every edge carries the constant
    /// profile `phi_k = 1`. Intended for synthetic checks.
    pub fn from_l_matrix(l: CMatrix) -> Self {
        let n = l.nrows();
        let shot = EdgeShot {
            nodes: vec![0.0, 1.0],
            values: vec![1.0, 1.0],
            derivs: vec![0.0, 0.0],
        };
        Self {
            shots: vec![shot; n],
            coefficients: l,
            singular_values: vec![],
            tol: 1e-9,
        }
    }

    /// Residual diagnostics of the computed basis.
    pub fn verify(&self, v: &[Profile]) -> ResonanceResiduals {
        let mut continuity: f64 = 0.0;
        let mut kirchhoff: f64 = 0.0;
        let mut boundary_derivative: f64 = 0.0;
        let mut ode: f64 = 0.0;
        for j in 0..self.rank() {
            let centre: Vec<Complex64> = self
                .shots
                .iter()
                .enumerate()
                .map(|(k, s)| self.coefficients[(k, j)] * s.values[0])
                .collect();
            for a in &centre {
                for b in &centre {
                    continuity = continuity.max((a - b).norm());
                }
            }
            let flux: Complex64 = self
                .shots
                .iter()
                .enumerate()
                .map(|(k, s)| self.coefficients[(k, j)] * s.derivs[0])
                .sum();
            kirchhoff = kirchhoff.max(flux.norm());
            let norm = self.basis_function(j).l2_norm().max(f64::MIN_POSITIVE);
            let mut res2 = 0.0;
            for (k, s) in self.shots.iter().enumerate() {
                let ck = self.coefficients[(k, j)].norm();
                boundary_derivative = boundary_derivative.max(ck * s.derivs.last().unwrap().abs());
                res2 += (ck * s.integrated_residual(&v[k])).powi(2);
            }
            ode = ode.max(res2.sqrt() / norm);
        }
        ResonanceResiduals {
            continuity,
            kirchhoff,
            boundary_derivative,
            ode,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResonanceResiduals {
    pub continuity: f64,
    pub kirchhoff: f64,
    pub boundary_derivative: f64,
    /// Relative integrated defect of `-psi'' + V psi = 0`.
    pub ode: f64,
}

/// Constant pieces covering `[0, 1]` if the profile is piecewise constant.
fn constant_pieces(p: &Profile) -> Option<Vec<(f64, f64, f64)>> {
    let mut pieces = Vec::new();
    let push_gap = |pieces: &mut Vec<(f64, f64, f64)>, a: f64, b: f64| {
        if b > a {
            pieces.push((a, b, 0.0));
        }
    };
    match p {
        Profile::Zero => pieces.push((0.0, 1.0, 0.0)),
        Profile::Constant { value, start, end } => {
            push_gap(&mut pieces, 0.0, *start);
            pieces.push((*start, *end, *value));
            push_gap(&mut pieces, *end, 1.0);
        }
        Profile::PiecewiseConstant { breaks, values } => {
            push_gap(&mut pieces, 0.0, breaks[0]);
            for (w, v) in breaks.windows(2).zip(values) {
                pieces.push((w[0], w[1], *v));
            }
            push_gap(&mut pieces, *breaks.last().unwrap(), 1.0);
        }
        _ => return None,
    }
    Some(pieces)
}

/// `(cosh(sqrt(c) s), sinh(sqrt(c) s)/sqrt(c))` with the oscillatory and
/// small-argument branches; propagates solutions of `y'' = c y`.
pub(crate) fn constant_transfer(cval: f64, s: f64) -> (f64, f64) {
    let z = cval * s * s;
    if z.abs() < 1e-4 {
        let ch = 1.0 + z / 2.0 + z * z / 24.0 + z * z * z / 720.0;
        let sh = s * (1.0 + z / 6.0 + z * z / 120.0 + z * z * z / 5040.0);
        (ch, sh)
    } else if cval > 0.0 {
        let k = cval.sqrt();
        ((k * s).cosh(), (k * s).sinh() / k)
    } else {
        let k = (-cval).sqrt();
        ((k * s).cos(), (k * s).sin() / k)
    }
}

fn shoot_edge(edge: usize, v: &Profile, nodes: Vec<f64>) -> Result<EdgeShot> {
    let m = nodes.len();
    let mut values = vec![0.0; m];
    let mut derivs = vec![0.0; m];
    values[m - 1] = 1.0;
    derivs[m - 1] = 0.0;
    let pieces = constant_pieces(v);
    let tol = Tolerances {
        rtol: 1e-13,
        atol: 1e-15,
        max_steps: 100_000,
    };
    let mut h = 1e-3;
    for i in (0..m - 1).rev() {
        let (a, b) = (nodes[i], nodes[i + 1]);
        let (y, dy) = (values[i + 1], derivs[i + 1]);
        if pieces.is_some() {
            let cval = v.eval(0.5 * (a + b));
            let (ch, sh) = constant_transfer(cval, a - b);
            values[i] = y * ch + dy * sh;
            derivs[i] = y * cval * sh + dy * ch;
        } else {
            let rhs = |t: f64, s: &[Complex64; 2]| [s[1], s[0] * v.eval(t)];
            let (state, h_last) = ode::integrate(rhs, b, a, [c(y), c(dy)], h, &tol)
                .map_err(|e| Error::Integration {
                    edge,
                    message: e.to_string(),
                })?;
            h = h_last;
            values[i] = state[0].re;
            derivs[i] = state[1].re;
        }
        if !(values[i].is_finite() && derivs[i].is_finite()) {
            return Err(Error::Integration {
                edge,
                message: format!("non-finite solution at tau = {a}"),
            });
        }
    }
    Ok(EdgeShot {
        nodes,
        values,
        derivs,
    })
}

fn core_nodes(spec: &ShortRangeSpec, k: usize, cells: usize) -> Vec<f64> {
    let cells = cells.max(1);
    let mut nodes: Vec<f64> = (0..=cells).map(|i| i as f64 / cells as f64).collect();
    nodes.extend(spec.breakpoints(k).into_iter().filter(|&b| b > 0.0 && b < 1.0));
    nodes.sort_by(f64::total_cmp);
    nodes.dedup_by(|a, b| (*a - *b).abs() < 1e-13);
    nodes
}

/// Solves the core Neumann problem and returns an `L^2`-orthonormal, real
/// basis of half-bound states.
pub fn solve_half_bound_states(
    spec: &ShortRangeSpec,
    opts: &ResonanceOptions,
) -> Result<ResonanceData> {
    spec.validate()?;
    if opts.tol.is_nan() || opts.tol <= 0.0 {
        return Err(Error::Domain(format!("tolerance must be positive, got {}", opts.tol)));
    }
    let n = spec.edge_count();
    let shots: Vec<EdgeShot> = (0..n)
        .into_par_iter()
        .map(|k| shoot_edge(k, &spec.v[k], core_nodes(spec, k, opts.core_cells)))
        .collect::<Result<_>>()?;

    // Row 0: Kirchhoff. Rows 1..n: continuity between neighbours in edge order.
    let mut sys = DMatrix::<f64>::zeros(n, n);
    for (k, s) in shots.iter().enumerate() {
        let (p, d) = s.centre_data();
        sys[(0, k)] = d;
        if k + 1 < n {
            sys[(k + 1, k)] = p;
        }
        if k > 0 {
            sys[(k, k)] = -p;
        }
    }
    let svd = linalg::svd(&sys.map(c));
    let smax = svd.s.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return Err(Error::Numerical("shooting system vanished identically".into()));
    }
    let null: Vec<usize> = (0..n).filter(|&i| svd.s[i] <= opts.tol * smax).collect();
    let singular_values = svd.s.clone();
    let r = null.len();
    if r > n - 1 {
        return Err(Error::Inconsistent(format!(
            "null space of dimension {r} exceeds n - 1 = {}; tolerance {} too loose",
            n - 1,
            opts.tol
        )));
    }

    let raw = DMatrix::<f64>::from_fn(n, r, |k, j| svd.v[(k, null[j])].re);
    let gram_diag: Vec<f64> = shots.iter().map(|s| s.moment(&Profile::unit(1.0))).collect();
    let coefficients = if r == 0 {
        CMatrix::zeros(n, 0)
    } else {
        let g = raw.transpose() * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(gram_diag)) * &raw;
        let chol = g
            .cholesky()
            .ok_or_else(|| Error::Numerical("Gram matrix of half-bound states is not positive".into()))?;
        let linv = chol
            .l()
            .try_inverse()
            .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;
        let mut orth = &raw * linv.transpose();
        for j in 0..r {
            let lead = (0..n)
                .map(|k| orth[(k, j)])
                .find(|x| x.abs() > 1e-8)
                .unwrap_or(1.0);
            if lead < 0.0 {
                orth.column_mut(j).neg_mut();
            }
        }
        orth.map(c)
    };

    Ok(ResonanceData {
        shots,
        coefficients,
        singular_values,
        tol: opts.tol,
    })
}

/// `L * coeffs`: edge limits of `sum_j coeffs_j psi_j`.
pub fn ell_map(data: &ResonanceData, coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
    if coeffs.len() != data.rank() {
        return Err(Error::Domain(format!(
            "expected {} coefficients, got {}",
            data.rank(),
            coeffs.len()
        )));
    }
    let x = nalgebra::DVector::from_column_slice(coeffs);
    Ok((data.l_matrix() * x).iter().copied().collect())
}

pub fn is_injective(l: &CMatrix, tol: f64) -> bool {
    if l.ncols() == 0 {
        return true;
    }
    if l.ncols() > l.nrows() {
        return false;
    }
    let sv = linalg::singular_values(l);
    sv.len() == l.ncols() && sv.last().copied().unwrap_or(0.0) > tol
}

/// `true` iff the smallest singular value of `L` exceeds `tol`.
pub fn is_injective_ell(data: &ResonanceData, tol: f64) -> bool {
    is_injective(data.l_matrix(), tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn uniform_v(n: usize, v: f64) -> ShortRangeSpec {
        ShortRangeSpec::uniform(n, Profile::Zero, Profile::Zero, Profile::unit(v))
    }

    #[test]
    fn free_potential_has_constant_half_bound_state() {
        let res = solve_half_bound_states(&uniform_v(3, 0.0), &Default::default()).unwrap();
        assert_eq!(res.rank(), 1);
        let l = res.l_matrix();
        for k in 0..3 {
            assert!((l[(k, 0)] / l[(0, 0)] - c(1.0)).norm() < 1e-12);
        }
        // orthonormal in L^2 of the core: psi = 1/sqrt(3)
        assert!((l[(0, 0)].re - 1.0 / 3f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn cosine_well_realizes_maximal_multiplicity() {
        for n in 2..=5 {
            let res =
                solve_half_bound_states(&uniform_v(n, -PI * PI / 4.0), &Default::default()).unwrap();
            assert_eq!(res.rank(), n - 1, "n = {n}");
        }
    }

    #[test]
    fn repulsive_well_is_non_resonant() {
        let res = solve_half_bound_states(&uniform_v(3, 10.0), &Default::default()).unwrap();
        assert_eq!(res.rank(), 0);
        // closed form: phi = cosh(k (tau - 1)), so p = cosh k, d = -k sinh k
        let k = 10f64.sqrt();
        let (p, d) = res.shots()[0].centre_data();
        assert!((p - k.cosh()).abs() < 1e-11 * k.cosh());
        assert!((d + k * k.sinh()).abs() < 1e-11 * k.sinh() * k);
    }

    #[test]
    fn ell_map_examples() {
        let res = solve_half_bound_states(&uniform_v(3, 0.0), &Default::default()).unwrap();
        let scale = res.l_matrix()[(0, 0)];
        let out = ell_map(&res, &[c(2.0) / scale]).unwrap();
        for z in out {
            assert!((z - c(2.0)).norm() < 1e-12);
        }
        assert_eq!(ell_map(&res, &[c(0.0)]).unwrap(), vec![c(0.0); 3]);
        assert!(ell_map(&res, &[]).is_err());

        // cosine well: find coefficients mapping to (1, -1, 0)
        let res =
            solve_half_bound_states(&uniform_v(3, -PI * PI / 4.0), &Default::default()).unwrap();
        let l = res.l_matrix().clone();
        let target = nalgebra::DVector::from_vec(vec![c(1.0), c(-1.0), c(0.0)]);
        let lplus = (l.adjoint() * &l).try_inverse().unwrap() * l.adjoint();
        let coeffs: Vec<Complex64> = (lplus * &target).iter().copied().collect();
        let image = ell_map(&res, &coeffs).unwrap();
        for (a, b) in image.iter().zip(target.iter()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn injectivity() {
        let one = CMatrix::from_element(3, 1, c(1.0));
        assert!(is_injective(&one, 1e-9));
        let mut dup = CMatrix::zeros(3, 2);
        dup[(0, 0)] = c(1.0);
        assert!(!is_injective(&dup, 1e-9));
        let res =
            solve_half_bound_states(&uniform_v(3, -PI * PI / 4.0), &Default::default()).unwrap();
        assert!(is_injective_ell(&res, 1e-9));
    }

    #[test]
    fn loose_tolerance_violates_dimension_bound() {
        let r = solve_half_bound_states(
            &uniform_v(3, 0.0),
            &ResonanceOptions {
                tol: 2.0,
                core_cells: 50,
            },
        );
        assert!(matches!(r, Err(Error::Inconsistent(_))));
    }

    #[test]
    fn smooth_potential_uses_adaptive_integrator() {
        // V = -pi^2/4 written as a degree-0 polynomial goes through DP45 and
        // must agree with the closed-form branch.
        let poly = Profile::PiecewisePolynomial {
            breaks: vec![0.0, 1.0],
            coeffs: vec![vec![-PI * PI / 4.0]],
        };
        let spec = ShortRangeSpec::uniform(3, Profile::Zero, Profile::Zero, poly);
        let res = solve_half_bound_states(&spec, &Default::default()).unwrap();
        assert_eq!(res.rank(), 2);
        let (p, d) = res.shots()[1].centre_data();
        assert!(p.abs() < 1e-10);
        assert!((d - PI / 2.0).abs() < 1e-10);
    }

    #[test]
    fn residuals_are_small() {
        let spec = ShortRangeSpec::uniform(
            3,
            Profile::Zero,
            Profile::Zero,
            Profile::PiecewisePolynomial {
                breaks: vec![0.0, 1.0],
                coeffs: vec![vec![-PI * PI / 4.0]],
            },
        );
        let res = solve_half_bound_states(&spec, &Default::default()).unwrap();
        let r = res.verify(&spec.v);
        assert!(r.continuity < 1e-9, "{r:?}");
        assert!(r.kirchhoff < 1e-9, "{r:?}");
        assert_eq!(r.boundary_derivative, 0.0);
        assert!(r.ode < 1e-7, "{r:?}");
    }

    #[test]
    fn zero_edge_limit_means_zero_edge_function() {
        // V = -pi^2/4 on edges 0,1 and +10 on edge 2: edge 2 carries nothing.
        let v = vec![
            Profile::unit(-PI * PI / 4.0),
            Profile::unit(-PI * PI / 4.0),
            Profile::unit(10.0),
        ];
        let spec = ShortRangeSpec::new(vec![Profile::Zero; 3], vec![Profile::Zero; 3], v).unwrap();
        let res = solve_half_bound_states(&spec, &Default::default()).unwrap();
        assert_eq!(res.rank(), 1);
        let l = res.l_matrix();
        assert!(l[(2, 0)].norm() < 1e-9);
        let psi = res.basis_function(0);
        assert!(psi.edge_sup_norm(2) < 1e-8);
        assert!(psi.edge_sup_norm(0) > 0.1);
    }
}
