//! Limit vertex conditions built from the resonant space.
//!
//! With `L` the matrix of edge limits of the half-bound states, the limit
//! operator lives on `phi(a) ∈ span L` with `M L⁺ phi(a) - L* phi^[1](a) = 0`.
//! Stacking a basis `R` of `(span L)^⊥` on top gives the square pair
//! `A = [R*; M L⁺]`, `B = [0; -L*]`.

use std::fmt;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c, serde_cmatrix, CMatrix};
use crate::potentials::{CoulombSpec, ShortRangeSpec};
use crate::resonance::ResonanceData;

/// Entries below this are treated as structural zeros when tagging kinds.
const KIND_TOL: f64 = 1e-10;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CouplingMatrices {
    #[serde(with = "serde_cmatrix")]
    pub m: CMatrix,
    #[serde(with = "serde_cmatrix")]
    pub n: CMatrix,
    #[serde(with = "serde_cmatrix")]
    pub k: CMatrix,
    #[serde(with = "serde_cmatrix")]
    pub l: CMatrix,
    #[serde(with = "serde_cmatrix")]
    pub lplus: CMatrix,
    /// Orthonormal basis of `(span L)^⊥`, as columns.
    #[serde(with = "serde_cmatrix")]
    pub r_perp: CMatrix,
}

impl CouplingMatrices {
    pub fn edge_count(&self) -> usize {
        self.l.nrows()
    }

    pub fn rank(&self) -> usize {
        self.l.ncols()
    }

    /// Largest violation among `M = M*`, `N = N*`, `L⁺L = I`, `R*L = 0`.
    pub fn invariant_defect(&self) -> f64 {
        let r = self.rank();
        let herm = (&self.m - self.m.adjoint()).norm() + (&self.n - self.n.adjoint()).norm();
        let inv = (&self.lplus * &self.l - CMatrix::identity(r, r)).norm();
        let orth = (self.r_perp.adjoint() * &self.l).norm();
        herm.max(inv).max(orth)
    }
}

/// `M`, `N`, `K`, `L⁺` and `R` from resonance data and the potential.
pub fn build_matrices(
    res: &ResonanceData,
    coulomb: &CoulombSpec,
    short_range: &ShortRangeSpec,
) -> Result<CouplingMatrices> {
    let n = res.edge_count();
    if coulomb.edge_count() != n || short_range.edge_count() != n {
        return Err(Error::Domain(format!(
            "edge counts differ: resonance {n}, q {}, short-range {}",
            coulomb.edge_count(),
            short_range.edge_count()
        )));
    }
    let l = res.l_matrix().clone();
    let m = res.weighted_gram(&short_range.u);
    let nn = res.weighted_gram(&short_range.kappa);
    let k = CMatrix::from_diagonal(&DVector::from_iterator(n, coulomb.q.iter().map(|&q| c(q))));
    let lplus = pseudoinverse(&l)?;
    let r_perp = if l.ncols() == 0 {
        CMatrix::identity(n, n)
    } else {
        linalg::orthogonal_complement(&l, 1e-10)
    };
    Ok(CouplingMatrices {
        m,
        n: nn,
        k,
        l,
        lplus,
        r_perp,
    })
}

/// `(L*L)⁻¹ L*` for full column rank `L`.
pub fn pseudoinverse(l: &CMatrix) -> Result<CMatrix> {
    let r = l.ncols();
    if r == 0 {
        return Ok(CMatrix::zeros(0, l.nrows()));
    }
    let sv = linalg::singular_values(l);
    if sv.len() < r || sv[r - 1] <= 1e-12 * sv[0] {
        return Err(Error::Inconsistent(
            "L*L is singular; the resonance basis is not independent".into(),
        ));
    }
    let gram = l.adjoint() * l;
    let inv = gram
        .try_inverse()
        .ok_or_else(|| Error::Inconsistent("L*L is singular".into()))?;
    Ok(inv * l.adjoint())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvergenceCheck {
    pub holds: bool,
    /// Spectral norm of `(N L⁺ - L* K) L`.
    pub residual: f64,
    #[serde(with = "serde_cmatrix")]
    pub matrix: CMatrix,
}

/// `span L ⊂ ker(N L⁺ - L* K)`, tested on the columns of `L`.
pub fn check_convergence_condition(cm: &CouplingMatrices, tol: f64) -> ConvergenceCheck {
    let matrix = (&cm.n * &cm.lplus - cm.l.adjoint() * &cm.k) * &cm.l;
    let residual = linalg::spectral_norm(&matrix);
    ConvergenceCheck {
        holds: residual <= tol,
        residual,
        matrix,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionKind {
    Generic,
    Delta,
    ScaleInvariant,
    CoulombQuasi,
    DirichletSum,
}

impl fmt::Display for ConditionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::Generic => "generic",
            Self::Delta => "delta",
            Self::ScaleInvariant => "scale_invariant",
            Self::CoulombQuasi => "coulomb_quasi",
            Self::DirichletSum => "dirichlet_sum",
        };
        f.write_str(s)
    }
}

/// `A phi(a) + B phi^[1](a) = 0`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VertexConditions {
    #[serde(with = "serde_cmatrix")]
    pub a: CMatrix,
    #[serde(with = "serde_cmatrix")]
    pub b: CMatrix,
    pub kind: ConditionKind,
}

impl VertexConditions {
    pub fn new(a: CMatrix, b: CMatrix, kind: ConditionKind) -> Result<Self> {
        if a.nrows() != a.ncols() || b.shape() != a.shape() {
            return Err(Error::Domain(format!(
                "A and B must be square of equal size, got {:?} and {:?}",
                a.shape(),
                b.shape()
            )));
        }
        Ok(Self { a, b, kind })
    }

    pub fn dirichlet(n: usize) -> Self {
        Self {
            a: CMatrix::identity(n, n),
            b: CMatrix::zeros(n, n),
            kind: ConditionKind::DirichletSum,
        }
    }

    pub fn edge_count(&self) -> usize {
        self.a.nrows()
    }

    /// `(A B)` as an `n x 2n` block.
    pub fn block(&self) -> CMatrix {
        let n = self.edge_count();
        let mut w = CMatrix::zeros(n, 2 * n);
        w.view_mut((0, 0), (n, n)).copy_from(&self.a);
        w.view_mut((0, n), (n, n)).copy_from(&self.b);
        w
    }

    /// Orthonormal basis (columns, length `2n`) of the admissible boundary
    /// data `(phi(a), phi^[1](a))`.
    pub fn condition_subspace(&self) -> CMatrix {
        linalg::kernel(&self.block(), 1e-10)
    }
}

impl fmt::Display for VertexConditions {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.edge_count();
        writeln!(f, "kind: {}", self.kind)?;
        match self.kind {
            ConditionKind::DirichletSum => {
                writeln!(f, "phi_k(a) = 0 for k = 1..{n} (Dirichlet direct sum)")?;
            }
            ConditionKind::Delta => {
                // the last row reads alpha' * sum phi = l * sum phi^[1]
                let last = n - 1;
                let lam = -self.b[(last, 0)];
                let alpha = self.a[(last, 0)] * c(n as f64) / lam;
                writeln!(
                    f,
                    "phi continuous at a; sum_k phi^[1]_k(a) = {} * phi(a)",
                    fmt_c(alpha)
                )?;
            }
            _ => {}
        }
        for i in 0..n {
            let mut terms = Vec::new();
            for k in 0..n {
                if self.a[(i, k)].norm() > KIND_TOL {
                    terms.push(format!("({}) phi_{}(a)", fmt_c(self.a[(i, k)]), k + 1));
                }
            }
            for k in 0..n {
                if self.b[(i, k)].norm() > KIND_TOL {
                    terms.push(format!("({}) phi^[1]_{}(a)", fmt_c(self.b[(i, k)]), k + 1));
                }
            }
            if terms.is_empty() {
                terms.push("0".into());
            }
            writeln!(f, "  {} = 0", terms.join(" + "))?;
        }
        Ok(())
    }
}

fn fmt_c(z: Complex64) -> String {
    if z.im.abs() <= KIND_TOL * z.re.abs().max(1.0) {
        format!("{:.6}", z.re)
    } else {
        format!("{:.6}{:+.6}i", z.re, z.im)
    }
}

fn proportional_to_ones(l: &CMatrix) -> bool {
    if l.ncols() != 1 {
        return false;
    }
    let first = l[(0, 0)];
    first.norm() > KIND_TOL && l.iter().all(|&x| (x - first).norm() <= 1e-8 * first.norm())
}

/// Stacks `R*` over `M L⁺` and `0` over `-L*`, tagging the kind.
pub fn assemble_vertex_conditions(cm: &CouplingMatrices) -> VertexConditions {
    let n = cm.edge_count();
    let r = cm.rank();
    if r == 0 {
        return VertexConditions::dirichlet(n);
    }
    let mut a = CMatrix::zeros(n, n);
    let mut b = CMatrix::zeros(n, n);
    let top = n - r;
    a.view_mut((0, 0), (top, n)).copy_from(&cm.r_perp.adjoint());
    a.view_mut((top, 0), (r, n)).copy_from(&(&cm.m * &cm.lplus));
    b.view_mut((top, 0), (r, n)).copy_from(&(-cm.l.adjoint()));
    let kind = if cm.k.iter().any(|z| z.norm() > KIND_TOL) {
        ConditionKind::CoulombQuasi
    } else if proportional_to_ones(&cm.l) {
        ConditionKind::Delta
    } else if cm.m.norm() <= KIND_TOL {
        ConditionKind::ScaleInvariant
    } else {
        ConditionKind::Generic
    };
    VertexConditions { a, b, kind }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelfAdjointReport {
    pub self_adjoint: bool,
    /// `sigma_min / sigma_max` of `(A B)`.
    pub rank_ratio: f64,
    /// `‖AB* - BA*‖`.
    pub hermitian_defect: f64,
}

pub fn self_adjoint_report(vc: &VertexConditions, tol: f64) -> SelfAdjointReport {
    let sv = linalg::singular_values(&vc.block());
    let n = vc.edge_count();
    let rank_ratio = if sv.is_empty() || sv[0] == 0.0 {
        0.0
    } else {
        sv[n - 1] / sv[0]
    };
    let ab = &vc.a * vc.b.adjoint();
    let hermitian_defect = (&ab - ab.adjoint()).norm();
    SelfAdjointReport {
        self_adjoint: rank_ratio > tol && hermitian_defect <= tol,
        rank_ratio,
        hermitian_defect,
    }
}

/// Maximal rank of `(A B)` and `AB*` Hermitian, both to `tol`.
pub fn check_self_adjoint(vc: &VertexConditions, tol: f64) -> bool {
    self_adjoint_report(vc, tol).self_adjoint
}

/// Largest `|Ω(x, y)|` over pairs of basis vectors of the condition
/// subspace, `Ω(x, y) = Σ (x_k conj(y'_k) - x'_k conj(y_k))`. Vanishes for
/// self-adjoint conditions.
pub fn green_identity_residual(vc: &VertexConditions) -> f64 {
    let n = vc.edge_count();
    let q = vc.condition_subspace();
    symplectic_form_max(&q, n)
}

/// Largest `|Ω(x, y)| / (|x| |y|)` over `samples` random pairs drawn from
/// the condition subspace.
pub fn green_identity_sampled<R: Rng + ?Sized>(vc: &VertexConditions, samples: usize, rng: &mut R) -> f64 {
    let n = vc.edge_count();
    let q = vc.condition_subspace();
    let draw = |rng: &mut R| -> CMatrix {
        let coeffs = CMatrix::from_fn(q.ncols(), 1, |_, _| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        &q * coeffs
    };
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let x = draw(rng);
        let y = draw(rng);
        let mut omega = Complex64::new(0.0, 0.0);
        for k in 0..n {
            omega += x[k] * y[n + k].conj() - x[n + k] * y[k].conj();
        }
        let scale = x.norm() * y.norm();
        if scale > 0.0 {
            worst = worst.max(omega.norm() / scale);
        }
    }
    worst
}

pub(crate) fn symplectic_form_max(q: &CMatrix, n: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..q.ncols() {
        for j in 0..q.ncols() {
            let mut omega = Complex64::new(0.0, 0.0);
            for k in 0..n {
                omega += q[(k, i)] * q[(n + k, j)].conj() - q[(n + k, i)] * q[(k, j)].conj();
            }
            worst = worst.max(omega.norm());
        }
    }
    worst
}

/// Sine of the largest principal angle between two condition subspaces.
pub fn subspace_distance(a: &VertexConditions, b: &VertexConditions) -> f64 {
    linalg::max_principal_angle_sine(&a.condition_subspace(), &b.condition_subspace())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BasisChangeReport {
    pub residual_original: f64,
    pub residual_transformed: f64,
    pub verdicts_equal: bool,
    /// `‖M̂ - X*MX‖ + ‖N̂ - X*NX‖ + ‖L̂ - LX‖` with hatted matrices recomputed
    /// from the transformed basis.
    pub transformation_defect: f64,
    /// Sine of the largest principal angle between the condition subspaces.
    pub subspace_angle: f64,
}

impl BasisChangeReport {
    pub fn passed(&self, tol: f64) -> bool {
        self.verdicts_equal && self.subspace_angle <= tol
    }
}

pub fn basis_change_invariance_check(
    res: &ResonanceData,
    coulomb: &CoulombSpec,
    short_range: &ShortRangeSpec,
    x: &CMatrix,
    tol: f64,
) -> Result<BasisChangeReport> {
    let cm = build_matrices(res, coulomb, short_range)?;
    let res_hat = res.with_basis_change(x)?;
    let cm_hat = build_matrices(&res_hat, coulomb, short_range)?;
    let xs = x.adjoint();
    let transformation_defect = (&cm_hat.m - &xs * &cm.m * x).norm()
        + (&cm_hat.n - &xs * &cm.n * x).norm()
        + (&cm_hat.l - &cm.l * x).norm();
    let c0 = check_convergence_condition(&cm, tol);
    let c1 = check_convergence_condition(&cm_hat, tol);
    let subspace_angle = subspace_distance(
        &assemble_vertex_conditions(&cm),
        &assemble_vertex_conditions(&cm_hat),
    );
    Ok(BasisChangeReport {
        residual_original: c0.residual,
        residual_transformed: c1.residual,
        verdicts_equal: c0.holds == c1.holds,
        transformation_defect,
        subspace_angle,
    })
}

#[derive(Clone, Debug)]
pub struct ResonantBlock {
    /// 0-based edge indices.
    pub edges: Vec<usize>,
    /// Columns of the rotated basis supported on this block.
    pub columns: Vec<usize>,
    pub data: ResonanceData,
}

#[derive(Clone, Debug)]
pub struct DecompositionReport {
    pub non_resonant_edges: Vec<usize>,
    pub blocks: Vec<ResonantBlock>,
    /// `L` in the rotated (reduced echelon) basis.
    pub rotated_l: CMatrix,
    /// Largest entry of the rotated `L` classified as zero.
    pub leakage: f64,
    /// Smallest entry classified as nonzero.
    pub smallest_support_entry: f64,
    /// Zero and nonzero entries are separated by at least three decades.
    pub exact: bool,
}

impl fmt::Display for DecompositionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let fmt_set = |s: &[usize]| {
            let v: Vec<String> = s.iter().map(|k| (k + 1).to_string()).collect();
            format!("{{{}}}", v.join(", "))
        };
        writeln!(f, "E0 = {}", fmt_set(&self.non_resonant_edges))?;
        for (i, b) in self.blocks.iter().enumerate() {
            writeln!(f, "E{} = {}", i + 1, fmt_set(&b.edges))?;
        }
        write!(f, "exact: {}", self.exact)
    }
}

/// Reduced row echelon form with partial pivoting; returns the form and
/// the pivot columns.
fn rref(mut m: CMatrix, tol: f64) -> (CMatrix, Vec<usize>) {
    let (rows, cols) = m.shape();
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut pivots = Vec::new();
    let mut row = 0;
    for col in 0..cols {
        if row == rows {
            break;
        }
        let (best, val) = (row..rows)
            .map(|i| (i, m[(i, col)].norm()))
            .fold((row, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if val <= tol * scale {
            continue;
        }
        m.swap_rows(row, best);
        let p = m[(row, col)];
        for j in 0..cols {
            m[(row, j)] /= p;
        }
        for i in 0..rows {
            if i != row {
                let f = m[(i, col)];
                if f != c(0.0) {
                    for j in 0..cols {
                        let v = m[(row, j)];
                        m[(i, j)] -= f * v;
                    }
                }
            }
        }
        pivots.push(col);
        row += 1;
    }
    (m, pivots)
}

fn find(parent: &mut [usize], x: usize) -> usize {
    let mut root = x;
    while parent[root] != root {
        root = parent[root];
    }
    let mut cur = x;
    while parent[cur] != root {
        let next = parent[cur];
        parent[cur] = root;
        cur = next;
    }
    root
}

/// Splits the edges into non-resonant ones and blocks coupled by the
/// half-bound states, after rotating the basis to reduced echelon form.
pub fn decompose(res: &ResonanceData, tol: f64) -> Result<DecompositionReport> {
    let n = res.edge_count();
    let r = res.rank();
    let l = res.l_matrix();
    let non_resonant_edges: Vec<usize> = (0..n).filter(|&k| l.row(k).norm() <= tol).collect();
    if r == 0 {
        return Ok(DecompositionReport {
            non_resonant_edges,
            blocks: vec![],
            rotated_l: l.clone(),
            leakage: 0.0,
            smallest_support_entry: f64::INFINITY,
            exact: true,
        });
    }
    let (echelon, _) = rref(l.transpose(), 1e-12);
    let target = echelon.transpose();
    // L X = target
    let x = pseudoinverse(l)? * &target;
    let rotated = res.with_basis_change(&x)?;
    let rl = rotated.l_matrix().clone();

    // union-find over edges 0..n and columns n..n+r
    let mut parent: Vec<usize> = (0..n + r).collect();
    let mut leakage: f64 = 0.0;
    let mut smallest = f64::INFINITY;
    for k in 0..n {
        for j in 0..r {
            let v = rl[(k, j)].norm();
            if v > tol {
                smallest = smallest.min(v);
                let (a, b) = (find(&mut parent, k), find(&mut parent, n + j));
                parent[a] = b;
            } else {
                leakage = leakage.max(v);
            }
        }
    }
    let mut groups: Vec<(usize, Vec<usize>, Vec<usize>)> = Vec::new();
    for k in 0..n {
        if non_resonant_edges.contains(&k) {
            continue;
        }
        let root = find(&mut parent, k);
        match groups.iter_mut().find(|g| g.0 == root) {
            Some(g) => g.1.push(k),
            None => groups.push((root, vec![k], vec![])),
        }
    }
    for j in 0..r {
        let root = find(&mut parent, n + j);
        if let Some(g) = groups.iter_mut().find(|g| g.0 == root) {
            g.2.push(j);
        }
    }
    let blocks = groups
        .into_iter()
        .map(|(_, edges, columns)| ResonantBlock {
            data: rotated.restrict(&edges, &columns),
            edges,
            columns,
        })
        .collect();
    Ok(DecompositionReport {
        non_resonant_edges,
        blocks,
        rotated_l: rl,
        leakage,
        smallest_support_entry: smallest,
        exact: leakage <= tol && smallest >= 1e3 * tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::Profile;
    use crate::resonance::{solve_half_bound_states, ResonanceOptions};
    use std::f64::consts::PI;

    fn spec(n: usize, v: f64, u: f64, kappa: f64) -> ShortRangeSpec {
        ShortRangeSpec::uniform(n, Profile::unit(kappa), Profile::unit(u), Profile::unit(v))
    }

    fn matrices(n: usize, v: f64, u: f64, kappa: f64, q: Vec<f64>) -> CouplingMatrices {
        let sr = spec(n, v, u, kappa);
        let res = solve_half_bound_states(&sr, &ResonanceOptions::default()).unwrap();
        build_matrices(&res, &CoulombSpec::new(q).unwrap(), &sr).unwrap()
    }

    #[test]
    fn delta_case_matrices() {
        let u0 = 0.7;
        let sr = spec(3, 0.0, u0, 0.0);
        let res = solve_half_bound_states(&sr, &ResonanceOptions::default()).unwrap();
        // rotate to psi ≡ 1
        let x = CMatrix::from_element(1, 1, c(1.0) / res.l_matrix()[(0, 0)]);
        let res = res.with_basis_change(&x).unwrap();
        let cm = build_matrices(&res, &CoulombSpec::zero(3), &sr).unwrap();
        assert!((cm.m[(0, 0)] - c(3.0 * u0)).norm() < 1e-12);
        for k in 0..3 {
            assert!((cm.lplus[(0, k)] - c(1.0 / 3.0)).norm() < 1e-12);
        }
        assert!(cm.invariant_defect() < 1e-12);
        let vc = assemble_vertex_conditions(&cm);
        assert_eq!(vc.kind, ConditionKind::Delta);
        assert!(vc.to_string().contains("2.1"));
    }

    #[test]
    fn zero_u_and_kappa_give_zero_matrices() {
        let cm = matrices(3, -PI * PI / 4.0, 0.0, 0.0, vec![0.0; 3]);
        assert_eq!(cm.m.norm(), 0.0);
        assert_eq!(cm.n.norm(), 0.0);
        assert_eq!(assemble_vertex_conditions(&cm).kind, ConditionKind::ScaleInvariant);
    }

    #[test]
    fn convergence_condition_examples() {
        // sum q = 6 = ∫κ
        let cm = matrices(3, 0.0, 0.0, 2.0, vec![1.0, 2.0, 3.0]);
        assert!(check_convergence_condition(&cm, 1e-9).holds);
        // Q = 0, κ = 0: trivially true, any V
        for v in [0.0, -PI * PI / 4.0, 10.0] {
            assert!(check_convergence_condition(&matrices(3, v, 1.0, 0.0, vec![0.0; 3]), 1e-9).holds);
        }
        // line cutoff q1 = -alpha on the left, alpha on the right, κ = 0
        let line = CoulombSpec::from_line(-1.0, 1.0);
        let sr = spec(2, 0.0, 0.0, 0.0);
        let res = solve_half_bound_states(&sr, &ResonanceOptions::default()).unwrap();
        let cm = build_matrices(&res, &line, &sr).unwrap();
        let chk = check_convergence_condition(&cm, 1e-9);
        assert!(!chk.holds);
        assert!(chk.residual > 0.5);
    }

    #[test]
    fn non_resonant_gives_dirichlet() {
        let cm = matrices(3, 10.0, 1.0, 0.0, vec![0.0; 3]);
        let vc = assemble_vertex_conditions(&cm);
        assert_eq!(vc.kind, ConditionKind::DirichletSum);
        assert_eq!(vc.a, CMatrix::identity(3, 3));
        assert_eq!(vc.b, CMatrix::zeros(3, 3));
        assert!(vc.to_string().contains("Dirichlet"));
    }

    #[test]
    fn scale_invariant_subspace() {
        let cm = matrices(3, -PI * PI / 4.0, 0.0, 0.0, vec![0.0; 3]);
        let vc = assemble_vertex_conditions(&cm);
        // expected: phi(a) ∈ span L, phi'(a) ∈ (span L)^⊥
        let q_l = linalg::column_space(&cm.l, 1e-12);
        let q_r = &cm.r_perp;
        let mut expected = CMatrix::zeros(6, 3);
        expected.view_mut((0, 0), (3, 2)).copy_from(&q_l);
        expected.view_mut((3, 2), (3, 1)).copy_from(q_r);
        let q = vc.condition_subspace();
        assert!(linalg::max_principal_angle_sine(&q, &expected) < 1e-10);
    }

    #[test]
    fn self_adjoint_examples() {
        let i3 = CMatrix::identity(3, 3);
        let z3 = CMatrix::zeros(3, 3);
        let vc = |a: CMatrix, b: CMatrix| VertexConditions::new(a, b, ConditionKind::Generic).unwrap();
        assert!(check_self_adjoint(&vc(i3.clone(), z3.clone()), 1e-10));
        assert!(check_self_adjoint(&vc(z3.clone(), i3.clone()), 1e-10));
        let bad = vc(i3.clone(), i3.map(|z| z * Complex64::i()));
        assert!(!check_self_adjoint(&bad, 1e-10));
        assert!(green_identity_residual(&bad) > 0.1);
        assert!(VertexConditions::new(i3, CMatrix::zeros(2, 2), ConditionKind::Generic).is_err());
    }

    #[test]
    fn assembled_conditions_are_self_adjoint() {
        for (v, u, kappa, q) in [
            (0.0, 1.0, 0.0, vec![0.0; 3]),
            (0.0, 0.5, 2.0, vec![1.0, 2.0, 3.0]),
            (-PI * PI / 4.0, 1.3, 0.0, vec![0.0; 3]),
            (-PI * PI / 4.0, 1.3, 0.4, vec![0.2, -1.0, 0.5]),
        ] {
            let vc = assemble_vertex_conditions(&matrices(3, v, u, kappa, q));
            let rep = self_adjoint_report(&vc, 1e-10);
            assert!(rep.self_adjoint, "{rep:?}");
            assert!(green_identity_residual(&vc) < 1e-10);
        }
    }

    #[test]
    fn basis_change_identity_and_scaling() {
        let sr = spec(3, -PI * PI / 4.0, 0.8, 0.0);
        let res = solve_half_bound_states(&sr, &ResonanceOptions::default()).unwrap();
        let q = CoulombSpec::zero(3);
        let id = CMatrix::identity(2, 2);
        let rep = basis_change_invariance_check(&res, &q, &sr, &id, 1e-9).unwrap();
        assert!(rep.subspace_angle < 1e-14);
        assert!(rep.transformation_defect < 1e-14);
        let rep = basis_change_invariance_check(&res, &q, &sr, &(id * c(2.0)), 1e-9).unwrap();
        assert!(rep.passed(1e-9), "{rep:?}");
        assert!(rep.transformation_defect < 1e-12);
        let singular = CMatrix::zeros(2, 2);
        assert!(matches!(
            basis_change_invariance_check(&res, &q, &sr, &singular, 1e-9),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn decompose_examples() {
        let res = solve_half_bound_states(&spec(3, 0.0, 0.0, 0.0), &Default::default()).unwrap();
        let d = decompose(&res, 1e-8).unwrap();
        assert!(d.non_resonant_edges.is_empty());
        assert_eq!(d.blocks.len(), 1);
        assert_eq!(d.blocks[0].edges, vec![0, 1, 2]);

        let res = solve_half_bound_states(&spec(3, 10.0, 0.0, 0.0), &Default::default()).unwrap();
        let d = decompose(&res, 1e-8).unwrap();
        assert_eq!(d.non_resonant_edges, vec![0, 1, 2]);
        assert!(d.blocks.is_empty());

        let w = -PI * PI / 4.0;
        let v = vec![Profile::unit(w), Profile::unit(w), Profile::unit(10.0), Profile::unit(10.0)];
        let sr = ShortRangeSpec::new(vec![Profile::Zero; 4], vec![Profile::Zero; 4], v).unwrap();
        let res = solve_half_bound_states(&sr, &Default::default()).unwrap();
        let d = decompose(&res, 1e-8).unwrap();
        assert_eq!(d.non_resonant_edges, vec![2, 3]);
        assert_eq!(d.blocks.len(), 1);
        assert_eq!(d.blocks[0].edges, vec![0, 1]);
        assert!(d.exact);
        assert!(d.to_string().contains("E1 = {1, 2}"));
    }

    #[test]
    fn decompose_splits_two_resonant_pairs() {
        // pairs {0,1} and {2,3} both resonant with cos wells; r = 3 on the
        // full graph, but a rotated basis keeps one state spread over all
        // edges, so the whole graph is one block.
        let w = -PI * PI / 4.0;
        let sr = ShortRangeSpec::uniform(4, Profile::Zero, Profile::Zero, Profile::unit(w));
        let res = solve_half_bound_states(&sr, &Default::default()).unwrap();
        assert_eq!(res.rank(), 3);
        let d = decompose(&res, 1e-8).unwrap();
        assert_eq!(d.blocks.len(), 1);
        assert!(d.exact);
        // synthetic block-diagonal L
        let mut l = CMatrix::zeros(5, 2);
        l[(0, 0)] = c(1.0);
        l[(1, 0)] = c(-2.0);
        l[(3, 1)] = c(0.5);
        l[(4, 1)] = c(1.5);
        let d = decompose(&ResonanceData::from_l_matrix(l), 1e-8).unwrap();
        assert_eq!(d.non_resonant_edges, vec![2]);
        let edges: Vec<_> = d.blocks.iter().map(|b| b.edges.clone()).collect();
        assert_eq!(edges, vec![vec![0, 1], vec![3, 4]]);
    }

    #[test]
    fn matrices_round_trip_through_json() {
        let cm = matrices(3, 0.0, 1.0, 0.0, vec![0.0; 3]);
        let s = serde_json::to_string(&cm).unwrap();
        let back: CouplingMatrices = serde_json::from_str(&s).unwrap();
        assert_eq!(back.l, cm.l);
        assert_eq!(back.r_perp.shape(), (3, 2));
    }
}
