//! Small dense helpers on top of nalgebra plus a pivoted tridiagonal solver.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

pub(crate) fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn cabs1(z: Complex64) -> f64 {
    z.re.abs() + z.im.abs()
}

/// LU factorization of a tridiagonal matrix with partial pivoting (the
/// `gttrf`/`gtts2` scheme): fill-in is confined to a second superdiagonal.
#[derive(Clone, Debug)]
pub struct TridiagonalLu {
    dl: Vec<Complex64>,
    d: Vec<Complex64>,
    du: Vec<Complex64>,
    du2: Vec<Complex64>,
    swapped: Vec<bool>,
}

impl TridiagonalLu {
    /// `sub[i]` is entry `(i+1, i)`, `sup[i]` is entry `(i, i+1)`.
    pub fn factor(sub: &[Complex64], diag: &[Complex64], sup: &[Complex64]) -> Result<Self> {
        let n = diag.len();
        if n == 0 || sub.len() + 1 != n || sup.len() + 1 != n {
            return Err(Error::Domain(format!(
                "tridiagonal bands have inconsistent lengths {}/{}/{}",
                sub.len(),
                n,
                sup.len()
            )));
        }
        let mut dl = sub.to_vec();
        let mut d = diag.to_vec();
        let mut du = sup.to_vec();
        let mut du2 = vec![c(0.0); n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        for i in 0..n.saturating_sub(1) {
            if cabs1(d[i]) >= cabs1(dl[i]) {
                if d[i] != c(0.0) {
                    let fact = dl[i] / d[i];
                    dl[i] = fact;
                    d[i + 1] -= fact * du[i];
                }
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] = -fact * du[i + 1];
                }
                swapped[i] = true;
            }
        }
        if let Some(i) = d.iter().position(|&x| x == c(0.0)) {
            return Err(Error::Numerical(format!(
                "tridiagonal matrix is singular at pivot {i}"
            )));
        }
        Ok(Self {
            dl,
            d,
            du,
            du2,
            swapped,
        })
    }

    pub fn solve_in_place(&self, b: &mut [Complex64]) {
        let n = self.d.len();
        for i in 0..n - 1 {
            if self.swapped[i] {
                let temp = b[i];
                b[i] = b[i + 1];
                b[i + 1] = temp - self.dl[i] * b[i];
            } else {
                b[i + 1] -= self.dl[i] * b[i];
            }
        }
        b[n - 1] /= self.d[n - 1];
        if n > 1 {
            b[n - 2] = (b[n - 2] - self.du[n - 2] * b[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.du[i] * b[i + 1] - self.du2[i] * b[i + 2]) / self.d[i];
        }
    }

    /// Smallest |pivot| over largest |pivot|; a cheap conditioning hint.
    pub fn pivot_ratio(&self) -> f64 {
        let (lo, hi) = self
            .d
            .iter()
            .map(|z| z.norm())
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), x| (lo.min(x), hi.max(x)));
        lo / hi
    }
}

/// Thin SVD `m = U diag(s) V*` by one-sided Jacobi rotations, singular
/// values descending. Small singular values come out with high relative
/// accuracy, which the rank decisions below depend on. (nalgebra's
/// bidiagonal SVD misreports exactly rank-deficient inputs such as the
/// projector `I - 11ᵀ/3`.)
pub struct Svd {
    pub u: CMatrix,
    pub s: Vec<f64>,
    pub v: CMatrix,
}

pub fn svd(m: &CMatrix) -> Svd {
    let (rows, cols) = m.shape();
    let mut a = m.clone();
    let mut v = CMatrix::identity(cols, cols);
    for _sweep in 0..60 {
        let mut rotated = false;
        for i in 0..cols {
            for j in i + 1..cols {
                let alpha: f64 = a.column(i).iter().map(|z| z.norm_sqr()).sum();
                let beta: f64 = a.column(j).iter().map(|z| z.norm_sqr()).sum();
                let gamma: Complex64 = a.column(i).dotc(&a.column(j));
                let g = gamma.norm();
                if g == 0.0 || g <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                for mat in [&mut a, &mut v] {
                    for r in 0..mat.nrows() {
                        let xi = mat[(r, i)];
                        let xj = mat[(r, j)] * phase.conj();
                        mat[(r, i)] = xi * cs - xj * sn;
                        mat[(r, j)] = xi * sn + xj * cs;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut order: Vec<(usize, f64)> = (0..cols).map(|j| (j, a.column(j).norm())).collect();
    order.sort_by(|x, y| y.1.total_cmp(&x.1));
    let k = rows.min(cols);
    let mut u = CMatrix::zeros(rows, k);
    let mut vv = CMatrix::zeros(cols, k);
    let mut s = Vec::with_capacity(k);
    for (dst, &(j, sigma)) in order.iter().take(k).enumerate() {
        s.push(sigma);
        vv.set_column(dst, &v.column(j));
        if sigma > 0.0 {
            u.set_column(dst, &(a.column(j) / c(sigma)));
        }
    }
    Svd { u, s, v: vv }
}

/// Singular values of `m`, descending.
pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return vec![];
    }
    if m.nrows() >= m.ncols() {
        svd(m).s
    } else {
        svd(&m.adjoint()).s
    }
}

pub fn spectral_norm(m: &CMatrix) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Orthonormal basis of the column space, keeping directions whose singular
/// value exceeds `rel_tol` times the largest one.
pub fn column_space(x: &CMatrix, rel_tol: f64) -> CMatrix {
    let m = x.nrows();
    if x.ncols() == 0 || m == 0 {
        return CMatrix::zeros(m, 0);
    }
    let d = svd(x);
    let smax = d.s.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return CMatrix::zeros(m, 0);
    }
    let keep = d.s.iter().filter(|&&s| s > rel_tol * smax).count();
    d.u.columns(0, keep).into_owned()
}

/// Extends orthonormal columns `q` to a basis of `C^m` and returns the new
/// columns (Gram-Schmidt on unit vectors, largest residual first, with
/// reorthogonalization).
fn complete_basis(q: &CMatrix) -> CMatrix {
    let m = q.nrows();
    let mut basis: Vec<nalgebra::DVector<Complex64>> = q.column_iter().map(|c| c.into_owned()).collect();
    let mut out = Vec::new();
    while basis.len() < m {
        let mut best: Option<nalgebra::DVector<Complex64>> = None;
        let mut best_norm = -1.0;
        for i in 0..m {
            let mut e = nalgebra::DVector::<Complex64>::zeros(m);
            e[i] = c(1.0);
            for _ in 0..2 {
                for b in &basis {
                    let p = b.dotc(&e);
                    e -= b * p;
                }
            }
            let nrm = e.norm();
            if nrm > best_norm {
                best_norm = nrm;
                best = Some(e);
            }
        }
        let e = best.expect("m > 0") / c(best_norm);
        basis.push(e.clone());
        out.push(e);
    }
    if out.is_empty() {
        CMatrix::zeros(m, 0)
    } else {
        CMatrix::from_columns(&out)
    }
}

/// Orthonormal basis of the orthogonal complement of `span(x)` in `C^m`.
pub fn orthogonal_complement(x: &CMatrix, rel_tol: f64) -> CMatrix {
    complete_basis(&column_space(x, rel_tol))
}

/// Orthonormal basis of `ker(w)`.
pub fn kernel(w: &CMatrix, rel_tol: f64) -> CMatrix {
    orthogonal_complement(&w.adjoint(), rel_tol)
}

/// Sine of the largest principal angle between two subspaces given by
/// orthonormal column bases. Different dimensions give 1.
pub fn max_principal_angle_sine(q1: &CMatrix, q2: &CMatrix) -> f64 {
    if q1.ncols() != q2.ncols() || q1.nrows() != q2.nrows() {
        return 1.0;
    }
    if q1.ncols() == 0 {
        return 0.0;
    }
    let resid = q2 - q1 * (q1.adjoint() * q2);
    spectral_norm(&resid).min(1.0)
}

/// Largest principal angle in radians.
pub fn max_principal_angle(q1: &CMatrix, q2: &CMatrix) -> f64 {
    max_principal_angle_sine(q1, q2).asin()
}

pub fn dense_solve(a: CMatrix, b: &[Complex64]) -> Result<Vec<Complex64>> {
    let n = a.nrows();
    let rhs = nalgebra::DVector::from_column_slice(b);
    let lu = a.lu();
    let x = lu
        .solve(&rhs)
        .ok_or_else(|| Error::Numerical(format!("dense {n}x{n} system is singular")))?;
    Ok(x.iter().copied().collect())
}

/// 5-point Gauss-Legendre rule on [-1, 1].
pub(crate) fn gauss_legendre5() -> ([f64; 5], [f64; 5]) {
    let a = (5.0 - 2.0 * (10.0f64 / 7.0).sqrt()).sqrt() / 3.0;
    let b = (5.0 + 2.0 * (10.0f64 / 7.0).sqrt()).sqrt() / 3.0;
    let wa = (322.0 + 13.0 * 70.0f64.sqrt()) / 900.0;
    let wb = (322.0 - 13.0 * 70.0f64.sqrt()) / 900.0;
    ([-b, -a, 0.0, a, b], [wb, wa, 128.0 / 225.0, wa, wb])
}

/// Cubic Hermite interpolant on `[a, b]` from end values and slopes.
pub(crate) fn hermite(a: f64, b: f64, ya: f64, yb: f64, da: f64, db: f64, t: f64) -> f64 {
    let h = b - a;
    let s = (t - a) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    (2.0 * s3 - 3.0 * s2 + 1.0) * ya
        + (s3 - 2.0 * s2 + s) * h * da
        + (-2.0 * s3 + 3.0 * s2) * yb
        + (s3 - s2) * h * db
}

/// Row-major (de)serialization of [`CMatrix`] as nested arrays of `[re, im]`.
pub mod serde_cmatrix {
    use super::CMatrix;
    use num_complex::Complex64;
    use serde::{de::Error as _, Deserialize, Deserializer, Serialize, Serializer};

    pub fn to_rows(m: &CMatrix) -> Vec<Vec<Complex64>> {
        (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
            .collect()
    }

    /// `ncols` is needed to give zero-row matrices a shape.
    pub fn from_rows(rows: &[Vec<Complex64>], ncols: usize) -> Result<CMatrix, String> {
        if rows.iter().any(|r| r.len() != ncols) {
            return Err("matrix rows have unequal lengths".into());
        }
        Ok(CMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
    }

    #[derive(Serialize, Deserialize)]
    struct Repr {
        nrows: usize,
        ncols: usize,
        rows: Vec<Vec<Complex64>>,
    }

    pub fn serialize<S: Serializer>(m: &CMatrix, s: S) -> Result<S::Ok, S::Error> {
        Repr {
            nrows: m.nrows(),
            ncols: m.ncols(),
            rows: to_rows(m),
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CMatrix, D::Error> {
        let r = Repr::deserialize(d)?;
        if r.rows.len() != r.nrows {
            return Err(D::Error::custom("row count does not match nrows"));
        }
        from_rows(&r.rows, r.ncols).map_err(D::Error::custom)
    }
}

/// `f64` that survives JSON when not finite: NaN and infinities are
/// written as the strings `"NaN"`, `"inf"`, `"-inf"`.
pub mod serde_nonfinite {
    use serde::{de::Error as _, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else if x.is_nan() {
            s.serialize_str("NaN")
        } else if *x > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Text(t) => match t.as_str() {
                "NaN" => Ok(f64::NAN),
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                other => Err(D::Error::custom(format!("not a number: {other:?}"))),
            },
        }
    }
}
