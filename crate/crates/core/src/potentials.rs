//! Coulomb-type potential `q_k / tau`, its cut-off regularization and the
//! scaled short-range family
//!
//! ```text
//! W_eps = Q_eps + eps^-2 V(tau/eps) + eps^-1 U(tau/eps),
//! Q_eps = q_k/tau              for tau > eps,
//!       = (ln eps / eps) kappa(tau/eps)  for tau < eps.
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Real function of one variable described exactly, so it can be evaluated
/// and integrated at any resolution. Vanishes outside its breakpoints.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    #[default]
    Zero,
    /// `value` on `[start, end]`.
    Constant {
        value: f64,
        #[serde(default)]
        start: f64,
        #[serde(default = "one")]
        end: f64,
    },
    /// `values[i]` on `[breaks[i], breaks[i+1])`.
    PiecewiseConstant { breaks: Vec<f64>, values: Vec<f64> },
    /// On piece `i`, `sum_j coeffs[i][j] (tau - breaks[i])^j`.
    PiecewisePolynomial {
        breaks: Vec<f64>,
        coeffs: Vec<Vec<f64>>,
    },
    /// Linear interpolation through `(taus[i], values[i])`.
    Tabulated { taus: Vec<f64>, values: Vec<f64> },
}

fn one() -> f64 {
    1.0
}

impl Profile {
    /// `value` on the unit interval.
    pub fn unit(value: f64) -> Self {
        Profile::Constant {
            value,
            start: 0.0,
            end: 1.0,
        }
    }

    pub fn constant_on(value: f64, start: f64, end: f64) -> Self {
        Profile::Constant { value, start, end }
    }

    /// Reads a two-column `tau,value` CSV (header optional).
    pub fn from_csv(path: impl AsRef<Path>) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_path(path)?;
        let mut taus = Vec::new();
        let mut values = Vec::new();
        for record in reader.records() {
            let record = record?;
            if record.len() < 2 {
                return Err(Error::Config("tabulated profile needs two columns".into()));
            }
            match (record[0].parse::<f64>(), record[1].parse::<f64>()) {
                (Ok(t), Ok(v)) => {
                    taus.push(t);
                    values.push(v);
                }
                // header line
                _ if taus.is_empty() => continue,
                _ => {
                    return Err(Error::Config(format!(
                        "unparsable row in tabulated profile: {:?}",
                        record
                    )))
                }
            }
        }
        let p = Profile::Tabulated { taus, values };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let increasing = |b: &[f64]| b.windows(2).all(|w| w[1] > w[0]) && b.iter().all(|x| x.is_finite());
        match self {
            Profile::Zero => Ok(()),
            Profile::Constant { value, start, end } => {
                if value.is_finite() && start.is_finite() && end > start {
                    Ok(())
                } else {
                    Err(Error::Domain(format!("bad constant profile on [{start}, {end}]")))
                }
            }
            Profile::PiecewiseConstant { breaks, values } => {
                if breaks.len() == values.len() + 1
                    && increasing(breaks)
                    && values.iter().all(|v| v.is_finite())
                {
                    Ok(())
                } else {
                    Err(Error::Domain("bad piecewise-constant profile".into()))
                }
            }
            Profile::PiecewisePolynomial { breaks, coeffs } => {
                if breaks.len() == coeffs.len() + 1
                    && increasing(breaks)
                    && coeffs.iter().flatten().all(|v| v.is_finite())
                {
                    Ok(())
                } else {
                    Err(Error::Domain("bad piecewise-polynomial profile".into()))
                }
            }
            Profile::Tabulated { taus, values } => {
                if taus.len() == values.len()
                    && taus.len() >= 2
                    && increasing(taus)
                    && values.iter().all(|v| v.is_finite())
                {
                    Ok(())
                } else {
                    Err(Error::Domain("bad tabulated profile".into()))
                }
            }
        }
    }

    /// Closed support hull `(lo, hi)`, or `None` for the zero profile.
    pub fn support(&self) -> Option<(f64, f64)> {
        match self {
            Profile::Zero => None,
            Profile::Constant { start, end, .. } => Some((*start, *end)),
            Profile::PiecewiseConstant { breaks, .. }
            | Profile::PiecewisePolynomial { breaks, .. } => {
                Some((breaks[0], *breaks.last().unwrap()))
            }
            Profile::Tabulated { taus, .. } => Some((taus[0], *taus.last().unwrap())),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Profile::Zero => true,
            Profile::Constant { value, .. } => *value == 0.0,
            Profile::PiecewiseConstant { values, .. } | Profile::Tabulated { values, .. } => {
                values.iter().all(|v| *v == 0.0)
            }
            Profile::PiecewisePolynomial { coeffs, .. } => {
                coeffs.iter().flatten().all(|v| *v == 0.0)
            }
        }
    }

    /// Points where the profile may fail to be smooth.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            Profile::Zero => vec![],
            Profile::Constant { start, end, .. } => vec![*start, *end],
            Profile::PiecewiseConstant { breaks, .. }
            | Profile::PiecewisePolynomial { breaks, .. } => breaks.clone(),
            Profile::Tabulated { taus, .. } => taus.clone(),
        }
    }

    /// Pieces are closed on the left; the right end of the support is included.
    pub fn eval(&self, tau: f64) -> f64 {
        match self {
            Profile::Zero => 0.0,
            Profile::Constant { value, start, end } => {
                if tau >= *start && tau <= *end {
                    *value
                } else {
                    0.0
                }
            }
            Profile::PiecewiseConstant { breaks, values } => match piece(breaks, tau) {
                Some(i) => values[i],
                None => 0.0,
            },
            Profile::PiecewisePolynomial { breaks, coeffs } => match piece(breaks, tau) {
                Some(i) => horner(&coeffs[i], tau - breaks[i]),
                None => 0.0,
            },
            Profile::Tabulated { taus, values } => match piece(taus, tau) {
                Some(i) => {
                    let s = (tau - taus[i]) / (taus[i + 1] - taus[i]);
                    values[i] * (1.0 - s) + values[i + 1] * s
                }
                None => 0.0,
            },
        }
    }

    /// Exact `∫_a^b` of the profile.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        if b < a {
            return -self.integral(b, a);
        }
        match self {
            Profile::Zero => 0.0,
            Profile::Constant { value, start, end } => {
                let lo = a.max(*start);
                let hi = b.min(*end);
                if hi > lo {
                    value * (hi - lo)
                } else {
                    0.0
                }
            }
            Profile::PiecewiseConstant { breaks, values } => breaks
                .windows(2)
                .zip(values)
                .map(|(w, v)| {
                    let lo = a.max(w[0]);
                    let hi = b.min(w[1]);
                    if hi > lo {
                        v * (hi - lo)
                    } else {
                        0.0
                    }
                })
                .sum(),
            Profile::PiecewisePolynomial { breaks, coeffs } => breaks
                .windows(2)
                .zip(coeffs)
                .map(|(w, c)| {
                    let lo = a.max(w[0]);
                    let hi = b.min(w[1]);
                    if hi > lo {
                        poly_antiderivative(c, hi - w[0]) - poly_antiderivative(c, lo - w[0])
                    } else {
                        0.0
                    }
                })
                .sum(),
            Profile::Tabulated { taus, values } => {
                let mut acc = 0.0;
                for i in 0..taus.len() - 1 {
                    let lo = a.max(taus[i]);
                    let hi = b.min(taus[i + 1]);
                    if hi > lo {
                        let f = |t: f64| {
                            let s = (t - taus[i]) / (taus[i + 1] - taus[i]);
                            values[i] * (1.0 - s) + values[i + 1] * s
                        };
                        acc += 0.5 * (f(lo) + f(hi)) * (hi - lo);
                    }
                }
                acc
            }
        }
    }

    pub fn total_integral(&self) -> f64 {
        match self.support() {
            Some((lo, hi)) => self.integral(lo, hi),
            None => 0.0,
        }
    }

    pub fn sup_abs(&self) -> f64 {
        match self {
            Profile::Zero => 0.0,
            Profile::Constant { value, .. } => value.abs(),
            Profile::PiecewiseConstant { values, .. } | Profile::Tabulated { values, .. } => {
                values.iter().fold(0.0, |m, v| m.max(v.abs()))
            }
            Profile::PiecewisePolynomial { breaks, coeffs } => {
                // sampled bound
                let mut m: f64 = 0.0;
                for (w, c) in breaks.windows(2).zip(coeffs) {
                    for j in 0..=32 {
                        let t = (w[1] - w[0]) * j as f64 / 32.0;
                        m = m.max(horner(c, t).abs());
                    }
                }
                m
            }
        }
    }

    /// Profile supported inside `[0, 1]`, as required for `kappa`, `U`, `V`.
    fn check_unit_support(&self, what: &str, edge: usize) -> Result<()> {
        self.validate()?;
        if let Some((lo, hi)) = self.support() {
            if lo < 0.0 || hi > 1.0 {
                return Err(Error::Domain(format!(
                    "{what} on edge {edge} must vanish outside [0, 1], support is [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }
}

fn piece(breaks: &[f64], tau: f64) -> Option<usize> {
    let last = breaks.len() - 1;
    if tau < breaks[0] || tau > breaks[last] {
        return None;
    }
    if tau == breaks[last] {
        return Some(last - 1);
    }
    Some(breaks.partition_point(|&b| b <= tau) - 1)
}

fn horner(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * x + a)
}

fn poly_antiderivative(c: &[f64], x: f64) -> f64 {
    c.iter()
        .enumerate()
        .rev()
        .fold(0.0, |acc, (j, &a)| acc * x + a / (j as f64 + 1.0))
        * x
}

/// Coupling constants `q_k` of `Q_k(tau) = q_k / tau`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoulombSpec {
    pub q: Vec<f64>,
}

impl CoulombSpec {
    pub fn new(q: Vec<f64>) -> Result<Self> {
        if let Some(x) = q.iter().find(|x| !x.is_finite()) {
            return Err(Error::Domain(format!("non-finite Coulomb constant {x}")));
        }
        Ok(Self { q })
    }

    pub fn zero(n: usize) -> Self {
        Self { q: vec![0.0; n] }
    }

    /// Two-edge graph viewed as the real line with `Q = q_left/x` for `x < 0`
    /// and `q_right/x` for `x > 0`. Edge 0 is the negative half-line, so its
    /// graph constant is `-q_left`.
    pub fn from_line(q_left: f64, q_right: f64) -> Self {
        Self {
            q: vec![-q_left, q_right],
        }
    }

    pub fn edge_count(&self) -> usize {
        self.q.len()
    }

    pub fn is_zero(&self) -> bool {
        self.q.iter().all(|&x| x == 0.0)
    }

    pub fn sum(&self) -> f64 {
        self.q.iter().sum()
    }

    pub fn eval_q(&self, edge: usize, tau: f64) -> Result<f64> {
        if tau.is_nan() || tau <= 0.0 {
            return Err(Error::Domain(format!(
                "Coulomb potential is not defined at tau = {tau}"
            )));
        }
        Ok(self.q[edge] / tau)
    }

    /// `Q_eps` on `edge`. The seam `tau = eps` belongs to the Coulomb branch.
    pub fn eval_qeps(&self, kappa: &Profile, eps: f64, edge: usize, tau: f64) -> Result<f64> {
        check_eps(eps)?;
        if tau >= eps {
            self.eval_q(edge, tau)
        } else {
            Ok(eps.ln() / eps * kappa.eval(tau / eps))
        }
    }
}

/// Per-edge profiles `kappa`, `U`, `V`, each supported in `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShortRangeSpec {
    pub kappa: Vec<Profile>,
    pub u: Vec<Profile>,
    pub v: Vec<Profile>,
}

impl ShortRangeSpec {
    pub fn new(kappa: Vec<Profile>, u: Vec<Profile>, v: Vec<Profile>) -> Result<Self> {
        let s = Self { kappa, u, v };
        s.validate()?;
        Ok(s)
    }

    pub fn zero(n: usize) -> Self {
        Self {
            kappa: vec![Profile::Zero; n],
            u: vec![Profile::Zero; n],
            v: vec![Profile::Zero; n],
        }
    }

    /// Same profile on every edge for each of the three slots.
    pub fn uniform(n: usize, kappa: Profile, u: Profile, v: Profile) -> Self {
        Self {
            kappa: vec![kappa; n],
            u: vec![u; n],
            v: vec![v; n],
        }
    }

    pub fn edge_count(&self) -> usize {
        self.v.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.v.len();
        if self.kappa.len() != n || self.u.len() != n {
            return Err(Error::Domain(format!(
                "kappa/U/V edge counts differ: {}/{}/{}",
                self.kappa.len(),
                self.u.len(),
                n
            )));
        }
        for k in 0..n {
            self.kappa[k].check_unit_support("kappa", k)?;
            self.u[k].check_unit_support("U", k)?;
            self.v[k].check_unit_support("V", k)?;
        }
        Ok(())
    }

    /// `∫ kappa` over the whole graph.
    pub fn kappa_integral(&self) -> f64 {
        self.kappa.iter().map(Profile::total_integral).sum()
    }

    pub fn u_integral(&self) -> f64 {
        self.u.iter().map(Profile::total_integral).sum()
    }

    /// All breakpoints of the three profiles on edge `k`, in `[0, 1]` units.
    pub fn breakpoints(&self, k: usize) -> Vec<f64> {
        let mut b: Vec<f64> = self.kappa[k]
            .breakpoints()
            .into_iter()
            .chain(self.u[k].breakpoints())
            .chain(self.v[k].breakpoints())
            .collect();
        b.sort_by(f64::total_cmp);
        b.dedup();
        b
    }
}

/// `W_eps` for one value of `eps`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularizedPotential {
    pub coulomb: CoulombSpec,
    pub short_range: ShortRangeSpec,
    pub epsilon: f64,
}

impl RegularizedPotential {
    pub fn new(coulomb: CoulombSpec, short_range: ShortRangeSpec, epsilon: f64) -> Result<Self> {
        check_eps(epsilon)?;
        short_range.validate()?;
        if coulomb.edge_count() != short_range.edge_count() {
            return Err(Error::Domain(format!(
                "Coulomb spec has {} edges, short-range spec {}",
                coulomb.edge_count(),
                short_range.edge_count()
            )));
        }
        Ok(Self {
            coulomb,
            short_range,
            epsilon,
        })
    }

    pub fn edge_count(&self) -> usize {
        self.coulomb.edge_count()
    }

    pub fn eval_weps(&self, edge: usize, tau: f64) -> Result<f64> {
        let eps = self.epsilon;
        let sr = &self.short_range;
        let t = tau / eps;
        let q = self.coulomb.eval_qeps(&sr.kappa[edge], eps, edge, tau)?;
        Ok(q + sr.v[edge].eval(t) / (eps * eps) + sr.u[edge].eval(t) / eps)
    }

    /// Exact `∫_a^b W_eps` on `edge`, `0 <= a < b`. The Coulomb part is
    /// integrated analytically, so cells touching `tau = eps` are handled
    /// without sampling the singular branch.
    pub fn cell_integral(&self, edge: usize, a: f64, b: f64) -> f64 {
        let eps = self.epsilon;
        let sr = &self.short_range;
        let mut acc = 0.0;
        let q = self.coulomb.q[edge];
        if b > eps && q != 0.0 {
            acc += q * (b / a.max(eps)).ln();
        }
        let (ta, tb) = (a / eps, b / eps);
        if a < eps {
            acc += eps.ln() * sr.kappa[edge].integral(ta, tb.min(1.0));
        }
        acc += sr.v[edge].integral(ta, tb) / eps;
        acc += sr.u[edge].integral(ta, tb);
        acc
    }

    /// Breakpoints of the scaled profiles on `edge` in `tau` units, plus `eps`.
    pub fn breakpoints(&self, edge: usize) -> Vec<f64> {
        let eps = self.epsilon;
        let mut b: Vec<f64> = self
            .short_range
            .breakpoints(edge)
            .into_iter()
            .map(|t| t * eps)
            .collect();
        b.push(eps);
        b.sort_by(f64::total_cmp);
        b.dedup();
        b
    }
}

pub(crate) fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("epsilon must lie in (0, 1), got {eps}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{E, PI};

    #[test]
    fn coulomb_values() {
        let q = CoulombSpec::new(vec![-1.0, -1.0, -1.0]).unwrap();
        assert_eq!(q.eval_q(0, 0.5).unwrap(), -2.0);
        assert!(matches!(q.eval_q(0, 0.0), Err(Error::Domain(_))));
        let z = CoulombSpec::zero(3);
        assert_eq!(z.eval_q(2, 0.3).unwrap(), 0.0);
        let q = CoulombSpec::new(vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(q.eval_q(2, 3.0).unwrap(), 1.0);
    }

    #[test]
    fn cutoff_values() {
        let q = CoulombSpec::new(vec![-1.0, 0.0]).unwrap();
        assert_eq!(q.eval_qeps(&Profile::Zero, 0.1, 0, 0.05).unwrap(), 0.0);
        assert!((q.eval_qeps(&Profile::Zero, 0.1, 0, 0.2).unwrap() + 5.0).abs() < 1e-14);
        let eps = 1.0 / E;
        let v = q.eval_qeps(&Profile::unit(2.0), eps, 0, eps / 2.0).unwrap();
        assert!((v + 2.0 * E).abs() < 1e-12, "{v}");
        assert!(q.eval_qeps(&Profile::Zero, 1.0, 0, 0.5).is_err());
    }

    #[test]
    fn full_family_values() {
        let n = 2;
        let mk = |v: Profile, u: Profile, eps| {
            RegularizedPotential::new(
                CoulombSpec::zero(n),
                ShortRangeSpec::uniform(n, Profile::Zero, u, v),
                eps,
            )
            .unwrap()
        };
        let p = mk(Profile::unit(-PI * PI / 4.0), Profile::Zero, 0.1);
        let w = p.eval_weps(0, 0.05).unwrap();
        assert!((w + 100.0 * PI * PI / 4.0).abs() < 1e-10);
        let p = mk(Profile::Zero, Profile::unit(1.0), 0.5);
        assert_eq!(p.eval_weps(1, 0.25).unwrap(), 2.0);

        let q = CoulombSpec::new(vec![3.0, -2.0]).unwrap();
        let p = RegularizedPotential::new(q.clone(), ShortRangeSpec::zero(n), 0.2).unwrap();
        assert_eq!(p.eval_weps(0, 0.6).unwrap(), q.eval_q(0, 0.6).unwrap());
    }

    #[test]
    fn outside_core_only_coulomb_survives() {
        let sr = ShortRangeSpec::uniform(
            3,
            Profile::unit(1.5),
            Profile::PiecewiseConstant {
                breaks: vec![0.0, 0.3, 1.0],
                values: vec![2.0, -1.0],
            },
            Profile::Tabulated {
                taus: vec![0.0, 0.5, 1.0],
                values: vec![1.0, -3.0, 0.5],
            },
        );
        let q = CoulombSpec::new(vec![1.0, -2.0, 0.5]).unwrap();
        let p = RegularizedPotential::new(q.clone(), sr, 0.05).unwrap();
        for k in 0..3 {
            for &t in &[0.051, 0.2, 1.0, 7.5] {
                assert_eq!(p.eval_weps(k, t).unwrap(), q.eval_q(k, t).unwrap());
            }
        }
    }

    #[test]
    fn log_scaled_cap_integrates_to_ln_eps_times_kappa_mass() {
        let kappa = Profile::PiecewisePolynomial {
            breaks: vec![0.0, 0.4, 1.0],
            coeffs: vec![vec![1.0, 2.0, -0.5], vec![0.3, 0.0, 4.0, -1.0]],
        };
        let eps = 0.03;
        // composite Gauss-Legendre on the scaled cap
        let (x, w) = gauss5();
        let mut quad = 0.0;
        let cells = 200;
        for c in 0..cells {
            let a = eps * c as f64 / cells as f64;
            let b = eps * (c + 1) as f64 / cells as f64;
            for i in 0..5 {
                let t = 0.5 * (a + b) + 0.5 * (b - a) * x[i];
                quad += 0.5 * (b - a) * w[i] * eps.ln() / eps * kappa.eval(t / eps);
            }
        }
        let expected = eps.ln() * kappa.total_integral();
        assert!((quad - expected).abs() < 1e-8, "{quad} vs {expected}");
    }

    fn gauss5() -> ([f64; 5], [f64; 5]) {
        let a = (5.0 - 2.0 * (10.0f64 / 7.0).sqrt()).sqrt() / 3.0;
        let b = (5.0 + 2.0 * (10.0f64 / 7.0).sqrt()).sqrt() / 3.0;
        let wa = (322.0 + 13.0 * 70.0f64.sqrt()) / 900.0;
        let wb = (322.0 - 13.0 * 70.0f64.sqrt()) / 900.0;
        ([-b, -a, 0.0, a, b], [wb, wa, 128.0 / 225.0, wa, wb])
    }

    #[test]
    fn cell_integral_matches_pointwise_quadrature() {
        let sr = ShortRangeSpec::uniform(
            2,
            Profile::unit(2.0),
            Profile::unit(0.7),
            Profile::PiecewiseConstant {
                breaks: vec![0.0, 0.5, 1.0],
                values: vec![-1.0, 3.0],
            },
        );
        let p = RegularizedPotential::new(CoulombSpec::new(vec![1.0, 2.0]).unwrap(), sr, 0.1)
            .unwrap();
        let exact = p.cell_integral(1, 0.02, 0.3);
        // split at the breakpoints and use Gauss on each smooth part
        let (x, w) = gauss5();
        let mut quad = 0.0;
        let pts = [0.02, 0.05, 0.1, 0.3];
        for seg in pts.windows(2) {
            let cells = 400;
            for c in 0..cells {
                let a = seg[0] + (seg[1] - seg[0]) * c as f64 / cells as f64;
                let b = seg[0] + (seg[1] - seg[0]) * (c + 1) as f64 / cells as f64;
                for i in 0..5 {
                    let t = 0.5 * (a + b) + 0.5 * (b - a) * x[i];
                    quad += 0.5 * (b - a) * w[i] * p.eval_weps(1, t).unwrap();
                }
            }
        }
        assert!((exact - quad).abs() < 1e-9, "{exact} vs {quad}");
    }

    #[test]
    fn supports_outside_unit_interval_are_rejected() {
        let r = ShortRangeSpec::new(
            vec![Profile::Zero; 2],
            vec![Profile::constant_on(1.0, 0.0, 1.5), Profile::Zero],
            vec![Profile::Zero; 2],
        );
        assert!(r.is_err());
    }

    #[test]
    fn line_convention_flips_left_edge() {
        let q = CoulombSpec::from_line(-1.0, 1.0);
        assert_eq!(q.q, vec![1.0, 1.0]);
    }

    #[test]
    fn tabulated_profile_from_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.csv");
        std::fs::write(&path, "tau,value\n0,1\n0.5,3\n1,1\n").unwrap();
        let p = Profile::from_csv(&path).unwrap();
        assert_eq!(p.eval(0.25), 2.0);
        assert!((p.total_integral() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn profile_integrals() {
        let p = Profile::PiecewisePolynomial {
            breaks: vec![0.0, 1.0],
            coeffs: vec![vec![0.0, 0.0, 3.0]],
        };
        assert!((p.integral(0.0, 1.0) - 1.0).abs() < 1e-15);
        assert!((p.integral(0.5, 2.0) - 0.875).abs() < 1e-15);
        let c = Profile::unit(2.0);
        assert_eq!(c.integral(-1.0, 0.25), 0.5);
    }
}
