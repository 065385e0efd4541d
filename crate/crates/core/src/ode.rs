//! Adaptive Dormand-Prince 5(4) integrator for small complex systems.

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type State<const N: usize> = [Complex64; N];

#[derive(Clone, Copy, Debug)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rtol: 1e-11,
            atol: 1e-14,
            max_steps: 200_000,
        }
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// 5th minus embedded 4th order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn lin<const N: usize>(y: &State<N>, terms: &[(f64, &State<N>)], h: f64) -> State<N> {
    let mut out = *y;
    for (coef, k) in terms {
        for i in 0..N {
            out[i] += k[i] * (h * coef);
        }
    }
    out
}

/// Integrates `y' = rhs(t, y)` from `t0` to `t1` (either direction).
/// `h0` is a suggested first step magnitude; the step size the controller
/// would try next (before clipping to `t1`) is returned alongside the final state so callers chaining
/// segments can reuse it.
pub fn integrate<const N: usize, F>(
    rhs: F,
    t0: f64,
    t1: f64,
    y0: State<N>,
    h0: f64,
    tol: &Tolerances,
) -> Result<(State<N>, f64)>
where
    F: Fn(f64, &State<N>) -> State<N>,
{
    let span = t1 - t0;
    if span == 0.0 {
        return Ok((y0, h0));
    }
    let dir = span.signum();
    let mut t = t0;
    let mut y = y0;
    let mut h = h0.abs().min(span.abs()).max(1e-300);
    let mut k1 = rhs(t, &y);
    let mut steps = 0usize;
    loop {
        if steps >= tol.max_steps {
            return Err(Error::Numerical(format!(
                "ODE integration exceeded {} steps at t = {t}",
                tol.max_steps
            )));
        }
        steps += 1;
        let remaining = (t1 - t).abs();
        let last = h >= remaining;
        let proposed = h;
        if last {
            h = remaining;
        }
        let hs = h * dir;
        let k2 = rhs(t + C2 * hs, &lin(&y, &[(A21, &k1)], hs));
        let k3 = rhs(t + C3 * hs, &lin(&y, &[(A31, &k1), (A32, &k2)], hs));
        let k4 = rhs(
            t + C4 * hs,
            &lin(&y, &[(A41, &k1), (A42, &k2), (A43, &k3)], hs),
        );
        let k5 = rhs(
            t + C5 * hs,
            &lin(&y, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)], hs),
        );
        let k6 = rhs(
            t + hs,
            &lin(
                &y,
                &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
                hs,
            ),
        );
        let y_new = lin(
            &y,
            &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)],
            hs,
        );
        let t_new = if last { t1 } else { t + hs };
        let k7 = rhs(t_new, &y_new);

        // scaled by the whole state so components crossing zero do not
        // force the step down
        let size = y
            .iter()
            .chain(y_new.iter())
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        let scale = tol.atol + tol.rtol * size;
        let mut err = 0.0f64;
        for i in 0..N {
            let e = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7)
                * hs;
            err = err.max(e.norm() / scale);
        }
        if !err.is_finite() {
            return Err(Error::Numerical(format!("non-finite ODE state near t = {t}")));
        }
        if err <= 1.0 {
            t = t_new;
            y = y_new;
            k1 = k7;
            if last {
                return Ok((y, proposed.max(h)));
            }
        }
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        h *= factor;
        if err > 1.0 && h < 1e-15 * t.abs().max(1e-300) {
            return Err(Error::Numerical(format!("ODE step size underflow at t = {t}")));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator_both_directions() {
        let rhs = |_t: f64, y: &State<2>| [y[1], -y[0]];
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        let (y, _) = integrate(rhs, 0.0, 3.0, [one, zero], 0.1, &Tolerances::default()).unwrap();
        assert!((y[0].re - 3.0f64.cos()).abs() < 1e-9);
        let (y, _) = integrate(rhs, 3.0, 0.0, y, 0.1, &Tolerances::default()).unwrap();
        assert!((y[0] - one).norm() < 1e-9);
    }

    #[test]
    fn complex_exponential() {
        let z = Complex64::new(0.3, -1.2);
        let rhs = move |_t: f64, y: &State<1>| [z * y[0]];
        let (y, _) = integrate(
            rhs,
            0.0,
            2.0,
            [Complex64::new(1.0, 0.0)],
            0.01,
            &Tolerances::default(),
        )
        .unwrap();
        assert!((y[0] - (z * 2.0).exp()).norm() < 1e-9);
    }
}
