//! Adaptive Dormand–Prince 5(4) integrator on flat real state vectors.

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug)]
pub struct OdeOptions {
    /// Mixed absolute/relative tolerance per component.
    pub tol: f64,
    pub h_init: f64,
    pub h_min: f64,
    pub max_steps: usize,
}

impl OdeOptions {
    pub fn with_tol(tol: f64) -> Self {
        OdeOptions { tol, h_init: 1e-3, h_min: 1e-13, max_steps: 2_000_000 }
    }
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self::with_tol(1e-8)
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
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn combine<T: Real>(y: &[T], h: f64, ks: &[(&[T], f64)]) -> Vec<T> {
    let mut out = y.to_vec();
    for (k, a) in ks {
        let c = T::lit(h * a);
        for (o, ki) in out.iter_mut().zip(k.iter()) {
            *o += c * *ki;
        }
    }
    out
}

/// Integrates `y' = f(t, y)` from `t0` to `t1` (either direction).
///
/// `post_step` runs after every accepted step and may project the state
/// (used to re-symmetrize matrix blocks). A failed right-hand side inside a
/// stage is treated as a rejected step.
pub fn integrate<T, F, P>(mut f: F, t0: f64, y0: &[T], t1: f64, opts: &OdeOptions, mut post_step: P) -> Result<Vec<T>>
where
    T: Real,
    F: FnMut(f64, &[T]) -> Result<Vec<T>>,
    P: FnMut(&mut Vec<T>),
{
    let mut y = y0.to_vec();
    if t1 == t0 {
        return Ok(y);
    }
    let dir = (t1 - t0).signum();
    let span = (t1 - t0).abs();
    let mut t = t0;
    let mut h = opts.h_init.min(span);
    let mut k1 = f(t, &y)?;
    let mut steps = 0usize;
    let mut last_err: Option<Error> = None;
    loop {
        let remaining = (t1 - t).abs();
        if remaining <= 1e-14 * span.max(1.0) {
            break;
        }
        steps += 1;
        if steps > opts.max_steps {
            return Err(Error::StepFailure { t, reason: "maximum number of steps exceeded".into() });
        }
        let last = h >= remaining;
        let hs = if last { remaining } else { h };
        let hd = dir * hs;

        let attempt = (|| -> Result<(Vec<T>, Vec<T>, f64)> {
            let y2 = combine(&y, hd, &[(&k1, A21)]);
            let k2 = f(t + C2 * hd, &y2)?;
            let y3 = combine(&y, hd, &[(&k1, A31), (&k2, A32)]);
            let k3 = f(t + C3 * hd, &y3)?;
            let y4 = combine(&y, hd, &[(&k1, A41), (&k2, A42), (&k3, A43)]);
            let k4 = f(t + C4 * hd, &y4)?;
            let y5 = combine(&y, hd, &[(&k1, A51), (&k2, A52), (&k3, A53), (&k4, A54)]);
            let k5 = f(t + C5 * hd, &y5)?;
            let y6 = combine(&y, hd, &[(&k1, A61), (&k2, A62), (&k3, A63), (&k4, A64), (&k5, A65)]);
            let k6 = f(t + hd, &y6)?;
            let ynew = combine(&y, hd, &[(&k1, B1), (&k3, B3), (&k4, B4), (&k5, B5), (&k6, B6)]);
            let k7 = f(t + hd, &ynew)?;
            let mut err2 = 0.0;
            for i in 0..y.len() {
                let e = hd
                    * (E1 * k1[i].val() + E3 * k3[i].val() + E4 * k4[i].val() + E5 * k5[i].val()
                        + E6 * k6[i].val() + E7 * k7[i].val());
                let sc = opts.tol * (1.0 + y[i].val().abs().max(ynew[i].val().abs()));
                err2 += (e / sc) * (e / sc);
            }
            let err = (err2 / y.len().max(1) as f64).sqrt();
            Ok((ynew, k7, err))
        })();

        match attempt {
            Ok((ynew, k7, err)) if err.is_finite() && err <= 1.0 => {
                t = if last { t1 } else { t + hd };
                y = ynew;
                post_step(&mut y);
                k1 = if last { k7 } else { f(t, &y)? };
                let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                if !last {
                    h = hs * fac;
                }
                last_err = None;
            }
            other => {
                if let Err(e) = other {
                    last_err = Some(e);
                }
                h = hs * 0.25;
                if h < opts.h_min {
                    let reason = match last_err {
                        Some(e) => format!("step size underflow after: {e}"),
                        None => "step size underflow; tolerance cannot be met".into(),
                    };
                    return Err(Error::StepFailure { t, reason });
                }
            }
        }
    }
    Ok(y)
}
