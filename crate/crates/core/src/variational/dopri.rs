//! Dormand-Prince 5(4) stepper with embedded error control.
//!
//! The stepper only ever integrates across intervals on which the
//! right-hand side is smooth; callers split at discontinuities.

use crate::error::{Error, Result};

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
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// Difference between the 5th and embedded 4th order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;
const MAX_STEPS: usize = 10_000_000;

#[derive(Debug, Clone)]
pub(crate) struct Dopri5 {
    rtol: f64,
    atol: f64,
    max_step: f64,
    /// Step size suggested by the last accepted step; zero before the first.
    next_step: f64,
}

fn combine<const D: usize>(y: &[f64; D], h: f64, terms: &[(f64, &[f64; D])]) -> [f64; D] {
    let mut out = *y;
    for (c, k) in terms {
        if *c == 0.0 {
            continue;
        }
        for i in 0..D {
            out[i] += h * c * k[i];
        }
    }
    out
}

impl Dopri5 {
    pub(crate) fn new(rtol: f64, atol: f64, max_step: f64) -> Self {
        Dopri5 {
            rtol,
            atol,
            max_step,
            next_step: 0.0,
        }
    }

    fn scaled_norm<const D: usize>(&self, v: &[f64; D], y0: &[f64; D], y1: &[f64; D]) -> f64 {
        let sum: f64 = (0..D)
            .map(|i| {
                let sc = self.atol + self.rtol * y0[i].abs().max(y1[i].abs());
                (v[i] / sc).powi(2)
            })
            .sum();
        (sum / D as f64).sqrt()
    }

    /// Hairer's starting-step heuristic.
    fn initial_step<const D: usize, F>(
        &self,
        f: &F,
        t: f64,
        y: &[f64; D],
        f0: &[f64; D],
        span: f64,
    ) -> f64
    where
        F: Fn(f64, &[f64; D]) -> [f64; D],
    {
        let d0 = self.scaled_norm(y, y, y);
        let d1 = self.scaled_norm(f0, y, y);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 {
            1e-6
        } else {
            0.01 * d0 / d1
        };
        let h0 = h0.min(span).min(self.max_step);
        let y1 = combine(y, h0, &[(1.0, f0)]);
        let f1 = f(t + h0, &y1);
        let mut diff = [0.0; D];
        for i in 0..D {
            diff[i] = f1[i] - f0[i];
        }
        let d2 = self.scaled_norm(&diff, y, y) / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(1.0 / 5.0)
        };
        (100.0 * h0).min(h1).min(span).min(self.max_step)
    }

    /// Integrate from `t0` to exactly `t1`. `check` runs after every
    /// accepted step and may abort the integration.
    pub(crate) fn advance<const D: usize, F, C>(
        &mut self,
        f: &F,
        t0: f64,
        y0: [f64; D],
        t1: f64,
        check: &C,
    ) -> Result<[f64; D]>
    where
        F: Fn(f64, &[f64; D]) -> [f64; D],
        C: Fn(f64, &[f64; D]) -> Result<()>,
    {
        let mut t = t0;
        let mut y = y0;
        if t1 <= t0 {
            return Ok(y);
        }
        let mut k1 = f(t, &y);
        let mut h = if self.next_step > 0.0 {
            self.next_step.min(self.max_step)
        } else {
            self.initial_step(f, t, &y, &k1, t1 - t0)
        };
        let mut rejected_last = false;

        for _ in 0..MAX_STEPS {
            let remaining = t1 - t;
            let last = h >= remaining;
            let h_step = if last { remaining } else { h };

            let k2 = f(t + C2 * h_step, &combine(&y, h_step, &[(A21, &k1)]));
            let k3 = f(
                t + C3 * h_step,
                &combine(&y, h_step, &[(A31, &k1), (A32, &k2)]),
            );
            let k4 = f(
                t + C4 * h_step,
                &combine(&y, h_step, &[(A41, &k1), (A42, &k2), (A43, &k3)]),
            );
            let k5 = f(
                t + C5 * h_step,
                &combine(
                    &y,
                    h_step,
                    &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)],
                ),
            );
            let k6 = f(
                t + h_step,
                &combine(
                    &y,
                    h_step,
                    &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
                ),
            );
            let y_new = combine(
                &y,
                h_step,
                &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
            );
            let k7 = f(t + h_step, &y_new);

            let mut err_vec = [0.0; D];
            for i in 0..D {
                err_vec[i] = h_step
                    * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            }
            let err = self.scaled_norm(&err_vec, &y, &y_new);
            let finite = err.is_finite() && y_new.iter().all(|v| v.is_finite());

            if finite && err <= 1.0 {
                let mut factor = if err == 0.0 {
                    MAX_FACTOR
                } else {
                    (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR)
                };
                if rejected_last {
                    factor = factor.min(1.0);
                }
                t = if last { t1 } else { t + h_step };
                y = y_new;
                check(t, &y)?;
                if !last || h_step >= h {
                    h = (h_step * factor).min(self.max_step);
                }
                self.next_step = h;
                if last {
                    return Ok(y);
                }
                k1 = k7;
                rejected_last = false;
            } else {
                let factor = if finite {
                    (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, 1.0)
                } else {
                    0.25
                };
                h = h_step * factor;
                rejected_last = true;
                if h <= 16.0 * f64::EPSILON * t.abs().max(1.0) {
                    return Err(Error::Stiffness { time: t, step: h });
                }
            }
        }
        Err(Error::Stiffness { time: t, step: h })
    }
}
