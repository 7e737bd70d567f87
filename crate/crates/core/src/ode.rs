//! Embedded Dormand–Prince 5(4) integrator for small fixed-size real systems.
//!
//! The fifth-order solution is propagated (local extrapolation) and the
//! embedded fourth-order solution only drives step-size control. Stepping is
//! fully deterministic: identical inputs give bit-identical output.

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum OdeError<const N: usize> {
    #[error("step size underflow at t = {t:e}")]
    StepUnderflow { t: f64, y: [f64; N] },
    #[error("maximum number of steps exceeded at t = {t:e}")]
    MaxSteps { t: f64, y: [f64; N] },
    #[error("non-finite derivative at t = {t:e}")]
    NonFinite { t: f64, y: [f64; N] },
}

impl<const N: usize> OdeError<N> {
    pub fn last_good(&self) -> (f64, [f64; N]) {
        match *self {
            OdeError::StepUnderflow { t, y }
            | OdeError::MaxSteps { t, y }
            | OdeError::NonFinite { t, y } => (t, y),
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

// Fifth-order weights (also the last stage row, FSAL).
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;

// Difference between fifth- and fourth-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DormandPrince {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Smallest allowed step relative to |t| + |t_end − t_start|.
    pub min_step_fraction: f64,
    /// Error-per-unit-step control: when set to a time unit u, the allowed
    /// local error of a step of size h is scaled by min(1, h/u), so the error
    /// accumulated over a span T stays of order tol·T/u instead of growing
    /// with the number of steps.
    pub unit_time: Option<f64>,
}

impl DormandPrince {
    pub fn new(rtol: f64, atol: f64) -> Self {
        Self {
            rtol,
            atol,
            max_steps: 50_000_000,
            min_step_fraction: 1e-14,
            unit_time: None,
        }
    }

    pub fn with_unit_time(mut self, unit: f64) -> Self {
        self.unit_time = Some(unit);
        self
    }

    /// Error norm relative to the allowed error of a step of size `h`.
    fn weighted<const N: usize>(&self, h: f64, y: &[f64; N], y_new: &[f64; N], err: &[f64; N]) -> f64 {
        let norm = self.error_norm(y, y_new, err);
        match self.unit_time {
            Some(u) => norm / (h / u).min(1.0),
            None => norm,
        }
    }

    fn error_norm<const N: usize>(&self, y: &[f64; N], y_new: &[f64; N], err: &[f64; N]) -> f64 {
        let mut worst = 0.0f64;
        if y_new.iter().chain(err).any(|v| !v.is_finite()) {
            return f64::INFINITY;
        }
        for i in 0..N {
            let scale = self.atol + self.rtol * y[i].abs().max(y_new[i].abs());
            worst = worst.max((err[i] / scale).abs());
        }
        worst
    }

    fn initial_step<const N: usize, F>(&self, f: &mut F, t: f64, y: &[f64; N], k1: &[f64; N], span: f64) -> f64
    where
        F: FnMut(f64, &[f64; N]) -> [f64; N],
    {
        let scale = |i: usize| self.atol + self.rtol * y[i].abs();
        let d0 = (0..N).map(|i| (y[i] / scale(i)).powi(2)).sum::<f64>().sqrt();
        let d1 = (0..N).map(|i| (k1[i] / scale(i)).powi(2)).sum::<f64>().sqrt();
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 * span } else { 0.01 * d0 / d1 };
        let h0 = h0.min(span);
        let mut y1 = *y;
        for i in 0..N {
            y1[i] += h0 * k1[i];
        }
        let k2 = f(t + h0, &y1);
        let d2 = (0..N)
            .map(|i| ((k2[i] - k1[i]) / scale(i)).powi(2))
            .sum::<f64>()
            .sqrt()
            / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6 * span)
        } else {
            (0.01 / d1.max(d2)).powf(1.0 / 5.0)
        };
        (100.0 * h0).min(h1).min(span)
    }

    /// Integrate from `t0` to `t_end`, calling `observer` at the initial point and
    /// after every accepted step. Returns the final time and state.
    pub fn integrate<const N: usize, F, O>(
        &self,
        mut f: F,
        t0: f64,
        y0: [f64; N],
        t_end: f64,
        mut observer: O,
    ) -> Result<(f64, [f64; N]), OdeError<N>>
    where
        F: FnMut(f64, &[f64; N]) -> [f64; N],
        O: FnMut(f64, &[f64; N]),
    {
        let mut t = t0;
        let mut y = y0;
        observer(t, &y);
        let span = t_end - t0;
        if span <= 0.0 {
            return Ok((t, y));
        }
        let mut k1 = f(t, &y);
        if k1.iter().any(|v| !v.is_finite()) {
            return Err(OdeError::NonFinite { t, y });
        }
        let mut h = self.initial_step(&mut f, t, &y, &k1, span);
        let h_min = self.min_step_fraction * (t0.abs() + span);
        let mut steps = 0usize;
        let mut rejected_last = false;
        // Local error is O(h⁵); per unit step the target itself scales with h.
        let exponent = if self.unit_time.is_some() { -0.25 } else { -0.2 };

        while t < t_end {
            if steps >= self.max_steps {
                return Err(OdeError::MaxSteps { t, y });
            }
            steps += 1;
            let last = t + h >= t_end;
            if last {
                h = t_end - t;
            }

            let mut tmp = [0.0; N];
            for i in 0..N {
                tmp[i] = y[i] + h * A21 * k1[i];
            }
            let k2 = f(t + C2 * h, &tmp);
            for i in 0..N {
                tmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
            }
            let k3 = f(t + C3 * h, &tmp);
            for i in 0..N {
                tmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
            }
            let k4 = f(t + C4 * h, &tmp);
            for i in 0..N {
                tmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
            }
            let k5 = f(t + C5 * h, &tmp);
            for i in 0..N {
                tmp[i] = y[i]
                    + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
            }
            let k6 = f(t + h, &tmp);
            let mut y_new = [0.0; N];
            for i in 0..N {
                y_new[i] =
                    y[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]);
            }
            let k7 = f(t + h, &y_new);
            let mut err = [0.0; N];
            for i in 0..N {
                err[i] = h
                    * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            }
            let norm = self.weighted(h, &y, &y_new, &err);
            if !norm.is_finite() {
                if h <= h_min {
                    return Err(OdeError::NonFinite { t, y });
                }
                h *= 0.1;
                rejected_last = true;
                continue;
            }

            if norm <= 1.0 {
                t = if last { t_end } else { t + h };
                y = y_new;
                k1 = k7;
                observer(t, &y);
                let mut factor = if norm == 0.0 {
                    5.0
                } else {
                    (0.9 * norm.powf(exponent)).clamp(0.2, 5.0)
                };
                if rejected_last {
                    factor = factor.min(1.0);
                }
                rejected_last = false;
                h *= factor;
            } else {
                rejected_last = true;
                h *= (0.9 * norm.powf(exponent)).max(0.2);
                if h < h_min {
                    return Err(OdeError::StepUnderflow { t, y });
                }
            }
        }
        Ok((t, y))
    }
}
