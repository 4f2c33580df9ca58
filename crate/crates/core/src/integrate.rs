//! Explicit Runge–Kutta integration of `dy/dt = f(t, y)` over complex vectors.
//!
//! The adaptive Dormand–Prince 5(4) pair is the reference method; classic
//! fixed-step RK4 is kept as an independent cross-check.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Method {
    DormandPrince54,
    Rk4 { step: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub method: Method,
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self { method: Method::DormandPrince54, rtol: 1e-10, atol: 1e-12, max_step: 1e-2 }
    }
}

impl IntegratorConfig {
    /// Reference settings for a protocol running at speed `v`: max step 10⁻²/v.
    pub fn for_speed(v: f64) -> Self {
        Self { max_step: 1e-2 / v, ..Self::default() }
    }

    pub fn with_tolerances(mut self, rtol: f64, atol: f64) -> Self {
        self.rtol = rtol;
        self.atol = atol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive("rtol", self.rtol)?;
        ensure_positive("atol", self.atol)?;
        ensure_positive("max_step", self.max_step)?;
        if let Method::Rk4 { step } = self.method {
            ensure_positive("step", step)?;
        }
        Ok(())
    }
}

// Dormand–Prince tableau.
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
// b - b* (fifth minus fourth order weights)
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;

/// Integrates from `t0` through every time in `stops` (strictly increasing,
/// all > `t0`), landing exactly on each one and calling `observe(index, t, y)`
/// there. Returns the state at the last stop.
pub fn integrate<F, O>(
    mut rhs: F,
    t0: f64,
    y0: &[Complex64],
    stops: &[f64],
    cfg: &IntegratorConfig,
    mut observe: O,
) -> Result<Vec<Complex64>>
where
    F: FnMut(f64, &[Complex64], &mut [Complex64]),
    O: FnMut(usize, f64, &[Complex64]),
{
    cfg.validate()?;
    let mut prev = t0;
    for &s in stops {
        if !(s > prev) {
            return Err(Error::invalid("stops", format!("stop times must increase strictly from t0; {s} after {prev}")));
        }
        prev = s;
    }
    match cfg.method {
        Method::DormandPrince54 => dopri(&mut rhs, t0, y0, stops, cfg, &mut observe),
        Method::Rk4 { step } => rk4(&mut rhs, t0, y0, stops, step, &mut observe),
    }
}

fn axpy(out: &mut [Complex64], y: &[Complex64], h: f64, terms: &[(f64, &[Complex64])]) {
    for i in 0..out.len() {
        let mut acc = Complex64::new(0.0, 0.0);
        for &(a, k) in terms {
            acc += k[i] * a;
        }
        out[i] = y[i] + acc * h;
    }
}

fn rk4<F, O>(rhs: &mut F, t0: f64, y0: &[Complex64], stops: &[f64], step: f64, observe: &mut O) -> Result<Vec<Complex64>>
where
    F: FnMut(f64, &[Complex64], &mut [Complex64]),
    O: FnMut(usize, f64, &[Complex64]),
{
    let n = y0.len();
    let mut y = y0.to_vec();
    let zero = Complex64::new(0.0, 0.0);
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) = (vec![zero; n], vec![zero; n], vec![zero; n], vec![zero; n], vec![zero; n]);
    let mut t = t0;
    for (idx, &stop) in stops.iter().enumerate() {
        let span = stop - t;
        let steps = (span / step).ceil().max(1.0) as usize;
        let h = span / steps as f64;
        for i in 0..steps {
            let ts = t + i as f64 * h;
            rhs(ts, &y, &mut k1);
            axpy(&mut tmp, &y, 0.5 * h, &[(1.0, &k1)]);
            rhs(ts + 0.5 * h, &tmp, &mut k2);
            axpy(&mut tmp, &y, 0.5 * h, &[(1.0, &k2)]);
            rhs(ts + 0.5 * h, &tmp, &mut k3);
            axpy(&mut tmp, &y, h, &[(1.0, &k3)]);
            rhs(ts + h, &tmp, &mut k4);
            let y_old = y.clone();
            axpy(&mut y, &y_old, h / 6.0, &[(1.0, &k1), (2.0, &k2), (2.0, &k3), (1.0, &k4)]);
        }
        if y.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::IntegrationFailure { last_good_t: t, reason: "non-finite state".into() });
        }
        t = stop;
        observe(idx, t, &y);
    }
    Ok(y)
}

fn error_norm(err: &[Complex64], y: &[Complex64], y_new: &[Complex64], cfg: &IntegratorConfig) -> f64 {
    let n = err.len().max(1) as f64;
    let sum: f64 = err
        .iter()
        .zip(y.iter().zip(y_new))
        .map(|(e, (a, b))| {
            let scale = cfg.atol + cfg.rtol * a.norm().max(b.norm());
            (e.norm() / scale).powi(2)
        })
        .sum();
    (sum / n).sqrt()
}

fn dopri<F, O>(rhs: &mut F, t0: f64, y0: &[Complex64], stops: &[f64], cfg: &IntegratorConfig, observe: &mut O) -> Result<Vec<Complex64>>
where
    F: FnMut(f64, &[Complex64], &mut [Complex64]),
    O: FnMut(usize, f64, &[Complex64]),
{
    let n = y0.len();
    let zero = Complex64::new(0.0, 0.0);
    let mut y = y0.to_vec();
    let mut k = vec![vec![zero; n]; 7];
    let mut tmp = vec![zero; n];
    let mut y_new = vec![zero; n];
    let mut err = vec![zero; n];

    let mut t = t0;
    rhs(t, &y, &mut k[0]);
    let mut h = initial_step(&y, &k[0], cfg).min(cfg.max_step);

    for (idx, &stop) in stops.iter().enumerate() {
        while t < stop {
            let remaining = stop - t;
            let min_step = 1e-13 * t.abs().max(1.0);
            // Absorb slivers into the current step instead of taking a tiny one.
            let landing = h >= remaining || remaining - h < min_step;
            let h_try = if landing { remaining } else { h };
            if h_try < min_step && !landing {
                return Err(Error::IntegrationFailure { last_good_t: t, reason: format!("step size underflow (h = {h_try:e})") });
            }

            let (k1, rest) = k.split_at_mut(1);
            let k1 = &k1[0];
            let [k2, k3, k4, k5, k6, k7] = rest else { unreachable!() };
            axpy(&mut tmp, &y, h_try, &[(A21, k1)]);
            rhs(t + C2 * h_try, &tmp, k2);
            axpy(&mut tmp, &y, h_try, &[(A31, k1), (A32, k2)]);
            rhs(t + C3 * h_try, &tmp, k3);
            axpy(&mut tmp, &y, h_try, &[(A41, k1), (A42, k2), (A43, k3)]);
            rhs(t + C4 * h_try, &tmp, k4);
            axpy(&mut tmp, &y, h_try, &[(A51, k1), (A52, k2), (A53, k3), (A54, k4)]);
            rhs(t + C5 * h_try, &tmp, k5);
            axpy(&mut tmp, &y, h_try, &[(A61, k1), (A62, k2), (A63, k3), (A64, k4), (A65, k5)]);
            rhs(t + h_try, &tmp, k6);
            axpy(&mut y_new, &y, h_try, &[(B1, k1), (B3, k3), (B4, k4), (B5, k5), (B6, k6)]);
            rhs(t + h_try, &y_new, k7);
            for i in 0..n {
                err[i] = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7) * h_try;
            }
            let e = error_norm(&err, &y, &y_new, cfg);
            if !e.is_finite() {
                return Err(Error::IntegrationFailure { last_good_t: t, reason: "non-finite error estimate".into() });
            }

            let factor = if e == 0.0 { MAX_FACTOR } else { (SAFETY * e.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR) };
            if e <= 1.0 {
                t = if landing { stop } else { t + h_try };
                std::mem::swap(&mut y, &mut y_new);
                // FSAL: the last stage is the first stage of the next step.
                k.swap(0, 6);
                // Keep the pre-landing step size when a short landing step was forced.
                if !landing || h_try >= h {
                    h = h_try * factor;
                }
                h = h.min(cfg.max_step);
            } else {
                h = h_try * factor.min(1.0);
                if h < min_step {
                    return Err(Error::IntegrationFailure { last_good_t: t, reason: format!("step size underflow (h = {h:e})") });
                }
            }
        }
        observe(idx, t, &y);
    }
    Ok(y)
}

fn initial_step(y: &[Complex64], f: &[Complex64], cfg: &IntegratorConfig) -> f64 {
    let n = y.len().max(1) as f64;
    let scale = |s: &Complex64| cfg.atol + cfg.rtol * s.norm();
    let d0 = (y.iter().map(|v| (v.norm() / scale(v)).powi(2)).sum::<f64>() / n).sqrt();
    let d1 = (f.iter().zip(y).map(|(fv, yv)| (fv.norm() / scale(yv)).powi(2)).sum::<f64>() / n).sqrt();
    let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h.max(1e-10)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn exponential_decay_hits_every_stop() {
        let stops: Vec<f64> = (1..=10).map(|i| i as f64 * 0.5).collect();
        let mut seen = Vec::new();
        let y = integrate(
            |_, y, dy| dy[0] = -y[0],
            0.0,
            &[c(1.0)],
            &stops,
            &IntegratorConfig { max_step: 1.0, ..Default::default() },
            |i, t, y| seen.push((i, t, y[0].re)),
        )
        .unwrap();
        assert_eq!(seen.len(), 10);
        for (i, t, v) in seen {
            assert_eq!(t, stops[i]);
            assert_relative_eq!(v, (-t).exp(), max_relative = 1e-9);
        }
        assert_relative_eq!(y[0].re, (-5.0f64).exp(), max_relative = 1e-9);
    }

    #[test]
    fn rotation_is_accurate_for_both_methods() {
        let omega = 3.0;
        let rhs = |_: f64, y: &[Complex64], dy: &mut [Complex64]| dy[0] = Complex64::new(0.0, -omega) * y[0];
        for cfg in [IntegratorConfig::default(), IntegratorConfig { method: Method::Rk4 { step: 1e-3 }, ..Default::default() }] {
            let y = integrate(rhs, 0.0, &[c(1.0)], &[10.0], &cfg, |_, _, _| {}).unwrap();
            let exact = Complex64::new(0.0, -omega * 10.0).exp();
            assert!((y[0] - exact).norm() < 1e-9, "{cfg:?}: {}", (y[0] - exact).norm());
        }
    }

    #[test]
    fn rejects_non_increasing_stops() {
        let cfg = IntegratorConfig::default();
        let r = integrate(|_, _, _| {}, 1.0, &[c(1.0)], &[1.0], &cfg, |_, _, _| {});
        assert!(matches!(r, Err(Error::InvalidParameter { .. })));
        let r = integrate(|_, _, _| {}, 0.0, &[c(1.0)], &[2.0, 1.0], &cfg, |_, _, _| {});
        assert!(r.is_err());
    }

    #[test]
    fn blow_up_reports_last_good_time() {
        // y' = y² reaches infinity at t = 1.
        let cfg = IntegratorConfig { max_step: 0.1, ..Default::default() };
        let r = integrate(|_, y, dy| dy[0] = y[0] * y[0], 0.0, &[c(1.0)], &[2.0], &cfg, |_, _, _| {});
        match r {
            Err(Error::IntegrationFailure { last_good_t, .. }) => assert!(last_good_t > 0.9 && last_good_t < 1.0),
            other => panic!("expected failure, got {other:?}"),
        }
    }

    #[test]
    fn invalid_tolerances_rejected() {
        let cfg = IntegratorConfig { rtol: 0.0, ..Default::default() };
        assert!(integrate(|_, _, _| {}, 0.0, &[c(1.0)], &[1.0], &cfg, |_, _, _| {}).is_err());
    }
}
