//! Amplitude-level Schrödinger evolution of one protocol stage and the
//! fidelity measures built on top of it.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hamiltonian::{LeakageMode, SegmentHamiltonian};
use crate::integrate::{integrate, IntegratorConfig};
use crate::state::{AmplitudeState, Site, Trajectory};

/// Where evolution results are recorded: the start, every `dt`, and the end.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutputGrid {
    pub dt: Option<f64>,
}

impl OutputGrid {
    pub fn every(dt: f64) -> Self {
        Self { dt: Some(dt) }
    }

    pub fn endpoints() -> Self {
        Self { dt: None }
    }

    /// Sample times in (t0, t1], always ending at `t1`.
    pub fn times(&self, t0: f64, t1: f64) -> Vec<f64> {
        let mut out = Vec::new();
        if let Some(dt) = self.dt.filter(|d| *d > 0.0) {
            let n = ((t1 - t0) / dt).floor() as usize;
            for k in 1..=n {
                let t = t0 + k as f64 * dt;
                if t1 - t > 1e-9 * dt {
                    out.push(t);
                }
            }
        }
        out.push(t1);
        out
    }
}

/// Evolves `state` under `ham` from `t0` to `t1`.
///
/// Only the amplitudes of `ham.sites()` change. For an emission stage the
/// waveguide slot is rewritten as `sqrt(P_W)` at every sample, with `P_W`
/// starting from the incoming waveguide population and growing by the leaked
/// cavity population.
pub fn evolve(
    state: &AmplitudeState,
    ham: &SegmentHamiltonian,
    t0: f64,
    t1: f64,
    cfg: &IntegratorConfig,
    grid: &OutputGrid,
) -> Result<Trajectory> {
    if !(t1 >= t0) {
        return Err(Error::invalid("t1", format!("end time {t1} precedes start {t0}")));
    }
    let mut start = *state;
    start.t = t0;
    let leak = ham.leakage().copied();
    if leak.is_some() {
        start.emitted = 0.0;
        start.emitted_damped = 0.0;
    }
    if t1 == t0 {
        return Ok(Trajectory::new(vec![start]));
    }

    let sites: Vec<Site> = ham.sites().to_vec();
    let dim = sites.len();
    let p_w0 = start.population(Site::W);

    let mut y0: Vec<Complex64> = sites.iter().map(|s| start.amp(*s)).collect();
    if leak.is_some() {
        y0.push(Complex64::new(0.0, 0.0));
        y0.push(Complex64::new(0.0, 0.0));
    }

    let outputs = grid.times(t0, t1);
    let mut stops: Vec<f64> = outputs.clone();
    stops.extend(ham.breakpoints().into_iter().filter(|b| *b > t0 && *b < t1));
    stops.sort_by(f64::total_cmp);
    stops.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));
    let record: Vec<bool> = stops.iter().map(|s| outputs.iter().any(|o| (o - s).abs() <= 1e-12 * s.abs().max(1.0))).collect();

    let target = dim.saturating_sub(1);
    let rhs = |t: f64, y: &[Complex64], dy: &mut [Complex64]| {
        ham.apply(t, &y[..dim], &mut dy[..dim]);
        if let Some(l) = leak {
            let inflow = l.rate * y[target].norm_sqr();
            dy[dim] = Complex64::new(inflow, 0.0);
            dy[dim + 1] = Complex64::new(inflow - l.gamma3 * y[dim + 1].re, 0.0);
        }
    };

    let snapshot = |t: f64, y: &[Complex64]| {
        let mut s = start;
        s.t = t;
        for (k, site) in sites.iter().enumerate() {
            s.amps[site.index()] = y[k];
        }
        if let Some(l) = leak {
            let decay = (-l.gamma3 * (t - t0)).exp();
            s.emitted = y[dim].re;
            s.emitted_damped = y[dim + 1].re;
            let p_w = match l.mode {
                LeakageMode::Lumped => decay * (p_w0 + s.emitted),
                LeakageMode::Damped => decay * p_w0 + s.emitted_damped,
            };
            s.amps[Site::W.index()] = Complex64::new(p_w.max(0.0).sqrt(), 0.0);
        }
        s
    };

    let mut samples = Vec::with_capacity(outputs.len() + 1);
    samples.push(snapshot(t0, &y0));
    integrate(rhs, t0, &y0, &stops, cfg, |i, t, y| {
        if record[i] {
            samples.push(snapshot(t, y));
        }
    })?;
    Ok(Trajectory::new(samples))
}

/// Population delivered to the waveguide over an emission-stage trajectory.
pub fn emission_fidelity(trajectory: &Trajectory, gamma3: f64, mode: LeakageMode) -> f64 {
    let (Some(first), Some(last)) = (trajectory.first(), trajectory.last()) else {
        return 0.0;
    };
    match mode {
        LeakageMode::Lumped => (-gamma3 * (last.t - first.t)).exp() * last.emitted,
        LeakageMode::Damped => last.emitted_damped,
    }
}

/// Population of the node-B superconducting resonator.
pub fn final_fidelity(state: &AmplitudeState) -> f64 {
    state.population(Site::Ar)
}
