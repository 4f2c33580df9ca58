//! Brute-force model of emission into a flat, finitely discretized waveguide.
//!
//! The continuum is replaced by `n_modes` equally spaced modes, each coupled to
//! the emitting cavity with strength G₃√δω, so the golden-rule decay rate is
//! 2πG₃². No Markovian elimination is made; the model is exactly Hermitian.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::dynamics::{evolve, OutputGrid};
use crate::error::{ensure_positive, Error, Result};
use crate::hamiltonian::{build_emission_hamiltonian, DissipationRates, LambdaSites};
use crate::integrate::{integrate, IntegratorConfig};
use crate::pulse::PlacedPulses;
use crate::state::{AmplitudeState, Site, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscretizedWaveguide {
    pub omega_max: f64,
    pub n_modes: usize,
    pub g3: f64,
}

impl DiscretizedWaveguide {
    pub fn new(omega_max: f64, n_modes: usize, g3: f64) -> Result<Self> {
        ensure_positive("omega_max", omega_max)?;
        if n_modes < 3 || n_modes.is_multiple_of(2) {
            return Err(Error::invalid("n_modes", format!("must be odd and >= 3, got {n_modes}")));
        }
        if !(g3.is_finite() && g3 >= 0.0) {
            return Err(Error::invalid("g3", format!("must be >= 0, got {g3}")));
        }
        Ok(Self { omega_max, n_modes, g3 })
    }

    pub fn spacing(&self) -> f64 {
        self.omega_max / (self.n_modes - 1) as f64
    }

    /// Mode frequencies on [−ω_max/2, ω_max/2], endpoints included.
    pub fn frequencies(&self) -> Vec<f64> {
        let dw = self.spacing();
        let half = (self.n_modes / 2) as f64;
        (0..self.n_modes).map(|k| (k as f64 - half) * dw).collect()
    }

    pub fn mode_coupling(&self) -> f64 {
        self.g3 * self.spacing().sqrt()
    }

    /// Golden-rule population decay rate 2π g_k² / δω.
    pub fn decay_rate(&self) -> f64 {
        2.0 * PI * self.mode_coupling().powi(2) / self.spacing()
    }

    /// Time after which the discrete spectrum rephases.
    pub fn recurrence_time(&self) -> f64 {
        2.0 * PI / self.spacing()
    }
}

#[derive(Debug, Clone)]
pub struct DiscretizedRun {
    /// Node populations plus `P_W = Σ|u_k|²` in the waveguide slot.
    pub trajectory: Trajectory,
    /// Set when the run outlasts the recurrence time; late samples are then unreliable.
    pub horizon_exceeded: bool,
}

/// Evolves the node-A Λ system coupled to every waveguide mode.
pub fn evolve_discretized(
    pulses: &PlacedPulses,
    wg: &DiscretizedWaveguide,
    initial: &AmplitudeState,
    t0: f64,
    t1: f64,
    cfg: &IntegratorConfig,
    grid: &OutputGrid,
) -> Result<DiscretizedRun> {
    if !(t1 > t0) {
        return Err(Error::invalid("t1", format!("end time {t1} must follow start {t0}")));
    }
    let omega = wg.frequencies();
    let g = wg.mode_coupling();
    let n = wg.n_modes;
    let mut y0 = vec![Complex64::new(0.0, 0.0); 3 + n];
    y0[0] = initial.amp(Site::Al);
    y0[1] = initial.amp(Site::Bl);
    y0[2] = initial.amp(Site::Cl);

    let outputs = grid.times(t0, t1);
    let mut stops = outputs.clone();
    let (w0, w1) = pulses.window();
    stops.extend([w0, w1].into_iter().filter(|b| *b > t0 && *b < t1));
    stops.sort_by(f64::total_cmp);
    stops.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));
    let record: Vec<bool> = stops.iter().map(|s| outputs.iter().any(|o| (o - s).abs() <= 1e-12 * s.abs().max(1.0))).collect();

    let minus_i = Complex64::new(0.0, -1.0);
    let rhs = |t: f64, y: &[Complex64], dy: &mut [Complex64]| {
        let (g1, g2) = pulses.couplings(t);
        let (nodes, modes) = y.split_at(3);
        let (d_nodes, d_modes) = dy.split_at_mut(3);
        let mut field = Complex64::new(0.0, 0.0);
        for ((d, u), w) in d_modes.iter_mut().zip(modes).zip(&omega) {
            field += *u;
            *d = minus_i * (*u * *w + nodes[2] * g);
        }
        d_nodes[0] = minus_i * nodes[1] * g1;
        d_nodes[1] = minus_i * (nodes[0] * g1 + nodes[2] * g2);
        d_nodes[2] = minus_i * (nodes[1] * g2 + field * g);
    };

    let snapshot = |t: f64, y: &[Complex64]| {
        let mut s = AmplitudeState::vacuum(t);
        s.amps[Site::Al.index()] = y[0];
        s.amps[Site::Bl.index()] = y[1];
        s.amps[Site::Cl.index()] = y[2];
        let p_w: f64 = y[3..].iter().map(|u| u.norm_sqr()).sum();
        s.amps[Site::W.index()] = Complex64::new(p_w.sqrt(), 0.0);
        s.emitted = p_w;
        s.emitted_damped = p_w;
        s
    };

    let mut samples = vec![snapshot(t0, &y0)];
    integrate(rhs, t0, &y0, &stops, cfg, |i, t, y| {
        if record[i] {
            samples.push(snapshot(t, y));
        }
    })?;
    Ok(DiscretizedRun { trajectory: Trajectory::new(samples), horizon_exceeded: t1 - t0 > wg.recurrence_time() })
}

/// Largest pointwise difference of P_Al, P_Bl, P_Cl and P_W between two runs.
pub fn markovian_deviation(effective: &Trajectory, discretized: &Trajectory) -> Result<f64> {
    if effective.len() != discretized.len() {
        return Err(Error::GridMismatch(format!("{} samples vs {}", effective.len(), discretized.len())));
    }
    let mut worst = 0.0f64;
    for (a, b) in effective.samples.iter().zip(&discretized.samples) {
        if (a.t - b.t).abs() > 1e-9 * a.t.abs().max(1.0) {
            return Err(Error::GridMismatch(format!("sample at t = {} vs t = {}", a.t, b.t)));
        }
        for site in [Site::Al, Site::Bl, Site::Cl, Site::W] {
            worst = worst.max((a.population(site) - b.population(site)).abs());
        }
    }
    Ok(worst)
}

/// Effective (eliminated-continuum) and discretized emission on a shared grid.
#[derive(Debug, Clone)]
pub struct EmissionComparison {
    pub effective: Trajectory,
    pub discretized: DiscretizedRun,
    pub deviation: f64,
}

/// Runs lossless emission from |A_l⟩ over `[t0, t1]` in both models.
pub fn compare_emission(
    pulses: &PlacedPulses,
    wg: &DiscretizedWaveguide,
    t0: f64,
    t1: f64,
    cfg: &IntegratorConfig,
    grid: &OutputGrid,
) -> Result<EmissionComparison> {
    let start = AmplitudeState::excited(Site::Al);
    let ham = build_emission_hamiltonian(*pulses, wg.g3, &DissipationRates::lossless(), LambdaSites::LOCAL_EMIT)?;
    let effective = evolve(&start, &ham, t0, t1, cfg, grid)?;
    let discretized = evolve_discretized(pulses, wg, &start, t0, t1, cfg, grid)?;
    let deviation = markovian_deviation(&effective, &discretized.trajectory)?;
    Ok(EmissionComparison { effective, discretized, deviation })
}
