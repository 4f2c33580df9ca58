//! Closed-form control waveforms.
//!
//! Every waveform is a pure function of time so that adaptive integrators can
//! evaluate it off-grid. Units: rates in g₀, times in 1/g₀.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{ensure_non_negative, ensure_positive, Error, Result};

/// Half-width of the truncated pulse window in units of 1/v.
pub const TRUNCATION_EXTENT: f64 = 7.5;

/// Default bound on |μ| at the window edges, in radians.
pub const DEFAULT_BOUNDARY_TOLERANCE: f64 = 2e-3;

/// Symmetric truncation window `(-7.5/v, 7.5/v)`.
pub fn truncation_window(speed: f64) -> Result<(f64, f64)> {
    ensure_positive("v", speed)?;
    let half = TRUNCATION_EXTENT / speed;
    Ok((-half, half))
}

/// Logistic function and the product σ(1-σ), both evaluated without overflow.
fn logistic(x: f64) -> (f64, f64) {
    let e = (-x.abs()).exp();
    let d = 1.0 + e;
    let sigma = if x >= 0.0 { 1.0 / d } else { e / d };
    (sigma, e / (d * d))
}

/// Sigmoidal mixing angle θ(t) = π / (2(1 + e^{-vt})) on a finite window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixingAngleProfile {
    pub speed: f64,
    pub t_start: f64,
    pub t_end: f64,
}

impl MixingAngleProfile {
    /// Profile with the standard symmetric truncation window.
    pub fn new(speed: f64) -> Result<Self> {
        let (t_start, t_end) = truncation_window(speed)?;
        Ok(Self { speed, t_start, t_end })
    }

    pub fn with_window(speed: f64, t_start: f64, t_end: f64) -> Result<Self> {
        ensure_positive("v", speed)?;
        if !(t_start.is_finite() && t_end.is_finite() && t_start < t_end) {
            return Err(Error::invalid("window", format!("need t_start < t_end, got ({t_start}, {t_end})")));
        }
        Ok(Self { speed, t_start, t_end })
    }

    pub fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.t_start && t <= self.t_end
    }

    pub fn angle(&self, t: f64) -> f64 {
        FRAC_PI_2 * logistic(self.speed * t).0
    }

    pub fn rate(&self, t: f64) -> f64 {
        FRAC_PI_2 * self.speed * logistic(self.speed * t).1
    }

    /// Second time derivative of θ.
    pub fn acceleration(&self, t: f64) -> f64 {
        let x = self.speed * t;
        let (_, s) = logistic(x);
        // 1 - 2σ(x) = -tanh(x/2)
        -FRAC_PI_2 * self.speed * self.speed * s * (0.5 * x).tanh()
    }
}

pub fn mixing_angle(profile: &MixingAngleProfile, t: f64) -> f64 {
    profile.angle(t)
}

pub fn mixing_angle_rate(profile: &MixingAngleProfile, t: f64) -> f64 {
    profile.rate(t)
}

/// Which correction is applied on top of the bare pulses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DressingKind {
    /// Uncorrected pulses, μ ≡ 0 (plain STIRAP).
    Bare,
    /// Superadiabatic transitionless driving on a closed Λ system.
    Satd,
    /// SATD with the target level decaying into a flat continuum at κ = 2πG₃².
    SatdKappa,
}

/// Dressing strength μ(t) and the corrected couplings derived from it.
///
/// With g₀ = 0 every waveform is identically zero; this is the switched-off
/// degenerate case used for identity checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DressingProfile {
    pub kind: DressingKind,
    pub g0: f64,
    pub g3: f64,
    pub mixing: MixingAngleProfile,
    pub boundary_tolerance: f64,
}

/// All waveform quantities at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseSample {
    pub t: f64,
    pub theta: f64,
    pub theta_rate: f64,
    pub mu: f64,
    pub mu_rate: f64,
    pub gx: f64,
    pub gz: f64,
    pub g1: f64,
    pub g2: f64,
}

impl DressingProfile {
    pub fn new(kind: DressingKind, g0: f64, g3: f64, mixing: MixingAngleProfile) -> Result<Self> {
        ensure_non_negative("g0", g0)?;
        ensure_non_negative("g3", g3)?;
        Ok(Self { kind, g0, g3, mixing, boundary_tolerance: DEFAULT_BOUNDARY_TOLERANCE })
    }

    pub fn with_boundary_tolerance(mut self, tol: f64) -> Self {
        self.boundary_tolerance = tol;
        self
    }

    /// Quarter of the continuum decay rate, κ/4 = 2πG₃²/4; zero unless SATD+κ.
    fn kappa_quarter(&self) -> f64 {
        match self.kind {
            DressingKind::SatdKappa => 0.5 * PI * self.g3 * self.g3,
            _ => 0.0,
        }
    }

    fn dressed(&self) -> bool {
        self.kind != DressingKind::Bare && self.g0 > 0.0
    }

    /// θ̇ + (κ/4) sin 2θ and its time derivative.
    fn numerator(&self, t: f64) -> (f64, f64) {
        let theta = self.mixing.angle(t);
        let rate = self.mixing.rate(t);
        let c = self.kappa_quarter();
        let (s2, c2) = (2.0 * theta).sin_cos();
        let f = rate + c * s2;
        let df = self.mixing.acceleration(t) + 2.0 * c * c2 * rate;
        (f, df)
    }

    pub fn dressing_strength(&self, t: f64) -> f64 {
        if !self.dressed() {
            return 0.0;
        }
        (self.numerator(t).0 / self.g0).atan()
    }

    /// Analytic μ̇ = g₀ ḟ / (g₀² + f²).
    pub fn dressing_rate(&self, t: f64) -> f64 {
        if !self.dressed() {
            return 0.0;
        }
        let (f, df) = self.numerator(t);
        self.g0 * df / (self.g0 * self.g0 + f * f)
    }

    pub fn sample(&self, t: f64) -> PulseSample {
        let theta = self.mixing.angle(t);
        let theta_rate = self.mixing.rate(t);
        let (sin, cos) = theta.sin_cos();
        if self.g0 == 0.0 {
            return PulseSample { t, theta, theta_rate, mu: 0.0, mu_rate: 0.0, gx: 0.0, gz: 0.0, g1: 0.0, g2: 0.0 };
        }
        let (mu, mu_rate, gx, gz) = if self.dressed() {
            let mu = self.dressing_strength(t);
            let mu_rate = self.dressing_rate(t);
            let c = self.kappa_quarter();
            let gx = -mu_rate + c * sin * sin * (2.0 * mu).sin();
            // The choice of μ makes this vanish up to rounding.
            let gz = (theta_rate + c * (2.0 * theta).sin()) / mu.tan() - self.g0;
            (mu, mu_rate, gx, gz)
        } else {
            (0.0, 0.0, 0.0, 0.0)
        };
        // gz is zero by construction, so it does not enter the couplings.
        let g1 = self.g0 * sin - gx * cos;
        let g2 = self.g0 * cos + gx * sin;
        PulseSample { t, theta, theta_rate, mu, mu_rate, gx, gz, g1, g2 }
    }

    /// Corrected coupling pair (G₁c, G₂c) at pulse-local time `t`.
    pub fn corrected_pulses(&self, t: f64) -> (f64, f64) {
        let s = self.sample(t);
        (s.g1, s.g2)
    }

    /// |μ| at both window edges.
    pub fn boundary_values(&self) -> (f64, f64) {
        (self.dressing_strength(self.mixing.t_start).abs(), self.dressing_strength(self.mixing.t_end).abs())
    }

    pub fn boundary_ok(&self) -> bool {
        let (a, b) = self.boundary_values();
        a < self.boundary_tolerance && b < self.boundary_tolerance
    }
}

pub fn dressing_strength(profile: &DressingProfile, t: f64) -> f64 {
    profile.dressing_strength(t)
}

pub fn corrected_pulses(profile: &DressingProfile, t: f64) -> (f64, f64) {
    profile.corrected_pulses(t)
}

/// A dressing profile placed on the absolute time axis.
///
/// Pulse-local time is `t - origin`; outside the truncation window both
/// couplings are zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlacedPulses {
    pub profile: DressingProfile,
    pub origin: f64,
}

impl PlacedPulses {
    pub fn new(profile: DressingProfile, origin: f64) -> Self {
        Self { profile, origin }
    }

    /// Places the profile so that its window starts at absolute time `start`.
    pub fn starting_at(profile: DressingProfile, start: f64) -> Self {
        Self { profile, origin: start - profile.mixing.t_start }
    }

    pub fn window(&self) -> (f64, f64) {
        (self.origin + self.profile.mixing.t_start, self.origin + self.profile.mixing.t_end)
    }

    pub fn couplings(&self, t: f64) -> (f64, f64) {
        let local = t - self.origin;
        if self.profile.mixing.contains(local) {
            self.profile.corrected_pulses(local)
        } else {
            (0.0, 0.0)
        }
    }

    pub fn sample(&self, t: f64) -> Option<PulseSample> {
        let local = t - self.origin;
        self.profile.mixing.contains(local).then(|| {
            let mut s = self.profile.sample(local);
            s.t = t;
            s
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn profile(kind: DressingKind, v: f64, g3: f64) -> DressingProfile {
        DressingProfile::new(kind, 1.0, g3, MixingAngleProfile::new(v).unwrap()).unwrap()
    }

    #[test]
    fn mixing_angle_reference_points() {
        let p = MixingAngleProfile::new(2.62).unwrap();
        assert_eq!(p.angle(0.0), PI / 4.0);
        // π / (2(1 + e^{7.5})) evaluated with mpmath at 30 digits
        assert_relative_eq!(p.angle(-7.5 / 2.62), 8.683026524102799e-4, max_relative = 1e-12);
        assert_relative_eq!(p.angle(1e6), FRAC_PI_2);
        assert_eq!(p.rate(1e6), 0.0);
        assert_eq!(p.rate(-1e6), 0.0);
    }

    #[test]
    fn mixing_rate_reference_points() {
        let p = MixingAngleProfile::new(2.62).unwrap();
        assert_relative_eq!(p.rate(0.0), PI * 2.62 / 8.0, max_relative = 1e-15);
        assert_relative_eq!(p.rate(0.0), 1.028871594, max_relative = 1e-9);
        let p1 = MixingAngleProfile::new(1.0).unwrap();
        assert_relative_eq!(p1.rate(0.0), std::f64::consts::FRAC_PI_8, max_relative = 1e-12);
    }

    #[test]
    fn truncation_windows() {
        let (a, b) = truncation_window(2.62).unwrap();
        assert_relative_eq!(b, 2.862595419847, max_relative = 1e-12);
        assert_eq!(a, -b);
        assert_eq!(truncation_window(1.0).unwrap(), (-7.5, 7.5));
        assert_eq!(truncation_window(0.5).unwrap(), (-15.0, 15.0));
        assert!(matches!(truncation_window(0.0), Err(Error::InvalidParameter { .. })));
        assert!(truncation_window(-1.0).is_err());
    }

    #[test]
    fn dressing_strength_at_origin() {
        let satd = profile(DressingKind::Satd, 2.62, 0.5);
        assert_relative_eq!(satd.dressing_strength(0.0), (PI * 2.62 / 8.0).atan(), max_relative = 1e-14);
        assert_relative_eq!(satd.dressing_strength(0.0), 0.799627573236, epsilon = 1e-11);
        let kappa = profile(DressingKind::SatdKappa, 2.62, 0.5);
        let expected = (PI * 2.62 / 8.0 + PI / 8.0).atan();
        assert_relative_eq!(kappa.dressing_strength(0.0), expected, max_relative = 1e-14);
        let bare = profile(DressingKind::Bare, 2.62, 0.5);
        assert_eq!(bare.dressing_strength(0.0), 0.0);
    }

    #[test]
    fn gz_vanishes() {
        for kind in [DressingKind::Satd, DressingKind::SatdKappa] {
            let p = profile(kind, 2.62, 0.5);
            for i in 0..=40 {
                let t = p.mixing.t_start + p.mixing.duration() * i as f64 / 40.0;
                let s = p.sample(t);
                assert!(s.gz.abs() <= 1e-12 * p.g0, "gz = {} at t = {t}", s.gz);
            }
        }
    }

    #[test]
    fn bare_pulses_are_uncorrected() {
        let p = profile(DressingKind::Bare, 1.0, 0.0);
        for t in [-3.0, 0.0, 2.0] {
            let th = p.mixing.angle(t);
            assert_eq!(p.corrected_pulses(t), (th.sin(), th.cos()));
        }
    }

    #[test]
    fn corrections_vanish_in_slow_limit() {
        let sup = |v: f64| {
            let p = profile(DressingKind::Satd, v, 0.0);
            (0..=200)
                .map(|i| {
                    let t = p.mixing.t_start + p.mixing.duration() * i as f64 / 200.0;
                    (p.corrected_pulses(t).0 - p.mixing.angle(t).sin()).abs()
                })
                .fold(0.0, f64::max)
        };
        let (a, b, c) = (sup(1.0), sup(0.1), sup(0.01));
        assert!(b < a && c < b);
        assert!(c < 1e-3);
    }

    #[test]
    fn mirror_symmetry_without_kappa() {
        let p = profile(DressingKind::SatdKappa, 2.62, 0.0);
        for t in [0.1, 0.7, 1.5, 2.8] {
            let (g1, _) = p.corrected_pulses(t);
            let (_, g2) = p.corrected_pulses(-t);
            assert_relative_eq!(g1, g2, max_relative = 1e-12);
        }
    }

    #[test]
    fn boundary_values_scale_with_speed() {
        // |μ| at the edges is ≈ θ̇(t_i) ≈ (π/2) v e^{-7.5}, so the default
        // tolerance holds only up to v ≈ 2.3 for SATD.
        assert!(profile(DressingKind::Satd, 1.0, 0.0).boundary_ok());
        assert!(profile(DressingKind::SatdKappa, 1.0, 0.5).boundary_ok());
        let fast = profile(DressingKind::SatdKappa, 2.62, 0.5);
        assert!(!fast.boundary_ok());
        assert!(fast.with_boundary_tolerance(3e-3).boundary_ok());
    }

    #[test]
    fn zero_g0_switches_everything_off() {
        let p = profile(DressingKind::SatdKappa, 2.62, 0.5);
        let off = DressingProfile { g0: 0.0, ..p };
        assert_eq!(off.corrected_pulses(0.3), (0.0, 0.0));
        assert_eq!(off.dressing_strength(0.3), 0.0);
    }

    #[test]
    fn placed_pulses_are_zero_outside_window() {
        let p = profile(DressingKind::Satd, 2.62, 0.0);
        let placed = PlacedPulses::starting_at(p, 10.0);
        let (a, b) = placed.window();
        assert_relative_eq!(a, 10.0);
        assert_relative_eq!(b, 10.0 + 15.0 / 2.62, max_relative = 1e-14);
        assert_eq!(placed.couplings(9.99), (0.0, 0.0));
        assert_eq!(placed.couplings(b + 1e-9), (0.0, 0.0));
        let (g1, g2) = placed.couplings(a + 1.0);
        let (e1, e2) = p.corrected_pulses(p.mixing.t_start + 1.0);
        assert_relative_eq!(g1, e1, max_relative = 1e-12);
        assert_relative_eq!(g2, e2, max_relative = 1e-12);
    }

    proptest! {
        #[test]
        fn theta_bounds_and_reflection(v in 0.1f64..10.0, x in -7.5f64..7.5) {
            let p = MixingAngleProfile::new(v).unwrap();
            let t = x / v;
            let th = p.angle(t);
            prop_assert!(th > 0.0 && th < FRAC_PI_2);
            prop_assert!((p.angle(-t) + th - FRAC_PI_2).abs() < 1e-14);
            prop_assert!(p.angle(t + 1e-3 / v) > th);
        }

        #[test]
        fn analytic_rates_match_finite_differences(v in 0.1f64..10.0, x in -7.0f64..7.0, g3 in 0.0f64..1.0) {
            let p = profile(DressingKind::SatdKappa, v, g3);
            let t = x / v;
            let h = 1e-6 / v;
            let fd_theta = (p.mixing.angle(t + h) - p.mixing.angle(t - h)) / (2.0 * h);
            let fd_rate = (p.mixing.rate(t + h) - p.mixing.rate(t - h)) / (2.0 * h);
            let fd_mu = (p.dressing_strength(t + h) - p.dressing_strength(t - h)) / (2.0 * h);
            let scale = |a: f64| a.abs().max(1e-3 * v);
            prop_assert!((fd_theta - p.mixing.rate(t)).abs() <= 1e-6 * scale(fd_theta));
            prop_assert!((fd_rate - p.mixing.acceleration(t)).abs() <= 1e-6 * scale(fd_rate) * v);
            prop_assert!((fd_mu - p.dressing_rate(t)).abs() <= 1e-6 * scale(fd_mu) * v);
        }
    }
}
