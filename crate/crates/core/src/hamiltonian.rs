//! Stage generators: effective non-Hermitian emission, waveguide–cavity
//! conversion, and the closed receiving Λ system.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_non_negative, ensure_positive, Result};
use crate::pulse::PlacedPulses;
use crate::state::{Device, Site};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stage {
    Emission,
    Conversion,
    Receive,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Emission => "emission",
            Stage::Conversion => "conversion",
            Stage::Receive => "receive",
        }
    }
}

/// Population decay rates of the resonator, the mechanical mode and the waveguide.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DissipationRates {
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
}

impl DissipationRates {
    pub fn new(gamma1: f64, gamma2: f64, gamma3: f64) -> Result<Self> {
        ensure_non_negative("gamma1", gamma1)?;
        ensure_non_negative("gamma2", gamma2)?;
        ensure_non_negative("gamma3", gamma3)?;
        Ok(Self { gamma1, gamma2, gamma3 })
    }

    pub const fn lossless() -> Self {
        Self { gamma1: 0.0, gamma2: 0.0, gamma3: 0.0 }
    }

    /// γ₁ = 10⁻³, γ₂ = 10⁻⁴, γ₃ = 10⁻³ (units of g₀).
    pub const fn reference() -> Self {
        Self { gamma1: 1e-3, gamma2: 1e-4, gamma3: 1e-3 }
    }

    pub fn is_lossless(&self) -> bool {
        self.gamma1 == 0.0 && self.gamma2 == 0.0 && self.gamma3 == 0.0
    }

    /// Amplitude decay rate (γ/2) of a site. Cavities do not decay.
    pub fn amplitude_decay(&self, site: Site) -> f64 {
        match site.device() {
            Device::Resonator => 0.5 * self.gamma1,
            Device::Mechanical => 0.5 * self.gamma2,
            Device::Cavity => 0.0,
            Device::Waveguide => 0.5 * self.gamma3,
        }
    }
}

/// How the waveguide population is reported during emission in the presence of γ₃.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LeakageMode {
    /// The whole leaked population is multiplied by e^{-γ₃ T}, T measured from stage start.
    Lumped,
    /// Each emitted increment decays from its own emission time.
    Damped,
}

/// A Λ system: `first` pulse couples source–mid, `second` couples target–mid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LambdaSites {
    pub source: Site,
    pub mid: Site,
    pub target: Site,
}

impl LambdaSites {
    pub const LOCAL_EMIT: Self = Self { source: Site::Al, mid: Site::Bl, target: Site::Cl };
    pub const REMOTE_RECEIVE: Self = Self { source: Site::Cr, mid: Site::Br, target: Site::Ar };
    pub const REMOTE_EMIT: Self = Self { source: Site::Ar, mid: Site::Br, target: Site::Cr };
    pub const LOCAL_RECEIVE: Self = Self { source: Site::Cl, mid: Site::Bl, target: Site::Al };

    pub fn sites(&self) -> [Site; 3] {
        [self.source, self.mid, self.target]
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Coupling {
    Lambda(PlacedPulses),
    Exchange(f64),
}

/// Continuum leakage attached to the emission stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Leakage {
    /// κ = 2πG₃²
    pub rate: f64,
    pub gamma3: f64,
    pub mode: LeakageMode,
}

/// Time-dependent generator for one protocol stage, acting on `sites`.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentHamiltonian {
    pub stage: Stage,
    sites: Vec<Site>,
    coupling: Coupling,
    decay: Vec<f64>,
    leakage: Option<Leakage>,
}

impl SegmentHamiltonian {
    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn dim(&self) -> usize {
        self.sites.len()
    }

    /// Amplitude decay rates; the anti-Hermitian part is `-i diag(decay)`.
    pub fn decay_diagonal(&self) -> &[f64] {
        &self.decay
    }

    pub fn leakage(&self) -> Option<&Leakage> {
        self.leakage.as_ref()
    }

    pub fn with_leakage_mode(mut self, mode: LeakageMode) -> Self {
        if let Some(l) = self.leakage.as_mut() {
            l.mode = mode;
        }
        self
    }

    /// Times at which the couplings switch discontinuously.
    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.coupling {
            Coupling::Lambda(p) => {
                let (a, b) = p.window();
                vec![a, b]
            }
            Coupling::Exchange(_) => Vec::new(),
        }
    }

    /// Off-diagonal couplings as (row, col, value) over local indices, upper triangle.
    fn couplings(&self, t: f64) -> [(usize, usize, f64); 2] {
        match &self.coupling {
            Coupling::Lambda(p) => {
                let (g1, g2) = p.couplings(t);
                [(0, 1, g1), (1, 2, g2)]
            }
            Coupling::Exchange(g) => [(0, 1, *g), (0, 1, 0.0)],
        }
    }

    pub fn hermitian_part(&self, t: f64) -> DMatrix<Complex64> {
        let n = self.dim();
        let mut h = DMatrix::zeros(n, n);
        for (i, j, g) in self.couplings(t) {
            h[(i, j)] += Complex64::new(g, 0.0);
            h[(j, i)] += Complex64::new(g, 0.0);
        }
        h
    }

    pub fn matrix(&self, t: f64) -> DMatrix<Complex64> {
        let mut h = self.hermitian_part(t);
        for (i, d) in self.decay.iter().enumerate() {
            h[(i, i)] -= Complex64::new(0.0, *d);
        }
        h
    }

    /// Writes `-i H(t) u` into `du`; both slices have length `dim()`.
    pub fn apply(&self, t: f64, u: &[Complex64], du: &mut [Complex64]) {
        for (i, d) in self.decay.iter().enumerate() {
            // -i (-i d) u = -d u
            du[i] = -u[i] * *d;
        }
        let minus_i = Complex64::new(0.0, -1.0);
        for (i, j, g) in self.couplings(t) {
            if g != 0.0 {
                du[i] += minus_i * g * u[j];
                du[j] += minus_i * g * u[i];
            }
        }
    }
}

/// Effective emission generator on (source, mid, target) with the target
/// cavity decaying into the waveguide at amplitude rate πG₃².
pub fn build_emission_hamiltonian(
    pulses: PlacedPulses,
    g3: f64,
    rates: &DissipationRates,
    sites: LambdaSites,
) -> Result<SegmentHamiltonian> {
    ensure_non_negative("g3", g3)?;
    let kappa = 2.0 * PI * g3 * g3;
    let mut decay: Vec<f64> = sites.sites().iter().map(|s| rates.amplitude_decay(*s)).collect();
    decay[2] += 0.5 * kappa;
    Ok(SegmentHamiltonian {
        stage: Stage::Emission,
        sites: sites.sites().to_vec(),
        coupling: Coupling::Lambda(pulses),
        decay,
        leakage: Some(Leakage { rate: kappa, gamma3: rates.gamma3, mode: LeakageMode::Lumped }),
    })
}

/// Two-mode exchange between the waveguide excitation and a cavity.
pub fn build_conversion_hamiltonian(g3: f64, rates: &DissipationRates, cavity: Site) -> Result<SegmentHamiltonian> {
    ensure_positive("g3r", g3)?;
    Ok(SegmentHamiltonian {
        stage: Stage::Conversion,
        sites: vec![Site::W, cavity],
        coupling: Coupling::Exchange(g3),
        decay: vec![rates.amplitude_decay(Site::W), 0.0],
        leakage: None,
    })
}

/// Closed Λ system (source cavity → target resonator) driven by the receiving pulses.
pub fn build_receive_hamiltonian(pulses: PlacedPulses, rates: &DissipationRates, sites: LambdaSites) -> SegmentHamiltonian {
    SegmentHamiltonian {
        stage: Stage::Receive,
        sites: sites.sites().to_vec(),
        coupling: Coupling::Lambda(pulses),
        decay: sites.sites().iter().map(|s| rates.amplitude_decay(*s)).collect(),
        leakage: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pulse::{DressingKind, DressingProfile, MixingAngleProfile};

    fn pulses(kind: DressingKind, g3: f64) -> PlacedPulses {
        let p = DressingProfile::new(kind, 1.0, g3, MixingAngleProfile::new(2.62).unwrap()).unwrap();
        PlacedPulses::new(p, 0.0)
    }

    #[test]
    fn emission_structure() {
        let h =
            build_emission_hamiltonian(pulses(DressingKind::SatdKappa, 0.5), 0.5, &DissipationRates::reference(), LambdaSites::LOCAL_EMIT)
                .unwrap();
        let (g1, g2) = pulses(DressingKind::SatdKappa, 0.5).couplings(0.3);
        let m = h.matrix(0.3);
        assert_eq!(m[(0, 1)].re, g1);
        assert_eq!(m[(1, 2)].re, g2);
        assert_eq!(m[(0, 2)], Complex64::new(0.0, 0.0));
        assert_eq!(m[(0, 0)], Complex64::new(0.0, -0.5e-3));
        assert_eq!(m[(1, 1)], Complex64::new(0.0, -0.5e-4));
        assert!((m[(2, 2)].im + PI * 0.25).abs() < 1e-15);
        assert_eq!(h.leakage().unwrap().rate, 2.0 * PI * 0.25);
    }

    #[test]
    fn hermitian_and_decay_parts() {
        let h = build_receive_hamiltonian(pulses(DressingKind::Satd, 0.0), &DissipationRates::reference(), LambdaSites::REMOTE_RECEIVE);
        for i in 0..50 {
            let t = -2.8 + i as f64 * 0.11;
            let herm = h.hermitian_part(t);
            assert!((&herm - herm.adjoint()).norm() < 1e-14);
            let anti = h.matrix(t) - &herm;
            for r in 0..3 {
                for c in 0..3 {
                    if r == c {
                        assert!(anti[(r, c)].im <= 0.0 && anti[(r, c)].re == 0.0);
                    } else {
                        assert_eq!(anti[(r, c)], Complex64::new(0.0, 0.0));
                    }
                }
            }
        }
        // SR of node B is the target here, so γ₁ sits on the last index.
        assert_eq!(h.decay_diagonal(), &[0.0, 0.5e-4, 0.5e-3]);
    }

    #[test]
    fn zero_couplings_give_zero_generator() {
        let mut p = pulses(DressingKind::Satd, 0.0);
        p.profile.g0 = 0.0;
        let h = build_emission_hamiltonian(p, 0.0, &DissipationRates::lossless(), LambdaSites::LOCAL_EMIT).unwrap();
        assert_eq!(h.matrix(0.1), DMatrix::zeros(3, 3));
    }

    #[test]
    fn apply_matches_matrix() {
        let h =
            build_emission_hamiltonian(pulses(DressingKind::SatdKappa, 0.5), 0.5, &DissipationRates::reference(), LambdaSites::LOCAL_EMIT)
                .unwrap();
        let u = [Complex64::new(0.3, 0.1), Complex64::new(-0.2, 0.5), Complex64::new(0.7, -0.4)];
        let mut du = [Complex64::new(0.0, 0.0); 3];
        h.apply(0.4, &u, &mut du);
        let expected = h.matrix(0.4) * nalgebra::DVector::from_column_slice(&u) * Complex64::new(0.0, -1.0);
        for i in 0..3 {
            assert!((du[i] - expected[i]).norm() < 1e-15);
        }
    }

    #[test]
    fn conversion_requires_positive_coupling() {
        assert!(build_conversion_hamiltonian(0.0, &DissipationRates::lossless(), Site::Cr).is_err());
        assert!(build_conversion_hamiltonian(-0.5, &DissipationRates::lossless(), Site::Cr).is_err());
        let h = build_conversion_hamiltonian(0.5, &DissipationRates::reference(), Site::Cr).unwrap();
        let m = h.matrix(0.0);
        assert_eq!(m[(0, 1)], Complex64::new(0.5, 0.0));
        assert_eq!(m[(0, 0)], Complex64::new(0.0, -0.5e-3));
        assert_eq!(m[(1, 1)], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn rates_reject_negative() {
        assert!(DissipationRates::new(-1e-3, 0.0, 0.0).is_err());
        assert!(DissipationRates::new(0.0, 0.0, f64::NAN).is_err());
    }
}
