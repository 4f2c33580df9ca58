//! Self-checks against closed-form results, shared by the CLI and the tests.

use std::f64::consts::PI;

use crate::dynamics::{evolve, OutputGrid};
use crate::error::Result;
use crate::frame::decoupling_residual;
use crate::hamiltonian::{
    build_conversion_hamiltonian, build_emission_hamiltonian, build_receive_hamiltonian, DissipationRates, LambdaSites,
};
use crate::integrate::IntegratorConfig;
use crate::pulse::{DressingKind, DressingProfile, MixingAngleProfile, PlacedPulses};
use crate::state::{AmplitudeState, Site};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Check {
    Oracle,
    Decoupling,
    AdiabaticLimit,
    All,
}

impl std::str::FromStr for Check {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "oracle" => Ok(Check::Oracle),
            "decoupling" => Ok(Check::Decoupling),
            "adiabatic-limit" => Ok(Check::AdiabaticLimit),
            "all" => Ok(Check::All),
            other => Err(format!("unknown check `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub name: &'static str,
    /// Measured quantity compared against `threshold`.
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl CheckReport {
    fn below(name: &'static str, value: f64, threshold: f64) -> Self {
        Self { name, value, threshold, passed: value < threshold }
    }

    fn above(name: &'static str, value: f64, threshold: f64) -> Self {
        Self { name, value, threshold, passed: value > threshold }
    }
}

impl std::fmt::Display for CheckReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} {}: {:e} (threshold {:e})", if self.passed { "PASS" } else { "FAIL" }, self.name, self.value, self.threshold)
    }
}

pub fn run_checks(check: Check) -> Result<Vec<CheckReport>> {
    let mut out = Vec::new();
    if matches!(check, Check::Oracle | Check::All) {
        out.extend(oracle_checks()?);
    }
    if matches!(check, Check::Decoupling | Check::All) {
        out.extend(decoupling_checks()?);
    }
    if matches!(check, Check::AdiabaticLimit | Check::All) {
        out.push(adiabatic_limit_check()?);
    }
    Ok(out)
}

/// Constant-coupling transfer, lossy-cavity decay and quarter-period conversion.
pub fn oracle_checks() -> Result<Vec<CheckReport>> {
    let cfg = IntegratorConfig::default();
    let lossless = DissipationRates::lossless();

    let g = 0.7;
    let rabi = build_conversion_hamiltonian(g, &lossless, Site::Cr)?;
    let tr = evolve(&AmplitudeState::excited(Site::W), &rabi, 0.0, PI / (2.0 * g), &cfg, &OutputGrid::endpoints())?;
    let rabi_err = (tr.last().expect("endpoint").population(Site::Cr) - 1.0).abs();

    let idle = DressingProfile::new(DressingKind::Bare, 0.0, 0.0, MixingAngleProfile::new(1.0)?)?;
    let g3 = 0.5;
    let lossy = build_emission_hamiltonian(PlacedPulses::new(idle, 0.0), g3, &lossless, LambdaSites::LOCAL_EMIT)?;
    let tr = evolve(&AmplitudeState::excited(Site::Cl), &lossy, 0.0, 4.0, &cfg, &OutputGrid::every(0.1))?;
    let decay_err = tr.samples.iter().map(|s| (s.population(Site::Cl) / (-2.0 * PI * g3 * g3 * s.t).exp() - 1.0).abs()).fold(0.0, f64::max);

    let half = build_conversion_hamiltonian(0.5, &lossless, Site::Cr)?;
    let tr = evolve(&AmplitudeState::excited(Site::W), &half, 0.0, PI / 2.0, &cfg, &OutputGrid::endpoints())?;
    let half_err = (tr.last().expect("endpoint").population(Site::Cr) - 0.5).abs();

    Ok(vec![
        CheckReport::below("rabi-transfer", rabi_err, 1e-8),
        CheckReport::below("lossy-cavity-decay", decay_err, 1e-6),
        CheckReport::below("conversion-quarter-period", half_err, 1e-8),
    ])
}

/// Largest dressed-frame leakage out of the dark state over 100 times per profile.
pub fn max_decoupling_residual(profile: &DressingProfile, samples: usize) -> f64 {
    let m = profile.mixing;
    (0..samples)
        .map(|k| {
            let t = m.t_start + m.duration() * k as f64 / (samples - 1).max(1) as f64;
            let (a, b) = decoupling_residual(profile, t);
            a.max(b)
        })
        .fold(0.0, f64::max)
}

pub fn decoupling_checks() -> Result<Vec<CheckReport>> {
    let mixing = MixingAngleProfile::new(2.62)?;
    let satd = DressingProfile::new(DressingKind::Satd, 1.0, 0.0, mixing)?;
    let kappa = DressingProfile::new(DressingKind::SatdKappa, 1.0, 0.5, mixing)?;
    Ok(vec![
        CheckReport::below("decoupling-satd", max_decoupling_residual(&satd, 100), 1e-9),
        CheckReport::below("decoupling-satd-kappa", max_decoupling_residual(&kappa, 100), 1e-9),
    ])
}

/// Fidelity of plain STIRAP on a closed Λ system at speed `v`.
pub fn stirap_fidelity(v: f64) -> Result<f64> {
    let profile = DressingProfile::new(DressingKind::Bare, 1.0, 0.0, MixingAngleProfile::new(v)?)?;
    let ham = build_receive_hamiltonian(PlacedPulses::new(profile, 0.0), &DissipationRates::lossless(), LambdaSites::REMOTE_RECEIVE);
    let m = profile.mixing;
    let cfg = IntegratorConfig::for_speed(v);
    let tr = evolve(&AmplitudeState::excited(Site::Cr), &ham, m.t_start, m.t_end, &cfg, &OutputGrid::endpoints())?;
    Ok(tr.last().expect("endpoint").population(Site::Ar))
}

pub fn adiabatic_limit_check() -> Result<CheckReport> {
    Ok(CheckReport::above("adiabatic-limit-stirap", stirap_fidelity(0.05)?, 0.999))
}
