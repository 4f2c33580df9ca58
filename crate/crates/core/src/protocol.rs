//! Three-stage transfer protocol: dressed emission into the waveguide,
//! waveguide-to-cavity conversion, and dressed (or plain STIRAP) absorption.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::dynamics::{emission_fidelity, evolve, OutputGrid};
use crate::error::{ensure_non_negative, ensure_positive, Error, Result};
use crate::fmt::sig;
use crate::hamiltonian::{
    build_conversion_hamiltonian, build_emission_hamiltonian, build_receive_hamiltonian, DissipationRates, LambdaSites, LeakageMode,
    SegmentHamiltonian, Stage,
};
use crate::integrate::IntegratorConfig;
use crate::pulse::{DressingKind, DressingProfile, MixingAngleProfile, PlacedPulses, TRUNCATION_EXTENT};
use crate::state::{AmplitudeState, Site, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ReceiveKind {
    Satd,
    Stirap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    Forward,
    Reverse,
}

/// Length of the emission stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EmissionDuration {
    /// t_l = 30/v
    ThirtyOverV,
    /// t_l = 15/v + 8π/G₃²
    PulsePlusLeak,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub v_l: f64,
    pub v_r: f64,
    pub g0: f64,
    pub g3l: f64,
    pub g3r: f64,
    pub rates: DissipationRates,
    pub receive_kind: ReceiveKind,
    pub direction: Direction,
    pub emission_duration: EmissionDuration,
    pub leakage_mode: LeakageMode,
    pub rtol: f64,
    pub atol: f64,
    /// Spacing of the recorded trajectory samples.
    pub sample_dt: f64,
}

impl Default for ProtocolConfig {
    /// Lossless double-STA transfer at v = 2.62 g₀, |G₃| = 0.5 g₀.
    fn default() -> Self {
        Self {
            v_l: 2.62,
            v_r: 2.62,
            g0: 1.0,
            g3l: 0.5,
            g3r: 0.5,
            rates: DissipationRates::lossless(),
            receive_kind: ReceiveKind::Satd,
            direction: Direction::Forward,
            emission_duration: EmissionDuration::ThirtyOverV,
            leakage_mode: LeakageMode::Lumped,
            rtol: 1e-10,
            atol: 1e-12,
            sample_dt: 0.01,
        }
    }
}

impl ProtocolConfig {
    /// Plain STIRAP on the receiving node at v_r = g₀.
    pub fn sta_stirap() -> Self {
        Self { v_r: 1.0, receive_kind: ReceiveKind::Stirap, ..Self::default() }
    }

    pub fn dissipative(mut self) -> Self {
        self.rates = DissipationRates::reference();
        self
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive("v_l", self.v_l)?;
        ensure_positive("v_r", self.v_r)?;
        ensure_non_negative("g0", self.g0)?;
        ensure_positive("g3l", self.g3l)?;
        ensure_positive("g3r", self.g3r)?;
        DissipationRates::new(self.rates.gamma1, self.rates.gamma2, self.rates.gamma3)?;
        ensure_positive("rtol", self.rtol)?;
        ensure_positive("atol", self.atol)?;
        ensure_positive("sample_dt", self.sample_dt)?;
        Ok(())
    }

    /// Short label used in summary records.
    pub fn mode_label(&self) -> &'static str {
        match (self.direction, self.receive_kind) {
            (Direction::Forward, ReceiveKind::Satd) => "double-sta",
            (Direction::Forward, ReceiveKind::Stirap) => "sta-stirap",
            (Direction::Reverse, ReceiveKind::Satd) => "reverse",
            (Direction::Reverse, ReceiveKind::Stirap) => "reverse-sta-stirap",
        }
    }

    fn reversed(&self) -> Self {
        let direction = match self.direction {
            Direction::Forward => Direction::Reverse,
            Direction::Reverse => Direction::Forward,
        };
        Self { direction, ..*self }
    }

    /// (emitting speed, emitting coupling, absorbing coupling, absorbing speed)
    fn roles(&self) -> (f64, f64, f64, f64) {
        match self.direction {
            Direction::Forward => (self.v_l, self.g3l, self.g3r, self.v_r),
            Direction::Reverse => (self.v_r, self.g3r, self.g3l, self.v_l),
        }
    }

    pub fn source(&self) -> Site {
        self.emit_sites().source
    }

    pub fn destination(&self) -> Site {
        self.receive_sites().target
    }

    fn emit_sites(&self) -> LambdaSites {
        match self.direction {
            Direction::Forward => LambdaSites::LOCAL_EMIT,
            Direction::Reverse => LambdaSites::REMOTE_EMIT,
        }
    }

    fn receive_sites(&self) -> LambdaSites {
        match self.direction {
            Direction::Forward => LambdaSites::REMOTE_RECEIVE,
            Direction::Reverse => LambdaSites::LOCAL_RECEIVE,
        }
    }
}

/// How the state is carried into a stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryRule {
    Identity,
    /// u_W = sqrt(P_W) with zero phase.
    WaveguideFromLeakage,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StagePlan {
    pub stage: Stage,
    pub start: f64,
    pub end: f64,
    pub hamiltonian: SegmentHamiltonian,
    pub entry: BoundaryRule,
    pub max_step: f64,
    /// Cavity–waveguide coupling switched on during this stage, if any.
    pub waveguide_coupling: Option<(Site, f64)>,
}

impl StagePlan {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolSchedule {
    pub stages: Vec<StagePlan>,
}

impl ProtocolSchedule {
    pub fn total_duration(&self) -> f64 {
        self.stages.iter().map(StagePlan::duration).sum()
    }

    pub fn durations(&self) -> Vec<f64> {
        self.stages.iter().map(StagePlan::duration).collect()
    }

    /// Active (G₃l, G₃r) at absolute time `t`.
    pub fn waveguide_couplings(&self, t: f64) -> (f64, f64) {
        let mut out = (0.0, 0.0);
        for s in &self.stages {
            // Half-open intervals so a boundary instant belongs to the later stage.
            if t >= s.start && t < s.end {
                if let Some((cavity, g)) = s.waveguide_coupling {
                    match cavity {
                        Site::Cl => out.0 = g,
                        _ => out.1 = g,
                    }
                }
            }
        }
        out
    }
}

fn emission_length(cfg: &ProtocolConfig, v: f64, g3: f64) -> f64 {
    match cfg.emission_duration {
        EmissionDuration::ThirtyOverV => 30.0 / v,
        EmissionDuration::PulsePlusLeak => 2.0 * TRUNCATION_EXTENT / v + 8.0 * PI / (g3 * g3),
    }
}

pub fn build_schedule(cfg: &ProtocolConfig) -> Result<ProtocolSchedule> {
    cfg.validate()?;
    let (v_emit, g3_emit, g3_absorb, v_absorb) = cfg.roles();
    let emit = cfg.emit_sites();
    let receive = cfg.receive_sites();

    let t_l = emission_length(cfg, v_emit, g3_emit);
    let pulse_len = 2.0 * TRUNCATION_EXTENT / v_emit;
    if t_l < pulse_len {
        return Err(Error::invalid("emission_duration", format!("stage length {t_l} shorter than the pulse window {pulse_len}")));
    }
    let emit_profile = DressingProfile::new(DressingKind::SatdKappa, cfg.g0, g3_emit, MixingAngleProfile::new(v_emit)?)?;
    let emission = build_emission_hamiltonian(PlacedPulses::starting_at(emit_profile, 0.0), g3_emit, &cfg.rates, emit)?
        .with_leakage_mode(cfg.leakage_mode);

    let t_c = FRAC_PI_2 / g3_absorb;
    let conversion = build_conversion_hamiltonian(g3_absorb, &cfg.rates, receive.source)?;

    let receive_kind = match cfg.receive_kind {
        ReceiveKind::Satd => DressingKind::Satd,
        ReceiveKind::Stirap => DressingKind::Bare,
    };
    let receive_profile = DressingProfile::new(receive_kind, cfg.g0, 0.0, MixingAngleProfile::new(v_absorb)?)?;
    let t_r = receive_profile.mixing.duration();
    let receive_start = t_l + t_c;
    let receiving = build_receive_hamiltonian(PlacedPulses::starting_at(receive_profile, receive_start), &cfg.rates, receive);

    Ok(ProtocolSchedule {
        stages: vec![
            StagePlan {
                stage: Stage::Emission,
                start: 0.0,
                end: t_l,
                hamiltonian: emission,
                entry: BoundaryRule::Identity,
                max_step: 1e-2 / v_emit,
                waveguide_coupling: Some((emit.target, g3_emit)),
            },
            StagePlan {
                stage: Stage::Conversion,
                start: t_l,
                end: receive_start,
                hamiltonian: conversion,
                entry: BoundaryRule::WaveguideFromLeakage,
                max_step: 1e-2 / v_emit.min(v_absorb),
                waveguide_coupling: Some((receive.source, g3_absorb)),
            },
            StagePlan {
                stage: Stage::Receive,
                start: receive_start,
                end: receive_start + t_r,
                hamiltonian: receiving,
                entry: BoundaryRule::Identity,
                max_step: 1e-2 / v_absorb,
                waveguide_coupling: None,
            },
        ],
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub config: ProtocolConfig,
    /// Population delivered to the waveguide by the emission stage.
    pub f_l: f64,
    /// Fraction of the waveguide population that ends in the receiving cavity.
    pub conversion_survival: f64,
    /// Fraction of the receiving-cavity population that ends in the destination resonator.
    pub receive_fidelity: f64,
    pub f_e: f64,
    pub durations: Vec<f64>,
    pub total_duration: f64,
    pub trajectory: Trajectory,
}

pub const SUMMARY_HEADER: &str = "mode,v_l,v_r,g3l,g3r,gamma1,gamma2,gamma3,t_total,F_l,F_e";

impl RunResult {
    pub fn final_state(&self) -> &AmplitudeState {
        self.trajectory.last().expect("a run always records its end state")
    }

    pub fn summary_record(&self) -> String {
        let c = &self.config;
        [
            c.mode_label().to_string(),
            sig(c.v_l),
            sig(c.v_r),
            sig(c.g3l),
            sig(c.g3r),
            sig(c.rates.gamma1),
            sig(c.rates.gamma2),
            sig(c.rates.gamma3),
            sig(self.total_duration),
            sig(self.f_l),
            sig(self.f_e),
        ]
        .join(",")
    }
}

pub fn run(cfg: &ProtocolConfig) -> Result<RunResult> {
    run_from(cfg, AmplitudeState::excited(cfg.source()))
}

/// Runs the protocol starting from an arbitrary state (time is reset to 0).
pub fn run_from(cfg: &ProtocolConfig, initial: AmplitudeState) -> Result<RunResult> {
    run_on_grid(cfg, initial, &OutputGrid::every(cfg.sample_dt))
}

/// As [`run_from`] but recording the trajectory on `grid` instead of every `sample_dt`.
pub fn run_on_grid(cfg: &ProtocolConfig, initial: AmplitudeState, grid: &OutputGrid) -> Result<RunResult> {
    let schedule = build_schedule(cfg)?;
    let mut state = AmplitudeState { t: 0.0, ..initial };
    let mut trajectory = Trajectory::new(vec![state]);
    let mut f_l = 0.0;
    let mut conversion_survival = 0.0;
    let mut receive_fidelity = 0.0;

    for plan in &schedule.stages {
        if plan.entry == BoundaryRule::WaveguideFromLeakage {
            let w = &mut state.amps[Site::W.index()];
            *w = num_complex::Complex64::new(w.norm(), 0.0);
        }
        let integrator = IntegratorConfig { max_step: plan.max_step, ..IntegratorConfig::default() }.with_tolerances(cfg.rtol, cfg.atol);
        let before = state;
        let part = evolve(&state, &plan.hamiltonian, plan.start, plan.end, &integrator, grid)?;
        state = *part.last().expect("evolve returns at least the start state");
        match plan.stage {
            Stage::Emission => f_l = emission_fidelity(&part, cfg.rates.gamma3, cfg.leakage_mode),
            Stage::Conversion => conversion_survival = ratio(state.population(cfg.receive_sites().source), before.population(Site::W)),
            Stage::Receive => {
                let sites = cfg.receive_sites();
                receive_fidelity = ratio(state.population(sites.target), before.population(sites.source));
            }
        }
        trajectory.extend_stitched(part);
    }

    Ok(RunResult {
        config: *cfg,
        f_l,
        conversion_survival,
        receive_fidelity,
        f_e: state.population(cfg.destination()),
        durations: schedule.durations(),
        total_duration: schedule.total_duration(),
        trajectory,
    })
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        (num / den).min(1.0)
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundTrip {
    pub forward: RunResult,
    pub reverse: RunResult,
    /// Population back in the originating resonator.
    pub composite: f64,
}

/// Transfers out and back: the reverse leg starts from the forward end state.
pub fn round_trip(cfg: &ProtocolConfig) -> Result<RoundTrip> {
    let forward = run(cfg)?;
    let back = cfg.reversed();
    let reverse = run_from(&back, *forward.final_state())?;
    let composite = reverse.final_state().population(cfg.source());
    Ok(RoundTrip { forward, reverse, composite })
}
