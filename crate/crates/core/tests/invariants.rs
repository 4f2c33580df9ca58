use std::f64::consts::PI;

use approx::assert_relative_eq;
use sta_link::dynamics::{evolve, OutputGrid};
use sta_link::frame::dressed_dark_state;
use sta_link::hamiltonian::{build_emission_hamiltonian, build_receive_hamiltonian, DissipationRates, LambdaSites};
use sta_link::integrate::{IntegratorConfig, Method};
use sta_link::protocol::{round_trip, run, Direction, ProtocolConfig, ReceiveKind};
use sta_link::pulse::{DressingKind, DressingProfile, MixingAngleProfile, PlacedPulses};
use sta_link::state::{AmplitudeState, Site};

fn emission_pulses(v: f64, g3: f64) -> PlacedPulses {
    let profile = DressingProfile::new(DressingKind::SatdKappa, 1.0, g3, MixingAngleProfile::new(v).unwrap()).unwrap();
    PlacedPulses::starting_at(profile, 0.0)
}

#[test]
fn lossless_norm_is_conserved() {
    let r = run(&ProtocolConfig::default()).unwrap();
    for s in &r.trajectory.samples {
        assert!((s.norm() - 1.0).abs() < 1e-7, "norm {} at t = {}", s.norm(), s.t);
    }
}

#[test]
fn dissipative_norm_never_grows() {
    let cfg = ProtocolConfig::default().dissipative();
    let r = run(&cfg).unwrap();
    for w in r.trajectory.samples.windows(2) {
        assert!(w[1].norm() <= w[0].norm() + 1e-9, "norm rose from {} to {} at t = {}", w[0].norm(), w[1].norm(), w[1].t);
    }
    assert!(r.final_state().norm() < 1.0);
}

#[test]
fn leaked_population_matches_trapezoid_quadrature() {
    let g3 = 0.5;
    let v = 2.62;
    let ham = build_emission_hamiltonian(emission_pulses(v, g3), g3, &DissipationRates::lossless(), LambdaSites::LOCAL_EMIT).unwrap();
    let dt = 1e-3;
    let traj =
        evolve(&AmplitudeState::excited(Site::Al), &ham, 0.0, 30.0 / v, &IntegratorConfig::for_speed(v), &OutputGrid::every(dt)).unwrap();
    let kappa = 2.0 * PI * g3 * g3;
    let mut integral = 0.0;
    for w in traj.samples.windows(2) {
        let h = w[1].t - w[0].t;
        integral += 0.5 * h * kappa * (w[0].population(Site::Cl) + w[1].population(Site::Cl));
    }
    let last = traj.last().unwrap();
    assert!((last.emitted - integral).abs() < 1e-6, "{} vs {}", last.emitted, integral);
    assert_relative_eq!(last.population(Site::W), last.emitted, epsilon = 1e-14);
}

#[test]
fn tightening_tolerances_converges() {
    let coarse = run(&ProtocolConfig { rtol: 1e-7, atol: 1e-9, ..ProtocolConfig::default() }).unwrap().f_e;
    let fine = run(&ProtocolConfig { rtol: 1e-11, atol: 1e-13, ..ProtocolConfig::default() }).unwrap().f_e;
    assert!((coarse - fine).abs() < 1e-6, "{coarse} vs {fine}");
}

#[test]
fn fixed_step_cross_check_agrees() {
    let g3 = 0.5;
    let v = 2.62;
    let ham = build_emission_hamiltonian(emission_pulses(v, g3), g3, &DissipationRates::reference(), LambdaSites::LOCAL_EMIT).unwrap();
    let start = AmplitudeState::excited(Site::Al);
    let adaptive = evolve(&start, &ham, 0.0, 30.0 / v, &IntegratorConfig::default(), &OutputGrid::endpoints()).unwrap();
    let fixed_cfg = IntegratorConfig { method: Method::Rk4 { step: 1e-3 }, ..IntegratorConfig::default() };
    let fixed = evolve(&start, &ham, 0.0, 30.0 / v, &fixed_cfg, &OutputGrid::endpoints()).unwrap();
    let (a, b) = (adaptive.last().unwrap(), fixed.last().unwrap());
    for site in Site::ALL {
        assert!((a.amp(site) - b.amp(site)).norm() < 1e-8, "{site:?}");
    }
}

#[test]
fn receive_stage_tracks_the_dressed_dark_state() {
    let v = 2.62;
    let profile = DressingProfile::new(DressingKind::Satd, 1.0, 0.0, MixingAngleProfile::new(v).unwrap()).unwrap();
    let pulses = PlacedPulses::starting_at(profile, 0.0);
    let ham = build_receive_hamiltonian(pulses, &DissipationRates::lossless(), LambdaSites::REMOTE_RECEIVE);
    let t1 = profile.mixing.duration();
    let traj =
        evolve(&AmplitudeState::excited(Site::Cr), &ham, 0.0, t1, &IntegratorConfig::for_speed(v), &OutputGrid::every(0.05)).unwrap();
    for s in &traj.samples {
        let local = s.t - pulses.origin;
        let dark = dressed_dark_state(&profile, local);
        let overlap = dark[0].conj() * s.amp(Site::Cr) + dark[1].conj() * s.amp(Site::Br) + dark[2].conj() * s.amp(Site::Ar);
        assert!(overlap.norm_sqr() > 0.999, "overlap {} at t = {}", overlap.norm_sqr(), s.t);
    }
    assert!(traj.last().unwrap().population(Site::Ar) > 0.99999);
}

#[test]
fn fidelity_falls_with_each_loss_channel() {
    let base = ProtocolConfig::default();
    let f = |g1: f64, g2: f64, g3: f64| run(&ProtocolConfig { rates: DissipationRates::new(g1, g2, g3).unwrap(), ..base }).unwrap().f_e;
    let reference = f(1e-3, 1e-4, 1e-3);
    assert!(f(2e-3, 1e-4, 1e-3) < reference);
    assert!(f(1e-3, 1e-3, 1e-3) < reference);
    assert!(f(1e-3, 1e-4, 2e-3) < reference);
    assert!(reference < f(0.0, 0.0, 0.0));
}

#[test]
fn reverse_transfer_mirrors_forward() {
    for base in [ProtocolConfig::default(), ProtocolConfig::default().dissipative()] {
        let forward = run(&base).unwrap().f_e;
        let reverse = run(&ProtocolConfig { direction: Direction::Reverse, ..base }).unwrap().f_e;
        assert!((forward - reverse).abs() < 1e-4, "{forward} vs {reverse}");
    }
}

#[test]
fn double_sta_beats_stirap_receiver() {
    for base in [ProtocolConfig::default(), ProtocolConfig::default().dissipative()] {
        let sta = run(&base).unwrap().f_e;
        let stirap = run(&ProtocolConfig { receive_kind: ReceiveKind::Stirap, v_r: 1.0, ..base }).unwrap().f_e;
        assert!(sta > stirap, "{sta} vs {stirap}");
    }
}

#[test]
fn round_trip_is_close_to_squared_one_way() {
    let cfg = ProtocolConfig::default().dissipative();
    let one_way = run(&cfg).unwrap().f_e;
    let rt = round_trip(&cfg).unwrap();
    assert!((rt.composite - one_way * one_way).abs() < 1e-4, "{} vs {}", rt.composite, one_way * one_way);
}

#[test]
fn trajectory_csv_has_one_row_per_sample() {
    let r = run(&ProtocolConfig { sample_dt: 0.1, ..ProtocolConfig::default() }).unwrap();
    let csv = r.trajectory.to_csv_string();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), sta_link::state::TRAJECTORY_HEADER);
    assert_eq!(lines.count(), r.trajectory.len());
    let times: Vec<f64> = r.trajectory.times().collect();
    assert!(times.windows(2).all(|w| w[1] > w[0]));
    assert_relative_eq!(*times.last().unwrap(), r.total_duration, max_relative = 1e-12);
}
