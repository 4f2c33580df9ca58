//! Adiabatic and dressed frames of a three-level Λ generator.
//!
//! Basis order is (source, mid, target); adiabatic columns are ordered
//! (|+⟩, |dk⟩, |−⟩).

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;

use crate::pulse::{DressingKind, DressingProfile};

type M3 = Matrix3<Complex64>;

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Columns |+⟩, |dk⟩, |−⟩ of the adiabatic basis for mixing angle θ.
#[rustfmt::skip]
pub fn adiabatic_basis(theta: f64) -> M3 {
    let (s, c) = theta.sin_cos();
    let r = FRAC_1_SQRT_2;
    Matrix3::new(
        re(s * r), re(-c), re(s * r),
        re(r), re(0.0), re(-r),
        re(c * r), re(s), re(c * r),
    )
}

/// dU/dθ
#[rustfmt::skip]
fn adiabatic_basis_derivative(theta: f64) -> M3 {
    let (s, c) = theta.sin_cos();
    let r = FRAC_1_SQRT_2;
    Matrix3::new(
        re(c * r), re(s), re(c * r),
        re(0.0), re(0.0), re(0.0),
        re(-s * r), re(c), re(-s * r),
    )
}

/// Generator of the dressing rotation in the adiabatic frame.
#[rustfmt::skip]
fn dressing_generator() -> M3 {
    let r = FRAC_1_SQRT_2;
    Matrix3::new(
        re(0.0), re(r), re(0.0),
        re(r), re(0.0), re(-r),
        re(0.0), re(-r), re(0.0),
    )
}

/// Dressing operator V = exp(iμX).
pub fn dressing_operator(mu: f64) -> M3 {
    (dressing_generator() * Complex64::new(0.0, mu)).exp()
}

/// Lab-frame generator of the driven Λ system at pulse-local time `t`,
/// including the −iκ/2 target decay for SATD+κ profiles.
#[rustfmt::skip]
pub fn lab_generator(profile: &DressingProfile, t: f64) -> M3 {
    let (g1, g2) = profile.corrected_pulses(t);
    let decay = match profile.kind {
        DressingKind::SatdKappa => std::f64::consts::PI * profile.g3 * profile.g3,
        _ => 0.0,
    };
    Matrix3::new(
        re(0.0), re(g1), re(0.0),
        re(g1), re(0.0), re(g2),
        re(0.0), re(g2), Complex64::new(0.0, -decay),
    )
}

/// Generator in the dressed frame, H_ds = V†(U†HU − iU†U̇)V − iV†V̇.
pub fn dressed_generator(profile: &DressingProfile, t: f64) -> M3 {
    let theta = profile.mixing.angle(t);
    let theta_rate = profile.mixing.rate(t);
    let mu = profile.dressing_strength(t);
    let mu_rate = profile.dressing_rate(t);
    let i = Complex64::new(0.0, 1.0);

    let u = adiabatic_basis(theta);
    let du = adiabatic_basis_derivative(theta) * re(theta_rate);
    let h_ad = u.adjoint() * lab_generator(profile, t) * u - u.adjoint() * du * i;

    let x = dressing_generator();
    let v = dressing_operator(mu);
    let dv = x * v * (i * mu_rate);
    v.adjoint() * h_ad * v - v.adjoint() * dv * i
}

/// |⟨+̃|H_ds|d̃k⟩| and |⟨−̃|H_ds|d̃k⟩|.
pub fn decoupling_residual(profile: &DressingProfile, t: f64) -> (f64, f64) {
    let h = dressed_generator(profile, t);
    (h[(0, 1)].norm(), h[(2, 1)].norm())
}

/// Dressed dark state V|dk⟩ expressed in the lab basis.
pub fn dressed_dark_state(profile: &DressingProfile, t: f64) -> Vector3<Complex64> {
    let u = adiabatic_basis(profile.mixing.angle(t));
    let v = dressing_operator(profile.dressing_strength(t));
    (u * v).column(1).into_owned()
}
