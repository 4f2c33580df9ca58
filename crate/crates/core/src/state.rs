//! Amplitude bookkeeping for the seven tracked excitations and sampled trajectories.

use std::io::{self, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::fmt::sig;

pub const N_SITES: usize = 7;

/// Single-excitation levels, in storage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Site {
    /// Superconducting resonator, node A.
    Al,
    /// Nanomechanical resonator, node A.
    Bl,
    /// Optical cavity, node A.
    Cl,
    /// Collective waveguide excitation.
    W,
    Cr,
    Br,
    Ar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Device {
    Resonator,
    Mechanical,
    Cavity,
    Waveguide,
}

impl Site {
    pub const ALL: [Site; N_SITES] = [Site::Al, Site::Bl, Site::Cl, Site::W, Site::Cr, Site::Br, Site::Ar];

    pub const fn index(self) -> usize {
        self as usize
    }

    pub fn device(self) -> Device {
        match self {
            Site::Al | Site::Ar => Device::Resonator,
            Site::Bl | Site::Br => Device::Mechanical,
            Site::Cl | Site::Cr => Device::Cavity,
            Site::W => Device::Waveguide,
        }
    }
}

/// Amplitudes of all tracked levels at one instant.
///
/// During emission the waveguide slot holds `sqrt(P_W)` with zero phase and the
/// two leakage integrals are accumulated alongside.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmplitudeState {
    pub t: f64,
    pub amps: [Complex64; N_SITES],
    /// ∫ 2πG₃² |u_C|² dτ over the current emission stage.
    pub emitted: f64,
    /// Same integral with each contribution damped by e^{-γ₃(t-τ)}.
    pub emitted_damped: f64,
}

impl AmplitudeState {
    pub fn vacuum(t: f64) -> Self {
        Self { t, amps: [Complex64::new(0.0, 0.0); N_SITES], emitted: 0.0, emitted_damped: 0.0 }
    }

    /// Single excitation fully in `site`.
    pub fn excited(site: Site) -> Self {
        let mut s = Self::vacuum(0.0);
        s.amps[site.index()] = Complex64::new(1.0, 0.0);
        s
    }

    pub fn amp(&self, site: Site) -> Complex64 {
        self.amps[site.index()]
    }

    pub fn population(&self, site: Site) -> f64 {
        self.amps[site.index()].norm_sqr()
    }

    pub fn populations(&self) -> [f64; N_SITES] {
        self.amps.map(|a| a.norm_sqr())
    }

    /// Total bookkeeping Σ|u|² including the waveguide.
    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }
}

pub const TRAJECTORY_HEADER: &str = "t,P_Al,P_Bl,P_Cl,P_W,P_Cr,P_Br,P_Ar,norm";

/// Time-ordered samples of a run or stage.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<AmplitudeState>,
}

impl Trajectory {
    pub fn new(samples: Vec<AmplitudeState>) -> Self {
        Self { samples }
    }

    pub fn first(&self) -> Option<&AmplitudeState> {
        self.samples.first()
    }

    pub fn last(&self) -> Option<&AmplitudeState> {
        self.samples.last()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.t)
    }

    /// Appends `other`, dropping its first sample when it repeats our last time.
    pub fn extend_stitched(&mut self, other: Trajectory) {
        let mut it = other.samples.into_iter().peekable();
        if let (Some(last), Some(first)) = (self.samples.last(), it.peek()) {
            if last.t == first.t {
                it.next();
            }
        }
        self.samples.extend(it);
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{TRAJECTORY_HEADER}")?;
        for s in &self.samples {
            let p = s.populations();
            write!(w, "{}", sig(s.t))?;
            for v in p {
                write!(w, ",{}", sig(v))?;
            }
            writeln!(w, ",{}", sig(s.norm()))?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV output is ASCII")
    }
}
