//! (v, |G₃|) infidelity sweeps over the dissipative double-STA protocol.

use crate::config::{render, KeyValues};
use crate::dynamics::OutputGrid;
use crate::error::{Error, Result};
use crate::fmt::sig;
use crate::protocol::{run_on_grid, EmissionDuration, ProtocolConfig};
use crate::state::AmplitudeState;

pub const SWEEP_HEADER: &str = "v,g3,infidelity,t_total";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Infidelity recorded for a grid point whose run failed.
pub const FAILED_POINT: f64 = -1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spacing {
    Linear,
    Log,
}

impl std::str::FromStr for Spacing {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "linear" => Ok(Spacing::Linear),
            "log" => Ok(Spacing::Log),
            other => Err(format!("unknown spacing `{other}`")),
        }
    }
}

impl std::fmt::Display for Spacing {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Spacing::Linear => "linear",
            Spacing::Log => "log",
        })
    }
}

/// Inclusive axis description.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
    pub spacing: Spacing,
}

impl Axis {
    pub fn linear(min: f64, max: f64, steps: usize) -> Self {
        Self { min, max, steps, spacing: Spacing::Linear }
    }

    pub fn values(&self) -> Result<Vec<f64>> {
        if self.steps == 0 {
            return Err(Error::invalid("steps", "axis needs at least one point"));
        }
        if !(self.min.is_finite() && self.max.is_finite() && self.min > 0.0) {
            return Err(Error::invalid("min", format!("axis bounds must be finite and positive, got [{}, {}]", self.min, self.max)));
        }
        if self.steps == 1 {
            return Ok(vec![self.min]);
        }
        let n = (self.steps - 1) as f64;
        let values: Vec<f64> = match self.spacing {
            Spacing::Linear => (0..self.steps).map(|i| self.min + (self.max - self.min) * i as f64 / n).collect(),
            Spacing::Log => {
                let (a, b) = (self.min.ln(), self.max.ln());
                (0..self.steps).map(|i| (a + (b - a) * i as f64 / n).exp()).collect()
            }
        };
        Ok(values)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub v: Axis,
    pub g3: Axis,
    /// Settings shared by every point; speeds and couplings are overwritten per point.
    pub template: ProtocolConfig,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self { v: Axis::linear(0.5, 4.0, 15), g3: Axis::linear(0.1, 1.0, 10), template: Self::default_template() }
    }
}

impl SweepGrid {
    /// Reference dissipation with the pulse-plus-leak emission length.
    pub fn default_template() -> ProtocolConfig {
        ProtocolConfig { emission_duration: EmissionDuration::PulsePlusLeak, ..ProtocolConfig::default().dissipative() }
    }

    /// Row-major (v outer, g3 inner) grid points.
    pub fn points(&self) -> Result<Vec<(f64, f64)>> {
        let vs = self.v.values()?;
        let gs = self.g3.values()?;
        for (name, axis) in [("v", &vs), ("g3", &gs)] {
            if axis.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::invalid(name, "grid values must increase strictly"));
            }
        }
        Ok(vs.iter().flat_map(|&v| gs.iter().map(move |&g| (v, g))).collect())
    }

    pub fn config_at(&self, v: f64, g3: f64) -> ProtocolConfig {
        ProtocolConfig { v_l: v, v_r: v, g3l: g3, g3r: g3, ..self.template }
    }

    pub fn key_values(&self) -> Vec<(&'static str, String)> {
        let mut kv = vec![("tool_version", TOOL_VERSION.to_string())];
        kv.extend(self.template.key_values());
        for (prefix, axis) in [("v", &self.v), ("g3", &self.g3)] {
            let keys: [&'static str; 4] =
                if prefix == "v" { ["v_min", "v_max", "v_steps", "v_spacing"] } else { ["g3_min", "g3_max", "g3_steps", "g3_spacing"] };
            kv.push((keys[0], axis.min.to_string()));
            kv.push((keys[1], axis.max.to_string()));
            kv.push((keys[2], axis.steps.to_string()));
            kv.push((keys[3], axis.spacing.to_string()));
        }
        kv
    }

    /// Overrides template and axes from `kv`, consuming the keys it recognizes.
    pub fn apply(&mut self, kv: &mut KeyValues) -> Result<()> {
        // Recorded for provenance only.
        let _: Option<String> = kv.take("tool_version")?;
        self.template.apply(kv)?;
        for (axis, [min, max, steps, spacing]) in
            [(&mut self.v, ["v_min", "v_max", "v_steps", "v_spacing"]), (&mut self.g3, ["g3_min", "g3_max", "g3_steps", "g3_spacing"])]
        {
            if let Some(x) = kv.take(min)? {
                axis.min = x;
            }
            if let Some(x) = kv.take(max)? {
                axis.max = x;
            }
            if let Some(x) = kv.take(steps)? {
                axis.steps = x;
            }
            if let Some(x) = kv.take(spacing)? {
                axis.spacing = x;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub v: f64,
    pub g3: f64,
    pub infidelity: f64,
    pub t_total: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub grid: SweepGrid,
}

impl SweepResult {
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from(SWEEP_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!("{},{},{},{}\n", sig(r.v), sig(r.g3), sig(r.infidelity), sig(r.t_total)));
        }
        out
    }

    /// Config echo from which the sweep can be rerun.
    pub fn provenance(&self) -> String {
        let mut text = String::from("# sta-link sweep provenance\n");
        text.push_str(&render(&self.grid.key_values()));
        text
    }

    pub fn failures(&self) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(|r| r.error.is_some())
    }
}

/// How grid points are scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Bounded worker pool; falls back to sequential without the `parallel` feature.
    Parallel {
        jobs: usize,
    },
}

fn evaluate(grid: &SweepGrid, v: f64, g3: f64) -> SweepRow {
    let cfg = grid.config_at(v, g3);
    match run_on_grid(&cfg, AmplitudeState::excited(cfg.source()), &OutputGrid::endpoints()) {
        Ok(r) => SweepRow { v, g3, infidelity: (1.0 - r.f_e).clamp(0.0, 1.0), t_total: r.total_duration, error: None },
        Err(e) => {
            let t_total = crate::protocol::build_schedule(&cfg).map(|s| s.total_duration()).unwrap_or(f64::NAN);
            SweepRow { v, g3, infidelity: FAILED_POINT, t_total, error: Some(e.to_string()) }
        }
    }
}

/// Runs every grid point. Per-point failures are recorded, never propagated;
/// only an invalid grid is an error.
pub fn run_sweep(grid: &SweepGrid, exec: Execution) -> Result<SweepResult> {
    let points = grid.points()?;
    let rows = match exec {
        Execution::Sequential => points.iter().map(|&(v, g)| evaluate(grid, v, g)).collect(),
        Execution::Parallel { jobs } => run_parallel(grid, &points, jobs.max(1)),
    };
    Ok(SweepResult { rows, grid: grid.clone() })
}

#[cfg(feature = "parallel")]
fn run_parallel(grid: &SweepGrid, points: &[(f64, f64)], jobs: usize) -> Vec<SweepRow> {
    use rayon::prelude::*;

    match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        // Indexed collect keeps row order independent of scheduling.
        Ok(pool) => pool.install(|| points.par_iter().map(|&(v, g)| evaluate(grid, v, g)).collect()),
        Err(_) => points.iter().map(|&(v, g)| evaluate(grid, v, g)).collect(),
    }
}

#[cfg(not(feature = "parallel"))]
fn run_parallel(grid: &SweepGrid, points: &[(f64, f64)], _jobs: usize) -> Vec<SweepRow> {
    points.iter().map(|&(v, g)| evaluate(grid, v, g)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::DissipationRates;

    #[test]
    fn axis_values() {
        assert_eq!(Axis::linear(0.5, 4.0, 1).values().unwrap(), vec![0.5]);
        let v = Axis::linear(0.5, 4.0, 15).values().unwrap();
        assert_eq!(v.len(), 15);
        assert_eq!(v[0], 0.5);
        assert_eq!(v[14], 4.0);
        let l = Axis { spacing: Spacing::Log, ..Axis::linear(0.1, 10.0, 3) }.values().unwrap();
        assert!((l[1] - 1.0).abs() < 1e-12);
        assert!(Axis::linear(0.5, 4.0, 0).values().is_err());
        assert!(Axis::linear(0.0, 4.0, 2).values().is_err());
    }

    #[test]
    fn rejects_non_increasing_axes() {
        let grid = SweepGrid { v: Axis::linear(2.0, 1.0, 3), ..Default::default() };
        assert!(run_sweep(&grid, Execution::Sequential).is_err());
        let grid = SweepGrid { g3: Axis::linear(1.0, 1.0, 2), ..Default::default() };
        assert!(grid.points().is_err());
    }

    #[test]
    fn row_major_order() {
        let grid = SweepGrid { v: Axis::linear(1.0, 2.0, 2), g3: Axis::linear(0.3, 0.5, 3), ..Default::default() };
        let p = grid.points().unwrap();
        assert_eq!(p.len(), 6);
        assert_eq!(p[0], (1.0, 0.3));
        assert_eq!(p[2].0, 1.0);
        assert_eq!(p[3], (2.0, 0.3));
    }

    #[test]
    fn single_point_lossless() {
        let grid = SweepGrid {
            v: Axis::linear(2.62, 2.62, 1),
            g3: Axis::linear(0.5, 0.5, 1),
            template: ProtocolConfig { rates: DissipationRates::lossless(), ..SweepGrid::default_template() },
        };
        let r = run_sweep(&grid, Execution::Sequential).unwrap();
        assert_eq!(r.rows.len(), 1);
        assert!(r.rows[0].infidelity <= 1e-4);
        assert_eq!(r.to_csv_string().lines().count(), 2);
    }

    #[test]
    fn failing_point_gets_sentinel() {
        // An impossible tolerance makes every run fail without aborting the sweep.
        let grid = SweepGrid {
            v: Axis::linear(2.0, 3.0, 2),
            g3: Axis::linear(0.5, 0.5, 1),
            template: ProtocolConfig { rtol: -1.0, ..SweepGrid::default_template() },
        };
        let r = run_sweep(&grid, Execution::Parallel { jobs: 2 }).unwrap();
        assert_eq!(r.rows.len(), 2);
        assert!(r.rows.iter().all(|row| row.infidelity == FAILED_POINT && row.error.is_some()));
        assert_eq!(r.failures().count(), 2);
    }

    #[test]
    fn provenance_reproduces_grid() {
        let grid = SweepGrid { v: Axis { spacing: Spacing::Log, ..Axis::linear(0.7, 3.3, 4) }, ..Default::default() };
        let result = SweepResult { rows: Vec::new(), grid: grid.clone() };
        let mut kv = KeyValues::parse(&result.provenance()).unwrap();
        let mut back = SweepGrid { template: ProtocolConfig::default(), ..SweepGrid::default() };
        back.apply(&mut kv).unwrap();
        kv.finish().unwrap();
        assert_eq!(back, grid);
    }
}
