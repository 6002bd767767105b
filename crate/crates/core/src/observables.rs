//! Derived quantities recorded per step: visible tumor volume, species
//! masses, and the drug agent count.

use crate::error::{Error, Result};
use crate::mesh::{integrate, RadialGrid};

/// Detection threshold of CT-visible tumor tissue.
pub const DEFAULT_VISIBLE_THRESHOLD: f64 = 0.3;

/// Measure of the superlevel set `{φ > threshold}` under `4πr²dr`.
///
/// The crossing radius inside an element is resolved by linear interpolation,
/// so the volume varies smoothly as the interface moves between nodes.
pub fn visible_volume(grid: &RadialGrid, field: &[f64], threshold: f64) -> f64 {
    debug_assert_eq!(field.len(), grid.n_nodes());
    debug_assert!(threshold > 0.0 && threshold < 1.0);
    let shell = |a: f64, b: f64| 4.0 / 3.0 * std::f64::consts::PI * (b * b * b - a * a * a);
    let mut volume = 0.0;
    for e in 0..grid.n_elements() {
        let (ra, rb) = grid.element(e);
        let (fa, fb) = (field[e], field[e + 1]);
        let above_a = fa > threshold;
        let above_b = fb > threshold;
        match (above_a, above_b) {
            (true, true) => volume += shell(ra, rb),
            (false, false) => {}
            _ => {
                let r_cross = ra + (threshold - fa) / (fb - fa) * (rb - ra);
                if above_a {
                    volume += shell(ra, r_cross);
                } else {
                    volume += shell(r_cross, rb);
                }
            }
        }
    }
    volume
}

/// `∫ φ 4πr²dr` of a nodal field.
pub fn total_mass(grid: &RadialGrid, field: &[f64]) -> f64 {
    integrate(grid, field)
}

/// Cubic millimetres per cubic metre; records and CSV output use mm³ to
/// match clinical convention.
pub const MM3_PER_M3: f64 = 1e9;

/// Per-step record of the observables, volumes in mm³.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Record {
    pub t_days: f64,
    pub v_vis_mm3: f64,
    pub total_mass_mm3: f64,
    pub drug_count: f64,
    pub proliferative_mass_mm3: f64,
    pub necrotic_mass_mm3: f64,
}

/// Time series of records with strictly increasing time stamps.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TimeSeries {
    records: Vec<Record>,
}

impl TimeSeries {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, record: Record) -> Result<()> {
        if let Some(last) = self.records.last() {
            if record.t_days <= last.t_days {
                return Err(Error::invalid_input(format!(
                    "time series must be strictly increasing: {} after {}",
                    record.t_days, last.t_days
                )));
            }
        }
        self.records.push(record);
        Ok(())
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&Record> {
        self.records.last()
    }

    /// Visible volume (mm³) at time `t` by linear interpolation between
    /// records, clamped to the covered time range.
    pub fn visible_volume_at(&self, t: f64) -> Option<f64> {
        if self.records.is_empty() {
            return None;
        }
        let first = self.records.first().unwrap();
        let last = self.records.last().unwrap();
        if t <= first.t_days {
            return Some(first.v_vis_mm3);
        }
        if t >= last.t_days {
            return Some(last.v_vis_mm3);
        }
        let idx = self
            .records
            .partition_point(|r| r.t_days < t)
            .min(self.records.len() - 1);
        let hi = &self.records[idx];
        let lo = &self.records[idx - 1];
        let frac = (t - lo.t_days) / (hi.t_days - lo.t_days);
        Some(lo.v_vis_mm3 + frac * (hi.v_vis_mm3 - lo.v_vis_mm3))
    }
}
