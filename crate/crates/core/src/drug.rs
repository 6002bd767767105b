//! Immunotherapy agent kinetics: first-order serum decay plus injection
//! windows, integrated with explicit-Euler substeps on a much finer time
//! scale than the tumor step.

use crate::error::{Error, Result};
use crate::params::DrugParameters;

/// One-hour administration window, in days.
pub const DEFAULT_WINDOW_DAYS: f64 = 1.0 / 24.0;

/// Ordered disjoint half-open administration windows `[start, end)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TherapySchedule {
    windows: Vec<(f64, f64)>,
}

impl TherapySchedule {
    pub fn none() -> Self {
        Self { windows: Vec::new() }
    }

    /// Windows of `window_days` length at `t_start + interval·k` for all
    /// `k ≥ 0` with window start ≤ `t_last_start`.
    pub fn from_cycles(
        t_start: f64,
        interval_days: f64,
        t_last_start: f64,
        window_days: f64,
    ) -> Result<Self> {
        if !(interval_days > 0.0) {
            return Err(Error::invalid_input(format!(
                "cycle interval must be positive, got {interval_days}"
            )));
        }
        if !(window_days > 0.0) {
            return Err(Error::invalid_input(format!(
                "window length must be positive, got {window_days}"
            )));
        }
        let mut windows = Vec::new();
        if t_last_start >= t_start {
            let mut k = 0u64;
            loop {
                let start = t_start + interval_days * k as f64;
                if start > t_last_start {
                    break;
                }
                windows.push((start, start + window_days));
                k += 1;
            }
        }
        Ok(Self { windows })
    }

    /// Explicit list of window start times.
    pub fn from_starts(starts: &[f64], window_days: f64) -> Result<Self> {
        if !(window_days > 0.0) {
            return Err(Error::invalid_input("window length must be positive"));
        }
        let mut sorted = starts.to_vec();
        sorted.sort_by(|a, b| a.total_cmp(b));
        sorted.dedup();
        let windows: Vec<(f64, f64)> = sorted.iter().map(|&s| (s, s + window_days)).collect();
        for pair in windows.windows(2) {
            if pair[1].0 < pair[0].1 {
                return Err(Error::invalid_input(format!(
                    "administration windows overlap at day {}",
                    pair[1].0
                )));
            }
        }
        Ok(Self { windows })
    }

    /// Biweekly administration from therapy start until the stop day.
    pub fn patient1(t_start: f64, t_stop: f64) -> Self {
        Self::from_cycles(t_start, 14.0, t_stop, DEFAULT_WINDOW_DAYS)
            .expect("fixed positive cycle parameters")
    }

    /// Three-weekly cycles from `t_start` until `t_switch`, then six-weekly
    /// cycles until `t_stop`. A second-phase window that would start inside a
    /// first-phase window (in particular a duplicate at the switch) is merged
    /// into it.
    pub fn patient2(t_start: f64, t_switch: f64, t_stop: f64) -> Self {
        let first = Self::from_cycles(t_start, 21.0, t_switch, DEFAULT_WINDOW_DAYS)
            .expect("fixed positive cycle parameters");
        let second = Self::from_cycles(t_switch, 42.0, t_stop, DEFAULT_WINDOW_DAYS)
            .expect("fixed positive cycle parameters");
        let mut starts: Vec<f64> = first
            .windows
            .iter()
            .chain(second.windows.iter())
            .map(|w| w.0)
            .collect();
        starts.sort_by(|a, b| a.total_cmp(b));
        let mut merged: Vec<f64> = Vec::with_capacity(starts.len());
        for s in starts {
            if merged
                .last()
                .map_or(true, |&prev| s >= prev + DEFAULT_WINDOW_DAYS)
            {
                merged.push(s);
            }
        }
        Self::from_starts(&merged, DEFAULT_WINDOW_DAYS).expect("merged starts are disjoint")
    }

    pub fn windows(&self) -> &[(f64, f64)] {
        &self.windows
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    /// Window containing time `t`, if any.
    pub fn window_at(&self, t: f64) -> Option<(f64, f64)> {
        // Schedules are short (tens of windows); a scan keeps this simple.
        self.windows
            .iter()
            .copied()
            .find(|&(s, e)| t >= s && t < e)
    }
}

/// Scalar drug state: agent molecule count and current time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DrugState {
    pub agent_count: f64,
    pub time: f64,
}

impl DrugState {
    pub fn new(agent_count: f64, time: f64) -> Self {
        Self { agent_count, time }
    }
}

/// Advance the drug ODE by `dt` using `n_sub` explicit-Euler substeps.
///
/// The decay rate is `ln 2 / t_half`; while inside an administration window
/// the influx is `dose_scale·N_A·d_τ/M_τ`, optionally scaled by the inverse
/// window length so one window delivers one full dose (see
/// [`DrugParameters::full_dose_per_window`]).
pub fn step_drug(
    state: DrugState,
    dt: f64,
    n_sub: usize,
    schedule: &TherapySchedule,
    p: &DrugParameters,
    dose_scale: f64,
) -> DrugState {
    assert!(dt > 0.0, "drug step needs dt > 0");
    assert!(n_sub >= 1, "drug step needs at least one substep");
    assert!(dose_scale >= 0.0, "dose scale must be non-negative");
    let h = dt / n_sub as f64;
    let decay = std::f64::consts::LN_2 / p.half_life_days;
    let base_rate = dose_scale * p.dose_molecules();
    let mut count = state.agent_count;
    for k in 0..n_sub {
        let t = state.time + k as f64 * h;
        let rate = match schedule.window_at(t) {
            Some((s, e)) if p.full_dose_per_window => base_rate / (e - s),
            Some(_) => base_rate,
            None => 0.0,
        };
        count += h * (rate - decay * count);
        if count < 0.0 {
            count = 0.0;
        }
    }
    DrugState {
        agent_count: count,
        time: state.time + dt,
    }
}

/// Trough-to-peak ratio of the quasi-periodic state under a fixed
/// administration interval: `2^(-interval/t_half)`.
pub fn quasi_periodic_ratio(p: &DrugParameters, interval_days: f64) -> f64 {
    assert!(interval_days >= 0.0);
    (2.0f64).powf(-interval_days / p.half_life_days)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn nivolumab() -> DrugParameters {
        DrugParameters {
            half_life_days: 26.7,
            molar_mass: 146_000.0,
            dose_grams: 0.24,
            full_dose_per_window: true,
        }
    }

    #[test]
    fn patient1_schedule_matches_cycle_rule() {
        let s = TherapySchedule::patient1(296.0, 296.0 + 28.0);
        let starts: Vec<f64> = s.windows().iter().map(|w| w.0).collect();
        assert_eq!(starts, vec![296.0, 310.0, 324.0]);
        for &(a, b) in s.windows() {
            assert_relative_eq!(b - a, 1.0 / 24.0, max_relative = 1e-9);
        }
    }

    #[test]
    fn patient1_boundary_and_empty_cases() {
        let s = TherapySchedule::patient1(0.0, 0.0);
        assert_eq!(s.windows().len(), 1);
        assert_eq!(s.windows()[0].0, 0.0);
        let s = TherapySchedule::patient1(296.0, 295.0);
        assert!(s.is_empty());
    }

    #[test]
    fn patient2_window_count_matches_loop_oracle() {
        let s = TherapySchedule::patient2(0.0, 514.0, 1063.0);

        // Direct enumeration oracle for both cycle families.
        let mut oracle: Vec<f64> = Vec::new();
        let mut k = 0;
        loop {
            let t = 21.0 * k as f64;
            if t > 514.0 {
                break;
            }
            oracle.push(t);
            k += 1;
        }
        let mut k = 0;
        loop {
            let t = 514.0 + 42.0 * k as f64;
            if t > 1063.0 {
                break;
            }
            oracle.push(t);
            k += 1;
        }
        oracle.sort_by(|a, b| a.total_cmp(b));
        oracle.dedup();

        assert_eq!(oracle.len(), 39);
        let starts: Vec<f64> = s.windows().iter().map(|w| w.0).collect();
        assert_eq!(starts, oracle);
    }

    #[test]
    fn patient2_degenerate_first_phase_merges_switch_window() {
        let s = TherapySchedule::patient2(0.0, 0.0, 42.0);
        let starts: Vec<f64> = s.windows().iter().map(|w| w.0).collect();
        assert_eq!(starts, vec![0.0, 42.0]);
    }

    #[test]
    fn drug_halves_over_one_half_life() {
        let p = nivolumab();
        let schedule = TherapySchedule::none();
        let mut state = DrugState::new(1e18, 0.0);
        let dt: f64 = 1.0 / 24.0;
        let full_steps = (26.7 / dt).floor() as usize;
        for _ in 0..full_steps {
            state = step_drug(state, dt, 32, &schedule, &p, 1.0);
        }
        let rem = 26.7 - full_steps as f64 * dt;
        if rem > 0.0 {
            state = step_drug(state, rem, 32, &schedule, &p, 1.0);
        }
        assert_relative_eq!(state.agent_count, 0.5e18, max_relative = 1e-3);
        assert_relative_eq!(state.time, 26.7, max_relative = 1e-12);
    }

    #[test]
    fn one_window_delivers_full_dose_without_decay() {
        let mut p = nivolumab();
        p.half_life_days = f64::INFINITY;
        let schedule = TherapySchedule::from_starts(&[0.0], 1.0 / 24.0).unwrap();
        let state = step_drug(DrugState::new(0.0, 0.0), 1.0 / 24.0, 32, &schedule, &p, 1.0);
        let expected = p.dose_molecules();
        assert_relative_eq!(state.agent_count, expected, max_relative = 1e-12);
        assert_relative_eq!(state.agent_count, 9.899_409_632_876_712e17, max_relative = 1e-9);
    }

    #[test]
    fn literal_influx_delivers_one_window_fraction() {
        let mut p = nivolumab();
        p.half_life_days = f64::INFINITY;
        p.full_dose_per_window = false;
        let schedule = TherapySchedule::from_starts(&[0.0], 1.0 / 24.0).unwrap();
        let state = step_drug(DrugState::new(0.0, 0.0), 1.0 / 24.0, 32, &schedule, &p, 1.0);
        assert_relative_eq!(
            state.agent_count,
            p.dose_molecules() / 24.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn zero_dose_scale_is_pure_decay() {
        let p = nivolumab();
        let schedule = TherapySchedule::patient1(0.0, 100.0);
        let with_schedule = step_drug(DrugState::new(5e17, 0.0), 2.0, 48, &schedule, &p, 0.0);
        let without = step_drug(
            DrugState::new(5e17, 0.0),
            2.0,
            48,
            &TherapySchedule::none(),
            &p,
            1.0,
        );
        assert_eq!(with_schedule.agent_count, without.agent_count);
    }

    #[test]
    fn quasi_periodic_ratio_closed_forms() {
        let p = nivolumab();
        assert_relative_eq!(quasi_periodic_ratio(&p, 14.0), 0.6953, max_relative = 1e-4);
        assert_relative_eq!(quasi_periodic_ratio(&p, 26.7), 0.5, max_relative = 1e-12);
        assert_relative_eq!(quasi_periodic_ratio(&p, 0.0), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn pre_injection_levels_converge_to_quasi_periodic_state() {
        let p = nivolumab();
        let interval = 14.0;
        let schedule = TherapySchedule::from_cycles(0.0, interval, 1400.0, 1.0 / 24.0).unwrap();
        let mut state = DrugState::new(0.0, 0.0);
        let dt = 1.0 / 24.0;
        let mut troughs = Vec::new();
        let steps_per_cycle = (interval / dt).round() as usize;
        for cycle in 0..40 {
            for _ in 0..steps_per_cycle {
                state = step_drug(state, dt, 32, &schedule, &p, 1.0);
            }
            let _ = cycle;
            troughs.push(state.agent_count);
        }
        // Geometric convergence of successive trough differences.
        let d1 = (troughs[10] - troughs[9]).abs();
        let d2 = (troughs[11] - troughs[10]).abs();
        assert!(d2 < d1);
        let q = quasi_periodic_ratio(&p, interval);
        assert_relative_eq!(d2 / d1, q, max_relative = 0.02);
        // Limit trough = peak · 2^(-interval/t_half) with peak = trough + dose.
        let trough = *troughs.last().unwrap();
        let peak = trough + p.dose_molecules();
        assert_relative_eq!(trough, peak * q, max_relative = 1e-2);
    }

    proptest! {
        #[test]
        fn agent_count_stays_nonnegative(
            initial in 0.0..1e18f64,
            dt in 1e-3..5.0f64,
            scale in 0.0..2.0f64,
        ) {
            let p = nivolumab();
            let schedule = TherapySchedule::patient1(0.0, 100.0);
            let mut state = DrugState::new(initial, 0.0);
            for _ in 0..20 {
                state = step_drug(state, dt, 8, &schedule, &p, scale);
                prop_assert!(state.agent_count >= 0.0);
            }
        }

        #[test]
        fn doubling_dose_scale_doubles_the_response(scale in 0.1..2.0f64) {
            let p = nivolumab();
            let schedule = TherapySchedule::patient1(0.0, 200.0);
            let mut a = DrugState::new(0.0, 0.0);
            let mut b = DrugState::new(0.0, 0.0);
            for _ in 0..(40 * 24) {
                a = step_drug(a, 1.0 / 24.0, 4, &schedule, &p, scale);
                b = step_drug(b, 1.0 / 24.0, 4, &schedule, &p, 2.0 * scale);
            }
            prop_assert!(a.agent_count > 0.0);
            prop_assert!(((b.agent_count - 2.0 * a.agent_count) / b.agent_count).abs() <= 1e-12);
        }

        #[test]
        fn schedule_windows_sorted_and_disjoint(
            t_start in 0.0..400.0f64,
            t_switch_offset in 0.0..400.0f64,
            t_stop_offset in 0.0..600.0f64,
        ) {
            let t_switch = t_start + t_switch_offset;
            let t_stop = t_switch + t_stop_offset;
            let s = TherapySchedule::patient2(t_start, t_switch, t_stop);
            let w = s.windows();
            for pair in w.windows(2) {
                prop_assert!(pair[0].1 <= pair[1].0, "windows overlap: {pair:?}");
            }
        }
    }
}
