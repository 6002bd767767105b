//! One coupled time step of the reduced radial model.
//!
//! Step order: (a) drug substepping over `[t, t+dt]`, (b) quasi-static
//! nutrient refresh from the current proliferative field, (c) semi-implicit
//! solve of the coupled `(φ_P, μ_P)` system with the convex part of the
//! potential implicit and everything nonlinear lagged, (d) explicit Euler
//! update of the necrotic field, (e) optional clamping of the stored state.
//!
//! The drug level entering the reaction term is the end-of-step value.

use serde::{Deserialize, Serialize};

use crate::constitutive::{
    clamp01, mobility, source_necrotic, source_proliferative, split_deriv_explicit,
};
use crate::drug::{step_drug, DrugState, TherapySchedule};
use crate::error::{Error, Result};
use crate::linsolve::{
    solve_direct, solve_minres, BlockPreconditioner, BlockSystem, DirectWorkspace, MINRES_MAX_ITER,
    MINRES_RTOL,
};
use crate::mesh::{
    assemble_mass, assemble_pointwise_load, assemble_stiffness, assemble_unit_stiffness,
    RadialGrid, SymTridiag,
};
use crate::nutrient::solve_interstitial;
use crate::params::ModelParameters;

/// Linear solver used for the coupled step system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SolverChoice {
    #[default]
    Direct,
    Minres,
}

/// Time-stepping configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepConfig {
    /// Tumor time step, days.
    pub dt_days: f64,
    /// Explicit-Euler substeps of the drug ODE per tumor step.
    pub drug_substeps: usize,
    /// Clamp the stored state after each step (right-hand side evaluations
    /// are always clamped regardless).
    pub clamp_enabled: bool,
    pub solver: SolverChoice,
}

impl Default for StepConfig {
    fn default() -> Self {
        Self {
            dt_days: 1.0 / 24.0,
            drug_substeps: 32,
            clamp_enabled: true,
            solver: SolverChoice::Direct,
        }
    }
}

impl StepConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt_days > 0.0) {
            return Err(Error::config(format!(
                "time step must be positive, got {}",
                self.dt_days
            )));
        }
        if self.drug_substeps == 0 {
            return Err(Error::config("drug_substeps must be at least 1"));
        }
        Ok(())
    }
}

/// Nodal fields of the coupled model at one instant.
#[derive(Debug, Clone)]
pub struct FieldState {
    pub proliferative: Vec<f64>,
    pub necrotic: Vec<f64>,
    pub chemical_potential: Vec<f64>,
    pub nutrient: Vec<f64>,
    /// Time in days.
    pub time: f64,
}

impl FieldState {
    /// Total tumor fraction `φ_T = φ_P + φ_N` per node.
    pub fn total_fraction(&self) -> Vec<f64> {
        self.proliferative
            .iter()
            .zip(&self.necrotic)
            .map(|(p, n)| p + n)
            .collect()
    }
}

/// Owns the grid-dependent operators and workspaces of one simulation.
pub struct Simulator {
    grid: RadialGrid,
    params: ModelParameters,
    schedule: TherapySchedule,
    cfg: StepConfig,
    dose_scale: f64,
    mass: SymTridiag,
    unit_stiffness: SymTridiag,
    potential_block: SymTridiag,
    direct_ws: DirectWorkspace,
    // step scratch
    mobility_nodal: Vec<f64>,
    source_nodal: Vec<f64>,
    load: Vec<f64>,
    scratch: Vec<f64>,
}

impl Simulator {
    pub fn new(
        grid: RadialGrid,
        params: ModelParameters,
        schedule: TherapySchedule,
        cfg: StepConfig,
        dose_scale: f64,
    ) -> Result<Self> {
        params.validate()?;
        cfg.validate()?;
        if !(dose_scale >= 0.0) {
            return Err(Error::config(format!(
                "dose scale must be non-negative, got {dose_scale}"
            )));
        }
        let n = grid.n_nodes();
        let mass = assemble_mass(&grid);
        let unit_stiffness = assemble_unit_stiffness(&grid);
        let eps_sq = params.growth.interface_width * params.growth.interface_width;
        let potential_block = SymTridiag::linear_combination(&[
            (eps_sq, &unit_stiffness),
            (6.0 * params.growth.well_scale, &mass),
        ]);
        Ok(Self {
            direct_ws: DirectWorkspace::new(n),
            mobility_nodal: vec![0.0; n],
            source_nodal: vec![0.0; n],
            load: vec![0.0; n],
            scratch: vec![0.0; n],
            grid,
            params,
            schedule,
            cfg,
            dose_scale,
            mass,
            unit_stiffness,
            potential_block,
        })
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn params(&self) -> &ModelParameters {
        &self.params
    }

    pub fn config(&self) -> &StepConfig {
        &self.cfg
    }

    pub fn mass_matrix(&self) -> &SymTridiag {
        &self.mass
    }

    pub fn unit_stiffness(&self) -> &SymTridiag {
        &self.unit_stiffness
    }

    /// Tanh interface profile around radius `r0` with no necrotic cells; the
    /// chemical potential and nutrient fields are initialized consistently.
    pub fn initial_state(&mut self, r0: f64) -> Result<FieldState> {
        let radius = self.grid.radius();
        if !(r0 > 0.0 && r0 < radius) {
            return Err(Error::invalid_input(format!(
                "initial radius {r0} outside (0, {radius})"
            )));
        }
        let width = std::f64::consts::SQRT_2 * self.params.growth.interface_width;
        let proliferative: Vec<f64> = self
            .grid
            .nodes()
            .iter()
            .map(|&r| 0.5 * (1.0 - ((r - r0) / width).tanh()))
            .collect();
        let necrotic = vec![0.0; self.grid.n_nodes()];
        let nutrient = solve_interstitial(&self.grid, &proliferative, &self.params.nutrient)?;

        // μ from its defining equation: Mμ = ε²Kφ + ∂Ψ load - χMσ.
        let c_psi = self.params.growth.well_scale;
        assemble_pointwise_load(
            &self.grid,
            &proliferative,
            &necrotic,
            |p, n| {
                crate::constitutive::double_well_deriv(p, c_psi)
                    + crate::constitutive::double_well_deriv(p + n, c_psi)
            },
            &mut self.load,
        );
        let eps_sq = self.params.growth.interface_width * self.params.growth.interface_width;
        let mut rhs = self.unit_stiffness.apply_alloc(&proliferative);
        for v in rhs.iter_mut() {
            *v *= eps_sq;
        }
        for i in 0..rhs.len() {
            rhs[i] += self.load[i];
        }
        if self.params.growth.chemotaxis != 0.0 {
            self.mass.apply(&nutrient, &mut self.scratch);
            for i in 0..rhs.len() {
                rhs[i] -= self.params.growth.chemotaxis * self.scratch[i];
            }
        }
        let chemical_potential = crate::linsolve::solve_tridiag(&self.mass, &rhs)?;

        Ok(FieldState {
            proliferative,
            necrotic,
            chemical_potential,
            nutrient,
            time: 0.0,
        })
    }

    /// Assemble the coupled linear system for one step from the current state,
    /// the freshly solved nutrient field, and the end-of-step drug count.
    pub fn assemble_step_system(
        &mut self,
        state: &FieldState,
        nutrient: &[f64],
        agent_count: f64,
    ) -> BlockSystem {
        let n = self.grid.n_nodes();
        let growth = &self.params.growth;
        let dt = self.cfg.dt_days;

        for i in 0..n {
            let p = state.proliferative[i];
            let t = p + state.necrotic[i];
            self.mobility_nodal[i] = mobility(p, t);
        }
        let k_m = assemble_stiffness(&self.grid, &self.mobility_nodal)
            .expect("mobility weights are clamped non-negative");
        let mobility_block = SymTridiag::linear_combination(&[(dt * growth.mobility_factor, &k_m)]);

        for i in 0..n {
            self.source_nodal[i] = source_proliferative(
                state.proliferative[i],
                nutrient[i],
                agent_count,
                growth,
                &self.params.therapy,
            );
        }
        let mut rhs_mass_balance = self.mass.apply_alloc(&state.proliferative);
        self.mass.apply(&self.source_nodal, &mut self.scratch);
        for i in 0..n {
            rhs_mass_balance[i] += dt * self.scratch[i];
        }

        // Concave part of the potential, integrated exactly elementwise; the
        // frozen necrotic contribution of the convex part moves to the rhs.
        let c_psi = growth.well_scale;
        assemble_pointwise_load(
            &self.grid,
            &state.proliferative,
            &state.necrotic,
            |p, nn| split_deriv_explicit(p, nn, c_psi),
            &mut self.load,
        );
        let mut rhs_potential = self.load.clone();
        self.mass.apply(&state.necrotic, &mut self.scratch);
        for i in 0..n {
            rhs_potential[i] += 3.0 * c_psi * self.scratch[i];
        }
        if growth.chemotaxis != 0.0 {
            self.mass.apply(nutrient, &mut self.scratch);
            for i in 0..n {
                rhs_potential[i] -= growth.chemotaxis * self.scratch[i];
            }
        }

        BlockSystem {
            mobility_block,
            mass: self.mass.clone(),
            potential_block: self.potential_block.clone(),
            rhs_mass_balance,
            rhs_potential,
        }
    }

    /// Block-diagonal preconditioner matching the assembled system.
    pub fn preconditioner(&self, sys: &BlockSystem) -> Result<BlockPreconditioner> {
        let growth = &self.params.growth;
        BlockPreconditioner::new(
            sys,
            &self.unit_stiffness,
            &self.mass,
            growth.mobility_factor * self.cfg.dt_days,
            growth.interface_width * growth.interface_width,
            6.0 * growth.well_scale,
        )
    }

    /// Advance the coupled state by one tumor step.
    pub fn step(&mut self, state: &mut FieldState, drug: &mut DrugState) -> Result<()> {
        let n = self.grid.n_nodes();
        let dt = self.cfg.dt_days;

        let drug_next = step_drug(
            *drug,
            dt,
            self.cfg.drug_substeps,
            &self.schedule,
            &self.params.drug,
            self.dose_scale,
        );

        let nutrient = solve_interstitial(&self.grid, &state.proliferative, &self.params.nutrient)?;

        let sys = self.assemble_step_system(state, &nutrient, drug_next.agent_count);
        let solution = match self.cfg.solver {
            SolverChoice::Direct => solve_direct(&sys, &mut self.direct_ws)?,
            SolverChoice::Minres => {
                let pc = self.preconditioner(&sys)?;
                solve_minres(&sys, &pc, MINRES_RTOL, MINRES_MAX_ITER)?.0
            }
        };

        for (label, field) in [
            ("proliferative fraction", &solution.phase),
            ("chemical potential", &solution.chemical_potential),
        ] {
            if field.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    context: label.into(),
                    time: state.time + dt,
                });
            }
        }

        // Explicit necrotic update from begin-of-step fields.
        for i in 0..n {
            state.necrotic[i] += dt
                * source_necrotic(state.proliferative[i], nutrient[i], &self.params.growth);
        }

        state.proliferative = solution.phase;
        state.chemical_potential = solution.chemical_potential;
        state.nutrient = nutrient;
        state.time += dt;
        *drug = drug_next;

        if self.cfg.clamp_enabled {
            for i in 0..n {
                state.proliferative[i] = clamp01(state.proliferative[i]);
                state.necrotic[i] = state.necrotic[i].clamp(0.0, 1.0 - state.proliferative[i]);
            }
        }
        Ok(())
    }

    /// Discrete free energy of the current state (necrotic field frozen).
    pub fn free_energy(&self, state: &FieldState) -> f64 {
        crate::constitutive::free_energy(
            &self.grid,
            &self.unit_stiffness,
            &state.proliferative,
            &state.necrotic,
            self.params.growth.interface_width,
            self.params.growth.well_scale,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::integrate;
    use crate::observables::visible_volume;
    use approx::assert_relative_eq;

    fn no_reaction_params() -> ModelParameters {
        ModelParameters {
            growth: crate::params::GrowthParameters {
                mobility_factor: 5e-4,
                proliferation_rate: 0.0,
                growth_exponent: 2.0,
                necrosis_rate: 0.0,
                necrosis_nutrient_threshold: 0.2,
                interface_width: 5e-4,
                well_scale: 2.0,
                gompertz_reg: 0.1,
                chemotaxis: 0.0,
            },
            therapy: crate::params::TherapyEffectParameters {
                efficacy: 4.49,
                half_response_count: 1.012e16,
                patient_weight_kg: 80.0,
            },
            nutrient: crate::params::NutrientParameters::default(),
            drug: crate::params::DrugParameters {
                half_life_days: 26.7,
                molar_mass: 146_000.0,
                dose_grams: 0.24,
                full_dose_per_window: true,
            },
        }
    }

    fn simulator(n: usize, clamp: bool) -> Simulator {
        let grid = RadialGrid::new(n, 0.04).unwrap();
        let cfg = StepConfig {
            clamp_enabled: clamp,
            ..StepConfig::default()
        };
        Simulator::new(
            grid,
            no_reaction_params(),
            TherapySchedule::none(),
            cfg,
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn initial_condition_shape_and_volume() {
        let mut sim = simulator(500, true);
        let state = sim.initial_state(0.01).unwrap();
        assert!(state.proliferative[0] > 0.999, "center {}", state.proliferative[0]);
        assert!(
            state.proliferative.last().unwrap() < &1e-6,
            "boundary {}",
            state.proliferative.last().unwrap()
        );
        assert!(state.necrotic.iter().all(|&v| v == 0.0));

        // Visible volume of the tanh ball: compare against the closed-form
        // crossing radius of the profile at threshold 0.3.
        let vis = visible_volume(sim.grid(), &state.total_fraction(), 0.3);
        let width = std::f64::consts::SQRT_2 * 5e-4;
        let r_star = 0.01 + width * (0.4f64).atanh();
        let oracle = 4.0 / 3.0 * std::f64::consts::PI * r_star.powi(3);
        assert_relative_eq!(vis, oracle, max_relative = 5e-3);
    }

    #[test]
    fn initial_condition_volume_near_nominal_for_thin_interface() {
        let grid = RadialGrid::new(500, 0.04).unwrap();
        let mut params = no_reaction_params();
        params.growth.interface_width = 1e-4;
        let mut sim = Simulator::new(
            grid,
            params,
            TherapySchedule::none(),
            StepConfig::default(),
            1.0,
        )
        .unwrap();
        let state = sim.initial_state(0.01).unwrap();
        let vis = visible_volume(sim.grid(), &state.total_fraction(), 0.3);
        let nominal = 4.0 / 3.0 * std::f64::consts::PI * 0.01f64.powi(3);
        assert!(
            (vis - nominal).abs() / nominal < 0.05,
            "visible volume {vis} vs nominal {nominal}"
        );
    }

    #[test]
    fn initial_condition_rejects_bad_radius() {
        let mut sim = simulator(50, true);
        assert!(sim.initial_state(0.0).is_err());
        assert!(sim.initial_state(0.05).is_err());
    }

    #[test]
    fn uniform_zero_state_is_a_fixed_point() {
        let mut sim = simulator(100, true);
        let mut state = FieldState {
            proliferative: vec![0.0; 101],
            necrotic: vec![0.0; 101],
            chemical_potential: vec![0.0; 101],
            nutrient: vec![0.0; 101],
            time: 0.0,
        };
        let mut drug = DrugState::new(0.0, 0.0);
        for _ in 0..5 {
            sim.step(&mut state, &mut drug).unwrap();
        }
        assert!(state.proliferative.iter().all(|&v| v.abs() < 1e-13));
        assert!(state.chemical_potential.iter().all(|&v| v.abs() < 1e-13));
        assert_relative_eq!(state.time, 5.0 / 24.0, max_relative = 1e-12);
    }

    #[test]
    fn no_source_step_conserves_mass_and_dissipates_energy() {
        let mut sim = simulator(200, false);
        let mut state = sim.initial_state(0.01).unwrap();
        let mut drug = DrugState::new(0.0, 0.0);
        let mass0 = integrate(sim.grid(), &state.proliferative);
        let mut energy = sim.free_energy(&state);
        for _ in 0..100 {
            sim.step(&mut state, &mut drug).unwrap();
            let mass = integrate(sim.grid(), &state.proliferative);
            assert_relative_eq!(mass, mass0, max_relative = 1e-11);
            let e = sim.free_energy(&state);
            assert!(
                e <= energy + 1e-12 * energy.abs(),
                "energy rose: {energy} -> {e}"
            );
            energy = e;
        }
    }

    #[test]
    fn clamped_step_keeps_fractions_bounded() {
        let mut sim = simulator(150, true);
        let mut state = sim.initial_state(0.012).unwrap();
        let mut drug = DrugState::new(0.0, 0.0);
        for _ in 0..50 {
            sim.step(&mut state, &mut drug).unwrap();
            for i in 0..state.proliferative.len() {
                let total = state.proliferative[i] + state.necrotic[i];
                assert!(state.proliferative[i] >= 0.0 && state.proliferative[i] <= 1.0);
                assert!(state.necrotic[i] >= 0.0);
                assert!(total <= 1.0 + 1e-9, "total fraction {total}");
            }
        }
    }

    #[test]
    fn necrotic_field_grows_under_starvation() {
        let mut params = no_reaction_params();
        params.growth.necrosis_rate = 0.1;
        // Starve the core: tumor consumes faster than healthy tissue and the
        // vascular level leaves the interior balance below the threshold.
        params.nutrient.healthy_consumption = 1.0;
        params.nutrient.tumor_consumption = 4.0;
        params.nutrient.vascular_level = 0.75;
        let grid = RadialGrid::new(300, 0.04).unwrap();
        let mut sim = Simulator::new(
            grid,
            params,
            TherapySchedule::none(),
            StepConfig::default(),
            1.0,
        )
        .unwrap();
        let mut state = sim.initial_state(0.012).unwrap();
        assert!(
            state.nutrient[0] < 0.2,
            "core nutrient {} should be starved",
            state.nutrient[0]
        );
        let mut drug = DrugState::new(0.0, 0.0);
        let mut prev = state.necrotic.clone();
        for _ in 0..24 {
            sim.step(&mut state, &mut drug).unwrap();
            for i in 0..prev.len() {
                assert!(
                    state.necrotic[i] >= prev[i] - 1e-12,
                    "necrotic shrank at node {i}"
                );
            }
            prev = state.necrotic.clone();
        }
        let necrotic_mass = integrate(sim.grid(), &state.necrotic);
        assert!(necrotic_mass > 0.0, "no necrosis formed");
    }

    #[test]
    fn minres_path_matches_direct_path() {
        let mut direct = simulator(100, true);
        let mut state_d = direct.initial_state(0.01).unwrap();
        let grid = RadialGrid::new(100, 0.04).unwrap();
        let cfg = StepConfig {
            solver: SolverChoice::Minres,
            ..StepConfig::default()
        };
        let mut minres = Simulator::new(
            grid,
            no_reaction_params(),
            TherapySchedule::none(),
            cfg,
            1.0,
        )
        .unwrap();
        let mut state_m = minres.initial_state(0.01).unwrap();
        let mut drug_d = DrugState::new(0.0, 0.0);
        let mut drug_m = DrugState::new(0.0, 0.0);
        for _ in 0..10 {
            direct.step(&mut state_d, &mut drug_d).unwrap();
            minres.step(&mut state_m, &mut drug_m).unwrap();
        }
        let scale = state_d
            .proliferative
            .iter()
            .fold(0.0f64, |a, &b| a.max(b.abs()));
        for i in 0..state_d.proliferative.len() {
            assert!(
                (state_d.proliferative[i] - state_m.proliferative[i]).abs() <= 1e-7 * scale,
                "divergence at node {i}"
            );
        }
    }
}
