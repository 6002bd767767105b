//! Constitutive functions of the phase-field model: double-well potential
//! with its convex-concave split, degenerate mobility, and the reaction
//! terms converting nutrient, drug level, and cell fractions into growth and
//! decay rates.
//!
//! Everything here is a pure function of scalars. Cell-fraction inputs are
//! clamped to [0, 1] before evaluation (the cutoff applied to all right-hand
//! side terms); the clamping never mutates stored fields.

use crate::mesh::{integrate_pointwise, RadialGrid, SymTridiag};
use crate::params::{GrowthParameters, TherapyEffectParameters};

#[inline]
pub fn clamp01(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

/// Single-well energy density `Ψ̃(φ) = c_Ψ φ²(1-φ)²`.
#[inline]
pub fn double_well(phi: f64, well_scale: f64) -> f64 {
    let g = phi * (1.0 - phi);
    well_scale * g * g
}

/// `Ψ̃'(φ) = c_Ψ·2φ(1-φ)(1-2φ)`.
#[inline]
pub fn double_well_deriv(phi: f64, well_scale: f64) -> f64 {
    well_scale * 2.0 * phi * (1.0 - phi) * (1.0 - 2.0 * phi)
}

/// Convex part `Ψ̃_i(φ) = (3/2) c_Ψ φ²` of the splitting.
#[inline]
pub fn well_convex(phi: f64, well_scale: f64) -> f64 {
    1.5 * well_scale * phi * phi
}

/// Concave remainder `Ψ̃_e(φ) = c_Ψ(φ⁴ - 2φ³ - φ²/2)`, so that
/// `Ψ̃_i + Ψ̃_e = Ψ̃` pointwise.
#[inline]
pub fn well_concave(phi: f64, well_scale: f64) -> f64 {
    well_scale * (((phi - 2.0) * phi - 0.5) * phi * phi)
}

/// `Ψ̃_i'(φ) = 3 c_Ψ φ`.
#[inline]
pub fn well_convex_deriv(phi: f64, well_scale: f64) -> f64 {
    3.0 * well_scale * phi
}

/// `Ψ̃_e'(φ) = c_Ψ(4φ³ - 6φ² - φ)`.
#[inline]
pub fn well_concave_deriv(phi: f64, well_scale: f64) -> f64 {
    well_scale * (((4.0 * phi - 6.0) * phi - 1.0) * phi)
}

/// `Ψ̃_e''(φ) = c_Ψ(12φ² - 12φ - 1)`; non-positive on
/// `[1/2 - 1/√3, 1/2 + 1/√3] ⊃ [0, 1]`.
#[inline]
pub fn well_concave_second_deriv(phi: f64, well_scale: f64) -> f64 {
    well_scale * (12.0 * phi * phi - 12.0 * phi - 1.0)
}

/// Full potential `Ψ(φ_P, φ_T) = Ψ̃(φ_P) + Ψ̃(φ_P + φ_N)`.
#[inline]
pub fn potential(phi_p: f64, phi_n: f64, well_scale: f64) -> f64 {
    double_well(phi_p, well_scale) + double_well(phi_p + phi_n, well_scale)
}

/// Derivative of the implicit (convex) part with respect to the
/// proliferative fraction: `3c_Ψ φ_P + 3c_Ψ(φ_P + φ_N) = 6c_Ψ φ_P + 3c_Ψ φ_N`.
///
/// Linear in `φ_P`, which is what makes the implicit treatment a single
/// linear solve.
#[inline]
pub fn split_deriv_implicit(phi_p: f64, phi_n: f64, well_scale: f64) -> f64 {
    well_convex_deriv(phi_p, well_scale) + well_convex_deriv(phi_p + phi_n, well_scale)
}

/// Derivative of the explicit (concave) part with respect to the
/// proliferative fraction: `Ψ̃_e'(φ_P) + Ψ̃_e'(φ_P + φ_N)`.
#[inline]
pub fn split_deriv_explicit(phi_p: f64, phi_n: f64, well_scale: f64) -> f64 {
    well_concave_deriv(phi_p, well_scale) + well_concave_deriv(phi_p + phi_n, well_scale)
}

/// Degenerate mobility `m_P = φ_P²(1-φ_T)²`; inputs clamped to [0, 1].
#[inline]
pub fn mobility(phi_p: f64, phi_t: f64) -> f64 {
    let p = clamp01(phi_p);
    let t = clamp01(phi_t);
    let g = p * (1.0 - t);
    g * g
}

/// Heaviside with `H(0) = 0`: decay activates strictly below the threshold.
#[inline]
fn heaviside(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Saturating drug response `φ_τ/(φ_τ + φ_τ50)`.
#[inline]
pub fn hill_response(agent_count: f64, half_response: f64) -> f64 {
    if agent_count <= 0.0 {
        return 0.0;
    }
    agent_count / (agent_count + half_response)
}

/// Reaction rate of the proliferative fraction: nutrient-driven Gompertz
/// growth on the interface, drug-induced decay over the volume, and
/// starvation-driven conversion to the necrotic fraction.
pub fn source_proliferative(
    phi_p: f64,
    nutrient: f64,
    agent_count: f64,
    growth: &GrowthParameters,
    therapy: &TherapyEffectParameters,
) -> f64 {
    let p = clamp01(phi_p);
    let sigma = nutrient.max(0.0);
    let gompertz = growth.proliferation_rate
        * sigma
        * p.powf(growth.growth_exponent)
        * ((1.0 + growth.gompertz_reg) / (p + growth.gompertz_reg)).ln();
    let drug = therapy.efficacy / therapy.patient_weight_kg
        * p
        * hill_response(agent_count, therapy.half_response_count);
    let starvation =
        growth.necrosis_rate * heaviside(growth.necrosis_nutrient_threshold - sigma) * p;
    gompertz - drug - starvation
}

/// Necrotic growth rate; exactly mirrors the starvation decay in
/// [`source_proliferative`].
pub fn source_necrotic(phi_p: f64, nutrient: f64, growth: &GrowthParameters) -> f64 {
    let p = clamp01(phi_p);
    let sigma = nutrient.max(0.0);
    growth.necrosis_rate * heaviside(growth.necrosis_nutrient_threshold - sigma) * p
}

/// Discrete free energy
/// `E = ∫ [Ψ(φ_P, φ_T) + (ε_P²/2)|∂φ_P/∂r|²] 4πr²dr`
/// with the potential integrated elementwise by Gauss quadrature (exact for
/// the piecewise-linear fields) and the gradient term via the unit-weight
/// stiffness matrix.
pub fn free_energy(
    grid: &RadialGrid,
    unit_stiffness: &SymTridiag,
    phi_p: &[f64],
    phi_n: &[f64],
    interface_width: f64,
    well_scale: f64,
) -> f64 {
    let pot = integrate_pointwise(grid, phi_p, phi_n, |p, n| potential(p, n, well_scale));
    let grad = 0.5 * interface_width * interface_width * unit_stiffness.quadratic_form(phi_p);
    pot + grad
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{assemble_unit_stiffness, RadialGrid};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn growth_p1() -> GrowthParameters {
        GrowthParameters {
            mobility_factor: 5e-4,
            proliferation_rate: 0.38,
            growth_exponent: 2.0,
            necrosis_rate: 0.1,
            necrosis_nutrient_threshold: 0.2,
            interface_width: 5e-4,
            well_scale: 2.0,
            gompertz_reg: 0.1,
            chemotaxis: 0.0,
        }
    }

    fn therapy_p1() -> TherapyEffectParameters {
        TherapyEffectParameters {
            efficacy: 4.49,
            half_response_count: 1.012e16,
            patient_weight_kg: 80.0,
        }
    }

    #[test]
    fn double_well_vanishes_at_wells() {
        assert_eq!(double_well(0.0, 2.0), 0.0);
        assert_eq!(double_well(1.0, 2.0), 0.0);
        assert_relative_eq!(double_well(0.5, 2.0), 0.125);
        assert_relative_eq!(double_well(-0.1, 2.0), 0.0242, max_relative = 1e-12);
    }

    #[test]
    fn split_parts_sum_to_well_on_dense_grid() {
        let c = 2.0;
        let mut phi = -0.5;
        while phi <= 1.5 {
            let sum = well_convex(phi, c) + well_concave(phi, c);
            assert!(
                (sum - double_well(phi, c)).abs() <= 1e-14,
                "split identity violated at {phi}: {sum} vs {}",
                double_well(phi, c)
            );
            phi += 1e-3;
        }
    }

    #[test]
    fn convex_derivative_closed_form() {
        assert_relative_eq!(well_convex_deriv(1.0, 2.0), 6.0);
        // Derivative identity Ψ̃_i' + Ψ̃_e' = Ψ̃'.
        for phi in [-0.3, 0.0, 0.2, 0.5, 0.9, 1.3] {
            assert_relative_eq!(
                well_convex_deriv(phi, 2.0) + well_concave_deriv(phi, 2.0),
                double_well_deriv(phi, 2.0),
                epsilon = 1e-13
            );
        }
    }

    #[test]
    fn concave_part_stays_concave_on_unit_interval() {
        let mut phi = 0.0;
        while phi <= 1.0 {
            assert!(
                well_concave_second_deriv(phi, 2.0) <= 0.0,
                "Ψ̃_e'' positive at {phi}"
            );
            phi += 1e-3;
        }
        // And the window is sharp: outside [1/2-1/√3, 1/2+1/√3] it turns convex.
        assert!(well_concave_second_deriv(0.5 - 1.0 / 3f64.sqrt() - 0.01, 2.0) > 0.0);
        assert!(well_concave_second_deriv(0.5 + 1.0 / 3f64.sqrt() + 0.01, 2.0) > 0.0);
    }

    #[test]
    fn mobility_degenerates_at_pure_phases() {
        assert_eq!(mobility(0.0, 0.3), 0.0);
        assert_eq!(mobility(1.0, 1.0), 0.0);
        assert_relative_eq!(mobility(0.5, 0.5), 0.0625);
    }

    #[test]
    fn mobility_maximum_on_diagonal_is_one_sixteenth() {
        let mut max = 0.0f64;
        for i in 0..=1000 {
            let phi = i as f64 / 1000.0;
            max = max.max(mobility(phi, phi));
        }
        assert_relative_eq!(max, 0.0625, max_relative = 1e-6);
    }

    #[test]
    fn source_terms_have_expected_signs_and_values() {
        let g = growth_p1();
        let t = therapy_p1();

        // Saturated tumor with nutrients and no drug: log term kills growth.
        let s = source_proliferative(1.0, 1.0, 0.0, &g, &t);
        assert_relative_eq!(s, 0.0, epsilon = 1e-15);

        // Half-maximal drug response.
        let drug_only = {
            let mut g0 = g.clone();
            g0.proliferation_rate = 0.0;
            g0.necrosis_rate = 0.0;
            source_proliferative(0.7, 1.0, t.half_response_count, &g0, &t)
        };
        assert_relative_eq!(drug_only, -(4.49 / 80.0) * 0.7 * 0.5, max_relative = 1e-12);

        // Starved tissue: growth plus the -0.05/d necrosis contribution.
        let s = source_proliferative(0.5, 0.1, 0.0, &g, &t);
        let gompertz = 0.38 * 0.1 * 0.25 * (1.1f64 / 0.6).ln();
        assert_relative_eq!(s, gompertz - 0.05, max_relative = 1e-12);
        assert_relative_eq!(
            source_necrotic(0.5, 0.1, &g),
            0.05,
            max_relative = 1e-12
        );
    }

    #[test]
    fn necrotic_source_mirrors_proliferative_decay() {
        let g = growth_p1();
        let t = therapy_p1();
        for (phi, sigma) in [(0.3, 0.05), (0.8, 0.19), (1.0, 0.0)] {
            let total = source_proliferative(phi, sigma, 0.0, &g, &t)
                + source_necrotic(phi, sigma, &g);
            let gompertz = g.proliferation_rate
                * sigma
                * phi.powf(g.growth_exponent)
                * ((1.0 + g.gompertz_reg) / (phi + g.gompertz_reg)).ln();
            assert_relative_eq!(total, gompertz, max_relative = 1e-12, epsilon = 1e-15);
        }
    }

    #[test]
    fn necrotic_source_inactive_above_threshold() {
        let g = growth_p1();
        assert_eq!(source_necrotic(0.5, 0.21, &g), 0.0);
        // Threshold itself does not activate decay (H(0) = 0).
        assert_eq!(source_necrotic(0.5, 0.2, &g), 0.0);
        assert_eq!(source_necrotic(0.0, 0.1, &g), 0.0);
    }

    #[test]
    fn gompertz_term_nonnegative_therapy_nonpositive() {
        let g = growth_p1();
        let t = therapy_p1();
        for i in 0..=100 {
            let phi = i as f64 / 100.0;
            let growth_only = {
                let mut g0 = g.clone();
                g0.necrosis_rate = 0.0;
                source_proliferative(phi, 1.0, 0.0, &g0, &t)
            };
            assert!(growth_only >= 0.0, "growth negative at {phi}");
            let therapy_only = {
                let mut g0 = g.clone();
                g0.proliferation_rate = 0.0;
                g0.necrosis_rate = 0.0;
                source_proliferative(phi, 1.0, 1e17, &g0, &t)
            };
            assert!(therapy_only <= 0.0, "therapy positive at {phi}");
        }
    }

    #[test]
    fn free_energy_of_pure_phases_is_zero() {
        let grid = RadialGrid::new(50, 0.04).unwrap();
        let k = assemble_unit_stiffness(&grid);
        let zeros = vec![0.0; grid.n_nodes()];
        let ones = vec![1.0; grid.n_nodes()];
        assert_eq!(free_energy(&grid, &k, &zeros, &zeros, 5e-4, 2.0), 0.0);
        assert_relative_eq!(
            free_energy(&grid, &k, &ones, &zeros, 5e-4, 2.0),
            0.0,
            epsilon = 1e-18
        );
    }

    #[test]
    fn free_energy_uniform_half_phase_closed_form() {
        let grid = RadialGrid::new(400, 0.04).unwrap();
        let k = assemble_unit_stiffness(&grid);
        let half = vec![0.5; grid.n_nodes()];
        let zeros = vec![0.0; grid.n_nodes()];
        let e = free_energy(&grid, &k, &half, &zeros, 5e-4, 2.0);
        let ball = 4.0 / 3.0 * std::f64::consts::PI * 0.04f64.powi(3);
        assert_relative_eq!(e, 0.25 * ball, max_relative = 1e-12);
        assert_relative_eq!(e, 6.702_064_327_658e-5, max_relative = 1e-10);
    }

    proptest! {
        #[test]
        fn split_identity_holds_everywhere(phi in -1.0..2.0f64, c in 1e-3..10.0f64) {
            let sum = well_convex(phi, c) + well_concave(phi, c);
            let well = double_well(phi, c);
            prop_assert!((sum - well).abs() <= 1e-12 * well.abs().max(1.0));
        }

        #[test]
        fn mobility_bounded_and_nonnegative(p in -0.5..1.5f64, t in -0.5..1.5f64) {
            let m = mobility(p, t);
            prop_assert!(m >= 0.0);
            prop_assert!(m <= 1.0);
        }
    }
}
