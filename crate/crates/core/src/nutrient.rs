//! Quasi-static interstitial nutrient solve.
//!
//! The nutrient field relaxes much faster than the tumor evolves, so each
//! tumor step solves the stationary reaction-diffusion balance
//!
//! ```text
//! -κ_i (1/r²)(r² φ_σ')' + [η_iv + α_H(1-φ_P) + α_P φ_P] φ_σ = η_vi φ_σv
//! ```
//!
//! with zero-Neumann boundaries, discretized with the radial operators. The
//! system is symmetric positive definite and tridiagonal.

use crate::constitutive::clamp01;
use crate::error::{Error, Result};
use crate::linsolve::solve_tridiag;
use crate::mesh::{assemble_stiffness, assemble_weighted_mass, RadialGrid, SymTridiag};
use crate::params::NutrientParameters;

/// Solve for the interstitial nutrient given the proliferative fraction.
pub fn solve_interstitial(
    grid: &RadialGrid,
    phi_p: &[f64],
    p: &NutrientParameters,
) -> Result<Vec<f64>> {
    let n = grid.n_nodes();
    if phi_p.len() != n {
        return Err(Error::invalid_input(format!(
            "proliferative field has {} entries for {} nodes",
            phi_p.len(),
            n
        )));
    }
    let coeff: Vec<f64> = phi_p
        .iter()
        .map(|&v| {
            let p_clamped = clamp01(v);
            p.reverse_exchange
                + p.healthy_consumption * (1.0 - p_clamped)
                + p.tumor_consumption * p_clamped
        })
        .collect();
    if coeff.iter().all(|&c| c <= 0.0) {
        return Err(Error::Singular(
            "nutrient reaction coefficient vanishes everywhere".into(),
        ));
    }

    let ones = vec![1.0; n];
    let kappa_k = assemble_stiffness(grid, &ones)?;
    let reaction = assemble_weighted_mass(grid, &coeff)?;
    let system = SymTridiag::linear_combination(&[(p.diffusion, &kappa_k), (1.0, &reaction)]);

    // Constant source η_vi·φ_σv integrates against the volume weights, which
    // are exactly the mass-matrix row sums; uniform solutions are then
    // reproduced to rounding.
    let source = p.vascular_exchange * p.vascular_level;
    let rhs: Vec<f64> = grid.volume_weights().iter().map(|w| source * w).collect();

    let sigma = solve_tridiag(&system, &rhs)?;

    // Residual guard: the direct solve should sit at rounding level.
    let mut res = vec![0.0; n];
    system.apply(&sigma, &mut res);
    let mut rnorm = 0.0f64;
    let mut bnorm = 0.0f64;
    for i in 0..n {
        rnorm += (res[i] - rhs[i]) * (res[i] - rhs[i]);
        bnorm += rhs[i] * rhs[i];
    }
    if bnorm > 0.0 && !(rnorm.sqrt() <= 1e-10 * bnorm.sqrt()) {
        return Err(Error::NoConvergence {
            residual: rnorm.sqrt() / bnorm.sqrt(),
            iterations: 0,
        });
    }
    Ok(sigma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params(healthy: f64, tumor: f64, vascular_level: f64) -> NutrientParameters {
        NutrientParameters {
            diffusion: 1e-5,
            vascular_exchange: 1.0,
            reverse_exchange: 0.0,
            healthy_consumption: healthy,
            tumor_consumption: tumor,
            vascular_level,
        }
    }

    #[test]
    fn uniform_healthy_tissue_is_exact() {
        let grid = RadialGrid::new(200, 0.04).unwrap();
        let phi = vec![0.0; grid.n_nodes()];
        let sigma = solve_interstitial(&grid, &phi, &params(4.0, 1.0, 4.0)).unwrap();
        for s in sigma {
            assert_relative_eq!(s, 1.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn uniform_tumor_is_exact() {
        let grid = RadialGrid::new(200, 0.04).unwrap();
        let phi = vec![1.0; grid.n_nodes()];
        let sigma = solve_interstitial(&grid, &phi, &params(4.0, 1.0, 4.0)).unwrap();
        for s in sigma {
            assert_relative_eq!(s, 4.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn uniform_monotonicity_in_tumor_fraction() {
        // With healthy consumption above tumor consumption, raising the
        // uniform tumor fraction raises the nutrient level.
        let grid = RadialGrid::new(100, 0.04).unwrap();
        let p = params(4.0, 1.0, 4.0);
        let mut last = 0.0;
        for frac in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let phi = vec![frac; grid.n_nodes()];
            let sigma = solve_interstitial(&grid, &phi, &p).unwrap();
            let expected = 4.0 / (4.0 * (1.0 - frac) + frac);
            assert_relative_eq!(sigma[0], expected, max_relative = 1e-12);
            assert!(sigma[0] > last);
            last = sigma[0];
        }
    }

    #[test]
    fn bounded_by_maximum_principle() {
        let grid = RadialGrid::new(300, 0.04).unwrap();
        // Tumor ball occupying the inner quarter of the domain.
        let phi: Vec<f64> = grid
            .nodes()
            .iter()
            .map(|&r| if r < 0.01 { 1.0 } else { 0.0 })
            .collect();
        let p = params(1.0, 4.0, 0.75);
        let sigma = solve_interstitial(&grid, &phi, &p).unwrap();
        let lo = p.vascular_exchange * p.vascular_level / 4.0;
        let hi = p.vascular_exchange * p.vascular_level / 1.0;
        for (&s, &r) in sigma.iter().zip(grid.nodes()) {
            assert!(s >= lo - 1e-12 && s <= hi + 1e-12, "sigma {s} at r {r} outside [{lo},{hi}]");
            assert!(s >= 0.0);
        }
        // The core is depleted: close to the interior balance, far field near
        // the healthy balance.
        assert!(sigma[0] < 0.25, "core {}", sigma[0]);
        assert!(*sigma.last().unwrap() > 0.7, "far field {}", sigma.last().unwrap());
    }

    #[test]
    fn zero_source_gives_zero_field() {
        let grid = RadialGrid::new(50, 0.04).unwrap();
        let phi = vec![0.3; grid.n_nodes()];
        let mut p = params(4.0, 1.0, 4.0);
        p.vascular_exchange = 0.0;
        let sigma = solve_interstitial(&grid, &phi, &p).unwrap();
        for s in sigma {
            assert_eq!(s, 0.0);
        }
    }

    #[test]
    fn vanishing_reaction_coefficient_is_rejected() {
        let grid = RadialGrid::new(50, 0.04).unwrap();
        let phi = vec![1.0; grid.n_nodes()];
        // Tumor everywhere with zero tumor consumption: coefficient vanishes.
        let p = params(4.0, 0.0, 4.0);
        assert!(matches!(
            solve_interstitial(&grid, &phi, &p),
            Err(Error::Singular(_))
        ));
    }
}
