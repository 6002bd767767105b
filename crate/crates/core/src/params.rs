//! Model parameter groups: growth, therapy response, nutrient exchange, and
//! drug kinetics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Avogadro constant, 1/mol.
pub const AVOGADRO: f64 = 6.022_140_857e23;

/// Phase-field growth parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrowthParameters {
    /// Cell mobility factor, m²/d.
    pub mobility_factor: f64,
    /// Proliferation rate scaling the Gompertz term, 1/d.
    pub proliferation_rate: f64,
    /// Power-law exponent penalizing growth of small cell concentrations.
    pub growth_exponent: f64,
    /// Conversion rate of proliferative to necrotic cells, 1/d.
    pub necrosis_rate: f64,
    /// Nutrient level below which starvation decay activates.
    pub necrosis_nutrient_threshold: f64,
    /// Tumor interface width, m.
    pub interface_width: f64,
    /// Double-well scaling factor.
    pub well_scale: f64,
    /// Regularization of the Gompertz logarithm.
    pub gompertz_reg: f64,
    /// Chemotaxis factor coupling the potential to the nutrient field.
    pub chemotaxis: f64,
}

impl GrowthParameters {
    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            ("mobility_factor", self.mobility_factor),
            ("proliferation_rate", self.proliferation_rate),
            ("necrosis_rate", self.necrosis_rate),
            ("necrosis_nutrient_threshold", self.necrosis_nutrient_threshold),
            ("well_scale", self.well_scale),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0) {
                return Err(Error::config(format!("{name} must be non-negative, got {v}")));
            }
        }
        if !(self.growth_exponent >= 1.0) {
            return Err(Error::config(format!(
                "growth_exponent must be >= 1, got {}",
                self.growth_exponent
            )));
        }
        if !(self.interface_width > 0.0) {
            return Err(Error::config("interface_width must be positive"));
        }
        if !(self.gompertz_reg > 0.0) {
            return Err(Error::config("gompertz_reg must be positive"));
        }
        Ok(())
    }
}

/// Patient-specific immunotherapy response.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TherapyEffectParameters {
    /// Immunotherapeutic effect under application, kg/d.
    pub efficacy: f64,
    /// Drug amount (molecule count) for the half-maximal response.
    pub half_response_count: f64,
    /// Patient weight, kg.
    pub patient_weight_kg: f64,
}

impl TherapyEffectParameters {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("efficacy", self.efficacy),
            ("half_response_count", self.half_response_count),
            ("patient_weight_kg", self.patient_weight_kg),
        ] {
            if !(v > 0.0) {
                return Err(Error::config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Stationary interstitial nutrient model.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NutrientParameters {
    /// Nutrient diffusion in the interstitial space, m²/d.
    pub diffusion: f64,
    /// Exchange rate vasculature -> interstitial space, 1/d.
    pub vascular_exchange: f64,
    /// Exchange rate interstitial space -> vasculature, 1/d.
    pub reverse_exchange: f64,
    /// Consumption rate attributed to the non-proliferative fraction, 1/d.
    pub healthy_consumption: f64,
    /// Consumption rate attributed to the proliferative fraction, 1/d.
    pub tumor_consumption: f64,
    /// Prescribed constant vascular nutrient level.
    pub vascular_level: f64,
}

impl Default for NutrientParameters {
    fn default() -> Self {
        Self {
            diffusion: 1e-5,
            vascular_exchange: 1.0,
            reverse_exchange: 0.0,
            healthy_consumption: 4.0,
            tumor_consumption: 1.0,
            // Far-field level is vascular_exchange * vascular_level /
            // healthy_consumption = 1 with these defaults.
            vascular_level: 4.0,
        }
    }
}

impl NutrientParameters {
    pub fn validate(&self) -> Result<()> {
        if !(self.diffusion > 0.0) {
            return Err(Error::config("nutrient diffusion must be positive"));
        }
        for (name, v) in [
            ("vascular_exchange", self.vascular_exchange),
            ("reverse_exchange", self.reverse_exchange),
            ("healthy_consumption", self.healthy_consumption),
            ("tumor_consumption", self.tumor_consumption),
            ("vascular_level", self.vascular_level),
        ] {
            if !(v >= 0.0) {
                return Err(Error::config(format!("{name} must be non-negative, got {v}")));
            }
        }
        if self.healthy_consumption + self.reverse_exchange <= 0.0 {
            return Err(Error::config(
                "healthy_consumption + reverse_exchange must be positive",
            ));
        }
        Ok(())
    }
}

/// Serum kinetics and dosing of the immunotherapeutic agent.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DrugParameters {
    /// Serum half-life, days.
    pub half_life_days: f64,
    /// Molar mass of the agent, g/mol.
    pub molar_mass: f64,
    /// Administered dose per window, g.
    pub dose_grams: f64,
    /// When true (default), the influx rate is scaled by the inverse window
    /// length so each administration window delivers one full dose of
    /// molecules. When false the influx rate is the plain
    /// `N_A·d_τ/M_τ` per day, delivering `window/1 day` of a dose.
    pub full_dose_per_window: bool,
}

impl DrugParameters {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("half_life_days", self.half_life_days),
            ("molar_mass", self.molar_mass),
            ("dose_grams", self.dose_grams),
        ] {
            if !(v > 0.0) {
                return Err(Error::config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Molecule count of one full dose, `N_A·d_τ/M_τ`.
    pub fn dose_molecules(&self) -> f64 {
        AVOGADRO * self.dose_grams / self.molar_mass
    }
}

/// All model constants of one scenario.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParameters {
    pub growth: GrowthParameters,
    pub therapy: TherapyEffectParameters,
    pub nutrient: NutrientParameters,
    pub drug: DrugParameters,
}

impl ModelParameters {
    pub fn validate(&self) -> Result<()> {
        self.growth.validate()?;
        self.therapy.validate()?;
        self.nutrient.validate()?;
        self.drug.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn growth() -> GrowthParameters {
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

    #[test]
    fn validation_accepts_reference_values() {
        assert!(growth().validate().is_ok());
        assert!(NutrientParameters::default().validate().is_ok());
    }

    #[test]
    fn validation_rejects_bad_exponent_and_widths() {
        let mut g = growth();
        g.growth_exponent = 0.5;
        assert!(g.validate().is_err());
        let mut g = growth();
        g.interface_width = 0.0;
        assert!(g.validate().is_err());
    }

    #[test]
    fn dose_molecule_count() {
        let d = DrugParameters {
            half_life_days: 26.7,
            molar_mass: 146_000.0,
            dose_grams: 0.24,
            full_dose_per_window: true,
        };
        let n = d.dose_molecules();
        assert!((n - 9.899_409_6e17).abs() / n < 1e-7, "got {n:e}");
    }
}
