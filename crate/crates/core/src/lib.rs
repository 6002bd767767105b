//! Spherically symmetric phase-field simulator for lung tumor growth under
//! immunotherapy.
//!
//! The model couples a Cahn-Hilliard equation for the proliferative cell
//! fraction to a necrotic species, a quasi-static interstitial nutrient
//! balance, and a scalar pharmacokinetic ODE for the immunotherapeutic
//! agent, all reduced to radial coordinates under the spherical measure
//! `4πr²dr`. On top of the forward model sit scenario presets, therapy
//! what-if studies, and a derivative-free calibration loop for the
//! patient-specific parameters.

pub mod calibration;
pub mod constitutive;
pub mod drug;
pub mod error;
pub mod linsolve;
pub mod mesh;
pub mod nutrient;
pub mod observables;
pub mod params;
pub mod scenario;
pub mod stepper;

pub use error::{Error, Result};
