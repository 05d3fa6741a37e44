//! Complex-weighted history ensembles and the statistical-mechanics analogy.
//!
//! A finite [`HistorySpace`] assigns a measure weight and a real action to each
//! history. Weighting histories by `exp(-λ A(x))` and normalizing gives the
//! Feynman amplitudes; for real `λ = β` the same construction is the Boltzmann
//! distribution. From the partition function `Z(λ)` follow the quantropy `Q`,
//! the expected action `⟨A⟩` and the free action `Φ`:
//!
//! ```text
//! ⟨A⟩ = -d ln Z / dλ      Q = λ⟨A⟩ + ln Z      Φ = -(1/λ) ln Z
//! ```
//!
//! Modules:
//! - [`ensemble`]: history spaces, Feynman weights, reports, derivative identities.
//! - [`stationarity`]: Lagrange residuals and directional stationarity checks.
//! - [`oscillatory`]: regularized complex Gaussian integrals.
//! - [`freeparticle`]: the time-discretized free particle and quadratic actions.
//! - [`thermo`]: Boltzmann reports and the thermal side of the analogy.
//! - [`cli`]: the command-line runner behind the `quantropy` binary.

pub mod cli;
pub mod complex_json;
pub mod ensemble;
mod error;
pub mod freeparticle;
pub mod oscillatory;
pub mod quadrature;
pub mod stationarity;
pub mod thermo;

pub use ensemble::{Classicality, ComplexEnsemble, EnsembleReport, HistorySpace};
pub use error::{Error, Result};
pub use freeparticle::{FreeParticleModel, QuadraticAction};
pub use oscillatory::{RegulatorKind, RegulatorSpec};
pub use stationarity::LagrangeResidual;
pub use thermo::ThermalReport;

pub use num_complex::Complex64;
