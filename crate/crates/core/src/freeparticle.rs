//! The time-discretized free particle on a line, and positive-definite
//! quadratic actions in general.
//!
//! With `n` time steps of length `Δt`, `q₀ = 0` fixed and `q_n` free, the
//! histories are velocity tuples `(v₁, ..., v_n)` with action
//! `Σ m v_i² Δt / 2` and measure `(Δt/Δx)^n dv₁⋯dv_n`. Setting
//! `K = 2πΔt / (m Δx²)`:
//!
//! ```text
//! ln Z = (n/2)(ln K - ln λ)      ⟨A⟩ = n/(2λ) = n iℏ/2
//! Φ = (1/λ)(n/2)(ln λ - ln K)    Q = (n/2)(ln K - ln λ + 1)
//! ```
//!
//! `ln Z` here is the sum of `n` principal per-axis logarithms, which leaves
//! `(-π, π]` once `n|arg λ|/2` exceeds `π`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{self, Classicality, EnsembleReport, HistorySpace};
use crate::oscillatory::richardson_halving;
use crate::{Error, Result};

/// Discretized free particle. Serialized as `{"n","mass","dt","dx","hbar"}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelJson", into = "ModelJson")]
pub struct FreeParticleModel {
    pub n: usize,
    pub mass: f64,
    pub dt: f64,
    /// Length scale making the path measure dimensionless.
    pub dx_scale: f64,
    pub hbar: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelJson {
    n: usize,
    mass: f64,
    dt: f64,
    dx: f64,
    hbar: f64,
}

impl TryFrom<ModelJson> for FreeParticleModel {
    type Error = Error;

    fn try_from(m: ModelJson) -> Result<Self> {
        FreeParticleModel::new(m.n, m.mass, m.dt, m.dx, m.hbar)
    }
}

impl From<FreeParticleModel> for ModelJson {
    fn from(m: FreeParticleModel) -> Self {
        ModelJson {
            n: m.n,
            mass: m.mass,
            dt: m.dt,
            dx: m.dx_scale,
            hbar: m.hbar,
        }
    }
}

impl Default for FreeParticleModel {
    /// One step with unit mass, time step, length scale and `ℏ` (so `K = 2π`).
    fn default() -> Self {
        FreeParticleModel {
            n: 1,
            mass: 1.0,
            dt: 1.0,
            dx_scale: 1.0,
            hbar: 1.0,
        }
    }
}

impl FreeParticleModel {
    pub fn new(n: usize, mass: f64, dt: f64, dx_scale: f64, hbar: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidModel("need at least one time step".into()));
        }
        for (name, v) in [("mass", mass), ("dt", dt), ("dx", dx_scale), ("hbar", hbar)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidModel(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        let model = FreeParticleModel {
            n,
            mass,
            dt,
            dx_scale,
            hbar,
        };
        let k = model.k();
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::InvalidModel(format!(
                "K = 2π dt/(m dx²) must be positive and finite, got {k}"
            )));
        }
        Ok(model)
    }

    /// Model with the given `n` and `K`, using `m = Δt = ℏ = 1`.
    pub fn with_k(n: usize, k: f64, hbar: f64) -> Result<Self> {
        // K = 2π / dx²
        FreeParticleModel::new(n, 1.0, 1.0, (2.0 * std::f64::consts::PI / k).sqrt(), hbar)
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// `K = 2πΔt / (m Δx²)`.
    pub fn k(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.dt / (self.mass * self.dx_scale * self.dx_scale)
    }

    /// `λ = 1/(iℏ)`.
    pub fn classicality(&self) -> Classicality {
        Classicality::quantum(self.hbar).expect("validated hbar")
    }

    pub fn with_steps(self, n: usize) -> Result<Self> {
        FreeParticleModel::new(n, self.mass, self.dt, self.dx_scale, self.hbar)
    }

    pub fn with_hbar(self, hbar: f64) -> Result<Self> {
        FreeParticleModel::new(self.n, self.mass, self.dt, self.dx_scale, hbar)
    }

    pub fn with_dx_scale(self, dx_scale: f64) -> Result<Self> {
        FreeParticleModel::new(self.n, self.mass, self.dt, dx_scale, self.hbar)
    }

    fn half_n(&self) -> f64 {
        self.n as f64 / 2.0
    }
}

/// `ln Z = (n/2)(ln K - Ln λ)`.
pub fn log_z_closed(model: &FreeParticleModel, lambda: &Classicality) -> Complex64 {
    log_z_at(model, lambda.lambda())
}

/// [`log_z_closed`] at an arbitrary complex `λ`, for derivative pipelines.
pub fn log_z_at(model: &FreeParticleModel, lambda: Complex64) -> Complex64 {
    (Complex64::new(model.k().ln(), 0.0) - lambda.ln()) * model.half_n()
}

/// `⟨A⟩ = n iℏ/2`, independent of `m`, `Δt` and `Δx`.
pub fn expected_action_closed(model: &FreeParticleModel) -> Complex64 {
    Complex64::new(0.0, model.n as f64 * model.hbar / 2.0)
}

/// `⟨A⟩ = n / (2λ)` at any admissible `λ`.
pub fn expected_action_at(model: &FreeParticleModel, lambda: &Classicality) -> Complex64 {
    model.half_n() / lambda.lambda()
}

/// `Φ = (1/λ)(n/2)(Ln λ - ln K)`.
pub fn free_action_closed(model: &FreeParticleModel, lambda: &Classicality) -> Complex64 {
    let l = lambda.lambda();
    (l.ln() - model.k().ln()) * model.half_n() / l
}

/// `Q = (n/2)(ln K - Ln λ + 1)`.
pub fn quantropy_closed(model: &FreeParticleModel, lambda: &Classicality) -> Complex64 {
    (Complex64::new(model.k().ln() + 1.0, 0.0) - lambda.lambda().ln()) * model.half_n()
}

/// All four closed forms at `λ`.
pub fn closed_report(model: &FreeParticleModel, lambda: &Classicality) -> EnsembleReport {
    EnsembleReport {
        log_z: log_z_closed(model, lambda),
        expected_action: expected_action_at(model, lambda),
        quantropy: quantropy_closed(model, lambda),
        free_action: free_action_closed(model, lambda),
        lambda: *lambda,
    }
}

/// `A(x) = Σ c_i x_i² / 2` with all `c_i > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticAction {
    coefficients: Vec<f64>,
}

impl QuadraticAction {
    pub fn new(coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(Error::InvalidModel(
                "quadratic action needs at least one coefficient".into(),
            ));
        }
        if let Some(c) = coefficients.iter().find(|c| !(c.is_finite() && **c > 0.0)) {
            return Err(Error::InvalidModel(format!("coefficients must be positive, got {c}")));
        }
        Ok(QuadraticAction { coefficients })
    }

    /// `dim` unit coefficients, e.g. `3n` for a particle in three dimensions.
    pub fn isotropic(dim: usize) -> Result<Self> {
        QuadraticAction::new(vec![1.0; dim])
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn dimension(&self) -> usize {
        self.coefficients.len()
    }
}

/// Closed-form report over `ℝⁿ` with unit measure:
/// `ln Z = Σ ½(Ln(2π/c_i) - Ln λ)` and `⟨A⟩ = n/(2λ)`.
pub fn quadratic_action_report(action: &QuadraticAction, lambda: &Classicality) -> EnsembleReport {
    let l = lambda.lambda();
    let ln_l = l.ln();
    let log_z: Complex64 = action
        .coefficients()
        .iter()
        .map(|c| (Complex64::new((2.0 * std::f64::consts::PI / c).ln(), 0.0) - ln_l) * 0.5)
        .sum();
    let expected = action.dimension() as f64 / (2.0 * l);
    EnsembleReport::from_log_z(log_z, expected, *lambda)
}

/// A velocity-grid history space, with the damping used to build it.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureSpace {
    pub space: HistorySpace,
    /// Damping `ε` folded into the weights as `e^{-ε v²}` per axis.
    pub epsilon: f64,
    pub half_width: f64,
    pub grid_points: usize,
}

/// One velocity axis on `[-W, W]` with trapezoid weights
/// `(Δt/Δx) · h · e^{-ε v²}` and action `m v² Δt / 2`.
pub fn axis_space(
    model: &FreeParticleModel,
    half_width: f64,
    grid_points: usize,
    epsilon: f64,
) -> Result<HistorySpace> {
    if grid_points < 32 {
        return Err(Error::InvalidModel(format!(
            "need at least 32 grid points, got {grid_points}"
        )));
    }
    if !(half_width.is_finite() && half_width > 0.0) {
        return Err(Error::InvalidModel(format!(
            "grid half-width must be positive, got {half_width}"
        )));
    }
    if !(epsilon.is_finite() && epsilon >= 0.0) {
        return Err(Error::InvalidModel(format!(
            "damping must be non-negative, got {epsilon}"
        )));
    }
    let h = 2.0 * half_width / (grid_points - 1) as f64;
    let jacobian = model.dt / model.dx_scale;
    let mut ids = Vec::with_capacity(grid_points);
    let mut weights = Vec::with_capacity(grid_points);
    let mut actions = Vec::with_capacity(grid_points);
    for j in 0..grid_points {
        let v = -half_width + j as f64 * h;
        let end = if j == 0 || j + 1 == grid_points { 0.5 } else { 1.0 };
        ids.push(format!("v{j}"));
        weights.push(jacobian * h * end * (-epsilon * v * v).exp());
        actions.push(0.5 * model.mass * v * v * model.dt);
    }
    HistorySpace::new(ids, weights, actions)
}

/// Full tensor-grid space over `n` velocity axes (`grid_points^n` histories).
pub fn quadrature_space(
    model: &FreeParticleModel,
    grid_half_width: f64,
    grid_points: usize,
    epsilon: f64,
) -> Result<QuadratureSpace> {
    let cap = ensemble::max_histories();
    let size = (grid_points as u128).checked_pow(model.n as u32).unwrap_or(u128::MAX);
    if size > cap as u128 {
        return Err(Error::SizeOverflow { size, cap });
    }
    let axis = axis_space(model, grid_half_width, grid_points, epsilon)?;
    let mut space = axis.clone();
    for _ in 1..model.n {
        space = ensemble::product_space_with_cap(&space, &axis, cap)?;
    }
    Ok(QuadratureSpace {
        space,
        epsilon,
        half_width: grid_half_width,
        grid_points,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridMode {
    /// One history per point of the `n`-dimensional grid.
    Tensor,
    /// One axis evaluated and scaled by `n`; valid because the integrand factorizes.
    Factorized,
}

/// Velocity-grid settings. `None` fields are derived from the model and `λ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSettings {
    pub grid_points: usize,
    pub half_width: Option<f64>,
    /// Smallest damping level; levels are `ε·2^(L-1), ..., 2ε, ε`.
    pub epsilon: Option<f64>,
    pub levels: usize,
    pub mode: GridMode,
}

/// `e^{-SUPPRESSION}` bounds both the grid-edge truncation and the aliasing error.
const SUPPRESSION: f64 = 20.0;

impl QuadratureSettings {
    pub fn new(grid_points: usize, mode: GridMode) -> Self {
        QuadratureSettings {
            grid_points,
            half_width: None,
            epsilon: None,
            levels: 3,
            mode,
        }
    }

    /// Half-width and smallest damping for this model and `λ`.
    ///
    /// In units where the action is `λ̂ y²/2` (`y = v √(|λ| m Δt)`): eight
    /// widths for real `λ` with no damping; otherwise `W = √(πN)` and
    /// `ε = SUPPRESSION/(πN)`, which puts the edge value `e^{-εW²}` and the
    /// trapezoid aliasing term `e^{-(πN/W)² ε}` both at `e^{-SUPPRESSION}`.
    pub fn resolve(&self, model: &FreeParticleModel, lambda: &Classicality) -> (f64, f64) {
        let l = lambda.lambda();
        let scale = l.norm() * model.mass * model.dt;
        let n = self.grid_points as f64;
        let (w, eps) = if l.im == 0.0 {
            (8.0, 0.0)
        } else {
            (
                (std::f64::consts::PI * n).sqrt(),
                SUPPRESSION / (std::f64::consts::PI * n),
            )
        };
        let half_width = self.half_width.unwrap_or(w / scale.sqrt());
        let epsilon = self.epsilon.unwrap_or(eps * scale);
        (half_width, epsilon)
    }
}

/// One damping level of a quadrature report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DampedReport {
    pub epsilon: f64,
    pub report: EnsembleReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureReport {
    /// Components extrapolated to `ε → 0`.
    pub report: EnsembleReport,
    pub levels: Vec<DampedReport>,
    pub half_width: f64,
    pub grid_points: usize,
    pub mode: GridMode,
}

/// Report computed from a velocity grid, extrapolated in the damping.
pub fn quadrature_report(
    model: &FreeParticleModel,
    lambda: &Classicality,
    settings: &QuadratureSettings,
) -> Result<QuadratureReport> {
    let (half_width, eps_min) = settings.resolve(model, lambda);
    let levels = if eps_min == 0.0 { 1 } else { settings.levels.max(1) };
    let epsilons: Vec<f64> = (0..levels)
        .map(|k| eps_min * (1u64 << (levels - 1 - k)) as f64)
        .collect();

    let damped: Vec<DampedReport> = epsilons
        .par_iter()
        .map(|&eps| {
            let report = match settings.mode {
                GridMode::Tensor => {
                    let q = quadrature_space(model, half_width, settings.grid_points, eps)?;
                    ensemble::report(&q.space, lambda)?
                }
                GridMode::Factorized => {
                    let axis = axis_space(model, half_width, settings.grid_points, eps)?;
                    let one = ensemble::report(&axis, lambda)?;
                    let n = model.n as f64;
                    EnsembleReport {
                        log_z: one.log_z * n,
                        expected_action: one.expected_action * n,
                        quantropy: one.quantropy * n,
                        free_action: one.free_action * n,
                        lambda: *lambda,
                    }
                }
            };
            Ok(DampedReport { epsilon: eps, report })
        })
        .collect::<Result<_>>()?;

    let extrapolate = |pick: fn(&EnsembleReport) -> Complex64| {
        let samples: Vec<Complex64> = damped.iter().map(|d| pick(&d.report)).collect();
        *richardson_halving(&samples).last().expect("at least one level")
    };
    let report = EnsembleReport {
        log_z: extrapolate(|r| r.log_z),
        expected_action: extrapolate(|r| r.expected_action),
        quantropy: extrapolate(|r| r.quantropy),
        free_action: extrapolate(|r| r.free_action),
        lambda: *lambda,
    };
    Ok(QuadratureReport {
        report,
        levels: damped,
        half_width,
        grid_points: settings.grid_points,
        mode: settings.mode,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn lam(re: f64, im: f64) -> Classicality {
        Classicality::new(c(re, im)).unwrap()
    }

    #[test]
    fn model_validation() {
        assert!(FreeParticleModel::new(0, 1.0, 1.0, 1.0, 1.0).is_err());
        assert!(FreeParticleModel::new(1, -1.0, 1.0, 1.0, 1.0).is_err());
        assert!(FreeParticleModel::new(1, 1.0, f64::INFINITY, 1.0, 1.0).is_err());
        let m = FreeParticleModel::default();
        assert!((m.k() - 2.0 * PI).abs() < 1e-15);
        assert!((FreeParticleModel::with_k(3, 1.0, 1.0).unwrap().k() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn model_json_schema() {
        let m = FreeParticleModel::from_json(r#"{"n":3,"mass":2.0,"dt":0.5,"dx":1.5,"hbar":1.0}"#).unwrap();
        assert_eq!(m.n, 3);
        assert_eq!(m.dx_scale, 1.5);
        let text = serde_json::to_string(&m).unwrap();
        assert!(text.contains("\"dx\":1.5"));
        assert!(FreeParticleModel::from_json(r#"{"n":0,"mass":2.0,"dt":0.5,"dx":1.5,"hbar":1.0}"#).is_err());
    }

    #[allow(clippy::approx_constant)]
    #[test]
    fn log_z_examples() {
        let m = FreeParticleModel::with_k(2, 1.0, 1.0).unwrap();
        assert!(log_z_closed(&m, &lam(1.0, 0.0)).norm() < 1e-14);

        let m = FreeParticleModel::default();
        let z = log_z_closed(&m, &m.classicality());
        assert!((z - c(0.5 * (2.0 * PI).ln(), PI / 4.0)).norm() < 1e-15);
        assert!((z.re - 0.91894).abs() < 1e-5 && (z.im - 0.78540).abs() < 1e-5);

        let m = FreeParticleModel::with_k(4, 2.0 * PI, 1.0).unwrap();
        let z = log_z_closed(&m, &lam(2.0, 0.0));
        assert!((z.re - 2.0 * PI.ln()).abs() < 1e-13);
        assert!((z.re - 2.28946).abs() < 1e-5);
    }

    #[test]
    fn expected_action_examples() {
        let m = FreeParticleModel::default();
        assert_eq!(expected_action_closed(&m), c(0.0, 0.5));
        let m = FreeParticleModel::new(6, 3.0, 0.1, 7.0, 2.0).unwrap();
        assert_eq!(expected_action_closed(&m), c(0.0, 6.0));
        assert!((expected_action_at(&m, &m.classicality()) - c(0.0, 6.0)).norm() < 1e-15);
    }

    #[test]
    fn free_action_examples() {
        let m = FreeParticleModel::with_k(2, 1.0, 1.0).unwrap();
        assert!(free_action_closed(&m, &lam(1.0, 0.0)).norm() < 1e-14);

        let m = FreeParticleModel::default();
        let l = m.classicality();
        let phi = free_action_closed(&m, &l);
        // (1/(-i))·½(-iπ/2 - ln 2π) = π/4 - (i/2) ln 2π
        assert!((phi - c(PI / 4.0, -0.5 * (2.0 * PI).ln())).norm() < 1e-15);
        assert!((phi + log_z_closed(&m, &l) / l.lambda()).norm() < 1e-12);
    }

    #[test]
    fn free_action_vanishes_classically() {
        let base = FreeParticleModel::with_k(2, 2.0 * PI, 1.0).unwrap();
        let mut last = f64::INFINITY;
        for hbar in [1.0, 0.1, 0.01, 1e-3, 1e-4] {
            let m = base.with_hbar(hbar).unwrap();
            let phi = free_action_closed(&m, &m.classicality()).norm();
            assert!(phi < last);
            last = phi;
        }
        assert!(last < 1e-2);
    }

    #[allow(clippy::approx_constant)]
    #[test]
    fn quantropy_examples() {
        let m = FreeParticleModel::with_k(2, 1.0, 1.0).unwrap();
        assert!((quantropy_closed(&m, &lam(1.0, 0.0)) - 1.0).norm() < 1e-14);

        let m = FreeParticleModel::default();
        let q = quantropy_closed(&m, &m.classicality());
        assert!((q - c(0.5 * ((2.0 * PI).ln() + 1.0), PI / 4.0)).norm() < 1e-15);
        assert!((q.re - 1.41894).abs() < 1e-5 && (q.im - 0.78540).abs() < 1e-5);
    }

    #[test]
    fn closed_forms_satisfy_identities() {
        for (n, hbar) in [(1, 1.0), (7, 0.3), (40, 2.5)] {
            let m = FreeParticleModel::new(n, 1.3, 0.2, 0.7, hbar).unwrap();
            let r = closed_report(&m, &m.classicality());
            let (q, phi) = r.identity_residuals();
            assert!(q < 1e-12 && phi < 1e-12, "{q} {phi}");
        }
    }

    #[test]
    fn quadratic_report_examples() {
        let r = quadratic_action_report(&QuadraticAction::new(vec![1.0]).unwrap(), &lam(1.0, 0.0));
        assert!((r.expected_action - 0.5).norm() < 1e-15);

        let l = Classicality::quantum(1.0).unwrap();
        let r = quadratic_action_report(&QuadraticAction::new(vec![3.0, 7.0, 11.0]).unwrap(), &l);
        assert!((r.expected_action - c(0.0, 1.5)).norm() < 1e-15);

        let n = 5;
        let hbar = 0.7;
        let l = Classicality::quantum(hbar).unwrap();
        let r = quadratic_action_report(&QuadraticAction::isotropic(3 * n).unwrap(), &l);
        assert!((r.expected_action - c(0.0, 1.5 * n as f64 * hbar)).norm() < 1e-14);
    }

    #[test]
    fn quadratic_rejects_non_positive() {
        assert!(QuadraticAction::new(vec![1.0, 0.0]).is_err());
        assert!(QuadraticAction::new(vec![]).is_err());
    }

    #[test]
    fn quadratic_matches_free_particle() {
        // c = m Δt on each axis; the free particle adds the (Δt/Δx) Jacobian per axis
        let m = FreeParticleModel::new(3, 2.0, 0.5, 0.8, 1.0).unwrap();
        let l = m.classicality();
        let q = quadratic_action_report(&QuadraticAction::new(vec![m.mass * m.dt; 3]).unwrap(), &l);
        let jac = 3.0 * (m.dt / m.dx_scale).ln();
        assert!((q.log_z + jac - log_z_closed(&m, &l)).norm() < 1e-13);
        assert_eq!(q.expected_action, expected_action_at(&m, &l));
    }

    #[test]
    fn real_grid_matches_closed_form() {
        let m = FreeParticleModel::default();
        let l = lam(1.0, 0.0);
        let q = quadrature_space(&m, 8.0, 2048, 0.0).unwrap();
        let r = ensemble::report(&q.space, &l).unwrap();
        let exact = closed_report(&m, &l);
        for (a, b) in [
            (r.log_z, exact.log_z),
            (r.expected_action, exact.expected_action),
            (r.quantropy, exact.quantropy),
            (r.free_action, exact.free_action),
        ] {
            assert!((a - b).norm() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn imaginary_grid_matches_closed_form() {
        let m = FreeParticleModel::default();
        let l = m.classicality();
        let r = quadrature_report(&m, &l, &QuadratureSettings::new(2048, GridMode::Tensor)).unwrap();
        let exact = closed_report(&m, &l);
        assert!((r.report.log_z - exact.log_z).norm() < 1e-3);
        assert!((r.report.expected_action - exact.expected_action).norm() < 1e-3);
        assert!((r.report.quantropy - exact.quantropy).norm() < 1e-3);
        assert!((r.report.free_action - exact.free_action).norm() < 1e-3);
        assert_eq!(r.levels.len(), 3);
        assert!(r.levels.windows(2).all(|w| w[1].epsilon < w[0].epsilon));
    }

    #[test]
    fn two_axis_product_adds_expected_action() {
        let m = FreeParticleModel::default();
        let l = lam(1.0, 0.0);
        let axis = axis_space(&m, 8.0, 64, 0.0).unwrap();
        let pair = ensemble::product_space(&axis, &axis).unwrap();
        let one = ensemble::report(&axis, &l).unwrap();
        let two = ensemble::report(&pair, &l).unwrap();
        assert!((two.expected_action - one.expected_action * 2.0).norm() < 1e-13);
    }

    #[test]
    fn tensor_grid_respects_cap() {
        let m = FreeParticleModel::default().with_steps(4).unwrap();
        let err = quadrature_space(&m, 8.0, 64, 0.0).unwrap_err();
        assert!(matches!(err, Error::SizeOverflow { .. }));
    }

    #[test]
    fn axis_space_validation() {
        let m = FreeParticleModel::default();
        assert!(axis_space(&m, 8.0, 16, 0.0).is_err());
        assert!(axis_space(&m, 0.0, 64, 0.0).is_err());
        assert!(axis_space(&m, 8.0, 64, -1.0).is_err());
    }
}
