//! Boltzmann distributions over a [`HistorySpace`] whose action field is read
//! as an energy, in units where Boltzmann's constant is 1.

use serde::{Deserialize, Serialize};

use crate::ensemble::{self, Classicality, HistorySpace};
use crate::{Error, Result};

/// Relative tolerance for `S = β⟨E⟩ + ln Z` and `F = -ln Z / β`.
pub const THERMAL_IDENTITY_TOL: f64 = 1e-10;

/// Tolerance used by [`check_analogy`].
pub const ANALOGY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalReport {
    pub log_z: f64,
    pub expected_energy: f64,
    pub entropy: f64,
    pub free_energy: f64,
    pub beta: f64,
}

fn validate_beta(beta: f64) -> Result<()> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::InvalidClassicality(format!(
            "beta must be positive and finite, got {beta}"
        )));
    }
    Ok(())
}

/// `(ln Σ w e^{-β(E - E₀)}, E₀)` with `E₀` the minimum energy.
fn shifted_log_partition(space: &HistorySpace, beta: f64) -> (f64, f64) {
    let e0 = space.min_action();
    let zs: f64 = space
        .weights()
        .iter()
        .zip(space.actions())
        .map(|(w, e)| w * (-beta * (e - e0)).exp())
        .sum();
    (zs.ln(), e0)
}

/// `ln Σ w e^{-βE}`.
pub fn log_partition(space: &HistorySpace, beta: f64) -> f64 {
    let (ln_zs, e0) = shifted_log_partition(space, beta);
    ln_zs - beta * e0
}

/// Boltzmann probabilities (densities against the weights) at coolness `beta`.
pub fn boltzmann_distribution(space: &HistorySpace, beta: f64) -> Result<Vec<f64>> {
    validate_beta(beta)?;
    let (ln_zs, e0) = shifted_log_partition(space, beta);
    Ok(space
        .actions()
        .iter()
        .map(|e| (-beta * (e - e0) - ln_zs).exp())
        .collect())
}

/// `-Σ w p ln p` for an arbitrary probability density `p` (`0 ln 0 = 0`).
pub fn entropy_of(space: &HistorySpace, p: &[f64]) -> f64 {
    -space
        .weights()
        .iter()
        .zip(p)
        .filter(|(_, p)| **p > 0.0)
        .map(|(w, p)| w * p * p.ln())
        .sum::<f64>()
}

pub fn boltzmann_report(space: &HistorySpace, beta: f64) -> Result<ThermalReport> {
    validate_beta(beta)?;
    let (ln_zs, e0) = shifted_log_partition(space, beta);
    let log_z = ln_zs - beta * e0;
    let mut entropy = 0.0;
    let mut expected_energy = 0.0;
    for (w, e) in space.weights().iter().zip(space.actions()) {
        let ln_p = -beta * (e - e0) - ln_zs;
        let p = ln_p.exp();
        if p > 0.0 {
            entropy -= w * p * ln_p;
        }
        expected_energy += w * e * p;
    }
    let free_energy = expected_energy - entropy / beta;
    let report = ThermalReport {
        log_z,
        expected_energy,
        entropy,
        free_energy,
        beta,
    };
    let s_res = (entropy - (beta * expected_energy + log_z)).abs();
    if s_res > THERMAL_IDENTITY_TOL * (1.0 + (beta * expected_energy).abs() + log_z.abs()) {
        return Err(Error::InvariantViolation(format!("S - (β⟨E⟩ + ln Z) = {s_res:e}")));
    }
    let f_res = (free_energy + log_z / beta).abs();
    if f_res > THERMAL_IDENTITY_TOL * (1.0 + free_energy.abs() + expected_energy.abs()) {
        return Err(Error::InvariantViolation(format!("F + ln Z / β = {f_res:e}")));
    }
    Ok(report)
}

/// `⟨E⟩ = (d/2)·n·T`: one half `T` per quadratic degree of freedom.
pub fn ideal_gas_expected_energy(particles: usize, dimensions: usize, temperature: f64) -> f64 {
    dimensions as f64 / 2.0 * particles as f64 * temperature
}

/// The classicality with the same numeric value as `beta`.
pub fn analogy_substitution(thermal_beta: f64) -> Result<Classicality> {
    Classicality::thermal(thermal_beta)
}

/// Largest field-by-field gap between the quantum report at `λ = β` and the
/// thermal report at `β`, imaginary parts included.
pub fn analogy_discrepancy(space: &HistorySpace, beta: f64) -> Result<f64> {
    let thermal = boltzmann_report(space, beta)?;
    let quantum = ensemble::report(space, &analogy_substitution(beta)?)?;
    let gaps = [
        (quantum.log_z - thermal.log_z).norm(),
        (quantum.expected_action - thermal.expected_energy).norm(),
        (quantum.quantropy - thermal.entropy).norm(),
        (quantum.free_action - thermal.free_energy).norm(),
    ];
    Ok(gaps.into_iter().fold(0.0, f64::max))
}

/// Whether the quantum engine at real `λ = β` reproduces the thermal engine
/// within [`ANALOGY_TOL`].
pub fn check_analogy(space: &HistorySpace, beta: f64) -> Result<bool> {
    Ok(analogy_discrepancy(space, beta)? <= ANALOGY_TOL)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_state_report() {
        let s = HistorySpace::from_actions(&[0.0, 1.0]).unwrap();
        let r = boltzmann_report(&s, 1.0).unwrap();
        let e = (-1.0f64).exp();
        assert!((r.log_z - (1.0 + e).ln()).abs() < 1e-15);
        assert!((r.expected_energy - e / (1.0 + e)).abs() < 1e-15);
        assert!((r.entropy - (r.expected_energy + r.log_z)).abs() < 1e-15);
        assert!(check_analogy(&s, 1.0).unwrap());
    }

    #[test]
    fn degenerate_states() {
        let n = 6;
        let s = HistorySpace::from_actions(&vec![0.0; n]).unwrap();
        let beta = 2.5;
        let r = boltzmann_report(&s, beta).unwrap();
        let ln_n = (n as f64).ln();
        assert!((r.entropy - ln_n).abs() < 1e-14);
        assert_eq!(r.expected_energy, 0.0);
        assert!((r.free_energy + ln_n / beta).abs() < 1e-14);
    }

    #[test]
    fn single_state() {
        let s = HistorySpace::from_actions(&[4.2]).unwrap();
        let r = boltzmann_report(&s, 0.7).unwrap();
        assert!(r.entropy.abs() < 1e-15);
        assert!((r.free_energy - 4.2).abs() < 1e-14);
    }

    #[test]
    fn ideal_gas() {
        assert_eq!(ideal_gas_expected_energy(1, 3, 2.0), 3.0);
        assert_eq!(ideal_gas_expected_energy(5, 1, 1.0), 2.5);
    }

    #[test]
    fn rejects_bad_beta() {
        let s = HistorySpace::from_actions(&[0.0]).unwrap();
        assert!(boltzmann_report(&s, 0.0).is_err());
        assert!(boltzmann_report(&s, f64::NAN).is_err());
        assert!(analogy_substitution(-1.0).is_err());
    }

    #[test]
    fn substitution_keeps_value() {
        let l = analogy_substitution(3.5).unwrap();
        assert_eq!(l.lambda(), num_complex::Complex64::new(3.5, 0.0));
    }

    #[test]
    fn continuum_weights_allow_negative_entropy() {
        // narrow density on a fine grid: differential entropy below zero
        let w = vec![0.01; 3];
        let s = HistorySpace::from_weights_and_actions(&w, &[0.0, 0.0, 0.0]).unwrap();
        let r = boltzmann_report(&s, 1.0).unwrap();
        assert!(r.entropy < 0.0);
        assert!((r.entropy - 0.03f64.ln()).abs() < 1e-14);
    }
}
