//! Finite history spaces and the quantropy calculus over them.
//!
//! Every complex logarithm here is the principal one. The per-history branch of
//! `ln a(x)` is not re-derived from `a(x)`; it is stored alongside the amplitude
//! as `b(x) = -λ A(x) - Ln Z`, which makes `exp(b(x)) = a(x)` hold by
//! construction.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{complex_json, Error, Result};

/// Default cap on the number of histories a product space may hold.
pub const DEFAULT_MAX_HISTORIES: usize = 1_000_000;

/// Environment variable overriding [`DEFAULT_MAX_HISTORIES`].
pub const MAX_HISTORIES_ENV: &str = "QUANTROPY_MAX_HISTORIES";

/// `|Z|` below this fraction of `Σ |w e^{-λA}|` is treated as exact cancellation.
pub const CANCELLATION_FLOOR: f64 = 1e-13;

/// Amplitudes with modulus below this contribute nothing to the quantropy (`0 ln 0 = 0`).
pub const ZERO_AMPLITUDE: f64 = 1e-300;

/// Tolerance on `Σ w a = 1` for a constructed ensemble.
pub const NORMALIZATION_TOL: f64 = 1e-10;

/// Relative tolerance for the `Q = λ⟨A⟩ + ln Z` and `Φ = -ln Z / λ` checks.
pub const IDENTITY_TOL: f64 = 1e-10;

/// Default relative step for [`expected_action_via_derivative`].
pub const DEFAULT_DERIVATIVE_STEP: f64 = 1e-6;

/// A finite set of histories, each with a positive measure weight and a real
/// action.
///
/// When used by the thermal engine the action field is read as an energy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpaceJson", into = "SpaceJson")]
pub struct HistorySpace {
    ids: Vec<String>,
    weights: Vec<f64>,
    actions: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct SpaceJson {
    histories: Vec<HistoryJson>,
}

#[derive(Serialize, Deserialize)]
struct HistoryJson {
    id: String,
    #[serde(default = "unit_weight")]
    weight: f64,
    action: f64,
}

fn unit_weight() -> f64 {
    1.0
}

impl TryFrom<SpaceJson> for HistorySpace {
    type Error = Error;

    fn try_from(json: SpaceJson) -> Result<Self> {
        let mut ids = Vec::with_capacity(json.histories.len());
        let mut weights = Vec::with_capacity(json.histories.len());
        let mut actions = Vec::with_capacity(json.histories.len());
        for h in json.histories {
            ids.push(h.id);
            weights.push(h.weight);
            actions.push(h.action);
        }
        HistorySpace::new(ids, weights, actions)
    }
}

impl From<HistorySpace> for SpaceJson {
    fn from(space: HistorySpace) -> Self {
        let histories = space
            .ids
            .into_iter()
            .zip(space.weights)
            .zip(space.actions)
            .map(|((id, weight), action)| HistoryJson { id, weight, action })
            .collect();
        SpaceJson { histories }
    }
}

impl HistorySpace {
    pub fn new(ids: Vec<String>, weights: Vec<f64>, actions: Vec<f64>) -> Result<Self> {
        if ids.is_empty() {
            return Err(Error::InvalidSpace("a history space needs at least one history".into()));
        }
        if ids.len() != weights.len() || ids.len() != actions.len() {
            return Err(Error::InvalidSpace(format!(
                "length mismatch: {} ids, {} weights, {} actions",
                ids.len(),
                weights.len(),
                actions.len()
            )));
        }
        for (id, &w) in ids.iter().zip(&weights) {
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::InvalidSpace(format!(
                    "weight of `{id}` must be positive and finite, got {w}"
                )));
            }
        }
        for (id, a) in ids.iter().zip(&actions) {
            if !a.is_finite() {
                return Err(Error::NonFiniteAction(id.clone()));
            }
        }
        Ok(HistorySpace { ids, weights, actions })
    }

    /// Unit-weight space with ids `x0, x1, ...`.
    pub fn from_actions(actions: &[f64]) -> Result<Self> {
        let ids = (0..actions.len()).map(|i| format!("x{i}")).collect();
        HistorySpace::new(ids, vec![1.0; actions.len()], actions.to_vec())
    }

    pub fn from_weights_and_actions(weights: &[f64], actions: &[f64]) -> Result<Self> {
        let ids = (0..actions.len()).map(|i| format!("x{i}")).collect();
        HistorySpace::new(ids, weights.to_vec(), actions.to_vec())
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("history space serializes")
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn actions(&self) -> &[f64] {
        &self.actions
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn min_action(&self) -> f64 {
        self.actions.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Same histories with every action shifted by `c`.
    pub fn shifted(&self, c: f64) -> Result<Self> {
        let actions = self.actions.iter().map(|a| a + c).collect();
        HistorySpace::new(self.ids.clone(), self.weights.clone(), actions)
    }
}

/// The classicality `λ`, with `ℏ` recorded when `λ = 1/(iℏ)`.
///
/// Admissible values satisfy `λ ≠ 0` and `Re λ ≥ 0`. Positive real `λ` is the
/// thermal case (`λ = β`); purely imaginary `λ` is the quantum case.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Classicality {
    #[serde(with = "complex_json")]
    lambda: Complex64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    hbar: Option<f64>,
}

impl Classicality {
    pub fn new(lambda: Complex64) -> Result<Self> {
        if !(lambda.re.is_finite() && lambda.im.is_finite()) {
            return Err(Error::InvalidClassicality(format!(
                "lambda must be finite, got {lambda}"
            )));
        }
        if lambda == Complex64::new(0.0, 0.0) {
            return Err(Error::InvalidClassicality("lambda must be nonzero".into()));
        }
        if lambda.re < 0.0 {
            return Err(Error::InvalidClassicality(format!(
                "Re(lambda) must be >= 0, got {lambda}"
            )));
        }
        Ok(Classicality { lambda, hbar: None })
    }

    /// `λ = 1/(iℏ) = -i/ℏ`.
    pub fn quantum(hbar: f64) -> Result<Self> {
        if !(hbar.is_finite() && hbar > 0.0) {
            return Err(Error::InvalidClassicality(format!(
                "hbar must be positive and finite, got {hbar}"
            )));
        }
        let lambda = Complex64::new(0.0, -1.0 / hbar);
        Ok(Classicality {
            lambda,
            hbar: Some(hbar),
        })
    }

    /// Real classicality `λ = β`.
    pub fn thermal(beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::InvalidClassicality(format!(
                "beta must be positive and finite, got {beta}"
            )));
        }
        Classicality::new(Complex64::new(beta, 0.0))
    }

    /// Attach `ℏ` to an existing `λ`; requires `|λ - 1/(iℏ)| ≤ 1e-12 |λ|`.
    pub fn with_hbar(self, hbar: f64) -> Result<Self> {
        let expected = Complex64::new(0.0, -1.0 / hbar);
        if hbar.is_nan() || hbar <= 0.0 || (self.lambda - expected).norm() > 1e-12 * self.lambda.norm() {
            return Err(Error::InvalidClassicality(format!(
                "lambda {} is not 1/(i*{hbar})",
                self.lambda
            )));
        }
        Ok(Classicality {
            hbar: Some(hbar),
            ..self
        })
    }

    pub fn lambda(&self) -> Complex64 {
        self.lambda
    }

    pub fn hbar(&self) -> Option<f64> {
        self.hbar
    }

    pub fn is_real(&self) -> bool {
        self.lambda.im == 0.0
    }
}

/// Normalized complex amplitudes over a history space, with the branch of
/// `ln a(x)` recorded explicitly.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexEnsemble {
    space: HistorySpace,
    amplitudes: Vec<Complex64>,
    log_amplitudes: Vec<Complex64>,
}

impl ComplexEnsemble {
    /// Build from amplitudes and an explicit branch record; both invariants are checked.
    pub fn from_parts(space: HistorySpace, amplitudes: Vec<Complex64>, log_amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != space.len() || log_amplitudes.len() != space.len() {
            return Err(Error::InvariantViolation(format!(
                "expected {} amplitudes and logs, got {} and {}",
                space.len(),
                amplitudes.len(),
                log_amplitudes.len()
            )));
        }
        for ((id, a), b) in space.ids().iter().zip(&amplitudes).zip(&log_amplitudes) {
            if (b.exp() - a).norm() > 1e-12 * (1.0 + a.norm()) {
                return Err(Error::InvariantViolation(format!("exp(b) != a at history `{id}`")));
            }
        }
        let ens = ComplexEnsemble {
            space,
            amplitudes,
            log_amplitudes,
        };
        let total = ens.normalization();
        if (total - 1.0).norm() > NORMALIZATION_TOL {
            return Err(Error::NotNormalized {
                re: total.re,
                im: total.im,
            });
        }
        Ok(ens)
    }

    /// Build from amplitudes alone, taking the principal logarithm of each.
    pub fn from_amplitudes(space: HistorySpace, amplitudes: Vec<Complex64>) -> Result<Self> {
        let logs = amplitudes
            .iter()
            .map(|a| {
                if a.norm() == 0.0 {
                    Complex64::new(f64::NEG_INFINITY, 0.0)
                } else {
                    a.ln()
                }
            })
            .collect();
        ComplexEnsemble::from_parts(space, amplitudes, logs)
    }

    pub fn space(&self) -> &HistorySpace {
        &self.space
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn log_amplitudes(&self) -> &[Complex64] {
        &self.log_amplitudes
    }

    /// `Σ w a`.
    pub fn normalization(&self) -> Complex64 {
        self.space
            .weights()
            .iter()
            .zip(&self.amplitudes)
            .map(|(w, a)| a * w)
            .sum()
    }
}

/// `(ln Z, ⟨A⟩, Q, Φ)` at one classicality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleReport {
    #[serde(with = "complex_json")]
    pub log_z: Complex64,
    #[serde(with = "complex_json")]
    pub expected_action: Complex64,
    #[serde(with = "complex_json")]
    pub quantropy: Complex64,
    #[serde(with = "complex_json")]
    pub free_action: Complex64,
    pub lambda: Classicality,
}

impl EnsembleReport {
    /// Complete a report from `ln Z` and `⟨A⟩` using `Q = λ⟨A⟩ + ln Z` and `Φ = -ln Z / λ`.
    pub fn from_log_z(log_z: Complex64, expected_action: Complex64, lambda: Classicality) -> Self {
        let l = lambda.lambda();
        EnsembleReport {
            log_z,
            expected_action,
            quantropy: l * expected_action + log_z,
            free_action: -log_z / l,
            lambda,
        }
    }

    /// Residuals of `Q - (λ⟨A⟩ + ln Z)` and `Φ + ln Z / λ`.
    pub fn identity_residuals(&self) -> (f64, f64) {
        let l = self.lambda.lambda();
        let q = (self.quantropy - (l * self.expected_action + self.log_z)).norm();
        let phi = (self.free_action + self.log_z / l).norm();
        (q, phi)
    }

    fn check_identities(&self) -> Result<()> {
        let l = self.lambda.lambda();
        let (q, phi) = self.identity_residuals();
        let q_scale = 1.0 + (l * self.expected_action).norm() + self.log_z.norm();
        if q > IDENTITY_TOL * q_scale {
            return Err(Error::InvariantViolation(format!("Q - (λ⟨A⟩ + ln Z) = {q:e}")));
        }
        if phi > IDENTITY_TOL * (1.0 + self.free_action.norm()) {
            return Err(Error::InvariantViolation(format!("Φ + ln Z / λ = {phi:e}")));
        }
        Ok(())
    }
}

/// Map the imaginary part into `(-π, π]`, returning the result and the number
/// of `2πi` turns removed.
pub fn principal_wrap(z: Complex64) -> (Complex64, i64) {
    let turns = ((z.im - PI) / (2.0 * PI)).ceil();
    let k = turns as i64;
    (Complex64::new(z.re, z.im - 2.0 * PI * turns), k)
}

/// Nearest integer `k` with `z ≈ 2πik`, and the distance `|z - 2πik|`.
pub fn winding(z: Complex64) -> (i64, f64) {
    let k = (z.im / (2.0 * PI)).round();
    let residual = (z - Complex64::new(0.0, 2.0 * PI * k)).norm();
    (k as i64, residual)
}

/// Principal `Ln Z` decomposed as `-λ·shift + Ln Zs + 2πi·turns`.
struct LogPartition {
    log_z: Complex64,
    shift: f64,
    log_zs: Complex64,
    turns: i64,
}

fn log_partition_parts(space: &HistorySpace, lambda: Complex64) -> Result<LogPartition> {
    let shift = if lambda.re > 0.0 { space.min_action() } else { 0.0 };
    let mut z = Complex64::new(0.0, 0.0);
    let mut scale = 0.0;
    for (w, a) in space.weights().iter().zip(space.actions()) {
        let term = (-lambda * (a - shift)).exp() * w;
        scale += term.norm();
        z += term;
    }
    let magnitude = z.norm();
    if !(magnitude > 1e-300 && magnitude > CANCELLATION_FLOOR * scale) {
        return Err(Error::ZeroPartitionFunction { magnitude, scale });
    }
    let log_zs = z.ln();
    let (log_z, k) = principal_wrap(-lambda * shift + log_zs);
    Ok(LogPartition {
        log_z,
        shift,
        log_zs,
        turns: -k,
    })
}

/// Principal `Ln Σ w e^{-λA}` for an arbitrary complex `λ`.
pub fn log_partition(space: &HistorySpace, lambda: Complex64) -> Result<Complex64> {
    Ok(log_partition_parts(space, lambda)?.log_z)
}

fn feynman_parts(space: &HistorySpace, lambda: Complex64) -> Result<(ComplexEnsemble, Complex64)> {
    let parts = log_partition_parts(space, lambda)?;
    // b = -λA - Ln Z, written against the shifted sum to avoid cancelling large terms
    let offset = parts.log_zs + Complex64::new(0.0, 2.0 * PI * parts.turns as f64);
    let log_amplitudes: Vec<Complex64> = space
        .actions()
        .iter()
        .map(|a| -lambda * (a - parts.shift) - offset)
        .collect();
    let amplitudes = log_amplitudes.iter().map(|b| b.exp()).collect();
    let ens = ComplexEnsemble {
        space: space.clone(),
        amplitudes,
        log_amplitudes,
    };
    let total = ens.normalization();
    if (total - 1.0).norm() > NORMALIZATION_TOL {
        return Err(Error::NotNormalized {
            re: total.re,
            im: total.im,
        });
    }
    Ok((ens, parts.log_z))
}

/// Feynman amplitudes `a(x) = e^{-λA(x)} / Z` with `b(x) = -λA(x) - Ln Z`.
pub fn feynman_weights(space: &HistorySpace, lambda: &Classicality) -> Result<ComplexEnsemble> {
    Ok(feynman_parts(space, lambda.lambda())?.0)
}

/// `Q = -Σ w a b`, skipping vanishing amplitudes.
pub fn quantropy(ensemble: &ComplexEnsemble) -> Complex64 {
    let space = ensemble.space();
    -space
        .weights()
        .iter()
        .zip(ensemble.amplitudes())
        .zip(ensemble.log_amplitudes())
        .filter(|((_, a), _)| a.norm() >= ZERO_AMPLITUDE)
        .map(|((w, a), b)| a * b * w)
        .sum::<Complex64>()
}

/// `⟨A⟩ = Σ w A a`.
pub fn expected_action(ensemble: &ComplexEnsemble) -> Complex64 {
    let space = ensemble.space();
    space
        .weights()
        .iter()
        .zip(space.actions())
        .zip(ensemble.amplitudes())
        .map(|((w, act), a)| a * (w * act))
        .sum()
}

/// Full report, with both identities checked before returning.
pub fn report(space: &HistorySpace, lambda: &Classicality) -> Result<EnsembleReport> {
    let (ens, log_z) = feynman_parts(space, lambda.lambda())?;
    let out = EnsembleReport {
        log_z,
        expected_action: expected_action(&ens),
        quantropy: quantropy(&ens),
        free_action: -log_z / lambda.lambda(),
        lambda: *lambda,
    };
    out.check_identities()?;
    Ok(out)
}

/// Central difference of `ln Z(λ)` along `λ/|λ|`, with step
/// `h = step · max(1, |λ|)`. Truncation error is `O(h²)`.
///
/// Fails with [`Error::StepTooLarge`] when the two samples of `ln Z` sit on
/// opposite sides of a branch cut.
pub fn central_log_derivative<F>(log_z: F, lambda: Complex64, step: f64) -> Result<Complex64>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::InvalidClassicality(format!(
            "derivative step must be positive, got {step}"
        )));
    }
    let modulus = lambda.norm();
    let h = step * modulus.max(1.0);
    if h >= modulus {
        return Err(Error::InvalidClassicality(format!("step {h:e} reaches lambda = 0")));
    }
    let dir = lambda / modulus;
    let plus = log_z(lambda + dir * h)?;
    let minus = log_z(lambda - dir * h)?;
    let diff = plus - minus;
    if diff.im.abs() > PI {
        return Err(Error::StepTooLarge { jump: diff.im });
    }
    Ok(diff / (dir * (2.0 * h)))
}

/// `⟨A⟩ = -d ln Z / dλ` by central differences of the principal `Ln Z`.
pub fn expected_action_via_derivative(space: &HistorySpace, lambda: &Classicality, step: f64) -> Result<Complex64> {
    let d = central_log_derivative(|l| log_partition(space, l), lambda.lambda(), step)?;
    Ok(-d)
}

/// Cap on product-space size, from `QUANTROPY_MAX_HISTORIES` or the default.
pub fn max_histories() -> usize {
    std::env::var(MAX_HISTORIES_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<f64>().ok())
        .filter(|v| v.is_finite() && *v >= 1.0)
        .map(|v| v as usize)
        .unwrap_or(DEFAULT_MAX_HISTORIES)
}

/// Cartesian product: weights multiply, actions add.
pub fn product_space(s1: &HistorySpace, s2: &HistorySpace) -> Result<HistorySpace> {
    product_space_with_cap(s1, s2, max_histories())
}

pub fn product_space_with_cap(s1: &HistorySpace, s2: &HistorySpace, cap: usize) -> Result<HistorySpace> {
    let size = s1.len() as u128 * s2.len() as u128;
    if size > cap as u128 {
        return Err(Error::SizeOverflow { size, cap });
    }
    let n = size as usize;
    let mut ids = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    let mut actions = Vec::with_capacity(n);
    for i in 0..s1.len() {
        for j in 0..s2.len() {
            ids.push(format!("{}*{}", s1.ids[i], s2.ids[j]));
            weights.push(s1.weights[i] * s2.weights[j]);
            actions.push(s1.actions[i] + s2.actions[j]);
        }
    }
    HistorySpace::new(ids, weights, actions)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn two_state() -> HistorySpace {
        HistorySpace::from_actions(&[0.0, 1.0]).unwrap()
    }

    #[test]
    fn rejects_bad_spaces() {
        assert!(matches!(HistorySpace::from_actions(&[]), Err(Error::InvalidSpace(_))));
        assert!(matches!(
            HistorySpace::from_weights_and_actions(&[0.0], &[1.0]),
            Err(Error::InvalidSpace(_))
        ));
        assert!(matches!(
            HistorySpace::from_actions(&[1.0, f64::NAN]),
            Err(Error::NonFiniteAction(id)) if id == "x1"
        ));
    }

    #[test]
    fn classicality_admissibility() {
        assert!(Classicality::new(c(0.0, 0.0)).is_err());
        assert!(Classicality::new(c(-0.1, 1.0)).is_err());
        assert!(Classicality::new(c(0.0, -2.0)).is_ok());
        let q = Classicality::quantum(0.5).unwrap();
        assert_eq!(q.lambda(), c(0.0, -2.0));
        assert_eq!(q.hbar(), Some(0.5));
        assert!(Classicality::new(c(0.0, -2.0)).unwrap().with_hbar(0.5).is_ok());
        assert!(Classicality::new(c(0.0, -2.0)).unwrap().with_hbar(0.4).is_err());
    }

    #[test]
    fn single_history_is_certain() {
        let s = HistorySpace::from_actions(&[7.0]).unwrap();
        for l in [c(1.0, 0.0), c(0.0, -1.0), c(0.3, 2.0)] {
            let ens = feynman_weights(&s, &Classicality::new(l).unwrap()).unwrap();
            assert!((ens.amplitudes()[0] - 1.0).norm() < 1e-15);
            // the branch record may sit on another sheet: b ∈ 2πiℤ
            let (_, b_res) = winding(ens.log_amplitudes()[0]);
            assert!(b_res < 1e-14);
            let (k, q_res) = winding(quantropy(&ens));
            assert!(q_res < 1e-14);
            assert!((Complex64::new(0.0, 2.0 * PI * k as f64) + ens.log_amplitudes()[0]).norm() < 1e-13);
            assert!((expected_action(&ens) - 7.0).norm() < 1e-14);
        }
    }

    #[test]
    fn two_state_boltzmann_weights() {
        let ens = feynman_weights(&two_state(), &Classicality::thermal(1.0).unwrap()).unwrap();
        let e = (-1.0f64).exp();
        let a = ens.amplitudes();
        assert!((a[0] - 1.0 / (1.0 + e)).norm() < 1e-15);
        assert!((a[1] - e / (1.0 + e)).norm() < 1e-15);
        assert!((a[0].re - 0.731059).abs() < 1e-6);
        assert!((a[1].re - 0.268941).abs() < 1e-6);
        assert!((expected_action(&ens).re - 0.268941).abs() < 1e-6);
    }

    #[test]
    fn exact_destructive_interference() {
        let s = HistorySpace::from_actions(&[0.0, PI]).unwrap();
        let err = feynman_weights(&s, &Classicality::quantum(1.0).unwrap()).unwrap_err();
        assert!(matches!(err, Error::ZeroPartitionFunction { .. }));
    }

    #[test]
    fn uniform_quantropy_is_ln_n() {
        for n in [2usize, 5, 17] {
            let s = HistorySpace::from_actions(&vec![0.0; n]).unwrap();
            let ens = feynman_weights(&s, &Classicality::thermal(1.0).unwrap()).unwrap();
            assert!((quantropy(&ens) - (n as f64).ln()).norm() < 1e-13);
        }
    }

    #[test]
    fn two_state_report() {
        let r = report(&two_state(), &Classicality::thermal(1.0).unwrap()).unwrap();
        let e = (-1.0f64).exp();
        let lnz = (1.0 + e).ln();
        assert!((r.log_z - lnz).norm() < 1e-15);
        assert!((r.log_z.re - 0.313262).abs() < 1e-6);
        assert!((r.quantropy.re - 0.582203).abs() < 1e-6);
        assert!((r.free_action + lnz).norm() < 1e-15);
        // Shannon entropy of the Boltzmann distribution
        let p = [1.0 / (1.0 + e), e / (1.0 + e)];
        let shannon: f64 = -p.iter().map(|p| p * p.ln()).sum::<f64>();
        assert!((r.quantropy - shannon).norm() < 1e-14);
    }

    #[test]
    fn zero_action_single_history_report() {
        let s = HistorySpace::from_actions(&[0.0]).unwrap();
        let r = report(&s, &Classicality::quantum(1.0).unwrap()).unwrap();
        for z in [r.log_z, r.expected_action, r.quantropy, r.free_action] {
            assert!(z.norm() < 1e-15);
        }
    }

    #[test]
    fn report_log_z_is_principal() {
        // Large actions at real-positive lambda with an imaginary part wind the phase many times
        let s = HistorySpace::from_actions(&[100.0, 101.5, 103.0]).unwrap();
        let l = Classicality::new(c(0.5, 3.0)).unwrap();
        let r = report(&s, &l).unwrap();
        assert!(r.log_z.im > -PI && r.log_z.im <= PI);
        let direct: Complex64 = s.actions().iter().map(|a| (-l.lambda() * a).exp()).sum();
        assert!((r.log_z - direct.ln()).norm() < 1e-10);
    }

    #[test]
    fn overflow_prone_actions_stay_finite() {
        let s = HistorySpace::from_actions(&[-2000.0, -1999.0, 500.0]).unwrap();
        let r = report(&s, &Classicality::thermal(1.0).unwrap()).unwrap();
        let e = (-1.0f64).exp();
        assert!((r.log_z.re - (2000.0 + (1.0 + e).ln())).abs() < 1e-9);
        assert!(r.quantropy.re.is_finite());
    }

    #[test]
    fn derivative_single_history() {
        let s = HistorySpace::from_actions(&[3.0]).unwrap();
        for l in [c(1.0, 0.0), c(0.0, -1.0), c(2.0, -5.0)] {
            let d = expected_action_via_derivative(&s, &Classicality::new(l).unwrap(), 1e-5).unwrap();
            assert!((d - 3.0).norm() < 1e-8, "{l}: {d}");
        }
    }

    #[test]
    fn derivative_two_state() {
        let s = two_state();
        let l = Classicality::thermal(1.0).unwrap();
        let d = expected_action_via_derivative(&s, &l, DEFAULT_DERIVATIVE_STEP).unwrap();
        let ens = feynman_weights(&s, &l).unwrap();
        assert!((d - expected_action(&ens)).norm() < 1e-8);
    }

    #[test]
    fn derivative_detects_branch_straddle() {
        // Z(-i) = e^{iπ} sits on the cut; the two samples land on opposite sides
        let s = HistorySpace::from_actions(&[PI]).unwrap();
        let err = expected_action_via_derivative(&s, &Classicality::quantum(1.0).unwrap(), 1e-6).unwrap_err();
        assert!(matches!(err, Error::StepTooLarge { .. }));
        // slightly off the cut, the same step is fine
        let s = HistorySpace::from_actions(&[PI - 0.01]).unwrap();
        let d = expected_action_via_derivative(&s, &Classicality::quantum(1.0).unwrap(), 1e-6).unwrap();
        assert!((d - (PI - 0.01)).norm() < 1e-8);
    }

    #[test]
    fn product_with_unit_space_is_identity() {
        let s = HistorySpace::from_weights_and_actions(&[0.5, 2.0, 1.0], &[1.0, -2.0, 0.25]).unwrap();
        let unit = HistorySpace::from_actions(&[0.0]).unwrap();
        let p = product_space(&s, &unit).unwrap();
        assert_eq!(p.weights(), s.weights());
        assert_eq!(p.actions(), s.actions());
    }

    #[test]
    fn product_2x2_sums_actions() {
        let a = HistorySpace::from_actions(&[0.0, 1.0]).unwrap();
        let b = HistorySpace::from_weights_and_actions(&[2.0, 3.0], &[10.0, 20.0]).unwrap();
        let p = product_space(&a, &b).unwrap();
        assert_eq!(p.actions(), &[10.0, 20.0, 11.0, 21.0]);
        assert_eq!(p.weights(), &[2.0, 3.0, 2.0, 3.0]);
        assert_eq!(p.ids()[3], "x1*x1");
    }

    #[test]
    fn product_2x3_log_z_adds() {
        let a = HistorySpace::from_actions(&[0.0, 1.0]).unwrap();
        let b = HistorySpace::from_actions(&[0.5, -1.0, 2.0]).unwrap();
        let l = c(1.0, 0.0);
        let p = product_space(&a, &b).unwrap();
        let direct_a: f64 = [0.0f64, 1.0].iter().map(|x| (-x).exp()).sum::<f64>().ln();
        let direct_b: f64 = [0.5f64, -1.0, 2.0].iter().map(|x| (-x).exp()).sum::<f64>().ln();
        let lp = log_partition(&p, l).unwrap();
        assert!((lp - (direct_a + direct_b)).norm() < 1e-12);
    }

    #[test]
    fn product_respects_cap() {
        let a = HistorySpace::from_actions(&[0.0; 10]).unwrap();
        let err = product_space_with_cap(&a, &a, 99).unwrap_err();
        assert_eq!(err, Error::SizeOverflow { size: 100, cap: 99 });
        assert!(product_space_with_cap(&a, &a, 100).is_ok());
    }

    #[test]
    fn json_schema_round_trip() {
        let text = r#"{"histories":[{"id":"a","weight":0.5,"action":1.0},{"id":"b","action":-2.0}]}"#;
        let s = HistorySpace::from_json(text).unwrap();
        assert_eq!(s.weights(), &[0.5, 1.0]);
        assert_eq!(HistorySpace::from_json(&s.to_json()).unwrap(), s);
        assert!(HistorySpace::from_json(r#"{"histories":[]}"#).is_err());
        assert!(HistorySpace::from_json(r#"{"histories":[{"id":"a","weight":-1,"action":0}]}"#).is_err());
    }

    #[test]
    fn report_serializes_complex_as_re_im() {
        let r = report(&two_state(), &Classicality::quantum(1.0).unwrap()).unwrap();
        let v: serde_json::Value = serde_json::to_value(r).unwrap();
        assert!(v["log_z"]["re"].is_f64());
        assert!(v["quantropy"]["im"].is_f64());
        assert_eq!(v["lambda"]["lambda"]["im"], -1.0);
        let back: EnsembleReport = serde_json::from_value(v).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn explicit_ensemble_checks_invariants() {
        let s = two_state();
        let half = c(0.5, 0.0);
        assert!(ComplexEnsemble::from_amplitudes(s.clone(), vec![half, half]).is_ok());
        assert!(matches!(
            ComplexEnsemble::from_amplitudes(s.clone(), vec![half, c(0.6, 0.0)]),
            Err(Error::NotNormalized { .. })
        ));
        assert!(matches!(
            ComplexEnsemble::from_parts(s, vec![half, half], vec![half.ln(), c(0.0, 0.0)]),
            Err(Error::InvariantViolation(_))
        ));
    }

    #[test]
    fn zero_amplitude_contributes_nothing() {
        let s = two_state();
        let ens = ComplexEnsemble::from_amplitudes(s, vec![c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        assert_eq!(quantropy(&ens), c(0.0, 0.0));
    }

    #[test]
    fn wrap_helpers() {
        let (z, k) = principal_wrap(c(1.0, 7.0));
        assert_eq!(k, 1);
        assert!((z.im - (7.0 - 2.0 * PI)).abs() < 1e-15);
        let (z, k) = principal_wrap(c(0.0, PI));
        assert_eq!((z.im, k), (PI, 0));
        assert_eq!(winding(c(0.0, -4.0 * PI)).0, -2);
    }
}
