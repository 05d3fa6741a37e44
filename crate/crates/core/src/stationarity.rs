//! Numerical checks that Feynman amplitudes are a stationary point of the
//! quantropy under the normalization and expected-action constraints, and
//! equivalently of the free action under normalization alone.
//!
//! Variations are holomorphic: each `a(x)` is an independent complex variable
//! and tangent directions are orthogonal to the constraints under the
//! unconjugated form `Σ w u v`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ensemble::{self, feynman_weights, Classicality, ComplexEnsemble, HistorySpace};
use crate::{Error, Result};

/// Default perturbation size for [`directional_stationarity`].
pub const DEFAULT_STEP: f64 = 1e-4;

/// Amplitudes smaller than this cannot carry a smooth branch of `ln a`.
pub const MIN_AMPLITUDE: f64 = 1e-12;

const RESAMPLE_LIMIT: usize = 32;

/// Residual of `1 + ln a(x) + λA(x) + μ = 0` with `μ = Ln Z - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct LagrangeResidual {
    pub per_history: Vec<Complex64>,
    pub mu: Complex64,
    pub max_abs: f64,
}

impl LagrangeResidual {
    fn new(per_history: Vec<Complex64>, mu: Complex64) -> Self {
        let max_abs = per_history.iter().map(|r| r.norm()).fold(0.0, f64::max);
        LagrangeResidual {
            per_history,
            mu,
            max_abs,
        }
    }
}

/// Evaluate the stationarity condition on `ensemble`, using its stored branch `b(x)`.
pub fn lagrange_residual(ensemble: &ComplexEnsemble, lambda: &Classicality) -> Result<LagrangeResidual> {
    let l = lambda.lambda();
    let space = ensemble.space();
    let mu = ensemble::log_partition(space, l)? - 1.0;
    let per_history = space
        .actions()
        .iter()
        .zip(ensemble.log_amplitudes())
        .map(|(a, b)| 1.0 + b + l * a + mu)
        .collect();
    Ok(LagrangeResidual::new(per_history, mu))
}

/// Free-action form: `A(x) + (1 + ln a(x))/λ - ν = 0` with `ν = -μ/λ`.
///
/// Each entry is the corresponding [`lagrange_residual`] entry divided by `λ`,
/// so both conditions share one zero set.
pub fn free_action_residual(ensemble: &ComplexEnsemble, lambda: &Classicality) -> Result<LagrangeResidual> {
    let l = lambda.lambda();
    let space = ensemble.space();
    let nu = -(ensemble::log_partition(space, l)? - 1.0) / l;
    let per_history = space
        .actions()
        .iter()
        .zip(ensemble.log_amplitudes())
        .map(|(a, b)| a + (1.0 + b) / l - nu)
        .collect();
    Ok(LagrangeResidual::new(per_history, nu))
}

/// Which functional to vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Functional {
    /// `Q` under `⟨1⟩ = 1` and fixed `⟨A⟩`.
    Quantropy,
    /// `Φ = ⟨A⟩ - Q/λ` under `⟨1⟩ = 1` only.
    FreeAction,
}

/// Fitted expansion `F(a + sδ) - F(a) = c₁ s + c₂ s² + ...`, maximized over trials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectionalFit {
    pub max_linear: f64,
    pub max_quadratic: f64,
    pub trials: usize,
}

/// `ln(1 + z)` without cancellation for small `z`.
fn ln_1p(z: Complex64) -> Complex64 {
    let re = 0.5 * (2.0 * z.re + z.norm_sqr()).ln_1p();
    let im = z.im.atan2(1.0 + z.re);
    Complex64::new(re, im)
}

/// Random tangent direction `δ = a·u`: zero weighted sum, and zero action
/// moment when `with_action` is set. Scaled so that `max |δ/a| = 1`.
///
/// The constraints are projected out of `u` in the form `⟨f, g⟩ = Σ w a f g`
/// (unconjugated), so `δ/a` stays of order one even where `a` is tiny.
fn tangent_direction(
    rng: &mut ChaCha8Rng,
    space: &HistorySpace,
    amplitudes: &[Complex64],
    with_action: bool,
) -> Vec<Complex64> {
    let wa: Vec<Complex64> = space.weights().iter().zip(amplitudes).map(|(w, a)| a * w).collect();
    let form = |f: &dyn Fn(usize) -> Complex64, g: &dyn Fn(usize) -> Complex64| -> Complex64 {
        (0..wa.len()).map(|i| wa[i] * f(i) * g(i)).sum()
    };
    let actions = space.actions();
    let one = |_: usize| Complex64::new(1.0, 0.0);
    let mean_action = form(&one, &|i| Complex64::new(actions[i], 0.0));
    let centered: Vec<Complex64> = actions.iter().map(|a| a - mean_action).collect();
    let centered_norm = form(&|i| centered[i], &|i| centered[i]);
    let magnitude: f64 = wa.iter().zip(&centered).map(|(x, e)| x.norm() * e.norm_sqr()).sum();
    let use_action = with_action && centered_norm.norm() > 1e-10 * magnitude;

    let mut u: Vec<Complex64> = (0..space.len())
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    // two passes of Gram-Schmidt against {1, A - ⟨A⟩}; ⟨1, 1⟩ = Σ w a = 1
    for _ in 0..2 {
        let along_one = form(&|i| u[i], &one);
        for x in u.iter_mut() {
            *x -= along_one;
        }
        if use_action {
            let along_action = form(&|i| u[i], &|i| centered[i]) / centered_norm;
            for (x, e) in u.iter_mut().zip(&centered) {
                *x -= along_action * e;
            }
        }
    }
    let largest = u.iter().map(|x| x.norm()).fold(0.0, f64::max);
    u.iter()
        .zip(amplitudes)
        .map(|(x, a)| a * x / largest.max(f64::MIN_POSITIVE))
        .collect()
}

/// `F(a + sδ) - F(a)`, accumulated term by term so the O(s) change is not
/// lost against the size of `F`.
fn functional_change(
    ensemble: &ComplexEnsemble,
    lambda: Complex64,
    functional: Functional,
    delta: &[Complex64],
    s: f64,
) -> Result<Complex64> {
    let space = ensemble.space();
    let mut dq = Complex64::new(0.0, 0.0);
    let mut da = Complex64::new(0.0, 0.0);
    let terms = ensemble.amplitudes().iter().zip(ensemble.log_amplitudes()).zip(delta);
    for (i, ((&a, &b), &d)) in terms.enumerate() {
        let step = d * s;
        if (a + step).norm() < MIN_AMPLITUDE {
            return Err(Error::AmplitudeNearZero(space.ids()[i].clone()));
        }
        // b' = b + Ln(1 + sδ/a)
        let l = ln_1p(step / a);
        let w = space.weights()[i];
        dq -= (step * b + (a + step) * l) * w;
        da += step * (w * space.actions()[i]);
    }
    Ok(match functional {
        Functional::Quantropy => dq,
        Functional::FreeAction => da - dq / lambda,
    })
}

/// Fit `c₁`, `c₂` along random constraint-respecting directions.
///
/// Uses the odd and even parts at `±t` and `±t/2`; the two-point Richardson
/// combination `(8·O(t/2) - O(t)) / 3t` removes the cubic term from `c₁`.
pub fn directional_fit(
    ensemble: &ComplexEnsemble,
    lambda: &Classicality,
    functional: Functional,
    trials: usize,
    t: f64,
    seed: u64,
) -> Result<DirectionalFit> {
    let space = ensemble.space();
    let min_len = match functional {
        Functional::Quantropy => 3,
        Functional::FreeAction => 2,
    };
    if space.len() < min_len {
        return Err(Error::InvalidSpace(format!(
            "need at least {min_len} histories for a nontrivial tangent space, got {}",
            space.len()
        )));
    }
    if !(t.is_finite() && t > 0.0 && t < 0.5) {
        return Err(Error::InvalidSpace(format!(
            "perturbation size must lie in (0, 0.5), got {t}"
        )));
    }
    if let Some(i) = ensemble.amplitudes().iter().position(|a| a.norm() < MIN_AMPLITUDE) {
        return Err(Error::AmplitudeNearZero(space.ids()[i].clone()));
    }
    let l = lambda.lambda();
    let with_action = functional == Functional::Quantropy;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fit = DirectionalFit {
        max_linear: 0.0,
        max_quadratic: 0.0,
        trials,
    };
    for _ in 0..trials {
        let mut attempt = 0;
        let (c1, c2) = loop {
            let delta = tangent_direction(&mut rng, space, ensemble.amplitudes(), with_action);
            let eval = |s: f64| functional_change(ensemble, l, functional, &delta, s);
            let sampled = (|| Ok::<_, Error>([eval(t)?, eval(-t)?, eval(t / 2.0)?, eval(-t / 2.0)?]))();
            match sampled {
                Ok([p1, m1, p2, m2]) => {
                    let odd1 = (p1 - m1) * 0.5;
                    let odd2 = (p2 - m2) * 0.5;
                    let even1 = (p1 + m1) * 0.5;
                    let even2 = (p2 + m2) * 0.5;
                    let c1 = (odd2 * 8.0 - odd1) / (3.0 * t);
                    let c2 = (even2 * 16.0 - even1) / (3.0 * t * t);
                    break (c1, c2);
                }
                Err(Error::AmplitudeNearZero(id)) => {
                    attempt += 1;
                    if attempt >= RESAMPLE_LIMIT {
                        return Err(Error::AmplitudeNearZero(id));
                    }
                }
                Err(e) => return Err(e),
            }
        };
        fit.max_linear = fit.max_linear.max(c1.norm());
        fit.max_quadratic = fit.max_quadratic.max(c2.norm());
    }
    Ok(fit)
}

/// Largest first-order coefficient of `Q` at the Feynman weights of `space`.
pub fn directional_stationarity(
    space: &HistorySpace,
    lambda: &Classicality,
    trials: usize,
    t: f64,
    seed: u64,
) -> Result<f64> {
    let ens = feynman_weights(space, lambda)?;
    Ok(directional_fit(&ens, lambda, Functional::Quantropy, trials, t, seed)?.max_linear)
}

/// Feynman weights multiplied by `1 + strength·f(x)` with `f` uniform in
/// `[-1, 1]`, renormalized. The stored branch is continued from the Feynman one.
pub fn perturbed_ensemble(
    space: &HistorySpace,
    lambda: &Classicality,
    strength: f64,
    seed: u64,
) -> Result<ComplexEnsemble> {
    if !(0.0..1.0).contains(&strength) {
        return Err(Error::InvalidSpace(format!(
            "perturbation strength must lie in [0, 1), got {strength}"
        )));
    }
    let base = feynman_weights(space, lambda)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let factors: Vec<f64> = (0..space.len())
        .map(|_| 1.0 + strength * rng.random_range(-1.0..1.0))
        .collect();
    let norm: Complex64 = space
        .weights()
        .iter()
        .zip(base.amplitudes())
        .zip(&factors)
        .map(|((w, a), f)| a * (w * f))
        .sum();
    let ln_norm = norm.ln();
    let logs: Vec<Complex64> = base
        .log_amplitudes()
        .iter()
        .zip(&factors)
        .map(|(b, f)| b + f.ln() - ln_norm)
        .collect();
    let amps = logs.iter().map(|b| b.exp()).collect();
    ComplexEnsemble::from_parts(space.clone(), amps, logs)
}

/// Serialized outcome of a stationarity run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationarityVerification {
    pub residual_max: f64,
    pub linear_coeff_max: f64,
    pub trials: usize,
    pub seed: u64,
}

/// Lagrange residual and directional fit for an ensemble.
pub fn verify_ensemble(
    ensemble: &ComplexEnsemble,
    lambda: &Classicality,
    trials: usize,
    t: f64,
    seed: u64,
) -> Result<StationarityVerification> {
    let residual = lagrange_residual(ensemble, lambda)?;
    let fit = directional_fit(ensemble, lambda, Functional::Quantropy, trials, t, seed)?;
    Ok(StationarityVerification {
        residual_max: residual.max_abs,
        linear_coeff_max: fit.max_linear,
        trials,
        seed,
    })
}
