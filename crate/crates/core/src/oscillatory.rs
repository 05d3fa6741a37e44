//! The complex Gaussian integral `∫ exp(-x²/2α) dx` for `Re(1/α) ≥ 0`.
//!
//! For imaginary `α` the integrand is not absolutely integrable, so the value
//! `√(2πα)` is reached only as a limit. Two limits are implemented:
//!
//! - cutoff: `∫_{-M}^{M}` with `M → ∞`. Each level averages the partial
//!   integrals at `M` and `M` plus half an endpoint oscillation, which cancels
//!   the leading `O(1/M)` boundary term and leaves `O(1/M³)`.
//! - damping: `∫ exp(-x²/2α - εx²)` with `ε ↓ 0`, evaluated at `ε, ε/2, ...`
//!   and Richardson-extrapolated in `ε`.
//!
//! Quadrature is composite Gauss–Legendre with panels no wider than a quarter
//! of the local oscillation period.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::quadrature::GaussLegendre;
use crate::{complex_json, Error, Result};

const NODES_PER_PANEL: usize = 10;

/// Default tolerance on successive extrapolants in damping mode.
pub const DAMPING_TOL: f64 = 1e-6;
/// Default tolerance on successive extrapolants in cutoff mode.
pub const CUTOFF_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegulatorKind {
    Cutoff,
    Damping,
}

impl std::str::FromStr for RegulatorKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "cutoff" => Ok(RegulatorKind::Cutoff),
            "damping" => Ok(RegulatorKind::Damping),
            other => Err(format!("unknown regulator `{other}` (expected cutoff or damping)")),
        }
    }
}

/// Regulator schedule. `cutoff_m` is the first cutoff (doubled per level) and
/// `epsilon` the first damping (halved per level).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegulatorSpec {
    pub kind: RegulatorKind,
    pub cutoff_m: f64,
    pub epsilon: f64,
    /// Lower bound on the total number of quadrature nodes per integral.
    pub quadrature_points: usize,
    pub extrapolation_levels: usize,
    /// Largest accepted change between the last two extrapolants.
    pub tolerance: f64,
}

impl RegulatorSpec {
    pub fn cutoff(cutoff_m: f64, levels: usize) -> Self {
        RegulatorSpec {
            kind: RegulatorKind::Cutoff,
            cutoff_m,
            epsilon: 1e-3,
            quadrature_points: 256,
            extrapolation_levels: levels,
            tolerance: CUTOFF_TOL,
        }
    }

    pub fn damping(epsilon: f64, levels: usize) -> Self {
        RegulatorSpec {
            kind: RegulatorKind::Damping,
            cutoff_m: 50.0,
            epsilon,
            quadrature_points: 256,
            extrapolation_levels: levels,
            tolerance: DAMPING_TOL,
        }
    }

    pub fn with_tolerance(self, tolerance: f64) -> Self {
        RegulatorSpec { tolerance, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidRegulator(msg));
        if !(self.cutoff_m.is_finite() && self.cutoff_m > 0.0) {
            return bad(format!("cutoff M must be positive, got {}", self.cutoff_m));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if self.quadrature_points < 64 {
            return bad(format!(
                "need at least 64 quadrature points, got {}",
                self.quadrature_points
            ));
        }
        if self.extrapolation_levels < 2 {
            return bad(format!("need at least 2 levels, got {}", self.extrapolation_levels));
        }
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return bad(format!("tolerance must be positive, got {}", self.tolerance));
        }
        Ok(())
    }
}

/// One regulator level: the raw regularized integral and the best estimate
/// using all levels so far.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelEstimate {
    pub level: usize,
    pub regulator: f64,
    #[serde(with = "complex_json")]
    pub raw: Complex64,
    #[serde(with = "complex_json")]
    pub estimate: Complex64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularizedIntegral {
    pub kind: RegulatorKind,
    #[serde(with = "complex_json")]
    pub value: Complex64,
    pub error_estimate: f64,
    pub levels: Vec<LevelEstimate>,
}

/// `1/(2α)`, after checking `α ≠ 0` and `Re(1/α) ≥ 0`.
fn decay_coefficient(alpha: Complex64) -> Result<Complex64> {
    let divergent = Error::DivergentIntegral {
        re: alpha.re,
        im: alpha.im,
    };
    if !(alpha.re.is_finite() && alpha.im.is_finite()) || alpha.norm() == 0.0 {
        return Err(divergent);
    }
    let inv = alpha.inv();
    if inv.re < -1e-14 * inv.norm() {
        return Err(divergent);
    }
    Ok(Complex64::new(inv.re.max(0.0), inv.im) * 0.5)
}

/// Principal `√(2πα)`.
pub fn gaussian_closed_form(alpha: Complex64) -> Result<Complex64> {
    decay_coefficient(alpha)?;
    Ok((alpha * (2.0 * PI)).sqrt())
}

/// `∫_{-L}^{L} exp(-q x²) dx` on oscillation-adapted panels.
fn symmetric_integral(rule: &GaussLegendre, q: Complex64, upper: f64, min_nodes: usize) -> Complex64 {
    let f = |x: f64| (-q * x * x).exp();
    let panels_floor = min_nodes.div_ceil(2 * rule.len()).max(1);
    let h_max = (0.5 / q.norm().sqrt()).min(upper / panels_floor as f64);
    let freq = q.im.abs();
    let quarter = |x: f64| {
        if freq == 0.0 || x == 0.0 {
            f64::INFINITY
        } else {
            PI / (4.0 * freq * x)
        }
    };
    let mut acc = Complex64::new(0.0, 0.0);
    let mut x = 0.0;
    while x < upper {
        let mut h = h_max.min(quarter(x + h_max));
        h = h.min(quarter(x + h)).max(h_max * 1e-9);
        let b = (x + h).min(upper);
        acc += rule.integrate(f, x, b);
        x = b;
    }
    acc * 2.0
}

/// Regularized Gaussian integral, converging to [`gaussian_closed_form`].
pub fn gaussian_regularized(alpha: Complex64, reg: &RegulatorSpec) -> Result<RegularizedIntegral> {
    reg.validate()?;
    let c = decay_coefficient(alpha)?;
    let rule = GaussLegendre::new(NODES_PER_PANEL);
    let (levels, change) = match reg.kind {
        RegulatorKind::Damping => damping_levels(&rule, c, reg),
        RegulatorKind::Cutoff => cutoff_levels(&rule, c, reg),
    };
    let value = levels.last().expect("at least two levels").estimate;
    let error_estimate = change.max(1e-13 * value.norm());
    if change > reg.tolerance {
        return Err(Error::NoConvergence {
            change,
            tolerance: reg.tolerance,
        });
    }
    Ok(RegularizedIntegral {
        kind: reg.kind,
        value,
        error_estimate,
        levels,
    })
}

/// Diagonal of the Richardson table for samples taken at `h, h/2, h/4, ...`
/// of a quantity analytic in `h`. Entry `k` uses the first `k + 1` samples.
pub fn richardson_halving(samples: &[Complex64]) -> Vec<Complex64> {
    let mut table: Vec<Vec<Complex64>> = Vec::with_capacity(samples.len());
    for (k, &raw) in samples.iter().enumerate() {
        let mut row = vec![raw];
        for j in 1..=k {
            let factor = (1u64 << j) as f64 - 1.0;
            let next = row[j - 1] + (row[j - 1] - table[k - 1][j - 1]) / factor;
            row.push(next);
        }
        table.push(row);
    }
    table.into_iter().enumerate().map(|(k, row)| row[k]).collect()
}

fn damping_levels(rule: &GaussLegendre, c: Complex64, reg: &RegulatorSpec) -> (Vec<LevelEstimate>, f64) {
    let epsilons: Vec<f64> = (0..reg.extrapolation_levels)
        .map(|k| reg.epsilon / (1u64 << k) as f64)
        .collect();
    let raws: Vec<Complex64> = epsilons
        .iter()
        .map(|&eps| {
            let q = c + eps;
            symmetric_integral(rule, q, 12.0 / q.re.sqrt(), reg.quadrature_points)
        })
        .collect();
    let estimates = richardson_halving(&raws);
    let levels: Vec<LevelEstimate> = (0..raws.len())
        .map(|k| LevelEstimate {
            level: k,
            regulator: epsilons[k],
            raw: raws[k],
            estimate: estimates[k],
        })
        .collect();
    let n = levels.len();
    let change = (levels[n - 1].estimate - levels[n - 2].estimate).norm();
    (levels, change)
}

fn cutoff_levels(rule: &GaussLegendre, c: Complex64, reg: &RegulatorSpec) -> (Vec<LevelEstimate>, f64) {
    let mut levels = Vec::with_capacity(reg.extrapolation_levels);
    let mut m = reg.cutoff_m;
    for k in 0..reg.extrapolation_levels {
        let raw = symmetric_integral(rule, c, m, reg.quadrature_points);
        let settled = c.re * m * m > 40.0;
        let estimate = if c.im == 0.0 || settled {
            raw
        } else {
            // shift the endpoint by half a period of the phase Im(c)·x²
            let half_period = (PI / (2.0 * c.im.abs() * m)).min(m);
            let shifted = symmetric_integral(rule, c, m + half_period, reg.quadrature_points);
            (raw + shifted) * 0.5
        };
        levels.push(LevelEstimate {
            level: k,
            regulator: m,
            raw,
            estimate,
        });
        m *= 2.0;
    }
    let n = levels.len();
    let change = (levels[n - 1].estimate - levels[n - 2].estimate).norm();
    (levels, change)
}

/// Per-level CSV: `level,regulator,estimate_re,estimate_im,abs_error_vs_closed_form`.
pub fn write_convergence_csv<W: Write>(alpha: Complex64, study: &RegularizedIntegral, out: W) -> Result<()> {
    let exact = gaussian_closed_form(alpha)?;
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::InvalidRegulator(format!("csv output failed: {e}"));
    w.write_record([
        "level",
        "regulator",
        "estimate_re",
        "estimate_im",
        "abs_error_vs_closed_form",
    ])
    .map_err(io)?;
    for l in &study.levels {
        w.write_record([
            l.level.to_string(),
            format!("{:e}", l.regulator),
            format!("{:.17e}", l.estimate.re),
            format!("{:.17e}", l.estimate.im),
            format!("{:e}", (l.estimate - exact).norm()),
        ])
        .map_err(io)?;
    }
    w.flush()
        .map_err(|e| Error::InvalidRegulator(format!("csv output failed: {e}")))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn closed_form_values() {
        let g = gaussian_closed_form(c(1.0, 0.0)).unwrap();
        assert!((g.re - 2.5066283).abs() < 1e-7 && g.im == 0.0);
        let g = gaussian_closed_form(c(0.0, 1.0)).unwrap();
        let expect = (2.0 * PI).sqrt() * Complex64::from_polar(1.0, PI / 4.0);
        assert!((g - expect).norm() < 1e-15);
        assert!((g.re - 1.7725).abs() < 1e-4 && (g.im - 1.7725).abs() < 1e-4);
        assert!(matches!(
            gaussian_closed_form(c(-1.0, 0.0)),
            Err(Error::DivergentIntegral { .. })
        ));
        assert!(gaussian_closed_form(c(0.0, 0.0)).is_err());
    }

    #[test]
    fn damping_real_case() {
        let r = gaussian_regularized(c(1.0, 0.0), &RegulatorSpec::damping(1e-3, 4)).unwrap();
        assert!((r.value - (2.0 * PI).sqrt()).norm() < 1e-6);
    }

    #[test]
    fn damping_fresnel_case() {
        let reg = RegulatorSpec::damping(1e-2, 4);
        let r = gaussian_regularized(c(0.0, 1.0), &reg).unwrap();
        let exact = gaussian_closed_form(c(0.0, 1.0)).unwrap();
        assert!((r.value - exact).norm() < 1e-4, "{}", (r.value - exact).norm());
        // raw damped integrals match sqrt(π/(c+ε)) to quadrature accuracy
        for l in &r.levels {
            let direct = (PI / (c(0.0, -0.5) + l.regulator)).sqrt();
            assert!((l.raw - direct).norm() < 1e-11);
        }
    }

    #[test]
    fn cutoff_fresnel_case() {
        let r = gaussian_regularized(c(0.0, 1.0), &RegulatorSpec::cutoff(50.0, 4)).unwrap();
        let exact = gaussian_closed_form(c(0.0, 1.0)).unwrap();
        let errs: Vec<f64> = r.levels.iter().map(|l| (l.estimate - exact).norm()).collect();
        assert!(errs[3] < 1e-3);
        assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
        // the raw partial integrals only close in as O(1/M)
        let raw_err = (r.levels[0].raw - exact).norm();
        assert!(raw_err > 10.0 * errs[0]);
    }

    #[test]
    fn richardson_is_exact_on_polynomials() {
        // f(h) = 2 + 3h - h² sampled at h = 1, 1/2, 1/4
        let f = |h: f64| Complex64::new(2.0 + 3.0 * h - h * h, h);
        let d = richardson_halving(&[f(1.0), f(0.5), f(0.25)]);
        assert!((d[2] - 2.0).norm() < 1e-14);
        assert_eq!(d[0], f(1.0));
    }

    #[test]
    fn rejects_bad_schedules() {
        let mut reg = RegulatorSpec::damping(1e-2, 1);
        assert!(matches!(
            gaussian_regularized(c(1.0, 0.0), &reg),
            Err(Error::InvalidRegulator(_))
        ));
        reg.extrapolation_levels = 3;
        reg.quadrature_points = 10;
        assert!(gaussian_regularized(c(1.0, 0.0), &reg).is_err());
        assert!(gaussian_regularized(c(-1.0, 0.0), &RegulatorSpec::damping(1e-2, 3)).is_err());
    }

    #[test]
    fn tight_tolerance_reports_no_convergence() {
        let reg = RegulatorSpec::cutoff(5.0, 2).with_tolerance(1e-12);
        let err = gaussian_regularized(c(0.0, 1.0), &reg).unwrap_err();
        assert!(matches!(err, Error::NoConvergence { .. }));
    }

    #[test]
    fn csv_export() {
        let alpha = c(0.0, 1.0);
        let r = gaussian_regularized(alpha, &RegulatorSpec::damping(1e-2, 3).with_tolerance(1e-3)).unwrap();
        let mut buf = Vec::new();
        write_convergence_csv(alpha, &r, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "level,regulator,estimate_re,estimate_im,abs_error_vs_closed_form"
        );
        assert_eq!(lines.count(), 3);
    }
}
