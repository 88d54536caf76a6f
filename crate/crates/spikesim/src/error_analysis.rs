//! Leading-order error analysis of the Euler scheme on the spike upstroke.
//!
//! Along the upstroke the orbit errors of Euler behave like `tau * A(v)` in
//! the membrane component and `tau * B(v)` in the adaptation component, where
//! `A` and `B` solve
//!
//! ```text
//! dA/dv = (F'(v)/F(v)) A - F'(v)/2,          A(v0) = 0,
//! dB/dv = (a/F(v)) (b A - B) - a b / 2,      B(v0) = 0.
//! ```
//!
//! `A` has the closed form `(1/2)(ln F(v0) - ln F(v)) F(v)`; `B` is obtained
//! from its integrating-factor solution by adaptive Simpson quadrature. Both
//! are negative past `v0`: the scheme lags the exact upstroke, so potentials
//! are undershot and the crossing is late.

use crate::error::{Error, Result};
use crate::integrate::{
    reference_solve, simulate, Scheme, SimState, SolverConfig,
};
use crate::model::{InputCurrent, ModelSpec};
use crate::onedim::OneDimClass;

const SIMPSON_TOL: f64 = 1e-10;
const SIMPSON_MAX_DEPTH: u32 = 60;
const EXP_ARG_LIMIT: f64 = 700.0;

fn check_span(class: OneDimClass, v0: f64, v: f64) -> Result<()> {
    class.validate()?;
    class.eval(v0)?;
    class.eval(v)?;
    if v < v0 {
        return Err(Error::AnalysisDomain(format!(
            "upstroke runs upward; got v = {v} below v0 = {v0}"
        )));
    }
    Ok(())
}

/// Closed-form membrane error coefficient
/// `A(v) = (1/2)(ln F(v0) - ln F(v)) F(v)`.
pub fn error_a(class: OneDimClass, v0: f64, v: f64) -> Result<f64> {
    check_span(class, v0, v)?;
    match class {
        OneDimClass::Power { m } => Ok(-0.5 * m * (v / v0).ln() * v.powf(m)),
        OneDimClass::Exponential => Ok(0.5 * (v0 - v) * v.exp()),
    }
}

/// `ln F(u) - ln F(v0)` for the class.
fn log_f_span(class: OneDimClass, v0: f64, u: f64) -> f64 {
    match class {
        OneDimClass::Power { m } => m * (u / v0).ln(),
        OneDimClass::Exponential => u - v0,
    }
}

/// `phi(u) = integral of 1/F from v0 to u`, the exact travel time of the
/// frozen one-dimensional upstroke.
fn travel_time(class: OneDimClass, v0: f64, u: f64) -> f64 {
    match class {
        OneDimClass::Power { m } => (u.powf(1.0 - m) - v0.powf(1.0 - m)) / (1.0 - m),
        OneDimClass::Exponential => (-v0).exp() - (-u).exp(),
    }
}

/// Adaptation error coefficient `B(v)` from the integrating-factor solution
/// of its differential equation, by adaptive Simpson quadrature.
pub fn error_b(class: OneDimClass, v0: f64, v: f64, a: f64, b: f64) -> Result<f64> {
    check_span(class, v0, v)?;
    for (name, x) in [("a", a), ("b", b)] {
        if !(x.is_finite() && x >= 0.0) {
            return Err(Error::InvalidParameter {
                name: if name == "a" { "a" } else { "b" },
                reason: format!("must be finite and >= 0, got {x}"),
            });
        }
    }
    if a == 0.0 || b == 0.0 || v == v0 {
        return Ok(0.0);
    }
    let weight_arg = a * travel_time(class, v0, v);
    if weight_arg.abs() > EXP_ARG_LIMIT {
        return Err(Error::AnalysisDomain(format!(
            "integrating factor overflows: a * phi(v) = {weight_arg}"
        )));
    }
    let integrand = |u: f64| -> Result<f64> {
        Ok((a * travel_time(class, v0, u)).exp() * (log_f_span(class, v0, u) + 1.0))
    };
    let integral = adaptive_simpson(&integrand, v0, v, SIMPSON_TOL)?;
    Ok(-(a * b / 2.0) * (-weight_arg).exp() * integral)
}

/// Direct fine-step RK4 integration of the coupled error system, the oracle
/// the closed forms are checked against.
pub fn error_system_direct(
    class: OneDimClass,
    v0: f64,
    v: f64,
    a: f64,
    b: f64,
    steps: usize,
) -> Result<(f64, f64)> {
    check_span(class, v0, v)?;
    if steps == 0 {
        return Err(Error::InvalidParameter {
            name: "steps",
            reason: "must be positive".into(),
        });
    }
    if v == v0 {
        return Ok((0.0, 0.0));
    }
    let deriv = |u: f64, y: [f64; 2]| -> Result<[f64; 2]> {
        let f = class.eval(u)?;
        let f_prime = match class {
            OneDimClass::Power { m } => m * u.powf(m - 1.0),
            OneDimClass::Exponential => f,
        };
        Ok([
            f_prime / f * y[0] - 0.5 * f_prime,
            a / f * (b * y[0] - y[1]) - 0.5 * a * b,
        ])
    };
    let h = (v - v0) / steps as f64;
    let mut u = v0;
    let mut y = [0.0, 0.0];
    for _ in 0..steps {
        let k1 = deriv(u, y)?;
        let k2 = deriv(
            u + 0.5 * h,
            [y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]],
        )?;
        let k3 = deriv(
            u + 0.5 * h,
            [y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]],
        )?;
        let k4 = deriv(u + h, [y[0] + h * k3[0], y[1] + h * k3[1]])?;
        y = [
            y[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            y[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        ];
        u += h;
    }
    Ok((y[0], y[1]))
}

/// Error coefficients evaluated at a list of cutoffs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorCurvePoint {
    pub v: f64,
    /// Membrane error per unit step, `A(v)`.
    pub v_error_coeff: f64,
    /// Adaptation error per unit step, `B(v)`.
    pub w_error_coeff: f64,
}

pub fn error_vs_cutoff_curve(
    class: OneDimClass,
    v0: f64,
    a: f64,
    b: f64,
    cutoffs: &[f64],
) -> Result<Vec<ErrorCurvePoint>> {
    cutoffs
        .iter()
        .map(|&theta| {
            Ok(ErrorCurvePoint {
                v: theta,
                v_error_coeff: error_a(class, v0, theta)?,
                w_error_coeff: error_b(class, v0, theta, a, b)?,
            })
        })
        .collect()
}

/// First-spike errors of a scheme against the reference solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorReport {
    pub scheme: Scheme,
    pub theta: f64,
    /// Resolution knob of the scheme: `dt` (euler), `dv` (hybrid-fixed) or
    /// `epsilon` (hybrid-adaptive).
    pub tau_or_eps: f64,
    pub spike_time_error: f64,
    pub w_at_spike_error: f64,
    pub scheme_steps: u64,
}

/// Run `config` and the reference solver to the first spike and report the
/// signed errors, scheme minus reference.
pub fn measure_empirical_error(
    model: &ModelSpec,
    current: &InputCurrent,
    init: SimState,
    config: &SolverConfig,
    oracle_tol: f64,
) -> Result<ErrorReport> {
    if config.scheme == Scheme::Oracle {
        return Err(Error::InvalidParameter {
            name: "scheme",
            reason: "measure a discrete scheme against the oracle, not the oracle itself".into(),
        });
    }
    let (_, train) = simulate(model, current, init, config)?;
    let scheme_spike = train.first().ok_or_else(|| {
        Error::Measurement(format!(
            "{} produced no spike before t_end = {}",
            config.scheme.name(),
            config.t_end
        ))
    })?;
    let mut oracle_cfg = SolverConfig::new(Scheme::Oracle, config.theta);
    oracle_cfg.m_switch = config.m_switch.min(1.0);
    oracle_cfg.t_end = config.t_end;
    oracle_cfg.oracle_tol = oracle_tol;
    let (_, reference) = reference_solve(model, current, init, &oracle_cfg)?;
    let reference_spike = reference.first().ok_or_else(|| {
        Error::Measurement(format!(
            "reference produced no spike before t_end = {}",
            config.t_end
        ))
    })?;
    Ok(ErrorReport {
        scheme: config.scheme,
        theta: config.theta,
        tau_or_eps: match config.scheme {
            Scheme::Euler => config.dt,
            Scheme::HybridFixed => config.dv,
            Scheme::HybridAdaptive | Scheme::Oracle => config.epsilon,
        },
        spike_time_error: scheme_spike.time - reference_spike.time,
        w_at_spike_error: scheme_spike.w - reference_spike.w,
        scheme_steps: train.step_count,
    })
}

/// Adaptive Simpson quadrature with absolute tolerance and a depth cap.
fn adaptive_simpson(
    f: &impl Fn(f64) -> Result<f64>,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<f64> {
    fn simpson(f_lo: f64, f_mid: f64, f_hi: f64, width: f64) -> f64 {
        width / 6.0 * (f_lo + 4.0 * f_mid + f_hi)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &impl Fn(f64) -> Result<f64>,
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_mid: f64,
        f_hi: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> Result<f64> {
        let mid = 0.5 * (lo + hi);
        let lm = 0.5 * (lo + mid);
        let rm = 0.5 * (mid + hi);
        let f_lm = f(lm)?;
        let f_rm = f(rm)?;
        let left = simpson(f_lo, f_lm, f_mid, mid - lo);
        let right = simpson(f_mid, f_rm, f_hi, hi - mid);
        let refined = left + right;
        if depth >= SIMPSON_MAX_DEPTH || (refined - whole).abs() <= 15.0 * tol {
            return Ok(refined + (refined - whole) / 15.0);
        }
        let half_tol = 0.5 * tol;
        Ok(recurse(f, lo, mid, f_lo, f_lm, f_mid, left, half_tol, depth + 1)?
            + recurse(f, mid, hi, f_mid, f_rm, f_hi, right, half_tol, depth + 1)?)
    }
    if lo == hi {
        return Ok(0.0);
    }
    let mid = 0.5 * (lo + hi);
    let f_lo = f(lo)?;
    let f_mid = f(mid)?;
    let f_hi = f(hi)?;
    let whole = simpson(f_lo, f_mid, f_hi, hi - lo);
    recurse(f, lo, hi, f_lo, f_mid, f_hi, whole, tol, 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn membrane_coefficient_hand_values() {
        // Power m = 2, v0 = 1, v = e: A = -(2/2) ln(e) e^2 = -e^2.
        let a = error_a(OneDimClass::Power { m: 2.0 }, 1.0, std::f64::consts::E).unwrap();
        assert!((a + std::f64::consts::E.powi(2)).abs() < 1e-12);
        // Exponential, v0 = 0, v = 1: A = (1/2)(0 - 1) e = -e/2.
        let a = error_a(OneDimClass::Exponential, 0.0, 1.0).unwrap();
        assert!((a + 0.5 * std::f64::consts::E).abs() < 1e-12);
    }

    #[test]
    fn coefficients_vanish_at_the_start() {
        let a = error_a(OneDimClass::Power { m: 2.0 }, 3.0, 3.0).unwrap();
        assert_eq!(a, 0.0);
        let b = error_b(OneDimClass::Power { m: 2.0 }, 3.0, 3.0, 0.02, 0.19).unwrap();
        assert_eq!(b, 0.0);
    }

    #[test]
    fn adaptation_coefficient_matches_direct_integration() {
        let (class, v0, v, a, b) = (OneDimClass::Power { m: 2.0 }, 2.0, 30.0, 0.02, 0.19);
        let quad = error_b(class, v0, v, a, b).unwrap();
        let (_, direct) = error_system_direct(class, v0, v, a, b, 200_000).unwrap();
        assert!(
            (quad - direct).abs() <= 1e-6,
            "closed form {quad} vs direct {direct}"
        );
        assert!(quad < 0.0);
    }

    #[test]
    fn membrane_coefficient_matches_direct_integration() {
        let (class, v0, v) = (OneDimClass::Exponential, 0.0, 4.0);
        let closed = error_a(class, v0, v).unwrap();
        let (direct, _) = error_system_direct(class, v0, v, 0.0, 0.0, 200_000).unwrap();
        assert!(
            (closed - direct).abs() <= 1e-6 * closed.abs().max(1.0),
            "closed form {closed} vs direct {direct}"
        );
    }

    #[test]
    fn zero_adaptation_makes_b_vanish() {
        let b = error_b(OneDimClass::Exponential, 0.0, 5.0, 0.0, 0.19).unwrap();
        assert_eq!(b, 0.0);
        let b = error_b(OneDimClass::Exponential, 0.0, 5.0, 0.02, 0.0).unwrap();
        assert_eq!(b, 0.0);
    }

    #[test]
    fn curve_is_negative_and_monotone_in_the_cutoff() {
        let cutoffs = [5.0, 10.0, 30.0, 100.0, 300.0];
        let curve = error_vs_cutoff_curve(
            OneDimClass::Power { m: 2.0 },
            2.0,
            0.02,
            0.19,
            &cutoffs,
        )
        .unwrap();
        assert_eq!(curve.len(), cutoffs.len());
        for pair in curve.windows(2) {
            assert!(pair[0].v_error_coeff < 0.0);
            assert!(pair[0].w_error_coeff < 0.0);
            assert!(pair[1].v_error_coeff < pair[0].v_error_coeff);
            assert!(pair[1].w_error_coeff < pair[0].w_error_coeff);
        }
    }

    #[test]
    fn domain_errors_are_reported() {
        assert!(error_a(OneDimClass::Power { m: 2.0 }, 5.0, 1.0).is_err());
        assert!(error_a(OneDimClass::Power { m: 2.0 }, -1.0, 2.0).is_err());
        assert!(error_b(OneDimClass::Power { m: 2.0 }, 1.0, 2.0, -0.1, 0.5).is_err());
    }
}
