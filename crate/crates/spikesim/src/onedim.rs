//! Solvable one-dimensional reductions `y' = F(y)` with `F` superlinear:
//! closed-form blow-up solutions, cutoff crossing times, the closed-form
//! Euler spike delay, and a high-accuracy reference crossing time.

use crate::error::{Error, Result};
use crate::model::V_OVERFLOW_GUARD;

/// Right-hand side class of the scalar equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OneDimClass {
    /// `F(y) = y^m`, `m > 1`, on `y > 0`.
    Power { m: f64 },
    /// `F(y) = e^y`.
    Exponential,
}

impl OneDimClass {
    pub fn validate(&self) -> Result<()> {
        if let OneDimClass::Power { m } = self {
            if !(m.is_finite() && *m > 1.0) {
                return Err(Error::InvalidParameter {
                    name: "m",
                    reason: format!("power exponent must be finite and > 1, got {m}"),
                });
            }
        }
        Ok(())
    }

    pub fn eval(&self, y: f64) -> Result<f64> {
        match self {
            OneDimClass::Power { m } => {
                if !(y > 0.0) {
                    return Err(Error::AnalysisDomain(format!(
                        "power right-hand side needs y > 0, got {y}"
                    )));
                }
                Ok(y.powf(*m))
            }
            OneDimClass::Exponential => {
                if y > V_OVERFLOW_GUARD {
                    return Err(Error::AnalysisDomain(format!(
                        "exponential right-hand side overflows above {V_OVERFLOW_GUARD}, got {y}"
                    )));
                }
                Ok(y.exp())
            }
        }
    }

    fn check_start(&self, y0: f64) -> Result<()> {
        self.validate()?;
        self.eval(y0).map(|_| ())
    }
}

/// Finite blow-up time of the exact solution started at `y0`.
pub fn blowup_time(class: OneDimClass, y0: f64) -> Result<f64> {
    class.check_start(y0)?;
    match class {
        OneDimClass::Power { m } => Ok(y0.powf(1.0 - m) / (m - 1.0)),
        OneDimClass::Exponential => Ok((-y0).exp()),
    }
}

/// Exact solution at time `t`, defined for `t` below the blow-up time.
pub fn blowup_solution(class: OneDimClass, y0: f64, t: f64) -> Result<f64> {
    class.check_start(y0)?;
    let t_star = blowup_time(class, y0)?;
    if !(t < t_star) {
        return Err(Error::AnalysisDomain(format!(
            "solution from y0 = {y0} blows up at t = {t_star}; asked for t = {t}"
        )));
    }
    match class {
        OneDimClass::Power { m } => {
            Ok((y0.powf(1.0 - m) - (m - 1.0) * t).powf(-1.0 / (m - 1.0)))
        }
        OneDimClass::Exponential => Ok(y0 - (1.0 - t * y0.exp()).ln()),
    }
}

fn check_cutoff(class: OneDimClass, y0: f64, theta: f64) -> Result<()> {
    class.check_start(y0)?;
    class.eval(theta)?;
    if theta < y0 {
        return Err(Error::AnalysisDomain(format!(
            "cutoff {theta} must not lie below the start {y0}"
        )));
    }
    Ok(())
}

/// Exact time at which the solution from `y0` reaches the cutoff.
pub fn crossing_time(class: OneDimClass, y0: f64, theta: f64) -> Result<f64> {
    check_cutoff(class, y0, theta)?;
    match class {
        OneDimClass::Power { m } => {
            Ok((y0.powf(1.0 - m) - theta.powf(1.0 - m)) / (m - 1.0))
        }
        OneDimClass::Exponential => Ok((-y0).exp() - (-theta).exp()),
    }
}

/// Leading-order lag of the Euler crossing behind the exact one, in time
/// units: `tau * (m/2) * ln(theta/y0)` for powers, `tau * (theta - y0) / 2`
/// for the exponential.
pub fn spike_time_delay(class: OneDimClass, tau: f64, y0: f64, theta: f64) -> Result<f64> {
    check_cutoff(class, y0, theta)?;
    if !(tau >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "tau",
            reason: format!("must be >= 0, got {tau}"),
        });
    }
    match class {
        OneDimClass::Power { m } => Ok(tau * 0.5 * m * (theta / y0).ln()),
        OneDimClass::Exponential => Ok(tau * 0.5 * (theta - y0)),
    }
}

/// Crossing time by step-doubling RK4 on `dT/dy = 1/F(y)` with `y` as the
/// independent variable, local tolerance `tol`.
pub fn reference_crossing_time(
    class: OneDimClass,
    y0: f64,
    theta: f64,
    tol: f64,
) -> Result<f64> {
    check_cutoff(class, y0, theta)?;
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter {
            name: "tol",
            reason: format!("must be > 0, got {tol}"),
        });
    }
    let deriv = |y: f64| -> Result<f64> { Ok(1.0 / class.eval(y)?) };
    let rk4 = |y: f64, t: f64, h: f64| -> Result<f64> {
        let k1 = deriv(y)?;
        let k2 = deriv(y + 0.5 * h)?;
        let k3 = k2;
        let k4 = deriv(y + h)?;
        Ok(t + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
    };
    let mut y = y0;
    let mut t = 0.0;
    let mut h = (theta - y0).clamp(1e-9, 1e-3);
    const FLOOR: f64 = 1e-14;
    while y < theta {
        h = h.min(theta - y);
        let mut accepted = false;
        for _ in 0..200 {
            if h < FLOOR {
                return Err(Error::OracleFailure {
                    t,
                    detail: format!("tolerance unachievable above the step floor {FLOOR:e}"),
                });
            }
            let full = rk4(y, t, h)?;
            let half = rk4(y, t, 0.5 * h)?;
            let half2 = rk4(y + 0.5 * h, half, 0.5 * h)?;
            let err = (half2 - full).abs() / 15.0;
            let scale = tol * (1.0 + t.abs());
            if err <= scale {
                t = half2 + (half2 - full) / 15.0;
                y += h;
                let grow = if err == 0.0 {
                    5.0
                } else {
                    (0.9 * (scale / err).powf(0.2)).clamp(0.2, 5.0)
                };
                h *= grow;
                accepted = true;
                break;
            }
            h *= (0.9 * (scale / err).powf(0.2)).clamp(0.1, 0.9);
        }
        if !accepted {
            return Err(Error::OracleFailure {
                t,
                detail: "step-size control failed to converge".into(),
            });
        }
    }
    Ok(t)
}

/// How a scalar Euler crossing is reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrossingDetection {
    FirstExceedance,
    LinearInterp,
}

/// Time at which the scalar Euler recursion `y <- y + tau F(y)` reaches the
/// cutoff.
pub fn euler_crossing_time(
    class: OneDimClass,
    y0: f64,
    theta: f64,
    tau: f64,
    detection: CrossingDetection,
) -> Result<f64> {
    check_cutoff(class, y0, theta)?;
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "tau",
            reason: format!("must be finite and > 0, got {tau}"),
        });
    }
    if y0 >= theta {
        return Ok(0.0);
    }
    const MAX_STEPS: u64 = 1_000_000_000;
    let mut y = y0;
    let mut n = 0u64;
    while n < MAX_STEPS {
        let slope = class.eval(y)?;
        let y_next = y + tau * slope;
        n += 1;
        if y_next >= theta || !y_next.is_finite() {
            return Ok(match detection {
                CrossingDetection::FirstExceedance => n as f64 * tau,
                CrossingDetection::LinearInterp => {
                    let frac = ((theta - y) / (tau * slope)).clamp(0.0, 1.0);
                    (n - 1) as f64 * tau + frac * tau
                }
            });
        }
        y = y_next;
    }
    Err(Error::Stagnation {
        t: n as f64 * tau,
        detail: format!("no crossing within {MAX_STEPS} Euler steps"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_blowup_solution_hand_value() {
        // y' = y^2 from 1: y(t) = 1/(1 - t), so y(0.5) = 2.
        let y = blowup_solution(OneDimClass::Power { m: 2.0 }, 1.0, 0.5).unwrap();
        assert!((y - 2.0).abs() < 1e-12);
    }

    #[test]
    fn exponential_blowup_solution_hand_value() {
        // y' = e^y from 0: y(t) = -ln(1 - t), so y(0.5) = ln 2.
        let y = blowup_solution(OneDimClass::Exponential, 0.0, 0.5).unwrap();
        assert!((y - 2.0_f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn blowup_solution_at_zero_is_the_start() {
        for class in [OneDimClass::Power { m: 3.0 }, OneDimClass::Exponential] {
            let y = blowup_solution(class, 0.7, 0.0).unwrap();
            assert!((y - 0.7).abs() < 1e-12);
        }
    }

    #[test]
    fn blowup_time_hand_values() {
        let t = blowup_time(OneDimClass::Power { m: 2.0 }, 1.0).unwrap();
        assert!((t - 1.0).abs() < 1e-12);
        let t = blowup_time(OneDimClass::Exponential, 0.0).unwrap();
        assert!((t - 1.0).abs() < 1e-12);
    }

    #[test]
    fn solution_is_undefined_past_the_blowup() {
        assert!(blowup_solution(OneDimClass::Power { m: 2.0 }, 1.0, 1.0).is_err());
        assert!(blowup_solution(OneDimClass::Exponential, 0.0, 1.5).is_err());
    }

    #[test]
    fn crossing_time_hand_values() {
        let t = crossing_time(OneDimClass::Power { m: 2.0 }, 1.0, 10.0).unwrap();
        assert!((t - 0.9).abs() < 1e-12);
        let t = crossing_time(OneDimClass::Exponential, 0.0, 20.0).unwrap();
        assert!((t - (1.0 - (-20.0_f64).exp())).abs() < 1e-12);
        let t = crossing_time(OneDimClass::Power { m: 3.0 }, 2.0, 2.0).unwrap();
        assert_eq!(t, 0.0);
    }

    #[test]
    fn delay_vanishes_at_the_start() {
        let d = spike_time_delay(OneDimClass::Power { m: 3.0 }, 0.01, 2.0, 2.0).unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn delay_hand_values() {
        // Exponential: tau (theta - y0) / 2.
        let d = spike_time_delay(OneDimClass::Exponential, 0.01, 0.0, 2.0).unwrap();
        assert!((d - 0.01).abs() < 1e-15);
        // Power: tau (m/2) ln(theta/y0).
        let d = spike_time_delay(OneDimClass::Power { m: 2.0 }, 1e-4, 1.0, 10.0).unwrap();
        assert!((d - 1e-4 * 10.0_f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn reference_crossing_matches_closed_form() {
        let exact = crossing_time(OneDimClass::Power { m: 2.0 }, 1.0, 1e6).unwrap();
        let t = reference_crossing_time(OneDimClass::Power { m: 2.0 }, 1.0, 1e6, 1e-12).unwrap();
        assert!((t - exact).abs() <= 1e-9, "error {:e}", (t - exact).abs());

        let exact = crossing_time(OneDimClass::Exponential, 0.0, 20.0).unwrap();
        let t = reference_crossing_time(OneDimClass::Exponential, 0.0, 20.0, 1e-12).unwrap();
        assert!((t - exact).abs() <= 1e-9, "error {:e}", (t - exact).abs());
    }

    #[test]
    fn euler_crossing_lags_by_roughly_the_predicted_delay() {
        let class = OneDimClass::Power { m: 2.0 };
        let exact = crossing_time(class, 1.0, 10.0).unwrap();
        let tau = 1e-3;
        let measured = euler_crossing_time(class, 1.0, 10.0, tau, CrossingDetection::LinearInterp)
            .unwrap();
        let predicted = spike_time_delay(class, tau, 1.0, 10.0).unwrap();
        let lag = measured - exact;
        assert!(lag > 0.0);
        assert!(
            (lag - predicted).abs() <= 0.1 * predicted,
            "lag {lag:e} vs predicted {predicted:e}"
        );
    }

    #[test]
    fn first_exceedance_is_grid_aligned() {
        let class = OneDimClass::Power { m: 2.0 };
        let tau = 1e-3;
        let t = euler_crossing_time(class, 1.0, 10.0, tau, CrossingDetection::FirstExceedance)
            .unwrap();
        let steps = t / tau;
        assert!((steps - steps.round()).abs() < 1e-9);
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        assert!(OneDimClass::Power { m: 1.0 }.validate().is_err());
        assert!(crossing_time(OneDimClass::Power { m: 2.0 }, -1.0, 10.0).is_err());
        assert!(crossing_time(OneDimClass::Power { m: 2.0 }, 5.0, 1.0).is_err());
        assert!(euler_crossing_time(
            OneDimClass::Exponential,
            0.0,
            2.0,
            0.0,
            CrossingDetection::FirstExceedance
        )
        .is_err());
    }
}
