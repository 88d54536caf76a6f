//! Model family: a superlinear membrane nonlinearity coupled to linear
//! adaptation, together with the phase-plane analysis of its equilibria.
//!
//! ```text
//! dv/dt = F(v) - w + I(t)
//! dw/dt = a (b v - w)
//! ```
//!
//! `F` is convex and grows faster than linearly, so trajectories in the
//! spiking zone blow up in finite time. A cutoff `theta` with the reset
//! `v -> v_reset`, `w -> w + w_jump` stands in for the blow-up.

use crate::error::{Error, Result};

/// Largest membrane value at which the exponential kind is evaluated.
/// Keeps `exp(v)` finite in double precision.
pub const V_OVERFLOW_GUARD: f64 = 700.0;

/// Relative tolerance of equilibrium root-finding.
const ROOT_TOL: f64 = 1e-12;

/// Membrane nonlinearity `F(v)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Nonlinearity {
    /// `F(v) = p2 v^2 + p1 v + p0`, `p2 > 0`.
    QuadraticIzhikevich { p2: f64, p1: f64, p0: f64 },
    /// `F(v) = v^2`.
    CanonicalQuadratic,
    /// `F(v) = v^4 + alpha v`.
    Quartic { alpha: f64 },
    /// `F(v) = exp(v) - v`.
    Exponential,
}

impl Nonlinearity {
    /// Dominant power growth exponent; `None` for the exponential kind.
    pub fn growth_exponent(&self) -> Option<f64> {
        match self {
            Nonlinearity::QuadraticIzhikevich { .. } | Nonlinearity::CanonicalQuadratic => {
                Some(2.0)
            }
            Nonlinearity::Quartic { .. } => Some(4.0),
            Nonlinearity::Exponential => None,
        }
    }

    /// True when `F` grows strictly faster than `v^2`, which makes the
    /// reachable set independent of the cutoff.
    pub fn is_superquadratic(&self) -> bool {
        match self.growth_exponent() {
            Some(m) => m > 2.0,
            None => true,
        }
    }
}

/// Full model: nonlinearity, adaptation parameters, and the reset map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSpec {
    pub kind: Nonlinearity,
    /// Adaptation rate; `a = 0` freezes `w`.
    pub a: f64,
    /// Slope of the `w`-nullcline `w = b v`.
    pub b: f64,
    /// Membrane value after a spike.
    pub v_reset: f64,
    /// Increment added to `w` at each spike.
    pub w_jump: f64,
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, x) in [
            ("a", self.a),
            ("b", self.b),
            ("v_reset", self.v_reset),
            ("w_jump", self.w_jump),
        ] {
            if !x.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be finite, got {x}"),
                });
            }
        }
        if self.a < 0.0 {
            return Err(Error::InvalidParameter {
                name: "a",
                reason: format!("adaptation rate must be >= 0, got {}", self.a),
            });
        }
        if self.b < 0.0 {
            return Err(Error::InvalidParameter {
                name: "b",
                reason: format!("nullcline slope must be >= 0, got {}", self.b),
            });
        }
        if let Nonlinearity::QuadraticIzhikevich { p2, p1, p0 } = self.kind {
            if !(p2.is_finite() && p1.is_finite() && p0.is_finite()) || p2 <= 0.0 {
                return Err(Error::InvalidParameter {
                    name: "p2",
                    reason: format!("quadratic coefficients must be finite with p2 > 0, got p2={p2} p1={p1} p0={p0}"),
                });
            }
        }
        if let Nonlinearity::Quartic { alpha } = self.kind {
            if !alpha.is_finite() {
                return Err(Error::InvalidParameter {
                    name: "alpha",
                    reason: format!("must be finite, got {alpha}"),
                });
            }
        }
        Ok(())
    }

    /// `F(v)`.
    pub fn f(&self, v: f64) -> Result<f64> {
        if !v.is_finite() {
            return Err(Error::InvalidParameter {
                name: "v",
                reason: format!("must be finite, got {v}"),
            });
        }
        match self.kind {
            Nonlinearity::QuadraticIzhikevich { p2, p1, p0 } => Ok((p2 * v + p1) * v + p0),
            Nonlinearity::CanonicalQuadratic => Ok(v * v),
            Nonlinearity::Quartic { alpha } => Ok(v * v * v * v + alpha * v),
            Nonlinearity::Exponential => {
                if v > V_OVERFLOW_GUARD {
                    Err(Error::InvalidParameter {
                        name: "v",
                        reason: format!("exp overflow guard at {V_OVERFLOW_GUARD}, got {v}"),
                    })
                } else {
                    Ok(v.exp() - v)
                }
            }
        }
    }

    /// `(F'(v), F''(v))`.
    pub fn f_derivatives(&self, v: f64) -> Result<(f64, f64)> {
        if !v.is_finite() {
            return Err(Error::InvalidParameter {
                name: "v",
                reason: format!("must be finite, got {v}"),
            });
        }
        match self.kind {
            Nonlinearity::QuadraticIzhikevich { p2, p1, .. } => Ok((2.0 * p2 * v + p1, 2.0 * p2)),
            Nonlinearity::CanonicalQuadratic => Ok((2.0 * v, 2.0)),
            Nonlinearity::Quartic { alpha } => Ok((4.0 * v * v * v + alpha, 12.0 * v * v)),
            Nonlinearity::Exponential => {
                if v > V_OVERFLOW_GUARD {
                    Err(Error::InvalidParameter {
                        name: "v",
                        reason: format!("exp overflow guard at {V_OVERFLOW_GUARD}, got {v}"),
                    })
                } else {
                    Ok((v.exp() - 1.0, v.exp()))
                }
            }
        }
    }

    /// Argmin of `F(v) - s v`, the unique solution of `F'(v) = s`.
    fn argmin_shifted(&self, s: f64) -> Result<f64> {
        match self.kind {
            Nonlinearity::QuadraticIzhikevich { p2, p1, .. } => Ok((s - p1) / (2.0 * p2)),
            Nonlinearity::CanonicalQuadratic => Ok(s / 2.0),
            Nonlinearity::Quartic { alpha } => Ok(((s - alpha) / 4.0).cbrt()),
            Nonlinearity::Exponential => {
                if s <= -1.0 {
                    Err(Error::AnalysisDomain(format!(
                        "exponential kind has no slope-{s} point; argmin unbounded"
                    )))
                } else {
                    Ok(s.ln_1p())
                }
            }
        }
    }
}

/// Drive `I(t)`. All kinds are piecewise constant in time, so the slope is
/// zero between jumps and undefined exactly at a jump; integrators split
/// steps at jump times so a step never straddles one.
#[derive(Debug, Clone, PartialEq)]
pub enum InputCurrent {
    Constant { value: f64 },
    /// `values[i]` applies on `[jumps[i-1], jumps[i])`; `values` has exactly
    /// one more entry than `jumps`.
    PiecewiseConstant { jumps: Vec<f64>, values: Vec<f64> },
    /// `base` plus amplitude steps switching on at sorted onset times.
    SumOfSteps {
        base: f64,
        onsets: Vec<f64>,
        amplitudes: Vec<f64>,
    },
}

impl InputCurrent {
    pub fn validate(&self) -> Result<()> {
        let check_finite = |name: &'static str, xs: &[f64]| -> Result<()> {
            if xs.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: "all entries must be finite".into(),
                });
            }
            Ok(())
        };
        let check_sorted = |name: &'static str, xs: &[f64]| -> Result<()> {
            if xs.windows(2).any(|p| p[0] >= p[1]) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: "times must be strictly increasing".into(),
                });
            }
            Ok(())
        };
        match self {
            InputCurrent::Constant { value } => check_finite("value", &[*value]),
            InputCurrent::PiecewiseConstant { jumps, values } => {
                if values.len() != jumps.len() + 1 {
                    return Err(Error::InvalidParameter {
                        name: "values",
                        reason: format!(
                            "need exactly one more value than jumps, got {} values for {} jumps",
                            values.len(),
                            jumps.len()
                        ),
                    });
                }
                check_finite("jumps", jumps)?;
                check_finite("values", values)?;
                check_sorted("jumps", jumps)
            }
            InputCurrent::SumOfSteps {
                base,
                onsets,
                amplitudes,
            } => {
                if onsets.len() != amplitudes.len() {
                    return Err(Error::InvalidParameter {
                        name: "onsets",
                        reason: format!(
                            "need one amplitude per onset, got {} onsets and {} amplitudes",
                            onsets.len(),
                            amplitudes.len()
                        ),
                    });
                }
                check_finite("base", &[*base])?;
                check_finite("onsets", onsets)?;
                check_finite("amplitudes", amplitudes)?;
                check_sorted("onsets", onsets)
            }
        }
    }

    /// `I(t)`.
    pub fn value(&self, t: f64) -> f64 {
        match self {
            InputCurrent::Constant { value } => *value,
            InputCurrent::PiecewiseConstant { jumps, values } => {
                let idx = jumps.partition_point(|&j| j <= t);
                values[idx]
            }
            InputCurrent::SumOfSteps {
                base,
                onsets,
                amplitudes,
            } => {
                let idx = onsets.partition_point(|&j| j <= t);
                base + amplitudes[..idx].iter().sum::<f64>()
            }
        }
    }

    /// `I'(t)` between jumps. Undefined at jump instants; callers never
    /// evaluate there because steps are split at jumps.
    pub fn slope(&self, _t: f64) -> f64 {
        0.0
    }

    /// Greatest lower bound of `I(t)` over all `t`.
    pub fn lower_bound(&self) -> f64 {
        match self {
            InputCurrent::Constant { value } => *value,
            InputCurrent::PiecewiseConstant { values, .. } => {
                values.iter().cloned().fold(f64::INFINITY, f64::min)
            }
            InputCurrent::SumOfSteps {
                base, amplitudes, ..
            } => {
                let mut acc = *base;
                let mut lo = acc;
                for amp in amplitudes {
                    acc += amp;
                    lo = lo.min(acc);
                }
                lo
            }
        }
    }

    /// First discontinuity strictly after `t`, if any.
    pub fn next_jump_after(&self, t: f64) -> Option<f64> {
        let times: &[f64] = match self {
            InputCurrent::Constant { .. } => return None,
            InputCurrent::PiecewiseConstant { jumps, .. } => jumps,
            InputCurrent::SumOfSteps { onsets, .. } => onsets,
        };
        let idx = times.partition_point(|&j| j <= t);
        times.get(idx).copied()
    }
}

/// Stability of the rest equilibrium `v_minus`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stability {
    Attractive,
    Repulsive,
}

/// Sign structure of `F(v) - b v + I`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FixedPointRegime {
    /// `I > -m(b)`: no equilibria; the whole half-plane `w <= b v` spikes.
    NoFixedPoint,
    /// `I = -m(b)`: a unique non-hyperbolic equilibrium (unstable for b > a).
    UniqueNonHyperbolic { v: f64 },
    /// `I < -m(b)`: rest state `v_minus` and saddle `v_plus`.
    TwoFixedPoints {
        v_minus: f64,
        v_plus: f64,
        v_minus_stability: Stability,
    },
}

/// Equilibrium structure of the subthreshold field at a fixed current.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointAnalysis {
    /// Minimum of `F(v) - b v`.
    pub m_b: f64,
    /// Argmin of `F(v) - b v`.
    pub v_star: f64,
    pub regime: FixedPointRegime,
}

impl FixedPointAnalysis {
    /// Saddle position, or `-inf` when no saddle exists so that the spiking
    /// zone degenerates to `{w <= b v}`.
    pub fn v_plus(&self) -> f64 {
        match self.regime {
            FixedPointRegime::NoFixedPoint => f64::NEG_INFINITY,
            FixedPointRegime::UniqueNonHyperbolic { v } => v,
            FixedPointRegime::TwoFixedPoints { v_plus, .. } => v_plus,
        }
    }
}

/// Bisection to near machine precision followed by a Newton polish.
/// `g` must change sign on `[lo, hi]`.
fn bracketed_root(
    g: &impl Fn(f64) -> Result<f64>,
    g_prime: &impl Fn(f64) -> Result<f64>,
    mut lo: f64,
    mut hi: f64,
) -> Result<f64> {
    let mut g_lo = g(lo)?;
    let g_hi = g(hi)?;
    if g_lo == 0.0 {
        return Ok(lo);
    }
    if g_hi == 0.0 {
        return Ok(hi);
    }
    if g_lo.signum() == g_hi.signum() {
        return Err(Error::AnalysisDomain(format!(
            "root bracket [{lo}, {hi}] has no sign change"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let g_mid = g(mid)?;
        if g_mid == 0.0 {
            return Ok(mid);
        }
        if g_mid.signum() == g_lo.signum() {
            lo = mid;
            g_lo = g_mid;
        } else {
            hi = mid;
        }
        if (hi - lo).abs() <= ROOT_TOL * lo.abs().max(1.0) {
            break;
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..30 {
        let gx = g(x)?;
        let gpx = g_prime(x)?;
        if gpx == 0.0 {
            break;
        }
        let step = gx / gpx;
        let next = x - step;
        if !next.is_finite() || next < lo || next > hi {
            break;
        }
        x = next;
        if step.abs() <= ROOT_TOL * x.abs().max(1.0) {
            break;
        }
    }
    Ok(x)
}

/// Expand `2^k`-sized brackets away from `start` in the direction `dir`
/// until `g` changes sign from `g(start)`.
fn expand_bracket(
    g: &impl Fn(f64) -> Result<f64>,
    start: f64,
    dir: f64,
) -> Result<(f64, f64)> {
    let g_start = g(start)?;
    let mut width = 1.0;
    for _ in 0..200 {
        let probe = start + dir * width;
        let g_probe = g(probe)?;
        if g_probe.signum() != g_start.signum() || g_probe == 0.0 {
            return if dir > 0.0 {
                Ok((start, probe))
            } else {
                Ok((probe, start))
            };
        }
        width *= 2.0;
    }
    Err(Error::AnalysisDomain(format!(
        "no sign change of the equilibrium residual within 2^200 of v = {start}"
    )))
}

/// Classify the equilibria of `F(v) - b v + I = 0`.
pub fn analyze_fixed_points(model: &ModelSpec, i: f64) -> Result<FixedPointAnalysis> {
    model.validate()?;
    if !i.is_finite() {
        return Err(Error::InvalidParameter {
            name: "i",
            reason: format!("must be finite, got {i}"),
        });
    }
    let v_star = model.argmin_shifted(model.b)?;
    let m_b = model.f(v_star)? - model.b * v_star;

    let regime = if i > -m_b {
        FixedPointRegime::NoFixedPoint
    } else if i == -m_b {
        FixedPointRegime::UniqueNonHyperbolic { v: v_star }
    } else {
        let g = |v: f64| Ok(model.f(v)? - model.b * v + i);
        let g_prime = |v: f64| Ok(model.f_derivatives(v)?.0 - model.b);
        let (lo, hi) = expand_bracket(&g, v_star, 1.0)?;
        let v_plus = bracketed_root(&g, &g_prime, lo, hi)?;
        let (lo, hi) = expand_bracket(&g, v_star, -1.0)?;
        let v_minus = bracketed_root(&g, &g_prime, lo, hi)?;
        let v_minus_stability = if model.b < model.a {
            Stability::Attractive
        } else {
            let v_star_a = model.argmin_shifted(model.a)?;
            let i_s = model.b * v_star_a - model.f(v_star_a)?;
            if i < i_s {
                Stability::Attractive
            } else {
                Stability::Repulsive
            }
        };
        FixedPointRegime::TwoFixedPoints {
            v_minus,
            v_plus,
            v_minus_stability,
        }
    };
    Ok(FixedPointAnalysis {
        m_b,
        v_star,
        regime,
    })
}

/// Membership in the spiking zone `Z* = {v >= v_plus(I*, b), w <= b v}`,
/// which is invariant under the flow for any drive lower-bounded by
/// `i_star`. With no saddle the zone degenerates to `{w <= b v}`.
pub fn in_spiking_zone(model: &ModelSpec, i_star: f64, v: f64, w: f64) -> Result<bool> {
    let analysis = analyze_fixed_points(model, i_star)?;
    Ok(w <= model.b * v && v >= analysis.v_plus())
}

/// Compact box containing every thresholded trajectory started in an
/// initial box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryBounds {
    pub v_low: f64,
    /// Equals the cutoff.
    pub v_high: f64,
    pub w_low: f64,
    pub w_high: f64,
    /// True when `F` is superquadratic so that `v_low`, `w_low`, `w_high`
    /// do not grow with the cutoff.
    pub theta_independent: bool,
}

/// Bound the reachable set of thresholded trajectories started in
/// `[v_m, v_big] x [w_m, w_big]`.
pub fn estimate_trajectory_bounds(
    model: &ModelSpec,
    current: &InputCurrent,
    init_box: (f64, f64, f64, f64),
    theta: f64,
) -> Result<TrajectoryBounds> {
    model.validate()?;
    current.validate()?;
    let (v_m, v_big, w_m, w_big) = init_box;
    if !(v_m <= v_big && w_m <= w_big) {
        return Err(Error::InvalidParameter {
            name: "init_box",
            reason: format!("empty box ({v_m}, {v_big}, {w_m}, {w_big})"),
        });
    }
    if !(theta > v_big) {
        return Err(Error::InvalidParameter {
            name: "theta",
            reason: format!("cutoff {theta} must exceed the initial box top {v_big}"),
        });
    }
    let i_star = current.lower_bound();
    let w_high = w_big.max(model.b * theta) + model.w_jump;

    // Leftmost point where the drift F(v) - w + I can vanish under the most
    // pessimistic pairing (w = w_high, I = I*); below it v cannot decrease.
    let g = |v: f64| Ok(model.f(v)? - w_high + i_star);
    let g_prime = |v: f64| Ok(model.f_derivatives(v)?.0);
    let v_min_f = model.argmin_shifted(0.0)?;
    let mut v_low = model.v_reset.min(v_m);
    if g(v_min_f)? < 0.0 {
        let (lo, hi) = expand_bracket(&g, v_min_f, -1.0)?;
        let root = bracketed_root(&g, &g_prime, lo, hi)?;
        v_low = v_low.min(root);
    }
    let w_low = (model.b * v_low).min(w_m);
    Ok(TrajectoryBounds {
        v_low,
        v_high: theta,
        w_low,
        w_high,
        theta_independent: model.kind.is_superquadratic(),
    })
}
