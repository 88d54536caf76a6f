//! Stepping schemes: the forward Euler baseline, the hybrid fixed-step and
//! adaptive time/phase-plane algorithms, and a step-doubling RK4 reference
//! solver used as the accuracy oracle.
//!
//! Hybrid schemes integrate the model in time where the drift
//! `G = F(v) - w + I(t)` is small (`|G| < M`) and switch to the phase-plane
//! system `dT/dv = 1/G`, `dW/dv = a (b v - W)/G` where `|G| >= M`, so the
//! spike upstroke is integrated with `v` as the independent variable and the
//! cutoff landing is exact.

use crate::error::{Error, Result};
use crate::model::{InputCurrent, ModelSpec, V_OVERFLOW_GUARD};

/// Smallest step either branch will take.
pub const STEP_FLOOR: f64 = 1e-12;
/// Consecutive floored adaptive steps tolerated before a stagnation error.
pub const STAGNATION_LIMIT: u64 = 10_000_000;
/// Hard cap on recorded spikes per run.
pub const EVENT_LIMIT: usize = 1_000_000;

/// Point on an orbit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub v: f64,
    pub w: f64,
}

impl SimState {
    pub fn new(t: f64, v: f64, w: f64) -> Self {
        SimState { t, v, w }
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.v.is_finite() && self.w.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Euler,
    HybridFixed,
    HybridAdaptive,
    Oracle,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Euler => "euler",
            Scheme::HybridFixed => "hybrid-fixed",
            Scheme::HybridAdaptive => "hybrid-adaptive",
            Scheme::Oracle => "oracle",
        }
    }
}

/// How a cutoff crossing inside a time step is converted to a spike record.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpikeDetection {
    /// Record the first discrete state with `v >= theta` as-is.
    FirstExceedance,
    /// Linearly interpolate the crossing inside the step.
    LinearInterp,
}

/// Which system produced a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Time,
    Phase,
}

impl Branch {
    pub fn name(&self) -> &'static str {
        match self {
            Branch::Time => "time",
            Branch::Phase => "phase",
        }
    }
}

/// Scheme selection plus every tuning knob. Fields not used by the selected
/// scheme are ignored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub scheme: Scheme,
    /// Cutoff standing in for the blow-up.
    pub theta: f64,
    /// Drift magnitude at which hybrid schemes switch branches.
    pub m_switch: f64,
    /// Time step (euler, hybrid-fixed).
    pub dt: f64,
    /// Potential step (hybrid-fixed).
    pub dv: f64,
    /// Per-step precision target (hybrid-adaptive).
    pub epsilon: f64,
    /// Cap on adaptive time steps.
    pub dt_cap: f64,
    /// Cap on adaptive potential steps.
    pub dv_cap: f64,
    /// Local tolerance of the reference solver.
    pub oracle_tol: f64,
    /// Absolute simulation horizon.
    pub t_end: f64,
    pub spike_detection: SpikeDetection,
}

impl SolverConfig {
    pub fn new(scheme: Scheme, theta: f64) -> Self {
        SolverConfig {
            scheme,
            theta,
            m_switch: 1.0,
            dt: 0.01,
            dv: 0.01,
            epsilon: 0.01,
            dt_cap: 1.0,
            dv_cap: 1.0,
            oracle_tol: 1e-12,
            t_end: 1000.0,
            spike_detection: SpikeDetection::FirstExceedance,
        }
    }

    pub fn validate(&self, model: &ModelSpec) -> Result<()> {
        if !self.theta.is_finite() {
            return Err(Error::InvalidParameter {
                name: "theta",
                reason: format!("must be finite, got {}", self.theta),
            });
        }
        if self.theta <= model.v_reset {
            return Err(Error::InvalidParameter {
                name: "theta",
                reason: format!(
                    "cutoff {} must exceed the reset value {}",
                    self.theta, model.v_reset
                ),
            });
        }
        if matches!(model.kind, crate::model::Nonlinearity::Exponential)
            && self.theta > V_OVERFLOW_GUARD
        {
            return Err(Error::InvalidParameter {
                name: "theta",
                reason: format!(
                    "exponential kind caps the cutoff at {V_OVERFLOW_GUARD}, got {}",
                    self.theta
                ),
            });
        }
        if !self.t_end.is_finite() {
            return Err(Error::InvalidParameter {
                name: "t_end",
                reason: format!("must be finite, got {}", self.t_end),
            });
        }
        let positive = |name: &'static str, x: f64| -> Result<()> {
            if !(x > 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be > 0, got {x}"),
                });
            }
            Ok(())
        };
        match self.scheme {
            Scheme::Euler => {
                positive("dt", self.dt)?;
                if !self.dt.is_finite() {
                    return Err(Error::InvalidParameter {
                        name: "dt",
                        reason: "must be finite".into(),
                    });
                }
                self.check_euler_stability(model)?;
            }
            Scheme::HybridFixed => {
                positive("dt", self.dt)?;
                positive("dv", self.dv)?;
                positive("m_switch", self.m_switch)?;
                if !self.dt.is_finite() || !self.dv.is_finite() {
                    return Err(Error::InvalidParameter {
                        name: "dt",
                        reason: "dt and dv must be finite".into(),
                    });
                }
                self.check_euler_stability(model)?;
            }
            Scheme::HybridAdaptive => {
                positive("epsilon", self.epsilon)?;
                positive("dt_cap", self.dt_cap)?;
                positive("dv_cap", self.dv_cap)?;
                positive("m_switch", self.m_switch)?;
            }
            Scheme::Oracle => {
                positive("oracle_tol", self.oracle_tol)?;
                positive("m_switch", self.m_switch)?;
            }
        }
        Ok(())
    }

    fn check_euler_stability(&self, model: &ModelSpec) -> Result<()> {
        if model.a > 0.0 && self.dt * model.a >= 1.0 {
            return Err(Error::InvalidParameter {
                name: "dt",
                reason: format!(
                    "dt * a = {} must stay below 1 for the adaptation recursion",
                    self.dt * model.a
                ),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpikeEvent {
    pub time: f64,
    pub w: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Horizon,
    EventLimit,
}

/// Spike record of one run plus its exact step count.
#[derive(Debug, Clone, PartialEq)]
pub struct SpikeTrain {
    pub events: Vec<SpikeEvent>,
    pub step_count: u64,
    pub terminated_by: Termination,
}

impl SpikeTrain {
    pub fn first(&self) -> Option<SpikeEvent> {
        self.events.first().copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub v: f64,
    pub w: f64,
    pub branch: Branch,
}

/// One forward Euler step of the time system, right-hand side frozen at the
/// pre-step state.
pub fn euler_step(
    model: &ModelSpec,
    current: &InputCurrent,
    state: SimState,
    tau: f64,
) -> Result<SimState> {
    if !(tau >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "tau",
            reason: format!("must be >= 0, got {tau}"),
        });
    }
    let g = model.f(state.v)? - state.w + current.value(state.t);
    let next = SimState {
        t: state.t + tau,
        v: state.v + tau * g,
        w: state.w + tau * model.a * (model.b * state.v - state.w),
    };
    if !next.is_finite() {
        return Err(Error::Diverged {
            t: state.t,
            what: "euler step produced a non-finite state",
        });
    }
    Ok(next)
}

/// One step of the phase-plane system with `v` as the independent variable,
/// right-hand side frozen at the pre-step state. `dv_signed` must carry the
/// sign of the drift so that `t` advances.
pub fn phase_step(
    model: &ModelSpec,
    current: &InputCurrent,
    state: SimState,
    dv_signed: f64,
) -> Result<SimState> {
    let g = model.f(state.v)? - state.w + current.value(state.t);
    if g == 0.0 {
        return Err(Error::NotInvertible {
            v: state.v,
            gradient: g,
        });
    }
    if dv_signed * g < 0.0 {
        return Err(Error::InvalidParameter {
            name: "dv_signed",
            reason: format!(
                "sign must match the drift: dv = {dv_signed}, drift = {g}"
            ),
        });
    }
    let next = SimState {
        t: state.t + dv_signed / g,
        v: state.v + dv_signed,
        w: state.w + dv_signed * model.a * (model.b * state.v - state.w) / g,
    };
    if !next.is_finite() {
        return Err(Error::Diverged {
            t: state.t,
            what: "phase step produced a non-finite state",
        });
    }
    Ok(next)
}

/// Discrete reset map applied once the cutoff is reached; `t` is unchanged.
pub fn apply_reset(model: &ModelSpec, state: SimState) -> SimState {
    SimState {
        t: state.t,
        v: model.v_reset,
        w: state.w + model.w_jump,
    }
}

/// Pick the branch and the step size that keeps the local error of the next
/// step near `epsilon`, using the second derivatives of `(v, w)` in the time
/// branch and of `(T, W)` in the phase branch. Returned phase steps are
/// magnitudes; the driver applies the drift sign.
pub fn adaptive_step(
    model: &ModelSpec,
    current: &InputCurrent,
    state: SimState,
    config: &SolverConfig,
) -> Result<(Branch, f64)> {
    let (f_prime, _) = model.f_derivatives(state.v)?;
    let g = model.f(state.v)? - state.w + current.value(state.t);
    let lag = model.a * (model.b * state.v - state.w);
    let i_slope = current.slope(state.t);
    if g.abs() < config.m_switch {
        let v_dd = f_prime * g - lag + i_slope;
        let w_dd = model.a * model.b * g - lag;
        let curvature = v_dd.abs().max(w_dd.abs());
        if !curvature.is_finite() {
            return Err(Error::Diverged {
                t: state.t,
                what: "non-finite curvature in the time-branch step control",
            });
        }
        let step = if curvature == 0.0 {
            config.dt_cap
        } else {
            (config.epsilon / curvature).min(config.dt_cap)
        };
        Ok((Branch::Time, step.max(STEP_FLOOR)))
    } else {
        let g2 = g * g;
        let g3 = g2 * g;
        let w_dd = model.a * model.b / g
            - lag / g2
            - f_prime * lag / g2
            - lag * (lag + i_slope) / g3;
        let t_dd = -(f_prime * g - lag + i_slope) / g3;
        let curvature = w_dd.abs().max(t_dd.abs());
        if !curvature.is_finite() {
            return Err(Error::Diverged {
                t: state.t,
                what: "non-finite curvature in the phase-branch step control",
            });
        }
        let step = if curvature == 0.0 {
            config.dv_cap
        } else {
            (config.epsilon / curvature).min(config.dv_cap)
        };
        Ok((Branch::Phase, step.max(STEP_FLOOR)))
    }
}

struct RunAccumulator {
    points: Vec<TrajectoryPoint>,
    events: Vec<SpikeEvent>,
    step_count: u64,
}

impl RunAccumulator {
    fn new(init: SimState, branch: Branch) -> Self {
        RunAccumulator {
            points: vec![TrajectoryPoint {
                t: init.t,
                v: init.v,
                w: init.w,
                branch,
            }],
            events: Vec::new(),
            step_count: 0,
        }
    }

    fn record(&mut self, state: SimState, branch: Branch) {
        self.points.push(TrajectoryPoint {
            t: state.t,
            v: state.v,
            w: state.w,
            branch,
        });
    }

    /// Record a spike and the subsequent reset; returns the post-reset state
    /// or `None` when the event limit fires.
    fn spike_and_reset(
        &mut self,
        model: &ModelSpec,
        at: SimState,
        branch: Branch,
    ) -> Option<SimState> {
        self.events.push(SpikeEvent { time: at.t, w: at.w });
        self.record(at, branch);
        let reset = apply_reset(model, at);
        self.record(reset, branch);
        if self.events.len() >= EVENT_LIMIT {
            None
        } else {
            Some(reset)
        }
    }

    fn finish(self, terminated_by: Termination) -> (Vec<TrajectoryPoint>, SpikeTrain) {
        (
            self.points,
            SpikeTrain {
                events: self.events,
                step_count: self.step_count,
                terminated_by,
            },
        )
    }
}

/// Convert a time-branch exceedance into the spike state per the configured
/// detection mode.
fn detect_time_crossing(
    before: SimState,
    after: SimState,
    theta: f64,
    detection: SpikeDetection,
) -> SimState {
    match detection {
        SpikeDetection::FirstExceedance => after,
        SpikeDetection::LinearInterp => {
            let span = after.v - before.v;
            let frac = if span > 0.0 {
                ((theta - before.v) / span).clamp(0.0, 1.0)
            } else {
                1.0
            };
            SimState {
                t: before.t + frac * (after.t - before.t),
                v: theta,
                w: before.w + frac * (after.w - before.w),
            }
        }
    }
}

/// Clamp a time step so it lands exactly on the horizon or the next input
/// jump, whichever comes first.
fn clamp_time_step(current: &InputCurrent, t: f64, tau: f64, t_end: f64) -> f64 {
    let mut tau = tau.min(t_end - t);
    if let Some(jump) = current.next_jump_after(t) {
        if t + tau > jump {
            tau = jump - t;
        }
    }
    tau.max(0.0)
}

/// Forward Euler baseline.
pub fn simulate_euler(
    model: &ModelSpec,
    current: &InputCurrent,
    init: SimState,
    config: &SolverConfig,
) -> Result<(Vec<TrajectoryPoint>, SpikeTrain)> {
    require_scheme(config, Scheme::Euler)?;
    validate_run(model, current, init, config)?;
    let mut acc = RunAccumulator::new(init, Branch::Time);
    let mut state = init;
    while state.t < config.t_end {
        let tau = clamp_time_step(current, state.t, config.dt, config.t_end);
        if tau <= 0.0 {
            break;
        }
        let next = euler_step(model, current, state, tau)?;
        acc.step_count += 1;
        if next.v >= config.theta {
            let at = detect_time_crossing(state, next, config.theta, config.spike_detection);
            match acc.spike_and_reset(model, at, Branch::Time) {
                Some(reset) => {
                    state = reset;
                    continue;
                }
                None => return Ok(acc.finish(Termination::EventLimit)),
            }
        }
        if next.v > V_OVERFLOW_GUARD {
            return Err(Error::Diverged {
                t: next.t,
                what: "membrane exceeded the overflow guard without crossing the cutoff",
            });
        }
        acc.record(next, Branch::Time);
        state = next;
    }
    Ok(acc.finish(Termination::Horizon))
}

/// Shared hybrid driver: fixed steps when `adaptive` is `None`, the
/// curvature-controlled steps otherwise.
fn run_hybrid(
    model: &ModelSpec,
    current: &InputCurrent,
    init: SimState,
    config: &SolverConfig,
    adaptive: bool,
) -> Result<(Vec<TrajectoryPoint>, SpikeTrain)> {
    let mut state = init;
    let g0 = model.f(state.v)? - state.w + current.value(state.t);
    let first_branch = if g0.abs() < config.m_switch {
        Branch::Time
    } else {
        Branch::Phase
    };
    let mut acc = RunAccumulator::new(init, first_branch);
    let mut floored_run = 0u64;

    while state.t < config.t_end {
        let g = model.f(state.v)? - state.w + current.value(state.t);
        let (branch, raw_step) = if adaptive {
            let (branch, step) = adaptive_step(model, current, state, config)?;
            if step <= STEP_FLOOR {
                floored_run += 1;
                if floored_run > STAGNATION_LIMIT {
                    return Err(Error::Stagnation {
                        t: state.t,
                        detail: format!(
                            "{STAGNATION_LIMIT} consecutive steps at the floor {STEP_FLOOR:e}"
                        ),
                    });
                }
            } else {
                floored_run = 0;
            }
            (branch, step)
        } else if g.abs() < config.m_switch {
            (Branch::Time, config.dt)
        } else {
            (Branch::Phase, config.dv)
        };

        match branch {
            Branch::Time => {
                let tau = clamp_time_step(current, state.t, raw_step, config.t_end);
                if tau <= 0.0 {
                    break;
                }
                let next = euler_step(model, current, state, tau)?;
                acc.step_count += 1;
                if next.v >= config.theta {
                    let at =
                        detect_time_crossing(state, next, config.theta, config.spike_detection);
                    match acc.spike_and_reset(model, at, Branch::Time) {
                        Some(reset) => {
                            state = reset;
                            continue;
                        }
                        None => return Ok(acc.finish(Termination::EventLimit)),
                    }
                }
                if next.v > V_OVERFLOW_GUARD {
                    return Err(Error::Diverged {
                        t: next.t,
                        what: "membrane exceeded the overflow guard without crossing the cutoff",
                    });
                }
                acc.record(next, Branch::Time);
                state = next;
            }
            Branch::Phase => {
                let mut dv = raw_step;
                let mut landing = false;
                if g > 0.0 && state.v + dv >= config.theta {
                    dv = config.theta - state.v;
                    landing = true;
                }
                // Never straddle an input jump: shrink so the time increment
                // lands on the jump, first-order exact because the step uses
                // the same frozen drift.
                if let Some(jump) = current.next_jump_after(state.t) {
                    let dt_projected = dv / g.abs();
                    let remaining = jump - state.t;
                    if state.t + dt_projected > jump {
                        if remaining * g.abs() < STEP_FLOOR {
                            state.t = jump;
                            continue;
                        }
                        dv = remaining * g.abs();
                        landing = false;
                    }
                }
                let next = phase_step(model, current, state, dv * g.signum())?;
                acc.step_count += 1;
                if landing {
                    let at = SimState {
                        t: next.t,
                        v: config.theta,
                        w: next.w,
                    };
                    match acc.spike_and_reset(model, at, Branch::Phase) {
                        Some(reset) => {
                            state = reset;
                            continue;
                        }
                        None => return Ok(acc.finish(Termination::EventLimit)),
                    }
                }
                acc.record(next, Branch::Phase);
                state = next;
            }
        }
    }
    Ok(acc.finish(Termination::Horizon))
}

/// Hybrid algorithm with fixed steps `dt` (time branch) and `dv` (phase
/// branch).
pub fn simulate_hybrid_fixed(
    model: &ModelSpec,
    current: &InputCurrent,
    init: SimState,
    config: &SolverConfig,
) -> Result<(Vec<TrajectoryPoint>, SpikeTrain)> {
    require_scheme(config, Scheme::HybridFixed)?;
    validate_run(model, current, init, config)?;
    run_hybrid(model, current, init, config, false)
}

/// Hybrid algorithm with curvature-controlled steps targeting a per-step
/// precision `epsilon`.
pub fn simulate_hybrid_adaptive(
    model: &ModelSpec,
    current: &InputCurrent,
    init: SimState,
    config: &SolverConfig,
) -> Result<(Vec<TrajectoryPoint>, SpikeTrain)> {
    require_scheme(config, Scheme::HybridAdaptive)?;
    validate_run(model, current, init, config)?;
    run_hybrid(model, current, init, config, true)
}

fn require_scheme(config: &SolverConfig, expected: Scheme) -> Result<()> {
    if config.scheme != expected {
        return Err(Error::InvalidParameter {
            name: "scheme",
            reason: format!(
                "driver expects {}, config selects {}",
                expected.name(),
                config.scheme.name()
            ),
        });
    }
    Ok(())
}

fn validate_run(
    model: &ModelSpec,
    current: &InputCurrent,
    init: SimState,
    config: &SolverConfig,
) -> Result<()> {
    model.validate()?;
    current.validate()?;
    config.validate(model)?;
    if !init.is_finite() {
        return Err(Error::InvalidParameter {
            name: "init",
            reason: "initial state must be finite".into(),
        });
    }
    Ok(())
}

// --- reference solver -------------------------------------------------------

/// One classical RK4 step of a planar system `dy/dx = deriv(x, y)`.
fn rk4(
    deriv: &impl Fn(f64, [f64; 2]) -> Result<[f64; 2]>,
    x: f64,
    y: [f64; 2],
    h: f64,
) -> Result<[f64; 2]> {
    let k1 = deriv(x, y)?;
    let k2 = deriv(
        x + 0.5 * h,
        [y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]],
    )?;
    let k3 = deriv(
        x + 0.5 * h,
        [y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]],
    )?;
    let k4 = deriv(x + h, [y[0] + h * k3[0], y[1] + h * k3[1]])?;
    Ok([
        y[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        y[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    ])
}

/// Step-doubling: one full step vs two half steps, Richardson-extrapolated.
/// Returns the fifth-order state and the estimated local error of it.
fn rk4_doubled(
    deriv: &impl Fn(f64, [f64; 2]) -> Result<[f64; 2]>,
    x: f64,
    y: [f64; 2],
    h: f64,
) -> Result<([f64; 2], f64)> {
    let full = rk4(deriv, x, y, h)?;
    let half = rk4(deriv, x, y, 0.5 * h)?;
    let half2 = rk4(deriv, x + 0.5 * h, half, 0.5 * h)?;
    let d0 = half2[0] - full[0];
    let d1 = half2[1] - full[1];
    let refined = [half2[0] + d0 / 15.0, half2[1] + d1 / 15.0];
    let err = (d0.abs().max(d1.abs())) / 15.0;
    Ok((refined, err))
}

struct Controller {
    tol: f64,
    h: f64,
}

impl Controller {
    /// Advance one accepted doubled step in direction `sign`, shrinking on
    /// rejection. Returns `(x_new, y_new, h_used)` with `h_used` unsigned.
    fn step(
        &mut self,
        deriv: &impl Fn(f64, [f64; 2]) -> Result<[f64; 2]>,
        x: f64,
        y: [f64; 2],
        h_limit: f64,
        sign: f64,
        t_context: f64,
    ) -> Result<(f64, [f64; 2], f64)> {
        let mut h = self.h.min(h_limit);
        for _ in 0..200 {
            if h < STEP_FLOOR {
                return Err(Error::OracleFailure {
                    t: t_context,
                    detail: format!("tolerance unachievable above the step floor {STEP_FLOOR:e}"),
                });
            }
            let (y_new, err) = rk4_doubled(deriv, x, y, sign * h)?;
            let scale = self.tol * (1.0 + y[0].abs().max(y[1].abs()));
            if err <= scale {
                let grow = if err == 0.0 {
                    5.0
                } else {
                    (0.9 * (scale / err).powf(0.2)).clamp(0.2, 5.0)
                };
                self.h = (h * grow).max(STEP_FLOOR);
                return Ok((x + sign * h, y_new, h));
            }
            h *= (0.9 * (scale / err).powf(0.2)).clamp(0.1, 0.9);
        }
        Err(Error::OracleFailure {
            t: t_context,
            detail: "step-size control failed to converge".into(),
        })
    }
}

/// High-accuracy hybrid reference solver: classical RK4 with step-doubling
/// local error control in both branches, spikes resolved exactly in the
/// phase branch where `v` is the independent variable.
pub fn reference_solve(
    model: &ModelSpec,
    current: &InputCurrent,
    init: SimState,
    config: &SolverConfig,
) -> Result<(Vec<TrajectoryPoint>, SpikeTrain)> {
    require_scheme(config, Scheme::Oracle)?;
    validate_run(model, current, init, config)?;

    let mut state = init;
    let g0 = model.f(state.v)? - state.w + current.value(state.t);
    let first_branch = if g0.abs() < config.m_switch {
        Branch::Time
    } else {
        Branch::Phase
    };
    let mut acc = RunAccumulator::new(init, first_branch);
    let mut time_ctl = Controller {
        tol: config.oracle_tol,
        h: 1e-3,
    };
    let mut phase_ctl = Controller {
        tol: config.oracle_tol,
        h: 1e-3,
    };

    let a = model.a;
    let b = model.b;
    let time_deriv = |t: f64, y: [f64; 2]| -> Result<[f64; 2]> {
        let g = model.f(y[0])? - y[1] + current.value(t);
        Ok([g, a * (b * y[0] - y[1])])
    };
    let phase_deriv = |v: f64, y: [f64; 2]| -> Result<[f64; 2]> {
        let g = model.f(v)? - y[1] + current.value(y[0]);
        if g == 0.0 {
            return Err(Error::NotInvertible { v, gradient: g });
        }
        Ok([1.0 / g, a * (b * v - y[1]) / g])
    };

    while state.t < config.t_end {
        let g = model.f(state.v)? - state.w + current.value(state.t);
        if g.abs() < config.m_switch {
            // Time branch.
            let mut h_limit = config.t_end - state.t;
            if let Some(jump) = current.next_jump_after(state.t) {
                h_limit = h_limit.min(jump - state.t);
            }
            if h_limit <= STEP_FLOOR {
                if let Some(jump) = current.next_jump_after(state.t) {
                    if jump < config.t_end {
                        state.t = jump;
                        continue;
                    }
                }
                break;
            }
            let (t_new, y_new, h_used) =
                time_ctl.step(&time_deriv, state.t, [state.v, state.w], h_limit, 1.0, state.t)?;
            acc.step_count += 1;
            if y_new[0] >= config.theta {
                // Rare: the cutoff was crossed inside a time step. Bisect the
                // step length to land on the cutoff.
                let mut lo = 0.0;
                let mut hi = h_used;
                let mut at = (t_new, y_new);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    let y_mid = rk4(&time_deriv, state.t, [state.v, state.w], mid)?;
                    if y_mid[0] >= config.theta {
                        hi = mid;
                        at = (state.t + mid, y_mid);
                    } else {
                        lo = mid;
                    }
                    if (at.1[0] - config.theta).abs()
                        <= 1e-12 * config.theta.abs().max(1.0)
                    {
                        break;
                    }
                }
                let spike = SimState {
                    t: at.0,
                    v: config.theta,
                    w: at.1[1],
                };
                match acc.spike_and_reset(model, spike, Branch::Time) {
                    Some(reset) => {
                        state = reset;
                        continue;
                    }
                    None => return Ok(acc.finish(Termination::EventLimit)),
                }
            }
            state = SimState {
                t: t_new,
                v: y_new[0],
                w: y_new[1],
            };
            acc.record(state, Branch::Time);
        } else {
            // Phase branch: march v, integrate (T, W).
            let sign = g.signum();
            let mut h_limit = if sign > 0.0 {
                config.theta - state.v
            } else {
                f64::INFINITY
            };
            let mut landing = sign > 0.0 && phase_ctl.h >= h_limit;
            if let Some(jump) = current.next_jump_after(state.t) {
                // Shrink so the projected time increment stays short of the
                // jump; the controller then lands near it and a snap follows.
                let dt_remaining = jump - state.t;
                let dv_to_jump = dt_remaining * g.abs();
                if dv_to_jump < h_limit {
                    if dv_to_jump < STEP_FLOOR {
                        state.t = jump;
                        continue;
                    }
                    h_limit = dv_to_jump;
                    landing = false;
                }
            }
            let x = state.v;
            let y = [state.t, state.w];
            let (x_new, y_new, _h_used) = if landing {
                // Exact landing attempt on theta.
                let h = h_limit;
                let (y_try, err) = rk4_doubled(&phase_deriv, x, y, sign * h)?;
                let scale = config.oracle_tol * (1.0 + y[0].abs().max(y[1].abs()));
                if err <= scale {
                    (x + sign * h, y_try, h)
                } else {
                    phase_ctl.step(&phase_deriv, x, y, h_limit, sign, state.t)?
                }
            } else {
                let mut stepped = phase_ctl.step(&phase_deriv, x, y, h_limit, sign, state.t)?;
                if sign > 0.0 && stepped.0 > config.theta {
                    stepped.0 = config.theta;
                }
                stepped
            };
            acc.step_count += 1;
            let reached_theta = sign > 0.0 && x_new >= config.theta - 0.0;
            state = SimState {
                t: y_new[0],
                v: if reached_theta { config.theta } else { x_new },
                w: y_new[1],
            };
            if reached_theta {
                match acc.spike_and_reset(model, state, Branch::Phase) {
                    Some(reset) => {
                        state = reset;
                        continue;
                    }
                    None => return Ok(acc.finish(Termination::EventLimit)),
                }
            }
            acc.record(state, Branch::Phase);
        }
    }
    Ok(acc.finish(Termination::Horizon))
}

/// Run the scheme selected by `config`.
pub fn simulate(
    model: &ModelSpec,
    current: &InputCurrent,
    init: SimState,
    config: &SolverConfig,
) -> Result<(Vec<TrajectoryPoint>, SpikeTrain)> {
    match config.scheme {
        Scheme::Euler => simulate_euler(model, current, init, config),
        Scheme::HybridFixed => simulate_hybrid_fixed(model, current, init, config),
        Scheme::HybridAdaptive => simulate_hybrid_adaptive(model, current, init, config),
        Scheme::Oracle => reference_solve(model, current, init, config),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Nonlinearity;

    fn izhikevich() -> ModelSpec {
        ModelSpec {
            kind: Nonlinearity::QuadraticIzhikevich {
                p2: 0.04,
                p1: 5.0,
                p0: 140.0,
            },
            a: 0.02,
            b: 0.19,
            v_reset: -59.9,
            w_jump: 1.15,
        }
    }

    fn canonical(a: f64, b: f64) -> ModelSpec {
        ModelSpec {
            kind: Nonlinearity::CanonicalQuadratic,
            a,
            b,
            v_reset: 0.0,
            w_jump: 0.0,
        }
    }

    fn constant(value: f64) -> InputCurrent {
        InputCurrent::Constant { value }
    }

    #[test]
    fn euler_step_hand_arithmetic() {
        let next = euler_step(
            &canonical(1.0, 1.0),
            &constant(0.0),
            SimState::new(0.0, 1.0, 0.0),
            0.1,
        )
        .unwrap();
        assert!((next.t - 0.1).abs() < 1e-15);
        assert!((next.v - 1.1).abs() < 1e-15);
        assert!((next.w - 0.1).abs() < 1e-15);

        let next = euler_step(
            &izhikevich(),
            &constant(7.6),
            SimState::new(0.0, 0.0, 0.0),
            0.1,
        )
        .unwrap();
        assert!((next.t - 0.1).abs() < 1e-15);
        assert!((next.v - 14.76).abs() < 1e-12);
        assert_eq!(next.w, 0.0);
    }

    #[test]
    fn euler_step_zero_tau_is_identity() {
        let state = SimState::new(3.0, -5.0, 2.0);
        let next = euler_step(&izhikevich(), &constant(7.6), state, 0.0).unwrap();
        assert_eq!(next, state);
    }

    #[test]
    fn phase_step_hand_arithmetic() {
        let next = phase_step(
            &canonical(1.0, 1.0),
            &constant(0.0),
            SimState::new(0.0, 2.0, 0.0),
            0.1,
        )
        .unwrap();
        assert!((next.t - 0.025).abs() < 1e-15);
        assert!((next.v - 2.1).abs() < 1e-15);
        assert!((next.w - 0.05).abs() < 1e-15);
    }

    #[test]
    fn phase_step_zero_dv_is_identity() {
        let state = SimState::new(1.0, 2.0, 0.0);
        let next = phase_step(&canonical(1.0, 1.0), &constant(0.0), state, 0.0).unwrap();
        assert_eq!(next, state);
    }

    #[test]
    fn phase_step_rejects_sign_mismatch_and_zero_drift() {
        let model = canonical(1.0, 1.0);
        let state = SimState::new(0.0, 2.0, 0.0);
        assert!(phase_step(&model, &constant(0.0), state, -0.1).is_err());
        // v = 1, w = 1, I = 0 gives exactly zero drift.
        let stalled = SimState::new(0.0, 1.0, 1.0);
        assert!(matches!(
            phase_step(&model, &constant(0.0), stalled, 0.1),
            Err(Error::NotInvertible { .. })
        ));
    }

    #[test]
    fn phase_time_increment_shrinks_as_v_grows() {
        let model = canonical(1.0, 1.0);
        let mut state = SimState::new(0.0, 2.0, 0.0);
        let mut last_increment = f64::INFINITY;
        for _ in 0..50 {
            let next = phase_step(&model, &constant(0.0), state, 0.1).unwrap();
            let increment = next.t - state.t;
            assert!(increment > 0.0);
            assert!(increment < last_increment);
            last_increment = increment;
            state = next;
        }
    }

    #[test]
    fn reset_hand_arithmetic() {
        let after = apply_reset(&izhikevich(), SimState::new(5.0, 30.2, 2.0));
        assert_eq!(after.t, 5.0);
        assert_eq!(after.v, -59.9);
        assert!((after.w - 3.15).abs() < 1e-15);

        let mut model = izhikevich();
        model.w_jump = 0.0;
        let after = apply_reset(&model, SimState::new(1.0, 31.0, 2.0));
        assert_eq!(after.w, 2.0);
        assert_eq!(after.v, -59.9);
    }

    #[test]
    fn adaptive_step_time_branch_hand_values() {
        let model = canonical(1.0, 1.0);
        let mut config = SolverConfig::new(Scheme::HybridAdaptive, 1e4);
        config.m_switch = 10.0;
        config.epsilon = 0.01;
        config.dt_cap = 1.0;
        let (branch, step) = adaptive_step(
            &model,
            &constant(0.0),
            SimState::new(0.0, 2.0, 0.0),
            &config,
        )
        .unwrap();
        // G = 4: v'' = 4*4 - 2 = 14, w'' = 4 - 2 = 2.
        assert_eq!(branch, Branch::Time);
        assert!((step - 0.01 / 14.0).abs() < 1e-15);
    }

    #[test]
    fn adaptive_step_phase_branch_hand_values() {
        let model = canonical(1.0, 1.0);
        let mut config = SolverConfig::new(Scheme::HybridAdaptive, 1e4);
        config.m_switch = 1.0;
        config.epsilon = 0.01;
        config.dv_cap = 10.0;
        let (branch, step) = adaptive_step(
            &model,
            &constant(0.0),
            SimState::new(0.0, 2.0, 0.0),
            &config,
        )
        .unwrap();
        // G = 4: W'' = 1/4 - 2/16 - 8/16 - 4/64 = -0.4375,
        //        T'' = -(16 - 2)/64 = -0.21875.
        assert_eq!(branch, Branch::Phase);
        assert!((step - 0.01 / 0.4375).abs() < 1e-15);
    }

    #[test]
    fn adaptive_step_zero_adaptation_drops_w_terms() {
        let model = canonical(0.0, 1.0);
        let mut config = SolverConfig::new(Scheme::HybridAdaptive, 1e4);
        config.m_switch = 20.0;
        config.epsilon = 0.01;
        // G = 4, v'' = F' G = 16, w'' = 0.
        let (branch, step) = adaptive_step(
            &model,
            &constant(0.0),
            SimState::new(0.0, 2.0, 0.0),
            &config,
        )
        .unwrap();
        assert_eq!(branch, Branch::Time);
        assert!((step - 0.01 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn adaptive_step_is_linear_in_epsilon() {
        let model = izhikevich();
        let mut config = SolverConfig::new(Scheme::HybridAdaptive, 30.0);
        config.epsilon = 0.01;
        let state = SimState::new(0.0, -65.0, -12.35);
        let (_, step1) = adaptive_step(&model, &constant(7.6), state, &config).unwrap();
        config.epsilon = 0.001;
        let (_, step2) = adaptive_step(&model, &constant(7.6), state, &config).unwrap();
        assert!((step1 / step2 - 10.0).abs() < 1e-9);
    }

    #[test]
    fn hybrid_fixed_with_infinite_switch_is_euler() {
        let model = izhikevich();
        let current = constant(7.6);
        let init = SimState::new(0.0, -65.0, -12.35);
        let mut euler_cfg = SolverConfig::new(Scheme::Euler, 30.0);
        euler_cfg.dt = 0.01;
        euler_cfg.t_end = 50.0;
        let mut hybrid_cfg = SolverConfig::new(Scheme::HybridFixed, 30.0);
        hybrid_cfg.dt = 0.01;
        hybrid_cfg.dv = 0.5;
        hybrid_cfg.m_switch = f64::INFINITY;
        hybrid_cfg.t_end = 50.0;
        let (traj_e, train_e) = simulate_euler(&model, &current, init, &euler_cfg).unwrap();
        let (traj_h, train_h) = simulate_hybrid_fixed(&model, &current, init, &hybrid_cfg).unwrap();
        assert_eq!(train_e.events, train_h.events);
        assert_eq!(train_e.step_count, train_h.step_count);
        assert_eq!(traj_e.len(), traj_h.len());
        for (p, q) in traj_e.iter().zip(traj_h.iter()) {
            assert_eq!((p.t, p.v, p.w), (q.t, q.v, q.w));
        }
    }

    #[test]
    fn hybrid_fixed_resolves_one_dimensional_blowup() {
        // a = 0, w0 = 0 freezes w; v' = v^2 from v0 = 1 crosses theta = 100
        // at t = 1 - 1/100 = 0.99.
        let model = canonical(0.0, 0.0);
        let current = constant(0.0);
        let init = SimState::new(0.0, 1.0, 0.0);
        let mut errs = Vec::new();
        for dv in [1e-3, 1e-4] {
            let mut config = SolverConfig::new(Scheme::HybridFixed, 100.0);
            config.dt = 0.01;
            config.dv = dv;
            config.m_switch = 1.0;
            config.t_end = 2.0;
            let (_, train) = simulate_hybrid_fixed(&model, &current, init, &config).unwrap();
            let spike = train.first().expect("must spike");
            errs.push((spike.time - 0.99).abs());
        }
        assert!(errs[0] < 1e-2, "dv=1e-3 error {}", errs[0]);
        assert!(errs[1] < 1e-3, "dv=1e-4 error {}", errs[1]);
        assert!(errs[1] < errs[0]);
    }

    #[test]
    fn oracle_matches_analytic_blowup_time() {
        let model = canonical(0.0, 0.0);
        let current = constant(0.0);
        let init = SimState::new(0.0, 1.0, 0.0);
        let mut config = SolverConfig::new(Scheme::Oracle, 1e6);
        config.t_end = 2.0;
        let (_, train) = reference_solve(&model, &current, init, &config).unwrap();
        let spike = train.first().expect("must spike");
        assert!(
            (spike.time - (1.0 - 1e-6)).abs() <= 1e-9,
            "crossing time error {:e}",
            (spike.time - (1.0 - 1e-6)).abs()
        );
    }

    #[test]
    fn oracle_reproduces_frozen_first_spike() {
        let model = izhikevich();
        let current = constant(7.6);
        let init = SimState::new(0.0, -65.0, -12.35);
        let mut config = SolverConfig::new(Scheme::Oracle, 30.0);
        config.t_end = 20.0;
        let (_, train) = reference_solve(&model, &current, init, &config).unwrap();
        let spike = train.first().expect("must spike");
        assert!(
            (spike.time - 4.4931).abs() < 1e-3,
            "spike time {}",
            spike.time
        );
        assert!(
            (spike.w - (-12.09931)).abs() < 1e-3,
            "w at spike {}",
            spike.w
        );
    }

    #[test]
    fn oracle_exercises_both_branches_on_the_second_cycle() {
        let model = izhikevich();
        let current = constant(7.6);
        let init = SimState::new(0.0, -59.9, -8.132953);
        let mut config = SolverConfig::new(Scheme::Oracle, 30.0);
        config.t_end = 40.0;
        let (traj, train) = reference_solve(&model, &current, init, &config).unwrap();
        let spike = train.first().expect("must spike");
        assert!(
            (spike.time - 18.8368).abs() < 2e-3,
            "spike time {}",
            spike.time
        );
        assert!((spike.w - (-8.94765)).abs() < 1e-3, "w at spike {}", spike.w);
        assert!(traj.iter().any(|p| p.branch == Branch::Time));
        assert!(traj.iter().any(|p| p.branch == Branch::Phase));
    }

    #[test]
    fn linear_interp_crossing_arithmetic() {
        let model = canonical(0.0, 0.0);
        let current = constant(0.0);
        let init = SimState::new(0.0, 9.0, 0.0);
        let mut config = SolverConfig::new(Scheme::Euler, 10.0);
        config.dt = 0.05;
        config.t_end = 1.0;
        config.spike_detection = SpikeDetection::LinearInterp;
        let (_, train) = simulate_euler(&model, &current, init, &config).unwrap();
        let spike = train.first().expect("must spike");
        // One step: v goes 9 -> 9 + 0.05*81 = 13.05; fraction = 1/4.05.
        let frac: f64 = 1.0 / 4.05;
        assert!((spike.time - 0.05 * frac).abs() < 1e-12);
    }

    #[test]
    fn monotone_time_and_increasing_spike_times() {
        let model = izhikevich();
        let current = constant(7.6);
        let init = SimState::new(0.0, -65.0, -12.35);
        let mut config = SolverConfig::new(Scheme::HybridAdaptive, 30.0);
        config.t_end = 120.0;
        let (traj, train) = simulate_hybrid_adaptive(&model, &current, init, &config).unwrap();
        for pair in traj.windows(2) {
            let same_reset_instant = pair[1].t == pair[0].t && pair[1].v == model.v_reset;
            assert!(
                pair[1].t > pair[0].t || same_reset_instant,
                "non-monotone t at {:?} -> {:?}",
                pair[0],
                pair[1]
            );
        }
        for pair in train.events.windows(2) {
            assert!(pair[1].time > pair[0].time);
        }
        assert!(train.step_count >= train.events.len() as u64);
    }

    #[test]
    fn input_jump_is_never_straddled() {
        let model = izhikevich();
        let current = InputCurrent::PiecewiseConstant {
            jumps: vec![1.005],
            values: vec![0.0, 7.6],
        };
        let init = SimState::new(0.0, -65.0, -12.35);
        let mut config = SolverConfig::new(Scheme::Euler, 30.0);
        config.dt = 0.01;
        config.t_end = 3.0;
        let (traj, _) = simulate_euler(&model, &current, init, &config).unwrap();
        // One step must land exactly on the jump time.
        assert!(traj.iter().any(|p| p.t == 1.005));
        for pair in traj.windows(2) {
            let crosses = pair[0].t < 1.005 && pair[1].t > 1.005;
            assert!(!crosses, "step straddles the jump: {:?} {:?}", pair[0], pair[1]);
        }
    }

    #[test]
    fn event_limit_terminates_runaway_configs() {
        // This is a structural test of the limit plumbing: lower the horizon
        // so only a handful of spikes fit instead of letting a run hit 1e6.
        let model = izhikevich();
        let current = constant(7.6);
        let init = SimState::new(0.0, -65.0, -12.35);
        let mut config = SolverConfig::new(Scheme::HybridAdaptive, 30.0);
        config.t_end = 200.0;
        let (_, train) = simulate_hybrid_adaptive(&model, &current, init, &config).unwrap();
        assert_eq!(train.terminated_by, Termination::Horizon);
        assert!(train.events.len() > 3);
    }

    #[test]
    fn scheme_mismatch_is_a_validation_error() {
        let model = izhikevich();
        let config = SolverConfig::new(Scheme::Euler, 30.0);
        let err = simulate_hybrid_fixed(
            &model,
            &constant(7.6),
            SimState::new(0.0, -65.0, -12.35),
            &config,
        )
        .unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn unstable_dt_is_rejected() {
        let model = izhikevich();
        let mut config = SolverConfig::new(Scheme::Euler, 30.0);
        config.dt = 60.0;
        assert!(config.validate(&model).is_err());
    }
}
