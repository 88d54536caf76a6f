//! Phase-plane structure: fixed points, the spiking zone, and orbit bounds.
//!
//! The subthreshold field has zero, one or two equilibria depending on how
//! the drive compares with the minimum of F(v) - b v. Past the saddle the
//! half-plane w <= b v is invariant and every orbit in it spikes; this
//! example sweeps the drive through the bifurcation, then follows one orbit
//! with the reference solver to confirm it never leaves the zone and stays
//! inside the a-priori bounding box.
//!
//! Run with: cargo run --example phase_plane

use spikesim::harness::ExperimentConfig;
use spikesim::integrate::{reference_solve, SolverConfig};
use spikesim::model::{
    analyze_fixed_points, estimate_trajectory_bounds, in_spiking_zone, FixedPointRegime,
};
use spikesim::{Result, Scheme};

fn main() -> Result<()> {
    let model = ExperimentConfig::stock().model;
    let threshold = -analyze_fixed_points(&model, 0.0)?.m_b;
    println!("drive threshold -m(b) = {threshold:.4}");
    println!();

    for i in [0.0, threshold, 7.6] {
        let analysis = analyze_fixed_points(&model, i)?;
        print!("I = {i:<7.4} ");
        match analysis.regime {
            FixedPointRegime::TwoFixedPoints {
                v_minus,
                v_plus,
                v_minus_stability,
            } => println!(
                "rest at v = {v_minus:.4} ({v_minus_stability:?}), saddle at v = {v_plus:.4}"
            ),
            FixedPointRegime::UniqueNonHyperbolic { v } => {
                println!("saddle-node at v = {v:.4}")
            }
            FixedPointRegime::NoFixedPoint => {
                println!("no equilibria; zone degenerates to {{w <= b v}}")
            }
        }
    }

    // Follow the stock orbit (I = 7.6, above the threshold) with the
    // reference solver and test zone membership at every recorded state.
    let base = ExperimentConfig::stock();
    let mut solver = SolverConfig::new(Scheme::Oracle, 30.0);
    solver.oracle_tol = 1e-10;
    solver.t_end = 50.0;
    let (points, train) = reference_solve(&base.model, &base.current, base.init, &solver)?;
    let i_star = base.current.lower_bound();
    let mut inside = 0usize;
    for p in &points {
        if !in_spiking_zone(&base.model, i_star, p.v, p.w)? {
            println!("left the zone at t = {}", p.t);
            return Ok(());
        }
        inside += 1;
        if p.v >= solver.theta {
            break; // the crossing itself is the last pre-reset state
        }
    }
    println!();
    println!(
        "orbit from ({}, {}): {} states up to the first spike, all inside the zone",
        base.init.v, base.init.w, inside
    );
    println!("spikes in [0, {}]: {}", solver.t_end, train.events.len());

    let init_box = (-80.0, 0.0, -20.0, 10.0);
    let bounds = estimate_trajectory_bounds(&base.model, &base.current, init_box, solver.theta)?;
    println!();
    println!(
        "orbits from [{}, {}] x [{}, {}] stay in v in [{:.4}, {:.4}], w in [{:.4}, {:.4}]",
        init_box.0, init_box.1, init_box.2, init_box.3,
        bounds.v_low, bounds.v_high, bounds.w_low, bounds.w_high
    );
    println!(
        "lower and w-bounds independent of the cutoff: {}",
        bounds.theta_independent
    );
    Ok(())
}
