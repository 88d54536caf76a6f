//! Discretization-induced bifurcation on the stock bursting neuron.
//!
//! The same problem is integrated with Euler at two resolutions and with the
//! adaptive hybrid scheme; each spike train is then classified from its
//! sequence of adaptation values at the spikes. The fine grid and the
//! adaptive run agree on a period-2 burst while the coarse grid lands on a
//! qualitatively different train.
//!
//! Run with: cargo run --example bifurcation_sweep

use spikesim::harness::{summarize_pattern, ExperimentConfig};
use spikesim::integrate::simulate;
use spikesim::{Result, Scheme};

fn main() -> Result<()> {
    let base = ExperimentConfig::stock();
    let runs = [
        ("euler, dt = 0.01", Scheme::Euler, 0.01),
        ("euler, dt = 0.1", Scheme::Euler, 0.1),
        ("hybrid-adaptive, eps = 0.01", Scheme::HybridAdaptive, 0.01),
    ];

    println!(
        "{:<30} {:>9} {:>7} {:>12} {:>10}",
        "run", "steps", "spikes", "pattern", "residual"
    );
    for (label, scheme, resolution) in runs {
        let mut solver = base.solver;
        solver.scheme = scheme;
        match scheme {
            Scheme::Euler => solver.dt = resolution,
            Scheme::HybridAdaptive => solver.epsilon = resolution,
            _ => unreachable!(),
        }
        let (_, train) = simulate(&base.model, &base.current, base.init, &solver)?;
        let summary = summarize_pattern(&train).expect("long trains classify");
        println!(
            "{:<30} {:>9} {:>7} {:>12} {:>10.6}",
            label,
            train.step_count,
            train.events.len(),
            summary.label,
            summary.residual
        );

        let tail: Vec<String> = train
            .events
            .iter()
            .rev()
            .take(6)
            .rev()
            .map(|e| format!("{:.5}", e.w))
            .collect();
        println!("    last w at spike: {}", tail.join(", "));
    }

    println!();
    println!("The attractor alternates between two adaptation values, so only");
    println!("runs labelled burst-2 resolve the true orbit; the dt = 0.1 train");
    println!("is an artifact of the grid, not a property of the model.");
    Ok(())
}
