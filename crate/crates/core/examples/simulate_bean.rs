//! Branching trajectories of the bean from seeds on the escaping segment, with the
//! invariance check for K and a JSON dump.
//!
//! `cargo run --release --example simulate_bean -- out.json`

use fpe::integrate::{check_invariant_set, generate_trajectories, BranchPolicy};
use fpe::io::write_trajectories_json;
use fpe::psvf::Tolerances;
use fpe::systems::bean::{bean_system, in_k};
use fpe::systems::controls::sigma_seeds;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sys = bean_system();
    let policy = BranchPolicy { horizon: 6.0, branch_window: Some((0.0, 1.5)), ..Default::default() };
    let g = generate_trajectories(&sys, &sigma_seeds(-0.6, -0.1, 6), &policy, 0.01, &Tolerances::default())?;
    let inv = check_invariant_set(&|p| in_k(p, 0.0), &g.trajectories, 1e-9);
    println!("trajectories: {}", g.trajectories.len());
    println!("budget exceeded: {}", g.budget_exceeded);
    println!("K invariant: {} ({} samples checked)", inv.holds, inv.samples_checked);
    let t = &g.trajectories[0];
    for d in &t.decisions {
        println!("  t = {:+.3} at ({:+.4}, {:+.4}): {}", d.time, d.at[0], d.at[1], d.choice.label());
    }
    if let Some(path) = std::env::args().nth(1) {
        write_trajectories_json(std::fs::File::create(&path)?, &g.trajectories)?;
        println!("wrote {path}");
    }
    Ok(())
}
