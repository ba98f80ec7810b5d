//! Capacity counts of the attracting-node and smooth-rotation controls stay flat in n.

use fpe::entropy::{eps_schedule, estimate_from_set};
use fpe::systems::controls::{node0, node0_family, smooth_rot, smooth_rot_family};
use fpe::traj_space::{SampledSet, TrajectoryMetricConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (w_prime, ns) = (12, vec![1, 2, 3, 4, 5, 6]);
    let window = 18.0;
    for (name, g, diam) in [
        ("node0", node0_family(20, window, 0.01)?, node0().domain.diameter()),
        ("smooth-rot", smooth_rot_family(20, window, 0.01)?, smooth_rot().domain.diameter()),
    ] {
        let set = SampledSet::new(g.trajectories, &TrajectoryMetricConfig::new(window, 0.05, diam)?)?;
        let r = estimate_from_set(name, &set, &eps_schedule(0.4, 5), &ns, w_prime)?;
        println!("{name}: h = {:.4}, verdict {}", r.h_estimate, r.verdict);
        for (e, row) in r.sep.iter().enumerate() {
            println!("  eps = {:.4}: {row:?}", r.eps[e]);
        }
    }
    Ok(())
}
