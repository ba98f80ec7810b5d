//! The trajectory-space metric ρ, the time-one map and the Bowen metric d_n on two
//! rosette trajectories that differ in a single slot.

use fpe::systems::rosette::build_rosette;
use fpe::systems::symbolic::Word;
use fpe::traj_space::{dn_metric, rho, time_one, truncation_bound, ShiftedView, TrajectoryMetricConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let r = build_rosette(3)?;
    let lib = &r.library;
    let a = lib.render(&Word { lo: 0, core: vec![0, 1, 2, 0] }, 10, 10, "rosette:3");
    let b = lib.render(&Word { lo: 0, core: vec![0, 1, 1, 0] }, 10, 10, "rosette:3");
    let cfg = TrajectoryMetricConfig::new(10.0, 0.01, lib.extent())?;
    let (ga, gb) = (ShiftedView::new(&a), ShiftedView::new(&b));
    println!("mu = {:.6}", lib.mu);
    for w in [4, 6, 8] {
        println!("rho_W'={w} = {:.6} (truncation bound {:.2e})", rho(&ga, &gb, &cfg, w)?, truncation_bound(cfg.diam, w));
    }
    println!("rho(F1 a, F1 b) = {:.6}", rho(&time_one(&ga)?, &time_one(&gb)?, &cfg, 8)?);
    for n in 1..=4 {
        println!("d_{n} = {:.6}", dn_metric(&ga, &gb, n, &cfg, 6)?);
    }
    Ok(())
}
