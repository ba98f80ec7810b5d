//! Loads a system from JSON, classifies Σ and rescales time.
//!
//! `cargo run --example custom_system -- crates/core/examples/data/fold_pair.json`

use fpe::psvf::{classify_point, Tolerances, Vec2};
use fpe::systems::{load_system_json, rescale_system};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args().nth(1).unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/examples/data/fold_pair.json").into());
    let sys = load_system_json(&std::fs::read_to_string(&path)?)?;
    let tol = Tolerances::default();
    println!("{} on {:?}", sys.name, sys.domain);
    let mut last = String::new();
    for i in 0..=400 {
        let x = sys.domain.xmin + (sys.domain.xmax - sys.domain.xmin) * i as f64 / 400.0;
        let label = classify_point(&sys, sys.f.project(Vec2::new(x, 0.0)), &tol).label();
        if label != last {
            println!("  from x = {x:+.3}: {label}");
            last = label;
        }
    }
    let slow = rescale_system(&sys, 2)?;
    let p = Vec2::new(0.5, 0.5);
    println!("X at {p:?}: {:?}; rescaled by 1/2: {:?}", sys.x.eval(p).as_slice(), slow.x.eval(p).as_slice());
    Ok(())
}
