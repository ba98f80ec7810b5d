//! Classifies points of Σ for the bean system and prints the sliding field where it exists.

use fpe::psvf::{classify_point, sliding_field, PointClass, Tolerances, Vec2};
use fpe::systems::bean::bean_system;

fn main() {
    let sys = bean_system();
    let tol = Tolerances::default();
    println!("{:>7}  {:<24} Z^s", "x", "class");
    for i in 0..=20 {
        let p = Vec2::new(-1.0 + 0.1 * i as f64, 0.0);
        let class = classify_point(&sys, p, &tol);
        let zs = match class {
            PointClass::Sliding | PointClass::Escaping => sliding_field(&sys, p, &tol).map(|z| format!("({:+.4}, {:+.1e})", z.x, z.y)).unwrap_or_default(),
            _ => String::new(),
        };
        println!("{:>7.3}  {:<24} {zs}", p.x, class.label());
    }
}
