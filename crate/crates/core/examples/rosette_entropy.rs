//! Symbolic entropy of the rosette for several α; the estimate matches log α.

use fpe::systems::rosette::build_rosette;
use fpe::systems::symbolic::symbolic_entropy;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for alpha in 2..=5 {
        let r = build_rosette(alpha)?;
        let lib = &r.library;
        let rep = symbolic_entropy(&format!("rosette:{alpha}"), lib, &[1], &[1, 2, 3], 8, lib.extent())?;
        println!(
            "alpha = {alpha}: mu = {:.4} (spread {:.1e}), counts {:?}, h = {:.4}, log alpha = {:.4}",
            lib.mu,
            lib.mu_spread,
            rep.sep,
            rep.h_estimate,
            (alpha as f64).ln()
        );
    }
    Ok(())
}
