//! Extracts the two lobes of the figure-8 system and estimates its entropy from them.

use fpe::systems::figure8::build_figure8;
use fpe::systems::symbolic::symbolic_entropy;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let f = build_figure8()?;
    let lib = &f.library;
    println!("lobe durations before rescaling: {:?}", lib.raw_durations);
    println!("arc cost mu = {:.6}", lib.mu);
    for (j, arc) in lib.arcs.iter().enumerate() {
        let far = arc.iter().map(|p| p[0].hypot(p[1])).fold(0.0, f64::max);
        println!("lobe {j}: {} samples, farthest point {far:.4} from the two-fold", arc.len());
    }
    let rep = symbolic_entropy("figure8", lib, &[1, 2], &[1, 2, 3, 4], 8, lib.extent())?;
    println!("counts {:?}", rep.sep);
    println!("h = {:.4} (log 2 = {:.4})", rep.h_estimate, std::f64::consts::LN_2);
    Ok(())
}
