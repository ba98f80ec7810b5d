//! Growth under F₁² against F₁ on the α = 3 rosette: the slope doubles.

use fpe::entropy::power_check;
use fpe::systems::rosette::build_rosette;
use fpe::systems::symbolic::SymbolicSet;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let r = build_rosette(3)?;
    let lib = &r.library;
    let rep = power_check(
        |n, m| Ok(SymbolicSet::full(lib, 0, (m * n) as i64, 8, (m * (n - 1)) as i64, lib.extent())),
        2,
        0.4 * lib.mu,
        &[1, 2, 3],
        8,
    )?;
    println!("F1   counts {:?}, slope {:.4}", rep.counts_f1, rep.slope_f1);
    println!("F1^2 counts {:?}, slope {:.4}", rep.counts_fm, rep.slope_fm);
    println!("ratio {:?}", rep.ratio);
    Ok(())
}
