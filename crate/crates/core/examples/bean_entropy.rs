//! Capacity growth of the bean: separated-count slopes rise as ε shrinks.
//! Takes a couple of minutes in release mode; pass `quick` for a smaller run.

use fpe::systems::bean::{bean_entropy, BeanEntropy};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut params = BeanEntropy::default();
    if std::env::args().nth(1).as_deref() == Some("quick") {
        params.ns = vec![1, 2, 3];
        params.eps.truncate(3);
    }
    let r = bean_entropy(&params)?;
    for (e, s) in r.slopes.iter().enumerate() {
        println!("eps = {:.4}: sep {:?}, slope {:.4} on n in [{}, {}]", s.eps, r.sep[e], s.sep.slope, s.sep.n_lo, s.sep.n_hi);
    }
    println!("slopes increasing: {}", r.slopes_increasing);
    println!("verdict: {}", r.verdict);
    for n in &r.notes {
        println!("note: {n}");
    }
    Ok(())
}
