//! Escape points, the return map P and itinerary codes on the bean's return family.

use fpe::psvf::Tolerances;
use fpe::systems::bean::{bean_system, escape_points, itinerary_code, return_family, return_map_p, EscapePoint, EscapeStructure, EscapeView, ReturnFamily};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sys = bean_system();
    let tol = Tolerances::default();
    let params = ReturnFamily::default();
    let g = return_family(&params)?;
    let es: Vec<Vec<EscapePoint>> = g.trajectories.iter().map(|t| escape_points(&sys, t, &tol)).collect();
    let taus: Vec<f64> = g.trajectories.iter().zip(&es).map(|(t, e)| EscapeView::new(t, e).tau()).collect::<Result<_, _>>()?;
    let esc = EscapeStructure::new(&sys, params.j, &taus, &tol)?;
    println!("{} trajectories; tau in [{:.4}, {:.4}], k = {}, c = {}", g.trajectories.len(), esc.tau_bounds.0, esc.tau_bounds.1, esc.k, esc.rescale_c);
    for (t, e) in g.trajectories.iter().zip(&es).take(5) {
        let v = EscapeView::new(t, e);
        let code = itinerary_code(&esc, &v, 3)?;
        let (p, tau) = return_map_p(&esc, &v)?;
        let shifted = itinerary_code(&esc, &p, 2)?;
        println!("s = {:.4?}  tau = {tau:.4}  s(P) = {:.4?}", code.symbols, shifted.symbols);
    }
    Ok(())
}
