//! Sampled check of the escape/return condition on J = [−0.6, −0.1] for the bean.

use fpe::systems::bean::{bean_system, verify_sufficient_conditions, Chart};

fn main() {
    let rep = verify_sufficient_conditions(&bean_system(), Chart { a: -0.6, b: -0.1 }, 32, 20.0, 0.01, 0.1);
    println!("precondition ok: {}, all found: {}", rep.precondition_ok, rep.all_found);
    println!("M = {:?}, c = {:?}", rep.m, rep.c);
    for w in rep.witnesses.iter().step_by(8) {
        println!("x = {:+.4}: return at t = {:?} to x = {:?} after {} decisions", w.x, w.return_time, w.return_x, w.decisions.len());
    }
}
