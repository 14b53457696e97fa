use qwork::params::PhysicalParams;
use qwork::truncation::{resolve_truncation, HardCaps};
fn main() {
    let p = PhysicalParams::<f64>::quadratic(500.0, 0.3, 0.01);
    let r = resolve_truncation(&p, 1e-12, HardCaps::default(), true).unwrap();
    println!("{r:?}");
    let rep = qwork::analysis::fluctuation_checks(&p, &r.trunc).unwrap();
    println!("jarzynski: {:?} deficit {:?}", rep.summary.jarzynski_residual, rep.deficit);
}
