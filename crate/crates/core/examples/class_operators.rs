// Moving between per-instance masses and per-class proportions.

use jcpot::class_ops::{build_class_operators, mass_from_proportions, proportions_from_mass};
use jcpot::{ProportionVector, Result};
use ndarray::Array1;

pub fn run() -> Result<()> {
    let labels = [0, 0, 0, 1, 1];
    let ops = build_class_operators(&labels, 2)?;
    println!("d1 =\n{}", ops.d1());
    println!("d2 =\n{}", ops.d2());
    println!("d1 d2 =\n{}", ops.d1().dot(ops.d2()));

    // uniform instance mass -> empirical class proportions
    let m = Array1::from_elem(labels.len(), 1.0 / labels.len() as f64);
    let h = proportions_from_mass(&ops, m.view())?;
    println!("uniform mass gives h = {:?}", h.values());

    // reweighting the domain to a different class balance
    let target = ProportionVector::on_simplex(vec![0.2, 0.8])?;
    let m = mass_from_proportions(&ops, &target)?;
    println!("mass for h = [0.2, 0.8]: {m}");
    let back = proportions_from_mass(&ops, m.view())?;
    assert!((back[0] - 0.2).abs() < 1e-12 && (back[1] - 0.8).abs() < 1e-12);

    // a domain without some class is rejected
    match build_class_operators(&[0, 0, 2], 3) {
        Err(e) => println!("labels [0, 0, 2] with 3 classes: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run()
}
