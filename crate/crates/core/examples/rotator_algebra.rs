//! A single marker rotator acting on a spin-up beam.

use std::f64::consts::PI;

use num_complex::Complex64;
use whichway::amplitude::{overlap, rotate_spin, BeamLabel, BeamState, Hertz, History, Rotator};

fn main() -> whichway::Result<()> {
    let up = BeamState::spin_up(BeamLabel::I, History::I, Complex64::new(1.0, 0.0));
    let marker = Rotator::exact(Hertz::khz(74), PI / 9.0);
    let marked = rotate_spin(&up, &marker)?;

    for c in marked.components() {
        println!("{:?} {:>10}  {:.6}", c.spin, c.offset.to_string(), c.coeff);
    }
    println!("overlap with the unmarked beam: {:.5}", overlap(&up, &marked).re);

    let undone = rotate_spin(&marked, &Rotator::exact(Hertz::khz(74), -PI / 9.0))?;
    println!("after the inverse rotation: {} component(s), norm {:.15}", undone.len(), undone.norm_sqr());
    Ok(())
}
