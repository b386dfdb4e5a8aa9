//! How far the first-order marker model is from exact rotations.

use whichway::run::{compare, RunConfig};

fn main() -> whichway::Result<()> {
    let mut cfg = RunConfig::from_preset("chi0")?;
    for alpha in [0.01, 0.1, std::f64::consts::PI / 9.0, 0.8, std::f64::consts::FRAC_PI_2] {
        cfg.scenario.ww_angle = alpha;
        let r = compare(&cfg)?;
        println!(
            "alpha {alpha:.4}: normalized {:.3e}  absolute {:.3e}{}",
            r.max_rel_diff,
            r.max_rel_diff_absolute,
            if r.truncation_warning { "  (first order not trustworthy)" } else { "" }
        );
    }
    Ok(())
}
