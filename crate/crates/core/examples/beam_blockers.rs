//! Blocking the reference beam or the recombined front beam.

use whichway::beamline::ContrastMatrix;
use whichway::run::{execute, RunConfig};

fn main() -> whichway::Result<()> {
    for name in ["block-r", "block-i2"] {
        for contrast in [ContrastMatrix::ideal(), ContrastMatrix::measured()] {
            let mut cfg = RunConfig::from_preset(name)?;
            cfg.scenario.contrast = contrast;
            let h = execute(&cfg)?.peaks.heights();
            let tag = if contrast.is_ideal() { "ideal" } else { "measured" };
            println!("{name:>8} {tag:>8}: {:.3e} {:.3e} {:.3e} {:.3e}", h[0], h[1], h[2], h[3]);
        }
    }
    Ok(())
}
