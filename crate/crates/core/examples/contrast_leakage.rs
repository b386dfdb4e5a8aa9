//! Imperfect coherence lets marked amplitude leak through the dark front loop.

use whichway::beamline::ContrastMatrix;
use whichway::run::{execute, RunConfig};

fn main() -> whichway::Result<()> {
    let mut cfg = RunConfig::from_preset("chipi")?;
    for (label, contrast) in [("ideal", ContrastMatrix::ideal()), ("measured", ContrastMatrix::measured())] {
        cfg.scenario.contrast = contrast;
        let out = execute(&cfg)?;
        let h = out.peaks.heights();
        println!("{label:>8}: 3k {:.5}  6k {:.5}  9k {:.5}  12k {:.5}", h[0], h[1], h[2], h[3]);
    }
    Ok(())
}
