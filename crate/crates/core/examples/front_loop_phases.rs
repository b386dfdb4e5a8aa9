//! Spectral lines with the front loop constructive and destructive.

use whichway::beamline::{mean_intensity, propagate, EcSign};
use whichway::presets::preset;
use whichway::run::{execute, RunConfig};

fn main() -> whichway::Result<()> {
    for name in ["chi0", "chipi"] {
        let out = execute(&RunConfig::from_preset(name)?)?;
        println!("{name}:");
        for p in &out.peaks.peaks {
            println!("  {:>6} Hz  height {:.5}  normalized {:.3}", p.target, p.height, p.height_normalized);
        }
    }

    let mean = |name| -> whichway::Result<f64> {
        let cfg = preset(name)?;
        Ok(mean_intensity(propagate(&cfg, EcSign::Plus)?.detector(), &cfg.contrast))
    };
    println!("stationary intensity dark/bright = {:.6}", mean("chipi")? / mean("chi0")?);
    Ok(())
}
