//! Folded Poisson counts and a sine fit at the known difference frequencies.

use whichway::acquisition::CountingParams;
use whichway::run::{execute, RunConfig};

fn main() -> whichway::Result<()> {
    let clean = execute(&RunConfig::from_preset("chi0")?)?;
    let mut cfg = RunConfig::from_preset("chi0")?;
    cfg.acquisition = Some(CountingParams {
        rate: 100.0,
        total_time: 24.0 * 3600.0,
        n_bins: 512,
        fold_period: None,
        seed: 7,
    });
    let noisy = execute(&cfg)?;
    println!("total counts: {}", noisy.histogram.as_ref().map_or(0, |h| h.total_counts()));
    for (c, exact) in noisy.fit.components.iter().zip(&clean.fit.components) {
        let pull = (c.amplitude - exact.amplitude) / c.amplitude_se;
        println!(
            "{:>6} Hz  {:.5} ± {:.5}  (noise-free {:.5}, pull {pull:+.2})",
            c.freq, c.amplitude, c.amplitude_se, exact.amplitude
        );
    }
    Ok(())
}
