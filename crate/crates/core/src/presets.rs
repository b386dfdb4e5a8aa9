//! Named instrument settings.

use std::f64::consts::PI;

use crate::amplitude::Hertz;
use crate::beamline::{Premark, ScenarioConfig};
use crate::error::{Error, Result};

pub const PRESETS: &[(&str, &str)] = &[
    ("chi0", "front loop constructive (chi_II = 0), all beams open"),
    ("chipi", "front loop destructive (chi_II = pi), all beams open"),
    ("block-r", "chi_II = pi with the reference beam R blocked"),
    ("block-i2", "chi_II = pi with the recombined beam I+II blocked"),
    (
        "premark",
        "chi_II = pi with an extra 83 kHz marker on the beam entering the front loop",
    ),
];

/// Frequency of the marker used by the `premark` preset.
pub const PREMARK_FREQ: Hertz = Hertz(83_000);

pub fn preset(name: &str) -> Result<ScenarioConfig> {
    let dark = ScenarioConfig {
        chi_ii: PI,
        ..Default::default()
    };
    let cfg = match name {
        "chi0" => ScenarioConfig::default(),
        "chipi" => dark,
        "block-r" => {
            let mut c = dark;
            c.blockers.r = true;
            c
        }
        "block-i2" => {
            let mut c = dark;
            c.blockers.i_plus_ii = true;
            c
        }
        "premark" => ScenarioConfig {
            premark: Some(Premark {
                freq: PREMARK_FREQ,
                angle: PI / 9.0,
            }),
            ..dark
        },
        other => {
            let known: Vec<&str> = PRESETS.iter().map(|p| p.0).collect();
            return Err(Error::Config(format!(
                "unknown preset '{other}' (known: {})",
                known.join(", ")
            )));
        }
    };
    Ok(cfg)
}
