//! Simulation and spectral analysis of which-way marking in a three-beam
//! neutron interferometer.
//!
//! The crate follows a neutron wave function through the instrument as a
//! list of spin/energy components tagged with the path they came from:
//!
//! * [`amplitude`] holds the component algebra (spin rotators, phase
//!   shifters, beam splitting, the spin analyzer).
//! * [`beamline`] wires those elements into the interferometer and turns
//!   exit-port states into contrast-weighted detector intensities.
//! * [`acquisition`] samples the two energy-compensation branches on a time
//!   grid and simulates folded Poisson counting.
//! * [`spectral`] analyzes the intensity difference with a Hanning-windowed,
//!   zero-padded Fourier transform and a known-frequency sine fit.
//! * [`run`] glues everything into reproducible runs that write plot-ready
//!   tables, and backs the `wwcli` binary.
//!
//! ```
//! use whichway::beamline::{propagate, mean_intensity, EcSign, ScenarioConfig};
//!
//! let mut cfg = ScenarioConfig::default();
//! let bright = mean_intensity(propagate(&cfg, EcSign::Plus).unwrap().detector(), &cfg.contrast);
//! cfg.chi_ii = std::f64::consts::PI;
//! let dark = mean_intensity(propagate(&cfg, EcSign::Plus).unwrap().detector(), &cfg.contrast);
//! assert!((dark / bright - 1.0 / 9.0).abs() < 1e-9);
//! ```

pub mod acquisition;
pub mod amplitude;
pub mod beamline;
pub mod error;
pub mod presets;
pub mod run;
pub mod spectral;

pub use error::{Error, Result};
