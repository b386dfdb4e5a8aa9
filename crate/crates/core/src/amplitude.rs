//! Spin-path-energy wave-function components.
//!
//! A [`BeamState`] is a sparse superposition of [`AmplitudeComponent`]s. Each
//! component remembers which spatial path it originated from (I, II or the
//! reference R), its spin along z, and its accumulated energy shift. Energy
//! shifts are kept as exact integer sums of rotator frequencies so that
//! components which should coincide always merge.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type ComplexAmp = Complex64;

/// Default magnitude below which merged components are dropped.
pub const MERGE_TOL: f64 = 1e-14;

/// A frequency in whole hertz.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Hertz(pub i64);

impl Hertz {
    pub const ZERO: Hertz = Hertz(0);

    pub fn khz(k: i64) -> Hertz {
        Hertz(k * 1000)
    }

    pub fn hz(self) -> f64 {
        self.0 as f64
    }

    /// Angular frequency in rad/s.
    pub fn angular(self) -> f64 {
        TAU * self.0 as f64
    }

    pub fn abs(self) -> Hertz {
        Hertz(self.0.abs())
    }
}

impl std::ops::Add for Hertz {
    type Output = Hertz;
    fn add(self, rhs: Hertz) -> Hertz {
        Hertz(self.0 + rhs.0)
    }
}

impl std::ops::Sub for Hertz {
    type Output = Hertz;
    fn sub(self, rhs: Hertz) -> Hertz {
        Hertz(self.0 - rhs.0)
    }
}

impl std::ops::Neg for Hertz {
    type Output = Hertz;
    fn neg(self) -> Hertz {
        Hertz(-self.0)
    }
}

impl fmt::Display for Hertz {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} Hz", self.0)
    }
}

/// Spatial origin of a component inside the instrument.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum History {
    I,
    II,
    R,
}

impl History {
    pub const ALL: [History; 3] = [History::I, History::II, History::R];

    pub fn index(self) -> usize {
        match self {
            History::I => 0,
            History::II => 1,
            History::R => 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Spin {
    Up,
    Down,
}

/// Spatial beam a state occupies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BeamLabel {
    Incident,
    I,
    II,
    R,
    IPlusII,
    O,
    H1,
    H2,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AmplitudeComponent {
    pub history: History,
    pub spin: Spin,
    /// Accumulated energy shift; the component evolves as `exp(-i 2π offset t)`.
    pub offset: Hertz,
    /// Number of first-order marker flips that produced this component, i.e.
    /// its power of `sin(α/2)`. Exact rotators leave it unchanged.
    pub order: u8,
    pub coeff: ComplexAmp,
}

impl AmplitudeComponent {
    pub fn key(&self) -> (History, Spin, Hertz) {
        (self.history, self.spin, self.offset)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BeamState {
    pub label: BeamLabel,
    components: Vec<AmplitudeComponent>,
    /// Set once a first-order rotator has acted: intensities built from this
    /// state drop products of two marked components.
    first_order: bool,
    /// Set when a first-order rotator was used at an angle where the
    /// truncation cannot be trusted.
    truncation_warning: bool,
}

impl BeamState {
    pub fn empty(label: BeamLabel) -> Self {
        Self {
            label,
            components: Vec::new(),
            first_order: false,
            truncation_warning: false,
        }
    }

    /// A single unshifted spin-up component.
    pub fn spin_up(label: BeamLabel, history: History, coeff: ComplexAmp) -> Self {
        Self::from_components(
            label,
            vec![AmplitudeComponent {
                history,
                spin: Spin::Up,
                offset: Hertz::ZERO,
                order: 0,
                coeff,
            }],
        )
    }

    pub fn from_components(label: BeamLabel, components: Vec<AmplitudeComponent>) -> Self {
        Self {
            label,
            components,
            first_order: false,
            truncation_warning: false,
        }
    }

    pub fn components(&self) -> &[AmplitudeComponent] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn is_first_order(&self) -> bool {
        self.first_order
    }

    pub fn truncation_warning(&self) -> bool {
        self.truncation_warning
    }

    pub fn with_label(mut self, label: BeamLabel) -> Self {
        self.label = label;
        self
    }

    /// Sum of squared magnitudes over components.
    pub fn norm_sqr(&self) -> f64 {
        self.components.iter().map(|c| c.coeff.norm_sqr()).sum()
    }

    /// Component with the given key, if present.
    pub fn find(&self, history: History, spin: Spin, offset: Hertz) -> Option<&AmplitudeComponent> {
        self.components
            .iter()
            .find(|c| c.key() == (history, spin, offset))
    }

    /// Removes every component, keeping the flags.
    pub fn cleared(&self) -> Self {
        Self {
            components: Vec::new(),
            ..self.clone()
        }
    }

    fn check_finite(&self) -> Result<()> {
        match self
            .components
            .iter()
            .find(|c| !(c.coeff.re.is_finite() && c.coeff.im.is_finite()))
        {
            Some(c) => Err(Error::InvalidState(format!(
                "non-finite coefficient {} on {:?}/{:?} at {}",
                c.coeff, c.history, c.spin, c.offset
            ))),
            None => Ok(()),
        }
    }
}

/// How a rotator acts on the state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RotatorMode {
    Exact,
    /// Keep terms up to first order in `sin(α/2)`: spin-up amplitudes are not
    /// reduced and marked (spin-down) amplitudes are not flipped again.
    WeakFirstOrder,
}

/// A resonance-frequency spin rotator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rotator {
    pub freq: Hertz,
    pub angle: f64,
    pub mode: RotatorMode,
}

impl Rotator {
    pub fn exact(freq: Hertz, angle: f64) -> Self {
        Self {
            freq,
            angle,
            mode: RotatorMode::Exact,
        }
    }

    pub fn weak(freq: Hertz, angle: f64) -> Self {
        Self {
            freq,
            angle,
            mode: RotatorMode::WeakFirstOrder,
        }
    }
}

/// Applies a spin rotator.
///
/// A flip from up to down lowers the offset by the rotator frequency, a flip
/// from down to up raises it. The flipped amplitude picks up `-i sin(α/2)`,
/// the kept one `cos(α/2)`.
pub fn rotate_spin(state: &BeamState, rotator: &Rotator) -> Result<BeamState> {
    state.check_finite()?;
    let Rotator { freq, angle, mode } = *rotator;
    if !angle.is_finite() || angle.abs() > PI + 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "rotation angle {angle} outside [-pi, pi]"
        )));
    }
    if freq.0 < 0 {
        return Err(Error::InvalidArgument(format!(
            "rotator frequency {freq} is negative"
        )));
    }

    let (half_sin, half_cos) = (angle / 2.0).sin_cos();
    let flip = Complex64::new(0.0, -half_sin);
    let mut out = Vec::with_capacity(state.components.len() * 2);
    for c in &state.components {
        let (kept, flipped_spin, flipped_offset) = match c.spin {
            Spin::Up => (half_cos, Spin::Down, c.offset - freq),
            Spin::Down => (half_cos, Spin::Up, c.offset + freq),
        };
        match mode {
            RotatorMode::Exact => {
                out.push(AmplitudeComponent {
                    coeff: c.coeff * kept,
                    ..*c
                });
                out.push(AmplitudeComponent {
                    spin: flipped_spin,
                    offset: flipped_offset,
                    coeff: c.coeff * flip,
                    ..*c
                });
            }
            RotatorMode::WeakFirstOrder => {
                out.push(*c);
                if c.spin == Spin::Up {
                    out.push(AmplitudeComponent {
                        spin: flipped_spin,
                        offset: flipped_offset,
                        order: c.order.saturating_add(1),
                        coeff: c.coeff * flip,
                        ..*c
                    });
                }
            }
        }
    }

    let weak = mode == RotatorMode::WeakFirstOrder;
    let rotated = BeamState {
        label: state.label,
        components: out,
        first_order: state.first_order || weak,
        truncation_warning: state.truncation_warning || (weak && angle.abs() >= FRAC_PI_2),
    };
    Ok(prune_merge(&rotated, MERGE_TOL))
}

/// Multiplies every coefficient by `exp(i chi)`.
pub fn apply_phase(state: &BeamState, chi: f64) -> BeamState {
    let phase = Complex64::from_polar(1.0, chi);
    BeamState {
        components: state
            .components
            .iter()
            .map(|c| AmplitudeComponent {
                coeff: c.coeff * phase,
                ..*c
            })
            .collect(),
        ..state.clone()
    }
}

/// Weighted sum of beam states, merged.
pub fn superpose(parts: &[(&BeamState, ComplexAmp)], label: BeamLabel) -> BeamState {
    let mut out = BeamState::empty(label);
    for (state, weight) in parts {
        out.first_order |= state.first_order;
        out.truncation_warning |= state.truncation_warning;
        out.components
            .extend(state.components.iter().map(|c| AmplitudeComponent {
                coeff: c.coeff * weight,
                ..*c
            }));
    }
    prune_merge(&out, MERGE_TOL)
}

/// Ideal spin analyzer: keeps only spin-up components.
pub fn project_up(state: &BeamState) -> BeamState {
    BeamState {
        components: state
            .components
            .iter()
            .filter(|c| c.spin == Spin::Up)
            .copied()
            .collect(),
        ..state.clone()
    }
}

#[inline]
pub(crate) fn evolution(offset: Hertz, t: f64) -> Complex64 {
    // keep the argument small before taking sin/cos
    let cycles = (offset.0 as f64 * t).rem_euclid(1.0);
    Complex64::from_polar(1.0, -TAU * cycles)
}

/// Coherent spin-up and spin-down amplitudes at time `t`, summed over
/// histories.
pub fn instantaneous_amplitude(state: &BeamState, t: f64) -> (ComplexAmp, ComplexAmp) {
    let mut up = Complex64::new(0.0, 0.0);
    let mut down = Complex64::new(0.0, 0.0);
    for c in &state.components {
        let v = c.coeff * evolution(c.offset, t);
        match c.spin {
            Spin::Up => up += v,
            Spin::Down => down += v,
        }
    }
    (up, down)
}

/// Time-averaged inner product `<a|b>`. Components at different offsets
/// average out, so only matching keys contribute.
pub fn overlap(a: &BeamState, b: &BeamState) -> ComplexAmp {
    let mut index: HashMap<(History, Spin, Hertz), Complex64> = HashMap::new();
    for c in &a.components {
        *index.entry(c.key()).or_default() += c.coeff;
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for c in &b.components {
        if let Some(ca) = index.get(&c.key()) {
            acc += ca.conj() * c.coeff;
        }
    }
    acc
}

/// Sums components sharing `(history, spin, offset)` and drops those with
/// `|coeff| <= tol`. Output keeps first-occurrence order.
pub fn prune_merge(state: &BeamState, tol: f64) -> BeamState {
    let mut slots: HashMap<(History, Spin, Hertz), usize> = HashMap::new();
    let mut merged: Vec<AmplitudeComponent> = Vec::with_capacity(state.components.len());
    for c in &state.components {
        match slots.get(&c.key()) {
            Some(&i) => {
                merged[i].coeff += c.coeff;
                merged[i].order = merged[i].order.min(c.order);
            }
            None => {
                slots.insert(c.key(), merged.len());
                merged.push(*c);
            }
        }
    }
    merged.retain(|c| c.coeff.norm() > tol);
    BeamState {
        components: merged,
        ..state.clone()
    }
}
