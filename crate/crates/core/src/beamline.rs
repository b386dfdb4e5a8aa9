//! The three-beam interferometer.
//!
//! Paths I and II form the front loop and are recombined at the third plate
//! into the beam I+II (forward) and H1 (complement). I+II meets the reference
//! beam R at the last plate, giving the O beam (forward) and H2. Four weak
//! rotators mark I, II, R and I+II; an energy-compensation rotator and the
//! spin analyzer sit in front of the detector.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::amplitude::{
    apply_phase, project_up, rotate_spin, superpose, BeamLabel, BeamState, Hertz, History,
    Rotator, RotatorMode, Spin,
};
use crate::error::{Error, Result};

/// Rotator frequencies of the four markers and the energy compensator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Frequencies {
    pub i: Hertz,
    pub ii: Hertz,
    pub i_plus_ii: Hertz,
    pub r: Hertz,
    pub ec: Hertz,
}

impl Default for Frequencies {
    fn default() -> Self {
        Self {
            i: Hertz::khz(74),
            ii: Hertz::khz(77),
            i_plus_ii: Hertz::khz(80),
            r: Hertz::khz(71),
            ec: Hertz::khz(68),
        }
    }
}

/// Marker frequency minus compensation frequency, per marker.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DifferenceFrequencies {
    pub i: Hertz,
    pub ii: Hertz,
    pub r: Hertz,
    pub i_plus_ii: Hertz,
}

impl DifferenceFrequencies {
    pub fn from_freqs(f: &Frequencies) -> Self {
        Self {
            i: f.i - f.ec,
            ii: f.ii - f.ec,
            r: f.r - f.ec,
            i_plus_ii: f.i_plus_ii - f.ec,
        }
    }
}

/// Which marker a spectral line belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Marker {
    I,
    II,
    IPlusII,
    R,
    Premark,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Blockers {
    pub r: bool,
    pub i_plus_ii: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Engine {
    #[default]
    FirstOrder,
    Exact,
}

impl Engine {
    fn marker_mode(self) -> RotatorMode {
        match self {
            Engine::FirstOrder => RotatorMode::WeakFirstOrder,
            Engine::Exact => RotatorMode::Exact,
        }
    }
}

/// Amplitude bookkeeping across the plates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// Each inner beam carries half the incident amplitude; the last plate
    /// passes I+II with weight 1/√2 and R with weight 1/2 into O.
    #[default]
    HalfAmplitude,
    /// Every plate is a lossless real two-port splitter.
    UnitaryNetwork,
}

/// Amplitude transmissions of the four plates in unitary-network mode; each
/// reflection is `sqrt(1 - t²)`.
///
/// Plate 1 splits the incident beam into the front-loop feed and R, plate 2
/// splits the feed into I and II, plate 3 recombines I and II and plate 4
/// recombines I+II with R.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Splitters {
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    pub t4: f64,
}

fn reflect(t: f64) -> f64 {
    (1.0 - t * t).max(0.0).sqrt()
}

impl Splitters {
    /// Chooses the first plate so that R arrives at O with the same amplitude
    /// as path I. Bisection on the monotone mismatch.
    pub fn calibrated(t2: f64, t3: f64, t4: f64) -> Result<Self> {
        for t in [t2, t3, t4] {
            if !(t > 0.0 && t < 1.0) {
                return Err(Error::Config(format!("plate transmission {t} outside (0, 1)")));
            }
        }
        let mismatch = |t1: f64| t1 * t2 * t3 * t4 - reflect(t1) * reflect(t4);
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mismatch(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(Self {
            t1: 0.5 * (lo + hi),
            t2,
            t3,
            t4,
        })
    }

    fn validate(&self) -> Result<()> {
        for t in [self.t1, self.t2, self.t3, self.t4] {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::Config(format!("plate transmission {t} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

impl Default for Splitters {
    fn default() -> Self {
        Self::calibrated(FRAC_1_SQRT_2, FRAC_1_SQRT_2, FRAC_1_SQRT_2)
            .expect("50:50 plates are valid")
    }
}

/// Pairwise interference contrast between the histories I, II and R.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[[f64; 3]; 3]", into = "[[f64; 3]; 3]")]
pub struct ContrastMatrix([[f64; 3]; 3]);

impl ContrastMatrix {
    pub fn ideal() -> Self {
        Self([[1.0; 3]; 3])
    }

    /// Contrasts measured on the instrument.
    pub fn measured() -> Self {
        Self::pairwise(0.55, 0.60, 0.5).expect("values in range")
    }

    pub fn pairwise(i_ii: f64, i_r: f64, ii_r: f64) -> Result<Self> {
        Self::try_from([[1.0, i_ii, i_r], [i_ii, 1.0, ii_r], [i_r, ii_r, 1.0]])
    }

    pub fn get(&self, a: History, b: History) -> f64 {
        self.0[a.index()][b.index()]
    }

    pub fn is_ideal(&self) -> bool {
        self.0.iter().flatten().all(|&c| c == 1.0)
    }
}

impl Default for ContrastMatrix {
    fn default() -> Self {
        Self::ideal()
    }
}

impl TryFrom<[[f64; 3]; 3]> for ContrastMatrix {
    type Error = Error;

    fn try_from(m: [[f64; 3]; 3]) -> Result<Self> {
        for (a, row) in m.iter().enumerate() {
            if row[a] != 1.0 {
                return Err(Error::Config(format!("contrast diagonal entry {a} is {}, must be 1", row[a])));
            }
            for (b, &v) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::Config(format!("contrast entry ({a},{b}) = {v} outside [0, 1]")));
                }
                if v != m[b][a] {
                    return Err(Error::Config(format!("contrast matrix not symmetric at ({a},{b})")));
                }
            }
        }
        Ok(Self(m))
    }
}

impl From<ContrastMatrix> for [[f64; 3]; 3] {
    fn from(c: ContrastMatrix) -> Self {
        c.0
    }
}

/// A marking rotator placed on the beam feeding the front loop.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Premark {
    pub freq: Hertz,
    pub angle: f64,
}

/// Exit ports of the interferometer.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Port {
    #[default]
    O,
    H1,
    H2,
}

impl Port {
    pub const ALL: [Port; 3] = [Port::O, Port::H1, Port::H2];
}

/// Sign of the energy-compensation rotation angle, `±π/2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EcSign {
    Plus,
    Minus,
}

impl EcSign {
    pub fn angle(self) -> f64 {
        match self {
            EcSign::Plus => FRAC_PI_2,
            EcSign::Minus => -FRAC_PI_2,
        }
    }
}

/// Full description of one interferometer setting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    /// Phase of path II; path I is the phase reference.
    pub chi_ii: f64,
    pub chi_r: f64,
    /// Rotation angle shared by the four marking rotators.
    pub ww_angle: f64,
    pub freqs: Frequencies,
    pub blockers: Blockers,
    pub engine: Engine,
    pub normalization: Normalization,
    /// Only used with [`Normalization::UnitaryNetwork`].
    pub splitters: Splitters,
    pub contrast: ContrastMatrix,
    pub premark: Option<Premark>,
    /// Port carrying the energy compensator and analyzer.
    pub detector: Port,
    pub analyzer: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            chi_ii: 0.0,
            chi_r: 0.0,
            ww_angle: PI / 9.0,
            freqs: Frequencies::default(),
            blockers: Blockers::default(),
            engine: Engine::FirstOrder,
            normalization: Normalization::HalfAmplitude,
            splitters: Splitters::default(),
            contrast: ContrastMatrix::ideal(),
            premark: None,
            detector: Port::O,
            analyzer: true,
        }
    }
}

impl ScenarioConfig {
    /// Difference frequencies `|ω_marker - ω_EC|` the detector can show,
    /// ordered R, I, II, I+II, then the premark if configured.
    pub fn difference_lines(&self) -> Vec<(Marker, Hertz)> {
        let f = &self.freqs;
        let mut lines = vec![
            (Marker::R, (f.r - f.ec).abs()),
            (Marker::I, (f.i - f.ec).abs()),
            (Marker::II, (f.ii - f.ec).abs()),
            (Marker::IPlusII, (f.i_plus_ii - f.ec).abs()),
        ];
        if let Some(p) = self.premark {
            lines.push((Marker::Premark, (p.freq - f.ec).abs()));
        }
        lines
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("chi_ii", self.chi_ii), ("chi_r", self.chi_r)] {
            if !v.is_finite() {
                return Err(Error::Config(format!("{name} is not finite")));
            }
        }
        let angles = std::iter::once(self.ww_angle).chain(self.premark.map(|p| p.angle));
        for a in angles {
            if !a.is_finite() || a.abs() > PI {
                return Err(Error::Config(format!("rotation angle {a} outside [-pi, pi]")));
            }
        }

        let f = &self.freqs;
        let mut all = vec![f.i, f.ii, f.i_plus_ii, f.r, f.ec];
        if let Some(p) = self.premark {
            all.push(p.freq);
        }
        for (k, a) in all.iter().enumerate() {
            if a.0 <= 0 {
                return Err(Error::Config(format!("rotator frequency {a} must be positive")));
            }
            if all[..k].contains(a) {
                return Err(Error::Config(format!("rotator frequency {a} used twice")));
            }
        }
        let lines = self.difference_lines();
        for (k, (m, d)) in lines.iter().enumerate() {
            if lines[..k].iter().any(|(_, e)| e == d) {
                return Err(Error::Config(format!(
                    "difference frequency {d} of marker {m:?} coincides with another marker"
                )));
            }
        }
        if self.normalization == Normalization::UnitaryNetwork {
            self.splitters.validate()?;
        }
        Ok(())
    }

    /// Amplitudes of I, II and R right before the marking rotators.
    fn source_amplitudes(&self) -> [f64; 3] {
        match self.normalization {
            Normalization::HalfAmplitude => [0.5, 0.5, 0.5],
            Normalization::UnitaryNetwork => {
                let s = &self.splitters;
                [s.t1 * s.t2, s.t1 * reflect(s.t2), reflect(s.t1)]
            }
        }
    }

    /// Weights `[[fwd from a, fwd from b], [cmp from a, cmp from b]]` of a
    /// recombining plate.
    fn plate(&self, plate: u8) -> [[f64; 2]; 2] {
        let h = FRAC_1_SQRT_2;
        match (self.normalization, plate) {
            (Normalization::HalfAmplitude, 3) => [[h, h], [h, -h]],
            (Normalization::HalfAmplitude, _) => [[h, 0.5], [0.5, -h]],
            (Normalization::UnitaryNetwork, p) => {
                let t = if p == 3 { self.splitters.t3 } else { self.splitters.t4 };
                let r = reflect(t);
                [[t, r], [r, -t]]
            }
        }
    }
}

/// States in the three exit ports for one energy-compensation branch.
#[derive(Clone, Debug, PartialEq)]
pub struct PortStates {
    pub o: BeamState,
    pub h1: BeamState,
    pub h2: BeamState,
    pub sign: EcSign,
    pub detector: Port,
}

impl PortStates {
    pub fn port(&self, port: Port) -> &BeamState {
        match port {
            Port::O => &self.o,
            Port::H1 => &self.h1,
            Port::H2 => &self.h2,
        }
    }

    /// The port behind the compensator and analyzer.
    pub fn detector(&self) -> &BeamState {
        self.port(self.detector)
    }

    pub fn truncation_warning(&self) -> bool {
        Port::ALL.iter().any(|&p| self.port(p).truncation_warning())
    }
}

fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Propagates the incident spin-up beam through the instrument.
pub fn propagate(config: &ScenarioConfig, sign: EcSign) -> Result<PortStates> {
    config.validate()?;
    let mode = config.engine.marker_mode();
    let f = &config.freqs;
    let marker = |freq| Rotator {
        freq,
        angle: config.ww_angle,
        mode,
    };

    let [a_i, a_ii, a_r] = config.source_amplitudes();
    let mut path_i = BeamState::spin_up(BeamLabel::I, History::I, real(a_i));
    let mut path_ii = apply_phase(
        &BeamState::spin_up(BeamLabel::II, History::II, real(a_ii)),
        config.chi_ii,
    );
    let path_r = apply_phase(
        &BeamState::spin_up(BeamLabel::R, History::R, real(a_r)),
        config.chi_r,
    );

    if let Some(p) = config.premark {
        let pre = Rotator {
            freq: p.freq,
            angle: p.angle,
            mode,
        };
        path_i = rotate_spin(&path_i, &pre)?;
        path_ii = rotate_spin(&path_ii, &pre)?;
    }

    let path_i = rotate_spin(&path_i, &marker(f.i))?;
    let path_ii = rotate_spin(&path_ii, &marker(f.ii))?;
    let mut path_r = rotate_spin(&path_r, &marker(f.r))?;

    let [[fi, fii], [ci, cii]] = config.plate(3);
    let front = superpose(
        &[(&path_i, real(fi)), (&path_ii, real(fii))],
        BeamLabel::IPlusII,
    );
    let h1 = superpose(&[(&path_i, real(ci)), (&path_ii, real(cii))], BeamLabel::H1);
    let mut front = rotate_spin(&front, &marker(f.i_plus_ii))?;

    if config.blockers.i_plus_ii {
        front = front.cleared();
    }
    if config.blockers.r {
        path_r = path_r.cleared();
    }

    let [[fl, fr], [cl, cr]] = config.plate(4);
    let o = superpose(&[(&front, real(fl)), (&path_r, real(fr))], BeamLabel::O);
    let h2 = superpose(&[(&front, real(cl)), (&path_r, real(cr))], BeamLabel::H2);

    let mut ports = PortStates {
        o,
        h1,
        h2,
        sign,
        detector: config.detector,
    };
    let slot = match config.detector {
        Port::O => &mut ports.o,
        Port::H1 => &mut ports.h1,
        Port::H2 => &mut ports.h2,
    };
    let compensated = rotate_spin(slot, &Rotator::exact(f.ec, sign.angle()))?;
    *slot = if config.analyzer {
        project_up(&compensated)
    } else {
        compensated
    };
    Ok(ports)
}

fn keeps_pair(first_order: bool, a: u8, b: u8) -> bool {
    !first_order || a + b <= 1
}

/// Contrast-weighted detector intensity at time `t`.
///
/// Sums `C(h_j, h_k) Re[conj(c_j) c_k exp(-i(Ω_k - Ω_j)t)]` over ordered
/// component pairs. For states built with first-order rotators, products of
/// two marked components are left out.
pub fn intensity_at(port: &BeamState, contrast: &ContrastMatrix, t: f64) -> Result<f64> {
    if port.components().iter().any(|c| c.spin == Spin::Down) {
        return Err(Error::Contract(
            "intensity needs an analyzed (spin-up only) state".into(),
        ));
    }
    let first_order = port.is_first_order();
    let evolved: Vec<_> = port
        .components()
        .iter()
        .map(|c| (c, c.coeff * crate::amplitude::evolution(c.offset, t)))
        .collect();
    let mut total = 0.0;
    for (cj, vj) in &evolved {
        for (ck, vk) in &evolved {
            if keeps_pair(first_order, cj.order, ck.order) {
                total += contrast.get(cj.history, ck.history) * (vj.conj() * vk).re;
            }
        }
    }
    Ok(total)
}

/// Time-averaged intensity: only pairs sharing spin and offset survive.
pub fn mean_intensity(port: &BeamState, contrast: &ContrastMatrix) -> f64 {
    let first_order = port.is_first_order();
    let comps = port.components();
    let mut total = 0.0;
    for cj in comps {
        for ck in comps {
            if cj.spin == ck.spin
                && cj.offset == ck.offset
                && keeps_pair(first_order, cj.order, ck.order)
            {
                total += contrast.get(cj.history, ck.history) * (cj.coeff.conj() * ck.coeff).re;
            }
        }
    }
    total
}

/// Printed first-order detector intensities for the two front-loop settings
/// `chi_ii = 0` and `chi_ii = π`, with `chi_r = 0`.
pub fn closed_form_intensity(
    chi_ii: f64,
    sign: EcSign,
    t: f64,
    alpha: f64,
    dfreqs: &DifferenceFrequencies,
) -> Result<f64> {
    let pm = match sign {
        EcSign::Plus => -1.0,
        EcSign::Minus => 1.0,
    };
    let s = (alpha / 2.0).sin();
    let cos = |d: Hertz| (d.angular() * t).cos();
    if chi_ii.abs() < 1e-12 {
        let osc = cos(dfreqs.i) + cos(dfreqs.ii) + cos(dfreqs.r) + 2.0 * cos(dfreqs.i_plus_ii);
        Ok((9.0 + pm * 6.0 * s * osc) / 32.0)
    } else if (chi_ii - PI).abs() < 1e-12 {
        let osc = cos(dfreqs.i) - cos(dfreqs.ii) + cos(dfreqs.r);
        Ok((1.0 + pm * 2.0 * s * osc) / 32.0)
    } else {
        Err(Error::Unsupported(format!(
            "closed form exists only for chi_ii in {{0, pi}}, got {chi_ii}"
        )))
    }
}
