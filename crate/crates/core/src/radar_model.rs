//! Synthetic two-antenna FMCW radar signal generation.
//!
//! A scene of planar point reflectors is turned into one frame of complex
//! baseband samples (M chirps x N samples x 2 receive antennas). Each
//! reflector contributes a complex sinusoid whose beat frequency encodes
//! range, whose chirp-to-chirp phase increment encodes radial velocity and
//! whose inter-antenna phase offset encodes bearing.

use nalgebra::Vector2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use std::io::{BufRead, Read, Write};
use thiserror::Error;

use crate::geometry::wrap_angle;
use crate::SPEED_OF_LIGHT;

#[derive(Debug, Error)]
pub enum RadarError {
    #[error("frame synthesis requires at least 2 chirps and 2 samples per chirp (got M={chirps}, N={samples})")]
    FrameTooSmall { chirps: usize, samples: usize },
    #[error("frame dimensions {got:?} do not match config {expected:?}")]
    DimensionMismatch {
        got: (usize, usize),
        expected: (usize, usize),
    },
    #[error("malformed frame dump: {0}")]
    MalformedDump(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Optional burst of extra measurement noise applied while the ego vehicle
/// is (nearly) stationary.
#[derive(Clone, Debug, PartialEq)]
pub struct HaltNoiseBurst {
    /// Ego speed below which the burst is armed, m/s.
    pub speed_threshold: f64,
    /// How long the burst lasts once triggered, s.
    pub duration: f64,
    /// Multiplier applied to the range/bearing error slopes.
    pub multiplier: f64,
}

/// Measurement-degradation model for the sensor.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NoiseModel {
    /// Per-component std of the complex Gaussian noise added to each I/Q sample.
    pub iq_noise_std: f64,
    /// Range perturbation std per radian of off-boresight angle, m/rad.
    pub range_error_slope: f64,
    /// Bearing perturbation std per radian of off-boresight angle, rad/rad.
    pub bearing_error_slope: f64,
    /// Expected number of spurious reflections per frame.
    pub clutter_rate: f64,
    /// Optional extra noise while hovering in place.
    pub halt_noise_burst: Option<HaltNoiseBurst>,
}

impl NoiseModel {
    /// Noise magnitudes calibrated to the sensor's published accuracy
    /// figures (bearing error growing from ~2 deg near boresight to ~8 deg
    /// at the FOV edge, range error within +/-15 cm).
    pub fn calibrated() -> Self {
        NoiseModel {
            iq_noise_std: 0.02,
            range_error_slope: 0.25,
            bearing_error_slope: 0.25,
            clutter_rate: 0.0,
            halt_noise_burst: None,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.iq_noise_std >= 0.0
            && self.range_error_slope >= 0.0
            && self.bearing_error_slope >= 0.0
            && self.clutter_rate >= 0.0
            && self
                .halt_noise_burst
                .as_ref()
                .map(|b| b.speed_threshold >= 0.0 && b.duration >= 0.0 && b.multiplier >= 0.0)
                .unwrap_or(true)
    }
}

/// Waveform, antenna and coverage parameters of the FMCW sensor.
#[derive(Clone, Debug, PartialEq)]
pub struct RadarConfig {
    /// Carrier frequency, Hz.
    pub carrier_frequency: f64,
    /// Sweep bandwidth B, Hz.
    pub bandwidth: f64,
    /// Up-chirp time Tc, s.
    pub chirp_duration: f64,
    /// Fast-time samples per chirp, N.
    pub samples_per_chirp: usize,
    /// Chirps per frame, M.
    pub chirps_per_frame: usize,
    /// Receive antenna spacing d, m.
    pub antenna_spacing: f64,
    /// Half of the horizontal field of view, rad.
    pub fov_half_angle: f64,
    /// Minimum usable range, m.
    pub min_range: f64,
    /// Maximum usable range, m.
    pub max_range: f64,
    pub noise: NoiseModel,
}

impl Default for RadarConfig {
    fn default() -> Self {
        let carrier = 24e9;
        RadarConfig {
            carrier_frequency: carrier,
            bandwidth: 200e6,
            chirp_duration: 300e-6,
            samples_per_chirp: 256,
            chirps_per_frame: 16,
            antenna_spacing: 0.5 * SPEED_OF_LIGHT / carrier,
            fov_half_angle: 38.0_f64.to_radians(),
            min_range: 1.0,
            max_range: 12.0,
            noise: NoiseModel::default(),
        }
    }
}

impl RadarConfig {
    /// Carrier wavelength lambda, m.
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_frequency
    }

    /// Frequency ramp slope S = B / Tc, Hz/s.
    pub fn slope(&self) -> f64 {
        self.bandwidth / self.chirp_duration
    }

    /// ADC sample rate = N / Tc, Hz.
    pub fn sample_rate(&self) -> f64 {
        self.samples_per_chirp as f64 / self.chirp_duration
    }

    /// Two-point range resolution c / (2 B), m.
    pub fn range_resolution(&self) -> f64 {
        SPEED_OF_LIGHT / (2.0 * self.bandwidth)
    }

    /// Beat frequency produced by a reflector at `range`, Hz.
    pub fn beat_frequency(&self, range: f64) -> f64 {
        2.0 * self.slope() * range / SPEED_OF_LIGHT
    }

    /// Chirp-to-chirp phase increment for radial velocity `v`, rad.
    pub fn doppler_phase_step(&self, radial_velocity: f64) -> f64 {
        4.0 * std::f64::consts::PI * radial_velocity * self.chirp_duration / self.wavelength()
    }

    /// Inter-antenna phase offset for a target at `bearing`, rad.
    pub fn bearing_phase_offset(&self, bearing: f64) -> f64 {
        2.0 * std::f64::consts::PI * self.antenna_spacing * bearing.sin() / self.wavelength()
    }

    /// Largest unambiguous |radial velocity| = lambda / (4 Tc), m/s.
    pub fn max_unambiguous_velocity(&self) -> f64 {
        self.wavelength() / (4.0 * self.chirp_duration)
    }
}

/// A point reflector in the world frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointTarget {
    pub position: Vector2<f64>,
    pub velocity: Vector2<f64>,
    /// Reflectivity, > 0.
    pub amplitude: f64,
}

/// Planar pose and velocity of the sensor platform.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EgoState {
    pub position: Vector2<f64>,
    /// Boresight direction, rad (world frame).
    pub heading: f64,
    pub velocity: Vector2<f64>,
}

/// One reflector expressed in sensor-relative polar terms, ready for
/// synthesis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Echo {
    pub range: f64,
    /// Sensor-frame bearing, positive left of boresight, rad.
    pub bearing: f64,
    /// Positive = receding.
    pub radial_velocity: f64,
    pub amplitude: f64,
}

/// One frame of complex baseband samples, 2 antennas x M chirps x N samples.
#[derive(Clone, Debug, PartialEq)]
pub struct IQFrame {
    pub chirps_per_frame: usize,
    pub samples_per_chirp: usize,
    /// Antenna-major, then chirp, then sample.
    pub samples: Vec<Complex64>,
    pub timestamp: f64,
}

pub const NUM_ANTENNAS: usize = 2;

impl IQFrame {
    pub fn zeros(chirps: usize, samples: usize, timestamp: f64) -> Self {
        IQFrame {
            chirps_per_frame: chirps,
            samples_per_chirp: samples,
            samples: vec![Complex64::new(0.0, 0.0); NUM_ANTENNAS * chirps * samples],
            timestamp,
        }
    }

    #[inline]
    fn index(&self, antenna: usize, chirp: usize, sample: usize) -> usize {
        (antenna * self.chirps_per_frame + chirp) * self.samples_per_chirp + sample
    }

    #[inline]
    pub fn at(&self, antenna: usize, chirp: usize, sample: usize) -> Complex64 {
        self.samples[self.index(antenna, chirp, sample)]
    }

    /// One chirp's worth of fast-time samples.
    pub fn chirp(&self, antenna: usize, chirp: usize) -> &[Complex64] {
        let start = self.index(antenna, chirp, 0);
        &self.samples[start..start + self.samples_per_chirp]
    }

    pub fn matches(&self, config: &RadarConfig) -> bool {
        self.chirps_per_frame == config.chirps_per_frame
            && self.samples_per_chirp == config.samples_per_chirp
    }
}

/// Range, bearing and radial velocity of `target` as seen from `ego`.
///
/// Bearing is measured from the boresight, positive to the left. Radial
/// velocity is the range rate: positive when the target is receding.
pub fn relative_kinematics(ego: &EgoState, target: &PointTarget) -> (f64, f64, f64) {
    let rel_pos = target.position - ego.position;
    let rel_vel = target.velocity - ego.velocity;
    let range = rel_pos.norm();
    let bearing = wrap_angle(rel_pos.y.atan2(rel_pos.x) - ego.heading);
    let radial_velocity = if range > 0.0 {
        rel_pos.dot(&rel_vel) / range
    } else {
        0.0
    };
    (range, bearing, radial_velocity)
}

/// Converts world-frame targets into sensor echoes: FOV and range gating,
/// angle-dependent range/bearing perturbation, and clutter injection.
///
/// `error_multiplier` scales the perturbation slopes (1.0 for normal
/// operation; the halt-noise burst raises it).
pub fn build_echoes<R: Rng>(
    config: &RadarConfig,
    ego: &EgoState,
    targets: &[PointTarget],
    error_multiplier: f64,
    rng: &mut R,
) -> Vec<Echo> {
    let mut echoes = Vec::new();
    for target in targets {
        let (range, bearing, radial_velocity) = relative_kinematics(ego, target);
        if range < config.min_range || range > config.max_range {
            continue;
        }
        if bearing.abs() > config.fov_half_angle {
            continue;
        }
        let sigma_r = config.noise.range_error_slope * bearing.abs() * error_multiplier;
        let sigma_b = config.noise.bearing_error_slope * bearing.abs() * error_multiplier;
        let range = perturbed(range, sigma_r, rng).max(config.min_range);
        let bearing = perturbed(bearing, sigma_b, rng);
        echoes.push(Echo {
            range,
            bearing,
            radial_velocity,
            amplitude: target.amplitude,
        });
    }
    if config.noise.clutter_rate > 0.0 {
        let count = Poisson::new(config.noise.clutter_rate)
            .expect("clutter_rate > 0")
            .sample(rng) as usize;
        let v_max = config.max_unambiguous_velocity();
        for _ in 0..count {
            echoes.push(Echo {
                range: rng.gen_range(config.min_range..config.max_range),
                bearing: rng.gen_range(-config.fov_half_angle..config.fov_half_angle),
                radial_velocity: rng.gen_range(-0.5 * v_max..0.5 * v_max),
                amplitude: rng.gen_range(0.5..1.5),
            });
        }
    }
    echoes
}

fn perturbed<R: Rng>(value: f64, sigma: f64, rng: &mut R) -> f64 {
    if sigma > 0.0 {
        value + Normal::new(0.0, sigma).expect("sigma > 0").sample(rng)
    } else {
        value
    }
}

/// Synthesizes one I/Q frame from a list of echoes.
///
/// Each echo contributes, at antenna `a`, chirp `m`, sample `n`:
///
/// ```text
/// A * exp(i * (2 pi f_b n / fs  +  m * dphi_doppler  +  a * dphi_bearing))
/// ```
///
/// with `f_b = 2 S R / c`, `dphi_doppler = 4 pi V Tc / lambda` and
/// `dphi_bearing = 2 pi d sin(theta) / lambda`. Complex Gaussian noise with
/// per-component std `iq_noise_std` is added to every sample. The result is
/// bit-identical for identical `(config, echoes, seed)`.
pub fn synthesize_frame(
    config: &RadarConfig,
    echoes: &[Echo],
    seed: u64,
    timestamp: f64,
) -> Result<IQFrame, RadarError> {
    let m = config.chirps_per_frame;
    let n = config.samples_per_chirp;
    if m < 2 || n < 2 {
        return Err(RadarError::FrameTooSmall {
            chirps: m,
            samples: n,
        });
    }
    let mut frame = IQFrame::zeros(m, n, timestamp);
    let fs = config.sample_rate();
    for echo in echoes {
        let omega_fast = 2.0 * std::f64::consts::PI * config.beat_frequency(echo.range) / fs;
        let dphi_doppler = config.doppler_phase_step(echo.radial_velocity);
        let dphi_bearing = config.bearing_phase_offset(echo.bearing);
        for antenna in 0..NUM_ANTENNAS {
            let phase_antenna = antenna as f64 * dphi_bearing;
            for chirp in 0..m {
                let phase_chirp = phase_antenna + chirp as f64 * dphi_doppler;
                let base = (antenna * m + chirp) * n;
                for sample in 0..n {
                    let phase = phase_chirp + omega_fast * sample as f64;
                    frame.samples[base + sample] +=
                        Complex64::from_polar(echo.amplitude, phase);
                }
            }
        }
    }
    if config.noise.iq_noise_std > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dist = Normal::new(0.0, config.noise.iq_noise_std).expect("std > 0");
        for cell in &mut frame.samples {
            *cell += Complex64::new(dist.sample(&mut rng), dist.sample(&mut rng));
        }
    }
    Ok(frame)
}

/// Writes a frame as a text header line followed by little-endian f32
/// interleaved I,Q values, ordered antenna-major, then chirp, then sample.
pub fn write_frame<W: Write>(frame: &IQFrame, mut out: W) -> Result<(), RadarError> {
    writeln!(
        out,
        "iqframe {} {} {} {}",
        NUM_ANTENNAS, frame.chirps_per_frame, frame.samples_per_chirp, frame.timestamp
    )?;
    let mut buf = Vec::with_capacity(frame.samples.len() * 8);
    for s in &frame.samples {
        buf.extend_from_slice(&(s.re as f32).to_le_bytes());
        buf.extend_from_slice(&(s.im as f32).to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

/// Reads a frame written by [`write_frame`].
pub fn read_frame<R: Read>(reader: R) -> Result<IQFrame, RadarError> {
    let mut reader = std::io::BufReader::new(reader);
    let mut header = String::new();
    reader.read_line(&mut header)?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 5 || fields[0] != "iqframe" {
        return Err(RadarError::MalformedDump(format!(
            "bad header line: {header:?}"
        )));
    }
    let antennas: usize = parse_field(fields[1], "antenna count")?;
    let chirps: usize = parse_field(fields[2], "chirp count")?;
    let samples: usize = parse_field(fields[3], "sample count")?;
    let timestamp: f64 = parse_field(fields[4], "timestamp")?;
    if antennas != NUM_ANTENNAS {
        return Err(RadarError::MalformedDump(format!(
            "expected {NUM_ANTENNAS} antennas, got {antennas}"
        )));
    }
    let total = antennas * chirps * samples;
    let mut buf = vec![0u8; total * 8];
    reader.read_exact(&mut buf)?;
    let mut cells = Vec::with_capacity(total);
    for chunk in buf.chunks_exact(8) {
        let re = f32::from_le_bytes(chunk[0..4].try_into().unwrap());
        let im = f32::from_le_bytes(chunk[4..8].try_into().unwrap());
        cells.push(Complex64::new(re as f64, im as f64));
    }
    Ok(IQFrame {
        chirps_per_frame: chirps,
        samples_per_chirp: samples,
        samples: cells,
        timestamp,
    })
}

fn parse_field<T: std::str::FromStr>(text: &str, what: &str) -> Result<T, RadarError> {
    text.parse()
        .map_err(|_| RadarError::MalformedDump(format!("cannot parse {what}: {text:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn ego_at_origin() -> EgoState {
        EgoState {
            position: Vector2::zeros(),
            heading: 0.0,
            velocity: Vector2::new(1.0, 0.0),
        }
    }

    fn static_target(x: f64, y: f64) -> PointTarget {
        PointTarget {
            position: Vector2::new(x, y),
            velocity: Vector2::zeros(),
            amplitude: 1.0,
        }
    }

    #[test]
    fn kinematics_boresight_closing() {
        let (r, b, v) = relative_kinematics(&ego_at_origin(), &static_target(5.0, 0.0));
        assert_relative_eq!(r, 5.0);
        assert_relative_eq!(b, 0.0);
        assert_relative_eq!(v, -1.0);
    }

    #[test]
    fn kinematics_purely_tangential() {
        let (r, b, v) = relative_kinematics(&ego_at_origin(), &static_target(0.0, 3.0));
        assert_relative_eq!(r, 3.0);
        assert_relative_eq!(b, PI / 2.0);
        assert_relative_eq!(v, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn kinematics_oblique_projection() {
        let (r, b, v) = relative_kinematics(&ego_at_origin(), &static_target(3.0, 4.0));
        assert_relative_eq!(r, 5.0);
        assert_relative_eq!(b, 4.0_f64.atan2(3.0));
        // p . v_rel / |p| = (3,4).(-1,0)/5
        assert_relative_eq!(v, -0.6);
    }

    #[test]
    fn rejects_too_few_chirps() {
        let config = RadarConfig {
            chirps_per_frame: 1,
            ..RadarConfig::default()
        };
        assert!(matches!(
            synthesize_frame(&config, &[], 0, 0.0),
            Err(RadarError::FrameTooSmall { .. })
        ));
    }

    #[test]
    fn zero_doppler_gives_identical_chirps() {
        let config = RadarConfig::default();
        let echo = Echo {
            range: 5.0,
            bearing: 0.3,
            radial_velocity: 0.0,
            amplitude: 1.0,
        };
        let frame = synthesize_frame(&config, &[echo], 7, 0.0).unwrap();
        for chirp in 1..config.chirps_per_frame {
            for n in 0..config.samples_per_chirp {
                assert_relative_eq!(frame.at(0, 0, n).re, frame.at(0, chirp, n).re);
                assert_relative_eq!(frame.at(0, 0, n).im, frame.at(0, chirp, n).im);
            }
        }
    }

    #[test]
    fn boresight_target_has_zero_antenna_phase_difference() {
        let config = RadarConfig::default();
        let echo = Echo {
            range: 5.0,
            bearing: 0.0,
            radial_velocity: 0.0,
            amplitude: 1.0,
        };
        let frame = synthesize_frame(&config, &[echo], 7, 0.0).unwrap();
        for n in 0..config.samples_per_chirp {
            let diff = frame.at(1, 0, n) * frame.at(0, 0, n).conj();
            assert_relative_eq!(diff.arg(), 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn beat_frequency_embeds_range() {
        // R = 5 m at S = 2e11 Hz/s gives f_b = 2SR/c = 6666.7 Hz.
        let config = RadarConfig {
            bandwidth: 200e6,
            chirp_duration: 1e-3,
            ..RadarConfig::default()
        };
        assert_relative_eq!(config.slope(), 2e11);
        let f_b = config.beat_frequency(5.0);
        assert_relative_eq!(f_b, 6666.7, max_relative = 1e-3);

        let echo = Echo {
            range: 5.0,
            bearing: 0.0,
            radial_velocity: 0.0,
            amplitude: 1.0,
        };
        let frame = synthesize_frame(&config, &[echo], 0, 0.0).unwrap();
        // The per-sample phase increment must equal 2 pi f_b / fs.
        let step = (frame.at(0, 0, 1) * frame.at(0, 0, 0).conj()).arg();
        assert_relative_eq!(
            step,
            2.0 * PI * f_b / config.sample_rate(),
            epsilon = 1e-9
        );
    }

    #[test]
    fn amplitude_is_linear() {
        let config = RadarConfig::default();
        let echo = Echo {
            range: 4.0,
            bearing: 0.1,
            radial_velocity: 1.0,
            amplitude: 1.0,
        };
        let double = Echo {
            amplitude: 2.0,
            ..echo
        };
        let a = synthesize_frame(&config, &[echo], 0, 0.0).unwrap();
        let b = synthesize_frame(&config, &[double], 0, 0.0).unwrap();
        for (x, y) in a.samples.iter().zip(&b.samples) {
            assert_relative_eq!(y.re, 2.0 * x.re, epsilon = 1e-12);
            assert_relative_eq!(y.im, 2.0 * x.im, epsilon = 1e-12);
        }
    }

    #[test]
    fn synthesis_is_deterministic() {
        let config = RadarConfig {
            noise: NoiseModel {
                iq_noise_std: 0.1,
                ..NoiseModel::default()
            },
            ..RadarConfig::default()
        };
        let echo = Echo {
            range: 6.0,
            bearing: -0.2,
            radial_velocity: 0.5,
            amplitude: 1.0,
        };
        let a = synthesize_frame(&config, &[echo], 42, 1.0).unwrap();
        let b = synthesize_frame(&config, &[echo], 42, 1.0).unwrap();
        assert_eq!(a, b);
        let c = synthesize_frame(&config, &[echo], 43, 1.0).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn echoes_respect_fov_and_range_gates() {
        let config = RadarConfig::default();
        let ego = EgoState {
            position: Vector2::zeros(),
            heading: 0.0,
            velocity: Vector2::zeros(),
        };
        let targets = [
            static_target(-5.0, 0.0), // behind
            static_target(0.8, 0.0),  // below min range
            static_target(5.0, 0.0),  // valid
            static_target(20.0, 0.0), // beyond max range
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let echoes = build_echoes(&config, &ego, &targets, 1.0, &mut rng);
        assert_eq!(echoes.len(), 1);
        assert_relative_eq!(echoes[0].range, 5.0);
    }

    #[test]
    fn frame_dump_round_trip_is_bit_exact() {
        let config = RadarConfig {
            samples_per_chirp: 16,
            chirps_per_frame: 4,
            noise: NoiseModel {
                iq_noise_std: 0.05,
                ..NoiseModel::default()
            },
            ..RadarConfig::default()
        };
        let echo = Echo {
            range: 5.0,
            bearing: 0.2,
            radial_velocity: -1.0,
            amplitude: 1.0,
        };
        let frame = synthesize_frame(&config, &[echo], 3, 0.5).unwrap();
        let mut bytes = Vec::new();
        write_frame(&frame, &mut bytes).unwrap();
        let back = read_frame(bytes.as_slice()).unwrap();
        assert_eq!(back.chirps_per_frame, frame.chirps_per_frame);
        assert_eq!(back.samples_per_chirp, frame.samples_per_chirp);
        for (a, b) in frame.samples.iter().zip(&back.samples) {
            assert_eq!(a.re as f32, b.re as f32);
            assert_eq!(a.im as f32, b.im as f32);
        }
        let mut bytes2 = Vec::new();
        write_frame(&back, &mut bytes2).unwrap();
        assert_eq!(bytes, bytes2);
    }
}
