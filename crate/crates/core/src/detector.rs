//! Range/Doppler/bearing detection from raw I/Q frames.
//!
//! Pipeline: windowed, zero-padded range FFT per chirp; Doppler FFT across
//! chirps; thresholded peak search on the non-coherently summed magnitude
//! of both antennas; bearing from the inter-antenna phase difference at
//! the peak cell.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::radar_model::{IQFrame, RadarConfig, RadarError, NUM_ANTENNAS};
use crate::SPEED_OF_LIGHT;

/// Default zero-padding factor for the fast-time (range) FFT.
pub const DEFAULT_RANGE_ZERO_PAD: usize = 4;
/// Default zero-padding factor for the slow-time (Doppler) FFT.
pub const DEFAULT_DOPPLER_ZERO_PAD: usize = 1;

/// Fast-time window applied before the range FFT.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Window {
    Rectangular,
    Hann,
}

/// One resolved target.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Detection {
    pub range: f64,
    /// Sensor-frame bearing, rad, positive left of boresight.
    pub bearing: f64,
    /// Positive = receding.
    pub radial_velocity: f64,
    pub magnitude: f64,
    pub timestamp: f64,
}

/// Complex range-Doppler matrix for one antenna, plus bin scale metadata.
///
/// Rows are Doppler bins (FFT-shifted, zero velocity at the centre row),
/// columns are range bins covering the positive beat frequencies only.
#[derive(Clone, Debug)]
pub struct RangeDopplerMap {
    pub doppler_bins: usize,
    pub range_bins: usize,
    /// Row-major `[doppler][range]`.
    pub cells: Vec<Complex64>,
    /// Metres per range bin.
    pub range_bin_width: f64,
    /// Metres per second per Doppler bin.
    pub doppler_bin_width: f64,
}

impl RangeDopplerMap {
    #[inline]
    pub fn at(&self, doppler_bin: usize, range_bin: usize) -> Complex64 {
        self.cells[doppler_bin * self.range_bins + range_bin]
    }

    pub fn bin_to_range(&self, range_bin: f64) -> f64 {
        range_bin * self.range_bin_width
    }

    pub fn range_to_bin(&self, range: f64) -> usize {
        (range / self.range_bin_width).round() as usize
    }

    /// Signed velocity for a (possibly fractional) Doppler row index.
    pub fn bin_to_velocity(&self, doppler_bin: f64) -> f64 {
        (doppler_bin - (self.doppler_bins / 2) as f64) * self.doppler_bin_width
    }

    pub fn velocity_to_bin(&self, velocity: f64) -> usize {
        ((velocity / self.doppler_bin_width) + (self.doppler_bins / 2) as f64).round() as usize
    }
}

/// A cell that passed thresholding and the local-maximum test.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PeakCell {
    pub range_bin: usize,
    pub doppler_bin: usize,
    pub magnitude: f64,
}

/// Windowed, zero-padded FFT of one slice of samples.
pub fn windowed_fft(samples: &[Complex64], window: Window, zero_pad: usize) -> Vec<Complex64> {
    assert!(zero_pad >= 1, "zero_pad factor must be >= 1");
    let n = samples.len();
    let padded = n * zero_pad;
    let mut buf = vec![Complex64::new(0.0, 0.0); padded];
    match window {
        Window::Rectangular => buf[..n].copy_from_slice(samples),
        Window::Hann => {
            for (i, s) in samples.iter().enumerate() {
                let w = 0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos());
                buf[i] = s * w;
            }
        }
    }
    FftPlanner::new().plan_fft_forward(padded).process(&mut buf);
    buf
}

/// Range FFT of one chirp: Hann window on fast time, zero-padded.
pub fn range_fft(
    frame: &IQFrame,
    antenna: usize,
    chirp: usize,
    zero_pad: usize,
) -> Vec<Complex64> {
    windowed_fft(frame.chirp(antenna, chirp), Window::Hann, zero_pad)
}

/// Doppler FFT across chirps for one antenna's per-chirp range spectra.
///
/// Keeps the positive-beat-frequency half of the range axis and shifts the
/// Doppler axis so that zero velocity sits at row `M * zero_pad / 2`.
pub fn doppler_fft(
    spectra: &[Vec<Complex64>],
    config: &RadarConfig,
    doppler_zero_pad: usize,
) -> RangeDopplerMap {
    let chirps = spectra.len();
    assert!(chirps >= 2, "Doppler FFT needs at least 2 chirps");
    let spectrum_len = spectra[0].len();
    assert!(spectra.iter().all(|s| s.len() == spectrum_len));
    let range_bins = spectrum_len / 2;
    let doppler_bins = chirps * doppler_zero_pad;

    let range_zero_pad = spectrum_len / config.samples_per_chirp;
    let range_bin_width = config.range_resolution() / range_zero_pad as f64;
    let doppler_bin_width =
        config.wavelength() / (2.0 * doppler_bins as f64 * config.chirp_duration);

    let fft = FftPlanner::new().plan_fft_forward(doppler_bins);
    let mut cells = vec![Complex64::new(0.0, 0.0); doppler_bins * range_bins];
    let mut column = vec![Complex64::new(0.0, 0.0); doppler_bins];
    for range_bin in 0..range_bins {
        column.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
        for (chirp, spectrum) in spectra.iter().enumerate() {
            column[chirp] = spectrum[range_bin];
        }
        fft.process(&mut column);
        // FFT shift: output row r holds signed Doppler bin r - doppler_bins/2.
        for row in 0..doppler_bins {
            let src = (row + doppler_bins / 2) % doppler_bins;
            cells[row * range_bins + range_bin] = column[src];
        }
    }
    RangeDopplerMap {
        doppler_bins,
        range_bins,
        cells,
        range_bin_width,
        doppler_bin_width,
    }
}

/// Non-coherent (magnitude) sum of both antennas' maps.
pub fn magnitude_sum(maps: &[RangeDopplerMap]) -> Vec<f64> {
    let mut mag = vec![0.0; maps[0].cells.len()];
    for map in maps {
        for (m, c) in mag.iter_mut().zip(&map.cells) {
            *m += c.norm();
        }
    }
    mag
}

/// Thresholded 8-neighbourhood local-maximum search on a magnitude map.
///
/// Cells outside `[min_range, max_range]` are discarded, and at most the
/// two strongest peaks are kept per range bin (the two-antenna sensor can
/// only resolve two targets in the same range bin).
pub fn detect_peaks(
    magnitudes: &[f64],
    map: &RangeDopplerMap,
    threshold: f64,
    min_range: f64,
    max_range: f64,
) -> Vec<PeakCell> {
    assert!(threshold > 0.0, "threshold must be positive");
    let rows = map.doppler_bins;
    let cols = map.range_bins;
    let at = |r: isize, c: isize| -> f64 {
        if r < 0 || c < 0 || r >= rows as isize || c >= cols as isize {
            f64::NEG_INFINITY
        } else {
            magnitudes[r as usize * cols + c as usize]
        }
    };
    let mut peaks = Vec::new();
    for row in 0..rows as isize {
        for col in 0..cols as isize {
            let value = at(row, col);
            if value <= threshold {
                continue;
            }
            let range = map.bin_to_range(col as f64);
            if range < min_range || range > max_range {
                continue;
            }
            let mut is_max = true;
            'neigh: for dr in -1..=1 {
                for dc in -1..=1 {
                    if dr == 0 && dc == 0 {
                        continue;
                    }
                    if at(row + dr, col + dc) >= value {
                        is_max = false;
                        break 'neigh;
                    }
                }
            }
            if is_max {
                peaks.push(PeakCell {
                    range_bin: col as usize,
                    doppler_bin: row as usize,
                    magnitude: value,
                });
            }
        }
    }
    cap_per_range_bin(peaks, 2)
}

fn cap_per_range_bin(mut peaks: Vec<PeakCell>, cap: usize) -> Vec<PeakCell> {
    peaks.sort_by(|a, b| {
        a.range_bin
            .cmp(&b.range_bin)
            .then(b.magnitude.partial_cmp(&a.magnitude).unwrap())
    });
    let mut kept: Vec<PeakCell> = Vec::with_capacity(peaks.len());
    let mut current_bin = usize::MAX;
    let mut count = 0;
    for peak in peaks {
        if peak.range_bin != current_bin {
            current_bin = peak.range_bin;
            count = 0;
        }
        if count < cap {
            kept.push(peak);
            count += 1;
        }
    }
    kept
}

/// Bearing from the inter-antenna phase difference at one map cell.
///
/// `theta = arcsin(dphi * lambda / (2 pi d))`, which reduces to
/// `arcsin(dphi / pi)` at half-wavelength spacing. The phase difference is
/// wrapped to `(-pi, pi]` and the arcsin argument clamped to `[-1, 1]`.
pub fn estimate_bearing(
    map_rx1: &RangeDopplerMap,
    map_rx2: &RangeDopplerMap,
    cell: (usize, usize),
    config: &RadarConfig,
) -> f64 {
    let (range_bin, doppler_bin) = cell;
    let phase_diff =
        (map_rx2.at(doppler_bin, range_bin) * map_rx1.at(doppler_bin, range_bin).conj()).arg();
    let arg = phase_diff * config.wavelength()
        / (2.0 * std::f64::consts::PI * config.antenna_spacing);
    arg.clamp(-1.0, 1.0).asin()
}

/// Sub-bin offset in `[-0.5, 0.5]` from a parabolic fit through the
/// log-magnitudes of a peak and its two neighbours. Returns 0 at map edges.
fn parabolic_offset(left: f64, centre: f64, right: f64) -> f64 {
    if left <= 0.0 || centre <= 0.0 || right <= 0.0 {
        return 0.0;
    }
    let (a, b, c) = (left.ln(), centre.ln(), right.ln());
    let denom = a - 2.0 * b + c;
    if denom.abs() < 1e-300 {
        return 0.0;
    }
    (0.5 * (a - c) / denom).clamp(-0.5, 0.5)
}

/// Full frame processing: range FFT, Doppler FFT, peak detection on the
/// summed magnitude, bearing estimation, and bin-to-physical conversion.
pub fn process_frame(
    config: &RadarConfig,
    frame: &IQFrame,
    threshold: f64,
) -> Result<Vec<Detection>, RadarError> {
    process_frame_with(
        config,
        frame,
        threshold,
        DEFAULT_RANGE_ZERO_PAD,
        DEFAULT_DOPPLER_ZERO_PAD,
    )
}

/// [`process_frame`] with explicit zero-padding factors.
pub fn process_frame_with(
    config: &RadarConfig,
    frame: &IQFrame,
    threshold: f64,
    range_zero_pad: usize,
    doppler_zero_pad: usize,
) -> Result<Vec<Detection>, RadarError> {
    if !frame.matches(config) {
        return Err(RadarError::DimensionMismatch {
            got: (frame.chirps_per_frame, frame.samples_per_chirp),
            expected: (config.chirps_per_frame, config.samples_per_chirp),
        });
    }
    let maps: Vec<RangeDopplerMap> = (0..NUM_ANTENNAS)
        .map(|antenna| {
            let spectra: Vec<Vec<Complex64>> = (0..frame.chirps_per_frame)
                .map(|chirp| range_fft(frame, antenna, chirp, range_zero_pad))
                .collect();
            doppler_fft(&spectra, config, doppler_zero_pad)
        })
        .collect();
    let mag = magnitude_sum(&maps);
    let peaks = detect_peaks(&mag, &maps[0], threshold, config.min_range, config.max_range);

    let map = &maps[0];
    let cols = map.range_bins;
    let mut detections = Vec::with_capacity(peaks.len());
    for peak in peaks {
        let (row, col) = (peak.doppler_bin, peak.range_bin);
        let range_offset = if col > 0 && col + 1 < cols {
            parabolic_offset(
                mag[row * cols + col - 1],
                mag[row * cols + col],
                mag[row * cols + col + 1],
            )
        } else {
            0.0
        };
        let doppler_offset = if row > 0 && row + 1 < map.doppler_bins {
            parabolic_offset(
                mag[(row - 1) * cols + col],
                mag[row * cols + col],
                mag[(row + 1) * cols + col],
            )
        } else {
            0.0
        };
        let range = map.bin_to_range(col as f64 + range_offset);
        let radial_velocity = map.bin_to_velocity(row as f64 + doppler_offset);
        let bearing = estimate_bearing(&maps[0], &maps[1], (col, row), config);
        detections.push(Detection {
            range,
            bearing,
            radial_velocity,
            magnitude: peak.magnitude,
            timestamp: frame.timestamp,
        });
    }
    Ok(detections)
}

/// Physical range for a beat frequency: `R = c f_b / (2 S)`.
pub fn beat_to_range(beat_frequency: f64, config: &RadarConfig) -> f64 {
    SPEED_OF_LIGHT * beat_frequency / (2.0 * config.slope())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radar_model::{synthesize_frame, Echo, RadarConfig};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn echo(range: f64, bearing: f64, velocity: f64) -> Echo {
        Echo {
            range,
            bearing,
            radial_velocity: velocity,
            amplitude: 1.0,
        }
    }

    fn maps_for(config: &RadarConfig, echoes: &[Echo]) -> (Vec<RangeDopplerMap>, Vec<f64>) {
        let frame = synthesize_frame(config, echoes, 0, 0.0).unwrap();
        let maps: Vec<RangeDopplerMap> = (0..NUM_ANTENNAS)
            .map(|antenna| {
                let spectra: Vec<Vec<Complex64>> = (0..config.chirps_per_frame)
                    .map(|chirp| range_fft(&frame, antenna, chirp, DEFAULT_RANGE_ZERO_PAD))
                    .collect();
                doppler_fft(&spectra, config, 1)
            })
            .collect();
        let mag = magnitude_sum(&maps);
        (maps, mag)
    }

    #[test]
    fn all_zero_chirp_gives_all_zero_spectrum() {
        let frame = crate::radar_model::IQFrame::zeros(4, 32, 0.0);
        let spectrum = range_fft(&frame, 0, 0, 2);
        assert!(spectrum.iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn pure_exponential_hits_single_bin() {
        let n = 64;
        let k = 9;
        let samples: Vec<Complex64> = (0..n)
            .map(|i| Complex64::from_polar(1.0, 2.0 * PI * (k * i) as f64 / n as f64))
            .collect();
        let spectrum = windowed_fft(&samples, Window::Rectangular, 1);
        for (bin, value) in spectrum.iter().enumerate() {
            if bin == k {
                assert_relative_eq!(value.norm(), n as f64, epsilon = 1e-9);
            } else {
                assert!(value.norm() < 1e-9, "leakage at bin {bin}");
            }
        }
    }

    #[test]
    fn synthesized_target_peaks_at_expected_range_bin() {
        // S = 2e11 Hz/s, R = 5 m -> f_b = 6666.7 Hz.
        let config = RadarConfig {
            bandwidth: 200e6,
            chirp_duration: 1e-3,
            samples_per_chirp: 256,
            ..RadarConfig::default()
        };
        let frame = synthesize_frame(&config, &[echo(5.0, 0.0, 0.0)], 0, 0.0).unwrap();
        let spectrum = range_fft(&frame, 0, 0, 1);
        let f_b = config.beat_frequency(5.0);
        let expected_bin =
            (f_b * config.samples_per_chirp as f64 / config.sample_rate()).round() as usize;
        let peak_bin = spectrum
            .iter()
            .take(config.samples_per_chirp / 2)
            .enumerate()
            .max_by(|a, b| a.1.norm().partial_cmp(&b.1.norm()).unwrap())
            .unwrap()
            .0;
        assert_eq!(peak_bin, expected_bin);
    }

    #[test]
    fn static_target_lands_in_zero_doppler_row() {
        let config = RadarConfig::default();
        let (maps, mag) = maps_for(&config, &[echo(5.0, 0.0, 0.0)]);
        let map = &maps[0];
        let idx = mag
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        let row = idx / map.range_bins;
        assert_eq!(row, map.doppler_bins / 2);
    }

    #[test]
    fn quarter_pi_phase_step_lands_at_m_over_8() {
        // dphi = pi/4 per chirp corresponds to V = lambda / (16 Tc), i.e.
        // 1/8 cycle per chirp, landing at Doppler bin M/8.
        let config = RadarConfig::default();
        let v = config.wavelength() / (16.0 * config.chirp_duration);
        assert_relative_eq!(config.doppler_phase_step(v), PI / 4.0, epsilon = 1e-12);
        let (maps, mag) = maps_for(&config, &[echo(5.0, 0.0, v)]);
        let map = &maps[0];
        let idx = mag
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        let row = idx / map.range_bins;
        assert_eq!(row, map.doppler_bins / 2 + config.chirps_per_frame / 8);
    }

    #[test]
    fn equal_range_targets_split_by_velocity() {
        let config = RadarConfig::default();
        let v = config.wavelength() / (16.0 * config.chirp_duration);
        let (maps, mag) = maps_for(&config, &[echo(5.0, 0.0, 0.0), echo(5.0, 0.0, v)]);
        let map = &maps[0];
        let peak = mag.iter().cloned().fold(0.0, f64::max);
        let peaks = detect_peaks(&mag, map, 0.4 * peak, config.min_range, config.max_range);
        assert_eq!(peaks.len(), 2);
        let mut rows: Vec<usize> = peaks.iter().map(|p| p.doppler_bin).collect();
        rows.sort_unstable();
        assert_eq!(rows[0], map.doppler_bins / 2);
        assert_eq!(rows[1], map.doppler_bins / 2 + config.chirps_per_frame / 8);
        assert_eq!(peaks[0].range_bin, peaks[1].range_bin);
    }

    #[test]
    fn below_threshold_map_yields_no_peaks() {
        let config = RadarConfig {
            noise: crate::radar_model::NoiseModel {
                iq_noise_std: 0.01,
                ..Default::default()
            },
            ..RadarConfig::default()
        };
        let frame = synthesize_frame(&config, &[], 1, 0.0).unwrap();
        let detections = process_frame(&config, &frame, 1e6).unwrap();
        assert!(detections.is_empty());
    }

    #[test]
    fn single_target_yields_single_peak_at_expected_cell() {
        let config = RadarConfig::default();
        let (maps, mag) = maps_for(&config, &[echo(5.0, 0.0, 0.0)]);
        let map = &maps[0];
        // Oracle: global maximum by exhaustive scan.
        let idx = mag
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        let peaks = detect_peaks(
            &mag,
            map,
            0.5 * mag[idx],
            config.min_range,
            config.max_range,
        );
        assert_eq!(peaks.len(), 1);
        assert_eq!(peaks[0].range_bin, idx % map.range_bins);
        assert_eq!(peaks[0].doppler_bin, idx / map.range_bins);
    }

    #[test]
    fn three_equal_range_targets_cap_at_two() {
        let config = RadarConfig::default();
        let v = config.wavelength() / (8.0 * config.chirp_duration);
        let echoes = [
            echo(5.0, 0.0, -v),
            echo(5.0, 0.0, 0.0),
            echo(5.0, 0.0, v),
        ];
        let frame = synthesize_frame(&config, &echoes, 0, 0.0).unwrap();
        // Threshold above the Hann range sidelobes (-31.5 dB of ~4096).
        let detections = process_frame(&config, &frame, 600.0).unwrap();
        assert_eq!(detections.len(), 2);
    }

    #[test]
    fn bearing_examples() {
        let config = RadarConfig::default();
        let map_for_phase = |phase: f64| RangeDopplerMap {
            doppler_bins: 1,
            range_bins: 1,
            cells: vec![Complex64::from_polar(1.0, phase)],
            range_bin_width: 1.0,
            doppler_bin_width: 1.0,
        };
        let rx1 = map_for_phase(0.0);
        assert_relative_eq!(
            estimate_bearing(&rx1, &map_for_phase(0.0), (0, 0), &config),
            0.0
        );
        assert_relative_eq!(
            estimate_bearing(&rx1, &map_for_phase(PI / 2.0), (0, 0), &config),
            30.0_f64.to_radians(),
            epsilon = 1e-12
        );
        assert_relative_eq!(
            estimate_bearing(&rx1, &map_for_phase(PI), (0, 0), &config),
            90.0_f64.to_radians(),
            epsilon = 1e-9
        );
    }

    #[test]
    fn empty_scene_gives_empty_detections() {
        let config = RadarConfig::default();
        let frame = synthesize_frame(&config, &[], 0, 0.0).unwrap();
        assert!(process_frame(&config, &frame, 10.0).unwrap().is_empty());
    }

    #[test]
    fn round_trip_recovers_single_target() {
        let config = RadarConfig::default();
        let truth = echo(5.0, 0.0, -1.0);
        let frame = synthesize_frame(&config, &[truth], 0, 0.0).unwrap();
        let detections = process_frame(&config, &frame, 100.0).unwrap();
        assert_eq!(detections.len(), 1);
        let d = detections[0];
        let range_bin = config.range_resolution() / DEFAULT_RANGE_ZERO_PAD as f64;
        let doppler_bin = config.wavelength()
            / (2.0 * config.chirps_per_frame as f64 * config.chirp_duration);
        assert!((d.range - truth.range).abs() <= range_bin);
        assert!((d.bearing - truth.bearing).abs() <= 1.0_f64.to_radians());
        assert!((d.radial_velocity - truth.radial_velocity).abs() <= doppler_bin);
    }

    #[test]
    fn resolves_targets_at_range_resolution() {
        let config = RadarConfig::default();
        let sep = config.range_resolution();
        let frame =
            synthesize_frame(&config, &[echo(5.0, 0.0, 0.0), echo(5.0 + sep, 0.0, 0.0)], 0, 0.0)
                .unwrap();
        let detections = process_frame(&config, &frame, 600.0).unwrap();
        assert_eq!(detections.len(), 2);
    }

    #[test]
    fn merges_targets_below_half_resolution() {
        let config = RadarConfig::default();
        let frame =
            synthesize_frame(&config, &[echo(5.0, 0.0, 0.0), echo(5.3, 0.0, 0.0)], 0, 0.0)
                .unwrap();
        let detections = process_frame(&config, &frame, 600.0).unwrap();
        assert_eq!(detections.len(), 1);
    }

    #[test]
    fn raising_threshold_never_adds_detections() {
        let config = RadarConfig {
            noise: crate::radar_model::NoiseModel {
                iq_noise_std: 0.05,
                ..Default::default()
            },
            ..RadarConfig::default()
        };
        let echoes = [echo(3.0, 0.2, 0.5), echo(7.0, -0.3, -1.0)];
        let frame = synthesize_frame(&config, &echoes, 11, 0.0).unwrap();
        let mut previous = usize::MAX;
        for threshold in [50.0, 100.0, 200.0, 400.0, 800.0] {
            let count = process_frame(&config, &frame, threshold).unwrap().len();
            assert!(count <= previous);
            previous = count;
        }
    }

    #[test]
    fn bin_physical_round_trip() {
        let config = RadarConfig::default();
        let (maps, _) = maps_for(&config, &[echo(5.0, 0.0, 0.0)]);
        let map = &maps[0];
        for bin in [0usize, 1, 7, map.range_bins - 1] {
            assert_eq!(map.range_to_bin(map.bin_to_range(bin as f64)), bin);
        }
        for bin in 0..map.doppler_bins {
            assert_eq!(map.velocity_to_bin(map.bin_to_velocity(bin as f64)), bin);
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let config = RadarConfig::default();
        let frame = crate::radar_model::IQFrame::zeros(4, 32, 0.0);
        assert!(matches!(
            process_frame(&config, &frame, 1.0),
            Err(RadarError::DimensionMismatch { .. })
        ));
    }
}
