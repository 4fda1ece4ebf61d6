//! Multi-target tracking from radar detections.
//!
//! Tracks live in a polar sensor-frame state
//! `x = (r, theta, r_dot, theta_dot, r_ddot, theta_ddot)` with a
//! constant-acceleration motion model. The measurement triple
//! `(r, theta, r_dot)` is linear in this state, so an ordinary Kalman
//! filter applies. Detections are associated to tracks with a gated GNN
//! cost matrix solved by the Hungarian algorithm; track birth and death
//! are driven by the trace of the position block of the covariance.

mod assignment;

pub use assignment::{brute_force_assignment, solve_assignment, Assignment, CostMatrix};

use nalgebra::{Matrix3, Matrix6, Matrix3x6, Vector2, Vector3, Vector6};

use crate::geometry::wrap_angle;

/// State indices: value, rate and acceleration interleave as
/// (r, theta, r_dot, theta_dot, r_ddot, theta_ddot).
const IDX_RANGE: usize = 0;
const IDX_BEARING: usize = 1;
const IDX_RANGE_RATE: usize = 2;
const IDX_BEARING_RATE: usize = 3;

/// One measurement handed to the tracker: range, bearing, radial velocity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Measurement {
    pub range: f64,
    pub bearing: f64,
    pub radial_velocity: f64,
    pub timestamp: f64,
}

impl Measurement {
    pub fn vector(&self) -> Vector3<f64> {
        Vector3::new(self.range, self.bearing, self.radial_velocity)
    }
}

/// Mean and covariance of one track.
#[derive(Clone, Debug, PartialEq)]
pub struct TrackState {
    pub x: Vector6<f64>,
    pub p: Matrix6<f64>,
}

impl TrackState {
    /// Trace of the position block of P, the birth/death score.
    pub fn position_covariance_score(&self) -> f64 {
        self.p[(IDX_RANGE, IDX_RANGE)] + self.p[(IDX_BEARING, IDX_BEARING)]
    }

    pub fn range(&self) -> f64 {
        self.x[IDX_RANGE]
    }

    pub fn bearing(&self) -> f64 {
        self.x[IDX_BEARING]
    }

    pub fn range_rate(&self) -> f64 {
        self.x[IDX_RANGE_RATE]
    }

    pub fn bearing_rate(&self) -> f64 {
        self.x[IDX_BEARING_RATE]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrackStatus {
    Candidate,
    Confirmed,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Track {
    pub id: u64,
    pub state: TrackState,
    pub status: TrackStatus,
    /// Timestamp of the last measurement update, s.
    pub last_update: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrackerConfig {
    /// Probability of detecting a tracked object per frame, in (0, 1).
    pub detection_probability: f64,
    /// Gating threshold on the Mahalanobis distance sqrt(r' S^-1 r).
    pub gate_threshold: f64,
    /// Candidate -> confirmed when the position covariance score drops below this.
    pub birth_threshold: f64,
    /// Track deleted when the position covariance score grows above this.
    pub death_threshold: f64,
    /// White-noise-jerk process noise intensity.
    pub process_noise_intensity: f64,
    /// Measurement noise covariance for (r, theta, r_dot).
    pub measurement_noise: Matrix3<f64>,
    /// Prior covariance for freshly born candidate tracks.
    pub initial_covariance: Matrix6<f64>,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            detection_probability: 0.9,
            gate_threshold: 4.0,
            birth_threshold: 0.03,
            death_threshold: 0.15,
            process_noise_intensity: 0.5,
            measurement_noise: Matrix3::from_diagonal(&Vector3::new(
                0.15 * 0.15,
                0.035 * 0.035,
                0.4 * 0.4,
            )),
            initial_covariance: Matrix6::from_diagonal(&Vector6::new(
                1.0, 0.25, 1.0, 0.5, 1.0, 1.0,
            )),
        }
    }
}

impl TrackerConfig {
    /// Misdetection cost `-log(1 - P_D)`.
    pub fn misdetection_cost(&self) -> f64 {
        -(1.0 - self.detection_probability).ln()
    }
}

/// Measurement matrix selecting (r, theta, r_dot).
fn measurement_matrix() -> Matrix3x6<f64> {
    let mut h = Matrix3x6::zeros();
    h[(0, IDX_RANGE)] = 1.0;
    h[(1, IDX_BEARING)] = 1.0;
    h[(2, IDX_RANGE_RATE)] = 1.0;
    h
}

/// Constant-acceleration transition matrix for step `dt`.
pub fn transition_matrix(dt: f64) -> Matrix6<f64> {
    let mut f = Matrix6::identity();
    for value in 0..2 {
        f[(value, value + 2)] = dt;
        f[(value, value + 4)] = 0.5 * dt * dt;
        f[(value + 2, value + 4)] = dt;
    }
    f
}

/// White-noise-jerk process noise for step `dt`, scaled by `intensity`.
pub fn process_noise(dt: f64, intensity: f64) -> Matrix6<f64> {
    let d2 = dt * dt;
    let d3 = d2 * dt;
    let d4 = d3 * dt;
    let d5 = d4 * dt;
    let block = [
        [d5 / 20.0, d4 / 8.0, d3 / 6.0],
        [d4 / 8.0, d3 / 3.0, d2 / 2.0],
        [d3 / 6.0, d2 / 2.0, dt],
    ];
    let mut q = Matrix6::zeros();
    for value in 0..2 {
        for (bi, row) in block.iter().enumerate() {
            for (bj, &cell) in row.iter().enumerate() {
                q[(value + 2 * bi, value + 2 * bj)] = intensity * cell;
            }
        }
    }
    q
}

/// Propagates a track forward by `dt` under the constant-acceleration model.
pub fn predict(track: &Track, dt: f64, config: &TrackerConfig) -> Track {
    assert!(dt > 0.0, "predict requires dt > 0");
    let f = transition_matrix(dt);
    let q = process_noise(dt, config.process_noise_intensity);
    let mut state = TrackState {
        x: f * track.state.x,
        p: f * track.state.p * f.transpose() + q,
    };
    state.x[IDX_BEARING] = wrap_angle(state.x[IDX_BEARING]);
    symmetrize(&mut state.p);
    Track {
        state,
        ..track.clone()
    }
}

/// Measurement residual (bearing wrapped) and innovation covariance.
pub fn innovation(
    track: &Track,
    z: &Measurement,
    config: &TrackerConfig,
) -> (Vector3<f64>, Matrix3<f64>) {
    let h = measurement_matrix();
    let predicted = h * track.state.x;
    let mut residual = z.vector() - predicted;
    residual[1] = wrap_angle(residual[1]);
    let s = h * track.state.p * h.transpose() + config.measurement_noise;
    (residual, s)
}

/// Builds the gated GNN cost matrix for predicted tracks vs detections.
///
/// Association cost is half the squared Mahalanobis distance; pairs whose
/// Mahalanobis distance exceeds the gate, and pairs with a singular
/// innovation covariance, are set to infinity. Singular pairs are listed
/// in the returned matrix for diagnostics.
pub fn build_cost_matrix(
    tracks: &[Track],
    detections: &[Measurement],
    config: &TrackerConfig,
) -> CostMatrix {
    let mut matrix = CostMatrix::new(tracks.len(), detections.len(), config.misdetection_cost());
    for (ti, track) in tracks.iter().enumerate() {
        for (di, z) in detections.iter().enumerate() {
            let (residual, s) = innovation(track, z, config);
            match s.try_inverse() {
                Some(s_inv) => {
                    let d2 = (residual.transpose() * s_inv * residual)[(0, 0)];
                    if d2.sqrt() <= config.gate_threshold {
                        matrix.set_association(ti, di, 0.5 * d2);
                    }
                }
                None => matrix.singular_pairs.push((ti, di)),
            }
        }
    }
    matrix
}

/// Outcome of a measurement update.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UpdateOutcome {
    Applied,
    /// Innovation covariance was singular; covariance inflated instead.
    SkippedSingular,
}

// Inflation factor used when an update must be skipped.
const SINGULAR_INFLATION: f64 = 2.0;

/// Kalman measurement update with the Joseph-form covariance update.
pub fn update(track: &mut Track, z: &Measurement, config: &TrackerConfig) -> UpdateOutcome {
    let (residual, s) = innovation(track, z, config);
    let Some(s_inv) = s.try_inverse() else {
        track.state.p *= SINGULAR_INFLATION;
        return UpdateOutcome::SkippedSingular;
    };
    let h = measurement_matrix();
    let gain = track.state.p * h.transpose() * s_inv;
    track.state.x += gain * residual;
    track.state.x[IDX_BEARING] = wrap_angle(track.state.x[IDX_BEARING]);
    let identity = Matrix6::identity();
    let a = identity - gain * h;
    track.state.p = a * track.state.p * a.transpose()
        + gain * config.measurement_noise * gain.transpose();
    symmetrize(&mut track.state.p);
    track.last_update = z.timestamp;
    UpdateOutcome::Applied
}

fn symmetrize(p: &mut Matrix6<f64>) {
    let t = p.transpose();
    *p = (*p + t) * 0.5;
}

/// Events of one tracker step, for logging.
#[derive(Clone, Debug, Default)]
pub struct StepReport {
    /// Track id -> assigned detection index (None = misdetection).
    pub assignments: Vec<(u64, Option<usize>)>,
    pub born: Vec<u64>,
    pub confirmed: Vec<u64>,
    pub died: Vec<u64>,
    /// Track/detection index pairs whose innovation covariance was singular.
    pub singular_pairs: Vec<(usize, usize)>,
}

/// The tracker: owns the track list and the id counter.
#[derive(Clone, Debug)]
pub struct Tracker {
    pub config: TrackerConfig,
    pub tracks: Vec<Track>,
    next_id: u64,
}

impl Tracker {
    pub fn new(config: TrackerConfig) -> Self {
        Tracker {
            config,
            tracks: Vec::new(),
            next_id: 0,
        }
    }

    pub fn confirmed(&self) -> impl Iterator<Item = &Track> {
        self.tracks
            .iter()
            .filter(|t| t.status == TrackStatus::Confirmed)
    }

    /// One full cycle: predict, associate, update, manage lifecycle.
    pub fn step(&mut self, detections: &[Measurement], dt: f64) -> StepReport {
        let mut report = StepReport::default();

        for track in &mut self.tracks {
            *track = predict(track, dt, &self.config);
        }
        let matrix = build_cost_matrix(&self.tracks, detections, &self.config);
        report.singular_pairs = matrix.singular_pairs.clone();
        let assignment = solve_assignment(&matrix);

        for (track, assigned) in self.tracks.iter_mut().zip(&assignment.track_to_detection) {
            report.assignments.push((track.id, *assigned));
            if let Some(det) = assigned {
                update(track, &detections[*det], &self.config);
            }
            // Misdetected tracks keep their predicted state; the covariance
            // growth from predict is what eventually kills them.
        }

        let unassigned: Vec<Measurement> = assignment
            .unassigned_detections
            .iter()
            .map(|&d| detections[d])
            .collect();
        self.manage_lifecycle(&unassigned, &mut report);
        report
    }

    /// Births candidates from unassigned detections, promotes candidates
    /// whose covariance score fell below the birth threshold, and deletes
    /// tracks whose score rose above the death threshold.
    pub fn manage_lifecycle(&mut self, unassigned: &[Measurement], report: &mut StepReport) {
        let config = &self.config;
        self.tracks.retain(|track| {
            let alive = track.state.position_covariance_score() <= config.death_threshold;
            if !alive {
                report.died.push(track.id);
            }
            alive
        });
        for track in &mut self.tracks {
            if track.status == TrackStatus::Candidate
                && track.state.position_covariance_score() < config.birth_threshold
            {
                track.status = TrackStatus::Confirmed;
                report.confirmed.push(track.id);
            }
        }
        for z in unassigned {
            let id = self.next_id;
            self.next_id += 1;
            let mut x = Vector6::zeros();
            x[IDX_RANGE] = z.range;
            x[IDX_BEARING] = z.bearing;
            x[IDX_RANGE_RATE] = z.radial_velocity;
            self.tracks.push(Track {
                id,
                state: TrackState {
                    x,
                    p: config.initial_covariance,
                },
                status: TrackStatus::Candidate,
                last_update: z.timestamp,
            });
            report.born.push(id);
        }
    }
}

/// Converts a track to a Cartesian sensor-frame obstacle estimate:
/// relative position and relative velocity of the object.
pub fn track_to_obstacle(track: &Track) -> (Vector2<f64>, Vector2<f64>) {
    let r = track.state.range();
    let theta = track.state.bearing();
    let (sin_t, cos_t) = theta.sin_cos();
    let radial = Vector2::new(cos_t, sin_t);
    let tangential = Vector2::new(-sin_t, cos_t);
    let position = r * radial;
    let velocity = track.state.range_rate() * radial + r * track.state.bearing_rate() * tangential;
    (position, velocity)
}
