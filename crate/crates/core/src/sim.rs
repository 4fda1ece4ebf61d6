//! Deterministic closed-loop trials: radar synthesis, detection, tracking
//! and avoidance around a planar MAV with first-order velocity dynamics.

use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::io::Write;
use std::path::Path;

use crate::avoidance::{
    avoid_onto_side, collision_cone, in_cone, nearer_side, select_nearest, side_step,
    AvoidanceConfig, AvoidanceMode, ObstacleEstimate,
};
use crate::detector::{process_frame, Detection};
use crate::geometry::{linear_fit, rotate};
use crate::radar_model::{
    build_echoes, synthesize_frame, Echo, EgoState, PointTarget, RadarConfig,
};
use crate::tracker::{
    track_to_obstacle, Measurement, Tracker, TrackerConfig, TrackStatus,
};

/// A cylindrical obstacle (a pole seen from above).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Obstacle {
    pub center: Vector2<f64>,
    pub radius: f64,
    /// Constant velocity; zero for static poles.
    pub velocity: Vector2<f64>,
}

impl Obstacle {
    pub fn static_pole(x: f64, y: f64, radius: f64) -> Self {
        Obstacle {
            center: Vector2::new(x, y),
            radius,
            velocity: Vector2::zeros(),
        }
    }
}

/// World geometry and vehicle limits for one trial.
#[derive(Clone, Debug, PartialEq)]
pub struct WorldConfig {
    pub arena_min: Vector2<f64>,
    pub arena_max: Vector2<f64>,
    pub obstacles: Vec<Obstacle>,
    pub start: Vector2<f64>,
    pub goal: Vector2<f64>,
    pub mav_radius: f64,
    pub max_speed: f64,
    pub max_accel: f64,
    /// First-order velocity response time constant, s.
    pub control_lag: f64,
    pub frame_rate: f64,
    pub seed: u64,
    pub goal_tolerance: f64,
    /// Trial aborts with a timeout after this long, s.
    pub max_duration: f64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            arena_min: Vector2::new(-10.0, -10.0),
            arena_max: Vector2::new(10.0, 10.0),
            obstacles: Vec::new(),
            start: Vector2::new(-5.0, 0.0),
            goal: Vector2::new(5.0, 0.0),
            mav_radius: 0.2,
            max_speed: 1.0,
            max_accel: 3.0,
            control_lag: 0.3,
            frame_rate: 10.0,
            seed: 0,
            goal_tolerance: 0.3,
            max_duration: 60.0,
        }
    }
}

/// Full configuration of one closed-loop trial.
#[derive(Clone, Debug)]
pub struct SimConfig {
    pub radar: RadarConfig,
    pub detection_threshold: f64,
    pub tracker: TrackerConfig,
    pub avoidance: AvoidanceConfig,
    pub avoidance_enabled: bool,
    /// Radius assumed for tracked obstacles (the radar cannot measure it).
    pub assumed_obstacle_radius: f64,
    pub world: WorldConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            radar: RadarConfig::default(),
            detection_threshold: 600.0,
            tracker: TrackerConfig::default(),
            avoidance: AvoidanceConfig::default(),
            avoidance_enabled: true,
            assumed_obstacle_radius: 0.25,
            world: WorldConfig::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    ReachedGoal,
    Collision,
    Timeout,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Event {
    TrackBirth { time: f64, id: u64 },
    TrackConfirmed { time: f64, id: u64 },
    TrackDeath { time: f64, id: u64 },
    ConeEntry { time: f64 },
    Collision { time: f64 },
}

/// Per-frame snapshot of one track for the log.
#[derive(Clone, Debug, PartialEq)]
pub struct TrackRecord {
    pub id: u64,
    pub confirmed: bool,
    pub range: f64,
    pub bearing: f64,
    pub range_rate: f64,
    pub bearing_rate: f64,
    pub position_covariance_trace: f64,
    pub assigned_detection: Option<usize>,
}

/// Per-frame avoidance decision for the log.
#[derive(Clone, Debug, PartialEq)]
pub struct CommandRecord {
    pub mode: &'static str,
    pub obstacle_id: Option<u64>,
    pub in_cone: bool,
    pub desired: Vector2<f64>,
    pub commanded: Vector2<f64>,
    pub cone_half_angle: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrameRecord {
    pub frame: usize,
    pub time: f64,
    pub position: Vector2<f64>,
    pub heading: f64,
    pub velocity: Vector2<f64>,
    pub clearance: f64,
    pub detections: Vec<Detection>,
    pub tracks: Vec<TrackRecord>,
    pub command: CommandRecord,
}

/// Full record of one trial.
#[derive(Clone, Debug)]
pub struct TrialLog {
    pub seed: u64,
    pub outcome: Outcome,
    pub min_clearance: f64,
    pub frames: Vec<FrameRecord>,
    pub events: Vec<Event>,
}

/// Mutable state of a running trial.
pub struct SimState {
    pub time: f64,
    pub frame: usize,
    pub position: Vector2<f64>,
    pub heading: f64,
    pub velocity: Vector2<f64>,
    pub obstacles: Vec<Obstacle>,
    pub tracker: Tracker,
    rng: ChaCha8Rng,
    halt_noise_until: f64,
    was_above_halt_threshold: bool,
    sidestep_target: Option<Vector2<f64>>,
    previous_in_cone: bool,
    /// Track id and cone edge (+1 left, -1 right) committed to while
    /// avoiding; the commitment only holds for that obstacle.
    avoid_commit: Option<(u64, f64)>,
    /// Last confirmed nearest obstacle, remembered briefly after the
    /// track is lost. The radar cannot see targets below the minimum
    /// range or outside the field of view, both of which happen
    /// mid-manoeuvre at close quarters; the controller keeps steering
    /// around this remembered estimate instead of snapping back onto a
    /// course through it.
    ghost: Option<GhostObstacle>,
}

#[derive(Clone, Copy)]
struct GhostObstacle {
    track_id: u64,
    /// Obstacle position in the world frame.
    position: Vector2<f64>,
    velocity: Vector2<f64>,
    expires_at: f64,
}

/// How long a lost obstacle is remembered, in seconds.
const GHOST_MEMORY: f64 = 3.0;

impl SimState {
    pub fn new(config: &SimConfig) -> Self {
        let to_goal = config.world.goal - config.world.start;
        let heading = if to_goal.norm() > 1e-9 {
            to_goal.y.atan2(to_goal.x)
        } else {
            0.0
        };
        SimState {
            time: 0.0,
            frame: 0,
            position: config.world.start,
            heading,
            velocity: Vector2::zeros(),
            obstacles: config.world.obstacles.clone(),
            tracker: Tracker::new(config.tracker.clone()),
            rng: ChaCha8Rng::seed_from_u64(config.world.seed),
            halt_noise_until: -1.0,
            was_above_halt_threshold: false,
            sidestep_target: None,
            previous_in_cone: false,
            avoid_commit: None,
            ghost: None,
        }
    }
}

/// Advances the world by one radar frame. Returns the frame record and the
/// outcome, if the trial ended this frame.
pub fn step(state: &mut SimState, config: &SimConfig) -> (FrameRecord, Option<Outcome>) {
    let (record, _events, outcome) = step_with_events(state, config);
    (record, outcome)
}

/// [`step`] that also reports the events raised during the frame.
pub fn step_with_events(
    state: &mut SimState,
    config: &SimConfig,
) -> (FrameRecord, Vec<Event>, Option<Outcome>) {
    let dt = 1.0 / config.world.frame_rate;

    // --- Sense: each obstacle reflects from its nearest surface point.
    let ego = EgoState {
        position: state.position,
        heading: state.heading,
        velocity: state.velocity,
    };
    let reflectors: Vec<PointTarget> = state
        .obstacles
        .iter()
        .filter_map(|obstacle| {
            let to_centre = obstacle.center - state.position;
            let distance = to_centre.norm();
            (distance > obstacle.radius).then(|| PointTarget {
                position: obstacle.center - to_centre / distance * obstacle.radius,
                velocity: obstacle.velocity,
                amplitude: 1.0,
            })
        })
        .collect();
    let error_multiplier = halt_noise_multiplier(state, config);
    let echoes: Vec<Echo> = build_echoes(
        &config.radar,
        &ego,
        &reflectors,
        error_multiplier,
        &mut state.rng,
    );
    let frame_seed: u64 = state.rng.gen();
    let frame = synthesize_frame(&config.radar, &echoes, frame_seed, state.time)
        .expect("valid radar config");
    let detections =
        process_frame(&config.radar, &frame, config.detection_threshold).expect("matching dims");

    // --- Track.
    let measurements: Vec<Measurement> = detections
        .iter()
        .map(|d| Measurement {
            range: d.range,
            bearing: d.bearing,
            radial_velocity: d.radial_velocity,
            timestamp: d.timestamp,
        })
        .collect();
    let report = state.tracker.step(&measurements, dt);

    // --- Decide.
    let (command, mut events) = decide(state, config, dt);

    // --- Act: first-order velocity response with acceleration limit.
    let alpha = (dt / config.world.control_lag).min(1.0);
    let mut delta_v = (command.commanded - state.velocity) * alpha;
    let max_delta = config.world.max_accel * dt;
    if delta_v.norm() > max_delta {
        delta_v *= max_delta / delta_v.norm();
    }
    state.velocity += delta_v;
    if state.velocity.norm() > config.world.max_speed {
        state.velocity *= config.world.max_speed / state.velocity.norm();
    }
    state.position += state.velocity * dt;
    if state.velocity.norm() > 0.05 {
        state.heading = state.velocity.y.atan2(state.velocity.x);
    }
    for obstacle in &mut state.obstacles {
        obstacle.center += obstacle.velocity * dt;
    }
    state.time += dt;
    state.frame += 1;

    // --- Log and judge.
    for id in &report.born {
        events.push(Event::TrackBirth {
            time: state.time,
            id: *id,
        });
    }
    for id in &report.confirmed {
        events.push(Event::TrackConfirmed {
            time: state.time,
            id: *id,
        });
    }
    for id in &report.died {
        events.push(Event::TrackDeath {
            time: state.time,
            id: *id,
        });
    }

    let clearance = state
        .obstacles
        .iter()
        .map(|o| (o.center - state.position).norm() - o.radius - config.world.mav_radius)
        .fold(f64::INFINITY, f64::min);

    let tracks = state
        .tracker
        .tracks
        .iter()
        .map(|track| TrackRecord {
            id: track.id,
            confirmed: track.status == TrackStatus::Confirmed,
            range: track.state.range(),
            bearing: track.state.bearing(),
            range_rate: track.state.range_rate(),
            bearing_rate: track.state.bearing_rate(),
            position_covariance_trace: track.state.position_covariance_score(),
            assigned_detection: report
                .assignments
                .iter()
                .find(|(id, _)| *id == track.id)
                .and_then(|(_, det)| *det),
        })
        .collect();

    let record = FrameRecord {
        frame: state.frame - 1,
        time: frame.timestamp,
        position: state.position,
        heading: state.heading,
        velocity: state.velocity,
        clearance,
        detections,
        tracks,
        command,
    };

    let outcome = if clearance < 0.0 {
        Some(Outcome::Collision)
    } else if (state.position - config.world.goal).norm() <= config.world.goal_tolerance {
        Some(Outcome::ReachedGoal)
    } else if state.time >= config.world.max_duration {
        Some(Outcome::Timeout)
    } else {
        None
    };
    if outcome == Some(Outcome::Collision) {
        events.push(Event::Collision { time: state.time });
    }

    (record, events, outcome)
}

fn halt_noise_multiplier(state: &mut SimState, config: &SimConfig) -> f64 {
    let Some(burst) = &config.radar.noise.halt_noise_burst else {
        return 1.0;
    };
    let speed = state.velocity.norm();
    if speed < burst.speed_threshold {
        if state.was_above_halt_threshold {
            state.halt_noise_until = state.time + burst.duration;
        }
        state.was_above_halt_threshold = false;
    } else {
        state.was_above_halt_threshold = true;
    }
    if state.time < state.halt_noise_until {
        burst.multiplier
    } else {
        1.0
    }
}

/// Picks this frame's velocity command from the confirmed tracks.
fn decide(state: &mut SimState, config: &SimConfig, dt: f64) -> (CommandRecord, Vec<Event>) {
    let mut events = Vec::new();
    let to_goal = config.world.goal - state.position;
    let distance = to_goal.norm();
    let cruise = config.world.max_speed.min(distance);
    let desired = if distance > 1e-9 {
        to_goal / distance * cruise
    } else {
        Vector2::zeros()
    };

    // Confirmed tracks, rotated into the world frame. Tracks that have
    // coasted for several frames extrapolate a stale range rate and can
    // report a wildly wrong range; only freshly updated tracks feed the
    // avoidance logic, and the ghost memory below carries the last good
    // estimate through detection gaps.
    let freshness = 3.0 / config.world.frame_rate;
    let obstacles: Vec<(u64, ObstacleEstimate)> = state
        .tracker
        .tracks
        .iter()
        .filter(|t| {
            t.status == TrackStatus::Confirmed && state.time - t.last_update <= freshness
        })
        .map(|track| {
            let (p_body, v_rel_body) = track_to_obstacle(track);
            let relative_position = rotate(p_body, state.heading);
            // v_rel_body estimates V_B - V_A in the body frame.
            let obstacle_velocity = state.velocity + rotate(v_rel_body, state.heading);
            (
                track.id,
                ObstacleEstimate {
                    relative_position,
                    relative_velocity: desired - obstacle_velocity,
                    obstacle_velocity,
                    radius: config.assumed_obstacle_radius,
                },
            )
        })
        .collect();

    // The remembered obstacle competes with the live tracks for the
    // nearest slot: a pole that just slipped below the minimum range is
    // closer than anything the radar still sees.
    let position = state.position;
    let time = state.time;
    state.ghost = state
        .ghost
        .filter(|g| time <= g.expires_at && (g.position - position).dot(&desired) > 0.0);
    let mut candidates = obstacles.clone();
    if let Some(ghost) = state.ghost {
        if !candidates.iter().any(|(id, _)| *id == ghost.track_id) {
            candidates.push((
                ghost.track_id,
                ObstacleEstimate {
                    relative_position: ghost.position - state.position,
                    relative_velocity: desired - ghost.velocity,
                    obstacle_velocity: ghost.velocity,
                    radius: config.assumed_obstacle_radius,
                },
            ));
        }
    }

    let estimates: Vec<ObstacleEstimate> = candidates.iter().map(|(_, o)| *o).collect();
    let nearest = select_nearest(&estimates).copied();
    let nearest_id = nearest.and_then(|n| {
        candidates
            .iter()
            .find(|(_, o)| o.relative_position == n.relative_position)
            .map(|(id, _)| *id)
    });

    // Refresh the memory whenever the nearest estimate comes from a
    // live track; a ghost never extends its own lifetime.
    if let (Some(obstacle), Some(id)) = (nearest, nearest_id) {
        if obstacles.iter().any(|(live_id, _)| *live_id == id) {
            state.ghost = Some(GhostObstacle {
                track_id: id,
                position: state.position + obstacle.relative_position,
                velocity: obstacle.obstacle_velocity,
                expires_at: state.time + GHOST_MEMORY,
            });
        }
    }

    let mut record = CommandRecord {
        mode: if !config.avoidance_enabled {
            "disabled"
        } else {
            match config.avoidance.mode {
                AvoidanceMode::VelocityObstacle => "velocity_obstacle",
                AvoidanceMode::SideStep => "side_step",
            }
        },
        obstacle_id: nearest_id,
        in_cone: false,
        desired,
        commanded: desired,
        cone_half_angle: 0.0,
    };

    if !config.avoidance_enabled {
        state.previous_in_cone = false;
        state.avoid_commit = None;
        return (record, events);
    }

    let Some(obstacle) = nearest else {
        state.previous_in_cone = false;
        state.sidestep_target = None;
        state.avoid_commit = None;
        return (record, events);
    };

    let r_c = config.avoidance.combined_radius(obstacle.radius);
    match collision_cone(obstacle.relative_position, r_c) {
        Err(_) => {
            // Already inside the combined radius by the track's estimate.
            // Stopping dead here is a trap: the obstacle sits below the
            // radar's minimum range, so the estimate never improves and
            // the stand-off ends with a blind dash. Back straight away
            // until the cone is well defined again.
            record.in_cone = true;
            let p = obstacle.relative_position;
            record.commanded = if p.norm() > 1e-9 {
                -p / p.norm() * cruise
            } else {
                Vector2::zeros()
            };
        }
        Ok(cone) => {
            record.cone_half_angle = cone.half_angle;
            record.in_cone = in_cone(obstacle.relative_velocity, &cone);
            if record.in_cone && !state.previous_in_cone {
                events.push(Event::ConeEntry { time: state.time });
            }
            state.previous_in_cone = record.in_cone;
            match config.avoidance.mode {
                AvoidanceMode::VelocityObstacle => {
                    // Steer against a cone inflated by the control reaction
                    // distance so the lagged velocity response still clears
                    // the real combined radius. If already inside the
                    // inflated bubble, fall back to the real cone.
                    let reaction = config.world.max_speed * config.world.control_lag;
                    let steer = ObstacleEstimate {
                        radius: obstacle.radius + reaction,
                        ..obstacle
                    };
                    let (target, target_cone) = match collision_cone(
                        steer.relative_position,
                        config.avoidance.combined_radius(steer.radius),
                    ) {
                        Ok(steer_cone) => (steer, steer_cone),
                        Err(_) => (obstacle, cone),
                    };
                    // Commit to one edge on cone entry and hold it for the
                    // whole encounter so the command does not chatter
                    // between sides. The commitment is dropped when the
                    // nearest track changes (a different obstacle needs its
                    // own side) or once the obstacle falls behind the
                    // desired course.
                    if state
                        .avoid_commit
                        .is_some_and(|(id, _)| nearest_id != Some(id))
                        || obstacle.relative_position.dot(&desired) <= 0.0
                    {
                        state.avoid_commit = None;
                    }
                    if state.avoid_commit.is_none()
                        && in_cone(target.relative_velocity, &target_cone)
                    {
                        if let Some(id) = nearest_id {
                            state.avoid_commit =
                                Some((id, nearer_side(&target_cone, target.relative_velocity)));
                        }
                    }
                    if let Some((_, side)) = state.avoid_commit {
                        // Turn-rate clipping is relative to the velocity the
                        // vehicle is actually flying, not the desired one.
                        let reference = if state.velocity.norm() > 1e-9 {
                            state.velocity
                        } else {
                            desired
                        };
                        if let Ok(command) =
                            avoid_onto_side(reference, &target, &config.avoidance, dt, side)
                        {
                            // Keep cruising speed while detouring: the edge
                            // projection sets the direction, the vehicle
                            // should not stall in front of the obstacle.
                            let speed = command.velocity.norm();
                            record.commanded = if speed > 1e-9 {
                                command.velocity * (cruise / speed)
                            } else {
                                command.velocity
                            };
                        }
                    }
                }
                AvoidanceMode::SideStep => {
                    if let Some(target) = state.sidestep_target {
                        if (target - state.position).norm() < 0.2 {
                            state.sidestep_target = None;
                        }
                    }
                    if state.sidestep_target.is_none() && record.in_cone {
                        if let Ok(offset) = side_step(&obstacle, &config.avoidance) {
                            if offset.norm() > 0.0 {
                                state.sidestep_target =
                                    Some(state.position + rotate(offset, state.heading));
                            }
                        }
                    }
                    if let Some(target) = state.sidestep_target {
                        let to_target = target - state.position;
                        let speed = config.world.max_speed.min(to_target.norm());
                        if to_target.norm() > 1e-9 {
                            record.commanded = to_target / to_target.norm() * speed;
                        }
                    }
                }
            }
        }
    }
    (record, events)
}

/// Runs one trial to completion. Fully deterministic given the config.
pub fn run_trial(config: &SimConfig) -> TrialLog {
    let mut state = SimState::new(config);
    let mut frames = Vec::new();
    let mut events = Vec::new();
    let mut min_clearance = f64::INFINITY;

    // Degenerate start-at-goal trials end immediately.
    if (state.position - config.world.goal).norm() <= config.world.goal_tolerance {
        return TrialLog {
            seed: config.world.seed,
            outcome: Outcome::ReachedGoal,
            min_clearance,
            frames,
            events,
        };
    }

    loop {
        let (record, frame_events, outcome) = step_with_events(&mut state, config);
        min_clearance = min_clearance.min(record.clearance);
        frames.push(record);
        events.extend(frame_events);
        if let Some(outcome) = outcome {
            return TrialLog {
                seed: config.world.seed,
                outcome,
                min_clearance,
                frames,
                events,
            };
        }
    }
}

/// Runs many trials; results are identical regardless of `parallelism`.
pub fn run_batch(configs: &[SimConfig], parallelism: usize) -> Vec<TrialLog> {
    if parallelism <= 1 {
        configs.iter().map(run_trial).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(parallelism)
            .build()
            .expect("thread pool");
        pool.install(|| configs.par_iter().map(run_trial).collect())
    }
}

/// Configuration of the detection-error-vs-angle sweep.
#[derive(Clone, Debug)]
pub struct SweepConfig {
    pub radar: RadarConfig,
    pub detection_threshold: f64,
    /// Range at which the static probe target is placed, m.
    pub target_range: f64,
    /// Bearing grid step, deg.
    pub bearing_step_deg: f64,
    pub seeds_per_bearing: usize,
    pub base_seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            radar: RadarConfig::default(),
            detection_threshold: 600.0,
            target_range: 5.0,
            bearing_step_deg: 2.0,
            seeds_per_bearing: 100,
            base_seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepRow {
    pub bearing_deg: f64,
    pub mean_abs_range_error: f64,
    pub mean_abs_bearing_error_deg: f64,
}

#[derive(Clone, Debug)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub range_slope: f64,
    pub range_r_squared: f64,
    pub bearing_slope: f64,
    pub bearing_r_squared: f64,
}

/// Places a static target at a fixed range across the bearing grid, runs
/// the detector many times per bearing, and fits the mean absolute errors
/// against the bearing.
pub fn error_sweep(config: &SweepConfig) -> SweepResult {
    let fov_deg = config.radar.fov_half_angle.to_degrees();
    let mut rows = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(config.base_seed);
    let mut bearing_deg = 0.0;
    while bearing_deg <= fov_deg + 1e-9 {
        let true_bearing = bearing_deg.to_radians();
        let sigma_r = config.radar.noise.range_error_slope * true_bearing;
        let sigma_b = config.radar.noise.bearing_error_slope * true_bearing;
        let mut range_error_sum = 0.0;
        let mut bearing_error_sum = 0.0;
        let mut hits = 0usize;
        for _ in 0..config.seeds_per_bearing {
            let range = config.target_range + gaussian(&mut rng, sigma_r);
            let bearing = true_bearing + gaussian(&mut rng, sigma_b);
            let echo = Echo {
                range,
                bearing,
                radial_velocity: 0.0,
                amplitude: 1.0,
            };
            let seed: u64 = rng.gen();
            let frame = synthesize_frame(&config.radar, &[echo], seed, 0.0).expect("valid config");
            let detections =
                process_frame(&config.radar, &frame, config.detection_threshold).unwrap();
            let Some(best) = detections.iter().min_by(|a, b| {
                (a.range - config.target_range)
                    .abs()
                    .partial_cmp(&(b.range - config.target_range).abs())
                    .unwrap()
            }) else {
                continue;
            };
            range_error_sum += (best.range - config.target_range).abs();
            bearing_error_sum += (best.bearing - true_bearing).abs();
            hits += 1;
        }
        if hits > 0 {
            rows.push(SweepRow {
                bearing_deg,
                mean_abs_range_error: range_error_sum / hits as f64,
                mean_abs_bearing_error_deg: (bearing_error_sum / hits as f64).to_degrees(),
            });
        }
        bearing_deg += config.bearing_step_deg;
    }
    let x: Vec<f64> = rows.iter().map(|r| r.bearing_deg).collect();
    let range_errors: Vec<f64> = rows.iter().map(|r| r.mean_abs_range_error).collect();
    let bearing_errors: Vec<f64> = rows.iter().map(|r| r.mean_abs_bearing_error_deg).collect();
    let (range_slope, _, range_r_squared) = linear_fit(&x, &range_errors);
    let (bearing_slope, _, bearing_r_squared) = linear_fit(&x, &bearing_errors);
    SweepResult {
        rows,
        range_slope,
        range_r_squared,
        bearing_slope,
        bearing_r_squared,
    }
}

fn gaussian(rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
    if sigma > 0.0 {
        use rand_distr::Distribution;
        rand_distr::Normal::new(0.0, sigma).unwrap().sample(rng)
    } else {
        0.0
    }
}

#[derive(Serialize)]
struct TrialSummary {
    outcome: Outcome,
    min_clearance: f64,
    frames: usize,
    seed: u64,
}

/// Writes the four per-stream CSVs plus the summary JSON for one trial.
///
/// Files are named `<trial_id>_<stream>.csv` and `<trial_id>_summary.json`.
pub fn write_trial_log(log: &TrialLog, dir: &Path, trial_id: &str) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;

    let mut truth = String::from("frame,time,x,y,heading,vx,vy,clearance\n");
    let mut detections = String::from("frame,time,range,bearing,radial_velocity,magnitude\n");
    let mut tracks = String::from(
        "frame,time,track_id,status,range,bearing,range_rate,bearing_rate,pos_cov_trace,assigned_detection\n",
    );
    let mut commands =
        String::from("time,mode,obstacle_id,in_cone,v_a_x,v_a_y,cmd_x,cmd_y,cone_half_angle\n");

    for record in &log.frames {
        truth.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            record.frame,
            record.time,
            record.position.x,
            record.position.y,
            record.heading,
            record.velocity.x,
            record.velocity.y,
            record.clearance
        ));
        for d in &record.detections {
            detections.push_str(&format!(
                "{},{},{},{},{},{}\n",
                record.frame, record.time, d.range, d.bearing, d.radial_velocity, d.magnitude
            ));
        }
        for t in &record.tracks {
            tracks.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                record.frame,
                record.time,
                t.id,
                if t.confirmed { "confirmed" } else { "candidate" },
                t.range,
                t.bearing,
                t.range_rate,
                t.bearing_rate,
                t.position_covariance_trace,
                t.assigned_detection
                    .map(|d| d.to_string())
                    .unwrap_or_default()
            ));
        }
        let c = &record.command;
        commands.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            record.time,
            c.mode,
            c.obstacle_id.map(|d| d.to_string()).unwrap_or_default(),
            c.in_cone,
            c.desired.x,
            c.desired.y,
            c.commanded.x,
            c.commanded.y,
            c.cone_half_angle
        ));
    }

    std::fs::write(dir.join(format!("{trial_id}_truth.csv")), truth)?;
    std::fs::write(dir.join(format!("{trial_id}_detections.csv")), detections)?;
    std::fs::write(dir.join(format!("{trial_id}_tracks.csv")), tracks)?;
    std::fs::write(dir.join(format!("{trial_id}_commands.csv")), commands)?;

    let summary = TrialSummary {
        outcome: log.outcome,
        min_clearance: log.min_clearance,
        frames: log.frames.len(),
        seed: log.seed,
    };
    let mut file = std::fs::File::create(dir.join(format!("{trial_id}_summary.json")))?;
    writeln!(file, "{}", serde_json::to_string_pretty(&summary)?)?;
    Ok(())
}
