//! Scenario configuration files.
//!
//! A scenario is a TOML file with optional nested sections (`radar`,
//! `noise`, `detector`, `tracker`, `avoidance`, `world`, `batch`,
//! `sweep`); every field has a documented default. Unknown keys are a
//! hard error so typos cannot silently fall back to defaults.

use nalgebra::{Matrix3, Vector2, Vector3};
use serde::Deserialize;
use thiserror::Error;

use crate::avoidance::{AvoidanceConfig, AvoidanceMode};
use crate::radar_model::{HaltNoiseBurst, NoiseModel, RadarConfig};
use crate::sim::{Obstacle, SimConfig, SweepConfig, WorldConfig};
use crate::tracker::TrackerConfig;
use crate::SPEED_OF_LIGHT;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario file: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse scenario file: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    radar: RadarSection,
    #[serde(default)]
    noise: NoiseSection,
    #[serde(default)]
    detector: DetectorSection,
    #[serde(default)]
    tracker: TrackerSection,
    #[serde(default)]
    avoidance: AvoidanceSection,
    #[serde(default)]
    world: WorldSection,
    #[serde(default)]
    batch: BatchSection,
    #[serde(default)]
    sweep: SweepSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RadarSection {
    /// Hz.
    carrier_frequency: Option<f64>,
    /// Hz.
    bandwidth: Option<f64>,
    /// s.
    chirp_duration: Option<f64>,
    samples_per_chirp: Option<usize>,
    chirps_per_frame: Option<usize>,
    /// m; defaults to half the carrier wavelength.
    antenna_spacing: Option<f64>,
    /// deg.
    fov_half_angle_deg: Option<f64>,
    /// m.
    min_range: Option<f64>,
    /// m.
    max_range: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct NoiseSection {
    iq_noise_std: Option<f64>,
    /// m of range error std per rad off boresight.
    range_error_slope: Option<f64>,
    /// rad of bearing error std per rad off boresight.
    bearing_error_slope: Option<f64>,
    /// Expected spurious detections per frame.
    clutter_rate: Option<f64>,
    halt_burst: Option<HaltBurstSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct HaltBurstSection {
    /// m/s.
    speed_threshold: f64,
    /// s.
    duration: f64,
    multiplier: f64,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct DetectorSection {
    /// Magnitude threshold on the summed range-Doppler map.
    threshold: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrackerSection {
    detection_probability: Option<f64>,
    gate_threshold: Option<f64>,
    birth_threshold: Option<f64>,
    death_threshold: Option<f64>,
    process_noise_intensity: Option<f64>,
    /// m.
    range_noise_std: Option<f64>,
    /// deg.
    bearing_noise_std_deg: Option<f64>,
    /// m/s.
    velocity_noise_std: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct AvoidanceSection {
    enabled: Option<bool>,
    /// "velocity_obstacle" or "side_step".
    mode: Option<String>,
    /// m.
    mav_radius: Option<f64>,
    /// m.
    safety_margin: Option<f64>,
    /// m/s.
    max_speed: Option<f64>,
    /// rad/s.
    max_turn_rate: Option<f64>,
    /// m.
    side_step_distance: Option<f64>,
    /// m; radius assumed for tracked obstacles.
    assumed_obstacle_radius: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct WorldSection {
    /// m.
    arena_min: Option<[f64; 2]>,
    /// m.
    arena_max: Option<[f64; 2]>,
    /// Each entry is `[x, y, radius]` in m.
    obstacles: Option<Vec<[f64; 3]>>,
    /// m.
    start: Option<[f64; 2]>,
    /// m.
    goal: Option<[f64; 2]>,
    /// m/s.
    max_speed: Option<f64>,
    /// m/s^2.
    max_accel: Option<f64>,
    /// s.
    control_lag: Option<f64>,
    /// Hz.
    frame_rate: Option<f64>,
    seed: Option<u64>,
    /// m.
    goal_tolerance: Option<f64>,
    /// s.
    max_duration: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct BatchSection {
    trials: Option<usize>,
    /// m; start poses sit on this ring, goals at the antipodal points.
    ring_radius: Option<f64>,
    /// m.
    ring_center: Option<[f64; 2]>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepSection {
    /// m.
    target_range: Option<f64>,
    /// deg.
    bearing_step_deg: Option<f64>,
    seeds_per_bearing: Option<usize>,
}

impl ScenarioFile {
    pub fn load(path: &std::path::Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let scenario: ScenarioFile = toml::from_str(text)?;
        scenario.validate()?;
        Ok(scenario)
    }

    fn validate(&self) -> Result<(), ScenarioError> {
        if let Some(p) = self.tracker.detection_probability {
            if !(0.0..1.0).contains(&p) || p == 0.0 {
                return Err(ScenarioError::Invalid(format!(
                    "tracker.detection_probability must be in (0, 1), got {p}"
                )));
            }
        }
        let birth = self.tracker.birth_threshold;
        let death = self.tracker.death_threshold;
        if let (Some(b), Some(d)) = (birth, death) {
            if b >= d {
                return Err(ScenarioError::Invalid(format!(
                    "tracker.birth_threshold ({b}) must be below death_threshold ({d})"
                )));
            }
        }
        for field in [
            self.noise.iq_noise_std,
            self.noise.range_error_slope,
            self.noise.bearing_error_slope,
            self.noise.clutter_rate,
        ]
        .into_iter()
        .flatten()
        {
            if field < 0.0 {
                return Err(ScenarioError::Invalid(format!(
                    "noise fields must be non-negative, got {field}"
                )));
            }
        }
        let world = self.world_config()?;
        for obstacle in &world.obstacles {
            let inside = obstacle.center.x >= world.arena_min.x
                && obstacle.center.x <= world.arena_max.x
                && obstacle.center.y >= world.arena_min.y
                && obstacle.center.y <= world.arena_max.y;
            if !inside {
                return Err(ScenarioError::Invalid(format!(
                    "obstacle at ({}, {}) lies outside the arena",
                    obstacle.center.x, obstacle.center.y
                )));
            }
            for point in [world.start, world.goal] {
                if (point - obstacle.center).norm() <= obstacle.radius + world.mav_radius {
                    return Err(ScenarioError::Invalid(
                        "start/goal must be collision-free".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn radar_config(&self) -> RadarConfig {
        let defaults = RadarConfig::default();
        let carrier = self.radar.carrier_frequency.unwrap_or(defaults.carrier_frequency);
        RadarConfig {
            carrier_frequency: carrier,
            bandwidth: self.radar.bandwidth.unwrap_or(defaults.bandwidth),
            chirp_duration: self.radar.chirp_duration.unwrap_or(defaults.chirp_duration),
            samples_per_chirp: self
                .radar
                .samples_per_chirp
                .unwrap_or(defaults.samples_per_chirp),
            chirps_per_frame: self
                .radar
                .chirps_per_frame
                .unwrap_or(defaults.chirps_per_frame),
            antenna_spacing: self
                .radar
                .antenna_spacing
                .unwrap_or(0.5 * SPEED_OF_LIGHT / carrier),
            fov_half_angle: self
                .radar
                .fov_half_angle_deg
                .map(f64::to_radians)
                .unwrap_or(defaults.fov_half_angle),
            min_range: self.radar.min_range.unwrap_or(defaults.min_range),
            max_range: self.radar.max_range.unwrap_or(defaults.max_range),
            noise: self.noise_model(),
        }
    }

    fn noise_model(&self) -> NoiseModel {
        NoiseModel {
            iq_noise_std: self.noise.iq_noise_std.unwrap_or(0.0),
            range_error_slope: self.noise.range_error_slope.unwrap_or(0.0),
            bearing_error_slope: self.noise.bearing_error_slope.unwrap_or(0.0),
            clutter_rate: self.noise.clutter_rate.unwrap_or(0.0),
            halt_noise_burst: self.noise.halt_burst.as_ref().map(|b| HaltNoiseBurst {
                speed_threshold: b.speed_threshold,
                duration: b.duration,
                multiplier: b.multiplier,
            }),
        }
    }

    pub fn tracker_config(&self) -> TrackerConfig {
        let defaults = TrackerConfig::default();
        let range_std = self.tracker.range_noise_std.unwrap_or(0.15);
        let bearing_std = self
            .tracker
            .bearing_noise_std_deg
            .map(f64::to_radians)
            .unwrap_or(0.035);
        let velocity_std = self.tracker.velocity_noise_std.unwrap_or(0.4);
        TrackerConfig {
            detection_probability: self
                .tracker
                .detection_probability
                .unwrap_or(defaults.detection_probability),
            gate_threshold: self.tracker.gate_threshold.unwrap_or(defaults.gate_threshold),
            birth_threshold: self
                .tracker
                .birth_threshold
                .unwrap_or(defaults.birth_threshold),
            death_threshold: self
                .tracker
                .death_threshold
                .unwrap_or(defaults.death_threshold),
            process_noise_intensity: self
                .tracker
                .process_noise_intensity
                .unwrap_or(defaults.process_noise_intensity),
            measurement_noise: Matrix3::from_diagonal(&Vector3::new(
                range_std * range_std,
                bearing_std * bearing_std,
                velocity_std * velocity_std,
            )),
            initial_covariance: defaults.initial_covariance,
        }
    }

    pub fn avoidance_config(&self) -> Result<AvoidanceConfig, ScenarioError> {
        let defaults = AvoidanceConfig::default();
        let mode = match self.avoidance.mode.as_deref() {
            None | Some("velocity_obstacle") => AvoidanceMode::VelocityObstacle,
            Some("side_step") => AvoidanceMode::SideStep,
            Some(other) => {
                return Err(ScenarioError::Invalid(format!(
                    "avoidance.mode must be 'velocity_obstacle' or 'side_step', got {other:?}"
                )))
            }
        };
        Ok(AvoidanceConfig {
            mav_radius: self.avoidance.mav_radius.unwrap_or(defaults.mav_radius),
            safety_margin: self
                .avoidance
                .safety_margin
                .unwrap_or(defaults.safety_margin),
            max_speed: self
                .avoidance
                .max_speed
                .or(self.world.max_speed)
                .unwrap_or(defaults.max_speed),
            max_turn_rate: self
                .avoidance
                .max_turn_rate
                .unwrap_or(defaults.max_turn_rate),
            mode,
            side_step_distance: self
                .avoidance
                .side_step_distance
                .unwrap_or(defaults.side_step_distance),
        })
    }

    fn world_config(&self) -> Result<WorldConfig, ScenarioError> {
        let defaults = WorldConfig::default();
        let vec2 = |a: [f64; 2]| Vector2::new(a[0], a[1]);
        Ok(WorldConfig {
            arena_min: self.world.arena_min.map(vec2).unwrap_or(defaults.arena_min),
            arena_max: self.world.arena_max.map(vec2).unwrap_or(defaults.arena_max),
            obstacles: self
                .world
                .obstacles
                .as_deref()
                .unwrap_or(&[])
                .iter()
                .map(|&[x, y, r]| Obstacle::static_pole(x, y, r))
                .collect(),
            start: self.world.start.map(vec2).unwrap_or(defaults.start),
            goal: self.world.goal.map(vec2).unwrap_or(defaults.goal),
            mav_radius: self.avoidance.mav_radius.unwrap_or(defaults.mav_radius),
            max_speed: self.world.max_speed.unwrap_or(defaults.max_speed),
            max_accel: self.world.max_accel.unwrap_or(defaults.max_accel),
            control_lag: self.world.control_lag.unwrap_or(defaults.control_lag),
            frame_rate: self.world.frame_rate.unwrap_or(defaults.frame_rate),
            seed: self.world.seed.unwrap_or(defaults.seed),
            goal_tolerance: self
                .world
                .goal_tolerance
                .unwrap_or(defaults.goal_tolerance),
            max_duration: self.world.max_duration.unwrap_or(defaults.max_duration),
        })
    }

    pub fn sim_config(&self) -> Result<SimConfig, ScenarioError> {
        Ok(SimConfig {
            radar: self.radar_config(),
            detection_threshold: self.detector.threshold.unwrap_or(600.0),
            tracker: self.tracker_config(),
            avoidance: self.avoidance_config()?,
            avoidance_enabled: self.avoidance.enabled.unwrap_or(true),
            assumed_obstacle_radius: self.avoidance.assumed_obstacle_radius.unwrap_or(0.25),
            world: self.world_config()?,
        })
    }

    pub fn sweep_config(&self) -> SweepConfig {
        let defaults = SweepConfig::default();
        SweepConfig {
            radar: self.radar_config(),
            detection_threshold: self.detector.threshold.unwrap_or(600.0),
            target_range: self.sweep.target_range.unwrap_or(defaults.target_range),
            bearing_step_deg: self
                .sweep
                .bearing_step_deg
                .unwrap_or(defaults.bearing_step_deg),
            seeds_per_bearing: self
                .sweep
                .seeds_per_bearing
                .unwrap_or(defaults.seeds_per_bearing),
            base_seed: self.world.seed.unwrap_or(0),
        }
    }

    /// Default number of batch trials (CLI `--trials` overrides it).
    pub fn batch_trials(&self) -> usize {
        self.batch.trials.unwrap_or(26)
    }

    /// Builds `n` trial configs with start poses evenly spaced on the batch
    /// ring and goals at the antipodal points. Trial `i` gets seed
    /// `base_seed + i`.
    pub fn batch_configs(
        &self,
        n: usize,
        seed_override: Option<u64>,
    ) -> Result<Vec<SimConfig>, ScenarioError> {
        let base = self.sim_config()?;
        let radius = self.batch.ring_radius.unwrap_or(5.0);
        let center = self
            .batch
            .ring_center
            .map(|a| Vector2::new(a[0], a[1]))
            .unwrap_or_else(Vector2::zeros);
        let base_seed = seed_override.unwrap_or(base.world.seed);
        Ok((0..n)
            .map(|i| {
                let angle = 2.0 * std::f64::consts::PI * i as f64 / n.max(1) as f64;
                let offset = Vector2::new(angle.cos(), angle.sin()) * radius;
                let mut config = base.clone();
                config.world.start = center + offset;
                config.world.goal = center - offset;
                config.world.seed = base_seed + i as u64;
                config
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_scenario_uses_defaults() {
        let scenario = ScenarioFile::parse("").unwrap();
        let sim = scenario.sim_config().unwrap();
        assert_eq!(sim.radar.samples_per_chirp, 256);
        assert_eq!(sim.world.frame_rate, 10.0);
        assert!(sim.avoidance_enabled);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = ScenarioFile::parse("[radar]\nbandwith = 1e8\n").unwrap_err();
        assert!(matches!(err, ScenarioError::Parse(_)));
        let err = ScenarioFile::parse("[radarr]\n").unwrap_err();
        assert!(matches!(err, ScenarioError::Parse(_)));
    }

    #[test]
    fn thresholds_must_be_ordered() {
        let text = "[tracker]\nbirth_threshold = 0.5\ndeath_threshold = 0.1\n";
        assert!(matches!(
            ScenarioFile::parse(text),
            Err(ScenarioError::Invalid(_))
        ));
    }

    #[test]
    fn obstacles_must_sit_inside_the_arena() {
        let text = "[world]\nobstacles = [[99.0, 0.0, 0.25]]\n";
        assert!(matches!(
            ScenarioFile::parse(text),
            Err(ScenarioError::Invalid(_))
        ));
    }

    #[test]
    fn bad_avoidance_mode_is_rejected() {
        let scenario = ScenarioFile::parse("[avoidance]\nmode = \"teleport\"\n").unwrap();
        assert!(scenario.sim_config().is_err());
    }

    #[test]
    fn ring_poses_are_antipodal() {
        let scenario = ScenarioFile::parse("[batch]\nring_radius = 4.0\n").unwrap();
        let configs = scenario.batch_configs(8, None).unwrap();
        assert_eq!(configs.len(), 8);
        for config in &configs {
            assert!(((config.world.start + config.world.goal).norm()) < 1e-9);
            assert!((config.world.start.norm() - 4.0).abs() < 1e-9);
        }
        let seeds: Vec<u64> = configs.iter().map(|c| c.world.seed).collect();
        assert_eq!(seeds, (0..8).collect::<Vec<u64>>());
    }
}
