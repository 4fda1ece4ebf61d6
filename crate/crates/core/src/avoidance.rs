//! Velocity-obstacle avoidance.
//!
//! The obstacle is enlarged by the vehicle radius (plus a safety margin)
//! so the vehicle reduces to a point; the set of relative velocities that
//! lead to collision is then a cone in velocity space with its apex at the
//! origin, axis toward the obstacle and half-angle `arcsin(r_c / |p|)`.
//! Avoidance projects the relative velocity onto the nearer cone edge.
//! A simple fixed-distance side-step manoeuvre is provided as an
//! alternative mode.

use nalgebra::Vector2;
use thiserror::Error;

use crate::geometry::{angle_between, rotate, wrap_angle};

#[derive(Debug, Error, PartialEq)]
pub enum AvoidanceError {
    #[error("already in collision: |p| = {distance} <= combined radius {combined_radius}")]
    AlreadyInCollision { distance: f64, combined_radius: f64 },
}

/// A tracked obstacle expressed relative to the ego vehicle (robot A).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObstacleEstimate {
    /// Position of the obstacle B relative to A, m.
    pub relative_position: Vector2<f64>,
    /// Relative velocity `V_AB = V_A - V_B`, m/s.
    pub relative_velocity: Vector2<f64>,
    /// Absolute obstacle velocity `V_B`, m/s.
    pub obstacle_velocity: Vector2<f64>,
    /// Obstacle radius, m.
    pub radius: f64,
}

/// Collision cone in relative-velocity space, apex at the origin.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CollisionCone {
    /// Unit vector toward the obstacle.
    pub axis: Vector2<f64>,
    /// Half-angle `arcsin(r_c / |p|)`, rad.
    pub half_angle: f64,
}

impl CollisionCone {
    /// Edge direction: `+1` for the left edge, `-1` for the right edge.
    pub fn edge(&self, side: f64) -> Vector2<f64> {
        rotate(self.axis, side * self.half_angle)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AvoidanceMode {
    VelocityObstacle,
    SideStep,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AvoidanceConfig {
    /// Ego vehicle radius r_A, m.
    pub mav_radius: f64,
    /// Extra clearance added to the combined radius, m.
    pub safety_margin: f64,
    /// Speed limit on commanded velocities, m/s.
    pub max_speed: f64,
    /// Heading-change rate limit, rad/s.
    pub max_turn_rate: f64,
    pub mode: AvoidanceMode,
    /// Lateral displacement of the side-step manoeuvre, m.
    pub side_step_distance: f64,
}

impl Default for AvoidanceConfig {
    fn default() -> Self {
        AvoidanceConfig {
            mav_radius: 0.2,
            safety_margin: 0.2,
            max_speed: 1.0,
            max_turn_rate: 2.0,
            mode: AvoidanceMode::VelocityObstacle,
            side_step_distance: 1.0,
        }
    }
}

impl AvoidanceConfig {
    /// Combined radius r_c = r_A + r_B + safety margin.
    pub fn combined_radius(&self, obstacle_radius: f64) -> f64 {
        self.mav_radius + obstacle_radius + self.safety_margin
    }
}

/// Velocity command produced by [`avoid`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AvoidanceCommand {
    pub velocity: Vector2<f64>,
    /// True when speed/turn-rate clipping prevented leaving the cone; the
    /// returned command is then the reachable minimum-penetration one.
    pub constrained: bool,
}

/// Builds the collision cone for an obstacle at relative position `p` with
/// combined radius `r_c`. Fails when the combined discs already overlap.
pub fn collision_cone(p: Vector2<f64>, r_c: f64) -> Result<CollisionCone, AvoidanceError> {
    let distance = p.norm();
    if distance <= r_c {
        return Err(AvoidanceError::AlreadyInCollision {
            distance,
            combined_radius: r_c,
        });
    }
    Ok(CollisionCone {
        axis: p / distance,
        half_angle: (r_c / distance).asin(),
    })
}

/// True iff the relative velocity leads to a collision: nonzero and
/// strictly inside the cone (the boundary counts as safe).
pub fn in_cone(relative_velocity: Vector2<f64>, cone: &CollisionCone) -> bool {
    let speed = relative_velocity.norm();
    if speed == 0.0 {
        return false;
    }
    angle_between(cone.axis, relative_velocity).abs() < cone.half_angle
}

/// Picks the obstacle with the smallest relative distance (first wins ties).
pub fn select_nearest(obstacles: &[ObstacleEstimate]) -> Option<&ObstacleEstimate> {
    obstacles.iter().min_by(|a, b| {
        a.relative_position
            .norm()
            .partial_cmp(&b.relative_position.norm())
            .unwrap()
    })
}

/// Computes an avoidance velocity command.
///
/// If the relative velocity is outside the cone the current velocity is
/// returned unchanged. Otherwise the relative velocity is projected onto
/// the nearer cone edge (ties broken toward the right edge), converted
/// back to an absolute velocity by adding `V_B`, and clipped to the speed
/// and turn-rate limits.
pub fn avoid(
    ego_velocity: Vector2<f64>,
    obstacle: &ObstacleEstimate,
    config: &AvoidanceConfig,
    dt: f64,
) -> Result<AvoidanceCommand, AvoidanceError> {
    let r_c = config.combined_radius(obstacle.radius);
    let cone = collision_cone(obstacle.relative_position, r_c)?;
    let side = nearer_side(&cone, obstacle.relative_velocity);
    avoid_onto_side(ego_velocity, obstacle, config, dt, side)
}

/// Nearer cone edge for a relative velocity: `+1` left, `-1` right; ties
/// (velocity on the axis) go right.
pub fn nearer_side(cone: &CollisionCone, relative_velocity: Vector2<f64>) -> f64 {
    let offset = angle_between(cone.axis, relative_velocity);
    if offset > 1e-12 {
        1.0
    } else {
        -1.0
    }
}

/// [`avoid`] with the projection edge forced to one side (`+1` left, `-1`
/// right). Lets a caller keep a committed side across frames instead of
/// chattering between edges as the geometry evolves: the velocity is
/// returned unchanged only when the relative velocity already clears the
/// cone on the committed side; anything else — inside the cone or beyond
/// the opposite edge — is projected onto the committed edge.
pub fn avoid_onto_side(
    ego_velocity: Vector2<f64>,
    obstacle: &ObstacleEstimate,
    config: &AvoidanceConfig,
    dt: f64,
    side: f64,
) -> Result<AvoidanceCommand, AvoidanceError> {
    let r_c = config.combined_radius(obstacle.radius);
    let cone = collision_cone(obstacle.relative_position, r_c)?;
    let v_rel = obstacle.relative_velocity;
    let offset = angle_between(cone.axis, v_rel);
    let clear_on_side = if side > 0.0 {
        offset >= cone.half_angle
    } else {
        offset <= -cone.half_angle
    };
    if v_rel.norm() == 0.0 || clear_on_side {
        return Ok(AvoidanceCommand {
            velocity: ego_velocity,
            constrained: false,
        });
    }

    let edge = cone.edge(side);
    let projected = edge * v_rel.dot(&edge).max(0.0);
    let mut velocity = projected + obstacle.obstacle_velocity;

    // Speed limit.
    let speed = velocity.norm();
    if speed > config.max_speed {
        velocity *= config.max_speed / speed;
    }
    // Turn-rate limit relative to the current velocity direction.
    let ego_speed = ego_velocity.norm();
    if ego_speed > 1e-9 && velocity.norm() > 1e-9 {
        let turn = angle_between(ego_velocity, velocity);
        let max_turn = config.max_turn_rate * dt;
        if turn.abs() > max_turn {
            let direction = rotate(ego_velocity / ego_speed, turn.signum() * max_turn);
            velocity = direction * velocity.norm();
        }
    }
    let constrained = in_cone(velocity - obstacle.obstacle_velocity, &cone);
    Ok(AvoidanceCommand {
        velocity,
        constrained,
    })
}

/// Side-step waypoint offset in the body frame (x forward, y left).
///
/// When a collision is predicted, steps `side_step_distance` to the side
/// away from the obstacle's bearing (obstacle left or dead ahead -> step
/// right). Returns zero when no collision is predicted.
pub fn side_step(
    obstacle: &ObstacleEstimate,
    config: &AvoidanceConfig,
) -> Result<Vector2<f64>, AvoidanceError> {
    let r_c = config.combined_radius(obstacle.radius);
    let cone = collision_cone(obstacle.relative_position, r_c)?;
    if !in_cone(obstacle.relative_velocity, &cone) {
        return Ok(Vector2::zeros());
    }
    let bearing = wrap_angle(
        obstacle
            .relative_position
            .y
            .atan2(obstacle.relative_position.x),
    );
    let sign = if bearing >= 0.0 { -1.0 } else { 1.0 };
    Ok(Vector2::new(0.0, sign * config.side_step_distance))
}

/// Forward-integration collision oracle: does the relative position
/// `p - v_rel * t` come within `r_c` of the origin for some `t >= 0`?
///
/// Independent of the cone construction; used to validate [`in_cone`].
pub fn collision_by_integration(p: Vector2<f64>, v_rel: Vector2<f64>, r_c: f64) -> bool {
    let speed2 = v_rel.norm_squared();
    if speed2 == 0.0 {
        return p.norm() < r_c;
    }
    let t_star = (p.dot(&v_rel) / speed2).max(0.0);
    (p - v_rel * t_star).norm() < r_c
}
