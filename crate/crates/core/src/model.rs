//! Reference frames, kinematics, and the shared vehicle/state types.
//!
//! Frames:
//! * ground: x forward, y right, z down; the water surface is `z = 0`, so
//!   altitude is `-z`.
//! * body: origin at the centre of gravity, x toward the head, z down
//!   through the belly, y completing the right-handed set.
//! * wind: x along the relative airflow velocity.
//!
//! Attitude is carried as Z-Y-X Euler angles `(roll, pitch, yaw)`.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Half-width of the excluded band around pitch = +/-90 deg.
pub const GIMBAL_GUARD: f64 = 1e-3;

/// Below this speed the airflow angles are undefined and fluid loads vanish.
pub const MIN_FLOW_SPEED: f64 = 1e-6;

/// Kinematic state of the vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BodyState {
    /// CG position in the ground frame, m.
    pub position: Vec3,
    /// Velocity `(u, v, w)` in body axes, m/s.
    pub velocity: Vec3,
    /// `(roll, pitch, yaw)`, rad.
    pub euler: Vec3,
    /// Angular rate `(p, q, r)` in body axes, rad/s.
    pub omega: Vec3,
    pub time: f64,
}

impl BodyState {
    pub fn at_rest(position: Vec3) -> Self {
        Self {
            position,
            velocity: Vec3::zeros(),
            euler: Vec3::zeros(),
            omega: Vec3::zeros(),
            time: 0.0,
        }
    }

    pub fn altitude(&self) -> f64 {
        -self.position.z
    }

    pub fn roll(&self) -> f64 {
        self.euler.x
    }

    pub fn pitch(&self) -> f64 {
        self.euler.y
    }

    pub fn yaw(&self) -> f64 {
        self.euler.z
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().all(|v| v.is_finite())
            && self.velocity.iter().all(|v| v.is_finite())
            && self.euler.iter().all(|v| v.is_finite())
            && self.omega.iter().all(|v| v.is_finite())
            && self.time.is_finite()
    }

    /// Velocity expressed in the ground frame.
    pub fn ground_velocity(&self) -> Vec3 {
        ground_to_body_unchecked(&self.euler).transpose() * self.velocity
    }

    /// Rate of climb, m/s (positive up).
    pub fn climb_rate(&self) -> f64 {
        -self.ground_velocity().z
    }

    /// Returns the same attitude with roll and yaw in (-pi, pi] and pitch in
    /// [-pi/2, pi/2].
    pub fn normalized(mut self) -> Self {
        self.euler = normalize_euler(&self.euler);
        self
    }
}

/// Wraps an angle into (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    if a > -PI && a <= PI {
        return a;
    }
    let r = (a + PI).rem_euclid(TAU) - PI;
    if r <= -PI {
        r + TAU
    } else {
        r
    }
}

pub fn normalize_euler(euler: &Vec3) -> Vec3 {
    let (mut phi, mut theta, mut psi) = (euler.x, wrap_angle(euler.y), euler.z);
    if theta > FRAC_PI_2 {
        theta = PI - theta;
        phi += PI;
        psi += PI;
    } else if theta < -FRAC_PI_2 {
        theta = -PI - theta;
        phi += PI;
        psi += PI;
    }
    Vec3::new(wrap_angle(phi), theta, wrap_angle(psi))
}

/// Physical and geometric parameters of the robot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotParams {
    /// kg
    pub mass: f64,
    /// Nose-to-tail length, m.
    pub body_length: f64,
    /// Pectoral fin arm (carbon tube) length `l`, m.
    pub wing_arm_length: f64,
    /// Width with wings folded `L`, m.
    pub folded_width: f64,
    /// Cylinder radius used for the submerged-volume geometry, m.
    pub body_radius: f64,
    /// Distance from the head to the CG along the body axis, m.
    pub cg_from_head: f64,
    /// Number of pectoral fins sharing the fan geometry.
    pub pectoral_fin_count: u32,
    /// Total pelvic fin area `S2`, m^2.
    pub pelvic_fin_area: f64,
    /// Mean pelvic fin width `b_p`, m.
    pub pelvic_fin_mean_width: f64,
    /// Fixed CG-to-centre-of-buoyancy arm along the body axis. When absent the
    /// arm is taken from the wetted geometry each evaluation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub buoyancy_arm: Option<f64>,
    /// Thrust line offset from the CG in body axes, m.
    pub thrust_arm: [f64; 3],
    /// W
    pub motor_power: f64,
    /// Wingspan as listed for the built prototype, m. Informational only; the
    /// simulation uses the fan geometry.
    pub listed_wing_span: f64,
    /// Body-axis inertia tensor, kg m^2. Falls back to the composite
    /// cylinder-plus-rods estimate when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inertia: Option<[[f64; 3]; 3]>,
}

impl Default for RobotParams {
    fn default() -> Self {
        let l = 0.170;
        let s1_max = 0.5 * l * l * FRAC_PI_2;
        Self {
            mass: 0.353,
            body_length: 0.3361,
            wing_arm_length: l,
            folded_width: 0.1354,
            body_radius: 0.020,
            cg_from_head: 0.13,
            pectoral_fin_count: 2,
            pelvic_fin_area: 0.1 * s1_max,
            pelvic_fin_mean_width: 0.05,
            buoyancy_arm: None,
            thrust_arm: [0.0; 3],
            motor_power: 300.0,
            listed_wing_span: 0.455,
            inertia: None,
        }
    }
}

/// Fraction of the mass carried by the body cylinder in the composite
/// inertia estimate; the remainder sits in the two wing arms.
pub const BODY_MASS_FRACTION: f64 = 0.8;

impl RobotParams {
    pub fn inertia(&self) -> Mat3 {
        match self.inertia {
            Some(rows) => Mat3::from_fn(|i, j| rows[i][j]),
            None => composite_inertia(self),
        }
    }

    pub fn thrust_arm(&self) -> Vec3 {
        Vec3::from(self.thrust_arm)
    }

    /// Body length behind the CG.
    pub fn tail_length(&self) -> f64 {
        self.body_length - self.cg_from_head
    }

    pub fn hull_volume(&self) -> f64 {
        PI * self.body_radius * self.body_radius * self.body_length
    }

    pub fn validate(&self) -> Result<()> {
        positive("robot.mass", self.mass)?;
        positive("robot.body_length", self.body_length)?;
        positive("robot.wing_arm_length", self.wing_arm_length)?;
        positive("robot.folded_width", self.folded_width)?;
        positive("robot.body_radius", self.body_radius)?;
        positive("robot.cg_from_head", self.cg_from_head)?;
        positive("robot.pelvic_fin_mean_width", self.pelvic_fin_mean_width)?;
        if self.cg_from_head >= self.body_length {
            return Err(Error::invalid(
                "robot.cg_from_head",
                "CG must lie inside the body",
            ));
        }
        if !(self.pelvic_fin_area >= 0.0 && self.pelvic_fin_area.is_finite()) {
            return Err(Error::invalid("robot.pelvic_fin_area", "must be >= 0"));
        }
        if !(self.motor_power >= 0.0 && self.motor_power.is_finite()) {
            return Err(Error::invalid("robot.motor_power", "must be >= 0"));
        }
        if self.thrust_arm.iter().any(|v| !v.is_finite())
            || self.buoyancy_arm.is_some_and(|a| !a.is_finite())
        {
            return Err(Error::invalid("robot", "arms must be finite"));
        }
        let inertia = self.inertia();
        if inertia.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("robot.inertia", "non-finite entry"));
        }
        let asym = (inertia - inertia.transpose()).abs().max();
        if asym > 1e-12 * inertia.abs().max() {
            return Err(Error::invalid("robot.inertia", "must be symmetric"));
        }
        if inertia.cholesky().is_none() {
            return Err(Error::invalid("robot.inertia", "must be positive definite"));
        }
        Ok(())
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must be > 0, got {v}")))
    }
}

/// Inertia of a uniform cylinder (body) plus two slender lateral rods (wing
/// arms, rooted at the folded half-width, lying in the CG plane), about the CG.
pub fn composite_inertia(p: &RobotParams) -> Mat3 {
    let m_body = BODY_MASS_FRACTION * p.mass;
    let m_rod = 0.5 * (1.0 - BODY_MASS_FRACTION) * p.mass;
    let (r, len) = (p.body_radius, p.body_length);

    // cylinder centre sits behind the CG
    let offset = p.cg_from_head - 0.5 * len;
    let ixx_body = 0.5 * m_body * r * r;
    let itrans_body = m_body * (3.0 * r * r + len * len) / 12.0 + m_body * offset * offset;

    let (a, b) = (0.5 * p.folded_width, 0.5 * p.folded_width + p.wing_arm_length);
    let rod = m_rod * (a * a + a * b + b * b) / 3.0;

    Mat3::from_diagonal(&Vec3::new(
        ixx_body + 2.0 * rod,
        itrans_body,
        itrans_body + 2.0 * rod,
    ))
}

/// Fluid and gravity constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Environment {
    /// kg/m^3
    pub rho_air: f64,
    /// kg/m^3
    pub rho_water: f64,
    /// m/s^2
    pub g: f64,
    pub ground_effect_enabled: bool,
}

impl Default for Environment {
    fn default() -> Self {
        Self {
            rho_air: 1.225,
            rho_water: 1000.0,
            g: 9.81,
            ground_effect_enabled: false,
        }
    }
}

impl Environment {
    pub fn validate(&self) -> Result<()> {
        positive("environment.rho_air", self.rho_air)?;
        positive("environment.rho_water", self.rho_water)?;
        positive("environment.g", self.g)
    }
}

/// Direction cosine matrix taking ground-frame components to body-frame
/// components (Z-Y-X sequence). Its transpose maps body to ground.
pub fn ground_to_body(euler: &Vec3) -> Result<Mat3> {
    if euler.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("euler angles"));
    }
    Ok(ground_to_body_unchecked(euler))
}

pub(crate) fn ground_to_body_unchecked(euler: &Vec3) -> Mat3 {
    let (sphi, cphi) = euler.x.sin_cos();
    let (sth, cth) = euler.y.sin_cos();
    let (spsi, cpsi) = euler.z.sin_cos();
    Mat3::new(
        cth * cpsi,
        cth * spsi,
        -sth,
        sphi * sth * cpsi - cphi * spsi,
        sphi * sth * spsi + cphi * cpsi,
        sphi * cth,
        cphi * sth * cpsi + sphi * spsi,
        cphi * sth * spsi - sphi * cpsi,
        cphi * cth,
    )
}

/// Rotation taking wind-frame components to body-frame components.
pub fn wind_to_body(alpha: f64, beta: f64) -> Result<Mat3> {
    if !alpha.is_finite() || !beta.is_finite() {
        return Err(Error::NonFinite("airflow angles"));
    }
    if alpha.abs() >= FRAC_PI_2 {
        return Err(Error::OutOfRange {
            what: "alpha",
            value: alpha,
            range: "(-pi/2, pi/2)",
        });
    }
    if beta.abs() >= FRAC_PI_2 {
        return Err(Error::OutOfRange {
            what: "beta",
            value: beta,
            range: "(-pi/2, pi/2)",
        });
    }
    Ok(wind_to_body_unchecked(alpha, beta))
}

/// Same matrix without the range checks; valid for any flow direction.
pub(crate) fn wind_to_body_unchecked(alpha: f64, beta: f64) -> Mat3 {
    let (sa, ca) = alpha.sin_cos();
    let (sb, cb) = beta.sin_cos();
    Mat3::new(
        ca * cb,
        -ca * sb,
        -sa,
        sb,
        cb,
        0.0,
        sa * cb,
        -sa * sb,
        ca,
    )
}

/// Euler angle rates from body angular rates.
pub fn euler_rates(euler: &Vec3, omega: &Vec3) -> Result<Vec3> {
    let theta = euler.y;
    if !theta.is_finite() || omega.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("euler rate inputs"));
    }
    if theta.abs() >= FRAC_PI_2 - GIMBAL_GUARD {
        return Err(Error::GimbalLock { theta });
    }
    let (sphi, cphi) = euler.x.sin_cos();
    let (sth, cth) = theta.sin_cos();
    let (p, q, r) = (omega.x, omega.y, omega.z);
    let lateral = q * sphi + r * cphi;
    Ok(Vec3::new(
        p + lateral * sth / cth,
        q * cphi - r * sphi,
        lateral / cth,
    ))
}

/// Angle of attack, side-slip, and speed of a body-frame velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Airflow {
    pub alpha: f64,
    pub beta: f64,
    pub speed: f64,
}

impl Airflow {
    pub fn velocity(&self) -> Vec3 {
        let (sa, ca) = self.alpha.sin_cos();
        let (sb, cb) = self.beta.sin_cos();
        self.speed * Vec3::new(ca * cb, sb, sa * cb)
    }

    pub fn wind_to_body(&self) -> Mat3 {
        wind_to_body_unchecked(self.alpha, self.beta)
    }
}

pub fn airflow_angles(velocity: &Vec3) -> Result<Airflow> {
    let speed = velocity.norm();
    if !speed.is_finite() {
        return Err(Error::NonFinite("velocity"));
    }
    if speed <= MIN_FLOW_SPEED {
        return Err(Error::UndefinedAirflow { speed });
    }
    Ok(Airflow {
        alpha: velocity.z.atan2(velocity.x),
        beta: (velocity.y / speed).clamp(-1.0, 1.0).asin(),
        speed,
    })
}
