//! Loads acting while the hull is wholly or partly in the water: buoyancy,
//! hydrodynamic drag and lift, thrust, and their combination with gravity
//! and the in-air terms.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::aero::{aero_force_moment, AeroLoads, AeroTable, GroundEffectModel, PelvicFin, WingConfig};
use crate::error::{Error, Result};
use crate::model::{
    airflow_angles, ground_to_body_unchecked, BodyState, Environment, RobotParams, Vec3,
};

/// Speed floor for the power-limited thrust law, m/s.
pub const V_FLOOR: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Phase {
    Submerged,
    Transition,
    Airborne,
}

impl Phase {
    pub fn from_fraction(fraction: f64) -> Self {
        if fraction >= 1.0 {
            Phase::Submerged
        } else if fraction <= 0.0 {
            Phase::Airborne
        } else {
            Phase::Transition
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Submerged => "SUBMERGED",
            Phase::Transition => "TRANSITION",
            Phase::Airborne => "AIRBORNE",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Phase {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "SUBMERGED" => Ok(Phase::Submerged),
            "TRANSITION" => Ok(Phase::Transition),
            "AIRBORNE" => Ok(Phase::Airborne),
            _ => Err(Error::Unknown { kind: "phase", name: s.into() }),
        }
    }
}

/// Wetted geometry of the hull.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Submersion {
    /// m^3
    pub volume: f64,
    /// volume / hull volume, in [0, 1]
    pub fraction: f64,
    /// Signed body-axis offset of the wetted centroid from the CG, positive
    /// toward the head, m.
    pub centroid: f64,
}

impl Submersion {
    pub fn phase(&self) -> Phase {
        Phase::from_fraction(self.fraction)
    }
}

const GL2: [f64; 2] = [-0.577_350_269_189_625_8, 0.577_350_269_189_625_8];

/// Wetted volume of the hull modelled as a cylinder of radius R along body x.
///
/// Each cross-section at body-axis station `s` is wet in proportion
/// `clamp((d + R) / 2R, 0, 1)` of its depth `d` below the surface, which is
/// linear in `s` between the stations where `d = +/-R`. The integrals of the
/// wet proportion and its first moment are therefore exact with two-point
/// Gauss-Legendre on each linear piece.
pub fn submersion(state: &BodyState, params: &RobotParams) -> Submersion {
    let r = params.body_radius;
    let (s_min, s_max) = (-params.tail_length(), params.cg_from_head);
    let z = state.position.z;
    // body x-axis component along ground z
    let slope = ground_to_body_unchecked(&state.euler)[(0, 2)];
    let wet = |s: f64| ((z + s * slope + r) / (2.0 * r)).clamp(0.0, 1.0);

    let mut cuts = vec![s_min, s_max];
    if slope != 0.0 {
        for d in [-r, r] {
            let s = (d - z) / slope;
            if s > s_min && s < s_max {
                cuts.push(s);
            }
        }
    }
    cuts.sort_by(f64::total_cmp);

    let (mut zeroth, mut first) = (0.0, 0.0);
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        for x in GL2 {
            let s = mid + half * x;
            let g = wet(s);
            zeroth += half * g;
            first += half * s * g;
        }
    }

    let fraction = (zeroth / params.body_length).clamp(0.0, 1.0);
    // snap quadrature round-off at the fully wet and fully dry ends
    let fraction = if fraction > 1.0 - 1e-14 {
        1.0
    } else if fraction < 1e-14 {
        0.0
    } else {
        fraction
    };
    Submersion {
        volume: fraction * params.hull_volume(),
        fraction,
        centroid: if zeroth > 0.0 { first / zeroth } else { 0.0 },
    }
}

pub fn submerged_volume(state: &BodyState, params: &RobotParams) -> f64 {
    submersion(state, params).volume
}

/// Buoyancy force and moment in body axes.
///
/// The force is `rho_w g V` straight up in the ground frame and acts at the
/// wetted centroid, or at `params.buoyancy_arm` when one is configured.
pub fn buoyancy_force_moment(
    state: &BodyState,
    params: &RobotParams,
    env: &Environment,
) -> (Vec3, Vec3) {
    let sub = submersion(state, params);
    buoyancy_from(&sub, state, params, env)
}

fn buoyancy_from(
    sub: &Submersion,
    state: &BodyState,
    params: &RobotParams,
    env: &Environment,
) -> (Vec3, Vec3) {
    if sub.volume == 0.0 {
        return (Vec3::zeros(), Vec3::zeros());
    }
    let up = Vec3::new(0.0, 0.0, -env.rho_water * env.g * sub.volume);
    let force = ground_to_body_unchecked(&state.euler) * up;
    let arm = params.buoyancy_arm.unwrap_or(sub.centroid);
    let moment = Vec3::new(arm, 0.0, 0.0).cross(&force);
    (force, moment)
}

/// A coefficient that is either constant or tabulated against angle of attack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Curve {
    Constant(f64),
    /// `[alpha_deg, value]` pairs, strictly increasing in alpha.
    Table(Vec<[f64; 2]>),
}

impl Curve {
    pub fn eval(&self, alpha: f64) -> f64 {
        match self {
            Curve::Constant(c) => *c,
            Curve::Table(pts) => {
                let a = alpha.to_degrees();
                let (first, last) = (pts[0], pts[pts.len() - 1]);
                if a <= first[0] {
                    return first[1];
                }
                if a >= last[0] {
                    return last[1];
                }
                let hi = pts.partition_point(|p| p[0] <= a);
                let (p0, p1) = (pts[hi - 1], pts[hi]);
                p0[1] + (a - p0[0]) / (p1[0] - p0[0]) * (p1[1] - p0[1])
            }
        }
    }

    fn values(&self) -> Vec<f64> {
        match self {
            Curve::Constant(c) => vec![*c],
            Curve::Table(pts) => pts.iter().map(|p| p[1]).collect(),
        }
    }

    fn validate(&self, field: &str) -> Result<()> {
        if let Curve::Table(pts) = self {
            if pts.is_empty() {
                return Err(Error::invalid(field, "table is empty"));
            }
            if pts.windows(2).any(|w| w[1][0] <= w[0][0]) {
                return Err(Error::invalid(field, "alpha must be strictly increasing"));
            }
        }
        if self.values().iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(field, "non-finite value"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HydroCoeffs {
    pub lift_coeff: Curve,
    pub drag_coeff: Curve,
    /// Reference area, m^2.
    pub area: f64,
    /// Moment arm, m.
    pub moment_arm: f64,
    pub roll_coeff: f64,
    pub yaw_coeff: f64,
}

impl Default for HydroCoeffs {
    fn default() -> Self {
        let r = RobotParams::default().body_radius;
        Self {
            lift_coeff: Curve::Constant(0.0),
            drag_coeff: Curve::Constant(0.8),
            area: std::f64::consts::PI * r * r,
            moment_arm: 0.168,
            roll_coeff: 0.0,
            yaw_coeff: 0.0,
        }
    }
}

impl HydroCoeffs {
    pub fn validate(&self) -> Result<()> {
        self.lift_coeff.validate("hydro.lift_coeff")?;
        self.drag_coeff.validate("hydro.drag_coeff")?;
        if self.drag_coeff.values().iter().any(|&v| v <= 0.0) {
            return Err(Error::invalid("hydro.drag_coeff", "must be > 0"));
        }
        if !(self.area > 0.0 && self.area.is_finite()) {
            return Err(Error::invalid("hydro.area", "must be > 0"));
        }
        if ![self.moment_arm, self.roll_coeff, self.yaw_coeff].iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("hydro", "non-finite moment parameter"));
        }
        Ok(())
    }
}

/// Hydrodynamic drag and lift on the wetted hull, scaled by the wetted
/// fraction. Zero when dry or when the flow speed is degenerate.
pub fn hydro_force(state: &BodyState, fraction: f64, coeffs: &HydroCoeffs, env: &Environment) -> Vec3 {
    if fraction <= 0.0 {
        return Vec3::zeros();
    }
    let Ok(flow) = airflow_angles(&state.velocity) else {
        return Vec3::zeros();
    };
    let qa = 0.5 * env.rho_water * flow.speed * flow.speed * coeffs.area * fraction;
    let drag = qa * coeffs.drag_coeff.eval(flow.alpha);
    let lift = qa * coeffs.lift_coeff.eval(flow.alpha);
    flow.wind_to_body() * Vec3::new(-drag, 0.0, -lift)
}

pub fn hydro_moment(state: &BodyState, fraction: f64, coeffs: &HydroCoeffs, env: &Environment) -> Vec3 {
    if fraction <= 0.0 {
        return Vec3::zeros();
    }
    let v2 = state.velocity.norm_squared();
    let q = 0.5 * env.rho_water * v2 * coeffs.area * coeffs.moment_arm * fraction;
    Vec3::new(q * coeffs.roll_coeff, 0.0, q * coeffs.yaw_coeff)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ThrustMode {
    Constant {
        /// N
        thrust: f64,
    },
    PowerLimited {
        /// W
        power: f64,
        efficiency: f64,
        /// N
        max_thrust: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThrustModel {
    pub mode: ThrustMode,
    pub active_phases: Vec<Phase>,
    /// Cut the motor for good once the hull has fully cleared the water.
    pub cut_after_exit: bool,
}

impl Default for ThrustModel {
    fn default() -> Self {
        Self {
            mode: ThrustMode::PowerLimited {
                power: 300.0,
                efficiency: 0.5,
                max_thrust: 15.0,
            },
            active_phases: vec![Phase::Submerged, Phase::Transition],
            cut_after_exit: true,
        }
    }
}

impl ThrustModel {
    pub fn off() -> Self {
        Self {
            mode: ThrustMode::Constant { thrust: 0.0 },
            active_phases: Vec::new(),
            cut_after_exit: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = |v: f64| v >= 0.0 && v.is_finite();
        match self.mode {
            ThrustMode::Constant { thrust } if !nonneg(thrust) => {
                Err(Error::invalid("thrust.mode.thrust", "must be >= 0"))
            }
            ThrustMode::PowerLimited { power, efficiency, max_thrust } => {
                if !nonneg(power) || !nonneg(max_thrust) {
                    return Err(Error::invalid("thrust.mode", "power and max_thrust must be >= 0"));
                }
                if !(efficiency > 0.0 && efficiency <= 1.0) {
                    return Err(Error::invalid("thrust.mode.efficiency", "must be in (0, 1]"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Thrust magnitude along body +x in the given phase.
    pub fn magnitude(&self, speed: f64, phase: Phase) -> f64 {
        if !self.active_phases.contains(&phase) {
            return 0.0;
        }
        match self.mode {
            ThrustMode::Constant { thrust } => thrust,
            ThrustMode::PowerLimited { power, efficiency, max_thrust } => {
                (efficiency * power / speed.max(V_FLOOR)).min(max_thrust)
            }
        }
    }
}

pub fn thrust_force_moment(
    state: &BodyState,
    phase: Phase,
    model: &ThrustModel,
    params: &RobotParams,
) -> (Vec3, Vec3) {
    let t = model.magnitude(state.velocity.norm(), phase);
    let force = Vec3::new(t, 0.0, 0.0);
    (force, params.thrust_arm().cross(&force))
}

/// Switches for whole load groups; used for vacuum and dry configurations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForceToggles {
    pub aero: bool,
    /// Buoyancy and hydrodynamic terms.
    pub water: bool,
    pub thrust: bool,
}

impl Default for ForceToggles {
    fn default() -> Self {
        Self { aero: true, water: true, thrust: true }
    }
}

impl ForceToggles {
    pub fn vacuum() -> Self {
        Self { aero: false, water: false, thrust: false }
    }
}

/// Everything but the state and wing angle needed to evaluate loads.
#[derive(Debug, Clone, PartialEq)]
pub struct ForceModel {
    pub params: RobotParams,
    pub env: Environment,
    pub aero: AeroTable,
    pub ground_effect: GroundEffectModel,
    pub pelvic: PelvicFin,
    pub hydro: HydroCoeffs,
    pub thrust: ThrustModel,
    pub toggles: ForceToggles,
}

impl Default for ForceModel {
    fn default() -> Self {
        Self {
            params: RobotParams::default(),
            env: Environment::default(),
            aero: AeroTable::default_table(),
            ground_effect: GroundEffectModel::default(),
            pelvic: PelvicFin::default(),
            hydro: HydroCoeffs::default(),
            thrust: ThrustModel::default(),
            toggles: ForceToggles::default(),
        }
    }
}

impl ForceModel {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.env.validate()?;
        self.ground_effect.validate()?;
        self.hydro.validate()?;
        self.thrust.validate()
    }
}

/// Every load term at one instant, in body axes about the CG.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LoadBreakdown {
    pub submersion: Submersion,
    pub phase: Phase,
    pub gravity: Vec3,
    /// In-air loads, already scaled by the dry fraction.
    pub aero: AeroLoads,
    pub buoyancy: Vec3,
    pub buoyancy_moment: Vec3,
    pub hydro_force: Vec3,
    pub hydro_moment: Vec3,
    pub thrust: Vec3,
    pub thrust_moment: Vec3,
}

impl LoadBreakdown {
    pub fn force(&self) -> Vec3 {
        self.gravity + self.aero.force() + self.buoyancy + self.hydro_force + self.thrust
    }

    pub fn moment(&self) -> Vec3 {
        self.aero.moment + self.buoyancy_moment + self.hydro_moment + self.thrust_moment
    }
}

/// Gravity, in-air, buoyancy, hydrodynamic and thrust loads for a state with
/// wing opening angle `wing_angle` (rad). `cleared` records whether the hull
/// has already been fully out of the water once during the run.
pub fn exit_totals(
    state: &BodyState,
    wing_angle: f64,
    cleared: bool,
    model: &ForceModel,
) -> LoadBreakdown {
    let p = &model.params;
    let env = &model.env;
    let sub = submersion(state, p);
    let phase = sub.phase();
    let dcm = ground_to_body_unchecked(&state.euler);
    let gravity = dcm * Vec3::new(0.0, 0.0, p.mass * env.g);

    let aero = if model.toggles.aero && sub.fraction < 1.0 {
        let wing = WingConfig::for_robot(p, wing_angle);
        aero_force_moment(state, &wing, &model.aero, env, &model.ground_effect, &model.pelvic, p)
            .scaled(1.0 - sub.fraction)
    } else {
        AeroLoads::zero()
    };

    let (buoyancy, buoyancy_moment, hydro_f, hydro_m) = if model.toggles.water {
        let (b, mb) = buoyancy_from(&sub, state, p, env);
        (
            b,
            mb,
            hydro_force(state, sub.fraction, &model.hydro, env),
            hydro_moment(state, sub.fraction, &model.hydro, env),
        )
    } else {
        (Vec3::zeros(), Vec3::zeros(), Vec3::zeros(), Vec3::zeros())
    };

    let motor_on = !(cleared && model.thrust.cut_after_exit);
    let (thrust, thrust_moment) = if model.toggles.thrust && motor_on {
        thrust_force_moment(state, phase, &model.thrust, p)
    } else {
        (Vec3::zeros(), Vec3::zeros())
    };

    LoadBreakdown {
        submersion: sub,
        phase,
        gravity,
        aero,
        buoyancy,
        buoyancy_moment,
        hydro_force: hydro_f,
        hydro_moment: hydro_m,
        thrust,
        thrust_moment,
    }
}
