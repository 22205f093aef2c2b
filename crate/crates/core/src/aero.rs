//! Collapsible-wing geometry, coefficient tables, fin loads in air, and the
//! ground-effect correction.

use std::f64::consts::FRAC_PI_2;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{airflow_angles, Airflow, BodyState, Environment, Mat3, RobotParams, Vec3};

const DEFAULT_TABLE_CSV: &str = include_str!("../data/default_aero.csv");

/// Clamps an opening angle into `[0, pi/2]`, logging when the input was out
/// of range.
pub fn clamp_opening(k: f64) -> f64 {
    let c = k.clamp(0.0, FRAC_PI_2);
    if c != k {
        log::warn!("wing opening angle {k} rad clamped to {c}");
    }
    c
}

/// Fan area swept by one pectoral fin: `l^2 k / 2`.
pub fn wing_area(k: f64, arm_length: f64) -> f64 {
    0.5 * arm_length * arm_length * clamp_opening(k)
}

/// Tip-to-tip span: `2 l sin k + L`.
pub fn wing_span(k: f64, arm_length: f64, folded_width: f64) -> f64 {
    2.0 * arm_length * clamp_opening(k).sin() + folded_width
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WingConfig {
    /// rad, in [0, pi/2]
    pub opening_angle: f64,
    pub arm_length: f64,
    pub folded_width: f64,
}

impl WingConfig {
    pub fn new(opening_angle: f64, arm_length: f64, folded_width: f64) -> Self {
        Self {
            opening_angle: clamp_opening(opening_angle),
            arm_length,
            folded_width,
        }
    }

    pub fn for_robot(params: &RobotParams, opening_angle: f64) -> Self {
        Self::new(opening_angle, params.wing_arm_length, params.folded_width)
    }

    pub fn area(&self) -> f64 {
        wing_area(self.opening_angle, self.arm_length)
    }

    pub fn span(&self) -> f64 {
        wing_span(self.opening_angle, self.arm_length, self.folded_width)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AeroPoint {
    /// rad
    pub alpha: f64,
    pub cl: f64,
    pub cd: f64,
    pub cm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coeffs {
    pub cl: f64,
    pub cd: f64,
    pub cm: f64,
}

/// Breakpoint table of lift, drag and pitching-moment coefficients against
/// angle of attack, plus the constant lateral coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct AeroTable {
    points: Vec<AeroPoint>,
    pub side_force_coeff: f64,
    pub roll_moment_coeff: f64,
    pub yaw_moment_coeff: f64,
    /// Reference length multiplying the pitching-moment coefficient, m.
    pub reference_chord: f64,
}

/// Minimum angle-of-attack span a table must cover, deg.
pub const TABLE_MIN_SPAN_DEG: (f64, f64) = (-15.0, 25.0);

/// Default pitching-moment reference length, m.
pub const DEFAULT_REFERENCE_CHORD: f64 = 0.005;

impl AeroTable {
    pub fn new(points: Vec<AeroPoint>, reference_chord: f64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyTable);
        }
        for p in &points {
            if ![p.alpha, p.cl, p.cd, p.cm].iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite("aero table"));
            }
            if p.cd <= 0.0 {
                return Err(Error::invalid(
                    "aero.table",
                    format!("CD must be > 0 (got {} at {} deg)", p.cd, p.alpha.to_degrees()),
                ));
            }
        }
        if points.windows(2).any(|w| w[1].alpha <= w[0].alpha) {
            return Err(Error::invalid(
                "aero.table",
                "alpha breakpoints must be strictly increasing",
            ));
        }
        let (lo, hi) = (
            points[0].alpha.to_degrees(),
            points[points.len() - 1].alpha.to_degrees(),
        );
        // rounding slack for tables written in degrees
        if lo > TABLE_MIN_SPAN_DEG.0 + 1e-9 || hi < TABLE_MIN_SPAN_DEG.1 - 1e-9 {
            return Err(Error::invalid(
                "aero.table",
                format!("breakpoints span [{lo}, {hi}] deg, need at least [-15, 25]"),
            ));
        }
        if !(reference_chord > 0.0 && reference_chord.is_finite()) {
            return Err(Error::invalid("aero.reference_chord", "must be > 0"));
        }
        Ok(Self {
            points,
            side_force_coeff: 0.0,
            roll_moment_coeff: 0.0,
            yaw_moment_coeff: 0.0,
            reference_chord,
        })
    }

    /// The shipped table (`data/default_aero.csv`).
    pub fn default_table() -> Self {
        Self::from_csv(DEFAULT_TABLE_CSV.as_bytes(), DEFAULT_REFERENCE_CHORD)
            .expect("bundled aero table is valid")
    }

    pub fn points(&self) -> &[AeroPoint] {
        &self.points
    }

    /// Reads `alpha_deg,CL,CD,CM` rows.
    pub fn from_csv<R: Read>(reader: R, reference_chord: f64) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            alpha_deg: f64,
            #[serde(rename = "CL")]
            cl: f64,
            #[serde(rename = "CD")]
            cd: f64,
            #[serde(rename = "CM")]
            cm: f64,
        }
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut points = Vec::new();
        for (i, row) in rdr.deserialize::<Row>().enumerate() {
            let row = row.map_err(|e| Error::Csv {
                context: format!("aero table row {}", i + 1),
                message: e.to_string(),
            })?;
            points.push(AeroPoint {
                alpha: row.alpha_deg.to_radians(),
                cl: row.cl,
                cd: row.cd,
                cm: row.cm,
            });
        }
        Self::new(points, reference_chord)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let err = |e: csv::Error| Error::Csv {
            context: "aero table".into(),
            message: e.to_string(),
        };
        w.write_record(["alpha_deg", "CL", "CD", "CM"]).map_err(err)?;
        for p in &self.points {
            w.write_record(&[
                p.alpha.to_degrees().to_string(),
                p.cl.to_string(),
                p.cd.to_string(),
                p.cm.to_string(),
            ])
            .map_err(err)?;
        }
        w.flush().map_err(|e| Error::Csv {
            context: "aero table".into(),
            message: e.to_string(),
        })
    }

    /// Piecewise-linear lookup, held at the end values outside the span.
    pub fn coeffs(&self, alpha: f64) -> Coeffs {
        let pts = &self.points;
        let first = pts[0];
        let last = pts[pts.len() - 1];
        if alpha <= first.alpha {
            return Coeffs { cl: first.cl, cd: first.cd, cm: first.cm };
        }
        if alpha >= last.alpha {
            return Coeffs { cl: last.cl, cd: last.cd, cm: last.cm };
        }
        let hi = pts.partition_point(|p| p.alpha <= alpha);
        let (a, b) = (pts[hi - 1], pts[hi]);
        let t = (alpha - a.alpha) / (b.alpha - a.alpha);
        let lerp = |x: f64, y: f64| x + t * (y - x);
        Coeffs {
            cl: lerp(a.cl, b.cl),
            cd: lerp(a.cd, b.cd),
            cm: lerp(a.cm, b.cm),
        }
    }
}

/// Free function form of [`AeroTable::coeffs`].
pub fn aero_coeffs(table: &AeroTable, alpha: f64) -> Coeffs {
    table.coeffs(alpha)
}

/// Exponential-decay ground-effect factors with a hard cutoff in h/b.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundEffectModel {
    pub lift_gain: f64,
    pub drag_relief: f64,
    pub decay: f64,
    /// h/b at and above which the factors are exactly 1.
    pub cutoff: f64,
}

impl Default for GroundEffectModel {
    fn default() -> Self {
        Self {
            lift_gain: 8.0,
            drag_relief: 0.3,
            decay: 2.0,
            cutoff: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GroundEffect {
    pub lift: f64,
    pub drag: f64,
}

impl GroundEffect {
    pub const NONE: GroundEffect = GroundEffect { lift: 1.0, drag: 1.0 };
}

impl GroundEffectModel {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !ok(self.lift_gain) || !ok(self.decay) || !(self.cutoff > 0.0 && self.cutoff.is_finite())
        {
            return Err(Error::invalid(
                "ground_effect",
                "gains and decay must be >= 0, cutoff > 0",
            ));
        }
        if !(0.0..1.0).contains(&self.drag_relief) {
            return Err(Error::invalid("ground_effect.drag_relief", "must be in [0, 1)"));
        }
        Ok(())
    }

    /// Lift and drag multipliers at CG `altitude` for wing `span`. Altitudes
    /// below the surface are treated as zero clearance.
    pub fn factors(&self, altitude: f64, span: f64) -> GroundEffect {
        let ratio = altitude.max(0.0) / span;
        if ratio >= self.cutoff {
            return GroundEffect::NONE;
        }
        let shape = (-self.decay * ratio).exp() - (-self.decay * self.cutoff).exp();
        GroundEffect {
            lift: 1.0 + self.lift_gain * shape,
            drag: 1.0 - self.drag_relief * shape,
        }
    }
}

pub fn ground_effect_factors(
    model: &GroundEffectModel,
    enabled: bool,
    altitude: f64,
    span: f64,
) -> GroundEffect {
    if enabled {
        model.factors(altitude, span)
    } else {
        GroundEffect::NONE
    }
}

/// Pelvic fin incidence and its rate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PelvicFin {
    /// rad
    pub pitch: f64,
    /// rad/s
    pub pitch_rate: f64,
}

fn rot_y(angle: f64) -> Mat3 {
    let (s, c) = angle.sin_cos();
    Mat3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

/// Flow velocity seen by the pelvic fin: the CG velocity plus the fin's
/// rotational tip velocity turned about body y by `pi/2 - theta_p`.
pub fn pelvic_fin_velocity(v_cg: &Vec3, theta_p: f64, theta_p_rate: f64, b_p: f64) -> Vec3 {
    let tip = Vec3::new(0.0, theta_p_rate, 0.0).cross(&Vec3::new(b_p, 0.0, 0.0));
    v_cg + rot_y(FRAC_PI_2 - theta_p) * tip
}

/// Aerodynamic loads in body axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AeroLoads {
    pub lift: Vec3,
    pub drag: Vec3,
    pub side: Vec3,
    pub moment: Vec3,
    /// CG airflow, `None` when the speed is below the flow threshold.
    #[serde(skip)]
    pub airflow: Option<Airflow>,
    pub ground_effect: GroundEffect,
}

impl AeroLoads {
    pub fn zero() -> Self {
        Self {
            lift: Vec3::zeros(),
            drag: Vec3::zeros(),
            side: Vec3::zeros(),
            moment: Vec3::zeros(),
            airflow: None,
            ground_effect: GroundEffect::NONE,
        }
    }

    pub fn force(&self) -> Vec3 {
        self.lift + self.drag + self.side
    }

    pub fn degenerate(&self) -> bool {
        self.airflow.is_none()
    }

    pub fn scaled(mut self, factor: f64) -> Self {
        self.lift *= factor;
        self.drag *= factor;
        self.side *= factor;
        self.moment *= factor;
        self
    }
}

struct SurfaceLoads {
    lift: Vec3,
    drag: Vec3,
    side: Vec3,
    moment: Vec3,
}

fn surface_loads(
    airflow: &Airflow,
    area: f64,
    span: f64,
    table: &AeroTable,
    rho: f64,
    ge: GroundEffect,
) -> SurfaceLoads {
    let c = table.coeffs(airflow.alpha);
    let qs = 0.5 * rho * airflow.speed * airflow.speed * area;
    let to_body = airflow.wind_to_body();
    SurfaceLoads {
        lift: to_body * Vec3::new(0.0, 0.0, -qs * c.cl * ge.lift),
        drag: to_body * Vec3::new(-qs * c.cd * ge.drag, 0.0, 0.0),
        side: to_body * Vec3::new(0.0, qs * table.side_force_coeff, 0.0),
        moment: qs
            * Vec3::new(
                span * table.roll_moment_coeff,
                table.reference_chord * c.cm,
                span * table.yaw_moment_coeff,
            ),
    }
}

/// Pectoral plus pelvic fin loads about the CG, in body axes.
///
/// Gravity is not included. Lift and drag coefficients are multiplied by the
/// ground-effect factors when the environment enables them. Below the flow
/// speed threshold the result is zero with `airflow == None`.
pub fn aero_force_moment(
    state: &BodyState,
    wing: &WingConfig,
    table: &AeroTable,
    env: &Environment,
    ge_model: &GroundEffectModel,
    pelvic: &PelvicFin,
    params: &RobotParams,
) -> AeroLoads {
    let Ok(airflow) = airflow_angles(&state.velocity) else {
        return AeroLoads::zero();
    };
    let span = wing.span();
    let ge = ground_effect_factors(ge_model, env.ground_effect_enabled, state.altitude(), span);

    let pectoral_area = f64::from(params.pectoral_fin_count) * wing.area();
    let main = surface_loads(&airflow, pectoral_area, span, table, env.rho_air, ge);

    let mut out = AeroLoads {
        lift: main.lift,
        drag: main.drag,
        side: main.side,
        moment: main.moment,
        airflow: Some(airflow),
        ground_effect: ge,
    };

    if params.pelvic_fin_area > 0.0 {
        let vp = pelvic_fin_velocity(
            &state.velocity,
            pelvic.pitch,
            pelvic.pitch_rate,
            params.pelvic_fin_mean_width,
        );
        if let Ok(flow_p) = airflow_angles(&vp) {
            let p = surface_loads(&flow_p, params.pelvic_fin_area, span, table, env.rho_air, ge);
            out.lift += p.lift;
            out.drag += p.drag;
            out.side += p.side;
            out.moment += p.moment;
        }
    }
    out
}

/// Coefficients recovered from one balance measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedCoeffs {
    pub lift: f64,
    pub drag: f64,
    pub cl: f64,
    pub cd: f64,
    pub cm: Option<f64>,
}

/// Resolves ground-frame balance forces (`fz` up, `fx` back) at incidence
/// `alpha` into lift and drag, then normalises by `rho S V^2 / 2`.
pub fn reduce_wind_tunnel(
    fz: f64,
    fx: f64,
    alpha: f64,
    speed: f64,
    area: f64,
    rho: f64,
    moment: Option<f64>,
) -> Result<ReducedCoeffs> {
    if !(speed > 0.0 && speed.is_finite()) {
        return Err(Error::invalid("speed", "must be > 0"));
    }
    if !(area > 0.0 && area.is_finite()) {
        return Err(Error::invalid("area", "must be > 0"));
    }
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::invalid("rho", "must be > 0"));
    }
    let (s, c) = alpha.sin_cos();
    // inverse of [[c, s], [s, -c]], which is its own inverse
    let lift = fz * c + fx * s;
    let drag = fz * s - fx * c;
    let q = 0.5 * rho * area * speed * speed;
    Ok(ReducedCoeffs {
        lift,
        drag,
        cl: lift / q,
        cd: drag / q,
        cm: moment.map(|m| m / q),
    })
}
