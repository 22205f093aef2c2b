//! Soft hydraulic actuator: pressure and injected volume to wing opening
//! angle, and the first-order lag used to follow a commanded angle.

use std::fmt;
use std::io::Read;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Opening angle at full extension, deg.
pub const FULL_EXTENSION_DEG: f64 = 90.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Medium {
    Liquid,
    Gas,
}

impl FromStr for Medium {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "liquid" => Ok(Medium::Liquid),
            "gas" => Ok(Medium::Gas),
            _ => Err(Error::Unknown { kind: "medium", name: s.into() }),
        }
    }
}

impl fmt::Display for Medium {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Medium::Liquid => "liquid",
            Medium::Gas => "gas",
        })
    }
}

/// Piecewise-linear injected volume (mL) to opening angle (deg).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VolumeCurve {
    points: Vec<[f64; 2]>,
}

impl VolumeCurve {
    /// Points must start at (0, 0), end at 90 deg, have strictly increasing
    /// volume and non-decreasing angle.
    pub fn new(points: Vec<[f64; 2]>) -> Result<Self> {
        let field = "actuator.volume_curve";
        if points.len() < 2 {
            return Err(Error::invalid(field, "needs at least two points"));
        }
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid(field, "non-finite value"));
        }
        if points[0] != [0.0, 0.0] {
            return Err(Error::invalid(field, "must start at (0, 0)"));
        }
        if points[points.len() - 1][1] != FULL_EXTENSION_DEG {
            return Err(Error::invalid(field, "must end at 90 deg"));
        }
        if points.windows(2).any(|w| w[1][0] <= w[0][0] || w[1][1] < w[0][1]) {
            return Err(Error::invalid(field, "must be monotone"));
        }
        Ok(Self { points })
    }

    /// Linear from (0, 0) to (`full_volume`, 90).
    pub fn linear(full_volume: f64) -> Result<Self> {
        Self::new(vec![[0.0, 0.0], [full_volume, FULL_EXTENSION_DEG]])
    }

    /// Reads `volume_ml,angle_deg` rows.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            volume_ml: f64,
            angle_deg: f64,
        }
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut points = Vec::new();
        for (i, row) in rdr.deserialize::<Row>().enumerate() {
            let row = row.map_err(|e| Error::Csv {
                context: format!("calibration row {}", i + 1),
                message: e.to_string(),
            })?;
            points.push([row.volume_ml, row.angle_deg]);
        }
        Self::new(points)
    }

    pub fn full_volume(&self) -> f64 {
        self.points[self.points.len() - 1][0]
    }

    pub fn angle(&self, volume: f64) -> f64 {
        let pts = &self.points;
        if volume >= self.full_volume() {
            return FULL_EXTENSION_DEG;
        }
        let hi = pts.partition_point(|p| p[0] <= volume).max(1);
        let (a, b) = (pts[hi - 1], pts[hi]);
        a[1] + (volume - a[0]) / (b[0] - a[0]) * (b[1] - a[1])
    }
}

/// Expansion curve with an optional separate contraction curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MediumCurves {
    pub expand: VolumeCurve,
    #[serde(default)]
    pub contract: Option<VolumeCurve>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActuatorCalib {
    /// deg per kPa
    pub pressure_gain: f64,
    /// mL for full extension with liquid
    pub liquid_full_volume: f64,
    /// mL for full extension with gas
    pub gas_full_volume: f64,
    #[serde(default)]
    pub liquid_curve: Option<MediumCurves>,
    #[serde(default)]
    pub gas_curve: Option<MediumCurves>,
    /// s; zero tracks instantly
    pub time_constant: f64,
}

impl Default for ActuatorCalib {
    fn default() -> Self {
        Self {
            pressure_gain: 1.2,
            liquid_full_volume: 2.0,
            gas_full_volume: 5.0,
            liquid_curve: None,
            gas_curve: None,
            time_constant: 0.15,
        }
    }
}

impl ActuatorCalib {
    pub fn validate(&self) -> Result<()> {
        for (field, v) in [
            ("actuator.pressure_gain", self.pressure_gain),
            ("actuator.liquid_full_volume", self.liquid_full_volume),
            ("actuator.gas_full_volume", self.gas_full_volume),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(field, "must be > 0"));
            }
        }
        if !(self.time_constant >= 0.0 && self.time_constant.is_finite()) {
            return Err(Error::invalid("actuator.time_constant", "must be >= 0"));
        }
        for c in [&self.liquid_curve, &self.gas_curve].into_iter().flatten() {
            VolumeCurve::new(c.expand.points.clone())?;
            if let Some(down) = &c.contract {
                VolumeCurve::new(down.points.clone())?;
            }
        }
        Ok(())
    }

    fn curves(&self, medium: Medium) -> Option<&MediumCurves> {
        match medium {
            Medium::Liquid => self.liquid_curve.as_ref(),
            Medium::Gas => self.gas_curve.as_ref(),
        }
    }

    pub fn full_volume(&self, medium: Medium) -> f64 {
        match (self.curves(medium), medium) {
            (Some(c), _) => c.expand.full_volume(),
            (None, Medium::Liquid) => self.liquid_full_volume,
            (None, Medium::Gas) => self.gas_full_volume,
        }
    }
}

/// Opening angle (deg) for internal pressure `p` (kPa), saturating at 90.
pub fn angle_from_pressure(p: f64, calib: &ActuatorCalib) -> Result<f64> {
    if !(p >= 0.0 && p.is_finite()) {
        return Err(Error::OutOfRange {
            what: "pressure",
            value: p,
            range: "[0, inf) kPa",
        });
    }
    Ok((calib.pressure_gain * p).min(FULL_EXTENSION_DEG))
}

/// Pressure (kPa) producing opening angle `theta` (deg).
pub fn pressure_from_angle(theta: f64, calib: &ActuatorCalib) -> Result<f64> {
    if !(0.0..=FULL_EXTENSION_DEG).contains(&theta) {
        return Err(Error::OutOfRange {
            what: "opening angle",
            value: theta,
            range: "[0, 90] deg",
        });
    }
    Ok(theta / calib.pressure_gain)
}

/// Opening angle (deg) for injected volume `vol` (mL) on the expansion curve.
pub fn angle_from_volume(vol: f64, medium: Medium, calib: &ActuatorCalib) -> Result<f64> {
    angle_from_volume_directed(vol, medium, true, calib)
}

/// As [`angle_from_volume`], choosing the contraction curve when
/// `expanding` is false and one is configured.
pub fn angle_from_volume_directed(
    vol: f64,
    medium: Medium,
    expanding: bool,
    calib: &ActuatorCalib,
) -> Result<f64> {
    if !(vol >= 0.0 && vol.is_finite()) {
        return Err(Error::OutOfRange {
            what: "injected volume",
            value: vol,
            range: "[0, inf) mL",
        });
    }
    match calib.curves(medium) {
        Some(c) => {
            let curve = match (&c.contract, expanding) {
                (Some(down), false) => down,
                _ => &c.expand,
            };
            Ok(curve.angle(vol))
        }
        None => {
            let full = calib.full_volume(medium);
            Ok((vol / full * FULL_EXTENSION_DEG).min(FULL_EXTENSION_DEG))
        }
    }
}

/// One step of the first-order lag toward `commanded`. Unit-agnostic.
pub fn lag_step(current: f64, commanded: f64, dt: f64, tau: f64) -> f64 {
    if tau <= 0.0 || current == commanded {
        return commanded;
    }
    commanded + (current - commanded) * (-dt / tau).exp()
}

/// Opening angle after tracking `commanded` for `dt` seconds.
pub fn track_schedule(current: f64, commanded: f64, dt: f64, calib: &ActuatorCalib) -> f64 {
    lag_step(current, commanded, dt, calib.time_constant)
}
