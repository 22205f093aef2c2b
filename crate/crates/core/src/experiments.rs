//! Experiment harness: single runs, parameter sweeps, the bundled study
//! presets, output writers and wind-tunnel data reduction.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::aero::reduce_wind_tunnel;
use crate::config::{merge_patch, parse_value, set_path, ScenarioConfig, DEFAULTS_JSON};
use crate::error::{Error, Result};
use crate::sim::{simulate, Event, Summary, TerminationReason, Trajectory};

pub const TRAJECTORY_HEADER: [&str; 17] = [
    "t", "x", "y", "z", "u", "v", "w", "phi", "theta", "psi", "p", "q", "r", "alpha_deg", "speed",
    "phase", "k_deg",
];

pub const AGGREGATE_HEADER: [&str; 5] =
    ["value", "glide_distance", "max_altitude", "flight_time", "post_apogee_distance"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            _ => Err(Error::Unknown { kind: "format", name: s.into() }),
        }
    }
}

fn csv_err(context: &str) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::Csv { context: context.into(), message: e.to_string() }
}

/// Writes samples as CSV with [`TRAJECTORY_HEADER`].
pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, writer: W) -> Result<()> {
    let err = csv_err("trajectory");
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(TRAJECTORY_HEADER).map_err(&err)?;
    for s in &traj.samples {
        let b = &s.state;
        let mut rec: Vec<String> = [
            b.time,
            b.position.x,
            b.position.y,
            b.position.z,
            b.velocity.x,
            b.velocity.y,
            b.velocity.z,
            b.euler.x,
            b.euler.y,
            b.euler.z,
            b.omega.x,
            b.omega.y,
            b.omega.z,
        ]
        .iter()
        .map(f64::to_string)
        .collect();
        rec.push(s.alpha.map_or(String::new(), |a| a.to_degrees().to_string()));
        rec.push(s.speed.to_string());
        rec.push(s.phase.to_string());
        rec.push(s.wing.to_degrees().to_string());
        w.write_record(&rec).map_err(&err)?;
    }
    w.flush().map_err(|e| Error::Csv { context: "trajectory".into(), message: e.to_string() })
}

/// Events and summary written next to each trajectory.
#[derive(Debug, Clone, Serialize)]
pub struct Sidecar<'a> {
    pub summary: &'a Summary,
    pub termination: TerminationReason,
    pub events: &'a [Event],
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Writes `<stem>.csv` (or `<stem>.json`) and `<stem>.summary.json` into
/// `dir`, returning the two paths.
pub fn write_run(
    traj: &Trajectory,
    dir: &Path,
    stem: &str,
    format: OutputFormat,
) -> Result<(PathBuf, PathBuf)> {
    create_dir(dir)?;
    let data = match format {
        OutputFormat::Csv => {
            let mut buf = Vec::new();
            write_trajectory_csv(traj, &mut buf)?;
            (dir.join(format!("{stem}.csv")), buf)
        }
        OutputFormat::Json => (
            dir.join(format!("{stem}.json")),
            serde_json::to_vec_pretty(traj).expect("trajectory serializes"),
        ),
    };
    write_file(&data.0, &data.1)?;
    let sidecar = Sidecar { summary: &traj.summary, termination: traj.termination, events: &traj.events };
    let side_path = dir.join(format!("{stem}.summary.json"));
    write_file(&side_path, &serde_json::to_vec_pretty(&sidecar).expect("sidecar serializes"))?;
    Ok((data.0, side_path))
}

pub fn summary_line(s: &Summary) -> String {
    format!(
        "glide_distance={:.4} m max_altitude={:.4} m flight_time={:.4} s post_apogee_distance={:.4} m termination={}{}",
        s.glide_distance,
        s.max_altitude,
        s.flight_time,
        s.post_apogee_distance,
        serde_json::to_value(s.termination).unwrap().as_str().unwrap_or(""),
        if s.valid { "" } else { " (unterminated)" },
    )
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trajectory: Trajectory,
    pub trajectory_path: PathBuf,
    pub sidecar_path: PathBuf,
}

/// Loads a config, simulates it and writes the outputs to `out_dir`. An
/// unterminated run still writes its files; check `summary.valid`.
pub fn run_single(config_path: &Path, out_dir: &Path, format: OutputFormat) -> Result<RunOutput> {
    let cfg = ScenarioConfig::load(config_path)?;
    let base = config_path.parent().unwrap_or(Path::new("."));
    let scenario = cfg.build(base)?;
    let trajectory = simulate(&scenario)?;
    let stem = config_path.file_stem().and_then(|s| s.to_str()).unwrap_or("run");
    let (trajectory_path, sidecar_path) = write_run(&trajectory, out_dir, stem, format)?;
    Ok(RunOutput { trajectory, trajectory_path, sidecar_path })
}

/// Axis values: an explicit list or an inclusive numeric range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AxisValues {
    List(Vec<Value>),
    Range { start: f64, stop: f64, step: f64 },
}

impl AxisValues {
    pub fn expand(&self) -> Result<Vec<Value>> {
        let values = match self {
            AxisValues::List(v) => v.clone(),
            AxisValues::Range { start, stop, step } => {
                if !(*step > 0.0) || !(stop >= start) {
                    return Err(Error::invalid("axis.values", "need step > 0 and stop >= start"));
                }
                let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
                (0..n).map(|i| Value::from(start + i as f64 * step)).collect()
            }
        };
        if values.is_empty() {
            return Err(Error::invalid("axis.values", "must not be empty"));
        }
        Ok(values)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    /// Dotted path into the scenario document.
    pub path: String,
    pub values: AxisValues,
    #[serde(default)]
    pub labels: Option<Vec<String>>,
}

impl Axis {
    fn points(&self) -> Result<Vec<(Value, String)>> {
        let values = self.values.expand()?;
        let labels = match &self.labels {
            Some(l) if l.len() != values.len() => {
                return Err(Error::invalid("axis.labels", "must match the number of values"))
            }
            Some(l) => l.clone(),
            None => values.iter().map(value_label).collect(),
        };
        Ok(values.into_iter().zip(labels).collect())
    }
}

fn value_label(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Number(n) => match n.as_f64() {
            Some(f) if f.fract() == 0.0 && f.abs() < 1e15 => format!("{}", f as i64),
            _ => n.to_string(),
        },
        other => other.to_string(),
    }
}

/// A base scenario document swept over the cartesian product of its axes,
/// first axis outermost.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub base: Value,
    /// Resolves relative paths inside the base document.
    pub base_dir: PathBuf,
    pub axes: Vec<Axis>,
}

impl SweepSpec {
    pub fn new(base: Value, base_dir: impl Into<PathBuf>, axes: Vec<Axis>) -> Self {
        Self { base, base_dir: base_dir.into(), axes }
    }

    /// Member documents with their labels, in row order.
    pub fn members(&self) -> Result<Vec<(String, Value)>> {
        if self.axes.is_empty() {
            return Err(Error::invalid("sweep", "needs at least one axis"));
        }
        let mut rows = vec![(Vec::<String>::new(), self.base.clone())];
        for axis in &self.axes {
            let points = axis.points()?;
            let mut next = Vec::with_capacity(rows.len() * points.len());
            for (labels, doc) in &rows {
                for (v, label) in &points {
                    let mut d = doc.clone();
                    set_path(&mut d, &axis.path, v.clone())?;
                    let mut l = labels.clone();
                    l.push(label.clone());
                    next.push((l, d));
                }
            }
            rows = next;
        }
        Ok(rows.into_iter().map(|(l, d)| (l.join(";"), d)).collect())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub value: String,
    pub summary: Option<Summary>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn distances(&self) -> Vec<Option<f64>> {
        self.rows.iter().map(|r| r.summary.map(|s| s.glide_distance)).collect()
    }

    pub fn write_aggregate<W: Write>(&self, writer: W) -> Result<()> {
        let err = csv_err("aggregate");
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(AGGREGATE_HEADER).map_err(&err)?;
        for r in &self.rows {
            let rec: Vec<String> = match r.summary {
                Some(s) => vec![
                    r.value.clone(),
                    s.glide_distance.to_string(),
                    s.max_altitude.to_string(),
                    s.flight_time.to_string(),
                    s.post_apogee_distance.to_string(),
                ],
                None => vec![r.value.clone(), String::new(), String::new(), String::new(), String::new()],
            };
            w.write_record(&rec).map_err(&err)?;
        }
        w.flush().map_err(|e| Error::Csv { context: "aggregate".into(), message: e.to_string() })
    }
}

fn sanitize(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
        .collect()
}

/// Runs every member, up to `jobs` at a time (0 uses all cores). Rows keep
/// axis order. Member failures are recorded in their row; only setup and
/// output errors abort the sweep.
pub fn run_sweep(
    spec: &SweepSpec,
    jobs: usize,
    out_dir: Option<&Path>,
    format: OutputFormat,
) -> Result<SweepResult> {
    let members = spec.members()?;
    if let Some(dir) = out_dir {
        create_dir(dir)?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::invalid("jobs", e.to_string()))?;
    let outcomes: Vec<Result<Trajectory>> = pool.install(|| {
        members
            .par_iter()
            .map(|(label, doc)| {
                let cfg = ScenarioConfig::from_value(doc.clone(), &format!("sweep member {label}"))?;
                simulate(&cfg.build(&spec.base_dir)?)
            })
            .collect()
    });

    let mut rows = Vec::with_capacity(members.len());
    for (i, ((label, _), outcome)) in members.iter().zip(outcomes).enumerate() {
        match outcome {
            Ok(traj) => {
                if let Some(dir) = out_dir {
                    write_run(&traj, dir, &format!("run_{i:03}_{}", sanitize(label)), format)?;
                }
                rows.push(SweepRow { value: label.clone(), summary: Some(traj.summary), error: None });
            }
            Err(e) => {
                log::warn!("sweep member {label} failed: {e}");
                rows.push(SweepRow { value: label.clone(), summary: None, error: Some(e.to_string()) });
            }
        }
    }
    let result = SweepResult { rows };
    if let Some(dir) = out_dir {
        let mut buf = Vec::new();
        result.write_aggregate(&mut buf)?;
        write_file(&dir.join("aggregate.csv"), &buf)?;
    }
    Ok(result)
}

/// A bundled study: overrides on the defaults plus sweep axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PresetFile {
    pub name: String,
    pub description: String,
    pub overrides: Value,
    pub axes: Vec<Axis>,
}

pub const PRESET_NAMES: [&str; 4] = ["discharge-sweep", "opening-angle", "fold-at-apogee", "ground-effect"];

pub fn preset_source(name: &str) -> Result<&'static str> {
    Ok(match name {
        "discharge-sweep" => include_str!("../presets/discharge-sweep.json"),
        "opening-angle" => include_str!("../presets/opening-angle.json"),
        "fold-at-apogee" => include_str!("../presets/fold-at-apogee.json"),
        "ground-effect" => include_str!("../presets/ground-effect.json"),
        _ => return Err(Error::Unknown { kind: "preset", name: name.into() }),
    })
}

pub fn load_preset(name: &str) -> Result<PresetFile> {
    let src = preset_source(name)?;
    serde_json::from_str(src).map_err(|e| Error::Config {
        source_name: format!("preset {name}"),
        message: e.to_string(),
    })
}

/// Sweep for a preset applied on top of `base` (the shipped defaults when
/// `None`).
pub fn preset_sweep(name: &str, base: Option<(Value, PathBuf)>) -> Result<SweepSpec> {
    let preset = load_preset(name)?;
    let (mut doc, dir) = match base {
        Some(b) => b,
        None => (parse_value(DEFAULTS_JSON, "defaults.json")?, PathBuf::from(".")),
    };
    merge_patch(&mut doc, &preset.overrides);
    Ok(SweepSpec::new(doc, dir, preset.axes))
}

/// Study-specific readouts.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "preset", rename_all = "kebab-case")]
pub enum PresetMetrics {
    DischargeSweep {
        argmax_deg: Option<f64>,
        max_distance: Option<f64>,
        unimodal: bool,
        altitude_monotone: bool,
    },
    OpeningAngle {
        strictly_increasing: bool,
        gain_full_vs_folded: Option<f64>,
    },
    FoldAtApogee {
        hold_post_apogee: Option<f64>,
        fold_post_apogee: Option<f64>,
        ratio: Option<f64>,
    },
    GroundEffect {
        discharge_deg: Vec<f64>,
        gains: Vec<Option<f64>>,
        strictly_decreasing: bool,
    },
}

#[derive(Debug, Clone, Serialize)]
pub struct PresetReport {
    pub name: String,
    pub sweep: SweepResult,
    pub metrics: PresetMetrics,
}

/// True when the sequence rises (weakly) to a single peak then falls.
pub fn is_unimodal(xs: &[f64]) -> bool {
    let Some(peak) = argmax(xs) else { return false };
    xs[..=peak].windows(2).all(|w| w[1] >= w[0]) && xs[peak..].windows(2).all(|w| w[1] <= w[0])
}

pub fn argmax(xs: &[f64]) -> Option<usize> {
    xs.iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
}

fn strictly(xs: &[f64], inc: bool) -> bool {
    xs.windows(2).all(|w| if inc { w[1] > w[0] } else { w[1] < w[0] })
}

fn all_some<T: Copy>(xs: &[Option<T>]) -> Option<Vec<T>> {
    xs.iter().copied().collect()
}

pub fn preset_metrics(name: &str, spec: &SweepSpec, sweep: &SweepResult) -> Result<PresetMetrics> {
    let dist = sweep.distances();
    let numeric = |i: usize| -> Result<Vec<f64>> {
        spec.axes[i]
            .values
            .expand()?
            .iter()
            .map(|v| v.as_f64().ok_or_else(|| Error::invalid("axis", "expected numbers")))
            .collect()
    };
    Ok(match name {
        "discharge-sweep" => {
            let angles = numeric(0)?;
            let d = all_some(&dist);
            let alt = all_some(&sweep.rows.iter().map(|r| r.summary.map(|s| s.max_altitude)).collect::<Vec<_>>());
            let peak = d.as_deref().and_then(argmax);
            PresetMetrics::DischargeSweep {
                argmax_deg: peak.map(|i| angles[i]),
                max_distance: peak.and_then(|i| d.as_ref().map(|d| d[i])),
                unimodal: d.as_deref().is_some_and(is_unimodal),
                altitude_monotone: alt.as_deref().is_some_and(|a| strictly(a, true)),
            }
        }
        "opening-angle" => {
            let d = all_some(&dist);
            PresetMetrics::OpeningAngle {
                strictly_increasing: d.as_deref().is_some_and(|d| strictly(d, true)),
                gain_full_vs_folded: d.as_ref().map(|d| d[d.len() - 1] / d[0] - 1.0),
            }
        }
        "fold-at-apogee" => {
            let post: Vec<Option<f64>> = sweep.rows.iter().map(|r| r.summary.map(|s| s.post_apogee_distance)).collect();
            let (hold, fold) = (post[0], post[1]);
            PresetMetrics::FoldAtApogee {
                hold_post_apogee: hold,
                fold_post_apogee: fold,
                ratio: hold.zip(fold).map(|(h, f)| f / h),
            }
        }
        "ground-effect" => {
            let angles = numeric(0)?;
            let gains: Vec<Option<f64>> = dist
                .chunks(2)
                .map(|p| p[0].zip(p[1]).map(|(off, on)| on / off - 1.0))
                .collect();
            PresetMetrics::GroundEffect {
                strictly_decreasing: all_some(&gains).is_some_and(|g| strictly(&g, false)),
                discharge_deg: angles,
                gains,
            }
        }
        _ => return Err(Error::Unknown { kind: "preset", name: name.into() }),
    })
}

/// Runs a bundled preset. With `out_dir`, writes the member files,
/// `aggregate.csv` and `report.json`.
pub fn run_preset(
    name: &str,
    base: Option<(Value, PathBuf)>,
    jobs: usize,
    out_dir: Option<&Path>,
    format: OutputFormat,
) -> Result<PresetReport> {
    let spec = preset_sweep(name, base)?;
    let sweep = run_sweep(&spec, jobs, out_dir, format)?;
    let metrics = preset_metrics(name, &spec, &sweep)?;
    let report = PresetReport { name: name.into(), sweep, metrics };
    if let Some(dir) = out_dir {
        write_file(
            &dir.join("report.json"),
            &serde_json::to_vec_pretty(&report).expect("report serializes"),
        )?;
    }
    Ok(report)
}

/// Balance geometry for [`reduce_coeffs`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReduceGeometry {
    /// m/s
    pub speed: f64,
    /// m^2
    pub area: f64,
    /// kg/m^3
    pub rho: f64,
}

impl Default for ReduceGeometry {
    fn default() -> Self {
        Self { speed: 10.0, area: 0.0227, rho: 1.225 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoeffRow {
    pub alpha_deg: f64,
    pub cl: f64,
    pub cd: f64,
    pub cm: Option<f64>,
}

/// Reduces `alpha_deg,Fz,Fx[,M]` balance rows to coefficients, sorted by
/// angle of attack.
pub fn reduce_coeffs<R: Read>(reader: R, geometry: &ReduceGeometry) -> Result<Vec<CoeffRow>> {
    let err = csv_err("measurements");
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(&err)?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (Some(ia), Some(iz), Some(ix)) = (col("alpha_deg"), col("Fz"), col("Fx")) else {
        return Err(Error::Csv {
            context: "measurements".into(),
            message: "header must contain alpha_deg, Fz and Fx".into(),
        });
    };
    let im = col("M");
    let mut rows = Vec::new();
    for (n, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(&err)?;
        let num = |i: usize| -> Result<f64> {
            rec.get(i).unwrap_or("").parse::<f64>().map_err(|_| Error::Csv {
                context: format!("measurement row {}", n + 1),
                message: format!("column {} is not a number", headers.get(i).unwrap_or("?")),
            })
        };
        let alpha_deg = num(ia)?;
        let moment = im.map(num).transpose()?;
        let r = reduce_wind_tunnel(
            num(iz)?,
            num(ix)?,
            alpha_deg.to_radians(),
            geometry.speed,
            geometry.area,
            geometry.rho,
            moment,
        )?;
        rows.push(CoeffRow { alpha_deg, cl: r.cl, cd: r.cd, cm: r.cm });
    }
    if rows.is_empty() {
        return Err(Error::invalid("measurements", "no data rows"));
    }
    if rows.windows(2).any(|w| w[1].alpha_deg < w[0].alpha_deg) {
        log::warn!("measurement angles are not sorted; output is sorted by alpha");
        rows.sort_by(|a, b| a.alpha_deg.total_cmp(&b.alpha_deg));
    }
    Ok(rows)
}

/// Writes `alpha_deg,CL,CD[,CM]`.
pub fn write_coeffs<W: Write>(rows: &[CoeffRow], writer: W) -> Result<()> {
    let err = csv_err("coefficients");
    let with_m = rows.iter().all(|r| r.cm.is_some());
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["alpha_deg", "CL", "CD"];
    if with_m {
        header.push("CM");
    }
    w.write_record(&header).map_err(&err)?;
    for r in rows {
        let mut rec = vec![r.alpha_deg.to_string(), r.cl.to_string(), r.cd.to_string()];
        if let (true, Some(m)) = (with_m, r.cm) {
            rec.push(m.to_string());
        }
        w.write_record(&rec).map_err(&err)?;
    }
    w.flush().map_err(|e| Error::Csv { context: "coefficients".into(), message: e.to_string() })
}
