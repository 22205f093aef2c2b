//! Fixed-step RK4 integration of the rigid-body equations with event
//! detection, wing-schedule execution and trajectory summaries.

use serde::{Deserialize, Serialize};

use crate::actuator::{lag_step, ActuatorCalib};
use crate::error::{Error, Result};
use crate::hydro::{exit_totals, submersion, ForceModel, LoadBreakdown, Phase};
use crate::model::{
    airflow_angles, euler_rates, ground_to_body_unchecked, BodyState, Vec3,
};

/// Event times are refined by bisection to this width, s.
pub const EVENT_TOLERANCE: f64 = 1e-6;

/// Initial condition: body axis and velocity both inclined at the discharge
/// angle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Launch {
    /// Ground-frame CG position, m (z down).
    pub position: [f64; 3],
    /// m/s
    pub speed: f64,
    pub discharge_deg: f64,
}

impl Default for Launch {
    fn default() -> Self {
        Self {
            position: [0.0, 0.0, 0.0],
            speed: 10.0,
            discharge_deg: 15.0,
        }
    }
}

impl Launch {
    pub fn initial_state(&self) -> BodyState {
        let mut s = BodyState::at_rest(Vec3::from(self.position));
        s.euler = Vec3::new(0.0, self.discharge_deg.to_radians(), 0.0);
        s.velocity = Vec3::new(self.speed, 0.0, 0.0);
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Up,
    Down,
    Either,
}

impl Direction {
    fn crossed(self, g0: f64, g1: f64) -> bool {
        let up = g0 < 0.0 && g1 >= 0.0;
        let down = g0 > 0.0 && g1 <= 0.0;
        match self {
            Direction::Up => up,
            Direction::Down => down,
            Direction::Either => up || down,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Trigger {
    AtTime { time: f64 },
    /// First apogee of the run.
    AtApogee,
    AtAltitude { altitude: f64, direction: Direction },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WingCommand {
    pub trigger: Trigger,
    pub opening_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WingSchedule {
    /// Opening angle at t = 0, deg.
    pub initial_deg: f64,
    pub commands: Vec<WingCommand>,
}

impl Default for WingSchedule {
    fn default() -> Self {
        Self { initial_deg: 90.0, commands: Vec::new() }
    }
}

impl WingSchedule {
    pub fn constant(opening_deg: f64) -> Self {
        Self { initial_deg: opening_deg, commands: Vec::new() }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |d: f64| (0.0..=90.0).contains(&d);
        if !ok(self.initial_deg) || self.commands.iter().any(|c| !ok(c.opening_deg)) {
            return Err(Error::invalid("schedule", "opening angles must be in [0, 90] deg"));
        }
        let mut last = f64::NEG_INFINITY;
        for c in &self.commands {
            match c.trigger {
                Trigger::AtTime { time } => {
                    if !(time >= 0.0 && time.is_finite()) || time < last {
                        return Err(Error::invalid(
                            "schedule.commands",
                            "time triggers must be finite, >= 0 and in order",
                        ));
                    }
                    last = time;
                }
                Trigger::AtAltitude { altitude, .. } if !altitude.is_finite() => {
                    return Err(Error::invalid("schedule.commands", "non-finite altitude"));
                }
                _ => {}
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Termination {
    /// Stop when the CG descends through the surface.
    pub surface_contact: bool,
    /// s
    pub max_time: f64,
    /// Horizontal distance from the launch point, m.
    #[serde(default)]
    pub max_distance: Option<f64>,
}

impl Default for Termination {
    fn default() -> Self {
        Self { surface_contact: true, max_time: 20.0, max_distance: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub launch: Launch,
    pub model: ForceModel,
    pub actuator: ActuatorCalib,
    pub schedule: WingSchedule,
    pub termination: Termination,
    /// s
    pub dt: f64,
    /// Record a sample every this many steps.
    pub record_every: usize,
    /// Freeze angular acceleration until the hull first clears the water.
    pub exit_attitude_hold: bool,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            launch: Launch::default(),
            model: ForceModel::default(),
            actuator: ActuatorCalib::default(),
            schedule: WingSchedule::default(),
            termination: Termination::default(),
            dt: 1e-3,
            record_every: 10,
            exit_attitude_hold: true,
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.actuator.validate()?;
        self.schedule.validate()?;
        let l = &self.launch;
        if l.position.iter().any(|v| !v.is_finite()) || !(l.speed >= 0.0 && l.speed.is_finite()) {
            return Err(Error::invalid("launch", "position and speed must be finite, speed >= 0"));
        }
        if !(l.discharge_deg > 0.0 && l.discharge_deg < 90.0) {
            return Err(Error::invalid("launch.discharge_deg", "must be in (0, 90)"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid("integrator.dt", "must be > 0"));
        }
        if self.record_every == 0 {
            return Err(Error::invalid("integrator.record_every", "must be >= 1"));
        }
        let t = &self.termination;
        if !(t.max_time > 0.0 && t.max_time.is_finite()) {
            return Err(Error::invalid("termination.max_time", "must be > 0"));
        }
        if t.max_distance.is_some_and(|d| !(d > 0.0)) {
            return Err(Error::invalid("termination.max_distance", "must be > 0"));
        }
        Ok(())
    }

    /// Vacuum, dry, unpowered variant: gravity only.
    pub fn vacuum(mut self) -> Self {
        self.model.toggles = crate::hydro::ForceToggles::vacuum();
        self
    }

    pub fn initial_state(&self) -> SimState {
        let body = self.launch.initial_state();
        let k = self.schedule.initial_deg.to_radians();
        let wet = submersion(&body, &self.model.params).fraction > 0.0;
        SimState {
            body,
            wing: k,
            commanded: k,
            cleared: !wet,
        }
    }
}

/// Integrator state: rigid body plus wing actuator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimState {
    pub body: BodyState,
    /// Current opening angle, rad.
    pub wing: f64,
    /// Commanded opening angle, rad.
    pub commanded: f64,
    /// The hull has been fully out of the water at least once.
    pub cleared: bool,
}

impl SimState {
    fn hold(&self, scenario: &Scenario) -> bool {
        scenario.exit_attitude_hold && !self.cleared
    }
}

/// Time derivative of the rigid-body state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Derivative {
    pub position: Vec3,
    pub velocity: Vec3,
    pub euler: Vec3,
    pub omega: Vec3,
}

fn advance(s: &BodyState, d: &Derivative, h: f64) -> BodyState {
    BodyState {
        position: s.position + h * d.position,
        velocity: s.velocity + h * d.velocity,
        euler: s.euler + h * d.euler,
        omega: s.omega + h * d.omega,
        time: s.time + h,
    }
}

fn abort(body: &BodyState, message: String) -> Error {
    Error::Integration {
        time: body.time,
        message,
        snapshot: Box::new(*body),
    }
}

/// Rigid-body equations in body axes for wing angle `wing` (rad). With
/// `hold` set the angular acceleration is zero; `cleared` is passed through
/// to [`exit_totals`].
pub fn derivatives(
    body: &BodyState,
    wing: f64,
    cleared: bool,
    hold: bool,
    model: &ForceModel,
) -> Result<(Derivative, LoadBreakdown)> {
    let deuler = euler_rates(&body.euler, &body.omega).map_err(|e| abort(body, e.to_string()))?;
    let loads = exit_totals(body, wing, cleared, model);
    let (f, m) = (loads.force(), loads.moment());
    if !(f.iter().all(|v| v.is_finite()) && m.iter().all(|v| v.is_finite())) {
        return Err(abort(body, "non-finite force or moment".into()));
    }
    let p = &model.params;
    let inertia = p.inertia();
    let dvel = f / p.mass - body.omega.cross(&body.velocity);
    let domega = if hold {
        Vec3::zeros()
    } else {
        let rhs = m - body.omega.cross(&(inertia * body.omega));
        inertia
            .cholesky()
            .map(|c| c.solve(&rhs))
            .ok_or_else(|| abort(body, "inertia is not positive definite".into()))?
    };
    let dpos = ground_to_body_unchecked(&body.euler).transpose() * body.velocity;
    Ok((
        Derivative { position: dpos, velocity: dvel, euler: deuler, omega: domega },
        loads,
    ))
}

/// One classical RK4 step of length `h`, followed by Euler-angle
/// normalisation, the wing lag update and the hull-clear check.
pub fn step(state: &SimState, scenario: &Scenario, h: f64) -> Result<SimState> {
    let model = &scenario.model;
    let (s, k, c, hold) = (&state.body, state.wing, state.cleared, state.hold(scenario));
    let (k1, _) = derivatives(s, k, c, hold, model)?;
    let (k2, _) = derivatives(&advance(s, &k1, 0.5 * h), k, c, hold, model)?;
    let (k3, _) = derivatives(&advance(s, &k2, 0.5 * h), k, c, hold, model)?;
    let (k4, _) = derivatives(&advance(s, &k3, h), k, c, hold, model)?;
    let combo = Derivative {
        position: (k1.position + 2.0 * k2.position + 2.0 * k3.position + k4.position) / 6.0,
        velocity: (k1.velocity + 2.0 * k2.velocity + 2.0 * k3.velocity + k4.velocity) / 6.0,
        euler: (k1.euler + 2.0 * k2.euler + 2.0 * k3.euler + k4.euler) / 6.0,
        omega: (k1.omega + 2.0 * k2.omega + 2.0 * k3.omega + k4.omega) / 6.0,
    };
    let body = advance(s, &combo, h).normalized();
    if !body.is_finite() {
        return Err(abort(s, "state became non-finite".into()));
    }
    let cleared = c || submersion(&body, &model.params).fraction == 0.0;
    Ok(SimState {
        body,
        wing: lag_step(k, state.commanded, h, scenario.actuator.time_constant),
        commanded: state.commanded,
        cleared,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    SurfaceExit,
    /// The whole hull is out of the water for the first time.
    HullClear,
    SurfaceEntry,
    Apogee,
    WingCommand { index: usize, opening_deg: f64 },
    MaxDistance,
    MaxTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Event {
    #[serde(flatten)]
    pub kind: EventKind,
    pub time: f64,
    pub state: BodyState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    SurfaceContact,
    MaxDistance,
    MaxTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sample {
    pub state: BodyState,
    /// `None` when the speed is too low for airflow angles.
    pub alpha: Option<f64>,
    pub speed: f64,
    pub phase: Phase,
    /// Opening angle, rad.
    pub wing: f64,
    pub loads: LoadBreakdown,
}

impl Sample {
    pub fn time(&self) -> f64 {
        self.state.time
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    /// Horizontal displacement from surface exit (or launch) to the end, m.
    pub glide_distance: f64,
    /// m
    pub max_altitude: f64,
    /// From surface exit (or launch) to the end, s.
    pub flight_time: f64,
    pub apogee_time: Option<f64>,
    /// Horizontal displacement from the first apogee to the end, m.
    pub post_apogee_distance: f64,
    pub termination: TerminationReason,
    /// False when the run hit `max_time` before another termination rule.
    pub valid: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub events: Vec<Event>,
    pub termination: TerminationReason,
    pub summary: Summary,
}

impl Trajectory {
    pub fn final_state(&self) -> &BodyState {
        &self.samples[self.samples.len() - 1].state
    }

    pub fn events_of(&self, pred: impl Fn(&EventKind) -> bool) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(move |e| pred(&e.kind))
    }
}

fn horizontal(a: &BodyState, b: &BodyState) -> f64 {
    (b.position.x - a.position.x).hypot(b.position.y - a.position.y)
}

/// Recomputes the summary from samples and events.
pub fn summarize(samples: &[Sample], events: &[Event], termination: TerminationReason) -> Summary {
    let first = &samples[0].state;
    let last = &samples[samples.len() - 1].state;
    let start = events
        .iter()
        .find(|e| e.kind == EventKind::SurfaceExit)
        .map_or(first, |e| &e.state);
    let apogee = events.iter().find(|e| e.kind == EventKind::Apogee);
    let max_altitude = samples
        .iter()
        .map(|s| s.state.altitude())
        .chain(events.iter().map(|e| e.state.altitude()))
        .fold(f64::NEG_INFINITY, f64::max);
    Summary {
        glide_distance: horizontal(start, last),
        max_altitude,
        flight_time: last.time - start.time,
        apogee_time: apogee.map(|e| e.time),
        post_apogee_distance: apogee.map_or(0.0, |e| horizontal(&e.state, last)),
        termination,
        valid: termination != TerminationReason::MaxTime,
    }
}

fn sample(state: &SimState, model: &ForceModel) -> Sample {
    let loads = exit_totals(&state.body, state.wing, state.cleared, model);
    let flow = airflow_angles(&state.body.velocity).ok();
    Sample {
        state: state.body,
        alpha: flow.map(|f| f.alpha),
        speed: state.body.velocity.norm(),
        phase: loads.phase,
        wing: state.wing,
        loads,
    }
}

/// Scalar event functions evaluated on one state.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Watch {
    Exit,
    Clear,
    Entry,
    Apogee,
    Command(usize),
    Distance(f64),
}

struct Runner<'a> {
    scenario: &'a Scenario,
    origin: BodyState,
    pending: Vec<bool>,
    apogee_seen: bool,
}

impl Runner<'_> {
    fn watches(&self, state: &SimState) -> Vec<Watch> {
        let mut w = vec![Watch::Exit, Watch::Apogee, Watch::Entry];
        if !state.cleared {
            w.push(Watch::Clear);
        }
        for (i, c) in self.scenario.schedule.commands.iter().enumerate() {
            if self.pending[i] && !matches!(c.trigger, Trigger::AtApogee) {
                w.push(Watch::Command(i));
            }
        }
        if let Some(d) = self.scenario.termination.max_distance {
            w.push(Watch::Distance(d));
        }
        w
    }

    fn value(&self, w: Watch, s: &BodyState) -> (f64, Direction) {
        match w {
            Watch::Exit => (s.altitude(), Direction::Up),
            Watch::Entry => (s.altitude(), Direction::Down),
            Watch::Clear => (
                submersion(s, &self.scenario.model.params).fraction,
                Direction::Down,
            ),
            Watch::Apogee => (s.climb_rate(), Direction::Down),
            Watch::Command(i) => match self.scenario.schedule.commands[i].trigger {
                Trigger::AtTime { time } => (s.time - time, Direction::Up),
                Trigger::AtAltitude { altitude, direction } => (s.altitude() - altitude, direction),
                Trigger::AtApogee => unreachable!("apogee commands ride on the apogee watch"),
            },
            Watch::Distance(d) => (horizontal(&self.origin, s) - d, Direction::Up),
        }
    }

    fn crossed(&self, w: Watch, a: &BodyState, b: &BodyState) -> bool {
        let (g0, dir) = self.value(w, a);
        let (g1, _) = self.value(w, b);
        dir.crossed(g0, g1)
    }

    /// Smallest sub-step (to within the tolerance) after which `w` has
    /// crossed, starting from `s0`.
    fn bisect(&self, w: Watch, s0: &SimState, h: f64) -> Result<f64> {
        let (mut lo, mut hi) = (0.0, h);
        while hi - lo > EVENT_TOLERANCE {
            let mid = 0.5 * (lo + hi);
            let sm = step(s0, self.scenario, mid)?;
            if self.crossed(w, &s0.body, &sm.body) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }
}

/// Integrates a scenario to termination.
///
/// Reaching `max_time` is not an error; the summary is then flagged invalid.
pub fn simulate(scenario: &Scenario) -> Result<Trajectory> {
    scenario.validate()?;
    let model = &scenario.model;
    let dt = scenario.dt;
    let mut state = scenario.initial_state();
    let t0 = state.body.time;
    let mut runner = Runner {
        scenario,
        origin: state.body,
        pending: vec![true; scenario.schedule.commands.len()],
        apogee_seen: false,
    };
    let mut events = Vec::new();
    let mut samples = vec![sample(&state, model)];

    let fire_command = |i: usize, state: &mut SimState, events: &mut Vec<Event>, pending: &mut Vec<bool>| {
        let c = scenario.schedule.commands[i];
        state.commanded = c.opening_deg.to_radians();
        pending[i] = false;
        events.push(Event {
            kind: EventKind::WingCommand { index: i, opening_deg: c.opening_deg },
            time: state.body.time,
            state: state.body,
        });
    };

    if state.body.altitude() == 0.0 && state.body.climb_rate() > 0.0 {
        events.push(Event { kind: EventKind::SurfaceExit, time: t0, state: state.body });
    }
    for (i, c) in scenario.schedule.commands.iter().enumerate() {
        if let Trigger::AtTime { time } = c.trigger {
            if time <= t0 {
                fire_command(i, &mut state, &mut events, &mut runner.pending);
            }
        }
    }

    let mut n: u64 = 0;
    let termination = 'outer: loop {
        if state.body.time >= scenario.termination.max_time - 0.5 * EVENT_TOLERANCE {
            events.push(Event { kind: EventKind::MaxTime, time: state.body.time, state: state.body });
            break TerminationReason::MaxTime;
        }
        let mut remaining = dt.min(scenario.termination.max_time - state.body.time);
        let full_step = remaining == dt;
        while remaining > 1e-12 {
            let trial = step(&state, scenario, remaining)?;
            let hits: Vec<Watch> = runner
                .watches(&state)
                .into_iter()
                .filter(|&w| runner.crossed(w, &state.body, &trial.body))
                .collect();
            if hits.is_empty() {
                state = trial;
                remaining = 0.0;
                break;
            }
            let mut h_star = remaining;
            for &w in &hits {
                h_star = h_star.min(runner.bisect(w, &state, remaining)?);
            }
            let next = step(&state, scenario, h_star)?;
            let fired: Vec<Watch> = hits
                .into_iter()
                .filter(|&w| runner.crossed(w, &state.body, &next.body))
                .collect();
            state = next;
            remaining -= h_star;

            let mut stop = None;
            for w in fired {
                let kind = match w {
                    Watch::Exit => Some(EventKind::SurfaceExit),
                    Watch::Clear => Some(EventKind::HullClear),
                    Watch::Entry => Some(EventKind::SurfaceEntry),
                    Watch::Apogee => Some(EventKind::Apogee),
                    Watch::Distance(_) => Some(EventKind::MaxDistance),
                    Watch::Command(_) => None,
                };
                if let Some(kind) = kind {
                    events.push(Event { kind, time: state.body.time, state: state.body });
                }
                match w {
                    Watch::Apogee if !runner.apogee_seen => {
                        runner.apogee_seen = true;
                        for (i, c) in scenario.schedule.commands.iter().enumerate() {
                            if runner.pending[i] && matches!(c.trigger, Trigger::AtApogee) {
                                fire_command(i, &mut state, &mut events, &mut runner.pending);
                            }
                        }
                    }
                    Watch::Command(i) => fire_command(i, &mut state, &mut events, &mut runner.pending),
                    Watch::Entry if scenario.termination.surface_contact => {
                        stop = Some(TerminationReason::SurfaceContact)
                    }
                    Watch::Distance(_) => stop = Some(TerminationReason::MaxDistance),
                    _ => {}
                }
            }
            if let Some(reason) = stop {
                samples.push(sample(&state, model));
                break 'outer reason;
            }
        }
        n += 1;
        if full_step {
            // keep the sample grid exact despite event sub-steps
            state.body.time = t0 + n as f64 * dt;
        }
        if n.is_multiple_of(scenario.record_every as u64) {
            samples.push(sample(&state, model));
        }
    };

    if samples[samples.len() - 1].state.time != state.body.time {
        samples.push(sample(&state, model));
    }
    // an event landing within rounding of a grid point can tie the last two
    samples.dedup_by(|b, a| b.state.time <= a.state.time);
    let summary = summarize(&samples, &events, termination);
    if !summary.valid {
        log::warn!("run reached max_time {} s without terminating", scenario.termination.max_time);
    }
    Ok(Trajectory { samples, events, termination, summary })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hydro::ForceToggles;
    use approx::assert_relative_eq;

    fn vacuum(speed: f64, deg: f64, z: f64) -> Scenario {
        Scenario {
            launch: Launch { position: [0.0, 0.0, z], speed, discharge_deg: deg },
            schedule: WingSchedule::constant(0.0),
            ..Scenario::default()
        }
        .vacuum()
    }

    #[test]
    fn free_fall_time() {
        // speed zero, launch pitch irrelevant to the fall
        let sc = vacuum(0.0, 10.0, -1.0);
        let traj = simulate(&sc).unwrap();
        assert_eq!(traj.termination, TerminationReason::SurfaceContact);
        let t = traj.final_state().time;
        assert!((t - (2.0f64 / 9.81).sqrt()).abs() < 1e-4, "t = {t}");
        assert!((t - 0.4515).abs() < 1e-4);
    }

    #[test]
    fn ballistic_parabola() {
        let sc = vacuum(10.0, 30.0, 0.0);
        let mut s = sc.initial_state();
        let (vx, vz) = (10.0 * 30f64.to_radians().cos(), 10.0 * 30f64.to_radians().sin());
        for _ in 0..1000 {
            s = step(&s, &sc, 1e-3).unwrap();
        }
        let t = s.body.time;
        assert_relative_eq!(t, 1.0, epsilon = 1e-12);
        assert!((s.body.position.x - vx * t).abs() < 1e-8);
        assert!((s.body.altitude() - (vz * t - 0.5 * 9.81 * t * t)).abs() < 1e-8);
        assert_eq!(s.body.omega, Vec3::zeros());
    }

    #[test]
    fn zero_derivative_is_fixed_point() {
        let mut sc = Scenario::default();
        sc.model.toggles = ForceToggles::vacuum();
        sc.model.env.g = 0.0;
        let mut s = sc.initial_state();
        s.body.velocity = Vec3::zeros();
        s.body.position.z = -3.0;
        let next = step(&s, &sc, 1e-3).unwrap();
        assert_eq!(next.body.position, s.body.position);
        assert_eq!(next.body.euler, s.body.euler);
        assert_eq!(next.body.velocity, Vec3::zeros());
    }

    #[test]
    fn vacuum_derivative_is_gravity() {
        let m = ForceModel { toggles: ForceToggles::vacuum(), ..ForceModel::default() };
        let mut s = BodyState::at_rest(Vec3::new(0.0, 0.0, -2.0));
        s.euler = Vec3::new(0.1, 0.3, -0.2);
        s.velocity = Vec3::new(5.0, 0.2, -1.0);
        let (d, _) = derivatives(&s, 0.5, true, false, &m).unwrap();
        let g = ground_to_body_unchecked(&s.euler) * Vec3::new(0.0, 0.0, 9.81);
        assert_relative_eq!(d.velocity, g, epsilon = 1e-14);
        assert_eq!(d.omega, Vec3::zeros());
    }

    #[test]
    fn derivative_matches_hand_assembly() {
        let m = ForceModel::default();
        let mut s = BodyState::at_rest(Vec3::new(1.0, 0.0, -1.5));
        s.euler = Vec3::new(0.05, 0.2, 0.1);
        s.velocity = Vec3::new(8.0, 0.3, 0.7);
        s.omega = Vec3::new(0.4, -0.6, 0.2);
        let (d, loads) = derivatives(&s, 1.0, true, false, &m).unwrap();
        let i = m.params.inertia();
        let (f, mo) = (loads.force(), loads.moment());
        // diagonal inertia: explicit component form
        let (ix, iy, iz) = (i[(0, 0)], i[(1, 1)], i[(2, 2)]);
        let (p, q, r) = (s.omega.x, s.omega.y, s.omega.z);
        let (u, v, w) = (s.velocity.x, s.velocity.y, s.velocity.z);
        let pd = (mo.x - (iz - iy) * q * r) / ix;
        let qd = (mo.y - (ix - iz) * r * p) / iy;
        let rd = (mo.z - (iy - ix) * p * q) / iz;
        assert_relative_eq!(d.omega, Vec3::new(pd, qd, rd), epsilon = 1e-10);
        let ud = f.x / m.params.mass - (q * w - r * v);
        let vd = f.y / m.params.mass - (r * u - p * w);
        let wd = f.z / m.params.mass - (p * v - q * u);
        assert_relative_eq!(d.velocity, Vec3::new(ud, vd, wd), epsilon = 1e-10);
    }

    #[test]
    fn rk4_converges_at_fourth_order() {
        // torque-free tumbling in vacuum: smooth and fully nonlinear
        let sc = vacuum(10.0, 30.0, -50.0);
        let run = |h: f64| {
            let mut s = sc.initial_state();
            s.body.omega = Vec3::new(0.6, 1.1, -0.4);
            let n = (0.4 / h).round() as usize;
            for _ in 0..n {
                s = step(&s, &sc, h).unwrap();
            }
            s.body
        };
        let (a, b, c) = (run(0.04), run(0.02), run(0.01));
        let err = |x: &BodyState, y: &BodyState| {
            (x.position - y.position).norm() + (x.euler - y.euler).norm() + (x.omega - y.omega).norm()
        };
        let order = (err(&a, &b) / err(&b, &c)).log2();
        assert!(order > 3.8, "order {order}");
    }

    #[test]
    fn deterministic() {
        let sc = Scenario::default();
        let a = simulate(&sc).unwrap();
        let b = simulate(&sc).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn vacuum_energy_conserved() {
        let mut sc = vacuum(6.0, 40.0, -200.0);
        sc.termination.max_time = 5.0;
        sc.launch.discharge_deg = 40.0;
        let traj = simulate(&sc).unwrap();
        let m = &sc.model.params;
        let inertia = m.inertia();
        let energy = |s: &BodyState| {
            0.5 * m.mass * s.velocity.norm_squared()
                + 0.5 * s.omega.dot(&(inertia * s.omega))
                + m.mass * 9.81 * s.altitude()
        };
        let e0 = energy(&traj.samples[0].state);
        for s in &traj.samples {
            assert!((energy(&s.state) - e0).abs() <= 1e-6 * e0.abs());
        }
        assert!(!traj.summary.valid);
    }

    #[test]
    fn events_and_phases_consistent() {
        let traj = simulate(&Scenario::default()).unwrap();
        let apogee = traj.events_of(|k| *k == EventKind::Apogee).next().unwrap().time;
        let entry = traj.events_of(|k| *k == EventKind::SurfaceEntry).next().unwrap().time;
        assert!(apogee < entry);
        assert_eq!(traj.events[0].kind, EventKind::SurfaceExit);
        for w in traj.samples.windows(2) {
            assert!(w[1].time() > w[0].time());
        }
        for s in &traj.samples {
            assert_eq!(s.phase, Phase::from_fraction(s.loads.submersion.fraction));
        }
        assert!(traj.final_state().altitude().abs() < 1e-3);
        assert_eq!(summarize(&traj.samples, &traj.events, traj.termination), traj.summary);
    }

    #[test]
    fn schedule_commands_fire() {
        let mut sc = Scenario::default();
        sc.schedule = WingSchedule {
            initial_deg: 90.0,
            commands: vec![
                WingCommand { trigger: Trigger::AtApogee, opening_deg: 0.0 },
                WingCommand { trigger: Trigger::AtTime { time: 0.1 }, opening_deg: 60.0 },
                WingCommand {
                    trigger: Trigger::AtAltitude { altitude: 0.5, direction: Direction::Up },
                    opening_deg: 80.0,
                },
            ],
        };
        let traj = simulate(&sc).unwrap();
        let cmds: Vec<_> = traj
            .events_of(|k| matches!(k, EventKind::WingCommand { .. }))
            .collect();
        assert_eq!(cmds.len(), 3);
        let t_cmd = cmds.iter().find(|e| matches!(e.kind, EventKind::WingCommand { index: 1, .. })).unwrap().time;
        assert!((t_cmd - 0.1).abs() <= EVENT_TOLERANCE + 1e-12);
        let last = traj.samples.last().unwrap();
        assert!(last.wing < 0.1);
    }

    #[test]
    fn ground_effect_inactive_when_high() {
        // clearance stays above b/2 when launched from altitude and stopped early
        let mut sc = Scenario::default();
        sc.launch.position = [0.0, 0.0, -5.0];
        sc.termination.max_time = 1.0;
        let mut on = sc.clone();
        on.model.env.ground_effect_enabled = true;
        let a = simulate(&sc).unwrap();
        let b = simulate(&on).unwrap();
        assert!(a.samples.iter().all(|s| s.state.altitude() > 0.5 * 0.4754));
        assert_eq!(a.samples.len(), b.samples.len());
        for (x, y) in a.samples.iter().zip(&b.samples) {
            assert_eq!(x.state, y.state);
        }
    }

    #[test]
    fn halving_dt_changes_distance_little() {
        let mut sc = Scenario::default();
        let coarse = simulate(&sc).unwrap().summary.glide_distance;
        sc.dt = 5e-4;
        sc.record_every = 20;
        let fine = simulate(&sc).unwrap().summary.glide_distance;
        assert!(((coarse - fine) / fine).abs() < 1e-3, "{coarse} vs {fine}");
    }

    #[test]
    fn summary_edge_cases() {
        let sc = vacuum(0.0, 10.0, -1.0);
        let s = sc.initial_state();
        let single = vec![sample(&s, &sc.model)];
        let sum = summarize(&single, &[], TerminationReason::MaxTime);
        assert_eq!((sum.glide_distance, sum.post_apogee_distance, sum.flight_time), (0.0, 0.0, 0.0));
        assert!(!sum.valid);

        // synthetic parabola with apex 2 m
        let samples: Vec<Sample> = (0..=40)
            .map(|i| {
                let t = i as f64 * 0.05;
                let mut st = s;
                st.body.time = t;
                st.body.position = Vec3::new(t, 0.0, -(2.0 - (t - 1.0).powi(2) * 2.0));
                sample(&st, &sc.model)
            })
            .collect();
        let sum = summarize(&samples, &[], TerminationReason::SurfaceContact);
        assert_eq!(sum.max_altitude, 2.0);
    }

    #[test]
    fn rejects_bad_scenarios() {
        let mut sc = Scenario::default();
        sc.launch.discharge_deg = 90.0;
        assert!(simulate(&sc).is_err());
        let mut sc = Scenario::default();
        sc.dt = 0.0;
        assert!(sc.validate().is_err());
        let mut sc = Scenario::default();
        sc.schedule.commands = vec![
            WingCommand { trigger: Trigger::AtTime { time: 1.0 }, opening_deg: 0.0 },
            WingCommand { trigger: Trigger::AtTime { time: 0.5 }, opening_deg: 0.0 },
        ];
        assert!(sc.validate().is_err());
    }
}
