use std::io::Write;
use std::path::Path;

use crate::config::VehicleConfig;
use crate::error::{Error, Result};
use crate::sim::dynamics::{step_dynamics, ControlInput, VehicleState};
use crate::sim::lidar::{Lidar, LidarScan};
use crate::track::TrackMap;

/// Search window (m) around the previous progress when re-projecting.
const PROGRESS_WINDOW: f64 = 3.0;

/// What an agent sees when it is asked for a control.
#[derive(Debug)]
pub struct Observation<'a> {
    pub time: f64,
    pub agent: usize,
    /// States of every agent, including the observer at index `agent`.
    pub states: &'a [VehicleState],
    pub scan: Option<&'a LidarScan>,
}

impl Observation<'_> {
    pub fn ego(&self) -> &VehicleState {
        &self.states[self.agent]
    }

    pub fn opponents(&self) -> impl Iterator<Item = &VehicleState> {
        self.states.iter().enumerate().filter(move |(i, _)| *i != self.agent).map(|(_, s)| s)
    }
}

/// A policy callback driven by the simulator at its replan period.
pub trait Driver: Send {
    fn act(&mut self, obs: &Observation<'_>) -> Result<ControlInput>;

    fn wants_scan(&self) -> bool {
        false
    }
}

impl<F> Driver for F
where
    F: FnMut(&Observation<'_>) -> Result<ControlInput> + Send,
{
    fn act(&mut self, obs: &Observation<'_>) -> Result<ControlInput> {
        self(obs)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StampedScan {
    /// Index into the owning trajectory's `states`.
    pub index: usize,
    pub scan: LidarScan,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<VehicleState>,
    pub dt: f64,
    /// Time of `states[0]`.
    pub t0: f64,
    pub scans: Vec<StampedScan>,
}

impl Trajectory {
    pub fn first(&self) -> &VehicleState {
        &self.states[0]
    }

    pub fn last(&self) -> &VehicleState {
        self.states.last().expect("trajectory is never empty")
    }

    pub fn duration(&self) -> f64 {
        (self.states.len() - 1) as f64 * self.dt
    }

    /// Appends `next`, whose first state repeats this trajectory's last one.
    pub fn extend_with(&mut self, next: &Trajectory) {
        let offset = self.states.len() - 1;
        self.states.extend_from_slice(&next.states[1..]);
        self.scans.extend(next.scans.iter().map(|s| StampedScan { index: s.index + offset, scan: s.scan.clone() }));
    }
}

#[derive(Debug, Clone)]
pub struct Segment {
    pub trajectories: Vec<Trajectory>,
    pub collisions: Vec<bool>,
    /// Step index (global) at which the episode froze, if it did.
    pub frozen_at: Option<usize>,
}

/// Fixed-step multi-agent simulation whose state can be cloned and resumed.
#[derive(Debug, Clone)]
pub struct Simulation<'a> {
    track: &'a TrackMap,
    params: &'a VehicleConfig,
    lidar: Lidar,
    footprint: f64,
    replan_ticks: usize,
    record_scans: bool,
    states: Vec<VehicleState>,
    controls: Vec<ControlInput>,
    step: usize,
    collisions: Vec<bool>,
    frozen_at: Option<usize>,
}

impl<'a> Simulation<'a> {
    /// `initial[i].s` is taken as the agent's unwrapped progress.
    pub fn new(
        track: &'a TrackMap,
        params: &'a VehicleConfig,
        footprint: f64,
        replan_period: f64,
        initial: Vec<VehicleState>,
    ) -> Result<Self> {
        let replan_ticks = ticks(replan_period, params.dt)?;
        if initial.is_empty() || initial.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidArgument("initial states must be non-empty and finite".into()));
        }
        let n = initial.len();
        let mut sim = Self {
            track,
            params,
            lidar: Lidar::new(params.lidar_beams, params.lidar_fov, params.lidar_max_range),
            footprint,
            replan_ticks,
            record_scans: false,
            states: initial,
            controls: vec![ControlInput::stop(); n],
            step: 0,
            collisions: vec![false; n],
            frozen_at: None,
        };
        sim.check_collisions();
        Ok(sim)
    }

    pub fn with_scans(mut self, record: bool) -> Self {
        self.record_scans = record;
        self
    }

    pub fn set_record_scans(&mut self, record: bool) {
        self.record_scans = record;
    }

    pub fn states(&self) -> &[VehicleState] {
        &self.states
    }

    pub fn collisions(&self) -> &[bool] {
        &self.collisions
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen_at.is_some()
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.params.dt
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn track(&self) -> &'a TrackMap {
        self.track
    }

    fn check_collisions(&mut self) {
        let n = self.states.len();
        for i in 0..n {
            let s = &self.states[i];
            if self.track.is_collision(s.x, s.y, self.footprint) {
                self.collisions[i] = true;
            }
            for j in i + 1..n {
                let o = &self.states[j];
                if (s.x - o.x).hypot(s.y - o.y) < 2.0 * self.footprint {
                    self.collisions[i] = true;
                    self.collisions[j] = true;
                }
            }
        }
        if self.frozen_at.is_none() && self.collisions.iter().any(|&c| c) {
            self.frozen_at = Some(self.step);
        }
    }

    fn scan_for(&self, i: usize) -> LidarScan {
        let s = &self.states[i];
        let discs: Vec<[f64; 3]> = self
            .states
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, o)| [o.x, o.y, self.footprint])
            .collect();
        self.lidar.scan(self.track.grid(), s.x, s.y, s.psi, &discs)
    }

    /// Runs `duration` seconds (a multiple of dt) with one driver per agent.
    pub fn run(&mut self, drivers: &mut [&mut dyn Driver], duration: f64) -> Result<Segment> {
        let n = self.states.len();
        if drivers.len() != n {
            return Err(Error::InvalidArgument(format!("{} drivers for {} agents", drivers.len(), n)));
        }
        let steps = ticks(duration, self.params.dt)?;
        let dt = self.params.dt;
        let t0 = self.time();
        let mut trajs: Vec<Trajectory> = self
            .states
            .iter()
            .map(|s| {
                let mut states = Vec::with_capacity(steps + 1);
                states.push(*s);
                Trajectory { states, dt, t0, scans: Vec::new() }
            })
            .collect();
        let length = self.track.length();
        for k in 0..steps {
            if self.frozen_at.is_some() {
                break;
            }
            if self.step.is_multiple_of(self.replan_ticks) {
                for i in 0..n {
                    let scan = (self.record_scans || drivers[i].wants_scan()).then(|| self.scan_for(i));
                    let obs = Observation { time: self.time(), agent: i, states: &self.states, scan: scan.as_ref() };
                    self.controls[i] = drivers[i].act(&obs)?;
                    if self.record_scans {
                        if let Some(scan) = scan {
                            trajs[i].scans.push(StampedScan { index: k, scan });
                        }
                    }
                }
            }
            for i in 0..n {
                let prev = self.states[i];
                let mut next = step_dynamics(&prev, self.controls[i], dt, self.params)?;
                let wrapped = prev.s.rem_euclid(length);
                let f = self.track.to_frenet_near(next.x, next.y, wrapped, PROGRESS_WINDOW);
                let mut ds = f.s - wrapped;
                if ds > 0.5 * length {
                    ds -= length;
                } else if ds < -0.5 * length {
                    ds += length;
                }
                next.s = prev.s + ds;
                self.states[i] = next;
                trajs[i].states.push(next);
            }
            self.step += 1;
            self.check_collisions();
        }
        Ok(Segment { trajectories: trajs, collisions: self.collisions.clone(), frozen_at: self.frozen_at })
    }
}

fn ticks(duration: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) || !(duration >= 0.0) {
        return Err(Error::InvalidArgument(format!("bad duration {duration} / dt {dt}")));
    }
    let n = (duration / dt).round();
    if (n * dt - duration).abs() > 1e-9 * duration.max(1.0) {
        return Err(Error::InvalidArgument(format!("duration {duration} is not a multiple of dt {dt}")));
    }
    Ok(n as usize)
}

/// Writes `t,agent,x,y,psi,v,delta,s` rows for every agent.
pub fn write_trajectories_csv(path: &Path, trajs: &[Trajectory]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "t,agent,x,y,psi,v,delta,s").map_err(io)?;
    for (a, tr) in trajs.iter().enumerate() {
        for (k, s) in tr.states.iter().enumerate() {
            writeln!(
                w,
                "{:.4},{},{},{},{},{},{},{}",
                tr.t0 + k as f64 * tr.dt,
                a,
                s.x,
                s.y,
                s.psi,
                s.v,
                s.delta,
                s.s
            )
            .map_err(io)?;
        }
    }
    w.flush().map_err(io)
}
