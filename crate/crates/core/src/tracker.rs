//! Timed step-track cycle.
//!
//! Each cycle runs four phases: acquire samples while driving a rectangular
//! circuit around the current pointing, estimate the beacon peak, move to it,
//! and wait for the next cycle. All commands are snapped to the resolver grid
//! so that a settled antenna reads back exactly what was commanded.

use serde::{Deserialize, Serialize};

use crate::antenna_sim::{AntennaState, BeaconSample};
use crate::beacon_model::DEFAULT_K_Y;
use crate::error::{Error, Result};
use crate::estimators::{
    coefficients_at, fit_samples_about, recover_peak, BetaVector, EstimatorKind, FitSettings,
    PeakEstimate, RlsState, DEFAULT_RLS_DELTA,
};
use crate::telemetry::Phase;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingMode {
    /// Sample only while stopped at the corners.
    CornerOnly,
    /// Sample every tick of the acquisition phase.
    #[default]
    Continuous,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackerConfig {
    #[serde(rename = "rect_half_width_az_deg", default = "defaults::half_az")]
    pub rect_half_width_az: f64,
    #[serde(rename = "rect_half_width_el_deg", default = "defaults::half_el")]
    pub rect_half_width_el: f64,
    #[serde(rename = "dwell_time_s", default = "defaults::dwell")]
    pub dwell_time: f64,
    #[serde(rename = "sample_interval_s", default = "defaults::sample_interval")]
    pub sample_interval: f64,
    #[serde(rename = "cycle_period_s", default = "defaults::cycle_period")]
    pub cycle_period: f64,
    #[serde(default)]
    pub sampling_mode: SamplingMode,
    #[serde(default)]
    pub estimator: EstimatorKind,
    #[serde(default = "defaults::lambda")]
    pub lambda: f64,
    #[serde(rename = "rls_delta", default = "defaults::delta")]
    pub rls_delta: f64,
    #[serde(rename = "k_y_db_per_deg2", default = "defaults::k_y")]
    pub k_y: f64,
    #[serde(rename = "kx_floor_db_per_deg2", default = "defaults::kx_floor")]
    pub kx_floor: f64,
    #[serde(default = "defaults::carry")]
    pub carry_rls_state: bool,
}

mod defaults {
    pub fn half_az() -> f64 {
        0.2
    }
    pub fn half_el() -> f64 {
        0.05
    }
    pub fn dwell() -> f64 {
        1.0
    }
    pub fn sample_interval() -> f64 {
        0.02
    }
    pub fn cycle_period() -> f64 {
        600.0
    }
    pub fn lambda() -> f64 {
        0.998
    }
    pub fn delta() -> f64 {
        super::DEFAULT_RLS_DELTA
    }
    pub fn k_y() -> f64 {
        super::DEFAULT_K_Y
    }
    pub fn kx_floor() -> f64 {
        crate::beacon_model::DEFAULT_KX_FLOOR
    }
    pub fn carry() -> bool {
        true
    }
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            rect_half_width_az: defaults::half_az(),
            rect_half_width_el: defaults::half_el(),
            dwell_time: defaults::dwell(),
            sample_interval: defaults::sample_interval(),
            cycle_period: defaults::cycle_period(),
            sampling_mode: SamplingMode::default(),
            estimator: EstimatorKind::default(),
            lambda: defaults::lambda(),
            rls_delta: defaults::delta(),
            k_y: defaults::k_y(),
            kx_floor: defaults::kx_floor(),
            carry_rls_state: defaults::carry(),
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("rect_half_width_az_deg", self.rect_half_width_az),
            ("rect_half_width_el_deg", self.rect_half_width_el),
            ("sample_interval_s", self.sample_interval),
            ("cycle_period_s", self.cycle_period),
            ("rls_delta", self.rls_delta),
            ("kx_floor_db_per_deg2", self.kx_floor),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.dwell_time >= 0.0) {
            return Err(Error::Config(format!(
                "dwell_time_s must be >= 0, got {}",
                self.dwell_time
            )));
        }
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return Err(Error::Config(format!(
                "lambda must be in (0, 1], got {}",
                self.lambda
            )));
        }
        if !(self.k_y < 0.0) {
            return Err(Error::Config(format!(
                "k_y_db_per_deg2 must be negative, got {}",
                self.k_y
            )));
        }
        Ok(())
    }

    /// Upper bound on the time to drive the circuit from its center, including dwells.
    pub fn pattern_duration(&self, plant: &AntennaState) -> f64 {
        let leg = |daz: f64, del: f64| (daz / plant.az_slew_rate).max(del / plant.el_slew_rate);
        let (w, h) = (self.rect_half_width_az, self.rect_half_width_el);
        let travel = leg(w, h) + 2.0 * leg(2.0 * w, 0.0) + 2.0 * leg(0.0, 2.0 * h);
        // each leg may need one extra tick to settle on the resolver count
        let ticks = 5.0 * (self.dwell_ticks() as f64 + 2.0);
        travel + ticks * self.sample_interval
    }

    fn dwell_ticks(&self) -> usize {
        ((self.dwell_time / self.sample_interval).round() as usize).max(1)
    }

    fn fit_settings(&self) -> FitSettings {
        FitSettings {
            estimator: self.estimator,
            k_y: self.k_y,
            kx_floor: self.kx_floor,
            lambda: self.lambda,
            delta: self.rls_delta,
        }
    }
}

/// The closed rectangular circuit around `center`: four corners visited
/// counter-clockwise in (azimuth, elevation), starting from the corner
/// nearest `current` and returning to it.
pub fn plan_pattern_from(
    center: (f64, f64),
    current: (f64, f64),
    config: &TrackerConfig,
    plant: &AntennaState,
) -> Result<Vec<(f64, f64)>> {
    let (w, h) = (config.rect_half_width_az, config.rect_half_width_el);
    let corners = [
        (center.0 - w, center.1 - h),
        (center.0 + w, center.1 - h),
        (center.0 + w, center.1 + h),
        (center.0 - w, center.1 + h),
    ];
    for &(azimuth, elevation) in &corners {
        if plant.check_limits(azimuth, elevation).is_err() {
            return Err(Error::PatternInfeasible { azimuth, elevation });
        }
    }
    let dist = |c: &(f64, f64)| (c.0 - current.0).hypot(c.1 - current.1);
    // ties (a centered start) resolve to the lowest index
    let start = (0..4)
        .min_by(|&a, &b| dist(&corners[a]).total_cmp(&dist(&corners[b])))
        .unwrap_or(0);
    Ok((0..5).map(|i| corners[(start + i) % 4]).collect())
}

/// [`plan_pattern_from`] with the antenna at the center.
pub fn plan_pattern(
    center: (f64, f64),
    config: &TrackerConfig,
    plant: &AntennaState,
) -> Result<Vec<(f64, f64)>> {
    plan_pattern_from(center, center, config, plant)
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrackerEventKind {
    CycleStarted { center: (f64, f64) },
    /// The circuit would leave the axis limits; the cycle is skipped.
    PatternInfeasible(Error),
    Estimated { estimate: PeakEstimate, command: (f64, f64), samples: usize },
    /// Estimation failed; the antenna is sent back to the pattern center.
    Aborted(Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackerEvent {
    pub t: f64,
    pub cycle_index: u64,
    pub kind: TrackerEventKind,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepOutput {
    pub command: Option<(f64, f64)>,
    pub events: Vec<TrackerEvent>,
}

#[derive(Debug, Clone, PartialEq)]
enum Collected {
    Batch(Vec<BeaconSample>),
    Recursive { state: RlsState, count: usize },
}

impl Collected {
    fn count(&self) -> usize {
        match self {
            Collected::Batch(v) => v.len(),
            Collected::Recursive { count, .. } => *count,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Leg {
    Travelling,
    Dwelling { ticks_left: usize },
}

/// Mutable state of the tracking loop.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackerState {
    pub phase: Phase,
    pub pattern_center: (f64, f64),
    pub cycle_index: u64,
    pub cycle_start: f64,
    pub next_cycle_time: f64,
    pub last_estimate: Option<PeakEstimate>,
    waypoints: Vec<(f64, f64)>,
    waypoint: usize,
    leg: Leg,
    collected: Collected,
    move_target: (f64, f64),
    reference_elevation: f64,
}

impl TrackerState {
    pub fn samples_collected(&self) -> usize {
        self.collected.count()
    }
}

pub struct Tracker {
    config: TrackerConfig,
    state: TrackerState,
}

impl Tracker {
    /// A tracker idling in `Wait` whose first cycle starts at `start_time`.
    pub fn new(config: TrackerConfig, start_time: f64) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            state: TrackerState {
                phase: Phase::Wait,
                pattern_center: (0.0, 0.0),
                cycle_index: 0,
                cycle_start: start_time,
                next_cycle_time: start_time,
                last_estimate: None,
                waypoints: Vec::new(),
                waypoint: 0,
                leg: Leg::Travelling,
                collected: Collected::Batch(Vec::new()),
                move_target: (0.0, 0.0),
                reference_elevation: 0.0,
            },
        })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    pub fn state(&self) -> &TrackerState {
        &self.state
    }

    pub fn phase(&self) -> Phase {
        self.state.phase
    }

    /// Processes one sample tick. Returns the plant command to issue, if any.
    pub fn step(&mut self, plant: &AntennaState, sample: &BeaconSample, now: f64) -> StepOutput {
        let mut out = StepOutput::default();
        match self.state.phase {
            Phase::Wait => {
                if now >= self.state.next_cycle_time {
                    self.begin_cycle(plant, now, &mut out);
                    if self.state.phase == Phase::Acquire {
                        self.acquire(plant, sample, &mut out);
                    }
                }
            }
            Phase::Acquire => self.acquire(plant, sample, &mut out),
            Phase::Estimate => self.estimate(plant, now, &mut out),
            Phase::Move => {
                let step = plant.resolver_step;
                let (ta, te) = self.state.move_target;
                if (sample.azimuth - ta).abs() <= step && (sample.elevation - te).abs() <= step {
                    self.state.phase = Phase::Wait;
                }
            }
        }
        out
    }

    fn begin_cycle(&mut self, plant: &AntennaState, now: f64, out: &mut StepOutput) {
        let s = &mut self.state;
        s.cycle_index += 1;
        s.cycle_start = now;
        s.next_cycle_time = now + self.config.cycle_period;
        let center = (
            plant.quantize(plant.target_azimuth),
            plant.quantize(plant.target_elevation),
        );
        s.pattern_center = center;
        let event = |kind| TrackerEvent {
            t: now,
            cycle_index: s.cycle_index,
            kind,
        };
        out.events.push(event(TrackerEventKind::CycleStarted { center }));

        let waypoints = match plan_pattern(center, &self.config, plant) {
            Ok(w) => w,
            Err(e) => {
                out.events.push(event(TrackerEventKind::PatternInfeasible(e)));
                return;
            }
        };
        s.waypoints = waypoints
            .into_iter()
            .map(|(a, e)| (plant.quantize(a), plant.quantize(e)))
            .collect();
        s.waypoint = 0;
        s.leg = Leg::Travelling;
        s.reference_elevation = center.1;
        s.collected = match self.config.estimator {
            EstimatorKind::BatchLs => Collected::Batch(Vec::new()),
            EstimatorKind::Rls => {
                let beta = match (self.config.carry_rls_state, s.last_estimate) {
                    (true, Some(prev)) => carried_beta(&prev, center, &self.config),
                    _ => BetaVector([0.0; 3]),
                };
                let state = RlsState::with_beta(self.config.lambda, self.config.rls_delta, beta)
                    .or_else(|_| RlsState::new(self.config.lambda, self.config.rls_delta))
                    .expect("validated tracker config");
                Collected::Recursive { state, count: 0 }
            }
        };
        s.phase = Phase::Acquire;
        out.command = Some(s.waypoints[0]);
    }

    fn acquire(&mut self, plant: &AntennaState, sample: &BeaconSample, out: &mut StepOutput) {
        if self.config.sampling_mode == SamplingMode::Continuous {
            self.collect(sample);
        }
        let s = &mut self.state;
        match s.leg {
            Leg::Travelling => {
                let (wa, we) = s.waypoints[s.waypoint];
                let tol = plant.resolver_step * 1e-6;
                if (sample.azimuth - wa).abs() <= tol && (sample.elevation - we).abs() <= tol {
                    s.leg = Leg::Dwelling {
                        ticks_left: self.config.dwell_ticks(),
                    };
                }
            }
            Leg::Dwelling { ticks_left } => {
                if self.config.sampling_mode == SamplingMode::CornerOnly {
                    self.collect(sample);
                }
                let s = &mut self.state;
                if ticks_left > 1 {
                    s.leg = Leg::Dwelling {
                        ticks_left: ticks_left - 1,
                    };
                } else {
                    s.waypoint += 1;
                    s.leg = Leg::Travelling;
                    if s.waypoint == s.waypoints.len() {
                        s.phase = Phase::Estimate;
                    } else {
                        out.command = Some(s.waypoints[s.waypoint]);
                    }
                }
            }
        }
    }

    fn collect(&mut self, sample: &BeaconSample) {
        let center = self.state.pattern_center;
        let local = BeaconSample {
            azimuth: sample.azimuth - center.0,
            elevation: sample.elevation - center.1,
            ..*sample
        };
        match &mut self.state.collected {
            Collected::Batch(v) => v.push(*sample),
            Collected::Recursive { state, count } => {
                let k = match coefficients_at(
                    self.config.k_y,
                    self.state.reference_elevation,
                    self.config.kx_floor,
                ) {
                    Ok(k) => k,
                    // surfaces again, as an abort, when the cycle is estimated
                    Err(_) => return,
                };
                if let Ok((next, _)) = state.update(&crate::estimators::regression_row(&local, &k)) {
                    *state = next;
                    *count += 1;
                }
            }
        }
    }

    fn estimate(&mut self, plant: &AntennaState, now: f64, out: &mut StepOutput) {
        let result = self.run_estimator().and_then(|peak| {
            let command = (plant.quantize(peak.p), plant.quantize(peak.q));
            plant.check_limits(command.0, command.1)?;
            Ok((peak, command))
        });
        let s = &mut self.state;
        let event = |kind| TrackerEvent {
            t: now,
            cycle_index: s.cycle_index,
            kind,
        };
        match result {
            Ok((estimate, command)) => {
                out.events.push(event(TrackerEventKind::Estimated {
                    estimate,
                    command,
                    samples: s.collected.count(),
                }));
                s.last_estimate = Some(estimate);
                s.move_target = command;
            }
            Err(e) => {
                out.events.push(event(TrackerEventKind::Aborted(e)));
                s.move_target = s.pattern_center;
            }
        }
        s.phase = Phase::Move;
        out.command = Some(s.move_target);
    }

    fn run_estimator(&self) -> Result<PeakEstimate> {
        let s = &self.state;
        let center = s.pattern_center;
        match &s.collected {
            Collected::Batch(samples) => {
                fit_samples_about(samples, center, s.reference_elevation, &self.config.fit_settings())
                    .map(|r| r.peak)
            }
            Collected::Recursive { state, count } => {
                if *count < 3 {
                    return Err(Error::InsufficientData { got: *count, need: 3 });
                }
                let k = coefficients_at(self.config.k_y, s.reference_elevation, self.config.kx_floor)?;
                let local = recover_peak(&state.beta, &k, self.config.kx_floor)?;
                // the elevation estimate does not depend on k_x; re-derive k_x there
                let k = coefficients_at(self.config.k_y, local.q + center.1, self.config.kx_floor)?;
                let local = recover_peak(&state.beta, &k, self.config.kx_floor)?;
                Ok(PeakEstimate {
                    p: local.p + center.0,
                    q: local.q + center.1,
                    l_pq: local.l_pq,
                })
            }
        }
    }
}

/// Previous peak expressed as a coefficient vector around a new center.
fn carried_beta(prev: &PeakEstimate, center: (f64, f64), config: &TrackerConfig) -> BetaVector {
    match coefficients_at(config.k_y, center.1, config.kx_floor) {
        Ok(k) => BetaVector::from_peak(
            &PeakEstimate {
                p: prev.p - center.0,
                q: prev.q - center.1,
                l_pq: prev.l_pq,
            },
            &k,
        ),
        Err(_) => BetaVector([0.0; 3]),
    }
}
