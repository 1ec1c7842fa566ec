//! Closed-loop simulation of a two-segment case.
//!
//! Events are processed in firing-time order. Between events the manifold
//! and EGR states are integrated at the manifold substep; targets switch at
//! the segment boundary, which is always an integration breakpoint. Engine
//! speed and equivalence ratio follow the preset ramps and are read at each
//! firing time.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::actuator::egr_actuator_step;
use super::cases::CasePreset;
use super::firing::cycle_period;
use super::manifold::{manifold_step, ManifoldState};
use super::plant::{CycleConditions, CycleRecord, Plant};
use crate::control::{ControlCommand, Controller, ControllerKind, Measurement, BOOTSTRAP_SOI};
use crate::error::{Error, Result};

/// Consecutive misfires of one cylinder that abort a run.
pub const MAX_MISFIRE_STREAK: usize = 5;

/// Result of a run together with what is needed to attribute it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutput {
    pub preset: String,
    pub controller: ControllerKind,
    pub seed: u64,
    pub duration: f64,
    /// Checksum of the plant's unperturbed coefficient set.
    pub coefficients_sha256: String,
    pub records: Vec<CycleRecord>,
}

/// Airpath state between events.
#[derive(Debug, Clone, Copy)]
struct Airpath {
    manifold: ManifoldState,
    egr: f64,
    egr_target: f64,
    segment: usize,
}

impl Airpath {
    fn start(preset: &CasePreset, plant: &Plant) -> Self {
        let s0 = &preset.segments[0];
        Self {
            manifold: ManifoldState::at_rest(
                plant.config().manifold.ambient,
                s0.boost,
                s0.intake_temperature,
            ),
            egr: s0.egr,
            egr_target: s0.egr,
            segment: 0,
        }
    }

    fn integrate(&mut self, plant: &Plant, dt: f64) {
        if dt <= 0.0 {
            return;
        }
        let cfg = plant.config();
        self.manifold = manifold_step(&self.manifold, &cfg.manifold, dt);
        self.egr = egr_actuator_step(self.egr, self.egr_target, dt, cfg.egr_time_constant);
    }

    /// Advances from `from` to `to`, switching targets at the boundary.
    fn advance(&mut self, preset: &CasePreset, plant: &Plant, from: f64, to: f64) {
        let boundary = preset.segment_duration;
        if self.segment == 0 && to >= boundary {
            self.integrate(plant, boundary - from);
            let s1 = &preset.segments[1];
            self.manifold.p_im_target = s1.boost;
            self.manifold.t_im = s1.intake_temperature;
            self.egr_target = s1.egr;
            self.segment = 1;
            self.integrate(plant, to - boundary);
        } else {
            self.integrate(plant, to - from);
        }
    }
}

/// Firing events `(time, cycle, zero-based cylinder)` over complete engine
/// cycles in `[0, duration]`. The cycle period follows the speed at the
/// start of each cycle.
pub fn event_times(
    preset: &CasePreset,
    firing_order: &[usize],
    duration: f64,
) -> Vec<(f64, usize, usize)> {
    let n_cyl = firing_order.len();
    let mut events = Vec::new();
    let mut t = 0.0;
    let mut cycle = 1;
    loop {
        let period = cycle_period(preset.speed(t));
        if t + period > duration + 1e-9 {
            break;
        }
        for (slot, cyl) in firing_order.iter().enumerate() {
            events.push((t + slot as f64 * period / n_cyl as f64, cycle, cyl - 1));
        }
        t += period;
        cycle += 1;
    }
    events
}

/// Runs `preset` for `duration` seconds (both segments when `None`).
///
/// Engine cycle 1 is unfuelled, cycle 2 injects at [`BOOTSTRAP_SOI`] and the
/// controller commands every later cycle.
pub fn run_case(
    preset: &CasePreset,
    plant: &Plant,
    controller: &mut dyn Controller,
    duration: Option<f64>,
    seed: u64,
) -> Result<RunOutput> {
    preset.validate()?;
    let duration = duration.unwrap_or(2.0 * preset.segment_duration);
    if !(duration > 0.0) {
        return Err(Error::Config(format!(
            "duration must be positive, got {duration}"
        )));
    }
    let n_cyl = plant.n_cylinders();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut air = Airpath::start(preset, plant);
    let s0 = &preset.segments[0];
    controller.initialize(
        &Measurement {
            time: 0.0,
            n: preset.speed(0.0),
            phi: preset.phi(0.0),
            p_im: air.manifold.p_im,
            t_im: air.manifold.t_im,
            egr: air.egr,
        },
        s0.ca50_ref,
    );

    let mut records = Vec::new();
    let mut misfires = vec![0usize; n_cyl];
    let mut segment_cycles = vec![[0usize; 2]; n_cyl];
    let mut now = 0.0;
    for (time, cycle, cyl) in event_times(preset, &plant.config().firing_order, duration) {
        air.advance(preset, plant, now, time);
        now = time;
        let segment = preset.segment_index(time);
        segment_cycles[cyl][segment] += 1;
        let reference = preset.segments[segment].ca50_ref;
        let n = preset.speed(time);
        let phi = preset.phi(time);
        let cond = CycleConditions {
            cycle,
            segment,
            segment_cycle: segment_cycles[cyl][segment],
            time,
            n,
            phi,
            p_im: air.manifold.p_im,
            t_im: air.manifold.t_im,
            egr: air.egr,
            egr_target: air.egr_target,
            ca50_ref: reference,
        };
        let m = Measurement {
            time,
            n,
            phi,
            p_im: air.manifold.p_im,
            t_im: air.manifold.t_im,
            egr: plant.sensed_egr(air.egr, phi, &mut rng),
        };
        let draws = plant.draw(&mut rng);
        let command = match cycle {
            1 => None,
            2 => Some(ControlCommand::clamped_from(
                BOOTSTRAP_SOI,
                &plant.config().soi_band,
                cyl,
                cycle,
            )),
            _ => Some(controller.command(cyl, cycle, &m, reference)),
        };
        let mut rec = plant.cylinder_cycle(cyl, command.as_ref(), &cond, draws)?;
        if rec.misfire {
            misfires[cyl] += 1;
            if misfires[cyl] > MAX_MISFIRE_STREAK {
                return Err(Error::PlantAbort(format!(
                    "cylinder {} misfired {} cycles in a row (cycle {cycle}, t = {time:.3} s, \
                     p_im = {:.3} bar, soi = {:?})",
                    cyl + 1,
                    misfires[cyl],
                    rec.p_im,
                    rec.soi
                )));
            }
        } else if let (Some(cmd), Some(y)) = (command, rec.ca50_measured) {
            misfires[cyl] = 0;
            controller.observe(&m, &cmd, y, reference);
        }
        if let Some((x1, x2)) = controller.observer_state(cyl) {
            rec.x1_hat = Some(x1);
            rec.x2_hat = Some(x2);
        }
        records.push(rec);
    }
    Ok(RunOutput {
        preset: preset.name.clone(),
        controller: controller.kind(),
        seed,
        duration,
        coefficients_sha256: plant.config().coefficients.checksum(),
        records,
    })
}
