//! Changeover transfer switch and comparator-driven charge controller.
//!
//! Both are pure state-transition functions; the simulator owns the state
//! values and advances them once per time step.

use crate::error::{arg, Result};

/// Lower and upper bound of the relay operating time (s).
pub const TRANSFER_TIME_BAND: (f64, f64) = (3e-3, 5e-3);
pub const DEFAULT_TRANSFER_TIME: f64 = 4e-3;

/// Source the load is routed to by the changeover relay.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pole {
    /// Normally-open contact, made while the coil is energized by the grid.
    Grid,
    /// Normally-closed contact, fed by the inverter.
    Inverter,
}

impl Pole {
    fn for_grid(grid_available: bool) -> Self {
        if grid_available {
            Pole::Grid
        } else {
            Pole::Inverter
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PendingTransfer {
    pub target: Pole,
    pub t_complete: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferSwitchState {
    /// Coil state; follows grid availability immediately.
    pub energized: bool,
    /// Last contact the moving pole rested on.
    pub pole: Pole,
    /// Armature travel in progress. While set, the load is open-circuited.
    pub pending: Option<PendingTransfer>,
    last_t: Option<f64>,
}

impl TransferSwitchState {
    /// Settled state for the given grid condition at start-up.
    pub fn new(grid_available: bool) -> Self {
        Self {
            energized: grid_available,
            pole: Pole::for_grid(grid_available),
            pending: None,
            last_t: None,
        }
    }

    /// Source currently bridged to the load, `None` while the armature travels.
    pub fn connected(&self) -> Option<Pole> {
        match self.pending {
            Some(_) => None,
            None => Some(self.pole),
        }
    }
}

/// True when `transfer_time` lies inside the relay's rated operating band.
pub fn transfer_time_in_band(transfer_time: f64) -> bool {
    let (lo, hi) = TRANSFER_TIME_BAND;
    (lo..=hi).contains(&transfer_time)
}

/// Advances the changeover relay to time `t`.
///
/// A change in grid availability flips the coil at once and starts a
/// break-before-make transfer completing at `t + transfer_time`. If the grid
/// changes back while the armature is still travelling, the armature reverses
/// from its in-flight position and the load stays open for a further
/// `transfer_time`.
pub fn transfer_switch_step(
    state: &TransferSwitchState,
    grid_available: bool,
    t: f64,
    transfer_time: f64,
) -> Result<TransferSwitchState> {
    if let Some(last) = state.last_t {
        if t < last {
            return arg(format!("time ran backwards: {t} s after {last} s"));
        }
    }
    if !(transfer_time > 0.0 && transfer_time.is_finite()) {
        return arg(format!("transfer time must be positive, got {transfer_time}"));
    }

    let mut next = *state;
    next.last_t = Some(t);

    if let Some(p) = next.pending {
        if t >= p.t_complete {
            next.pole = p.target;
            next.pending = None;
        }
    }

    if grid_available != next.energized {
        next.energized = grid_available;
        let target = Pole::for_grid(grid_available);
        match next.pending {
            Some(p) => {
                // Reversal mid-travel: the armature was heading to p.target.
                next.pole = p.target;
                next.pending = Some(PendingTransfer {
                    target,
                    t_complete: t + transfer_time,
                });
            }
            None if target != next.pole => {
                next.pending = Some(PendingTransfer {
                    target,
                    t_complete: t + transfer_time,
                });
            }
            None => {}
        }
    }
    Ok(next)
}

/// Ideal comparator with the battery on the inverting input: `-v_sat` when
/// `v_bat >= v_ref`, `+v_sat` otherwise.
pub fn comparator_output(v_bat: f64, v_ref: f64, v_sat: f64) -> f64 {
    if v_bat >= v_ref {
        -v_sat
    } else {
        v_sat
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChargeControllerState {
    pub v_ref: f64,
    pub v_sat: f64,
    /// Dead band around `v_ref`; zero reproduces the bare comparator.
    pub hysteresis: f64,
    pub connected: bool,
}

impl ChargeControllerState {
    pub fn new(v_ref: f64, v_sat: f64, hysteresis: f64) -> Result<Self> {
        if !(v_ref >= 0.0 && v_ref.is_finite()) {
            return arg(format!("v_ref must be non-negative, got {v_ref}"));
        }
        if !(v_sat > 0.0 && v_sat.is_finite()) {
            return arg(format!("v_sat must be positive, got {v_sat}"));
        }
        if !(hysteresis >= 0.0 && hysteresis.is_finite()) {
            return arg(format!("hysteresis must be non-negative, got {hysteresis}"));
        }
        Ok(Self {
            v_ref,
            v_sat,
            hysteresis,
            connected: false,
        })
    }
}

/// Closes the charger relay while the comparator output is positive.
///
/// With hysteresis `h` the comparator threshold is `v_ref - h` while open and
/// `v_ref + h` while closed.
pub fn charge_controller_step(state: &ChargeControllerState, v_bat: f64) -> ChargeControllerState {
    let threshold = if state.connected {
        state.v_ref + state.hysteresis
    } else {
        state.v_ref - state.hysteresis
    };
    ChargeControllerState {
        connected: comparator_output(v_bat, threshold, state.v_sat) > 0.0,
        ..*state
    }
}
