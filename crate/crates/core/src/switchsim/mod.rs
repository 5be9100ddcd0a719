//! Fixed-step switched simulation of the grid-interfaced back-up supply.
//!
//! Grid, step-down transformer, diode bridge and LC filter feed a PWM boost
//! charger. A 12 V battery drives a four-switch push-pull inverter through a
//! center-tapped step-up transformer and a series L-C output branch. A
//! changeover relay routes the R-L load to the grid or the inverter, and a
//! comparator-driven relay enables the charger.

mod mna;
pub mod pwm;
pub mod scenario;
pub mod system;
pub mod waveform;

pub use pwm::{pwm_generate, GateSignals, Pwm};
pub use scenario::*;
pub use system::{
    run, simulate, simulate_boost, Event, EventKind, SimulationOutput, SIGNALS, STATE_TRACES,
};
pub use waveform::{active_window, steady_state_window, Waveform};
