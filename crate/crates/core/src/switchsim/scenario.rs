use crate::error::{arg, Result};
use crate::models::{BoostParams, InverterParams, RectifierParams};
use crate::supervisory::DEFAULT_TRANSFER_TIME;

#[derive(Debug, Clone, PartialEq)]
pub struct GridParams {
    /// Line voltage (V rms).
    pub v_rms: f64,
    /// Line frequency (Hz).
    pub f0: f64,
    /// Availability changes `(t, available)`, starting at `t = 0`.
    pub availability: Vec<(f64, bool)>,
}

impl GridParams {
    pub fn available_at(&self, t: f64) -> bool {
        self.availability
            .iter()
            .take_while(|(ts, _)| *ts <= t)
            .last()
            .map(|(_, a)| *a)
            .unwrap_or(true)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoostComponents {
    pub l_c: f64,
    pub c_c: f64,
    /// Charging load seen by the boost output (Ω).
    pub r_c: f64,
    /// On-resistance of the boost switch and its diode (Ω).
    pub r_on: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatteryParams {
    pub v: f64,
    /// Internal resistance (Ω); zero gives an ideal source.
    pub r_int: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverterComponents {
    /// On-resistance of one conducting leg; each leg is two switches in
    /// parallel, each with twice this value (Ω).
    pub r_on: f64,
    /// Input port resistance used by the averaged relations (Ω).
    pub r_i: f64,
    /// Snubber resistance per switch (Ω).
    pub r_s: f64,
    /// Snubber capacitance per switch (F).
    pub c_s: f64,
}

/// Series-tuned L-C branch between the step-up transformer and the load.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterParams {
    pub l_o: f64,
    pub c_o: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadParams {
    pub r: f64,
    pub l: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PwmParams {
    pub f_boost: f64,
    pub duty_boost: f64,
    pub dead_time_boost: f64,
    pub f_inv: f64,
    pub duty_inv: f64,
    /// Blanking at the end of each inverter half-cycle; shapes the output
    /// into a quasi-square wave.
    pub dead_time_inv: f64,
}

/// Drive circuit values of the charger relay. Carried for documentation of
/// the physical design; the relay itself is modelled behaviourally.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelayDriver {
    pub r_r1: f64,
    pub r_r2: f64,
    pub c_sr: f64,
    pub v_dd: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupervisoryParams {
    pub transfer_time: f64,
    /// Comparator reference; `None` uses the rectifier's nominal peak voltage.
    pub v_ref: Option<f64>,
    pub v_sat: f64,
    pub hysteresis: f64,
    pub relay: RelayDriver,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimParams {
    pub t_end: f64,
    pub dt: f64,
    /// Spacing of recorded samples; an integer multiple of `dt`. The default
    /// is not a divisor of the boost period, so successive samples sweep the
    /// switching cycle instead of aliasing onto a few fixed phases.
    pub output_dt: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub grid: GridParams,
    /// Grid-side over battery-side voltage of the step-down transformer.
    pub tx1_ratio: f64,
    pub rectifier: RectifierParams,
    pub boost: BoostComponents,
    pub battery: BatteryParams,
    pub inverter: InverterComponents,
    /// Load-side voltage over one primary half of the step-up transformer.
    pub tx2_ratio: f64,
    pub filter: FilterParams,
    pub load: LoadParams,
    pub pwm: PwmParams,
    pub supervisory: SupervisoryParams,
    pub sim: SimParams,
}

/// Default inverter blanking per half-cycle (s); leaves a 135° conduction
/// angle, near the minimum of the output THD up to the 13th harmonic.
pub const DEFAULT_DEAD_TIME_INV: f64 = 2.5e-3;

impl Default for Scenario {
    fn default() -> Self {
        Self {
            grid: GridParams {
                v_rms: 230.0,
                f0: 50.0,
                availability: vec![(0.0, true), (0.2, false)],
            },
            tx1_ratio: 230.0 / 12.0,
            rectifier: RectifierParams {
                l_r: 0.1e-3,
                c_r: 500e-6,
            },
            boost: BoostComponents {
                l_c: 0.95e-3,
                c_c: 47e-6,
                r_c: 10.0,
                r_on: 1e-3,
            },
            battery: BatteryParams { v: 12.0, r_int: 0.0 },
            inverter: InverterComponents {
                r_on: 0.01,
                r_i: 1.385,
                r_s: 225.0,
                c_s: 10e-9,
            },
            tx2_ratio: 230.0 / 12.0,
            filter: FilterParams {
                l_o: 21.2e-3,
                c_o: 470e-6,
            },
            load: LoadParams { r: 500.0, l: 27e-3 },
            pwm: PwmParams {
                f_boost: 40e3,
                duty_boost: 0.5,
                dead_time_boost: 0.0,
                f_inv: 50.0,
                duty_inv: 0.5,
                dead_time_inv: DEFAULT_DEAD_TIME_INV,
            },
            supervisory: SupervisoryParams {
                transfer_time: DEFAULT_TRANSFER_TIME,
                v_ref: None,
                v_sat: 12.0,
                hysteresis: 0.0,
                relay: RelayDriver {
                    r_r1: 1e3,
                    r_r2: 12e3,
                    c_sr: 10e-9,
                    v_dd: 12.0,
                },
            },
            sim: SimParams {
                t_end: 0.5,
                dt: 250e-9,
                output_dt: 8e-6,
            },
        }
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        arg(format!("{field} must be positive, got {v}"))
    }
}

fn non_negative(field: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        arg(format!("{field} must be non-negative, got {v}"))
    }
}

fn dead_time(field: &str, dead: f64, freq: f64) -> Result<()> {
    if dead >= 0.0 && dead < 0.5 / freq {
        Ok(())
    } else {
        arg(format!(
            "{field} must lie in [0, {}) s, got {dead}",
            0.5 / freq
        ))
    }
}

fn unit_interval(field: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        arg(format!("{field} must lie in [0, 1], got {v}"))
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        non_negative("grid.v_rms", self.grid.v_rms)?;
        positive("grid.f0", self.grid.f0)?;
        match self.grid.availability.first() {
            Some((t, _)) if *t == 0.0 => {}
            _ => return arg("grid.availability must start at t = 0"),
        }
        if self
            .grid
            .availability
            .windows(2)
            .any(|w| !(w[1].0 > w[0].0) || !w[1].0.is_finite())
        {
            return arg("grid.availability times must be strictly increasing");
        }
        positive("transformers.tx1_ratio", self.tx1_ratio)?;
        positive("rectifier.l_r", self.rectifier.l_r)?;
        positive("rectifier.c_r", self.rectifier.c_r)?;
        positive("boost.l_c", self.boost.l_c)?;
        positive("boost.c_c", self.boost.c_c)?;
        positive("boost.r_c", self.boost.r_c)?;
        positive("boost.r_on", self.boost.r_on)?;
        non_negative("battery.v", self.battery.v)?;
        non_negative("battery.r_int", self.battery.r_int)?;
        positive("inverter.r_on", self.inverter.r_on)?;
        positive("inverter.r_i", self.inverter.r_i)?;
        positive("inverter.r_s", self.inverter.r_s)?;
        positive("inverter.c_s", self.inverter.c_s)?;
        positive("transformers.tx2_ratio", self.tx2_ratio)?;
        positive("filter.l_o", self.filter.l_o)?;
        positive("filter.c_o", self.filter.c_o)?;
        positive("load.r", self.load.r)?;
        positive("load.l", self.load.l)?;

        let p = &self.pwm;
        positive("pwm.f_boost", p.f_boost)?;
        positive("pwm.f_inv", p.f_inv)?;
        unit_interval("pwm.duty_boost", p.duty_boost)?;
        unit_interval("pwm.duty_inv", p.duty_inv)?;
        dead_time("pwm.dead_time_boost", p.dead_time_boost, p.f_boost)?;
        dead_time("pwm.dead_time_inv", p.dead_time_inv, p.f_inv)?;

        let s = &self.supervisory;
        positive("supervisory.transfer_time", s.transfer_time)?;
        if let Some(v) = s.v_ref {
            non_negative("supervisory.v_ref", v)?;
        }
        positive("supervisory.v_sat", s.v_sat)?;
        non_negative("supervisory.hysteresis", s.hysteresis)?;
        positive("supervisory.r_r1", s.relay.r_r1)?;
        positive("supervisory.r_r2", s.relay.r_r2)?;
        positive("supervisory.c_sr", s.relay.c_sr)?;
        positive("supervisory.v_dd", s.relay.v_dd)?;

        let sim = &self.sim;
        positive("sim.dt", sim.dt)?;
        positive("sim.t_end", sim.t_end)?;
        positive("sim.output_dt", sim.output_dt)?;
        let fastest = p.f_boost.max(p.f_inv);
        if sim.dt > 1.0 / (20.0 * fastest) * (1.0 + 1e-12) {
            return arg(format!(
                "sim.dt = {} s gives fewer than 20 samples per {fastest} Hz switching period",
                sim.dt
            ));
        }
        if sim.t_end < 10.0 / self.grid.f0 * (1.0 - 1e-12) {
            return arg(format!(
                "sim.t_end = {} s is shorter than 10 line cycles",
                sim.t_end
            ));
        }
        let ratio = sim.output_dt / sim.dt;
        if ratio < 1.0 - 1e-9 || (ratio - ratio.round()).abs() > 1e-6 {
            return arg(format!(
                "sim.output_dt = {} s is not an integer multiple of sim.dt = {} s",
                sim.output_dt, sim.dt
            ));
        }
        Ok(())
    }

    /// Nominal peak of the rectified line voltage.
    pub fn rectified_peak(&self) -> f64 {
        2f64.sqrt() * self.grid.v_rms / self.tx1_ratio
    }

    pub fn v_ref(&self) -> f64 {
        self.supervisory.v_ref.unwrap_or_else(|| self.rectified_peak())
    }

    pub fn boost_params(&self) -> Result<BoostParams> {
        BoostParams::new(
            self.boost.l_c,
            self.boost.c_c,
            self.boost.r_c,
            self.pwm.duty_boost,
            self.pwm.f_boost,
        )
    }

    pub fn inverter_params(&self) -> Result<InverterParams> {
        let p = InverterParams {
            n: self.tx2_ratio,
            duty: self.pwm.duty_inv,
            r_on: self.inverter.r_on,
            r_i: self.inverter.r_i,
            r_o: self.load.r,
            f_sw: self.pwm.f_inv,
        };
        p.validate()?;
        Ok(p)
    }

    /// Number of integration steps covering `[0, t_end)`.
    pub fn steps(&self) -> usize {
        (self.sim.t_end / self.sim.dt).round() as usize
    }

    pub fn decimation(&self) -> usize {
        (self.sim.output_dt / self.sim.dt).round() as usize
    }
}
