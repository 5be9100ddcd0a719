use crate::error::{arg, Result};

/// Guard against rounding when a sample lands exactly on a switching edge.
const EDGE_EPS: f64 = 1e-9;

/// Complementary gate pair sampled at `t = i dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct GateSignals {
    pub q_high: Vec<bool>,
    pub q_low: Vec<bool>,
    pub dt: f64,
}

/// Fixed-frequency complementary PWM carrier.
///
/// Within period `k`, the high gate conducts on `[kT, kT + dT - dead)` and the
/// low gate on `[kT + dT, kT + T - dead)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pwm {
    freq: f64,
    duty: f64,
    dead_time: f64,
}

impl Pwm {
    pub fn new(freq: f64, duty: f64, dead_time: f64) -> Result<Self> {
        if !(freq > 0.0 && freq.is_finite()) {
            return arg(format!("PWM frequency must be positive, got {freq}"));
        }
        if !(0.0..=1.0).contains(&duty) {
            return arg(format!("PWM duty must lie in [0, 1], got {duty}"));
        }
        if !(dead_time >= 0.0 && dead_time < 0.5 / freq) {
            return arg(format!(
                "dead time must lie in [0, {}) s, got {dead_time}",
                0.5 / freq
            ));
        }
        Ok(Self {
            freq,
            duty,
            dead_time,
        })
    }

    pub fn period(&self) -> f64 {
        1.0 / self.freq
    }

    /// Gate states `(high, low)` at time `t`.
    pub fn gates(&self, t: f64) -> (bool, bool) {
        let x = t * self.freq;
        let frac = (x - (x + EDGE_EPS).floor()).max(0.0);
        let dead = self.dead_time * self.freq;
        let high = frac < self.duty - dead - EDGE_EPS;
        let low = frac >= self.duty - EDGE_EPS && frac < 1.0 - dead - EDGE_EPS;
        (high, low)
    }
}

/// Samples a complementary PWM pair on `[0, t_end)` at step `dt`.
pub fn pwm_generate(freq: f64, duty: f64, dead_time: f64, t_end: f64, dt: f64) -> Result<GateSignals> {
    let pwm = Pwm::new(freq, duty, dead_time)?;
    if !(dt > 0.0 && dt < pwm.period()) {
        return arg(format!("dt must lie in (0, {}) s, got {dt}", pwm.period()));
    }
    if !(t_end > 0.0 && t_end.is_finite()) {
        return arg(format!("t_end must be positive, got {t_end}"));
    }
    let n = (t_end / dt).round() as usize;
    let (q_high, q_low) = (0..n).map(|i| pwm.gates(i as f64 * dt)).unzip();
    Ok(GateSignals { q_high, q_low, dt })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boost_carrier_half_duty() {
        let dt = 250e-9;
        let g = pwm_generate(40e3, 0.5, 0.0, 25e-6, dt).unwrap();
        assert_eq!(g.q_high.len(), 100);
        let high = g.q_high.iter().filter(|x| **x).count();
        assert_eq!(high, 50);
        assert!(g.q_high[..50].iter().all(|x| *x));
        assert!(g.q_low[50..].iter().all(|x| *x));
    }

    #[test]
    fn zero_duty_never_high() {
        let g = pwm_generate(40e3, 0.0, 0.0, 1e-3, 250e-9).unwrap();
        assert!(g.q_high.iter().all(|x| !*x));
        assert!(g.q_low.iter().all(|x| *x));
    }

    #[test]
    fn dead_time_gaps() {
        let dt = 1e-6;
        let g = pwm_generate(50.0, 0.5, 100e-6, 20e-3, dt).unwrap();
        let gaps = g
            .q_high
            .iter()
            .zip(&g.q_low)
            .filter(|(h, l)| !**h && !**l)
            .count();
        assert_eq!(gaps, 200);
        // Two separate 100-sample gaps.
        let starts = (0..g.q_high.len())
            .filter(|&i| {
                let off = !g.q_high[i] && !g.q_low[i];
                let prev_off = i > 0 && !g.q_high[i - 1] && !g.q_low[i - 1];
                off && !prev_off
            })
            .count();
        assert_eq!(starts, 2);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(pwm_generate(50.0, 1.5, 0.0, 1.0, 1e-4).is_err());
        assert!(pwm_generate(50.0, -0.1, 0.0, 1.0, 1e-4).is_err());
        assert!(pwm_generate(50.0, 0.5, 0.0, 1.0, 0.05).is_err());
        assert!(pwm_generate(50.0, 0.5, 0.01, 1.0, 1e-4).is_err());
    }
}
