//! Sectioned `key = value` configuration mapping onto a [`Scenario`] and
//! analysis settings.
//!
//! Every value is in SI base units. `#` starts a comment. Unknown sections or
//! keys, duplicate keys and malformed values are rejected with the offending
//! line number. Keys left out keep their defaults.

use std::collections::HashSet;
use std::fmt::Write as _;

use crate::analysis::AnalysisSettings;
use crate::error::{Error, Result};
use crate::switchsim::Scenario;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Config {
    pub scenario: Scenario,
    /// `f0` always mirrors `scenario.grid.f0`.
    pub analysis: AnalysisSettings,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Config::default();
        let mut section: Option<String> = None;
        let mut seen = HashSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name.strip_suffix(']').ok_or_else(|| Error::Config {
                    line: line_no,
                    key: line.into(),
                    reason: "unterminated section header".into(),
                })?;
                let name = name.trim();
                if !SECTIONS.contains(&name) {
                    return Err(Error::Config {
                        line: line_no,
                        key: name.into(),
                        reason: "unknown section".into(),
                    });
                }
                section = Some(name.to_string());
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
                line: line_no,
                key: line.into(),
                reason: "expected `key = value`".into(),
            })?;
            let key = key.trim();
            let value = value.trim();
            let sec = section.as_deref().ok_or_else(|| Error::Config {
                line: line_no,
                key: key.into(),
                reason: "key outside of any section".into(),
            })?;
            let full = format!("{sec}.{key}");
            if !seen.insert(full.clone()) {
                return Err(Error::Config {
                    line: line_no,
                    key: full,
                    reason: "duplicate key".into(),
                });
            }
            cfg.apply(sec, key, value).map_err(|reason| Error::Config {
                line: line_no,
                key: full,
                reason,
            })?;
        }
        cfg.analysis.f0 = cfg.scenario.grid.f0;
        cfg.scenario.validate()?;
        if cfg.analysis.max_order == 0 {
            return Err(Error::Argument("analysis.max_order must be at least 1".into()));
        }
        if cfg.analysis.cycles == 0 {
            return Err(Error::Argument("analysis.cycles must be at least 1".into()));
        }
        Ok(cfg)
    }

    fn apply(&mut self, section: &str, key: &str, value: &str) -> std::result::Result<(), String> {
        let sc = &mut self.scenario;
        let target: &mut f64 = match (section, key) {
            ("grid", "availability") => {
                sc.grid.availability = parse_schedule(value)?;
                return Ok(());
            }
            ("supervisory", "v_ref") => {
                sc.supervisory.v_ref = if value == "auto" {
                    None
                } else {
                    Some(number(value)?)
                };
                return Ok(());
            }
            ("transformers", "tx1_ratio") => {
                sc.tx1_ratio = ratio(value)?;
                return Ok(());
            }
            ("transformers", "tx2_ratio") => {
                // Written primary half first, e.g. `12:230`; a bare number
                // is the load-side over primary-half ratio.
                sc.tx2_ratio = match value.split_once(':') {
                    Some((a, b)) => ratio(&format!("{b}:{a}"))?,
                    None => number(value)?,
                };
                return Ok(());
            }
            ("analysis", "max_order") => {
                self.analysis.max_order = integer(value)?;
                return Ok(());
            }
            ("analysis", "cycles") => {
                self.analysis.cycles = integer(value)?;
                return Ok(());
            }
            ("grid", "v_rms") => &mut sc.grid.v_rms,
            ("grid", "f0") => &mut sc.grid.f0,
            ("rectifier", "l_r") => &mut sc.rectifier.l_r,
            ("rectifier", "c_r") => &mut sc.rectifier.c_r,
            ("boost", "l_c") => &mut sc.boost.l_c,
            ("boost", "c_c") => &mut sc.boost.c_c,
            ("boost", "r_c") => &mut sc.boost.r_c,
            ("boost", "r_on") => &mut sc.boost.r_on,
            ("battery", "v") => &mut sc.battery.v,
            ("battery", "r_int") => &mut sc.battery.r_int,
            ("inverter", "r_on") => &mut sc.inverter.r_on,
            ("inverter", "r_i") => &mut sc.inverter.r_i,
            ("inverter", "r_s") => &mut sc.inverter.r_s,
            ("inverter", "c_s") => &mut sc.inverter.c_s,
            ("filter", "l_o") => &mut sc.filter.l_o,
            ("filter", "c_o") => &mut sc.filter.c_o,
            ("load", "r") => &mut sc.load.r,
            ("load", "l") => &mut sc.load.l,
            ("pwm", "f_boost") => &mut sc.pwm.f_boost,
            ("pwm", "duty_boost") => &mut sc.pwm.duty_boost,
            ("pwm", "dead_time_boost") => &mut sc.pwm.dead_time_boost,
            ("pwm", "f_inv") => &mut sc.pwm.f_inv,
            ("pwm", "duty_inv") => &mut sc.pwm.duty_inv,
            ("pwm", "dead_time_inv") => &mut sc.pwm.dead_time_inv,
            ("supervisory", "transfer_time") => &mut sc.supervisory.transfer_time,
            ("supervisory", "v_sat") => &mut sc.supervisory.v_sat,
            ("supervisory", "hysteresis") => &mut sc.supervisory.hysteresis,
            ("supervisory", "r_r1") => &mut sc.supervisory.relay.r_r1,
            ("supervisory", "r_r2") => &mut sc.supervisory.relay.r_r2,
            ("supervisory", "c_sr") => &mut sc.supervisory.relay.c_sr,
            ("supervisory", "v_dd") => &mut sc.supervisory.relay.v_dd,
            ("sim", "t_end") => &mut sc.sim.t_end,
            ("sim", "dt") => &mut sc.sim.dt,
            ("sim", "output_dt") => &mut sc.sim.output_dt,
            _ => return Err("unknown key".into()),
        };
        *target = number(value)?;
        Ok(())
    }

    /// Complete config text for this value; parsing it gives back `self`.
    pub fn to_text(&self) -> String {
        let sc = &self.scenario;
        let mut s = String::new();
        let sec = |s: &mut String, name: &str| {
            if !s.is_empty() {
                s.push('\n');
            }
            let _ = writeln!(s, "[{name}]");
        };
        let kv = |s: &mut String, key: &str, v: String, doc: &str| {
            let _ = writeln!(s, "{key} = {v}  # {doc}");
        };
        let n = |v: f64| format!("{v:?}");

        sec(&mut s, "grid");
        kv(&mut s, "v_rms", n(sc.grid.v_rms), "line voltage, V rms");
        kv(&mut s, "f0", n(sc.grid.f0), "line frequency, Hz");
        let sched: Vec<String> = sc
            .grid
            .availability
            .iter()
            .map(|(t, a)| format!("{t:?}:{}", if *a { "on" } else { "off" }))
            .collect();
        kv(&mut s, "availability", sched.join(", "), "time s : on|off");

        sec(&mut s, "transformers");
        kv(&mut s, "tx1_ratio", format!("{:?}:1", sc.tx1_ratio), "grid : battery side");
        kv(&mut s, "tx2_ratio", format!("1:{:?}", sc.tx2_ratio), "primary half : load side");

        sec(&mut s, "rectifier");
        kv(&mut s, "l_r", n(sc.rectifier.l_r), "H (0.1 mH)");
        kv(&mut s, "c_r", n(sc.rectifier.c_r), "F (500 uF)");

        sec(&mut s, "boost");
        kv(&mut s, "l_c", n(sc.boost.l_c), "H (0.95 mH)");
        kv(&mut s, "c_c", n(sc.boost.c_c), "F (47 uF)");
        kv(&mut s, "r_c", n(sc.boost.r_c), "charging load, ohm");
        kv(&mut s, "r_on", n(sc.boost.r_on), "switch and diode on-resistance, ohm");

        sec(&mut s, "battery");
        kv(&mut s, "v", n(sc.battery.v), "V");
        kv(&mut s, "r_int", n(sc.battery.r_int), "internal resistance, ohm");

        sec(&mut s, "inverter");
        kv(&mut s, "r_on", n(sc.inverter.r_on), "on-resistance per leg, ohm");
        kv(&mut s, "r_i", n(sc.inverter.r_i), "input port resistance, ohm");
        kv(&mut s, "r_s", n(sc.inverter.r_s), "snubber resistance, ohm");
        kv(&mut s, "c_s", n(sc.inverter.c_s), "snubber capacitance, F (10 nF)");

        sec(&mut s, "filter");
        kv(&mut s, "l_o", n(sc.filter.l_o), "H (21.2 mH)");
        kv(&mut s, "c_o", n(sc.filter.c_o), "F (470 uF)");

        sec(&mut s, "load");
        kv(&mut s, "r", n(sc.load.r), "ohm");
        kv(&mut s, "l", n(sc.load.l), "H (27 mH)");

        sec(&mut s, "pwm");
        kv(&mut s, "f_boost", n(sc.pwm.f_boost), "Hz");
        kv(&mut s, "duty_boost", n(sc.pwm.duty_boost), "0..1");
        kv(&mut s, "dead_time_boost", n(sc.pwm.dead_time_boost), "s");
        kv(&mut s, "f_inv", n(sc.pwm.f_inv), "Hz");
        kv(&mut s, "duty_inv", n(sc.pwm.duty_inv), "0..1");
        kv(&mut s, "dead_time_inv", n(sc.pwm.dead_time_inv), "s");

        let sup = &sc.supervisory;
        sec(&mut s, "supervisory");
        kv(&mut s, "transfer_time", n(sup.transfer_time), "s");
        let v_ref = sup.v_ref.map_or_else(|| "auto".to_string(), n);
        kv(&mut s, "v_ref", v_ref, "V, or auto for the rectified peak");
        kv(&mut s, "v_sat", n(sup.v_sat), "comparator saturation, V");
        kv(&mut s, "hysteresis", n(sup.hysteresis), "V");
        kv(&mut s, "r_r1", n(sup.relay.r_r1), "relay driver, ohm");
        kv(&mut s, "r_r2", n(sup.relay.r_r2), "relay driver, ohm");
        kv(&mut s, "c_sr", n(sup.relay.c_sr), "relay driver, F");
        kv(&mut s, "v_dd", n(sup.relay.v_dd), "relay driver supply, V");

        sec(&mut s, "sim");
        kv(&mut s, "t_end", n(sc.sim.t_end), "s");
        kv(&mut s, "dt", n(sc.sim.dt), "s");
        kv(&mut s, "output_dt", n(sc.sim.output_dt), "s, multiple of dt");

        sec(&mut s, "analysis");
        kv(&mut s, "max_order", self.analysis.max_order.to_string(), "highest harmonic");
        kv(&mut s, "cycles", self.analysis.cycles.to_string(), "line cycles analysed");
        s
    }
}

const SECTIONS: [&str; 12] = [
    "grid",
    "transformers",
    "rectifier",
    "boost",
    "battery",
    "inverter",
    "filter",
    "load",
    "pwm",
    "supervisory",
    "sim",
    "analysis",
];

fn number(v: &str) -> std::result::Result<f64, String> {
    v.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| format!("`{v}` is not a finite number"))
}

fn integer(v: &str) -> std::result::Result<usize, String> {
    v.parse::<usize>()
        .map_err(|_| format!("`{v}` is not a non-negative integer"))
}

/// `a:b` or a plain number.
fn ratio(v: &str) -> std::result::Result<f64, String> {
    match v.split_once(':') {
        Some((a, b)) => {
            let (a, b) = (number(a.trim())?, number(b.trim())?);
            if b == 0.0 {
                return Err(format!("`{v}` divides by zero"));
            }
            Ok(a / b)
        }
        None => number(v),
    }
}

fn parse_schedule(v: &str) -> std::result::Result<Vec<(f64, bool)>, String> {
    v.split(',')
        .map(|item| {
            let (t, state) = item
                .split_once(':')
                .ok_or_else(|| format!("`{}` is not `time:on|off`", item.trim()))?;
            let on = match state.trim() {
                "on" => true,
                "off" => false,
                other => return Err(format!("`{other}` is neither on nor off")),
            };
            Ok((number(t.trim())?, on))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_text_round_trips() {
        let cfg = Config::default();
        let parsed = Config::parse(&cfg.to_text()).unwrap();
        assert_eq!(parsed, cfg);
    }

    #[test]
    fn empty_text_is_default() {
        assert_eq!(Config::parse("# nothing\n").unwrap(), Config::default());
    }

    #[test]
    fn values_override_defaults() {
        let cfg = Config::parse(
            "[grid]\navailability = 0:on, 0.1:off, 0.3:on\n[transformers]\ntx1_ratio = 230:12\n\
             [supervisory]\nv_ref = 12.5\n[load]\nr = 250 # half\n",
        )
        .unwrap();
        assert_eq!(
            cfg.scenario.grid.availability,
            vec![(0.0, true), (0.1, false), (0.3, true)]
        );
        assert_eq!(cfg.scenario.supervisory.v_ref, Some(12.5));
        assert_eq!(cfg.scenario.load.r, 250.0);
    }

    #[test]
    fn errors_name_line_and_key() {
        let e = Config::parse("[load]\nr = 500\nresistance = 3\n").unwrap_err();
        assert_eq!(
            e,
            Error::Config {
                line: 3,
                key: "load.resistance".into(),
                reason: "unknown key".into()
            }
        );
        let e = Config::parse("[load]\nr = abc\n").unwrap_err();
        assert!(matches!(e, Error::Config { line: 2, ref key, .. } if key == "load.r"));
        let e = Config::parse("r = 1\n").unwrap_err();
        assert!(matches!(e, Error::Config { line: 1, .. }));
        let e = Config::parse("[load]\nr = 1\nr = 2\n").unwrap_err();
        assert!(matches!(e, Error::Config { line: 3, .. }));
        let e = Config::parse("[nope]\n").unwrap_err();
        assert!(matches!(e, Error::Config { line: 1, .. }));
    }

    #[test]
    fn invariant_violation_names_field() {
        let e = Config::parse("[sim]\ndt = 1e-5\n").unwrap_err();
        assert!(matches!(e, Error::Argument(ref m) if m.contains("sim.dt")));
    }
}
