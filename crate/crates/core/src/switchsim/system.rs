use std::f64::consts::PI;
use std::fmt;

use super::mna::{ElemId, Engine, Gate, Netlist, Source, GROUND};
use super::pwm::Pwm;
use super::scenario::Scenario;
use super::waveform::Waveform;
use crate::error::{arg, Result};
use crate::models::BoostParams;
use crate::supervisory::{
    charge_controller_step, transfer_switch_step, ChargeControllerState, Pole,
    TransferSwitchState,
};

/// Forward resistance of every ideal diode (Ω).
const DIODE_R_ON: f64 = 1e-3;
/// Resistance of a closed relay contact (Ω).
const CONTACT_R: f64 = 1e-3;

/// Names of the signal waveforms returned by [`simulate`], in output order.
pub const SIGNALS: [&str; 16] = [
    "mains_v",
    "mains_i",
    "rectified_v",
    "battery_charge_v",
    "boost_inductor_i",
    "boost_switch_i",
    "boost_diode_i",
    "boost_cap_i",
    "boost_out_i",
    "inverter_in_i",
    "inverter_leg1_i",
    "inverter_leg2_i",
    "inverter_out_v",
    "load_v",
    "load_i",
    "load_p",
];

/// Supervisory traces appended after [`SIGNALS`]: grid availability (0/1),
/// load source (0 open, 1 grid, 2 inverter) and charger relay (0/1).
pub const STATE_TRACES: [&str; 3] = ["grid_available", "load_source", "charger_connected"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EventKind {
    GridLost,
    GridRestored,
    TransferStarted(Pole),
    TransferCompleted(Pole),
    ChargerConnected,
    ChargerDisconnected,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub t: f64,
    pub kind: EventKind,
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let what = match self.kind {
            EventKind::GridLost => "grid lost".to_string(),
            EventKind::GridRestored => "grid restored".to_string(),
            EventKind::TransferStarted(p) => format!("transfer to {} started", pole_name(p)),
            EventKind::TransferCompleted(p) => {
                format!("transfer to {} completed", pole_name(p))
            }
            EventKind::ChargerConnected => "charger connected".to_string(),
            EventKind::ChargerDisconnected => "charger disconnected".to_string(),
        };
        write!(f, "{:.6} s  {what}", self.t)
    }
}

fn pole_name(p: Pole) -> &'static str {
    match p {
        Pole::Grid => "grid",
        Pole::Inverter => "inverter",
    }
}

#[derive(Debug, Clone)]
pub struct SimulationOutput {
    pub waveforms: Vec<Waveform>,
    pub events: Vec<Event>,
    pub steps: usize,
    /// Distinct network topologies factorized during the run.
    pub topologies: usize,
}

impl SimulationOutput {
    pub fn get(&self, name: &str) -> Option<&Waveform> {
        self.waveforms.iter().find(|w| w.name == name)
    }
}

struct Leg {
    switches: [ElemId; 2],
    diodes: [ElemId; 2],
    gates: [Gate; 2],
}

impl Leg {
    fn build(net: &mut Netlist, node: usize, sc: &Scenario) -> Self {
        let mut leg = |_| {
            let (sw, gate) = net.switch(node, GROUND, 2.0 * sc.inverter.r_on);
            let d = net.diode(GROUND, node, DIODE_R_ON);
            let mid = net.node();
            net.resistor(node, mid, sc.inverter.r_s);
            net.capacitor(mid, GROUND, sc.inverter.c_s);
            (sw, d, gate)
        };
        let (s0, d0, g0) = leg(0);
        let (s1, d1, g1) = leg(1);
        Self {
            switches: [s0, s1],
            diodes: [d0, d1],
            gates: [g0, g1],
        }
    }

    fn set(&self, e: &mut Engine, on: bool) {
        for g in self.gates {
            e.set_gate(g, on);
        }
    }

    /// Current from the winding end into the leg, through switches and
    /// body diodes.
    fn current(&self, e: &Engine) -> f64 {
        self.switches.iter().map(|s| e.current(*s)).sum::<f64>()
            - self.diodes.iter().map(|d| e.current(*d)).sum::<f64>()
    }
}

struct Plant {
    grid: (ElemId, Source),
    battery: (ElemId, Source),
    rectified: usize,
    charge: usize,
    l_c: ElemId,
    q_c: (ElemId, Gate),
    d_c: ElemId,
    c_c: ElemId,
    charger: (ElemId, Gate),
    leg1: Leg,
    leg2: Leg,
    filter_out: usize,
    l_o: ElemId,
    grid_contact: Gate,
    inverter_contact: Gate,
    load_node: usize,
    load_r: ElemId,
    load_l: ElemId,
}

fn build(sc: &Scenario) -> (Netlist, Plant) {
    let mut net = Netlist::new();

    let g = net.node();
    let grid = net.vsource(g, GROUND);
    let (s1, s2) = (net.node(), net.node());
    net.transformer(g, GROUND, s1, s2, 1.0 / sc.tx1_ratio);
    let p = net.node();
    net.diode(s1, p, DIODE_R_ON);
    net.diode(s2, p, DIODE_R_ON);
    net.diode(GROUND, s1, DIODE_R_ON);
    net.diode(GROUND, s2, DIODE_R_ON);
    let r = net.node();
    net.inductor(p, r, sc.rectifier.l_r);
    net.capacitor(r, GROUND, sc.rectifier.c_r);

    let x = net.node();
    let o = net.node();
    let l_c = net.inductor(r, x, sc.boost.l_c);
    let q_c = net.switch(x, GROUND, sc.boost.r_on);
    let d_c = net.diode(x, o, sc.boost.r_on);
    let c_c = net.capacitor(o, GROUND, sc.boost.c_c);
    let charger = net.switch(o, GROUND, sc.boost.r_c);

    let c = net.node();
    let battery = if sc.battery.r_int > 0.0 {
        let bp = net.node();
        let src = net.vsource(bp, GROUND);
        net.resistor(bp, c, sc.battery.r_int);
        src
    } else {
        net.vsource(c, GROUND)
    };
    let (a, b) = (net.node(), net.node());
    let leg1 = Leg::build(&mut net, a, sc);
    let leg2 = Leg::build(&mut net, b, sc);
    let y = net.node();
    net.transformer(c, a, y, GROUND, sc.tx2_ratio);
    net.transformer(b, c, y, GROUND, sc.tx2_ratio);

    let yo = net.node();
    let f = net.node();
    let l_o = net.inductor(y, yo, sc.filter.l_o);
    net.capacitor(yo, f, sc.filter.c_o);

    let l = net.node();
    let m = net.node();
    let (_, grid_contact) = net.switch(g, l, CONTACT_R);
    let (_, inverter_contact) = net.switch(f, l, CONTACT_R);
    let load_r = net.resistor(l, m, sc.load.r);
    let load_l = net.inductor(m, GROUND, sc.load.l);

    let plant = Plant {
        grid,
        battery,
        rectified: r,
        charge: o,
        l_c,
        q_c,
        d_c,
        c_c,
        charger,
        leg1,
        leg2,
        filter_out: f,
        l_o,
        grid_contact,
        inverter_contact,
        load_node: l,
        load_r,
        load_l,
    };
    (net, plant)
}

/// Runs the full system and returns every signal and supervisory trace.
pub fn simulate(sc: &Scenario) -> Result<Vec<Waveform>> {
    Ok(run(sc)?.waveforms)
}

/// As [`simulate`], also returning the supervisory event log.
pub fn run(sc: &Scenario) -> Result<SimulationOutput> {
    sc.validate()?;
    let boost_pwm = Pwm::new(sc.pwm.f_boost, sc.pwm.duty_boost, sc.pwm.dead_time_boost)?;
    let inv_pwm = Pwm::new(sc.pwm.f_inv, sc.pwm.duty_inv, sc.pwm.dead_time_inv)?;
    let (net, plant) = build(sc);
    let dt = sc.sim.dt;
    let mut e = Engine::new(net, dt);

    let steps = sc.steps();
    let decim = sc.decimation();
    let n_out = steps.div_ceil(decim);
    let channels = SIGNALS.len() + STATE_TRACES.len();
    let mut rec: Vec<Vec<f64>> = (0..channels).map(|_| Vec::with_capacity(n_out)).collect();
    let mut events = Vec::new();

    let amp = 2f64.sqrt() * sc.grid.v_rms;
    let omega = 2.0 * PI * sc.grid.f0;
    let tt = sc.supervisory.transfer_time;
    let mut available = sc.grid.available_at(0.0);
    let mut relay = TransferSwitchState::new(available);
    let mut charger = ChargeControllerState::new(
        sc.v_ref(),
        sc.supervisory.v_sat,
        sc.supervisory.hysteresis,
    )?;
    let mut i_bat = 0.0;
    let mut contacts = (false, false);

    for k in 0..steps {
        let t = k as f64 * dt;

        let now_available = sc.grid.available_at(t);
        if now_available != available {
            events.push(Event {
                t,
                kind: if now_available {
                    EventKind::GridRestored
                } else {
                    EventKind::GridLost
                },
            });
            available = now_available;
        }
        let next = transfer_switch_step(&relay, available, t, tt)?;
        if next.pending != relay.pending {
            if let Some(p) = relay.pending {
                if next.pending.is_none() || next.pole == p.target {
                    events.push(Event {
                        t,
                        kind: EventKind::TransferCompleted(p.target),
                    });
                }
            }
            if let Some(p) = next.pending {
                events.push(Event {
                    t,
                    kind: EventKind::TransferStarted(p.target),
                });
            }
        }
        relay = next;

        let v_sense = sc.battery.v - sc.battery.r_int * i_bat;
        let next = charge_controller_step(&charger, v_sense);
        if next.connected != charger.connected {
            events.push(Event {
                t,
                kind: if next.connected {
                    EventKind::ChargerConnected
                } else {
                    EventKind::ChargerDisconnected
                },
            });
        }
        charger = next;

        e.set_gate(plant.q_c.1, charger.connected && boost_pwm.gates(t).0);
        e.set_gate(plant.charger.1, charger.connected);
        let (high, low) = inv_pwm.gates(t);
        plant.leg1.set(&mut e, high);
        plant.leg2.set(&mut e, low);

        let now = (
            relay.connected() == Some(Pole::Grid),
            relay.connected() == Some(Pole::Inverter),
        );
        if contacts.0 && !now.0 || contacts.1 && !now.1 {
            e.reset_inductor(plant.load_l);
        }
        if contacts.1 && !now.1 {
            e.reset_inductor(plant.l_o);
        }
        contacts = now;
        e.set_gate(plant.grid_contact, now.0);
        e.set_gate(plant.inverter_contact, now.1);

        e.set_source(plant.grid.1, amp * (omega * t).sin(), available);
        e.set_source(plant.battery.1, sc.battery.v, true);
        e.step(k, t)?;
        i_bat = -e.current(plant.battery.0);

        if k % decim == 0 {
            let mains_v = if available { amp * (omega * t).sin() } else { 0.0 };
            let load_v = e.node_v(plant.load_node);
            let load_i = e.current(plant.load_r);
            let values = [
                mains_v,
                -e.current(plant.grid.0),
                e.node_v(plant.rectified),
                e.node_v(plant.charge),
                e.current(plant.l_c),
                e.current(plant.q_c.0),
                e.current(plant.d_c),
                e.current(plant.c_c),
                e.current(plant.charger.0),
                i_bat,
                plant.leg1.current(&e),
                plant.leg2.current(&e),
                e.node_v(plant.filter_out),
                load_v,
                load_i,
                load_v * load_i,
                f64::from(u8::from(available)),
                match relay.connected() {
                    None => 0.0,
                    Some(Pole::Grid) => 1.0,
                    Some(Pole::Inverter) => 2.0,
                },
                f64::from(u8::from(charger.connected)),
            ];
            for (r, v) in rec.iter_mut().zip(values) {
                r.push(v);
            }
        }
    }

    let out_dt = sc.sim.output_dt;
    let waveforms = SIGNALS
        .iter()
        .chain(STATE_TRACES.iter())
        .zip(rec)
        .map(|(name, samples)| Waveform::new(*name, out_dt, 0.0, samples))
        .collect::<Result<Vec<_>>>()?;
    Ok(SimulationOutput {
        waveforms,
        events,
        steps,
        topologies: e.cached_topologies(),
    })
}

/// Simulates the boost stage alone from an ideal dc source, recording every
/// step: `boost_inductor_i`, `boost_inductor_v`, `boost_switch_i`,
/// `boost_diode_i`, `boost_cap_i`, `boost_out_v`, `boost_out_i`.
pub fn simulate_boost(
    p: &BoostParams,
    v_in: f64,
    r_on: f64,
    t_end: f64,
    dt: f64,
) -> Result<Vec<Waveform>> {
    p.validate()?;
    if !(r_on > 0.0) {
        return arg(format!("r_on must be positive, got {r_on}"));
    }
    if !(dt > 0.0 && dt <= 1.0 / (20.0 * p.f_sw)) {
        return arg(format!("dt = {dt} s gives fewer than 20 samples per period"));
    }
    let pwm = Pwm::new(p.f_sw, p.duty, 0.0)?;
    let mut net = Netlist::new();
    let vin = net.node();
    let x = net.node();
    let o = net.node();
    let (_, src) = net.vsource(vin, GROUND);
    let l = net.inductor(vin, x, p.l_c);
    let (q, gate) = net.switch(x, GROUND, r_on);
    let d = net.diode(x, o, r_on);
    let c = net.capacitor(o, GROUND, p.c_c);
    let r = net.resistor(o, GROUND, p.r_c);
    let mut e = Engine::new(net, dt);

    let steps = (t_end / dt).round() as usize;
    let mut rec: [Vec<f64>; 7] = Default::default();
    for k in 0..steps {
        let t = k as f64 * dt;
        e.set_gate(gate, pwm.gates(t).0);
        e.set_source(src, v_in, true);
        e.step(k, t)?;
        let values = [
            e.current(l),
            e.voltage(l),
            e.current(q),
            e.current(d),
            e.current(c),
            e.node_v(o),
            e.current(r),
        ];
        for (r, v) in rec.iter_mut().zip(values) {
            r.push(v);
        }
    }
    let names = [
        "boost_inductor_i",
        "boost_inductor_v",
        "boost_switch_i",
        "boost_diode_i",
        "boost_cap_i",
        "boost_out_v",
        "boost_out_i",
    ];
    names
        .iter()
        .zip(rec)
        .map(|(n, s)| Waveform::new(*n, dt, 0.0, s))
        .collect()
}
