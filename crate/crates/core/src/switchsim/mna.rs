//! Modified nodal analysis with trapezoidal companion models.
//!
//! Every two-terminal element carries current from terminal `a` to `b`.
//! Reactive elements are replaced each step by a conductance `G` in parallel
//! with a current `J` so that `i = G (v_a - v_b) + J`. The first step after
//! any change of switch, diode or source state uses backward Euler instead,
//! which damps the spurious oscillation trapezoidal integration produces at
//! discontinuities. Factorizations are cached per topology.

use std::collections::{HashMap, HashSet};

use nalgebra::{DMatrix, DVector, Dyn, LU};

use crate::error::{Error, Result};

pub(crate) const GROUND: usize = 0;

/// Conductance from every node to ground, keeps isolated nodes solvable.
const GMIN: f64 = 1e-9;
const DIODE_I_TOL: f64 = 1e-6;
const DIODE_V_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct ElemId(usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Gate(usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Source(usize);

#[derive(Debug, Clone, Copy)]
enum Kind {
    Resistor { g: f64 },
    Capacitor { c: f64, state: usize },
    Inductor { l: f64, state: usize },
    Switch { g: f64, gate: usize },
    Diode { g: f64, slot: usize },
    VSource { src: usize, var: usize },
    /// Ideal coupling `v(a, b) = k v(pa, pb)`; `a`/`b` is the secondary.
    Transformer { k: f64, pa: usize, pb: usize, var: usize },
}

#[derive(Debug, Clone, Copy)]
struct Element {
    a: usize,
    b: usize,
    kind: Kind,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct Netlist {
    nodes: usize,
    elements: Vec<Element>,
    gates: usize,
    diodes: usize,
    sources: usize,
    vars: usize,
    caps: usize,
    inds: usize,
}

impl Netlist {
    pub fn new() -> Self {
        Self {
            nodes: 1,
            ..Default::default()
        }
    }

    pub fn node(&mut self) -> usize {
        self.nodes += 1;
        self.nodes - 1
    }

    fn push(&mut self, a: usize, b: usize, kind: Kind) -> ElemId {
        assert!(a < self.nodes && b < self.nodes, "unknown node");
        self.elements.push(Element { a, b, kind });
        ElemId(self.elements.len() - 1)
    }

    pub fn resistor(&mut self, a: usize, b: usize, r: f64) -> ElemId {
        self.push(a, b, Kind::Resistor { g: 1.0 / r })
    }

    pub fn capacitor(&mut self, a: usize, b: usize, c: f64) -> ElemId {
        self.caps += 1;
        self.push(a, b, Kind::Capacitor { c, state: self.caps - 1 })
    }

    pub fn inductor(&mut self, a: usize, b: usize, l: f64) -> ElemId {
        self.inds += 1;
        self.push(a, b, Kind::Inductor { l, state: self.inds - 1 })
    }

    /// Controlled switch with resistance `r_on` when its gate is set, open otherwise.
    pub fn switch(&mut self, a: usize, b: usize, r_on: f64) -> (ElemId, Gate) {
        self.gates += 1;
        let gate = self.gates - 1;
        (self.push(a, b, Kind::Switch { g: 1.0 / r_on, gate }), Gate(gate))
    }

    /// Ideal diode conducting from `anode` to `cathode`.
    pub fn diode(&mut self, anode: usize, cathode: usize, r_on: f64) -> ElemId {
        self.diodes += 1;
        let slot = self.diodes - 1;
        self.push(anode, cathode, Kind::Diode { g: 1.0 / r_on, slot })
    }

    /// Voltage source `v(a) - v(b) = E`; its current flows from `a` to `b`
    /// through the source.
    pub fn vsource(&mut self, a: usize, b: usize) -> (ElemId, Source) {
        self.sources += 1;
        self.vars += 1;
        let src = self.sources - 1;
        let var = self.vars - 1;
        (self.push(a, b, Kind::VSource { src, var }), Source(src))
    }

    /// Ideal transformer; the element current is the current entering the
    /// secondary at `sa`.
    pub fn transformer(&mut self, pa: usize, pb: usize, sa: usize, sb: usize, k: f64) -> ElemId {
        assert!(pa < self.nodes && pb < self.nodes, "unknown node");
        self.vars += 1;
        let var = self.vars - 1;
        self.push(sa, sb, Kind::Transformer { k, pa, pb, var })
    }
}

pub(crate) struct Engine {
    net: Netlist,
    dt: f64,
    dim: usize,
    gates: Vec<bool>,
    src_val: Vec<f64>,
    src_on: Vec<bool>,
    diodes: Vec<bool>,
    cap_v: Vec<f64>,
    cap_i: Vec<f64>,
    ind_v: Vec<f64>,
    ind_i: Vec<f64>,
    x: DVector<f64>,
    prev_topology: Option<u64>,
    force_be: bool,
    cache: HashMap<u64, LU<f64, Dyn, Dyn>>,
}

impl Engine {
    pub fn new(net: Netlist, dt: f64) -> Self {
        assert!(
            net.gates + net.sources + net.diodes < 64,
            "topology key exceeds 63 bits"
        );
        let dim = net.nodes - 1 + net.vars;
        Self {
            dt,
            dim,
            gates: vec![false; net.gates],
            src_val: vec![0.0; net.sources],
            src_on: vec![true; net.sources],
            diodes: vec![false; net.diodes],
            cap_v: vec![0.0; net.caps],
            cap_i: vec![0.0; net.caps],
            ind_v: vec![0.0; net.inds],
            ind_i: vec![0.0; net.inds],
            x: DVector::zeros(dim),
            prev_topology: None,
            force_be: true,
            cache: HashMap::new(),
            net,
        }
    }

    pub fn set_gate(&mut self, g: Gate, on: bool) {
        self.gates[g.0] = on;
    }

    pub fn set_source(&mut self, s: Source, value: f64, enabled: bool) {
        self.src_val[s.0] = value;
        self.src_on[s.0] = enabled;
    }

    /// Drops an inductor's current to zero, as when its only path is broken
    /// by a mechanical contact.
    pub fn reset_inductor(&mut self, id: ElemId) {
        if let Kind::Inductor { state, .. } = self.net.elements[id.0].kind {
            self.ind_i[state] = 0.0;
            self.ind_v[state] = 0.0;
            self.force_be = true;
        }
    }

    pub fn cached_topologies(&self) -> usize {
        self.cache.len()
    }

    pub fn node_v(&self, n: usize) -> f64 {
        if n == GROUND {
            0.0
        } else {
            self.x[n - 1]
        }
    }

    pub fn voltage(&self, id: ElemId) -> f64 {
        let e = &self.net.elements[id.0];
        self.node_v(e.a) - self.node_v(e.b)
    }

    /// Current from terminal `a` to `b` after the last accepted step.
    pub fn current(&self, id: ElemId) -> f64 {
        let e = &self.net.elements[id.0];
        let v = self.node_v(e.a) - self.node_v(e.b);
        match e.kind {
            Kind::Resistor { g } => g * v,
            Kind::Switch { g, gate } => {
                if self.gates[gate] {
                    g * v
                } else {
                    0.0
                }
            }
            Kind::Diode { g, slot } => {
                if self.diodes[slot] {
                    g * v
                } else {
                    0.0
                }
            }
            Kind::Capacitor { state, .. } => self.cap_i[state],
            Kind::Inductor { state, .. } => self.ind_i[state],
            Kind::VSource { src, var } => {
                if self.src_on[src] {
                    self.x[self.var_row(var)]
                } else {
                    0.0
                }
            }
            Kind::Transformer { var, .. } => self.x[self.var_row(var)],
        }
    }

    fn var_row(&self, var: usize) -> usize {
        self.net.nodes - 1 + var
    }

    fn topology(&self) -> u64 {
        let mut key = 0u64;
        for b in self.gates.iter().chain(&self.src_on).chain(&self.diodes) {
            key = (key << 1) | u64::from(*b);
        }
        key
    }

    fn companion_g(&self, kind: Kind, be: bool) -> f64 {
        match kind {
            Kind::Capacitor { c, .. } => {
                if be {
                    c / self.dt
                } else {
                    2.0 * c / self.dt
                }
            }
            Kind::Inductor { l, .. } => {
                if be {
                    self.dt / l
                } else {
                    self.dt / (2.0 * l)
                }
            }
            _ => unreachable!(),
        }
    }

    fn assemble(&self, be: bool) -> DMatrix<f64> {
        let n = self.dim;
        let mut m = DMatrix::zeros(n, n);
        let idx = |node: usize| node.checked_sub(1);
        let stamp = |m: &mut DMatrix<f64>, a: usize, b: usize, g: f64| {
            if let Some(i) = idx(a) {
                m[(i, i)] += g;
            }
            if let Some(j) = idx(b) {
                m[(j, j)] += g;
            }
            if let (Some(i), Some(j)) = (idx(a), idx(b)) {
                m[(i, j)] -= g;
                m[(j, i)] -= g;
            }
        };
        let couple = |m: &mut DMatrix<f64>, node: usize, r: usize, c: f64| {
            if let Some(i) = idx(node) {
                m[(i, r)] += c;
                m[(r, i)] += c;
            }
        };
        for node in 1..self.net.nodes {
            m[(node - 1, node - 1)] += GMIN;
        }
        for e in &self.net.elements {
            match e.kind {
                Kind::Resistor { g } => stamp(&mut m, e.a, e.b, g),
                Kind::Switch { g, gate } => {
                    if self.gates[gate] {
                        stamp(&mut m, e.a, e.b, g)
                    }
                }
                Kind::Diode { g, slot } => {
                    if self.diodes[slot] {
                        stamp(&mut m, e.a, e.b, g)
                    }
                }
                Kind::Capacitor { .. } | Kind::Inductor { .. } => {
                    stamp(&mut m, e.a, e.b, self.companion_g(e.kind, be))
                }
                Kind::VSource { src, var } => {
                    let r = self.var_row(var);
                    if self.src_on[src] {
                        couple(&mut m, e.a, r, 1.0);
                        couple(&mut m, e.b, r, -1.0);
                    } else {
                        m[(r, r)] = 1.0;
                    }
                }
                Kind::Transformer { k, pa, pb, var } => {
                    let r = self.var_row(var);
                    couple(&mut m, e.a, r, 1.0);
                    couple(&mut m, e.b, r, -1.0);
                    couple(&mut m, pa, r, -k);
                    couple(&mut m, pb, r, k);
                }
            }
        }
        m
    }

    fn rhs(&self, be: bool) -> DVector<f64> {
        let mut rhs = DVector::zeros(self.dim);
        let inject = |rhs: &mut DVector<f64>, a: usize, b: usize, j: f64| {
            if a != GROUND {
                rhs[a - 1] -= j;
            }
            if b != GROUND {
                rhs[b - 1] += j;
            }
        };
        for e in &self.net.elements {
            match e.kind {
                Kind::Capacitor { state, .. } => {
                    let g = self.companion_g(e.kind, be);
                    let j = if be {
                        -g * self.cap_v[state]
                    } else {
                        -(g * self.cap_v[state] + self.cap_i[state])
                    };
                    inject(&mut rhs, e.a, e.b, j);
                }
                Kind::Inductor { state, .. } => {
                    let g = self.companion_g(e.kind, be);
                    let j = if be {
                        self.ind_i[state]
                    } else {
                        self.ind_i[state] + g * self.ind_v[state]
                    };
                    inject(&mut rhs, e.a, e.b, j);
                }
                Kind::VSource { src, var } => {
                    if self.src_on[src] {
                        rhs[self.var_row(var)] = self.src_val[src];
                    }
                }
                _ => {}
            }
        }
        rhs
    }

    fn solve(&mut self, topology: u64, be: bool, step: usize, t: f64) -> Result<()> {
        let key = (topology << 1) | u64::from(be);
        if !self.cache.contains_key(&key) {
            let lu = self.assemble(be).lu();
            if !lu.is_invertible() {
                return Err(Error::Simulation {
                    step,
                    t,
                    reason: "singular network matrix".into(),
                });
            }
            self.cache.insert(key, lu);
        }
        let mut rhs = self.rhs(be);
        self.cache[&key].solve_mut(&mut rhs);
        if rhs.iter().any(|v| !v.is_finite()) {
            return Err(Error::Simulation {
                step,
                t,
                reason: "non-finite network solution".into(),
            });
        }
        self.x = rhs;
        Ok(())
    }

    /// Diodes whose assumed state contradicts the current solution, with the
    /// size of the violation.
    fn diode_violations(&self) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        for e in &self.net.elements {
            if let Kind::Diode { g, slot } = e.kind {
                let v = self.node_v(e.a) - self.node_v(e.b);
                if self.diodes[slot] {
                    let i = g * v;
                    if i < -DIODE_I_TOL {
                        out.push((slot, -i));
                    }
                } else if v > DIODE_V_TOL {
                    out.push((slot, v * g));
                }
            }
        }
        out
    }

    /// Advances one step; `step` and `t` only label errors.
    pub fn step(&mut self, step: usize, t: f64) -> Result<()> {
        let n = self.diodes.len();
        let cap = (1usize << n.min(20)).max(8);
        let mut visited: HashSet<Vec<bool>> = HashSet::new();
        for _ in 0..cap {
            let topology = self.topology();
            let be = self.force_be || self.prev_topology != Some(topology);
            self.solve(topology, be, step, t)?;
            let violations = self.diode_violations();
            if violations.is_empty() {
                self.accept(be);
                self.prev_topology = Some(topology);
                self.force_be = false;
                return Ok(());
            }
            visited.insert(self.diodes.clone());
            let mut candidate = self.diodes.clone();
            for &(slot, _) in &violations {
                candidate[slot] = !candidate[slot];
            }
            if visited.contains(&candidate) {
                candidate = self.diodes.clone();
                let worst = violations
                    .iter()
                    .max_by(|a, b| a.1.total_cmp(&b.1))
                    .map(|v| v.0)
                    .unwrap();
                candidate[worst] = !candidate[worst];
            }
            self.diodes = candidate;
        }
        Err(Error::Simulation {
            step,
            t,
            reason: format!("diode states did not converge after {cap} iterations"),
        })
    }

    fn accept(&mut self, be: bool) {
        for idx in 0..self.net.elements.len() {
            let e = self.net.elements[idx];
            let v = self.node_v(e.a) - self.node_v(e.b);
            match e.kind {
                Kind::Capacitor { state, .. } => {
                    let g = self.companion_g(e.kind, be);
                    let i = if be {
                        g * (v - self.cap_v[state])
                    } else {
                        g * (v - self.cap_v[state]) - self.cap_i[state]
                    };
                    self.cap_v[state] = v;
                    self.cap_i[state] = i;
                }
                Kind::Inductor { state, .. } => {
                    let g = self.companion_g(e.kind, be);
                    let i = if be {
                        self.ind_i[state] + g * v
                    } else {
                        self.ind_i[state] + g * (v + self.ind_v[state])
                    };
                    self.ind_v[state] = v;
                    self.ind_i[state] = i;
                }
                _ => {}
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resistive_divider() {
        let mut net = Netlist::new();
        let a = net.node();
        let b = net.node();
        let (_, s) = net.vsource(a, GROUND);
        let r1 = net.resistor(a, b, 1.0);
        net.resistor(b, GROUND, 3.0);
        let mut e = Engine::new(net, 1e-6);
        e.set_source(s, 4.0, true);
        e.step(0, 0.0).unwrap();
        assert!((e.node_v(b) - 3.0).abs() < 1e-6);
        assert!((e.current(r1) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn rc_charging_matches_exponential() {
        let (r, c, dt) = (1e3, 1e-6, 1e-6);
        let mut net = Netlist::new();
        let a = net.node();
        let b = net.node();
        let (_, s) = net.vsource(a, GROUND);
        net.resistor(a, b, r);
        let cap = net.capacitor(b, GROUND, c);
        let mut e = Engine::new(net, dt);
        e.set_source(s, 1.0, true);
        for k in 0..2000 {
            e.step(k, k as f64 * dt).unwrap();
        }
        let t = 2000.0 * dt;
        let expected = 1.0 - (-t / (r * c)).exp();
        assert!((e.voltage(cap) - expected).abs() < 2e-3, "{}", e.voltage(cap));
    }

    #[test]
    fn lc_tank_conserves_energy() {
        // Trapezoidal integration is energy-preserving on a lossless tank.
        let (l, c, dt) = (1e-3, 1e-6, 1e-7);
        let mut net = Netlist::new();
        let a = net.node();
        let cap = net.capacitor(a, GROUND, c);
        let ind = net.inductor(a, GROUND, l);
        let mut e = Engine::new(net, dt);
        e.cap_v[0] = 1.0;
        e.force_be = false;
        e.prev_topology = Some(e.topology());
        let w0 = 0.5 * c;
        for k in 0..20_000 {
            e.step(k, k as f64 * dt).unwrap();
        }
        let w = 0.5 * c * e.voltage(cap).powi(2) + 0.5 * l * e.current(ind).powi(2);
        assert!((w - w0).abs() / w0 < 1e-3, "{w} vs {w0}");
    }

    #[test]
    fn half_wave_rectifier_blocks_reverse() {
        let mut net = Netlist::new();
        let a = net.node();
        let b = net.node();
        let (_, s) = net.vsource(a, GROUND);
        let d = net.diode(a, b, 1e-3);
        net.resistor(b, GROUND, 10.0);
        let mut e = Engine::new(net, 1e-6);
        e.set_source(s, 5.0, true);
        e.step(0, 0.0).unwrap();
        assert!((e.current(d) - 0.5).abs() < 1e-3);
        e.set_source(s, -5.0, true);
        e.step(1, 1e-6).unwrap();
        assert_eq!(e.current(d), 0.0);
        assert!(e.node_v(b).abs() < 1e-6);
    }

    #[test]
    fn transformer_reflects_load() {
        let mut net = Netlist::new();
        let p = net.node();
        let s = net.node();
        let (src_id, src) = net.vsource(p, GROUND);
        let tx = net.transformer(p, GROUND, s, GROUND, 2.0);
        net.resistor(s, GROUND, 4.0);
        let mut e = Engine::new(net, 1e-6);
        e.set_source(src, 10.0, true);
        e.step(0, 0.0).unwrap();
        assert!((e.node_v(s) - 20.0).abs() < 1e-6);
        // 5 A into the load is -5 A entering the secondary; the primary
        // draws 10 A, which is -10 A through the source from a to b.
        assert!((e.current(tx) + 5.0).abs() < 1e-6);
        assert!((e.current(src_id) + 10.0).abs() < 1e-5);
    }

    #[test]
    fn disabled_source_carries_no_current() {
        let mut net = Netlist::new();
        let a = net.node();
        let (id, s) = net.vsource(a, GROUND);
        net.resistor(a, GROUND, 1.0);
        let mut e = Engine::new(net, 1e-6);
        e.set_source(s, 3.0, false);
        e.step(0, 0.0).unwrap();
        assert_eq!(e.current(id), 0.0);
        assert_eq!(e.node_v(a), 0.0);
    }
}
