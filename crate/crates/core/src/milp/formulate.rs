use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::sync::Arc;

use super::{Context, Family, LinearModel, MilpProblem, Sense, VarKind, VarMeta};
use crate::error::{Error, Result};
use crate::model::{DeviceKind, Wavelength};
use crate::scenario::Scenario;
use crate::topology::{awgr_output, validate, Adjacency, Arc as LinkArc, Topology};

/// Deliberate formulation defects for mutation testing of the verifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Drops the idle power of every processing node from the objective.
    ZeroNodeIdle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FormulationOptions {
    /// Emit the per-task linking inequalities `x <= y` and
    /// `task traffic through n <= task traffic · z_n`.
    pub linking: bool,
    /// Emit the aggregate device activation rows.
    pub activation: bool,
    pub fault: Option<Fault>,
}

impl Default for FormulationOptions {
    fn default() -> Self {
        Self {
            linking: true,
            activation: true,
            fault: None,
        }
    }
}

/// Arcs and candidate nodes usable by one task.
struct Commodity {
    source: usize,
    nodes: Vec<usize>,
    arcs: Vec<LinkArc>,
}

pub fn formulate(topology: &Topology, scenario: &Scenario) -> Result<MilpProblem> {
    formulate_with(topology, scenario, FormulationOptions::default())
}

pub fn formulate_with(topology: &Topology, scenario: &Scenario, options: FormulationOptions) -> Result<MilpProblem> {
    let violations = validate(topology);
    if let Some(v) = violations.first() {
        return Err(Error::Formulation(format!(
            "topology invalid ({} violations), first: {} {}: {}",
            violations.len(),
            v.subject,
            v.rule,
            v.message
        )));
    }
    scenario.validate(topology)?;

    let adj = topology.adjacency();
    let eligible: Vec<bool> = topology
        .processing_nodes
        .iter()
        .map(|n| n.user.is_none_or(|u| !topology.users[u].demanding))
        .collect();
    let mut hosted: Vec<Vec<usize>> = vec![Vec::new(); topology.devices.len()];
    for (i, n) in topology.processing_nodes.iter().enumerate() {
        if eligible[i] {
            hosted[n.attachment].push(i);
        }
    }

    let commodities: Vec<Commodity> = scenario
        .tasks
        .iter()
        .enumerate()
        .map(|(t, task)| {
            let source = topology.users[task.source].ap;
            let c = commodity(topology, &adj, &hosted, source);
            if c.nodes.is_empty() {
                Err(Error::Infeasible(format!("task {t} cannot reach any processing node")))
            } else {
                Ok(c)
            }
        })
        .collect::<Result<_>>()?;

    Builder::new(topology, scenario, &adj, &hosted, &commodities, options).build()
}

/// Forward search from the source over wavelength-continuous arcs, then a
/// backward pass keeping only arcs that lead to a candidate node.
fn commodity(topology: &Topology, adj: &Adjacency, hosted: &[Vec<usize>], source: usize) -> Commodity {
    let mut id: HashMap<LinkArc, usize> = HashMap::new();
    let mut arcs: Vec<LinkArc> = Vec::new();
    let mut succ: Vec<Vec<usize>> = Vec::new();
    let mut queue = VecDeque::new();
    let mut buf = Vec::new();

    let mut intern = |a: LinkArc, arcs: &mut Vec<LinkArc>, succ: &mut Vec<Vec<usize>>, queue: &mut VecDeque<usize>| {
        *id.entry(a).or_insert_with(|| {
            arcs.push(a);
            succ.push(Vec::new());
            queue.push_back(arcs.len() - 1);
            arcs.len() - 1
        })
    };

    topology.source_arcs(adj, source, &mut buf);
    for a in buf.drain(..) {
        if topology.links[a.link].to != source {
            intern(a, &mut arcs, &mut succ, &mut queue);
        }
    }
    while let Some(i) = queue.pop_front() {
        let arc = arcs[i];
        let (tail, head) = (topology.links[arc.link].from, topology.links[arc.link].to);
        // Access points only inject or absorb.
        if topology.devices[head].kind == DeviceKind::Ap {
            continue;
        }
        topology.next_arcs(adj, arc, &mut buf);
        let from_ap = topology.devices[tail].kind == DeviceKind::Ap;
        let next: Vec<LinkArc> = buf
            .drain(..)
            .filter(|a| {
                let to = topology.links[a.link].to;
                // An ONU bridges its access point and the optical side, never
                // one side back onto itself.
                to != source
                    && (topology.devices[head].kind != DeviceKind::Onu
                        || from_ap != (topology.devices[to].kind == DeviceKind::Ap))
            })
            .collect();
        for a in next {
            let k = intern(a, &mut arcs, &mut succ, &mut queue);
            succ[i].push(k);
        }
    }

    let mut pred: Vec<Vec<usize>> = vec![Vec::new(); arcs.len()];
    for (i, s) in succ.iter().enumerate() {
        for &k in s {
            pred[k].push(i);
        }
    }
    let mut useful = vec![false; arcs.len()];
    let mut stack: Vec<usize> = (0..arcs.len())
        .filter(|&i| !hosted[topology.links[arcs[i].link].to].is_empty())
        .collect();
    for &i in &stack {
        useful[i] = true;
    }
    while let Some(i) = stack.pop() {
        for &p in &pred[i] {
            if !useful[p] {
                useful[p] = true;
                stack.push(p);
            }
        }
    }

    let mut kept: Vec<LinkArc> = arcs.iter().zip(&useful).filter(|(_, u)| **u).map(|(a, _)| *a).collect();
    kept.sort();
    let mut nodes: BTreeSet<usize> = hosted[source].iter().copied().collect();
    for a in &kept {
        nodes.extend(hosted[topology.links[a.link].to].iter().copied());
    }
    Commodity {
        source,
        nodes: nodes.into_iter().collect(),
        arcs: kept,
    }
}

struct Builder<'a> {
    topology: &'a Topology,
    scenario: &'a Scenario,
    hosted: &'a [Vec<usize>],
    commodities: &'a [Commodity],
    options: FormulationOptions,
    model: LinearModel,
    families: Vec<Family>,
    meta: Vec<VarMeta>,
    choice: Vec<BTreeMap<usize, usize>>,
    alloc: Vec<BTreeMap<usize, usize>>,
    flow: Vec<BTreeMap<LinkArc, usize>>,
    node_active: BTreeMap<usize, usize>,
    device_active: BTreeMap<usize, usize>,
}

impl<'a> Builder<'a> {
    fn new(
        topology: &'a Topology,
        scenario: &'a Scenario,
        _adj: &'a Adjacency,
        hosted: &'a [Vec<usize>],
        commodities: &'a [Commodity],
        options: FormulationOptions,
    ) -> Self {
        let name = format!("fogopt_{}", topology.backhaul.as_str());
        Self {
            topology,
            scenario,
            hosted,
            commodities,
            options,
            model: LinearModel::new(name),
            families: Vec::new(),
            meta: Vec::new(),
            choice: Vec::new(),
            alloc: Vec::new(),
            flow: Vec::new(),
            node_active: BTreeMap::new(),
            device_active: BTreeMap::new(),
        }
    }

    fn var(&mut self, name: String, kind: VarKind, upper: Option<f64>, cost: f64, meta: VarMeta) -> usize {
        self.meta.push(meta);
        self.model.add_var(name, kind, upper, cost)
    }

    fn row(&mut self, family: Family, name: String, terms: Vec<(usize, f64)>, sense: Sense, rhs: f64) {
        self.families.push(family);
        self.model.add_row(name, terms, sense, rhs);
    }

    /// Watts per Mbps for a device's throughput, zero when it draws no power.
    fn device_slope(&self, device: usize) -> f64 {
        let d = &self.topology.devices[device];
        if d.is_powered() {
            d.profile.slope(d.capacity)
        } else {
            0.0
        }
    }

    fn build(mut self) -> Result<MilpProblem> {
        let t = self.topology;
        let ddr = self.scenario.ddr;
        let ntasks = self.scenario.tasks.len();

        // Choice and allocation variables.
        for (k, c) in self.commodities.iter().enumerate() {
            let mut m = BTreeMap::new();
            for &d in &c.nodes {
                let j = self.var(
                    format!("x_t{k}_{}", t.processing_nodes[d].id),
                    VarKind::Binary,
                    None,
                    0.0,
                    VarMeta::Choice { task: k, node: d },
                );
                m.insert(d, j);
            }
            self.choice.push(m);
        }
        for (k, c) in self.commodities.iter().enumerate() {
            let demand = self.scenario.tasks[k].processing_demand;
            let mut m = BTreeMap::new();
            for &d in &c.nodes {
                let node = &t.processing_nodes[d];
                let cost = node.profile.slope(node.capacity) + ddr * self.device_slope(node.attachment);
                let j = self.var(
                    format!("psi_t{k}_{}", node.id),
                    VarKind::Continuous,
                    Some(demand),
                    cost,
                    VarMeta::Allocation { task: k, node: d },
                );
                m.insert(d, j);
            }
            self.alloc.push(m);
        }
        for (k, c) in self.commodities.iter().enumerate() {
            let mut m = BTreeMap::new();
            for &a in &c.arcs {
                let cost = self.device_slope(t.links[a.link].from);
                let j = self.var(
                    format!("lam_t{k}_l{}_{}", a.link, a.wavelength),
                    VarKind::Continuous,
                    None,
                    cost,
                    VarMeta::Flow { task: k, link: a.link, wavelength: a.wavelength },
                );
                m.insert(a, j);
            }
            self.flow.push(m);
        }

        let used_nodes: BTreeSet<usize> = self.commodities.iter().flat_map(|c| c.nodes.iter().copied()).collect();
        for &d in &used_nodes {
            let node = &t.processing_nodes[d];
            let idle = match self.options.fault {
                Some(Fault::ZeroNodeIdle) => 0.0,
                None => node.profile.idle_power,
            };
            let j = self.var(format!("y_{}", node.id), VarKind::Binary, None, idle, VarMeta::NodeActive { node: d });
            self.node_active.insert(d, j);
        }

        // Devices touched by each commodity.
        let touched: Vec<BTreeSet<usize>> = self
            .commodities
            .iter()
            .map(|c| {
                let mut s: BTreeSet<usize> = c.arcs.iter().flat_map(|a| [t.links[a.link].from, t.links[a.link].to]).collect();
                s.insert(c.source);
                s
            })
            .collect();
        let all_touched: BTreeSet<usize> = touched.iter().flatten().copied().collect();
        for &n in &all_touched {
            let d = &t.devices[n];
            if d.is_powered() {
                let j = self.var(format!("z_{}", d.id), VarKind::Binary, None, d.profile.idle_power, VarMeta::DeviceActive { device: n });
                self.device_active.insert(n, j);
            }
        }

        // (a) demand satisfaction.
        for k in 0..ntasks {
            let terms = self.alloc[k].values().map(|&j| (j, 1.0)).collect();
            let demand = self.scenario.tasks[k].processing_demand;
            self.row(Family::Demand, format!("dem_t{k}"), terms, Sense::Eq, demand);
        }

        // (b) node capacity with activation.
        for &d in &used_nodes {
            let mut terms: Vec<(usize, f64)> = (0..ntasks).filter_map(|k| self.alloc[k].get(&d).map(|&j| (j, 1.0))).collect();
            terms.push((self.node_active[&d], -t.processing_nodes[d].capacity));
            self.row(Family::NodeCapacity, format!("cap_{}", t.processing_nodes[d].id), terms, Sense::Le, 0.0);
        }

        // (c) per-wavelength link capacity.
        let mut per_arc: BTreeMap<LinkArc, Vec<(usize, f64)>> = BTreeMap::new();
        for m in &self.flow {
            for (a, &j) in m {
                per_arc.entry(*a).or_default().push((j, 1.0));
            }
        }
        for (a, terms) in per_arc {
            let cap = t.links[a.link].capacity[&a.wavelength];
            self.row(Family::LinkCapacity, format!("link_l{}_{}", a.link, a.wavelength), terms, Sense::Le, cap);
        }

        // (d)/(e) conservation, continuity and source/sink coupling.
        for k in 0..ntasks {
            self.conservation_rows(k, &touched[k]);
        }

        // (f) single assignment.
        for k in 0..ntasks {
            let demand = self.scenario.tasks[k].processing_demand;
            let pairs: Vec<(usize, usize, usize)> =
                self.choice[k].iter().map(|(&d, &x)| (d, x, self.alloc[k][&d])).collect();
            for (d, x, psi) in &pairs {
                let name = format!("asg_t{k}_{}", t.processing_nodes[*d].id);
                self.row(Family::SingleAssignment, name, vec![(*psi, 1.0), (*x, -demand)], Sense::Eq, 0.0);
            }
            let terms = pairs.iter().map(|&(_, x, _)| (x, 1.0)).collect();
            self.row(Family::SingleAssignment, format!("one_t{k}"), terms, Sense::Eq, 1.0);
        }

        // (g) device activation.
        if self.options.activation {
            for &n in &all_touched {
                let mut terms = Vec::new();
                for k in 0..ntasks {
                    terms.extend(self.throughput_terms(k, n));
                }
                if terms.is_empty() {
                    continue;
                }
                let cap = t.devices[n].capacity;
                let name = format!("act_{}", t.devices[n].id);
                match self.device_active.get(&n) {
                    Some(&z) => {
                        terms.push((z, -cap));
                        self.row(Family::Activation, name, terms, Sense::Le, 0.0);
                    }
                    None => self.row(Family::Activation, name, terms, Sense::Le, cap),
                }
            }
        }

        if self.options.linking {
            for k in 0..ntasks {
                let pairs: Vec<(usize, usize)> = self.choice[k].iter().map(|(&d, &x)| (d, x)).collect();
                for (d, x) in pairs {
                    let y = self.node_active[&d];
                    let name = format!("lnk_t{k}_{}", t.processing_nodes[d].id);
                    self.row(Family::Linking, name, vec![(x, 1.0), (y, -1.0)], Sense::Le, 0.0);
                }
                let traffic = self.scenario.tasks[k].traffic_demand;
                for &n in &touched[k] {
                    let Some(&z) = self.device_active.get(&n) else { continue };
                    let mut terms = self.throughput_terms(k, n);
                    if terms.is_empty() {
                        continue;
                    }
                    terms.push((z, -traffic));
                    self.row(Family::Linking, format!("lnkd_t{k}_{}", t.devices[n].id), terms, Sense::Le, 0.0);
                }
            }
            self.dominator_rows(&touched);
            self.cover_rows();
            self.cardinality_rows();
            self.twin_rows();
        }

        self.model.check_well_formed()?;
        let context = Arc::new(Context {
            topology: self.topology.clone(),
            scenario: self.scenario.clone(),
        });
        Ok(MilpProblem::new(self.model, self.families, self.meta, context))
    }

    /// For each task `k` and powered device `v`, the candidates `d` that
    /// `k` can only reach through `v`.
    fn dominated(&self, k: usize, devices: &BTreeSet<usize>) -> BTreeMap<usize, Vec<usize>> {
        let t = self.topology;
        let c = &self.commodities[k];
        let mut succ: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for a in &c.arcs {
            succ.entry(t.links[a.link].from).or_default().push(t.links[a.link].to);
        }
        let mut out = BTreeMap::new();
        let mut seen: BTreeSet<usize> = BTreeSet::new();
        let mut stack = Vec::new();
        for &v in devices {
            if !self.device_active.contains_key(&v) {
                continue;
            }
            seen.clear();
            if v != c.source {
                seen.insert(c.source);
                stack.push(c.source);
            }
            while let Some(u) = stack.pop() {
                for &w in succ.get(&u).into_iter().flatten() {
                    if w != v && seen.insert(w) {
                        stack.push(w);
                    }
                }
            }
            let nodes: Vec<usize> =
                c.nodes.iter().copied().filter(|&d| !seen.contains(&t.processing_nodes[d].attachment)).collect();
            if !nodes.is_empty() {
                out.insert(v, nodes);
            }
        }
        out
    }

    /// Activation implied by placement: a task placed on a node it can only
    /// reach through `v` keeps `v` on, per task (`sum x <= z_v`) and in
    /// aggregate (`sum psi <= (sum capacity) z_v`).
    fn dominator_rows(&mut self, touched: &[BTreeSet<usize>]) {
        let t = self.topology;
        let mut aggregate: BTreeMap<usize, (BTreeSet<usize>, Vec<(usize, f64)>)> = BTreeMap::new();
        // Devices every user of a node must pass; `None` once a task can
        // use the node without traffic.
        let mut gate: BTreeMap<usize, Option<BTreeSet<usize>>> = BTreeMap::new();
        for k in 0..self.commodities.len() {
            if self.scenario.tasks[k].traffic_demand <= 0.0 {
                for &d in &self.commodities[k].nodes {
                    gate.insert(d, None);
                }
                continue;
            }
            let dominated = self.dominated(k, &touched[k]);
            for &d in &self.commodities[k].nodes {
                let through: BTreeSet<usize> =
                    dominated.iter().filter(|(_, nodes)| nodes.contains(&d)).map(|(&v, _)| v).collect();
                match gate.get_mut(&d) {
                    None => {
                        gate.insert(d, Some(through));
                    }
                    Some(Some(g)) => g.retain(|v| through.contains(v)),
                    Some(None) => {}
                }
            }
            for (v, nodes) in dominated {
                let z = self.device_active[&v];
                let mut terms: Vec<(usize, f64)> = nodes.iter().map(|d| (self.choice[k][d], 1.0)).collect();
                terms.push((z, -1.0));
                self.row(Family::Linking, format!("dom_t{k}_{}", t.devices[v].id), terms, Sense::Le, 0.0);
                let entry = aggregate.entry(v).or_default();
                for d in nodes {
                    entry.0.insert(d);
                    entry.1.push((self.alloc[k][&d], 1.0));
                }
            }
        }
        for (v, (nodes, mut terms)) in aggregate {
            let capacity: f64 = nodes.iter().map(|&d| t.processing_nodes[d].capacity).sum();
            terms.push((self.device_active[&v], -capacity));
            self.row(Family::Linking, format!("domc_{}", t.devices[v].id), terms, Sense::Le, 0.0);
        }
        // An active node with no task costs at least as much as an idle one,
        // so some optimum keeps its gate devices on whenever it is active.
        for (d, devices) in gate {
            for v in devices.into_iter().flatten() {
                let terms = vec![(self.node_active[&d], 1.0), (self.device_active[&v], -1.0)];
                let name = format!("domy_{}_{}", t.processing_nodes[d].id, t.devices[v].id);
                self.row(Family::Linking, name, terms, Sense::Le, 0.0);
            }
        }
    }

    /// Tasks that may use node `d`, and how many of them it can hold at
    /// once, taking the smallest demands first.
    fn node_fit(&self, d: usize) -> (Vec<usize>, usize) {
        let users: Vec<usize> = (0..self.choice.len()).filter(|&k| self.choice[k].contains_key(&d)).collect();
        let mut demands: Vec<f64> = users.iter().map(|&k| self.scenario.tasks[k].processing_demand).collect();
        demands.sort_by(f64::total_cmp);
        let capacity = self.topology.processing_nodes[d].capacity;
        let mut load = 0.0;
        let mut fit = 0;
        for q in demands {
            load += q;
            if load > capacity * (1.0 + 1e-12) {
                break;
            }
            fit += 1;
        }
        (users, fit)
    }

    /// `sum_k x_kd <= c_d y_d` where `c_d` is the node's task limit.
    fn cardinality_rows(&mut self) {
        let t = self.topology;
        let nodes: Vec<usize> = self.node_active.keys().copied().collect();
        for d in nodes {
            let (users, fit) = self.node_fit(d);
            if fit >= users.len() {
                continue;
            }
            let mut terms: Vec<(usize, f64)> = users.iter().map(|&k| (self.choice[k][&d], 1.0)).collect();
            terms.push((self.node_active[&d], -(fit as f64)));
            self.row(Family::Linking, format!("card_{}", t.processing_nodes[d].id), terms, Sense::Le, 0.0);
        }
    }

    /// Rounded covers of `sum cap_d y_d >= total demand` and
    /// `sum c_d y_d >= task count`: dividing by each distinct coefficient `q`
    /// and rounding up both sides keeps them valid for binary `y`.
    fn cover_rows(&mut self) {
        let t = self.topology;
        let total: f64 = self.scenario.tasks.iter().map(|task| task.processing_demand).sum();
        let tasks = self.scenario.tasks.len() as f64;
        let capacity: Vec<(usize, f64)> =
            self.node_active.iter().map(|(&d, &y)| (y, t.processing_nodes[d].capacity)).collect();
        let count: Vec<(usize, f64)> = self
            .node_active
            .iter()
            .map(|(&d, &y)| {
                let (users, fit) = self.node_fit(d);
                (y, fit.min(users.len()) as f64)
            })
            .collect();
        self.lifted_count_rows(&count, self.scenario.tasks.len());
        for (kind, coefficients, need) in [("cap", capacity, total), ("count", count, tasks)] {
            let mut quanta: Vec<f64> = coefficients.iter().map(|&(_, c)| c).filter(|&c| c > 0.0).collect();
            quanta.sort_by(f64::total_cmp);
            quanta.dedup();
            for q in quanta {
                let rhs = (need / q - 1e-9).ceil();
                if rhs <= need / q + 1e-9 {
                    continue;
                }
                let terms = coefficients.iter().map(|&(y, c)| (y, (c / q - 1e-9).ceil())).collect();
                self.row(Family::Linking, format!("cover_{kind}_{q}"), terms, Sense::Ge, rhs);
            }
        }
    }

    /// Orders interchangeable nodes: `y_a >= y_b` for twins `a < b`. Twins
    /// sit on disjoint private device sets that are wired identically to the
    /// same outside devices, so any solution can be permuted to respect
    /// the order at equal cost.
    fn twin_rows(&mut self) {
        let t = self.topology;
        let mut hosts = vec![0usize; t.devices.len()];
        for n in &t.processing_nodes {
            hosts[n.attachment] += 1;
        }
        let mut has_user = vec![false; t.devices.len()];
        let mut demanding = vec![false; t.devices.len()];
        for u in &t.users {
            has_user[u.ap] = true;
            demanding[u.ap] |= u.demanding;
        }
        let mut neighbours: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); t.devices.len()];
        let mut incident: Vec<Vec<usize>> = vec![Vec::new(); t.devices.len()];
        for (i, l) in t.links.iter().enumerate() {
            neighbours[l.from].insert(l.to);
            neighbours[l.to].insert(l.from);
            incident[l.from].push(i);
            if l.to != l.from {
                incident[l.to].push(i);
            }
        }
        let busy = |v: usize| hosts[v] > 0 || has_user[v];

        let mut groups: BTreeMap<String, Vec<(usize, BTreeSet<usize>)>> = BTreeMap::new();
        for &d in self.node_active.keys() {
            let a = t.processing_nodes[d].attachment;
            if hosts[a] != 1 || demanding[a] {
                continue;
            }
            let mut private = vec![a];
            for &u in &neighbours[a] {
                if !busy(u) && neighbours[u].iter().all(|&w| w == a || !busy(w)) {
                    private.push(u);
                }
            }
            let members: BTreeSet<usize> = private.iter().copied().collect();
            let local = |v: usize| {
                let dev = &t.devices[v];
                let mut links: Vec<String> = incident[v]
                    .iter()
                    .map(|&i| {
                        let l = &t.links[i];
                        let end = |x: usize| if x == a { "a".to_string() } else if members.contains(&x) { "p".into() } else { format!("b{x}") };
                        format!("{}>{}:{:?}:{:?}:{:?}", end(l.from), end(l.to), l.capacity, l.from_port, l.to_port)
                    })
                    .collect();
                links.sort();
                format!("{:?}/{:?}/{:?}/{}/{}", dev.kind, dev.capacity, dev.profile, dev.wavelength_converting, links.join(","))
            };
            let mut parts: Vec<String> = private[1..].iter().map(|&v| local(v)).collect();
            parts.sort();
            let node = &t.processing_nodes[d];
            let key = format!("{:?}/{:?}/{:?}|{}|{}", node.tier, node.capacity, node.profile, local(a), parts.join("|"));
            groups.entry(key).or_default().push((d, members));
        }
        for twins in groups.values() {
            for pair in twins.windows(2) {
                let ((d1, p1), (d2, p2)) = (&pair[0], &pair[1]);
                if !p1.is_disjoint(p2) || p1.iter().any(|&v| neighbours[v].iter().any(|w| p2.contains(w))) {
                    continue;
                }
                let name = format!("twin_{}_{}", t.processing_nodes[*d1].id, t.processing_nodes[*d2].id);
                let terms = vec![(self.node_active[d1], 1.0), (self.node_active[d2], -1.0)];
                self.row(Family::Linking, name, terms, Sense::Ge, 0.0);
            }
        }
    }

    /// Facets of the two-class count knapsack `F a + S b >= need`, lifted
    /// over the remaining classes. `count` holds `(y, tasks the node can
    /// take)` with integral values.
    fn lifted_count_rows(&mut self, count: &[(usize, f64)], need: usize) {
        let mut classes: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for &(y, c) in count {
            if c >= 1.0 {
                classes.entry((c as usize).min(need)).or_default().push(y);
            }
        }
        let values: Vec<usize> = classes.keys().rev().copied().collect();
        let mut seen = BTreeSet::new();
        for (i, &big) in values.iter().enumerate() {
            for &small in &values[i + 1..] {
                let (nb, ns) = (classes[&big].len(), classes[&small].len());
                let mut points = Vec::new();
                for a in 0..=nb {
                    let rest = need.saturating_sub(big * a);
                    let b = rest.div_ceil(small);
                    if b <= ns {
                        points.push((a as f64, b as f64));
                    }
                    if rest == 0 {
                        break;
                    }
                }
                for (alpha, beta, gamma) in lower_hull_facets(&points) {
                    let mut coef: BTreeMap<usize, f64> = BTreeMap::from([(big, alpha), (small, beta)]);
                    let mut dp = cover_costs(need, &[(big, alpha, nb), (small, beta, ns)]);
                    for &v in values.iter().filter(|&&v| v != big && v != small) {
                        let n = classes[&v].len();
                        let mut c: f64 = 0.0;
                        for k in 1..=n {
                            let m = dp[need.saturating_sub(k * v)];
                            if m.is_finite() {
                                c = c.max((gamma - m) / k as f64);
                            }
                        }
                        coef.insert(v, c);
                        add_cover_class(&mut dp, v, c, n);
                    }
                    let key: Vec<(usize, u64)> = coef.iter().map(|(&v, &c)| (v, (c * 1e6).round() as u64)).collect();
                    if !seen.insert((key, (gamma * 1e6).round() as u64)) {
                        continue;
                    }
                    let terms = coef
                        .iter()
                        .filter(|(_, &c)| c > 0.0)
                        .flat_map(|(v, &c)| classes[v].iter().map(move |&y| (y, c)))
                        .collect();
                    let name = format!("lift_{big}_{small}_{}", seen.len());
                    self.row(Family::Linking, name, terms, Sense::Ge, gamma);
                }
            }
        }
    }

    /// Traffic of task `k` handled by device `n`: everything it sends on plus
    /// what it absorbs for nodes attached to it.
    fn throughput_terms(&self, k: usize, n: usize) -> Vec<(usize, f64)> {
        let t = self.topology;
        let ddr = self.scenario.ddr;
        let mut terms: Vec<(usize, f64)> = self.flow[k]
            .iter()
            .filter(|(a, _)| t.links[a.link].from == n)
            .map(|(_, &j)| (j, 1.0))
            .collect();
        for d in &self.hosted[n] {
            if let Some(&j) = self.alloc[k].get(d) {
                terms.push((j, ddr));
            }
        }
        terms
    }

    fn conservation_rows(&mut self, k: usize, devices: &BTreeSet<usize>) {
        let t = self.topology;
        let ddr = self.scenario.ddr;
        let source = self.commodities[k].source;
        let traffic = self.scenario.tasks[k].traffic_demand;

        let mut outs: BTreeMap<usize, Vec<(LinkArc, usize)>> = BTreeMap::new();
        let mut ins: BTreeMap<usize, Vec<(LinkArc, usize)>> = BTreeMap::new();
        for (a, &j) in &self.flow[k] {
            outs.entry(t.links[a.link].from).or_default().push((*a, j));
            ins.entry(t.links[a.link].to).or_default().push((*a, j));
        }
        let empty = Vec::new();

        for &n in devices {
            let out = outs.get(&n).unwrap_or(&empty);
            let inc = ins.get(&n).unwrap_or(&empty);
            let device = &t.devices[n];
            let id = &device.id;
            let sinks: Vec<usize> = self.hosted[n].iter().filter_map(|d| self.alloc[k].get(d).copied()).collect();
            let is_source = n == source;
            let is_sink = !sinks.is_empty();

            if device.kind == DeviceKind::Awgr {
                let table = t.awgr_table(n).expect("validated AWGR has a table");
                let mut groups: BTreeMap<(usize, Wavelength), Vec<(usize, f64)>> = BTreeMap::new();
                for &(a, j) in out {
                    if let Some(port) = t.links[a.link].from_port {
                        groups.entry((port, a.wavelength)).or_default().push((j, 1.0));
                    }
                }
                for &(a, j) in inc {
                    let routed = t.links[a.link].to_port.and_then(|p| awgr_output(table, p, a.wavelength));
                    match routed {
                        Some(q) => groups.entry((q, a.wavelength)).or_default().push((j, -1.0)),
                        None => groups.entry((usize::MAX, a.wavelength)).or_default().push((j, 1.0)),
                    }
                }
                for ((port, w), terms) in groups {
                    let name = if port == usize::MAX {
                        format!("cons_t{k}_{id}_blocked_{w}")
                    } else {
                        format!("cons_t{k}_{id}_p{port}_{w}")
                    };
                    self.row(Family::Conservation, name, terms, Sense::Eq, 0.0);
                }
                continue;
            }

            let aggregate = device.wavelength_converting || is_source || is_sink;
            if aggregate {
                let mut terms: Vec<(usize, f64)> = out.iter().map(|&(_, j)| (j, 1.0)).collect();
                terms.extend(inc.iter().map(|&(_, j)| (j, -1.0)));
                terms.extend(sinks.iter().map(|&j| (j, ddr)));
                let rhs = if is_source { traffic } else { 0.0 };
                let family = if is_source || is_sink { Family::SourceSink } else { Family::Conservation };
                self.row(family, format!("cons_t{k}_{id}"), terms, Sense::Eq, rhs);
            }
            if device.wavelength_converting {
                continue;
            }
            // Wavelength continuity: what leaves on w arrived on w.
            let mut by_w: BTreeMap<Wavelength, (Vec<(usize, f64)>, bool, bool)> = BTreeMap::new();
            for &(a, j) in out {
                let e = by_w.entry(a.wavelength).or_default();
                e.0.push((j, 1.0));
                e.1 = true;
            }
            for &(a, j) in inc {
                let e = by_w.entry(a.wavelength).or_default();
                e.0.push((j, -1.0));
                e.2 = true;
            }
            for (w, (terms, has_out, has_in)) in by_w {
                let sense = match (is_source, is_sink) {
                    (false, false) => Sense::Eq,
                    (true, false) if has_in && has_out => Sense::Ge,
                    (false, true) if has_in && has_out => Sense::Le,
                    _ => continue,
                };
                self.row(Family::Conservation, format!("cons_t{k}_{id}_{w}"), terms, sense, 0.0);
            }
        }
    }
}

/// Lower-left facets `alpha a + beta b >= gamma` of the convex hull of
/// `points`, given with increasing `a` and non-increasing `b`. Facets that
/// do not cut anything (a single point, or a slope of zero) are skipped.
fn lower_hull_facets(points: &[(f64, f64)]) -> Vec<(f64, f64, f64)> {
    let mut hull: Vec<(f64, f64)> = Vec::new();
    for &p in points {
        while hull.len() >= 2 {
            let (o, a) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (a.0 - o.0) * (p.1 - o.1) - (a.1 - o.1) * (p.0 - o.0);
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    hull.windows(2)
        .filter(|w| w[0].1 > w[1].1)
        .map(|w| {
            let (alpha, beta) = (w[0].1 - w[1].1, w[1].0 - w[0].0);
            (alpha, beta, alpha * w[0].0 + beta * w[0].1)
        })
        .collect()
}

/// `dp[r]`: least weight of a selection covering at least `r`, using up to
/// `count` items of each `(value, weight, count)` class.
fn cover_costs(need: usize, classes: &[(usize, f64, usize)]) -> Vec<f64> {
    let mut dp = vec![f64::INFINITY; need + 1];
    dp[0] = 0.0;
    for &(v, w, n) in classes {
        add_cover_class(&mut dp, v, w, n);
    }
    dp
}

fn add_cover_class(dp: &mut [f64], value: usize, weight: f64, count: usize) {
    for _ in 0..count {
        for r in (1..dp.len()).rev() {
            let from = dp[r.saturating_sub(value)] + weight;
            if from < dp[r] {
                dp[r] = from;
            }
        }
    }
}
