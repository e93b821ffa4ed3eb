//! Cycle loop of the simulator.
//!
//! Every network node is an input-queued router. A head flit that arrives at
//! cycle `a` is routed immediately, may win virtual-channel allocation from
//! `a + D - 2` and switch allocation from `a + D - 1`, and traverses the
//! crossbar at `a + D`, where `D` is the node's pipeline depth. It then
//! spends `Lk` cycles on the link, so one hop costs `D + Lk` cycles at zero
//! load. Ejection happens in the crossbar cycle at the destination.

use std::collections::{BinaryHeap, VecDeque};
use std::cmp::Reverse;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{BlockedVc, SimError, SimParams, SimSample};
use crate::model::{RoutingTable, Trace, Traffic};
use crate::proxy::IciGraph;

/// Stages every head flit passes through at a node.
pub const PIPELINE_STAGES: u64 = 4;

#[derive(Debug, Clone, Copy)]
struct Flit {
    packet: u32,
    arrival: u64,
    head: bool,
    tail: bool,
}

#[derive(Debug, Clone)]
struct Packet {
    dst: usize,
    created: u64,
    size: u32,
    measured: bool,
    delivered: Option<u64>,
    /// Index into the trace, for replay runs.
    message: usize,
}

#[derive(Debug, Clone, Default)]
struct InVc {
    buf: VecDeque<Flit>,
    /// Output port and output VC held by the packet at the front.
    out: Option<(usize, usize)>,
}

#[derive(Debug, Clone)]
struct Port {
    /// Neighbor node and the neighbor's port index on the same link; None for
    /// the injection/ejection port.
    peer: Option<(usize, usize)>,
    latency: u64,
}

#[derive(Debug, Clone)]
struct Router {
    delay: u64,
    /// Link ports followed by the local port.
    ports: Vec<Port>,
    in_vcs: Vec<InVc>,
    /// Per link port and VC: credits and whether a packet holds the VC.
    credits: Vec<u32>,
    held: Vec<bool>,
    grant_ptr: Vec<usize>,
    accept_ptr: Vec<usize>,
    vc_ptr: Vec<usize>,
    va_ptr: usize,
    /// Local VC receiving the packet currently being injected, and the
    /// round-robin start for the next one.
    inj_vc: Option<usize>,
    inj_ptr: usize,
    /// Output port towards each destination chiplet.
    route: Vec<usize>,
    flits: usize,
}

impl Router {
    fn local(&self) -> usize {
        self.ports.len() - 1
    }
}

struct Arrival {
    node: usize,
    port: usize,
    vc: usize,
    flit: Flit,
}

struct Credit {
    node: usize,
    port: usize,
    vc: usize,
}

pub(crate) enum Source<'a> {
    Synthetic { traffic: &'a Traffic, rate: f64 },
    Trace(&'a Trace),
}

pub(crate) struct RunStats {
    pub latency_sum: f64,
    pub measured_delivered: u64,
    pub measured_created: u64,
    pub window_flits: u64,
    pub all_delivered: bool,
    pub backlog_growing: bool,
    pub makespan: Option<u64>,
    pub cycles: u64,
    pub samples: Vec<SimSample>,
}

pub(crate) struct Network {
    routers: Vec<Router>,
    vcs: usize,
    depth: u32,
    chiplets: usize,
    wheel: Vec<Vec<Arrival>>,
    credit_wheel: Vec<Vec<Credit>>,
    last_progress: u64,
    in_flight: usize,
    stall_limit: u64,
}

/// Cycles a flit spends on a link: link latency rounded up plus PHYs.
pub fn link_delay(graph: &IciGraph, link: usize) -> u64 {
    let e = &graph.edges[link];
    e.link_cycles.ceil() as u64 + e.phy_cycles.ceil() as u64
}

/// Pipeline depth of a node: the vertex weight when it exceeds the four
/// router stages, otherwise the stages themselves.
pub fn node_delay(graph: &IciGraph, node: usize) -> u64 {
    (graph.vertices[node].weight.ceil() as u64).max(PIPELINE_STAGES)
}

impl Network {
    pub fn new(graph: &IciGraph, table: &RoutingTable, params: &SimParams) -> Result<Self, SimError> {
        let n = graph.node_count();
        let vcs = params.vcs_per_port as usize;
        let mut routers = Vec::with_capacity(n);
        for v in 0..n {
            let mut ports: Vec<Port> = graph.adjacency[v]
                .iter()
                .map(|&(w, link)| Port {
                    peer: Some((w, link)),
                    latency: link_delay(graph, link),
                })
                .collect();
            ports.push(Port { peer: None, latency: 0 });
            let link_ports = ports.len() - 1;
            let mut route = vec![link_ports; graph.chiplet_count];
            for (dst, slot) in route.iter_mut().enumerate() {
                if dst == v {
                    continue;
                }
                let link = table
                    .next_link(v, dst)
                    .ok_or_else(|| SimError::Invalid(format!("no routing entry at node {v} for destination {dst}")))?;
                *slot = graph.adjacency[v]
                    .iter()
                    .position(|&(_, l)| l == link)
                    .ok_or_else(|| SimError::Invalid(format!("node {v} routes over link {link}, which it is not on")))?;
            }
            routers.push(Router {
                delay: node_delay(graph, v),
                in_vcs: vec![InVc::default(); ports.len() * vcs],
                credits: vec![params.buffer_flits_per_vc; link_ports * vcs],
                held: vec![false; link_ports * vcs],
                grant_ptr: vec![0; ports.len()],
                accept_ptr: vec![0; ports.len()],
                vc_ptr: vec![0; ports.len()],
                va_ptr: 0,
                inj_vc: None,
                inj_ptr: 0,
                route,
                flits: 0,
                ports,
            });
        }
        // Replace link ids by the peer's port index on that link.
        for v in 0..n {
            for p in 0..routers[v].ports.len() {
                if let Some((w, link)) = routers[v].ports[p].peer {
                    let q = graph.adjacency[w].iter().position(|&(_, l)| l == link).expect("symmetric adjacency");
                    routers[v].ports[p].peer = Some((w, q));
                }
            }
        }
        let max_link = routers.iter().flat_map(|r| r.ports.iter().map(|p| p.latency)).max().unwrap_or(0);
        let max_delay = routers.iter().map(|r| r.delay).max().unwrap_or(PIPELINE_STAGES);
        let wheel_len = max_link as usize + 2;
        Ok(Network {
            routers,
            vcs,
            depth: params.buffer_flits_per_vc,
            chiplets: graph.chiplet_count,
            wheel: (0..wheel_len).map(|_| Vec::new()).collect(),
            credit_wheel: (0..wheel_len).map(|_| Vec::new()).collect(),
            last_progress: 0,
            in_flight: 0,
            stall_limit: 10 * n as u64 + max_delay + max_link,
        })
    }

    fn slot(&self, t: u64) -> usize {
        (t % self.wheel.len() as u64) as usize
    }

    /// Link arrivals and returning credits due at cycle `t`.
    fn receive(&mut self, t: u64) {
        let s = self.slot(t);
        let arrivals = std::mem::take(&mut self.wheel[s]);
        if !arrivals.is_empty() {
            self.last_progress = t;
        }
        for a in arrivals {
            self.in_flight -= 1;
            let r = &mut self.routers[a.node];
            r.in_vcs[a.port * self.vcs + a.vc].buf.push_back(a.flit);
            debug_assert!(r.in_vcs[a.port * self.vcs + a.vc].buf.len() <= self.depth as usize);
            r.flits += 1;
        }
        let credits = std::mem::take(&mut self.credit_wheel[s]);
        for c in credits {
            let r = &mut self.routers[c.node];
            r.credits[c.port * self.vcs + c.vc] += 1;
            debug_assert!(r.credits[c.port * self.vcs + c.vc] <= self.depth);
        }
    }

    /// Moves at most one flit from the source queue of `node` into a local
    /// input VC. Returns true if a flit moved.
    fn inject(&mut self, node: usize, queue: &mut VecDeque<(u32, u32)>, packets: &[Packet], t: u64) -> bool {
        let Some(&(pid, sent)) = queue.front() else { return false };
        let vcs = self.vcs;
        let depth = self.depth as usize;
        let r = &mut self.routers[node];
        let base = r.local() * vcs;
        let size = packets[pid as usize].size;
        let vc = match r.inj_vc {
            Some(vc) if sent > 0 => vc,
            _ => {
                let start = r.inj_ptr;
                match (0..vcs)
                    .map(|k| base + (start + k) % vcs)
                    .find(|&i| r.in_vcs[i].buf.len() < depth && r.in_vcs[i].buf.back().is_none_or(|f| f.tail))
                {
                    Some(i) => {
                        r.inj_ptr = (i - base + 1) % vcs;
                        r.inj_vc = Some(i);
                        i
                    }
                    None => return false,
                }
            }
        };
        if r.in_vcs[vc].buf.len() >= depth {
            return false;
        }
        r.in_vcs[vc].buf.push_back(Flit {
            packet: pid,
            arrival: t,
            head: sent == 0,
            tail: sent + 1 == size,
        });
        r.flits += 1;
        self.last_progress = t;
        if sent + 1 == size {
            queue.pop_front();
        } else {
            queue.front_mut().expect("nonempty").1 += 1;
        }
        true
    }

    /// Switch allocation and traversal at one router. Returns ejected flits.
    fn switch(&mut self, v: usize, t: u64, packets: &[Packet], ejected: &mut Vec<Flit>) {
        let vcs = self.vcs;
        let nports = self.routers[v].ports.len();
        // request[p] = list of (out port, vc)
        let mut requests: Vec<Vec<(usize, usize)>> = vec![Vec::new(); nports];
        {
            let r = &self.routers[v];
            for (p, req) in requests.iter_mut().enumerate() {
                for k in 0..vcs {
                    let k = (r.vc_ptr[p] + k) % vcs;
                    let ivc = &r.in_vcs[p * vcs + k];
                    let (Some(f), Some((o, ovc))) = (ivc.buf.front(), ivc.out) else { continue };
                    if t + 1 < f.arrival + r.delay {
                        continue;
                    }
                    if o != r.local() && r.credits[o * vcs + ovc] == 0 {
                        continue;
                    }
                    if !req.iter().any(|&(oo, _)| oo == o) {
                        req.push((o, k));
                    }
                }
            }
        }
        // grant: each output picks one requesting input, round robin
        let mut grants: Vec<Vec<usize>> = vec![Vec::new(); nports];
        for o in 0..nports {
            let start = self.routers[v].grant_ptr[o];
            if let Some(p) = (0..nports)
                .map(|i| (start + i) % nports)
                .find(|&p| requests[p].iter().any(|&(oo, _)| oo == o))
            {
                grants[p].push(o);
            }
        }
        // accept: each input takes one granting output, round robin
        for p in 0..nports {
            if grants[p].is_empty() {
                continue;
            }
            let start = self.routers[v].accept_ptr[p];
            let o = (0..nports)
                .map(|i| (start + i) % nports)
                .find(|o| grants[p].contains(o))
                .expect("granted");
            let k = requests[p].iter().find(|&&(oo, _)| oo == o).expect("requested").1;
            let r = &mut self.routers[v];
            r.grant_ptr[o] = (p + 1) % nports;
            r.accept_ptr[p] = (o + 1) % nports;
            r.vc_ptr[p] = (k + 1) % vcs;
            self.traverse(v, p, k, t, packets, ejected);
        }
    }

    fn traverse(&mut self, v: usize, p: usize, k: usize, t: u64, _packets: &[Packet], ejected: &mut Vec<Flit>) {
        let vcs = self.vcs;
        let r = &mut self.routers[v];
        let ivc = &mut r.in_vcs[p * vcs + k];
        let flit = ivc.buf.pop_front().expect("requested flit");
        let (o, ovc) = ivc.out.expect("allocated");
        if flit.tail {
            ivc.out = None;
        }
        r.flits -= 1;
        self.last_progress = t;
        let local = r.local();
        // credit back to whoever feeds this input
        if let Some((up, up_port)) = r.ports[p].peer {
            let due = t + 1 + r.ports[p].latency;
            let s = self.slot(due);
            self.credit_wheel[s].push(Credit {
                node: up,
                port: up_port,
                vc: k,
            });
        }
        let r = &mut self.routers[v];
        if o == local {
            ejected.push(flit);
            return;
        }
        r.credits[o * vcs + ovc] -= 1;
        if flit.tail {
            r.held[o * vcs + ovc] = false;
        }
        let (w, q) = r.ports[o].peer.expect("link port");
        let due = t + 1 + r.ports[o].latency;
        let s = self.slot(due);
        self.wheel[s].push(Arrival {
            node: w,
            port: q,
            vc: ovc,
            flit: Flit { arrival: due, ..flit },
        });
        self.in_flight += 1;
    }

    /// Virtual-channel allocation at one router.
    fn allocate(&mut self, v: usize, t: u64, packets: &[Packet]) {
        let vcs = self.vcs;
        let r = &mut self.routers[v];
        let total = r.in_vcs.len();
        let local = r.local();
        let start = r.va_ptr;
        let mut granted_any = None;
        for i in 0..total {
            let idx = (start + i) % total;
            let ivc = &r.in_vcs[idx];
            let Some(f) = ivc.buf.front() else { continue };
            if ivc.out.is_some() || !f.head || t + 2 < f.arrival + r.delay {
                continue;
            }
            let o = r.route[packets[f.packet as usize].dst];
            let ovc = if o == local {
                Some(0)
            } else {
                (0..vcs).find(|&k| !r.held[o * vcs + k])
            };
            if let Some(ovc) = ovc {
                if o != local {
                    r.held[o * vcs + ovc] = true;
                }
                r.in_vcs[idx].out = Some((o, ovc));
                granted_any.get_or_insert(idx);
            }
        }
        if let Some(first) = granted_any {
            r.va_ptr = (first + 1) % total;
        }
    }

    fn step(&mut self, t: u64, packets: &[Packet], ejected: &mut Vec<Flit>) {
        for v in 0..self.routers.len() {
            if self.routers[v].flits > 0 {
                self.switch(v, t, packets, ejected);
            }
        }
        for v in 0..self.routers.len() {
            if self.routers[v].flits > 0 {
                self.allocate(v, t, packets);
            }
        }
    }

    /// Applies every credit still on its way; only valid while no flit is
    /// buffered or in flight, before skipping idle cycles.
    fn flush_credits(&mut self) {
        for slot in 0..self.credit_wheel.len() {
            for c in std::mem::take(&mut self.credit_wheel[slot]) {
                self.routers[c.node].credits[c.port * self.vcs + c.vc] += 1;
            }
        }
    }

    fn buffered(&self) -> usize {
        self.routers.iter().map(|r| r.flits).sum::<usize>()
    }

    fn check_deadlock(&self, t: u64) -> Result<(), SimError> {
        if t.saturating_sub(self.last_progress) <= self.stall_limit || self.buffered() + self.in_flight == 0 {
            return Ok(());
        }
        let mut blocked = Vec::new();
        for (v, r) in self.routers.iter().enumerate() {
            for (i, ivc) in r.in_vcs.iter().enumerate() {
                if ivc.buf.is_empty() {
                    continue;
                }
                let port = i / self.vcs;
                blocked.push(BlockedVc {
                    node: v,
                    port,
                    vc: i % self.vcs,
                    from_node: r.ports[port].peer.map(|(w, _)| w),
                    waiting_for: ivc.out.and_then(|(o, _)| r.ports[o].peer.map(|(w, _)| w)),
                    flits: ivc.buf.len(),
                });
            }
        }
        Err(SimError::Deadlock { cycle: t, blocked })
    }
}

/// Per-source destination sampler for synthetic traffic.
struct Generator {
    /// Per chiplet: packet probability per cycle, cumulative weights, destinations.
    prob: Vec<f64>,
    cumulative: Vec<Vec<f64>>,
    dsts: Vec<Vec<usize>>,
    next: Vec<u64>,
}

impl Generator {
    fn new(traffic: &Traffic, chiplets: usize, rate: f64, packet_size: u32) -> Self {
        let mut weight = vec![0.0; chiplets];
        let mut cumulative = vec![Vec::new(); chiplets];
        let mut dsts = vec![Vec::new(); chiplets];
        for e in &traffic.entries {
            if e.amount <= 0.0 {
                continue;
            }
            weight[e.src] += e.amount;
            cumulative[e.src].push(weight[e.src]);
            dsts[e.src].push(e.dst);
        }
        let total: f64 = weight.iter().sum();
        let prob = weight
            .iter()
            .map(|w| (rate * chiplets as f64 * w / total / packet_size as f64).min(1.0))
            .collect();
        Generator {
            prob,
            cumulative,
            dsts,
            next: vec![0; chiplets],
        }
    }

    /// Cycles until the next Bernoulli success, counting the current one.
    fn gap(p: f64, rng: &mut ChaCha8Rng) -> u64 {
        if p >= 1.0 {
            return 0;
        }
        let u: f64 = rng.gen();
        ((1.0 - u).ln() / (1.0 - p).ln()).floor() as u64
    }

    fn start(&mut self, rng: &mut ChaCha8Rng) {
        for s in 0..self.prob.len() {
            self.next[s] = if self.prob[s] > 0.0 { Self::gap(self.prob[s], rng) } else { u64::MAX };
        }
    }

    /// Destination of a packet created at `s` in cycle `t`, if one is due.
    fn poll(&mut self, s: usize, t: u64, rng: &mut ChaCha8Rng) -> Option<usize> {
        if self.next[s] != t {
            return None;
        }
        self.next[s] = t + 1 + Self::gap(self.prob[s], rng);
        let cum = &self.cumulative[s];
        let x = rng.gen::<f64>() * cum[cum.len() - 1];
        let i = cum.partition_point(|&c| c <= x).min(cum.len() - 1);
        Some(self.dsts[s][i])
    }
}

pub(crate) struct Window {
    pub warmup: u64,
    pub measurement: u64,
    pub drain_limit: u64,
}

pub(crate) fn run(
    graph: &IciGraph,
    table: &RoutingTable,
    source: Source<'_>,
    params: &SimParams,
    window: &Window,
) -> Result<RunStats, SimError> {
    let mut net = Network::new(graph, table, params)?;
    let chiplets = net.chiplets;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut queues: Vec<VecDeque<(u32, u32)>> = vec![VecDeque::new(); chiplets];
    let mut packets: Vec<Packet> = Vec::new();
    let mut ejected = Vec::new();
    let mut stats = RunStats {
        latency_sum: 0.0,
        measured_delivered: 0,
        measured_created: 0,
        window_flits: 0,
        all_delivered: false,
        backlog_growing: false,
        makespan: None,
        cycles: 0,
        samples: Vec::new(),
    };
    let mut created_flits: u64 = 0;
    let mut injected_flits: u64 = 0;
    let mut ejected_flits: u64 = 0;
    let mut outstanding: u64 = 0;

    match source {
        Source::Synthetic { traffic, rate } => {
            let mut gen = Generator::new(traffic, chiplets, rate, params.packet_size_flits);
            gen.start(&mut rng);
            let end = window.warmup + window.measurement;
            let sample_every = (window.measurement / 10).max(1);
            let mut t = 0u64;
            loop {
                net.receive(t);
                for s in 0..chiplets {
                    if let Some(dst) = gen.poll(s, t, &mut rng) {
                        let measured = t >= window.warmup && t < end;
                        packets.push(Packet {
                            dst,
                            created: t,
                            size: params.packet_size_flits,
                            measured,
                            delivered: None,
                            message: 0,
                        });
                        stats.measured_created += measured as u64;
                        created_flits += params.packet_size_flits as u64;
                        outstanding += 1;
                        queues[s].push_back(((packets.len() - 1) as u32, 0));
                    }
                    if net.inject(s, &mut queues[s], &packets, t) {
                        injected_flits += 1;
                    }
                }
                net.step(t, &packets, &mut ejected);
                for f in ejected.drain(..) {
                    ejected_flits += 1;
                    if t >= window.warmup && t < end {
                        stats.window_flits += 1;
                    }
                    if f.tail {
                        // the crossbar cycle that hands the tail to the sink
                        let done = t + 1;
                        let p = &mut packets[f.packet as usize];
                        p.delivered = Some(done);
                        outstanding -= 1;
                        if p.measured {
                            stats.measured_delivered += 1;
                            stats.latency_sum += (done - p.created) as f64;
                        }
                    }
                }
                if t >= window.warmup && t <= end && (t - window.warmup).is_multiple_of(sample_every) {
                    debug_assert_eq!(
                        injected_flits,
                        ejected_flits + (net.buffered() + net.in_flight) as u64,
                        "flit conservation"
                    );
                    stats.samples.push(SimSample {
                        cycle: t,
                        backlog_packets: outstanding,
                        delivered_flits: ejected_flits,
                        queued_flits: created_flits - injected_flits,
                    });
                }
                if t == end {
                    let b: Vec<u64> = stats.samples.iter().map(|s| s.backlog_packets).collect();
                    stats.backlog_growing =
                        b.len() >= 3 && b.windows(2).all(|w| w[1] > w[0]) && b[b.len() - 1] - b[0] > chiplets as u64;
                    if stats.backlog_growing {
                        break;
                    }
                }
                if t >= end && stats.measured_delivered == stats.measured_created {
                    stats.all_delivered = true;
                    break;
                }
                if t >= end + window.drain_limit {
                    break;
                }
                net.check_deadlock(t)?;
                t += 1;
            }
            stats.cycles = t + 1;
        }
        Source::Trace(trace) => {
            let msgs = &trace.messages;
            let index_of: std::collections::HashMap<u64, usize> =
                msgs.iter().enumerate().map(|(i, m)| (m.id, i)).collect();
            let mut dependents: Vec<Vec<usize>> = vec![Vec::new(); msgs.len()];
            let mut pending: Vec<usize> = vec![0; msgs.len()];
            let mut ready_at: Vec<u64> = msgs.iter().map(|m| m.earliest_injection_cycle).collect();
            let mut heap = BinaryHeap::new();
            for (i, m) in msgs.iter().enumerate() {
                let mut deps = m.deps.clone();
                deps.sort_unstable();
                deps.dedup();
                pending[i] = deps.len();
                for d in deps {
                    let j = *index_of
                        .get(&d)
                        .ok_or_else(|| SimError::Invalid(format!("message {} depends on unknown id {d}", m.id)))?;
                    dependents[j].push(i);
                }
                if pending[i] == 0 {
                    heap.push(Reverse((ready_at[i], m.id, i)));
                }
            }
            let mut delivered = 0usize;
            let mut t = 0u64;
            while delivered < msgs.len() {
                net.receive(t);
                while let Some(&Reverse((at, _, i))) = heap.peek() {
                    if at > t {
                        break;
                    }
                    heap.pop();
                    let m = &msgs[i];
                    packets.push(Packet {
                        dst: m.dst,
                        created: t,
                        size: m.size_flits,
                        measured: true,
                        delivered: None,
                        message: i,
                    });
                    stats.measured_created += 1;
                    queues[m.src].push_back(((packets.len() - 1) as u32, 0));
                }
                for s in 0..chiplets {
                    net.inject(s, &mut queues[s], &packets, t);
                }
                net.step(t, &packets, &mut ejected);
                for f in ejected.drain(..) {
                    stats.window_flits += 1;
                    if !f.tail {
                        continue;
                    }
                    let done = t + 1;
                    let p = &mut packets[f.packet as usize];
                    p.delivered = Some(done);
                    delivered += 1;
                    stats.measured_delivered += 1;
                    stats.latency_sum += (done - p.created) as f64;
                    stats.makespan = Some(done);
                    for &j in &dependents[p.message] {
                        ready_at[j] = ready_at[j].max(done + 1);
                        pending[j] -= 1;
                        if pending[j] == 0 {
                            heap.push(Reverse((ready_at[j], msgs[j].id, j)));
                        }
                    }
                }
                if delivered < msgs.len() && net.buffered() + net.in_flight == 0 && queues.iter().all(|q| q.is_empty()) {
                    // idle until the next message becomes eligible
                    match heap.peek() {
                        Some(&Reverse((at, _, _))) if at > t + 1 => {
                            net.flush_credits();
                            t = at;
                            net.last_progress = t;
                            continue;
                        }
                        Some(_) => {}
                        None => return Err(SimError::Invalid("trace has unsatisfiable dependencies".into())),
                    }
                }
                net.check_deadlock(t)?;
                t += 1;
            }
            stats.all_delivered = true;
            stats.cycles = t;
        }
    }
    Ok(stats)
}
