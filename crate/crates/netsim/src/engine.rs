//! Event loop. Nodes keep an abstract block tree: blocks carry transaction
//! ids rather than signed transactions, and "validation" is the
//! resource-server round trip each data query costs in legacy mode.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap, HashSet};

use indexmap::IndexSet;
use permchain_core::crypto::{hash_parts, Digest32};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use crate::analytic::LoadModel;
use crate::config::{Mode, SimConfig, SimError};
use crate::report::{LatencyStats, SeriesRow, SimReport};
use crate::rs_queue::{RsOutcome, RsQueue};

type BlockId = usize;
type TxId = usize;
type NodeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum EventKind {
    ClientRequest { client: usize },
    GossipDelivery { node: NodeId, item: Gossip },
    MineComplete { node: NodeId, generation: u64 },
    RsService { node: NodeId, block: BlockId },
    RsTimeout { node: NodeId, block: BlockId },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Gossip {
    Tx(TxId),
    Block(BlockId),
}

impl EventKind {
    pub fn rank(&self) -> u8 {
        match self {
            EventKind::ClientRequest { .. } => 0,
            EventKind::GossipDelivery { .. } => 1,
            EventKind::MineComplete { .. } => 2,
            EventKind::RsService { .. } => 3,
            EventKind::RsTimeout { .. } => 4,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SimEvent {
    pub fire_time: f64,
    pub seq: u64,
    pub kind: EventKind,
}

impl SimEvent {
    fn key(&self) -> (f64, u8, u64) {
        (self.fire_time, self.kind.rank(), self.seq)
    }
}

impl PartialEq for SimEvent {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for SimEvent {}

impl PartialOrd for SimEvent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for SimEvent {
    fn cmp(&self, other: &Self) -> Ordering {
        let (a, b) = (self.key(), other.key());
        a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2))
    }
}

struct SimBlock {
    parent: Option<BlockId>,
    height: u64,
    miner: Option<NodeId>,
    txs: Vec<TxId>,
    hash: Digest32,
}

struct Node {
    tip: BlockId,
    accepted: HashMap<BlockId, f64>,
    seen: HashSet<BlockId>,
    rejected: HashSet<BlockId>,
    orphans: HashMap<BlockId, Vec<BlockId>>,
    mempool: IndexSet<TxId>,
    chain_txs: HashSet<TxId>,
    generation: u64,
    mining: bool,
}

impl Node {
    fn new() -> Self {
        Self {
            tip: 0,
            accepted: HashMap::from([(0, 0.0)]),
            seen: HashSet::from([0]),
            rejected: HashSet::new(),
            orphans: HashMap::new(),
            mempool: IndexSet::new(),
            chain_txs: HashSet::new(),
            generation: 0,
            mining: false,
        }
    }
}

fn stream(seed: u64, label: &[u8]) -> ChaCha8Rng {
    let d = hash_parts(&[&seed.to_be_bytes(), label]);
    ChaCha8Rng::from_seed(d.0)
}

struct Sim<'a> {
    cfg: &'a SimConfig,
    events: BinaryHeap<Reverse<SimEvent>>,
    seq: u64,
    now: f64,
    net_rng: ChaCha8Rng,
    client_rng: ChaCha8Rng,
    mine_dist: Exp<f64>,
    client_dist: Option<Exp<f64>>,
    blocks: Vec<SimBlock>,
    tx_proposed_at: Vec<f64>,
    nodes: Vec<Node>,
    rs: RsQueue,
    in_flight: usize,
    client_requests: u64,
    max_gossip_delay: f64,
    series_interval: Option<f64>,
    next_sample: f64,
    series: Vec<SeriesRow>,
}

impl<'a> Sim<'a> {
    fn new(cfg: &'a SimConfig, series_interval: Option<f64>) -> Self {
        let genesis = SimBlock {
            parent: None,
            height: 0,
            miner: None,
            txs: Vec::new(),
            hash: hash_parts(&[b"genesis", &cfg.seed.to_be_bytes()]),
        };
        let per_client = cfg.client_rate / cfg.n_clients as f64;
        Self {
            cfg,
            events: BinaryHeap::new(),
            seq: 0,
            now: 0.0,
            net_rng: stream(cfg.seed, b"network"),
            client_rng: stream(cfg.seed, b"clients"),
            mine_dist: Exp::new(1.0 / cfg.node_mean_solve_time()).expect("positive rate"),
            client_dist: (per_client > 0.0).then(|| Exp::new(per_client).expect("positive rate")),
            blocks: vec![genesis],
            tx_proposed_at: Vec::new(),
            nodes: (0..cfg.n_nodes).map(|_| Node::new()).collect(),
            rs: RsQueue::new(cfg.rs_service_rate, cfg.rs_buffer, cfg.rs_timeout),
            in_flight: 0,
            client_requests: 0,
            max_gossip_delay: 0.0,
            series_interval,
            next_sample: 0.0,
            series: Vec::new(),
        }
    }

    fn schedule(&mut self, fire_time: f64, kind: EventKind) {
        self.seq += 1;
        self.events.push(Reverse(SimEvent {
            fire_time,
            seq: self.seq,
            kind,
        }));
    }

    /// Uniform on (0, delta].
    fn gossip_delay(&mut self) -> f64 {
        let u: f64 = self.net_rng.gen();
        let d = self.cfg.delta_seconds * (1.0 - u);
        self.max_gossip_delay = self.max_gossip_delay.max(d);
        d
    }

    fn broadcast(&mut self, from: f64, item: Gossip, skip: Option<NodeId>) {
        for node in 0..self.nodes.len() {
            if Some(node) == skip {
                continue;
            }
            let d = self.gossip_delay();
            self.in_flight += 1;
            self.schedule(from + d, EventKind::GossipDelivery { node, item });
        }
    }

    fn schedule_mining(&mut self, node: NodeId) {
        let dt = self.mine_dist.sample(&mut self.net_rng);
        let n = &mut self.nodes[node];
        n.generation += 1;
        n.mining = true;
        let generation = n.generation;
        self.schedule(self.now + dt, EventKind::MineComplete { node, generation });
    }

    fn run(mut self) -> (SimReport, Vec<SeriesRow>) {
        if let Some(dist) = self.client_dist {
            for client in 0..self.cfg.n_clients {
                let t = dist.sample(&mut self.client_rng);
                if t < self.cfg.duration {
                    self.schedule(t, EventKind::ClientRequest { client });
                }
            }
        }
        for node in 0..self.nodes.len() {
            self.schedule_mining(node);
        }
        let hard_end = self.cfg.duration + self.cfg.settle_limit;
        let mut converged = false;
        while let Some(Reverse(ev)) = self.events.pop() {
            if ev.fire_time > hard_end {
                self.now = hard_end;
                break;
            }
            self.sample_until(ev.fire_time);
            self.now = ev.fire_time;
            self.handle(ev.kind);
            if self.now >= self.cfg.duration && self.settled() {
                converged = true;
                break;
            }
        }
        self.sample_until(self.now);
        if !converged {
            converged = self.tips_agree();
        }
        (self.report(converged), self.series)
    }

    fn sample_until(&mut self, t: f64) {
        let Some(step) = self.series_interval else {
            return;
        };
        while self.next_sample <= t {
            let time = self.next_sample;
            let row = SeriesRow {
                time,
                rs_queue_depth: self.rs.depth_at(time),
                tip_heights: self
                    .nodes
                    .iter()
                    .map(|n| self.blocks[n.tip].height)
                    .collect(),
            };
            self.series.push(row);
            self.next_sample += step;
        }
    }

    fn tips_agree(&self) -> bool {
        let tip = self.nodes[0].tip;
        self.nodes.iter().all(|n| n.tip == tip)
    }

    fn settled(&self) -> bool {
        self.in_flight == 0 && self.tips_agree() && self.nodes[0].mempool.is_empty()
    }

    fn handle(&mut self, kind: EventKind) {
        match kind {
            EventKind::ClientRequest { client } => self.client_request(client),
            EventKind::GossipDelivery { node, item } => {
                self.in_flight -= 1;
                match item {
                    Gossip::Tx(tx) => {
                        let n = &mut self.nodes[node];
                        if !n.chain_txs.contains(&tx) {
                            n.mempool.insert(tx);
                        }
                    }
                    Gossip::Block(b) => self.receive_block(node, b),
                }
            }
            EventKind::MineComplete { node, generation } => self.mine(node, generation),
            EventKind::RsService { node, block } => {
                self.in_flight -= 1;
                self.accept(node, block);
            }
            EventKind::RsTimeout { node, block } => {
                self.in_flight -= 1;
                self.reject(node, block);
            }
        }
    }

    fn client_request(&mut self, client: usize) {
        self.client_requests += 1;
        if let Some(dist) = self.client_dist {
            let t = self.now + dist.sample(&mut self.client_rng);
            if t < self.cfg.duration {
                self.schedule(t, EventKind::ClientRequest { client });
            }
        }
        match self.cfg.mode {
            Mode::Legacy => {
                let tx = self.new_tx(self.now);
                self.broadcast(self.now, Gossip::Tx(tx), None);
            }
            Mode::Proposed => {
                // The server validates the token on-chain before answering;
                // that validation transaction never calls back into it.
                if let RsOutcome::Served { completion, .. } = self.rs.arrive(self.now) {
                    let tx = self.new_tx(completion);
                    self.broadcast(completion, Gossip::Tx(tx), None);
                }
            }
        }
    }

    fn new_tx(&mut self, at: f64) -> TxId {
        self.tx_proposed_at.push(at);
        self.tx_proposed_at.len() - 1
    }

    fn mine(&mut self, node: NodeId, generation: u64) {
        let n = &mut self.nodes[node];
        if !n.mining || n.generation != generation {
            return;
        }
        n.mining = false;
        let parent = n.tip;
        let txs: Vec<TxId> = n
            .mempool
            .iter()
            .take(self.cfg.max_txs_per_block)
            .copied()
            .collect();
        let height = self.blocks[parent].height + 1;
        let mut parts: Vec<Vec<u8>> = vec![
            self.blocks[parent].hash.0.to_vec(),
            height.to_be_bytes().to_vec(),
            (node as u64).to_be_bytes().to_vec(),
            self.now.to_bits().to_be_bytes().to_vec(),
        ];
        parts.extend(txs.iter().map(|t| (*t as u64).to_be_bytes().to_vec()));
        let refs: Vec<&[u8]> = parts.iter().map(Vec::as_slice).collect();
        let hash = hash_parts(&refs);
        if self.cfg.mode == Mode::Legacy {
            // Executing the block's queries while assembling it.
            for _ in &txs {
                self.rs.arrive(self.now);
            }
        }
        self.blocks.push(SimBlock {
            parent: Some(parent),
            height,
            miner: Some(node),
            txs,
            hash,
        });
        let b = self.blocks.len() - 1;
        self.broadcast(self.now, Gossip::Block(b), Some(node));
        self.receive_block(node, b);
    }

    fn receive_block(&mut self, node: NodeId, b: BlockId) {
        let n = &mut self.nodes[node];
        if !n.seen.insert(b) {
            return;
        }
        let parent = self.blocks[b].parent.expect("only genesis lacks a parent");
        if n.rejected.contains(&parent) {
            self.reject(node, b);
        } else if !n.accepted.contains_key(&parent) {
            n.orphans.entry(parent).or_default().push(b);
        } else {
            self.validate(node, b);
        }
    }

    fn validate(&mut self, node: NodeId, b: BlockId) {
        if self.cfg.mode == Mode::Proposed || self.blocks[b].txs.is_empty() {
            self.accept(node, b);
            return;
        }
        let mut done = self.now;
        let mut failed = false;
        for _ in 0..self.blocks[b].txs.len() {
            let outcome = self.rs.arrive(self.now);
            failed |= !outcome.is_served();
            done = done.max(outcome.resolved_at());
        }
        if !self.cfg.validation_waits_for_rs {
            self.accept(node, b);
            return;
        }
        self.in_flight += 1;
        if failed && self.cfg.reject_on_rs_failure {
            self.schedule(done, EventKind::RsTimeout { node, block: b });
        } else {
            self.schedule(done, EventKind::RsService { node, block: b });
        }
    }

    fn accept(&mut self, node: NodeId, b: BlockId) {
        self.nodes[node].accepted.insert(b, self.now);
        let tip = self.nodes[node].tip;
        if self.blocks[b].height > self.blocks[tip].height {
            self.switch_tip(node, b);
            self.schedule_mining(node);
        } else if self.blocks[b].miner == Some(node) && !self.nodes[node].mining {
            self.schedule_mining(node);
        }
        if let Some(children) = self.nodes[node].orphans.remove(&b) {
            for c in children {
                self.validate(node, c);
            }
        }
    }

    fn reject(&mut self, node: NodeId, b: BlockId) {
        self.nodes[node].rejected.insert(b);
        if self.blocks[b].miner == Some(node) && !self.nodes[node].mining {
            self.schedule_mining(node);
        }
        if let Some(children) = self.nodes[node].orphans.remove(&b) {
            for c in children {
                self.reject(node, c);
            }
        }
    }

    fn switch_tip(&mut self, node: NodeId, new_tip: BlockId) {
        let (mut old, mut new) = (self.nodes[node].tip, new_tip);
        let mut detached = Vec::new();
        let mut attached = Vec::new();
        while self.blocks[new].height > self.blocks[old].height {
            attached.push(new);
            new = self.blocks[new].parent.expect("above genesis");
        }
        while old != new {
            detached.push(old);
            attached.push(new);
            old = self.blocks[old].parent.expect("common ancestor");
            new = self.blocks[new].parent.expect("common ancestor");
        }
        let n = &mut self.nodes[node];
        for b in detached {
            for &tx in &self.blocks[b].txs {
                n.chain_txs.remove(&tx);
                n.mempool.insert(tx);
            }
        }
        for b in attached.into_iter().rev() {
            for &tx in &self.blocks[b].txs {
                n.chain_txs.insert(tx);
                n.mempool.shift_remove(&tx);
            }
        }
        n.tip = new_tip;
    }

    fn report(&self, converged: bool) -> SimReport {
        let cfg = self.cfg;
        let warmup = cfg.duration * cfg.warmup_fraction;
        let window = cfg.duration - warmup;
        let in_window = self
            .rs
            .arrivals()
            .iter()
            .filter(|&&t| t >= warmup && t < cfg.duration)
            .count();
        let rs_rps_mean = in_window as f64 / window;
        let acc = self.rs.accounting_at(self.now);

        let node0 = &self.nodes[0];
        let mut latencies = Vec::new();
        let mut main_chain = 0u64;
        let mut b = node0.tip;
        while let Some(parent) = self.blocks[b].parent {
            main_chain += 1;
            let at = node0.accepted[&b];
            latencies.extend(
                self.blocks[b]
                    .txs
                    .iter()
                    .map(|&tx| at - self.tx_proposed_at[tx]),
            );
            b = parent;
        }
        let blocks_mined = self.blocks.len() as u64 - 1;

        let model = LoadModel::new(cfg.client_rate, cfg.n_nodes as f64, cfg.delta_seconds)
            .expect("validated config");
        let (rs_rps_predicted, amplification_predicted) = match cfg.mode {
            Mode::Legacy => (model.rs_rate(), model.amplification()),
            Mode::Proposed => (cfg.client_rate, 1.0),
        };
        let amplification_measured = if cfg.client_rate > 0.0 {
            rs_rps_mean / cfg.client_rate
        } else {
            0.0
        };
        SimReport {
            mode: cfg.mode,
            n_nodes: cfg.n_nodes,
            delta_seconds: cfg.delta_seconds,
            client_rate: cfg.client_rate,
            seed: cfg.seed,
            client_requests: self.client_requests,
            rs_requests_total: acc.arrived,
            rs_served: acc.served,
            rs_drops: acc.dropped,
            rs_in_flight: acc.in_flight,
            rs_rps_mean,
            rs_rps_predicted,
            amplification_measured,
            amplification_predicted,
            consensus_converged: converged,
            final_height: self.blocks[node0.tip].height,
            tx_latency_stats: LatencyStats::from_samples(latencies),
            blocks_mined,
            forks_observed: blocks_mined - main_chain,
            max_gossip_delay: self.max_gossip_delay,
            end_time: self.now,
            config: cfg.clone(),
        }
    }
}

pub fn run_simulation(cfg: &SimConfig) -> Result<SimReport, SimError> {
    run_simulation_with_series(cfg, None).map(|(r, _)| r)
}

/// Also samples queue depth and tip heights every `interval` seconds.
pub fn run_simulation_with_series(
    cfg: &SimConfig,
    interval: Option<f64>,
) -> Result<(SimReport, Vec<SeriesRow>), SimError> {
    cfg.validate()?;
    if let Some(i) = interval {
        if !(i.is_finite() && i > 0.0) {
            return Err(SimError::ConfigInvalid(
                "series interval must be positive".into(),
            ));
        }
    }
    Ok(Sim::new(cfg, interval).run())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(mode: Mode) -> SimConfig {
        SimConfig {
            n_nodes: 4,
            duration: 120.0,
            mode,
            seed: 7,
            ..SimConfig::default()
        }
    }

    #[test]
    fn event_order_breaks_ties_by_rank_then_sequence() {
        let ev = |t, seq, kind| SimEvent {
            fire_time: t,
            seq,
            kind,
        };
        let mut v = [
            ev(1.0, 1, EventKind::RsTimeout { node: 0, block: 0 }),
            ev(1.0, 2, EventKind::ClientRequest { client: 0 }),
            ev(0.5, 3, EventKind::RsService { node: 0, block: 0 }),
            ev(1.0, 0, EventKind::ClientRequest { client: 1 }),
        ];
        v.sort();
        let seqs: Vec<u64> = v.iter().map(|e| e.seq).collect();
        assert_eq!(seqs, vec![3, 0, 2, 1]);
    }

    #[test]
    fn small_network_converges() {
        for mode in [Mode::Legacy, Mode::Proposed] {
            let r = run_simulation(&small(mode)).unwrap();
            assert!(r.consensus_converged, "{mode:?}");
            assert!(r.final_height > 0);
            assert_eq!(r.rs_drops, 0);
        }
    }

    #[test]
    fn single_node_touches_twice_per_query() {
        let cfg = SimConfig {
            n_nodes: 1,
            delta_seconds: 1.0,
            ..small(Mode::Legacy)
        };
        let r = run_simulation(&cfg).unwrap();
        // Every query is mined once and validated once by the sole node.
        assert_eq!(r.rs_requests_total, 2 * r.client_requests);
        assert_eq!(r.forks_observed, 0);
    }

    #[test]
    fn proposed_touches_once_per_query() {
        let r = run_simulation(&small(Mode::Proposed)).unwrap();
        assert_eq!(r.rs_requests_total, r.client_requests);
    }

    #[test]
    fn gossip_within_bound() {
        let r = run_simulation(&small(Mode::Legacy)).unwrap();
        assert!(r.max_gossip_delay > 0.0 && r.max_gossip_delay <= 2.0);
    }

    #[test]
    fn invalid_config_is_rejected() {
        let cfg = SimConfig {
            n_nodes: 0,
            ..SimConfig::default()
        };
        assert!(matches!(
            run_simulation(&cfg),
            Err(SimError::ConfigInvalid(_))
        ));
    }

    #[test]
    fn series_samples_every_interval() {
        let (_, rows) = run_simulation_with_series(&small(Mode::Legacy), Some(10.0)).unwrap();
        assert!(rows.len() >= 12);
        assert!(rows.windows(2).all(|w| w[1].time > w[0].time));
        assert!(rows.iter().all(|r| r.tip_heights.len() == 4));
    }
}
