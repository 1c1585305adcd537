//! Deterministic discrete-event simulation of a committee.
//!
//! Events run in (time, insertion sequence) order. All randomness comes
//! from the run seed: one stream for network delays, one for the workload.
//! Reliable broadcast is modeled, not executed: a proposal reaches each live
//! node after the (2f+1)-th smallest of n link delays plus one round trip.
//! Only crash faults are modeled; under reliable broadcast a Byzantine node
//! can do no more to Board and Clerk than withhold its proposals.

pub mod config;
pub mod workload;

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Uniform};
use serde::Serialize;

use crate::dag::{NodeId, Proposal, ProposalId, Round};
use crate::hyperblock::{assemble_hyperblock, commit_list, prove_tx_result, AssembleError, Attestation, HyperBlock, TxResultProof};
use crate::node::{Node, NodeEvent, NodeParams};
use crate::utxo::{Batch, BatchId, Transaction, TxId, TxResult};

pub use config::{ConfigError, DelayModel, SimConfig};
pub use workload::Workload;

/// Per-transaction timing at the submitting node.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LatencyRecord {
    pub tx: TxId,
    pub node: NodeId,
    pub submit_time: f64,
    pub submit_round: Round,
    pub fast_time: Option<f64>,
    pub fast_round: Option<Round>,
    pub fast_result: Option<TxResult>,
    pub commit_time: Option<f64>,
    pub commit_round: Option<Round>,
    pub result: Option<TxResult>,
}

/// One line of the message log.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LogRecord {
    Propose { time: f64, node: NodeId, round: Round, proposal: String, batches: usize, witness_entries: usize },
    Deliver { time: f64, node: NodeId, author: NodeId, round: Round },
    Leader { time: f64, node: NodeId, round: Round, leader: String, st: usize, ft: usize },
    Crash { time: f64, node: NodeId },
}

#[derive(Clone, Debug)]
enum EventKind {
    Start(NodeId),
    Deliver { to: NodeId, proposal: Arc<Proposal> },
    ClientBatch(NodeId),
    Crash(NodeId),
}

#[derive(Clone, Debug)]
struct Event {
    time: f64,
    seq: u64,
    kind: EventKind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    // Reversed: BinaryHeap is a max-heap.
    fn cmp(&self, other: &Self) -> Ordering {
        other.time.total_cmp(&self.time).then(other.seq.cmp(&self.seq))
    }
}

/// Link delay sampler for one run.
pub struct Network {
    rng: ChaCha8Rng,
    model: DelayModel,
}

impl Network {
    pub fn new(model: DelayModel, rng: ChaCha8Rng) -> Self {
        Self { rng, model }
    }

    pub fn link_delay(&mut self) -> f64 {
        match self.model {
            DelayModel::Constant(d) => d,
            DelayModel::Uniform { lo, hi } => {
                if hi > lo {
                    Uniform::new(lo, hi).sample(&mut self.rng)
                } else {
                    lo
                }
            }
            DelayModel::Exponential { mean } => Exp::new(1.0 / mean).expect("positive mean").sample(&mut self.rng),
        }
    }

    /// Time for a broadcast to complete at one receiver: the echo quorum's
    /// (2f+1)-th fastest link plus a round trip.
    pub fn rbc_delay(&mut self, n: u32, f: u32) -> f64 {
        let mut links: Vec<f64> = (0..n).map(|_| self.link_delay()).collect();
        links.sort_by(f64::total_cmp);
        let quorum = links[(2 * f) as usize];
        quorum + self.link_delay() + self.link_delay()
    }
}

pub struct SimOutput {
    pub config: SimConfig,
    pub nodes: Vec<Node>,
    pub crashed: Vec<bool>,
    pub latencies: Vec<LatencyRecord>,
    pub log: Vec<LogRecord>,
    pub attestations: HashMap<ProposalId, Vec<Attestation>>,
    pub batches: HashMap<BatchId, Arc<Batch>>,
    pub transactions: HashMap<TxId, Transaction>,
    /// Proposals broadcast per round.
    pub proposals_per_round: Vec<usize>,
    pub truncated: bool,
    pub end_time: f64,
}

impl SimOutput {
    pub fn honest(&self) -> impl Iterator<Item = &Node> {
        self.nodes.iter().filter(|n| !self.crashed[n.id() as usize])
    }

    pub fn violations(&self) -> usize {
        self.nodes.iter().map(|n| n.violations()).sum()
    }

    /// Hyper-blocks of `node`'s committed leaders, each with result proofs
    /// for every transaction it commits. Leaders whose block cannot be
    /// assembled are returned as errors.
    pub fn hyperblocks(&self, node: NodeId) -> Vec<Result<(HyperBlock, Vec<TxResultProof>), AssembleError>> {
        let n = &self.nodes[node as usize];
        let no_attestations = Vec::new();
        n.commits()
            .iter()
            .map(|c| {
                let atts = self.attestations.get(&c.leader).unwrap_or(&no_attestations);
                let hb = assemble_hyperblock(n.dag(), n.clerk().coin(), &c.leader, c.prev.as_ref(), atts)?;
                let batches = commit_list(c.batches.iter().map(|b| b.0));
                let failed = commit_list(c.outcome.ft.iter().map(|t| t.0));
                let proofs = c
                    .batches
                    .iter()
                    .flat_map(|b| {
                        let batch = &self.batches[b];
                        batch.txs().iter().map(|tx| prove_tx_result(batch, &tx.id(), &batches, &failed).expect("committed tx"))
                    })
                    .collect();
                Ok((hb, proofs))
            })
            .collect()
    }

    pub fn log_json_lines(&self) -> String {
        let mut s = String::new();
        for r in &self.log {
            s.push_str(&serde_json::to_string(r).expect("serializable"));
            s.push('\n');
        }
        s
    }
}

struct Engine {
    cfg: SimConfig,
    queue: BinaryHeap<Event>,
    seq: u64,
    now: f64,
    net: Network,
    workload: Workload,
    nodes: Vec<Node>,
    crashed: Vec<bool>,
    latencies: Vec<LatencyRecord>,
    index: HashMap<TxId, usize>,
    log: Vec<LogRecord>,
    attestations: HashMap<ProposalId, Vec<Attestation>>,
    batches: HashMap<BatchId, Arc<Batch>>,
    transactions: HashMap<TxId, Transaction>,
    refilled: std::collections::HashSet<TxId>,
    proposals_per_round: Vec<usize>,
}

/// Runs a simulation to completion.
pub fn run(cfg: &SimConfig) -> Result<SimOutput, ConfigError> {
    cfg.validate()?;
    let params = NodeParams {
        committee_n: cfg.n,
        committee_f: cfg.f,
        seed: cfg.seed,
        fast_quorum: cfg.fast_quorum,
        mode: cfg.mode,
        max_vector: cfg.max_vector,
        coin_reveal: cfg.coin_reveal,
    };
    let mut master = ChaCha8Rng::seed_from_u64(cfg.seed);
    let net_rng = ChaCha8Rng::from_rng(&mut master).expect("chacha");
    let work_rng = ChaCha8Rng::from_rng(&mut master).expect("chacha");
    let mut e = Engine {
        cfg: cfg.clone(),
        queue: BinaryHeap::new(),
        seq: 0,
        now: 0.0,
        net: Network::new(cfg.delay, net_rng),
        workload: Workload::new(work_rng, cfg.conflict_fraction, cfg.genesis_utxos),
        nodes: (0..cfg.n).map(|i| Node::new(i, params)).collect(),
        crashed: vec![false; cfg.n as usize],
        latencies: Vec::new(),
        index: HashMap::new(),
        log: Vec::new(),
        attestations: HashMap::new(),
        batches: HashMap::new(),
        transactions: HashMap::new(),
        refilled: Default::default(),
        proposals_per_round: Vec::new(),
    };
    for &(node, t) in &cfg.crashes {
        e.push(t, EventKind::Crash(node));
    }
    for i in 0..cfg.n {
        e.push(0.0, EventKind::Start(i));
        if cfg.load > 0.0 {
            e.push(cfg.batch_interval, EventKind::ClientBatch(i));
        }
    }
    let truncated = e.run_loop();
    Ok(SimOutput {
        config: e.cfg,
        nodes: e.nodes,
        crashed: e.crashed,
        latencies: e.latencies,
        log: e.log,
        attestations: e.attestations,
        batches: e.batches,
        transactions: e.transactions,
        proposals_per_round: e.proposals_per_round,
        truncated,
        end_time: e.now,
    })
}

impl Engine {
    fn push(&mut self, time: f64, kind: EventKind) {
        self.seq += 1;
        self.queue.push(Event { time, seq: self.seq, kind });
    }

    fn done_proposing(&self) -> bool {
        self.nodes
            .iter()
            .filter(|n| !self.crashed[n.id() as usize])
            .all(|n| n.round().is_some_and(|r| r >= self.cfg.max_rounds))
    }

    /// Returns whether the time bound cut the run short.
    fn run_loop(&mut self) -> bool {
        while let Some(ev) = self.queue.pop() {
            if ev.time > self.cfg.max_time {
                // Client ticks alone do not make a run incomplete.
                let pending = std::iter::once(&ev).chain(self.queue.iter()).any(|e| match &e.kind {
                    EventKind::Deliver { to, .. } => !self.crashed[*to as usize],
                    _ => false,
                });
                return pending || !self.done_proposing();
            }
            self.now = ev.time;
            match ev.kind {
                EventKind::Start(i) => {
                    if !self.crashed[i as usize] {
                        let out = self.nodes[i as usize].start();
                        self.handle(i, out);
                    }
                }
                EventKind::Crash(i) => {
                    if !self.crashed[i as usize] {
                        self.crashed[i as usize] = true;
                        self.log.push(LogRecord::Crash { time: self.now, node: i });
                    }
                }
                EventKind::ClientBatch(i) => {
                    if self.crashed[i as usize] || self.done_proposing() {
                        continue;
                    }
                    let mean = self.cfg.load * self.cfg.batch_interval / self.cfg.n as f64;
                    let size = self.workload.batch_size(mean);
                    if size > 0 {
                        let batch = Arc::new(self.workload.next_batch(i, size));
                        let round = self.nodes[i as usize].round().unwrap_or(0);
                        for tx in batch.txs() {
                            self.index.insert(tx.id(), self.latencies.len());
                            self.transactions.insert(tx.id(), tx.clone());
                            self.latencies.push(LatencyRecord {
                                tx: tx.id(),
                                node: i,
                                submit_time: self.now,
                                submit_round: round,
                                fast_time: None,
                                fast_round: None,
                                fast_result: None,
                                commit_time: None,
                                commit_round: None,
                                result: None,
                            });
                        }
                        self.batches.insert(batch.id(), batch.clone());
                        let out = self.nodes[i as usize].submit_batch(batch);
                        self.handle(i, out);
                    }
                    let next = self.now + self.cfg.batch_interval;
                    self.push(next, EventKind::ClientBatch(i));
                }
                EventKind::Deliver { to, proposal } => {
                    if self.crashed[to as usize] {
                        continue;
                    }
                    self.log.push(LogRecord::Deliver { time: self.now, node: to, author: proposal.author, round: proposal.round });
                    let payloads: Vec<Arc<Batch>> =
                        proposal.batches.iter().map(|b| self.batches[b].clone()).collect();
                    let out = self.nodes[to as usize].deliver((*proposal).clone(), &payloads);
                    self.handle(to, out);
                }
            }
        }
        false
    }

    fn handle(&mut self, node: NodeId, events: Vec<NodeEvent>) {
        let round = self.nodes[node as usize].round().unwrap_or(0);
        for ev in events {
            match ev {
                NodeEvent::Propose(p) => self.broadcast(node, p),
                NodeEvent::Attest(id, a) => self.attestations.entry(id).or_default().push(a),
                NodeEvent::WitnessRejected { .. } | NodeEvent::WitnessMismatch(_) | NodeEvent::Violation(_) => {}
                NodeEvent::Fast(fc) => {
                    if let Some(&i) = self.index.get(&fc.tx) {
                        let rec = &mut self.latencies[i];
                        if rec.node == node && rec.fast_time.is_none() {
                            rec.fast_time = Some(self.now);
                            rec.fast_round = Some(round);
                            rec.fast_result = Some(fc.result);
                        }
                    }
                }
                NodeEvent::Commit(c) => {
                    self.log.push(LogRecord::Leader {
                        time: self.now,
                        node,
                        round: c.round,
                        leader: c.leader.to_string(),
                        st: c.outcome.st.len(),
                        ft: c.outcome.ft.len(),
                    });
                    for (set, result) in [(&c.outcome.st, TxResult::Success), (&c.outcome.ft, TxResult::Failed)] {
                        for tx in set {
                            if result == TxResult::Success && self.refilled.insert(*tx) {
                                if let Some(t) = self.transactions.get(tx) {
                                    self.workload.on_committed(t);
                                }
                            }
                            if let Some(&i) = self.index.get(tx) {
                                let rec = &mut self.latencies[i];
                                if rec.node == node && rec.commit_time.is_none() {
                                    rec.commit_time = Some(self.now);
                                    rec.commit_round = Some(round);
                                    rec.result = Some(result);
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    fn broadcast(&mut self, from: NodeId, p: Arc<Proposal>) {
        if self.crashed[from as usize] || p.round > self.cfg.max_rounds {
            return;
        }
        let r = p.round as usize;
        if self.proposals_per_round.len() <= r {
            self.proposals_per_round.resize(r + 1, 0);
        }
        self.proposals_per_round[r] += 1;
        self.log.push(LogRecord::Propose {
            time: self.now,
            node: from,
            round: p.round,
            proposal: p.id().to_string(),
            batches: p.batches.len(),
            witness_entries: p.witness.as_ref().map_or(0, |w| w.entries.len()),
        });
        for to in 0..self.cfg.n {
            if self.crashed[to as usize] {
                continue;
            }
            let d = self.net.rbc_delay(self.cfg.n, self.cfg.f);
            let t = self.now + d;
            self.push(t, EventKind::Deliver { to, proposal: p.clone() });
        }
    }
}
