//! One protocol participant. Driven by the simulator with proposal
//! deliveries and client batches; it never sees delays or the clock.

use std::collections::{BTreeSet, VecDeque};
use std::sync::Arc;

use serde::Serialize;

use crate::board::{Board, CommitOutcome, FastCommit, FastQuorum, SafetyViolation};
use crate::clerk::{Clerk, CoinReveal, LeaderRecord};
use crate::dag::{Committee, DagStore, InsertOutcome, NodeId, Proposal, ProposalId, Round};
use crate::hyperblock::{self, commit_list, Attestation, LeaderDag, Mode, WitnessCheck};
use crate::utxo::{Batch, BatchId};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NodeParams {
    pub committee_n: u32,
    pub committee_f: u32,
    pub seed: u64,
    pub fast_quorum: FastQuorum,
    pub mode: Mode,
    pub max_vector: usize,
    pub coin_reveal: CoinReveal,
}

impl NodeParams {
    pub fn committee(&self) -> Committee {
        Committee::with_f(self.committee_n, self.committee_f)
    }
}

/// A formally committed leader with its resolved sub-DAG.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CommitRecord {
    pub leader: ProposalId,
    pub round: Round,
    /// Leader committed immediately before this one.
    pub prev: Option<ProposalId>,
    pub batches: Vec<BatchId>,
    pub outcome: CommitOutcome,
}

#[derive(Clone, Debug)]
pub enum NodeEvent {
    Propose(Arc<Proposal>),
    Attest(ProposalId, Attestation),
    WitnessRejected { proposal: ProposalId, entry: usize },
    Fast(FastCommit),
    Commit(Arc<CommitRecord>),
    Violation(SafetyViolation),
    /// A committed leader's realized witness entry disagrees with the commit.
    WitnessMismatch(ProposalId),
}

pub struct Node {
    id: NodeId,
    params: NodeParams,
    dag: DagStore,
    board: Board,
    clerk: Clerk,
    leader_dag: LeaderDag,
    round: Option<Round>,
    pending_batches: VecDeque<BatchId>,
    deferred: Vec<Proposal>,
    unverified: Vec<ProposalId>,
    commits: Vec<Arc<CommitRecord>>,
    violations: usize,
    witness_mismatches: usize,
}

impl Node {
    pub fn new(id: NodeId, params: NodeParams) -> Self {
        let committee = params.committee();
        Self {
            id,
            params,
            dag: DagStore::new(committee),
            board: Board::new(committee, params.fast_quorum),
            clerk: Clerk::new(committee, params.seed).with_reveal(params.coin_reveal),
            leader_dag: LeaderDag::new(),
            round: None,
            pending_batches: VecDeque::new(),
            deferred: Vec::new(),
            unverified: Vec::new(),
            commits: Vec::new(),
            violations: 0,
            witness_mismatches: 0,
        }
    }

    pub fn id(&self) -> NodeId {
        self.id
    }

    /// Round of this node's latest proposal.
    pub fn round(&self) -> Option<Round> {
        self.round
    }

    pub fn dag(&self) -> &DagStore {
        &self.dag
    }

    pub fn board(&self) -> &Board {
        &self.board
    }

    pub fn clerk(&self) -> &Clerk {
        &self.clerk
    }

    pub fn leader_dag(&self) -> &LeaderDag {
        &self.leader_dag
    }

    pub fn commits(&self) -> &[Arc<CommitRecord>] {
        &self.commits
    }

    pub fn committed_sequence(&self) -> &[LeaderRecord] {
        self.clerk.committed_sequence()
    }

    pub fn violations(&self) -> usize {
        self.violations
    }

    pub fn witness_mismatches(&self) -> usize {
        self.witness_mismatches
    }

    /// Round-0 proposal.
    pub fn start(&mut self) -> Vec<NodeEvent> {
        let mut out = Vec::new();
        self.propose(0, BTreeSet::new(), &mut out);
        out
    }

    /// A batch from this node's own workers, to be carried by its next proposal.
    pub fn submit_batch(&mut self, batch: Arc<Batch>) -> Vec<NodeEvent> {
        self.dag.insert_batch(batch.clone());
        self.pending_batches.push_back(batch.id());
        self.board.register(batch).into_iter().map(NodeEvent::Fast).collect()
    }

    /// RBC delivery of `p` together with its batch payloads.
    pub fn deliver(&mut self, p: Proposal, batches: &[Arc<Batch>]) -> Vec<NodeEvent> {
        for b in batches {
            self.dag.insert_batch(b.clone());
        }
        let mut out = Vec::new();
        let mut queue = vec![p];
        while let Some(p) = queue.pop() {
            match self.dag.add_proposal(p.clone()) {
                InsertOutcome::Accepted { new: true } => {
                    self.on_stored(&p, &mut out);
                    // Anything waiting on p may now go in.
                    let (ready, waiting): (Vec<_>, Vec<_>) =
                        std::mem::take(&mut self.deferred).into_iter().partition(|q| q.parents.iter().all(|x| self.dag.contains(x)));
                    self.deferred = waiting;
                    queue.extend(ready);
                }
                InsertOutcome::Accepted { new: false } | InsertOutcome::Rejected(_) => {}
                InsertOutcome::Deferred { .. } => self.deferred.push(p),
            }
        }
        self.retry_verification(&mut out);
        self.try_advance(&mut out);
        out
    }

    fn on_stored(&mut self, p: &Proposal, out: &mut Vec<NodeEvent>) {
        let fast = self.board.process(p, &self.dag).expect("payloads delivered with the proposal");
        out.extend(fast.into_iter().map(NodeEvent::Fast));
        self.leader_dag.add(p);
        let commits = self.clerk.on_proposal_added(p, &mut self.dag);
        for c in commits {
            let report = self.board.commit_unchecked(&c.proposals, &c.frontier, c.round).expect("payloads present");
            for v in &report.violations {
                self.violations += 1;
                out.push(NodeEvent::Violation(*v));
            }
            out.extend(report.fast.iter().copied().map(NodeEvent::Fast));
            let prev = self.commits.last().map(|r| r.leader);
            let record = Arc::new(CommitRecord {
                leader: c.leader,
                round: c.round,
                prev,
                batches: report.batches.clone(),
                outcome: report.outcome.clone(),
            });
            if self.params.mode != Mode::Off && !self.witness_matches(&record) {
                self.witness_mismatches += 1;
                out.push(NodeEvent::WitnessMismatch(c.leader));
            }
            self.leader_dag.decide(c.round, c.leader);
            self.commits.push(record.clone());
            out.push(NodeEvent::Commit(record));
        }
        if self.params.mode != Mode::Off && p.witness.is_some() {
            self.unverified.push(p.id());
        }
    }

    /// The leader's witness entry for the realized predecessor must equal
    /// the commitments of the actual commit.
    fn witness_matches(&self, r: &CommitRecord) -> bool {
        let Some(w) = self.dag.get(&r.leader).and_then(|p| p.witness.clone()) else { return false };
        let Some(i) = w.position(r.prev.as_ref()) else { return false };
        let e = w.entries[i];
        e.wb == commit_list(r.batches.iter().map(|b| b.0)).commitment()
            && e.wf == commit_list(r.outcome.ft.iter().map(|t| t.0)).commitment()
    }

    fn retry_verification(&mut self, out: &mut Vec<NodeEvent>) {
        let pending = std::mem::take(&mut self.unverified);
        for id in pending {
            let p = self.dag.get(&id).expect("stored").clone();
            match hyperblock::verify_proposal_witness(&self.dag, &self.board, &self.clerk, &p) {
                WitnessCheck::Attest(digest) => {
                    let coin = self.clerk.coin();
                    let a = Attestation::sign(self.id, coin.seed, coin.n, &id, p.round, p.author, &digest);
                    out.push(NodeEvent::Attest(id, a));
                }
                WitnessCheck::Reject(entry) => out.push(NodeEvent::WitnessRejected { proposal: id, entry }),
                WitnessCheck::Defer => self.unverified.push(id),
            }
        }
    }

    /// Proposes the next round once the current one has a quorum and this
    /// node's own proposal has been delivered back to it.
    fn try_advance(&mut self, out: &mut Vec<NodeEvent>) {
        while let Some(r) = self.round {
            if self.dag.proposal_of(self.id, r).is_none() || self.dag.round_size(r) < self.dag.committee().quorum() {
                return;
            }
            let parents: BTreeSet<ProposalId> = self.dag.round(r).map(|p| p.id()).collect();
            self.propose(r + 1, parents, out);
        }
    }

    fn propose(&mut self, round: Round, parents: BTreeSet<ProposalId>, out: &mut Vec<NodeEvent>) {
        let batches: Vec<BatchId> = self.pending_batches.drain(..).collect();
        let mut p = Proposal::new(self.id, round, batches, parents);
        let w = hyperblock::propose(self.params.mode, &self.dag, &self.board, &self.clerk, &p, self.params.max_vector)
            .expect("own DAG is complete");
        if let Some(w) = w {
            p = p.with_witness(w);
        }
        self.round = Some(round);
        out.push(NodeEvent::Propose(Arc::new(p)));
    }
}
