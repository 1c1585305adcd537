//! Board: per-node vote accounting over the DAG, the fast-commit channel and
//! transaction-result resolution for committed sub-DAGs.
//!
//! A node votes for a transaction at the earliest round at which one of its
//! proposals has the transaction in its sub-DAG. Votes are kept per batch and
//! per transaction; a proposal-level record marks which ancestors a voter has
//! already reached so the parent walk touches every proposal once per voter.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::dag::{Committee, DagStore, Frontier, NodeId, Proposal, ProposalId, Round};
use crate::utxo::{ord_less_id, BatchId, TxId, TxResult, TxoId};

/// Earliest voting round per node (min semantics).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct VoteRecord(BTreeMap<NodeId, Round>);

impl VoteRecord {
    /// Records a vote; returns whether the stored round changed.
    pub fn insert(&mut self, node: NodeId, round: Round) -> bool {
        match self.0.get_mut(&node) {
            Some(r) if *r <= round => false,
            Some(r) => {
                *r = round;
                true
            }
            None => {
                self.0.insert(node, round);
                true
            }
        }
    }

    pub fn get(&self, node: NodeId) -> Option<Round> {
        self.0.get(&node).copied()
    }

    pub fn voters(&self) -> usize {
        self.0.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, Round)> + '_ {
        self.0.iter().map(|(n, r)| (*n, *r))
    }

    /// Votes cast at or before each node's frontier round.
    pub fn pruned(&self, frontier: &Frontier) -> VoteRecord {
        VoteRecord(
            self.0
                .iter()
                .filter(|(n, r)| frontier.get(n).is_some_and(|f| **r <= *f))
                .map(|(n, r)| (*n, *r))
                .collect(),
        )
    }

    pub fn as_map(&self) -> &BTreeMap<NodeId, Round> {
        &self.0
    }
}

/// How many distinct voters a conflict-free transaction needs to fast-commit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum FastQuorum {
    /// At least 2f+1 voters.
    AtLeastQuorum,
    /// Strictly more than 2f+1 voters.
    BeyondQuorum,
}

impl FastQuorum {
    pub fn threshold(self, committee: Committee) -> usize {
        match self {
            FastQuorum::AtLeastQuorum => committee.quorum(),
            FastQuorum::BeyondQuorum => committee.quorum() + 1,
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "at-least-quorum" | "2f+1" => Some(FastQuorum::AtLeastQuorum),
            "beyond-quorum" | ">2f+1" => Some(FastQuorum::BeyondQuorum),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FastQuorum::AtLeastQuorum => "at-least-quorum",
            FastQuorum::BeyondQuorum => "beyond-quorum",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct CommitOutcome {
    pub st: BTreeSet<TxId>,
    pub ft: BTreeSet<TxId>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct FastCommit {
    pub tx: TxId,
    pub result: TxResult,
}

/// A fast-committed result contradicted by a formal commit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SafetyViolation {
    pub tx: TxId,
    pub fast: TxResult,
    pub committed: TxResult,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BoardError {
    #[error("batch {0} payload unavailable")]
    MissingBatch(BatchId),
    #[error("proposal {0} unknown")]
    UnknownProposal(ProposalId),
    #[error("previous leader {0} is not an ancestor of {1}")]
    NotAncestor(ProposalId, ProposalId),
    #[error("previous leader {0} has not been committed")]
    NotCommitted(ProposalId),
    #[error("fast-committed results contradicted: {0:?}")]
    SafetyViolation(Vec<SafetyViolation>),
}

/// Result of resolving one committed sub-DAG.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Resolution {
    pub outcome: CommitOutcome,
    /// Newly committed batches in traversal order.
    pub batches: Vec<BatchId>,
}

/// What `commit` applied.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CommitReport {
    pub outcome: CommitOutcome,
    pub batches: Vec<BatchId>,
    /// Results fast-committed as a consequence of this commit.
    pub fast: Vec<FastCommit>,
    pub violations: Vec<SafetyViolation>,
}

/// Which formal commits a resolution may treat as already final.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CommitBase {
    /// Everything this node has committed.
    Current,
    /// Only commits made by leaders of at most this round (0 = nothing).
    AsOf(Round),
}

/// Simulated commit output: committed batch list and failed transaction set.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SimulatedCommit {
    pub batches: Vec<BatchId>,
    pub failed: BTreeSet<TxId>,
    pub outcome: CommitOutcome,
}

struct TxEntry {
    inputs: Vec<TxoId>,
    batch: BatchId,
}

pub struct Board {
    committee: Committee,
    fast_threshold: usize,
    tx_votes: HashMap<TxId, VoteRecord>,
    batch_votes: HashMap<BatchId, VoteRecord>,
    reached: HashMap<ProposalId, VoteRecord>,
    txo_index: HashMap<TxoId, BTreeSet<TxId>>,
    txs: HashMap<TxId, TxEntry>,
    batch_txs: HashMap<BatchId, Vec<TxId>>,
    conflicted: HashSet<TxId>,
    fast: HashMap<TxId, TxResult>,
    committed: HashMap<TxId, (TxResult, Round)>,
    committed_batches: HashMap<BatchId, Round>,
    ready: BTreeSet<TxId>,
}

impl Board {
    pub fn new(committee: Committee, quorum: FastQuorum) -> Self {
        Self {
            committee,
            fast_threshold: quorum.threshold(committee),
            tx_votes: HashMap::new(),
            batch_votes: HashMap::new(),
            reached: HashMap::new(),
            txo_index: HashMap::new(),
            txs: HashMap::new(),
            batch_txs: HashMap::new(),
            conflicted: HashSet::new(),
            fast: HashMap::new(),
            committed: HashMap::new(),
            committed_batches: HashMap::new(),
            ready: BTreeSet::new(),
        }
    }

    pub fn committee(&self) -> Committee {
        self.committee
    }

    pub fn fast_threshold(&self) -> usize {
        self.fast_threshold
    }

    pub fn tx_votes(&self, tx: &TxId) -> Option<&VoteRecord> {
        self.tx_votes.get(tx)
    }

    pub fn all_tx_votes(&self) -> &HashMap<TxId, VoteRecord> {
        &self.tx_votes
    }

    pub fn conflicted_set(&self) -> &HashSet<TxId> {
        &self.conflicted
    }

    pub fn fast_result(&self, tx: &TxId) -> Option<TxResult> {
        self.fast.get(tx).copied()
    }

    pub fn committed_result(&self, tx: &TxId) -> Option<TxResult> {
        self.committed.get(tx).map(|(r, _)| *r)
    }

    pub fn has_seen_batch(&self, b: &BatchId) -> bool {
        self.batch_txs.contains_key(b)
    }

    pub fn batch_of(&self, tx: &TxId) -> Option<BatchId> {
        self.txs.get(tx).map(|e| e.batch)
    }

    /// Every TXO with at least two known spenders.
    pub fn conflicted_tx(&self) -> BTreeMap<TxoId, BTreeSet<TxId>> {
        self.txo_index
            .iter()
            .filter(|(_, s)| s.len() >= 2)
            .map(|(k, v)| (*k, v.clone()))
            .collect()
    }

    /// Counts votes contributed by `p` (which must already be in `dag`) and,
    /// for odd rounds, fast-commits every eligible transaction.
    pub fn process(&mut self, p: &Proposal, dag: &DagStore) -> Result<Vec<FastCommit>, BoardError> {
        for b in &p.batches {
            if !self.batch_txs.contains_key(b) && dag.batch(b).is_none() {
                return Err(BoardError::MissingBatch(*b));
            }
        }
        let mut fast = Vec::new();
        let voter = p.author;
        let round = p.round;
        if !self.reached.entry(p.id()).or_default().insert(voter, round) {
            // Already processed.
            return Ok(fast);
        }
        for b in &p.batches {
            if !self.batch_txs.contains_key(b) {
                self.register_batch(dag.batch(b).expect("checked above").clone(), &mut fast);
            }
            self.vote_batch(*b, voter, round);
        }

        let mut stack: Vec<ProposalId> = p.parents.iter().copied().collect();
        while let Some(id) = stack.pop() {
            if !self.reached.entry(id).or_default().insert(voter, round) {
                continue;
            }
            let parent = dag.get(&id).ok_or(BoardError::UnknownProposal(id))?;
            for b in &parent.batches {
                self.vote_batch(*b, voter, round);
            }
            stack.extend(parent.parents.iter().copied());
        }

        if round % 2 == 1 {
            self.drain_ready(&mut fast);
        }
        Ok(fast)
    }

    fn register_batch(&mut self, batch: Arc<crate::utxo::Batch>, fast: &mut Vec<FastCommit>) {
        let mut ids = Vec::with_capacity(batch.txs().len());
        for tx in batch.txs() {
            let id = tx.id();
            ids.push(id);
            if self.txs.contains_key(&id) {
                continue;
            }
            let inputs: Vec<TxoId> = tx.input_ids().collect();
            for txo in &inputs {
                let spenders = self.txo_index.entry(*txo).or_default();
                spenders.insert(id);
                if spenders.len() >= 2 {
                    self.conflicted.extend(spenders.iter().copied());
                }
            }
            self.txs.insert(id, TxEntry { inputs, batch: batch.id() });
            // A conflictor of an already-successful transaction can only fail.
            if self.committed.get(&id).is_none() && self.spends_against_success(&id) {
                self.fast.insert(id, TxResult::Failed);
                fast.push(FastCommit { tx: id, result: TxResult::Failed });
            }
        }
        self.batch_txs.insert(batch.id(), ids);
    }

    fn spends_against_success(&self, tx: &TxId) -> bool {
        self.txs[tx].inputs.iter().any(|txo| {
            self.txo_index[txo].iter().any(|o| {
                o != tx
                    && (self.committed.get(o).map(|c| c.0) == Some(TxResult::Success)
                        || self.fast.get(o) == Some(&TxResult::Success))
            })
        })
    }

    fn vote_batch(&mut self, b: BatchId, voter: NodeId, round: Round) {
        if !self.batch_votes.entry(b).or_default().insert(voter, round) {
            return;
        }
        let Some(txs) = self.batch_txs.get(&b) else { return };
        for tx in txs {
            let rec = self.tx_votes.entry(*tx).or_default();
            if rec.insert(voter, round) && rec.voters() == self.fast_threshold {
                self.ready.insert(*tx);
            }
        }
    }

    /// True when some other spender of `tx`'s inputs is not known to fail.
    fn live_conflict(&self, tx: &TxId) -> bool {
        if !self.conflicted.contains(tx) {
            return false;
        }
        self.txs[tx].inputs.iter().any(|txo| {
            self.txo_index[txo].iter().any(|o| {
                o != tx
                    && self.committed.get(o).map(|c| c.0) != Some(TxResult::Failed)
                    && self.fast.get(o) != Some(&TxResult::Failed)
            })
        })
    }

    fn is_decided(&self, tx: &TxId) -> bool {
        self.fast.contains_key(tx) || self.committed.contains_key(tx)
    }

    /// Fast-commit rule check for one transaction at an odd round.
    pub fn fast_commit_eligible(&self, tx: &TxId) -> bool {
        self.tx_votes.get(tx).is_some_and(|v| v.voters() >= self.fast_threshold) && !self.live_conflict(tx)
    }

    fn drain_ready(&mut self, fast: &mut Vec<FastCommit>) {
        let ready: Vec<TxId> = self.ready.iter().copied().collect();
        for tx in ready {
            if self.is_decided(&tx) {
                self.ready.remove(&tx);
            } else if !self.live_conflict(&tx) {
                self.ready.remove(&tx);
                self.fast.insert(tx, TxResult::Success);
                fast.push(FastCommit { tx, result: TxResult::Success });
            }
        }
    }

    fn base_result(&self, tx: &TxId, base: CommitBase) -> Option<TxResult> {
        let (r, by) = self.committed.get(tx)?;
        match base {
            CommitBase::Current => Some(*r),
            CommitBase::AsOf(limit) => (*by <= limit).then_some(*r),
        }
    }

    fn base_batch(&self, b: &BatchId, base: CommitBase) -> bool {
        match (self.committed_batches.get(b), base) {
            (None, _) => false,
            (Some(_), CommitBase::Current) => true,
            (Some(by), CommitBase::AsOf(limit)) => *by <= limit,
        }
    }

    /// Resolves transaction results for an uncommitted sub-DAG. Pure: the
    /// `overlay` carries hypothetical earlier commits during simulation.
    fn resolve(
        &self,
        ps: &[Arc<Proposal>],
        frontier: &Frontier,
        base: CommitBase,
        overlay: &Overlay,
    ) -> Result<Resolution, BoardError> {
        let prior = |tx: &TxId| overlay.txs.get(tx).copied().or_else(|| self.base_result(tx, base));
        let mut batches = Vec::new();
        let mut seen_batches = HashSet::new();
        let mut txs: Vec<TxId> = Vec::new();
        let mut in_t = HashSet::new();
        for p in ps {
            for b in &p.batches {
                if overlay.batches.contains(b) || self.base_batch(b, base) || !seen_batches.insert(*b) {
                    continue;
                }
                let members = self.batch_txs.get(b).ok_or(BoardError::MissingBatch(*b))?;
                batches.push(*b);
                for tx in members {
                    if prior(tx).is_none() && in_t.insert(*tx) {
                        txs.push(*tx);
                    }
                }
            }
        }

        let mut out = CommitOutcome::default();
        let mut decided: HashSet<TxId> = HashSet::new();
        // Inputs already consumed by an earlier successful commit.
        for tx in &txs {
            let spent = self.txs[tx].inputs.iter().any(|txo| {
                self.txo_index[txo].iter().any(|o| o != tx && prior(o) == Some(TxResult::Success))
            });
            if spent {
                out.ft.insert(*tx);
                decided.insert(*tx);
            }
        }

        let mut groups: BTreeMap<TxoId, Vec<TxId>> = BTreeMap::new();
        for tx in &txs {
            if decided.contains(tx) {
                continue;
            }
            if !self.conflicted.contains(tx) {
                out.st.insert(*tx);
                decided.insert(*tx);
                continue;
            }
            for txo in &self.txs[tx].inputs {
                groups.entry(*txo).or_default().push(*tx);
            }
        }

        let keys: Vec<TxoId> = groups.keys().copied().collect();
        for key in keys {
            let live: Vec<TxId> = groups[&key].iter().filter(|t| !decided.contains(t)).copied().collect();
            if live.is_empty() {
                continue;
            }
            let winner = if live.len() == 1 { live[0] } else { self.rank(&live, frontier, overlay.virtual_vote) };
            for tx in &live {
                decided.insert(*tx);
                if *tx == winner {
                    out.st.insert(*tx);
                } else {
                    out.ft.insert(*tx);
                }
            }
            for txo in &self.txs[&winner].inputs {
                if let Some(members) = groups.get(txo) {
                    for m in members {
                        if *m != winner && decided.insert(*m) {
                            out.ft.insert(*m);
                        }
                    }
                }
            }
        }
        Ok(Resolution { outcome: out, batches })
    }

    /// Winner of a conflict group: most earliest-votes under the frontier,
    /// ties to the Ord-greater id.
    fn rank(&self, group: &[TxId], frontier: &Frontier, virtual_vote: Option<(NodeId, Round)>) -> TxId {
        let empty = VoteRecord::default();
        let pruned: Vec<VoteRecord> = group
            .iter()
            .map(|t| {
                let mut rec = self.tx_votes.get(t).unwrap_or(&empty).pruned(frontier);
                if let Some((node, round)) = virtual_vote {
                    rec.insert(node, round);
                }
                rec
            })
            .collect();
        let mut earliest: BTreeMap<NodeId, Round> = BTreeMap::new();
        for rec in &pruned {
            for (n, r) in rec.iter() {
                let e = earliest.entry(n).or_insert(r);
                *e = (*e).min(r);
            }
        }
        let counts: Vec<usize> = pruned
            .iter()
            .map(|rec| rec.iter().filter(|(n, r)| earliest[n] == *r).count())
            .collect();
        let mut best = 0;
        for i in 1..group.len() {
            let better = counts[i] > counts[best]
                || (counts[i] == counts[best] && ord_less_id(&group[best], &group[i]));
            if better {
                best = i;
            }
        }
        group[best]
    }

    fn violations(&self, outcome: &CommitOutcome) -> Vec<SafetyViolation> {
        let mut v = Vec::new();
        for (set, result) in [(&outcome.st, TxResult::Success), (&outcome.ft, TxResult::Failed)] {
            for tx in set {
                if let Some(fast) = self.fast.get(tx) {
                    if *fast != result {
                        v.push(SafetyViolation { tx: *tx, fast: *fast, committed: result });
                    }
                }
            }
        }
        v
    }

    /// Resolves and applies a committed sub-DAG. A contradiction of an
    /// earlier fast commit is reported as an error and nothing is applied.
    pub fn commit(
        &mut self,
        ps: &[Arc<Proposal>],
        frontier: &Frontier,
        leader_round: Round,
    ) -> Result<CommitReport, BoardError> {
        let res = self.resolve(ps, frontier, CommitBase::Current, &Overlay::default())?;
        let violations = self.violations(&res.outcome);
        if !violations.is_empty() {
            return Err(BoardError::SafetyViolation(violations));
        }
        Ok(self.apply(res, leader_round, violations))
    }

    /// Applies a commit even if it contradicts fast-committed results,
    /// reporting the contradictions.
    pub fn commit_unchecked(
        &mut self,
        ps: &[Arc<Proposal>],
        frontier: &Frontier,
        leader_round: Round,
    ) -> Result<CommitReport, BoardError> {
        let res = self.resolve(ps, frontier, CommitBase::Current, &Overlay::default())?;
        let violations = self.violations(&res.outcome);
        Ok(self.apply(res, leader_round, violations))
    }

    fn apply(&mut self, res: Resolution, leader_round: Round, violations: Vec<SafetyViolation>) -> CommitReport {
        for tx in &res.outcome.st {
            self.committed.insert(*tx, (TxResult::Success, leader_round));
            self.ready.remove(tx);
        }
        for tx in &res.outcome.ft {
            self.committed.insert(*tx, (TxResult::Failed, leader_round));
            self.ready.remove(tx);
        }
        for b in &res.batches {
            self.committed_batches.insert(*b, leader_round);
        }

        // Conflictors of new winners are doomed; transactions whose only
        // conflictors just failed may now meet the fast-commit rule.
        let mut fast = Vec::new();
        let mut touched: BTreeSet<TxId> = BTreeSet::new();
        for tx in res.outcome.st.iter().chain(&res.outcome.ft) {
            if !self.conflicted.contains(tx) {
                continue;
            }
            for txo in &self.txs[tx].inputs {
                touched.extend(self.txo_index[txo].iter().filter(|o| *o != tx));
            }
        }
        for tx in touched {
            if self.is_decided(&tx) {
                continue;
            }
            if self.spends_against_success(&tx) {
                self.fast.insert(tx, TxResult::Failed);
                fast.push(FastCommit { tx, result: TxResult::Failed });
            } else if self.fast_commit_eligible(&tx) {
                self.fast.insert(tx, TxResult::Success);
                self.ready.remove(&tx);
                fast.push(FastCommit { tx, result: TxResult::Success });
            }
        }
        CommitReport { outcome: res.outcome, batches: res.batches, fast, violations }
    }

    /// Side-effect-free commit of `chain` (stored leaders in commit order)
    /// on top of the commits allowed by `base`, optionally followed by
    /// `tail`, a proposal that may not be stored yet. For an unstored tail
    /// the author's own votes at its round are accounted virtually. Returns
    /// one entry per committed element.
    pub fn simulate_chain(
        &self,
        dag: &DagStore,
        base: CommitBase,
        chain: &[ProposalId],
        tail: Option<&Proposal>,
    ) -> Result<Vec<SimulatedCommit>, BoardError> {
        let mut overlay = Overlay::default();
        let mut closed: HashSet<ProposalId> = HashSet::new();
        let mut out = Vec::with_capacity(chain.len() + 1);
        let is_closed = |closed: &HashSet<ProposalId>, id: &ProposalId| {
            closed.contains(id)
                || match (dag.committed_by(id), base) {
                    (None, _) => false,
                    (Some(_), CommitBase::Current) => true,
                    (Some(by), CommitBase::AsOf(limit)) => by <= limit,
                }
        };
        for leader in chain {
            if !dag.contains(leader) {
                return Err(BoardError::UnknownProposal(*leader));
            }
            let ps = dag.sub_dag_above(leader, &|id| is_closed(&closed, id)).expect("leader present");
            let frontier = dag.frontier(leader).expect("leader present");
            let res = self.resolve(&ps, &frontier, base, &overlay)?;
            overlay.absorb(&res);
            closed.extend(ps.iter().map(|p| p.id()));
            out.push(SimulatedCommit { batches: res.batches, failed: res.outcome.ft.clone(), outcome: res.outcome });
        }
        if let Some(p) = tail {
            let mut ps: Vec<Arc<Proposal>> = Vec::new();
            let mut seen: HashSet<ProposalId> = HashSet::new();
            let mut frontier = Frontier::new();
            for parent in &p.parents {
                if !dag.contains(parent) {
                    return Err(BoardError::UnknownProposal(*parent));
                }
                for q in dag.sub_dag_above(parent, &|id| is_closed(&closed, id)).expect("parent present") {
                    if seen.insert(q.id()) {
                        ps.push(q);
                    }
                }
                for (a, r) in dag.frontier(parent).expect("parent present") {
                    let e = frontier.entry(a).or_insert(r);
                    *e = (*e).max(r);
                }
            }
            if !is_closed(&closed, &p.id()) {
                ps.push(Arc::new(p.clone()));
            }
            ps.sort_by_key(|q| (q.round, q.author));
            frontier.insert(p.author, p.round);
            overlay.virtual_vote = Some((p.author, p.round));
            let res = self.resolve(&ps, &frontier, base, &overlay)?;
            out.push(SimulatedCommit { batches: res.batches, failed: res.outcome.ft.clone(), outcome: res.outcome });
        }
        Ok(out)
    }

    /// (B, F) that committing `p` right after the committed leader `prev`
    /// would produce; `None` stands for the genesis leader. `p` need not be
    /// stored.
    pub fn simulate_commit(
        &self,
        dag: &DagStore,
        p: &Proposal,
        prev: Option<&ProposalId>,
    ) -> Result<SimulatedCommit, BoardError> {
        let base = match prev {
            None => CommitBase::AsOf(0),
            Some(l) => {
                let round = dag.get(l).map(|x| x.round).ok_or(BoardError::UnknownProposal(*l))?;
                if !p.parents.iter().any(|q| dag.reaches(q, l)) {
                    return Err(BoardError::NotAncestor(*l, p.id()));
                }
                if dag.committed_by(l) != Some(round) {
                    return Err(BoardError::NotCommitted(*l));
                }
                CommitBase::AsOf(round)
            }
        };
        Ok(self.simulate_chain(dag, base, &[], Some(p))?.pop().expect("tail entry"))
    }

    /// Registers a batch known locally before any proposal carries it.
    pub fn register(&mut self, batch: Arc<crate::utxo::Batch>) -> Vec<FastCommit> {
        let mut fast = Vec::new();
        if !self.batch_txs.contains_key(&batch.id()) {
            self.register_batch(batch, &mut fast);
        }
        fast
    }
}

#[derive(Default)]
struct Overlay {
    txs: HashMap<TxId, TxResult>,
    batches: HashSet<BatchId>,
    virtual_vote: Option<(NodeId, Round)>,
}

impl Overlay {
    fn absorb(&mut self, res: &Resolution) {
        for tx in &res.outcome.st {
            self.txs.insert(*tx, TxResult::Success);
        }
        for tx in &res.outcome.ft {
            self.txs.insert(*tx, TxResult::Failed);
        }
        self.batches.extend(res.batches.iter().copied());
    }
}
