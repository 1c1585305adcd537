//! Hyper-blocks: per-proposal commitments to the batches and failed
//! transactions a proposal would commit, endorsed during broadcast, so that
//! a client can verify a transaction's result against a single block.
//!
//! Blocking proposers resolve the previous leader first and attach one
//! entry. Non-blocking proposers attach one entry per candidate previous
//! leader, ordered by (round desc, author asc) and ending with the anchor,
//! the proposer's latest committed leader.

pub mod accumulator;
pub mod block;

use std::collections::BTreeMap;

use serde::Serialize;

use crate::board::{Board, BoardError, CommitBase};
use crate::clerk::{leader_walk, Clerk, FIRST_LEADER_ROUND};
use crate::dag::{DagStore, NodeId, Proposal, ProposalId, Round};
use crate::hash::{Digest, Encoder};
use crate::merkle;

pub use accumulator::{commit_list, CommittedSet, MembershipProof, NonMembershipProof, SetCommitment};
pub use block::{
    assemble_hyperblock, prove_tx_result, verify_tx_result, AssembleError, Attestation, HyperBlock, Leadership, ResultProof,
    Support, TxResultProof, Verdict,
};

const ENTRY_TAG: u8 = 0x41;
const WITNESS_TAG: u8 = 0x42;

/// `H(0x42 || count || merkle_root)`; the root is omitted for zero entries.
pub fn witness_digest(count: u64, merkle_root: Option<&Digest>) -> Digest {
    let mut e = Encoder::tagged(WITNESS_TAG);
    e.u64(count);
    if let Some(r) = merkle_root {
        e.digest(r);
    }
    e.finish()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Mode {
    Off,
    Blocking,
    NonBlocking,
    /// Non-blocking unless more than `threshold` transactions are conflicted.
    Hybrid { threshold: usize },
}

impl Mode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "off" => Some(Mode::Off),
            "blocking" => Some(Mode::Blocking),
            "nonblocking" | "non-blocking" => Some(Mode::NonBlocking),
            _ => {
                let t = s.strip_prefix("hybrid:")?;
                Some(Mode::Hybrid { threshold: t.parse().ok()? })
            }
        }
    }

    pub fn name(&self) -> String {
        match self {
            Mode::Off => "off".into(),
            Mode::Blocking => "blocking".into(),
            Mode::NonBlocking => "nonblocking".into(),
            Mode::Hybrid { threshold } => format!("hybrid:{threshold}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum WitnessKind {
    Blocking,
    Vector,
}

/// Commitments for one candidate previous leader (`None` = genesis).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct WitnessEntry {
    pub prev: Option<ProposalId>,
    pub wb: SetCommitment,
    pub wf: SetCommitment,
}

impl WitnessEntry {
    pub fn leaf(&self) -> Digest {
        let mut e = Encoder::tagged(ENTRY_TAG);
        match &self.prev {
            None => e.u8(0),
            Some(p) => e.u8(1).digest(&p.0),
        };
        self.wb.encode(&mut e);
        self.wf.encode(&mut e);
        e.finish()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Witness {
    pub kind: WitnessKind,
    pub anchor: Option<ProposalId>,
    pub entries: Vec<WitnessEntry>,
}

impl Witness {
    /// Entry count and positional Merkle root over the entries; what
    /// endorsements sign.
    pub fn digest(&self) -> Digest {
        let leaves: Vec<Digest> = self.entries.iter().map(WitnessEntry::leaf).collect();
        let root = (!leaves.is_empty()).then(|| merkle::root(&leaves));
        witness_digest(leaves.len() as u64, root.as_ref())
    }

    pub fn position(&self, prev: Option<&ProposalId>) -> Option<usize> {
        self.entries.iter().position(|e| e.prev.as_ref() == prev)
    }
}

/// Even-round proposals above the latest decided leader.
#[derive(Clone, Debug, Default)]
pub struct LeaderDag {
    vertices: BTreeMap<Round, BTreeMap<NodeId, ProposalId>>,
    anchor: Option<(Round, ProposalId)>,
}

impl LeaderDag {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, p: &Proposal) {
        if p.round % 2 == 0 && p.round >= FIRST_LEADER_ROUND && self.anchor.map_or(true, |(r, _)| p.round > r) {
            self.vertices.entry(p.round).or_default().insert(p.author, p.id());
        }
    }

    /// A leader was committed: it becomes the anchor, older vertices go.
    pub fn decide(&mut self, round: Round, leader: ProposalId) {
        if self.anchor.is_some_and(|(r, _)| r >= round) {
            return;
        }
        self.anchor = Some((round, leader));
        self.vertices = self.vertices.split_off(&(round + 1));
    }

    pub fn anchor(&self) -> Option<(Round, ProposalId)> {
        self.anchor
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.values().map(|v| v.len()).sum()
    }

    /// Candidate previous leaders for a round-`round` proposal with the given
    /// parents, ending with the anchor.
    pub fn candidates(&self, dag: &DagStore, parents: &[ProposalId], round: Round) -> Vec<Option<ProposalId>> {
        let mut out = Vec::new();
        for (_, authors) in self.vertices.range(..=round.saturating_sub(2)).rev() {
            for id in authors.values() {
                if parents.iter().any(|q| dag.reaches(q, id)) {
                    out.push(Some(*id));
                }
            }
        }
        out.push(self.anchor.map(|(_, id)| id));
        out
    }
}

/// Even-round proposals in the closure of `parents`, strictly above
/// `floor`, as (round desc, author asc), followed by `anchor`. Computed from
/// the DAG alone so verifiers need no leader-DAG state.
pub fn candidate_list(
    dag: &DagStore,
    parents: &[ProposalId],
    round: Round,
    anchor: Option<(Round, ProposalId)>,
) -> Vec<Option<ProposalId>> {
    let floor = anchor.map_or(FIRST_LEADER_ROUND - 2, |(r, _)| r);
    let mut out = Vec::new();
    let mut k = round.saturating_sub(2);
    while k > floor && k >= FIRST_LEADER_ROUND {
        for q in dag.round(k) {
            let id = q.id();
            if parents.iter().any(|par| dag.reaches(par, &id)) {
                out.push(Some(id));
            }
        }
        k -= 2;
    }
    out.push(anchor.map(|(_, id)| id));
    out
}

/// Previous leader of a round-`round` proposal under Tusk's walk: the
/// latest elected leader reachable from `parents` above the anchor, else
/// the anchor.
pub fn take_leader(
    dag: &DagStore,
    clerk: &Clerk,
    parents: &[ProposalId],
    round: Round,
    anchor: Option<(Round, ProposalId)>,
) -> Option<ProposalId> {
    let floor = anchor.map_or(FIRST_LEADER_ROUND - 2, |(r, _)| r);
    let mut k = round.saturating_sub(2);
    while k > floor && k >= FIRST_LEADER_ROUND {
        if let Some(l) = dag.proposal_of(clerk.coin().leader(k), k) {
            if parents.iter().any(|par| dag.reaches(par, &l)) {
                return Some(l);
            }
        }
        k -= 2;
    }
    anchor.map(|(_, id)| id)
}

/// Base and leader chain under which `prev` is the latest committed leader.
fn chain_to(dag: &DagStore, clerk: &Clerk, prev: Option<&ProposalId>) -> Result<(CommitBase, Vec<ProposalId>), BoardError> {
    let Some(l) = prev else { return Ok((CommitBase::AsOf(0), Vec::new())) };
    let round = dag.get(l).ok_or(BoardError::UnknownProposal(*l))?.round;
    if dag.committed_by(l) == Some(round) {
        return Ok((CommitBase::AsOf(round), Vec::new()));
    }
    let floor = clerk.committed_leader_below(round);
    let mut chain = leader_walk(dag, clerk.coin(), l, floor.unwrap_or(FIRST_LEADER_ROUND - 2));
    chain.reverse();
    chain.push(*l);
    Ok((CommitBase::AsOf(floor.unwrap_or(0)), chain))
}

/// (B, F) that committing `p` right after `prev` would produce, where `prev`
/// need not have been committed yet; `None` is the genesis leader.
pub fn simulate_after(
    dag: &DagStore,
    board: &Board,
    clerk: &Clerk,
    p: &Proposal,
    prev: Option<&ProposalId>,
) -> Result<(CommittedSet, CommittedSet), BoardError> {
    let (base, chain) = chain_to(dag, clerk, prev)?;
    let sim = board.simulate_chain(dag, base, &chain, Some(p))?.pop().expect("tail entry");
    Ok((commit_list(sim.batches.iter().map(|b| b.0)), commit_list(sim.failed.iter().map(|t| t.0))))
}

fn entry(dag: &DagStore, board: &Board, clerk: &Clerk, p: &Proposal, prev: Option<ProposalId>) -> Result<WitnessEntry, BoardError> {
    let (b, f) = simulate_after(dag, board, clerk, p, prev.as_ref())?;
    Ok(WitnessEntry { prev, wb: b.commitment(), wf: f.commitment() })
}

pub fn propose_blocking(dag: &DagStore, board: &Board, clerk: &Clerk, p: &Proposal) -> Result<Witness, BoardError> {
    let anchor = clerk.last_committed();
    let parents: Vec<ProposalId> = p.parents.iter().copied().collect();
    let prev = take_leader(dag, clerk, &parents, p.round, anchor);
    Ok(Witness {
        kind: WitnessKind::Blocking,
        anchor: anchor.map(|(_, id)| id),
        entries: vec![entry(dag, board, clerk, p, prev)?],
    })
}

/// One entry per candidate; falls back to blocking past `max_entries`.
pub fn propose_nonblocking(
    dag: &DagStore,
    board: &Board,
    clerk: &Clerk,
    p: &Proposal,
    max_entries: usize,
) -> Result<Witness, BoardError> {
    let anchor = clerk.last_committed();
    let parents: Vec<ProposalId> = p.parents.iter().copied().collect();
    let candidates = candidate_list(dag, &parents, p.round, anchor);
    if candidates.len() > max_entries {
        return propose_blocking(dag, board, clerk, p);
    }
    let entries = candidates
        .into_iter()
        .map(|c| entry(dag, board, clerk, p, c))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Witness { kind: WitnessKind::Vector, anchor: anchor.map(|(_, id)| id), entries })
}

/// Witness for `p` under `mode`, or `None` when hyper-blocks are off or the
/// round carries no witness.
pub fn propose(
    mode: Mode,
    dag: &DagStore,
    board: &Board,
    clerk: &Clerk,
    p: &Proposal,
    max_entries: usize,
) -> Result<Option<Witness>, BoardError> {
    if p.round % 2 == 1 || p.round < FIRST_LEADER_ROUND {
        return Ok(None);
    }
    match mode {
        Mode::Off => Ok(None),
        Mode::Blocking => propose_blocking(dag, board, clerk, p).map(Some),
        Mode::NonBlocking => propose_nonblocking(dag, board, clerk, p, max_entries).map(Some),
        Mode::Hybrid { threshold } => {
            if board.conflicted_set().len() > threshold {
                propose_blocking(dag, board, clerk, p).map(Some)
            } else {
                propose_nonblocking(dag, board, clerk, p, max_entries).map(Some)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum WitnessCheck {
    /// Matches; carries the digest to endorse.
    Attest(Digest),
    /// First mismatching entry index.
    Reject(usize),
    /// The claimed anchor is not (yet) known to be a committed leader.
    Defer,
}

/// Recomputes `p`'s witness against the local DAG.
pub fn verify_proposal_witness(dag: &DagStore, board: &Board, clerk: &Clerk, p: &Proposal) -> WitnessCheck {
    let Some(w) = &p.witness else { return WitnessCheck::Reject(0) };
    let anchor = match w.anchor {
        None => None,
        Some(a) => {
            let Some(q) = dag.get(&a) else { return WitnessCheck::Defer };
            let elected = q.round % 2 == 0 && q.round >= FIRST_LEADER_ROUND && clerk.coin().leader(q.round) == q.author;
            if !elected || q.round + 2 > p.round {
                return WitnessCheck::Reject(0);
            }
            let decided = dag.committed_by(&a) == Some(q.round) || dag.link_support(&a) >= dag.committee().validity();
            if !decided {
                return WitnessCheck::Defer;
            }
            Some((q.round, a))
        }
    };
    let parents: Vec<ProposalId> = p.parents.iter().copied().collect();
    let expected: Vec<Option<ProposalId>> = match w.kind {
        WitnessKind::Blocking => vec![take_leader(dag, clerk, &parents, p.round, anchor)],
        WitnessKind::Vector => candidate_list(dag, &parents, p.round, anchor),
    };
    for (i, prev) in expected.iter().enumerate() {
        let Some(got) = w.entries.get(i) else { return WitnessCheck::Reject(i) };
        if got.prev != *prev {
            return WitnessCheck::Reject(i);
        }
        match entry(dag, board, clerk, p, *prev) {
            Ok(e) if e == *got => {}
            _ => return WitnessCheck::Reject(i),
        }
    }
    if w.entries.len() != expected.len() {
        return WitnessCheck::Reject(expected.len());
    }
    WitnessCheck::Attest(w.digest())
}
