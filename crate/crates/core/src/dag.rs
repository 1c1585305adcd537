//! Round-based DAG of proposals held by one node.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt::Write as _;
use std::sync::Arc;

use thiserror::Error;

use crate::digest_newtype;
use crate::hash::Encoder;
use crate::hyperblock::Witness;
use crate::utxo::{Batch, BatchId};

pub type NodeId = u32;
pub type Round = u64;

digest_newtype!(ProposalId);

const PROPOSAL_TAG: u8 = 0x30;

/// Committee parameters shared by every per-node component.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Committee {
    pub n: u32,
    pub f: u32,
}

impl Committee {
    /// Committee of `n` nodes tolerating `f = (n - 1) / 3` faults.
    pub fn new(n: u32) -> Self {
        assert!(n >= 1, "empty committee");
        Self { n, f: (n - 1) / 3 }
    }

    pub fn with_f(n: u32, f: u32) -> Self {
        assert!(n > 3 * f, "n must be at least 3f+1");
        Self { n, f }
    }

    /// Parents required by every proposal after round 0.
    pub fn quorum(&self) -> usize {
        (2 * self.f + 1) as usize
    }

    /// Round-r+1 links needed to commit a round-r leader.
    pub fn validity(&self) -> usize {
        (self.f + 1) as usize
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Proposal {
    id: ProposalId,
    pub author: NodeId,
    pub round: Round,
    pub batches: Vec<BatchId>,
    pub parents: BTreeSet<ProposalId>,
    /// Hyper-block commitments; not part of the id.
    pub witness: Option<Witness>,
}

impl Proposal {
    pub fn new(author: NodeId, round: Round, batches: Vec<BatchId>, parents: BTreeSet<ProposalId>) -> Self {
        let id = Self::compute_id(author, round, &batches, &parents);
        Self { id, author, round, batches, parents, witness: None }
    }

    pub fn compute_id(author: NodeId, round: Round, batches: &[BatchId], parents: &BTreeSet<ProposalId>) -> ProposalId {
        let mut e = Encoder::tagged(PROPOSAL_TAG);
        e.u32(author).u64(round).len_prefix(batches.len());
        for b in batches {
            e.digest(&b.0);
        }
        e.len_prefix(parents.len());
        for p in parents {
            e.digest(&p.0);
        }
        ProposalId(e.finish())
    }

    pub fn id(&self) -> ProposalId {
        self.id
    }

    pub fn with_witness(mut self, witness: Witness) -> Self {
        self.witness = Some(witness);
        self
    }
}

/// Map node -> highest round of that node's proposal inside a sub-DAG.
pub type Frontier = BTreeMap<NodeId, Round>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum InsertOutcome {
    /// Stored. `new == false` for an already-present id.
    Accepted { new: bool },
    /// Some parents are unknown; resubmit once they arrive.
    Deferred { missing: Vec<ProposalId> },
    Rejected(RejectReason),
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum RejectReason {
    #[error("author {0} outside committee")]
    UnknownAuthor(NodeId),
    #[error("round-0 proposal with parents")]
    GenesisWithParents,
    #[error("{got} parents, quorum is {need}")]
    TooFewParents { got: usize, need: usize },
    #[error("parent from round {0}, expected round - 1")]
    WrongParentRound(Round),
    #[error("does not link the author's previous proposal")]
    MissingOwnParent,
    #[error("author already proposed {0:?} in this round")]
    Equivocation(ProposalId),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DagError {
    #[error("unknown proposal {0}")]
    UnknownProposal(ProposalId),
}

struct Stored {
    proposal: Arc<Proposal>,
    frontier: Vec<Option<Round>>,
}

pub struct DagStore {
    committee: Committee,
    by_id: HashMap<ProposalId, Stored>,
    by_round: BTreeMap<Round, BTreeMap<NodeId, ProposalId>>,
    children: HashMap<ProposalId, Vec<ProposalId>>,
    committed: HashMap<ProposalId, Round>,
    batches: HashMap<BatchId, Arc<Batch>>,
}

impl DagStore {
    pub fn new(committee: Committee) -> Self {
        Self {
            committee,
            by_id: HashMap::new(),
            by_round: BTreeMap::new(),
            children: HashMap::new(),
            committed: HashMap::new(),
            batches: HashMap::new(),
        }
    }

    pub fn committee(&self) -> Committee {
        self.committee
    }

    pub fn insert_batch(&mut self, batch: Arc<Batch>) {
        self.batches.entry(batch.id()).or_insert(batch);
    }

    pub fn batch(&self, id: &BatchId) -> Option<&Arc<Batch>> {
        self.batches.get(id)
    }

    pub fn add_proposal(&mut self, p: Proposal) -> InsertOutcome {
        if self.by_id.contains_key(&p.id) {
            return InsertOutcome::Accepted { new: false };
        }
        if p.author >= self.committee.n {
            return InsertOutcome::Rejected(RejectReason::UnknownAuthor(p.author));
        }
        if let Some(existing) = self.by_round.get(&p.round).and_then(|m| m.get(&p.author)) {
            return InsertOutcome::Rejected(RejectReason::Equivocation(*existing));
        }
        if p.round == 0 {
            if !p.parents.is_empty() {
                return InsertOutcome::Rejected(RejectReason::GenesisWithParents);
            }
        } else {
            let need = self.committee.quorum();
            if p.parents.len() < need {
                return InsertOutcome::Rejected(RejectReason::TooFewParents { got: p.parents.len(), need });
            }
            let missing: Vec<ProposalId> = p.parents.iter().filter(|q| !self.by_id.contains_key(q)).copied().collect();
            if !missing.is_empty() {
                return InsertOutcome::Deferred { missing };
            }
            for q in &p.parents {
                let r = self.by_id[q].proposal.round;
                if r + 1 != p.round {
                    return InsertOutcome::Rejected(RejectReason::WrongParentRound(r));
                }
            }
            if let Some(own_prev) = self.by_round.get(&(p.round - 1)).and_then(|m| m.get(&p.author)) {
                if !p.parents.contains(own_prev) {
                    return InsertOutcome::Rejected(RejectReason::MissingOwnParent);
                }
            }
        }

        let n = self.committee.n as usize;
        let mut frontier = vec![None; n];
        for q in &p.parents {
            for (slot, r) in frontier.iter_mut().zip(&self.by_id[q].frontier) {
                *slot = (*slot).max(*r);
            }
            self.children.entry(*q).or_default().push(p.id);
        }
        frontier[p.author as usize] = Some(p.round);
        self.by_round.entry(p.round).or_default().insert(p.author, p.id);
        self.by_id.insert(p.id, Stored { proposal: Arc::new(p), frontier });
        InsertOutcome::Accepted { new: true }
    }

    pub fn contains(&self, id: &ProposalId) -> bool {
        self.by_id.contains_key(id)
    }

    pub fn get(&self, id: &ProposalId) -> Option<&Arc<Proposal>> {
        self.by_id.get(id).map(|s| &s.proposal)
    }

    pub fn len(&self) -> usize {
        self.by_id.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_id.is_empty()
    }

    /// Proposals of `round`, ordered by author.
    pub fn round(&self, round: Round) -> impl Iterator<Item = &Arc<Proposal>> + '_ {
        self.by_round
            .get(&round)
            .into_iter()
            .flat_map(|m| m.values())
            .map(move |id| &self.by_id[id].proposal)
    }

    pub fn round_size(&self, round: Round) -> usize {
        self.by_round.get(&round).map_or(0, |m| m.len())
    }

    pub fn proposal_of(&self, author: NodeId, round: Round) -> Option<ProposalId> {
        self.by_round.get(&round).and_then(|m| m.get(&author)).copied()
    }

    pub fn highest_round(&self) -> Option<Round> {
        self.by_round.keys().next_back().copied()
    }

    pub fn committed_ids(&self) -> HashSet<ProposalId> {
        self.committed.keys().copied().collect()
    }

    pub fn is_committed(&self, id: &ProposalId) -> bool {
        self.committed.contains_key(id)
    }

    /// Round of the leader whose sub-DAG committed `id`.
    pub fn committed_by(&self, id: &ProposalId) -> Option<Round> {
        self.committed.get(id).copied()
    }

    pub fn mark_committed<'a>(&mut self, ids: impl IntoIterator<Item = &'a ProposalId>, leader_round: Round) {
        for id in ids {
            self.committed.entry(*id).or_insert(leader_round);
        }
    }

    fn require(&self, id: &ProposalId) -> Result<&Stored, DagError> {
        self.by_id.get(id).ok_or(DagError::UnknownProposal(*id))
    }

    /// Every proposal reachable from `root` and not in `exclude`, ordered by
    /// (round, author).
    pub fn sub_dag(&self, root: &ProposalId, exclude: &HashSet<ProposalId>) -> Result<Vec<Arc<Proposal>>, DagError> {
        self.require(root)?;
        let mut seen = HashSet::new();
        let mut queue = VecDeque::from([*root]);
        let mut out = Vec::new();
        while let Some(id) = queue.pop_front() {
            if !seen.insert(id) {
                continue;
            }
            let p = &self.by_id[&id].proposal;
            if !exclude.contains(&id) {
                out.push(p.clone());
            }
            queue.extend(p.parents.iter().copied());
        }
        sort_canonical(&mut out);
        Ok(out)
    }

    /// Like [`sub_dag`](Self::sub_dag) with an ancestor-closed exclusion set:
    /// traversal stops at excluded proposals.
    pub fn sub_dag_above(&self, root: &ProposalId, closed: &dyn Fn(&ProposalId) -> bool) -> Result<Vec<Arc<Proposal>>, DagError> {
        self.require(root)?;
        let mut seen = HashSet::new();
        let mut stack = vec![*root];
        let mut out = Vec::new();
        while let Some(id) = stack.pop() {
            if closed(&id) || !seen.insert(id) {
                continue;
            }
            let p = &self.by_id[&id].proposal;
            out.push(p.clone());
            stack.extend(p.parents.iter().copied());
        }
        sort_canonical(&mut out);
        Ok(out)
    }

    /// Uncommitted part of `root`'s sub-DAG.
    pub fn uncommitted_sub_dag(&self, root: &ProposalId) -> Result<Vec<Arc<Proposal>>, DagError> {
        self.sub_dag_above(root, &|id| self.committed.contains_key(id))
    }

    pub fn frontier(&self, root: &ProposalId) -> Result<Frontier, DagError> {
        let s = self.require(root)?;
        Ok(s.frontier
            .iter()
            .enumerate()
            .filter_map(|(a, r)| r.map(|r| (a as NodeId, r)))
            .collect())
    }

    /// Number of stored round r+1 proposals linking `leader`.
    pub fn link_support(&self, leader: &ProposalId) -> usize {
        self.children.get(leader).map_or(0, |c| c.len())
    }

    /// Round r+1 proposals linking `leader`.
    pub fn supporters(&self, leader: &ProposalId) -> &[ProposalId] {
        self.children.get(leader).map_or(&[], |c| c.as_slice())
    }

    /// Whether `target` is `from` or one of its ancestors.
    pub fn reaches(&self, from: &ProposalId, target: &ProposalId) -> bool {
        let (Some(f), Some(t)) = (self.by_id.get(from), self.by_id.get(target)) else {
            return false;
        };
        let floor = t.proposal.round;
        if f.proposal.round < floor {
            return false;
        }
        // The frontier bounds the search: the target's author must appear at or above its round.
        if f.frontier[t.proposal.author as usize].map_or(true, |r| r < floor) {
            return false;
        }
        let mut seen = HashSet::new();
        let mut stack = vec![*from];
        while let Some(id) = stack.pop() {
            if id == *target {
                return true;
            }
            if !seen.insert(id) {
                continue;
            }
            let p = &self.by_id[&id].proposal;
            if p.round > floor {
                stack.extend(p.parents.iter().copied());
            }
        }
        false
    }

    /// Debug edge list: one `round author -> parent-round parent-author` line per link.
    pub fn export_edges(&self) -> String {
        let mut out = String::new();
        for (round, authors) in &self.by_round {
            for (author, id) in authors {
                let p = &self.by_id[id].proposal;
                if p.parents.is_empty() {
                    let _ = writeln!(out, "{round} {author}");
                    continue;
                }
                let mut parents: Vec<_> = p.parents.iter().map(|q| &self.by_id[q].proposal).collect();
                parents.sort_by_key(|q| (q.round, q.author));
                for q in parents {
                    let _ = writeln!(out, "{round} {author} -> {} {}", q.round, q.author);
                }
            }
        }
        out
    }
}

fn sort_canonical(v: &mut [Arc<Proposal>]) {
    v.sort_by_key(|p| (p.round, p.author));
}
