//! Clerk: shared-coin leader election every two rounds and the recursive
//! commit of the leader chain.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::dag::{Committee, DagStore, Frontier, NodeId, Proposal, ProposalId, Round};
use crate::hash::{Digest, Encoder};

/// First even round that elects a leader.
pub const FIRST_LEADER_ROUND: Round = 4;

/// Seeded stand-in for a common coin: `leader(r) = H(seed || r) mod n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct CoinSource {
    pub seed: u64,
    pub n: u32,
}

impl CoinSource {
    pub fn new(seed: u64, n: u32) -> Self {
        Self { seed, n }
    }

    pub fn toss(seed: u64, round: Round) -> Digest {
        let mut e = Encoder::new();
        e.u64(seed).u64(round);
        e.finish()
    }

    pub fn value(&self, round: Round) -> Digest {
        Self::toss(self.seed, round)
    }

    pub fn leader(&self, round: Round) -> NodeId {
        (self.value(round).prefix_u64() % self.n as u64) as NodeId
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ClerkError {
    #[error("leaders are elected on even rounds only, got {0}")]
    OddRound(Round),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum LeaderStatus {
    Pending,
    Committed,
    Skipped,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct LeaderRecord {
    pub round: Round,
    pub author: NodeId,
    pub status: LeaderStatus,
}

/// One committed leader with the sub-DAG it newly commits.
#[derive(Clone, Debug)]
pub struct LeaderCommit {
    pub leader: ProposalId,
    pub round: Round,
    pub proposals: Vec<Arc<Proposal>>,
    pub frontier: Frontier,
}

/// Elected leaders reachable from `from`, walking down through even rounds
/// strictly above `floor`. Each step must be reachable from the previous
/// one. Returned in descending round order, `from` excluded.
pub fn leader_walk(dag: &DagStore, coin: &CoinSource, from: &ProposalId, floor: Round) -> Vec<ProposalId> {
    let Some(top) = dag.get(from).map(|p| p.round) else { return Vec::new() };
    let mut out = Vec::new();
    let mut head = *from;
    let mut k = if top % 2 == 0 { top } else { top + 1 };
    while k >= FIRST_LEADER_ROUND + 2 && k - 2 > floor {
        k -= 2;
        if let Some(l) = dag.proposal_of(coin.leader(k), k) {
            if dag.reaches(&head, &l) {
                out.push(l);
                head = l;
            }
        }
    }
    out
}

/// When the coin for leader round L becomes known to a node.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub enum CoinReveal {
    /// As soon as a round L+1 proposal arrives.
    #[default]
    Immediate,
    /// On round L+3 proposals, whose parents carry the round L+2 quorum
    /// a threshold coin would be reconstructed from.
    Wave,
}

impl CoinReveal {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "immediate" => Some(CoinReveal::Immediate),
            "wave" => Some(CoinReveal::Wave),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CoinReveal::Immediate => "immediate",
            CoinReveal::Wave => "wave",
        }
    }
}

pub struct Clerk {
    coin: CoinSource,
    reveal: CoinReveal,
    committee: Committee,
    records: BTreeMap<Round, LeaderRecord>,
    decided: Vec<LeaderRecord>,
    last_committed: Option<(Round, ProposalId)>,
}

impl Clerk {
    pub fn new(committee: Committee, seed: u64) -> Self {
        Self {
            coin: CoinSource::new(seed, committee.n),
            reveal: CoinReveal::Immediate,
            committee,
            records: BTreeMap::new(),
            decided: Vec::new(),
            last_committed: None,
        }
    }

    pub fn with_reveal(mut self, reveal: CoinReveal) -> Self {
        self.reveal = reveal;
        self
    }

    pub fn coin(&self) -> &CoinSource {
        &self.coin
    }

    pub fn last_committed(&self) -> Option<(Round, ProposalId)> {
        self.last_committed
    }

    fn floor(&self) -> Round {
        self.last_committed.map_or(FIRST_LEADER_ROUND - 2, |(r, _)| r)
    }

    /// Latest committed leader round strictly below `round`.
    pub fn committed_leader_below(&self, round: Round) -> Option<Round> {
        self.decided
            .iter()
            .rev()
            .find(|r| r.round < round && r.status == LeaderStatus::Committed)
            .map(|r| r.round)
    }

    pub fn elect_leader(&mut self, round: Round) -> Result<NodeId, ClerkError> {
        if round % 2 == 1 {
            return Err(ClerkError::OddRound(round));
        }
        let author = self.coin.leader(round);
        self.records
            .entry(round)
            .or_insert(LeaderRecord { round, author, status: LeaderStatus::Pending });
        Ok(author)
    }

    pub fn record(&self, round: Round) -> Option<LeaderRecord> {
        self.records.get(&round).copied()
    }

    /// Leader decisions (Committed or Skipped) in round order.
    pub fn committed_sequence(&self) -> &[LeaderRecord] {
        &self.decided
    }

    /// Called after `p` has been inserted into `dag`. A proposal of odd
    /// round r ≥ 5 (re)examines the leader of r−1; once it has f+1 links the
    /// leader and every earlier reachable leader are committed in order.
    /// Under [`CoinReveal::Wave`] the leader examined is that of r−3.
    pub fn on_proposal_added(&mut self, p: &Proposal, dag: &mut DagStore) -> Vec<LeaderCommit> {
        if self.reveal == CoinReveal::Wave {
            return self.on_wave_proposal(p, dag);
        }
        if p.round % 2 == 0 || p.round < FIRST_LEADER_ROUND + 1 {
            return Vec::new();
        }
        let lr = p.round - 1;
        if lr <= self.floor() {
            return Vec::new();
        }
        let author = self.elect_leader(lr).expect("even round");
        if !p.parents.iter().any(|id| dag.get(id).is_some_and(|q| q.author == author)) {
            return Vec::new();
        }
        let Some(leader) = dag.proposal_of(author, lr) else { return Vec::new() };
        if dag.link_support(&leader) < self.committee.validity() {
            return Vec::new();
        }
        self.commit_chain(leader, dag)
    }

    fn on_wave_proposal(&mut self, p: &Proposal, dag: &mut DagStore) -> Vec<LeaderCommit> {
        if p.round % 2 == 0 || p.round < FIRST_LEADER_ROUND + 3 {
            return Vec::new();
        }
        let lr = p.round - 3;
        if lr <= self.floor() {
            return Vec::new();
        }
        let author = self.elect_leader(lr).expect("even round");
        let Some(leader) = dag.proposal_of(author, lr) else { return Vec::new() };
        if dag.link_support(&leader) < self.committee.validity() {
            return Vec::new();
        }
        self.commit_chain(leader, dag)
    }

    fn commit_chain(&mut self, leader: ProposalId, dag: &mut DagStore) -> Vec<LeaderCommit> {
        let floor = self.floor();
        let lr = dag.get(&leader).expect("leader stored").round;
        let mut chain = leader_walk(dag, &self.coin, &leader, floor);
        chain.reverse();
        chain.push(leader);

        let mut k = floor + 2;
        while k < lr {
            self.elect_leader(k).expect("even round");
            k += 2;
        }
        let mut out = Vec::with_capacity(chain.len());
        for l in chain {
            let proposals = dag.uncommitted_sub_dag(&l).expect("leader stored");
            let frontier = dag.frontier(&l).expect("leader stored");
            let round = dag.get(&l).expect("leader stored").round;
            let ids: Vec<ProposalId> = proposals.iter().map(|q| q.id()).collect();
            dag.mark_committed(&ids, round);
            if let Some(rec) = self.records.get_mut(&round) {
                rec.status = LeaderStatus::Committed;
            }
            out.push(LeaderCommit { leader: l, round, proposals, frontier });
        }
        let mut k = floor + 2;
        while k <= lr {
            let rec = self.records.get_mut(&k).expect("elected above");
            if rec.status == LeaderStatus::Pending {
                rec.status = LeaderStatus::Skipped;
            }
            self.decided.push(*rec);
            k += 2;
        }
        self.last_committed = Some((lr, leader));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn odd_round_is_an_error() {
        let mut c = Clerk::new(Committee::new(4), 1);
        assert_eq!(c.elect_leader(5), Err(ClerkError::OddRound(5)));
        let a = c.elect_leader(4).unwrap();
        assert!(a < 4);
        assert_eq!(a, CoinSource::new(1, 4).leader(4));
    }

    #[test]
    fn coin_is_uniform_over_nodes() {
        let coin = CoinSource::new(99, 4);
        let mut counts = [0u32; 4];
        for k in 0..10_000u64 {
            counts[coin.leader(2 * k) as usize] += 1;
        }
        for c in counts {
            let freq = c as f64 / 10_000.0;
            assert!((freq - 0.25).abs() <= 0.02, "{counts:?}");
        }
    }

    /// Full DAG where every proposal links every previous-round proposal.
    fn full_dag(n: u32, rounds: Round, skip: &[(NodeId, Round)]) -> DagStore {
        let mut dag = DagStore::new(Committee::new(n));
        for r in 0..=rounds {
            let prev: BTreeSet<ProposalId> = if r == 0 { BTreeSet::new() } else { dag.round(r - 1).map(|p| p.id()).collect() };
            for a in 0..n {
                if skip.contains(&(a, r)) {
                    continue;
                }
                dag.add_proposal(Proposal::new(a, r, vec![], prev.clone()));
            }
        }
        dag
    }

    #[test]
    fn fully_connected_dag_commits_every_leader_at_trigger() {
        let n = 4;
        let full = full_dag(n, 13, &[]);
        let mut dag = DagStore::new(Committee::new(n));
        let mut clerk = Clerk::new(Committee::new(n), 5);
        let mut committed = Vec::new();
        for r in 0..=13 {
            for p in full.round(r) {
                let p = (**p).clone();
                dag.add_proposal(p.clone());
                for c in clerk.on_proposal_added(&p, &mut dag) {
                    committed.push(c.round);
                }
            }
        }
        assert_eq!(committed, vec![4, 6, 8, 10, 12]);
        assert!(clerk.committed_sequence().iter().all(|r| r.status == LeaderStatus::Committed));
        assert!(clerk.committed_sequence().windows(2).all(|w| w[0].round + 2 == w[1].round));
    }

    #[test]
    fn absent_leader_is_skipped_once_a_later_leader_commits() {
        let n = 4;
        let coin = CoinSource::new(5, n);
        let missing = coin.leader(6);
        let full = full_dag(n, 9, &[(missing, 6)]);
        let mut dag = DagStore::new(Committee::new(n));
        let mut clerk = Clerk::new(Committee::new(n), 5);
        for r in 0..=9 {
            for p in full.round(r) {
                let p = (**p).clone();
                dag.add_proposal(p.clone());
                clerk.on_proposal_added(&p, &mut dag);
            }
        }
        let seq: Vec<(Round, LeaderStatus)> = clerk.committed_sequence().iter().map(|r| (r.round, r.status)).collect();
        assert_eq!(
            seq,
            vec![(4, LeaderStatus::Committed), (6, LeaderStatus::Skipped), (8, LeaderStatus::Committed)]
        );
    }
}
