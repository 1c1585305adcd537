//! Hyper-block assembly, transaction result proofs and stateless client
//! verification.
//!
//! Byte layout (all integers big-endian, lists `u32`-length-prefixed):
//!
//! ```text
//! HyperBlock    = 0x50 leader[32] author:u32 round:u64 seed:u64 n:u32 coin[32]
//!                 supporters:list(proposal[32] author:u32 tag[32])
//!                 witness_root[32] prev:opt(id[32]) wb wf
//!                 entry_index:u64 entry_count:u64 entry_path
//!                 endorsements:list(node:u32 tag[32])
//! SetCommitment = root[32] size:u64
//! TxResultProof = 0x51 tx[32] batch[32] batch_index:u64 batch_path
//!                 tx_index:u64 batch_size:u64 tx_path
//!                 result:(0x00 nonmembership | 0x01 membership)
//! path          = list(sibling[32])
//! opt(x)        = 0x00 | 0x01 x
//! ```

use std::collections::HashSet;

use serde::Serialize;
use thiserror::Error;

use super::accumulator::{verify_absent, verify_member, CommittedSet, MembershipProof, NonMembershipProof, SetCommitment};
use super::{witness_digest, WitnessEntry};
use crate::clerk::{CoinSource, FIRST_LEADER_ROUND};
use crate::dag::{Committee, DagStore, NodeId, ProposalId, Round};
use crate::hash::{Decoder, DecodeError, Digest, Encoder};
use crate::merkle::{self, MerklePath};
use crate::utxo::{batch_id_from_path, Batch, BatchId, TxId};

const BLOCK_TAG: u8 = 0x50;
const PROOF_TAG: u8 = 0x51;
const ATTEST_DOMAIN: &[u8] = b"attest";
const SUPPORT_DOMAIN: &[u8] = b"support";

/// Simulated signature of `node` endorsing a leader's witness.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Attestation {
    pub node: NodeId,
    pub tag: Digest,
}

impl Attestation {
    pub fn tag_for(node: NodeId, seed: u64, n: u32, leader: &ProposalId, round: Round, author: NodeId, witness: &Digest) -> Digest {
        let mut e = Encoder::new();
        e.bytes(ATTEST_DOMAIN).u32(node).u64(seed).u32(n).digest(&leader.0).u64(round).u32(author).digest(witness);
        e.finish()
    }

    pub fn sign(node: NodeId, seed: u64, n: u32, leader: &ProposalId, round: Round, author: NodeId, witness: &Digest) -> Self {
        Self { node, tag: Self::tag_for(node, seed, n, leader, round, author, witness) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Support {
    pub proposal: ProposalId,
    pub author: NodeId,
    pub tag: Digest,
}

impl Support {
    pub fn tag_for(author: NodeId, proposal: &ProposalId, leader: &ProposalId) -> Digest {
        let mut e = Encoder::new();
        e.bytes(SUPPORT_DOMAIN).u32(author).digest(&proposal.0).digest(&leader.0);
        e.finish()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Leadership {
    pub leader: ProposalId,
    pub author: NodeId,
    pub round: Round,
    pub seed: u64,
    pub n: u32,
    pub coin: Digest,
    pub supporters: Vec<Support>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HyperBlock {
    pub leadership: Leadership,
    pub witness_root: Digest,
    /// The realized entry of the leader's witness and its position proof.
    pub entry: WitnessEntry,
    pub entry_index: u64,
    pub entry_count: u64,
    pub entry_path: MerklePath,
    pub endorsements: Vec<Attestation>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ResultProof {
    Success(NonMembershipProof),
    Failed(MembershipProof),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TxResultProof {
    pub tx: TxId,
    pub batch: BatchId,
    pub batch_proof: MembershipProof,
    pub tx_index: u64,
    pub batch_size: u64,
    pub tx_path: MerklePath,
    pub result: ResultProof,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Success,
    Failed,
    Invalid,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AssembleError {
    #[error("leader {0} unknown")]
    UnknownLeader(ProposalId),
    #[error("leader {0} carries no witness")]
    NoWitness(ProposalId),
    #[error("witness has no entry for the realized previous leader")]
    NoEntry,
    #[error("{got} supporters, need {need}")]
    InsufficientSupport { got: usize, need: usize },
    #[error("{got} endorsements, need {need}")]
    Unavailable { got: usize, need: usize },
}

/// Builds the hyper-block of a committed `leader` whose realized previous
/// leader is `prev`. Uses the lowest-author f+1 supporters and the
/// lowest-node 2f+1 valid attestations so every node assembles the same bytes.
pub fn assemble_hyperblock(
    dag: &DagStore,
    coin: &CoinSource,
    leader: &ProposalId,
    prev: Option<&ProposalId>,
    attestations: &[Attestation],
) -> Result<HyperBlock, AssembleError> {
    let committee = dag.committee();
    let p = dag.get(leader).ok_or(AssembleError::UnknownLeader(*leader))?;
    let w = p.witness.as_ref().ok_or(AssembleError::NoWitness(*leader))?;
    let index = w.position(prev).ok_or(AssembleError::NoEntry)?;
    let leaves: Vec<Digest> = w.entries.iter().map(WitnessEntry::leaf).collect();
    let root = w.digest();

    let mut supporters: Vec<Support> = dag
        .supporters(leader)
        .iter()
        .map(|id| {
            let author = dag.get(id).expect("stored").author;
            Support { proposal: *id, author, tag: Support::tag_for(author, id, leader) }
        })
        .collect();
    supporters.sort_by_key(|s| s.author);
    let need = committee.validity();
    if supporters.len() < need {
        return Err(AssembleError::InsufficientSupport { got: supporters.len(), need });
    }
    supporters.truncate(need);

    let mut endorsements: Vec<Attestation> = attestations
        .iter()
        .filter(|a| a.tag == Attestation::tag_for(a.node, coin.seed, coin.n, leader, p.round, p.author, &root))
        .copied()
        .collect();
    endorsements.sort_by_key(|a| a.node);
    endorsements.dedup_by_key(|a| a.node);
    let need = committee.quorum();
    if endorsements.len() < need {
        return Err(AssembleError::Unavailable { got: endorsements.len(), need });
    }
    endorsements.truncate(need);

    Ok(HyperBlock {
        leadership: Leadership {
            leader: *leader,
            author: p.author,
            round: p.round,
            seed: coin.seed,
            n: coin.n,
            coin: coin.value(p.round),
            supporters,
        },
        witness_root: root,
        entry: w.entries[index],
        entry_index: index as u64,
        entry_count: leaves.len() as u64,
        entry_path: merkle::prove(&leaves, index),
        endorsements,
    })
}

/// Proof of `tx`'s result, built from the committed batch and failed sets.
pub fn prove_tx_result(batch: &Batch, tx: &TxId, batches: &CommittedSet, failed: &CommittedSet) -> Option<TxResultProof> {
    let tx_index = batch.position(tx)?;
    let batch_proof = batches.prove_member(&batch.id().0)?;
    let result = match failed.prove_member(&tx.0) {
        Some(m) => ResultProof::Failed(m),
        None => ResultProof::Success(failed.prove_absent(&tx.0)?),
    };
    Some(TxResultProof {
        tx: *tx,
        batch: batch.id(),
        batch_proof,
        tx_index: tx_index as u64,
        batch_size: batch.txs().len() as u64,
        tx_path: batch.inclusion_path(tx_index),
        result,
    })
}

impl HyperBlock {
    /// Leadership, endorsement and entry-position checks.
    pub fn is_well_formed(&self) -> bool {
        let l = &self.leadership;
        if l.n == 0 || l.round < FIRST_LEADER_ROUND || l.round % 2 == 1 {
            return false;
        }
        if l.coin != CoinSource::toss(l.seed, l.round) || CoinSource::new(l.seed, l.n).leader(l.round) != l.author {
            return false;
        }
        let committee = Committee::new(l.n);
        let mut authors = HashSet::new();
        for s in &l.supporters {
            if s.author >= l.n || !authors.insert(s.author) || s.tag != Support::tag_for(s.author, &s.proposal, &l.leader) {
                return false;
            }
        }
        if authors.len() < committee.validity() {
            return false;
        }
        let mut nodes = HashSet::new();
        for a in &self.endorsements {
            let expected = Attestation::tag_for(a.node, l.seed, l.n, &l.leader, l.round, l.author, &self.witness_root);
            if a.node >= l.n || !nodes.insert(a.node) || a.tag != expected {
                return false;
            }
        }
        if nodes.len() < committee.quorum() {
            return false;
        }
        merkle::root_from_path(&self.entry.leaf(), self.entry_index, self.entry_count, &self.entry_path)
            .is_some_and(|r| witness_digest(self.entry_count, Some(&r)) == self.witness_root)
    }
}

/// Stateless client check of `tx`'s result against `hb`.
pub fn verify_tx_result(proof: &TxResultProof, hb: &HyperBlock, tx: &TxId) -> Verdict {
    if proof.tx != *tx || !hb.is_well_formed() {
        return Verdict::Invalid;
    }
    if batch_id_from_path(tx, proof.tx_index, proof.batch_size, &proof.tx_path) != Some(proof.batch) {
        return Verdict::Invalid;
    }
    if !verify_member(&hb.entry.wb, &proof.batch.0, &proof.batch_proof) {
        return Verdict::Invalid;
    }
    match &proof.result {
        ResultProof::Failed(m) if verify_member(&hb.entry.wf, &tx.0, m) => Verdict::Failed,
        ResultProof::Success(nm) if verify_absent(&hb.entry.wf, &tx.0, nm) => Verdict::Success,
        _ => Verdict::Invalid,
    }
}

fn put_opt_id(e: &mut Encoder, id: &Option<ProposalId>) {
    match id {
        None => e.u8(0),
        Some(p) => e.u8(1).digest(&p.0),
    };
}

fn get_opt_id(d: &mut Decoder<'_>) -> Result<Option<ProposalId>, DecodeError> {
    match d.u8()? {
        0 => Ok(None),
        1 => Ok(Some(ProposalId(d.digest()?))),
        t => Err(DecodeError::InvalidTag(t)),
    }
}

fn expect_tag(d: &mut Decoder<'_>, tag: u8) -> Result<(), DecodeError> {
    match d.u8()? {
        t if t == tag => Ok(()),
        t => Err(DecodeError::InvalidTag(t)),
    }
}

impl HyperBlock {
    pub fn to_bytes(&self) -> Vec<u8> {
        let l = &self.leadership;
        let mut e = Encoder::tagged(BLOCK_TAG);
        e.digest(&l.leader.0).u32(l.author).u64(l.round).u64(l.seed).u32(l.n).digest(&l.coin);
        e.len_prefix(l.supporters.len());
        for s in &l.supporters {
            e.digest(&s.proposal.0).u32(s.author).digest(&s.tag);
        }
        e.digest(&self.witness_root);
        put_opt_id(&mut e, &self.entry.prev);
        self.entry.wb.encode(&mut e);
        self.entry.wf.encode(&mut e);
        e.u64(self.entry_index).u64(self.entry_count);
        self.entry_path.encode(&mut e);
        e.len_prefix(self.endorsements.len());
        for a in &self.endorsements {
            e.u32(a.node).digest(&a.tag);
        }
        e.into_bytes()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut d = Decoder::new(bytes);
        expect_tag(&mut d, BLOCK_TAG)?;
        let leader = ProposalId(d.digest()?);
        let author = d.u32()?;
        let round = d.u64()?;
        let seed = d.u64()?;
        let n = d.u32()?;
        let coin = d.digest()?;
        let count = d.len_prefix(68)?;
        let mut supporters = Vec::with_capacity(count);
        for _ in 0..count {
            supporters.push(Support { proposal: ProposalId(d.digest()?), author: d.u32()?, tag: d.digest()? });
        }
        let witness_root = d.digest()?;
        let prev = get_opt_id(&mut d)?;
        let wb = SetCommitment::decode(&mut d)?;
        let wf = SetCommitment::decode(&mut d)?;
        let entry_index = d.u64()?;
        let entry_count = d.u64()?;
        let entry_path = MerklePath::decode(&mut d)?;
        let count = d.len_prefix(36)?;
        let mut endorsements = Vec::with_capacity(count);
        for _ in 0..count {
            endorsements.push(Attestation { node: d.u32()?, tag: d.digest()? });
        }
        d.finish()?;
        Ok(Self {
            leadership: Leadership { leader, author, round, seed, n, coin, supporters },
            witness_root,
            entry: WitnessEntry { prev, wb, wf },
            entry_index,
            entry_count,
            entry_path,
            endorsements,
        })
    }
}

impl TxResultProof {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut e = Encoder::tagged(PROOF_TAG);
        e.digest(&self.tx.0).digest(&self.batch.0);
        self.batch_proof.encode(&mut e);
        e.u64(self.tx_index).u64(self.batch_size);
        self.tx_path.encode(&mut e);
        match &self.result {
            ResultProof::Success(nm) => {
                e.u8(0);
                nm.encode(&mut e);
            }
            ResultProof::Failed(m) => {
                e.u8(1);
                m.encode(&mut e);
            }
        }
        e.into_bytes()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut d = Decoder::new(bytes);
        expect_tag(&mut d, PROOF_TAG)?;
        let tx = TxId(d.digest()?);
        let batch = BatchId(d.digest()?);
        let batch_proof = MembershipProof::decode(&mut d)?;
        let tx_index = d.u64()?;
        let batch_size = d.u64()?;
        let tx_path = MerklePath::decode(&mut d)?;
        let result = match d.u8()? {
            0 => ResultProof::Success(NonMembershipProof::decode(&mut d)?),
            1 => ResultProof::Failed(MembershipProof::decode(&mut d)?),
            t => return Err(DecodeError::InvalidTag(t)),
        };
        d.finish()?;
        Ok(Self { tx, batch, batch_proof, tx_index, batch_size, tx_path, result })
    }
}
