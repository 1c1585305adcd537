//! Set commitments: a Merkle tree over sorted, de-duplicated digests.
//!
//! Membership is a leaf path; non-membership is the pair of adjacent leaves
//! bracketing the absent value (one leaf at either end of the set).

use serde::Serialize;

use crate::hash::{Decoder, DecodeError, Digest, Encoder};
use crate::merkle::{self, MerklePath};

const SET_TAG: u8 = 0x40;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct SetCommitment {
    pub root: Digest,
    pub size: u64,
}

impl SetCommitment {
    /// Root of the empty set: the digest of the empty string.
    pub fn empty() -> Self {
        Self { root: Digest::of(b""), size: 0 }
    }

    fn from_merkle(size: u64, merkle_root: &Digest) -> Self {
        let mut e = Encoder::tagged(SET_TAG);
        e.u64(size).digest(merkle_root);
        Self { root: e.finish(), size }
    }

    pub fn encode(&self, e: &mut Encoder) {
        e.digest(&self.root).u64(self.size);
    }

    pub fn decode(d: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        Ok(Self { root: d.digest()?, size: d.u64()? })
    }

    fn accepts(&self, item: &Digest, index: u64, path: &MerklePath) -> bool {
        match merkle::root_from_path(item, index, self.size, path) {
            Some(r) => Self::from_merkle(self.size, &r) == *self,
            None => false,
        }
    }
}

/// The committed set itself, kept by the prover.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CommittedSet {
    items: Vec<Digest>,
    commitment: SetCommitment,
}

/// Commits to `items` regardless of order and multiplicity.
pub fn commit_list(items: impl IntoIterator<Item = Digest>) -> CommittedSet {
    let mut items: Vec<Digest> = items.into_iter().collect();
    items.sort();
    items.dedup();
    let commitment = if items.is_empty() {
        SetCommitment::empty()
    } else {
        SetCommitment::from_merkle(items.len() as u64, &merkle::root(&items))
    };
    CommittedSet { items, commitment }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MembershipProof {
    pub index: u64,
    pub path: MerklePath,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Neighbor {
    pub item: Digest,
    pub index: u64,
    pub path: MerklePath,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NonMembershipProof {
    pub left: Option<Neighbor>,
    pub right: Option<Neighbor>,
}

impl CommittedSet {
    pub fn commitment(&self) -> SetCommitment {
        self.commitment
    }

    pub fn items(&self) -> &[Digest] {
        &self.items
    }

    pub fn contains(&self, item: &Digest) -> bool {
        self.items.binary_search(item).is_ok()
    }

    pub fn prove_member(&self, item: &Digest) -> Option<MembershipProof> {
        let i = self.items.binary_search(item).ok()?;
        Some(MembershipProof { index: i as u64, path: merkle::prove(&self.items, i) })
    }

    pub fn prove_absent(&self, item: &Digest) -> Option<NonMembershipProof> {
        let i = self.items.binary_search(item).err()?;
        let neighbor = |j: usize| Neighbor { item: self.items[j], index: j as u64, path: merkle::prove(&self.items, j) };
        Some(NonMembershipProof {
            left: (i > 0).then(|| neighbor(i - 1)),
            right: (i < self.items.len()).then(|| neighbor(i)),
        })
    }
}

pub fn verify_member(c: &SetCommitment, item: &Digest, proof: &MembershipProof) -> bool {
    c.size > 0 && c.accepts(item, proof.index, &proof.path)
}

pub fn verify_absent(c: &SetCommitment, item: &Digest, proof: &NonMembershipProof) -> bool {
    if c.size == 0 {
        return *c == SetCommitment::empty() && proof.left.is_none() && proof.right.is_none();
    }
    let left_ok = match &proof.left {
        None => true,
        Some(l) => l.item < *item && c.accepts(&l.item, l.index, &l.path),
    };
    let right_ok = match &proof.right {
        None => true,
        Some(r) => *item < r.item && c.accepts(&r.item, r.index, &r.path),
    };
    // Adjacent leaves, or a single leaf at the matching end.
    let shape_ok = match (&proof.left, &proof.right) {
        (Some(l), Some(r)) => l.index + 1 == r.index,
        (None, Some(r)) => r.index == 0,
        (Some(l), None) => l.index + 1 == c.size,
        (None, None) => false,
    };
    left_ok && right_ok && shape_ok
}

impl MembershipProof {
    pub fn encode(&self, e: &mut Encoder) {
        e.u64(self.index);
        self.path.encode(e);
    }

    pub fn decode(d: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        Ok(Self { index: d.u64()?, path: MerklePath::decode(d)? })
    }
}

impl NonMembershipProof {
    pub fn encode(&self, e: &mut Encoder) {
        for side in [&self.left, &self.right] {
            match side {
                None => {
                    e.u8(0);
                }
                Some(n) => {
                    e.u8(1).digest(&n.item).u64(n.index);
                    n.path.encode(e);
                }
            }
        }
    }

    pub fn decode(d: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        let mut side = || -> Result<Option<Neighbor>, DecodeError> {
            match d.u8()? {
                0 => Ok(None),
                1 => Ok(Some(Neighbor { item: d.digest()?, index: d.u64()?, path: MerklePath::decode(d)? })),
                t => Err(DecodeError::InvalidTag(t)),
            }
        };
        let left = side()?;
        let right = side()?;
        Ok(Self { left, right })
    }
}
