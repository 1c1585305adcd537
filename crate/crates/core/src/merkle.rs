//! Positional binary Merkle tree.
//!
//! Leaves are `H(0x00 || item)`, inner nodes `H(0x01 || left || right)`. An
//! unpaired last node is promoted unchanged to the next level, so a tree of
//! one leaf has the leaf hash as its root.

use crate::hash::{Decoder, DecodeError, Digest, Encoder};

const LEAF_TAG: u8 = 0x00;
const NODE_TAG: u8 = 0x01;

pub fn leaf_hash(item: &Digest) -> Digest {
    let mut e = Encoder::tagged(LEAF_TAG);
    e.digest(item);
    e.finish()
}

fn node_hash(left: &Digest, right: &Digest) -> Digest {
    let mut e = Encoder::tagged(NODE_TAG);
    e.digest(left).digest(right);
    e.finish()
}

/// Root over `items`. Panics on an empty slice; callers handle emptiness.
pub fn root(items: &[Digest]) -> Digest {
    assert!(!items.is_empty(), "merkle root of empty list");
    let mut level: Vec<Digest> = items.iter().map(leaf_hash).collect();
    while level.len() > 1 {
        level = level
            .chunks(2)
            .map(|c| if c.len() == 2 { node_hash(&c[0], &c[1]) } else { c[0] })
            .collect();
    }
    level[0]
}

/// Authentication path for one leaf, siblings bottom-up.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct MerklePath {
    pub siblings: Vec<Digest>,
}

impl MerklePath {
    pub fn encode(&self, e: &mut Encoder) {
        e.len_prefix(self.siblings.len());
        for s in &self.siblings {
            e.digest(s);
        }
    }

    pub fn decode(d: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        let n = d.len_prefix(32)?;
        let siblings = (0..n).map(|_| d.digest()).collect::<Result<_, _>>()?;
        Ok(Self { siblings })
    }
}

pub fn prove(items: &[Digest], index: usize) -> MerklePath {
    assert!(index < items.len(), "leaf index out of range");
    let mut level: Vec<Digest> = items.iter().map(leaf_hash).collect();
    let mut idx = index;
    let mut siblings = Vec::new();
    while level.len() > 1 {
        let sib = idx ^ 1;
        if sib < level.len() {
            siblings.push(level[sib]);
        }
        level = level
            .chunks(2)
            .map(|c| if c.len() == 2 { node_hash(&c[0], &c[1]) } else { c[0] })
            .collect();
        idx /= 2;
    }
    MerklePath { siblings }
}

/// Recomputes the root for `item` at `index` in a tree of `size` leaves.
/// Returns `None` when the path shape does not match `(index, size)`.
pub fn root_from_path(item: &Digest, index: u64, size: u64, path: &MerklePath) -> Option<Digest> {
    if size == 0 || index >= size {
        return None;
    }
    let mut h = leaf_hash(item);
    let mut idx = index;
    let mut width = size;
    let mut it = path.siblings.iter();
    while width > 1 {
        let sib = idx ^ 1;
        if sib < width {
            let s = it.next()?;
            h = if idx % 2 == 0 { node_hash(&h, s) } else { node_hash(s, &h) };
        }
        idx /= 2;
        width = width.div_ceil(2);
    }
    if it.next().is_some() {
        return None;
    }
    Some(h)
}

pub fn verify(root: &Digest, item: &Digest, index: u64, size: u64, path: &MerklePath) -> bool {
    root_from_path(item, index, size, path).as_ref() == Some(root)
}
