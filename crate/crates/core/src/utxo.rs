//! Extended-UTXO transactions: internal validity, conflicts, the canonical
//! transaction order and conflict-free batches.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::digest_newtype;
use crate::hash::{Decoder, DecodeError, Digest, Encoder};
use crate::merkle;

digest_newtype!(
    /// Identifies one transaction output: digest of (creating tx id, output index).
    TxoId
);
digest_newtype!(TxId);
digest_newtype!(BatchId);

const TXO_TAG: u8 = 0x20;
const BATCH_TAG: u8 = 0x21;

impl TxoId {
    pub fn derive(tx: &TxId, index: u32) -> Self {
        let mut e = Encoder::tagged(TXO_TAG);
        e.digest(&tx.0).u32(index);
        TxoId(e.finish())
    }

    /// Outputs that exist before any transaction (the genesis pool).
    pub fn genesis(index: u64) -> Self {
        let mut e = Encoder::tagged(TXO_TAG);
        e.bytes(b"genesis").u64(index);
        TxoId(e.finish())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Script {
    AlwaysTrue,
    AlwaysFalse,
    /// Succeeds iff the SHA-256 of the witness equals the digest.
    RequireWitness(Digest),
}

impl Script {
    pub fn evaluate(&self, witness: &[u8], _data: &[u8], _tx: &Transaction) -> bool {
        match self {
            Script::AlwaysTrue => true,
            Script::AlwaysFalse => false,
            Script::RequireWitness(expected) => Digest::of(witness) == *expected,
        }
    }

    fn encode(&self, e: &mut Encoder) {
        match self {
            Script::AlwaysTrue => {
                e.u8(0);
            }
            Script::AlwaysFalse => {
                e.u8(1);
            }
            Script::RequireWitness(d) => {
                e.u8(2).digest(d);
            }
        }
    }

    fn decode(d: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        match d.u8()? {
            0 => Ok(Script::AlwaysTrue),
            1 => Ok(Script::AlwaysFalse),
            2 => Ok(Script::RequireWitness(d.digest()?)),
            t => Err(DecodeError::InvalidTag(t)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Txo {
    pub id: TxoId,
    pub data: Vec<u8>,
    pub script: Script,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TxInput {
    pub txo: TxoId,
    pub witness: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Transaction {
    id: TxId,
    inputs: Vec<TxInput>,
    outputs: Vec<Txo>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TxError {
    #[error("transaction has no inputs")]
    NoInputs,
    #[error("input {0} referenced twice")]
    DuplicateInput(TxoId),
    #[error(transparent)]
    Decode(#[from] DecodeError),
}

impl Transaction {
    /// Builds a transaction; output ids are derived from the transaction id.
    pub fn new(inputs: Vec<TxInput>, outputs: Vec<(Vec<u8>, Script)>) -> Result<Self, TxError> {
        if inputs.is_empty() {
            return Err(TxError::NoInputs);
        }
        let mut seen = HashSet::with_capacity(inputs.len());
        for i in &inputs {
            if !seen.insert(i.txo) {
                return Err(TxError::DuplicateInput(i.txo));
            }
        }
        let id = TxId(Digest::of(&encode_body(&inputs, outputs.iter().map(|(d, s)| (d.as_slice(), s)))));
        let outputs = outputs
            .into_iter()
            .enumerate()
            .map(|(i, (data, script))| Txo { id: TxoId::derive(&id, i as u32), data, script })
            .collect();
        Ok(Self { id, inputs, outputs })
    }

    pub fn id(&self) -> TxId {
        self.id
    }

    pub fn inputs(&self) -> &[TxInput] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[Txo] {
        &self.outputs
    }

    pub fn input_ids(&self) -> impl Iterator<Item = TxoId> + '_ {
        self.inputs.iter().map(|i| i.txo)
    }

    /// Canonical body bytes; the transaction id is their SHA-256.
    pub fn serialize(&self) -> Vec<u8> {
        encode_body(&self.inputs, self.outputs.iter().map(|o| (o.data.as_slice(), &o.script)))
    }

    pub fn deserialize(bytes: &[u8]) -> Result<Self, TxError> {
        let mut d = Decoder::new(bytes);
        let n_in = d.len_prefix(36)?;
        let mut inputs = Vec::with_capacity(n_in);
        for _ in 0..n_in {
            let txo = TxoId(d.digest()?);
            let witness = d.bytes()?;
            inputs.push(TxInput { txo, witness });
        }
        let n_out = d.len_prefix(5)?;
        let mut outputs = Vec::with_capacity(n_out);
        for _ in 0..n_out {
            let data = d.bytes()?;
            let script = Script::decode(&mut d)?;
            outputs.push((data, script));
        }
        d.finish()?;
        Self::new(inputs, outputs)
    }
}

fn encode_body<'a>(inputs: &[TxInput], outputs: impl ExactSizeIterator<Item = (&'a [u8], &'a Script)>) -> Vec<u8> {
    let mut e = Encoder::new();
    e.len_prefix(inputs.len());
    for i in inputs {
        e.digest(&i.txo.0).bytes(&i.witness);
    }
    e.len_prefix(outputs.len());
    for (data, script) in outputs {
        e.bytes(data);
        script.encode(&mut e);
    }
    e.into_bytes()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TxResult {
    Success,
    Failed,
}

/// Lifecycle of a transaction inside one node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TxState {
    Verified,
    Submitted,
    FastCommitted(TxResult),
    Committed(TxResult),
}

impl TxState {
    /// Whether moving from `self` to `next` is a legal transition.
    pub fn can_become(self, next: TxState) -> bool {
        use TxState::*;
        match (self, next) {
            (Verified, Submitted) => true,
            (Submitted, FastCommitted(_)) | (Submitted, Committed(_)) => true,
            (FastCommitted(a), Committed(b)) => a == b,
            _ => false,
        }
    }
}

/// Source of the outputs referenced by transaction inputs.
pub trait TxoLookup {
    fn txo(&self, id: &TxoId) -> Option<&Txo>;
}

impl TxoLookup for HashMap<TxoId, Txo> {
    fn txo(&self, id: &TxoId) -> Option<&Txo> {
        self.get(id)
    }
}

pub type UtxoConstraint = Arc<dyn Fn(&Txo) -> bool + Send + Sync>;
pub type TxConstraint = Arc<dyn Fn(&Transaction) -> bool + Send + Sync>;

/// Ledger-level output and transaction constraints. Both default to always-pass.
#[derive(Clone, Default)]
pub struct ValidationProfile {
    pub utxo_constraint: Option<UtxoConstraint>,
    pub tx_constraint: Option<TxConstraint>,
}

impl fmt::Debug for ValidationProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ValidationProfile")
            .field("utxo_constraint", &self.utxo_constraint.is_some())
            .field("tx_constraint", &self.tx_constraint.is_some())
            .finish()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ValidityError {
    #[error("unknown input {0}")]
    UnknownInput(TxoId),
}

/// Transaction-local validity: input scripts, output and transaction constraints.
/// An unknown input is reported separately so callers can defer instead of reject.
pub fn check_internal_validity(
    tx: &Transaction,
    lookup: &impl TxoLookup,
    profile: &ValidationProfile,
) -> Result<bool, ValidityError> {
    let mut ok = true;
    for input in &tx.inputs {
        let txo = lookup.txo(&input.txo).ok_or(ValidityError::UnknownInput(input.txo))?;
        ok &= txo.script.evaluate(&input.witness, &txo.data, tx);
    }
    if let Some(psi_u) = &profile.utxo_constraint {
        ok &= tx.outputs.iter().all(|o| psi_u(o));
    }
    if let Some(psi_t) = &profile.tx_constraint {
        ok &= psi_t(tx);
    }
    Ok(ok)
}

/// Two distinct transactions conflict when their input sets intersect.
pub fn conflicts(a: &Transaction, b: &Transaction) -> bool {
    debug_assert_ne!(a.id, b.id, "conflicts() requires distinct transactions");
    let (small, large) = if a.inputs.len() <= b.inputs.len() { (a, b) } else { (b, a) };
    if small.inputs.len() <= 4 {
        return small.input_ids().any(|x| large.input_ids().any(|y| x == y));
    }
    let set: HashSet<TxoId> = large.input_ids().collect();
    small.input_ids().any(|x| set.contains(&x))
}

/// Canonical transaction order: lexicographic on the hexadecimal id.
pub fn ord_less(a: &Transaction, b: &Transaction) -> bool {
    ord_less_id(&a.id, &b.id)
}

pub fn ord_less_id(a: &TxId, b: &TxId) -> bool {
    // Lower-case hex preserves byte order, so the byte comparison is the hex comparison.
    a.0 .0 < b.0 .0
}

/// Transactions sealed together by one worker. Never internally conflicting.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Batch {
    id: BatchId,
    txs: Vec<Transaction>,
}

impl Batch {
    pub fn id(&self) -> BatchId {
        self.id
    }

    pub fn txs(&self) -> &[Transaction] {
        &self.txs
    }

    pub fn tx_ids(&self) -> Vec<Digest> {
        self.txs.iter().map(|t| t.id.0).collect()
    }

    /// Position of `tx` in the batch, if present.
    pub fn position(&self, tx: &TxId) -> Option<usize> {
        self.txs.iter().position(|t| t.id == *tx)
    }

    /// Merkle inclusion path of the transaction at `index`.
    pub fn inclusion_path(&self, index: usize) -> merkle::MerklePath {
        merkle::prove(&self.tx_ids(), index)
    }
}

/// Batch id: tagged digest of the tx count and the Merkle root over tx ids.
pub fn batch_id_from_root(size: u64, root: Option<&Digest>) -> BatchId {
    let mut e = Encoder::tagged(BATCH_TAG);
    e.u64(size);
    if let Some(r) = root {
        e.digest(r);
    }
    BatchId(e.finish())
}

/// Recomputes a batch id from one member's inclusion path.
pub fn batch_id_from_path(tx: &TxId, index: u64, size: u64, path: &merkle::MerklePath) -> Option<BatchId> {
    let root = merkle::root_from_path(&tx.0, index, size, path)?;
    Some(batch_id_from_root(size, Some(&root)))
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BatchError {
    #[error("transactions {0} and {1} conflict")]
    Conflicting(TxId, TxId),
    #[error("transaction {0} is internally invalid")]
    InvalidTransaction(TxId),
    #[error("transaction {0} appears twice")]
    DuplicateTransaction(TxId),
    #[error(transparent)]
    Validity(#[from] ValidityError),
}

/// Seals transactions into a batch, preserving order.
pub fn make_batch(
    txs: Vec<Transaction>,
    lookup: &impl TxoLookup,
    profile: &ValidationProfile,
) -> Result<Batch, BatchError> {
    let mut spent: HashMap<TxoId, TxId> = HashMap::new();
    let mut ids = HashSet::new();
    for tx in &txs {
        if !ids.insert(tx.id) {
            return Err(BatchError::DuplicateTransaction(tx.id));
        }
        if !check_internal_validity(tx, lookup, profile)? {
            return Err(BatchError::InvalidTransaction(tx.id));
        }
        for txo in tx.input_ids() {
            if let Some(other) = spent.insert(txo, tx.id) {
                return Err(BatchError::Conflicting(other, tx.id));
            }
        }
    }
    Ok(seal_batch(txs))
}

/// Builds the batch without validation; for callers that already validated.
pub(crate) fn seal_batch(txs: Vec<Transaction>) -> Batch {
    let ids: Vec<Digest> = txs.iter().map(|t| t.id.0).collect();
    let root = if ids.is_empty() { None } else { Some(merkle::root(&ids)) };
    Batch { id: batch_id_from_root(ids.len() as u64, root.as_ref()), txs }
}
