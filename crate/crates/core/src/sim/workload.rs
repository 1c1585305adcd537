//! Client transaction stream: single-input transactions over a UTXO pool,
//! with a configurable fraction of cross-node double spends.

use std::collections::{HashMap, VecDeque};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::dag::NodeId;
use crate::utxo::{make_batch, Batch, Script, Transaction, TxId, TxInput, Txo, TxoId, ValidationProfile};

/// Inputs spent exactly once, recently, remembered for conflict injection.
const RECENT: usize = 512;

pub struct Workload {
    rng: ChaCha8Rng,
    fraction: f64,
    next_genesis: u64,
    genesis_limit: u64,
    refill: VecDeque<TxoId>,
    known: HashMap<TxoId, Txo>,
    recent: VecDeque<(TxoId, NodeId)>,
    counter: u64,
    profile: ValidationProfile,
}

impl Workload {
    pub fn new(rng: ChaCha8Rng, fraction: f64, genesis_limit: u64) -> Self {
        assert!((0.0..=1.0).contains(&fraction), "conflict fraction outside [0, 1]");
        Self {
            rng,
            fraction,
            next_genesis: 0,
            genesis_limit,
            refill: VecDeque::new(),
            known: HashMap::new(),
            recent: VecDeque::new(),
            counter: 0,
            profile: ValidationProfile::default(),
        }
    }

    fn fresh_input(&mut self) -> Option<TxoId> {
        if self.next_genesis < self.genesis_limit {
            let id = TxoId::genesis(self.next_genesis);
            self.next_genesis += 1;
            self.known.insert(id, Txo { id, data: Vec::new(), script: Script::AlwaysTrue });
            return Some(id);
        }
        self.refill.pop_front()
    }

    /// Outputs of a committed successful transaction become spendable.
    pub fn on_committed(&mut self, tx: &Transaction) {
        for out in tx.outputs() {
            self.known.insert(out.id, out.clone());
            self.refill.push_back(out.id);
        }
    }

    /// Draws a batch of `count` transactions for `node`.
    pub fn next_transactions(&mut self, node: NodeId, count: usize) -> Vec<Transaction> {
        let mut txs = Vec::with_capacity(count);
        for _ in 0..count {
            let conflict = self.fraction > 0.0 && self.rng.gen_bool(self.fraction);
            let reused = if conflict { self.take_recent(node) } else { None };
            let input = match reused {
                Some(i) => i,
                None => match self.fresh_input() {
                    Some(i) => {
                        self.remember(i, node);
                        i
                    }
                    None => break,
                },
            };
            self.counter += 1;
            let tx = Transaction::new(
                vec![TxInput { txo: input, witness: Vec::new() }],
                vec![(self.counter.to_be_bytes().to_vec(), Script::AlwaysTrue)],
            )
            .expect("one input");
            txs.push(tx);
        }
        txs
    }

    pub fn next_batch(&mut self, node: NodeId, count: usize) -> Batch {
        let txs = self.next_transactions(node, count);
        make_batch(txs, &self.known, &self.profile).expect("generated transactions are valid and disjoint")
    }

    /// Poisson-distributed batch size with the given mean.
    pub fn batch_size(&mut self, mean: f64) -> usize {
        if mean <= 0.0 {
            return 0;
        }
        Poisson::new(mean).expect("positive mean").sample(&mut self.rng) as usize
    }

    fn remember(&mut self, input: TxoId, node: NodeId) {
        self.recent.push_back((input, node));
        if self.recent.len() > RECENT {
            self.recent.pop_front();
        }
    }

    /// Removes and returns a recent single-spend input owned by another node.
    fn take_recent(&mut self, node: NodeId) -> Option<TxoId> {
        let others: Vec<usize> = (0..self.recent.len()).filter(|&i| self.recent[i].1 != node).collect();
        if others.is_empty() {
            return None;
        }
        let pick = others[self.rng.gen_range(0..others.len())];
        self.recent.remove(pick).map(|(id, _)| id)
    }

    pub fn lookup(&self) -> &HashMap<TxoId, Txo> {
        &self.known
    }
}

/// Spender index kept by tests and metrics: which transactions spend a TXO.
pub fn spenders<'a>(txs: impl IntoIterator<Item = &'a Transaction>) -> HashMap<TxoId, Vec<TxId>> {
    let mut m: HashMap<TxoId, Vec<TxId>> = HashMap::new();
    for tx in txs {
        for i in tx.input_ids() {
            m.entry(i).or_default().push(tx.id());
        }
    }
    m
}
