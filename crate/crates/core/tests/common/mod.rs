//! Shared test support: a random DAG generator, brute-force oracles that
//! recompute Board state from scratch, and single-field proof mutators.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use board_clerk::board::CommitOutcome;
use board_clerk::dag::{Committee, Frontier, NodeId, Proposal, ProposalId, Round};
use board_clerk::hash::Digest;
use board_clerk::hyperblock::{HyperBlock, ResultProof, TxResultProof};
use board_clerk::merkle::MerklePath;
use board_clerk::utxo::{make_batch, Batch, BatchId, Script, Transaction, TxInput, TxId, TxResult, Txo, TxoId, ValidationProfile};

/// One step of a generated scenario.
#[derive(Clone, Debug)]
pub enum Step {
    Add(Proposal),
    Commit(ProposalId),
}

pub struct Case {
    pub committee: Committee,
    pub batches: HashMap<BatchId, Arc<Batch>>,
    pub steps: Vec<Step>,
}

fn genesis_pool(size: u64) -> HashMap<TxoId, Txo> {
    (0..size)
        .map(|i| {
            let id = TxoId::genesis(i);
            (id, Txo { id, data: vec![], script: Script::AlwaysTrue })
        })
        .collect()
}

/// A random valid DAG (4 to 6 nodes, at most 10 rounds) whose batches draw
/// on a small genesis pool so that conflicts are common, interleaved with
/// commits of random even-round proposals.
pub fn random_case(seed: u64) -> Case {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n: u32 = rng.gen_range(4..=6);
    let committee = Committee::new(n);
    let quorum = committee.quorum();
    let rounds: Round = rng.gen_range(3..=10);
    let pool_size: u64 = rng.gen_range(4..=10);
    let pool = genesis_pool(pool_size);
    let profile = ValidationProfile::default();

    let mut batches: HashMap<BatchId, Arc<Batch>> = HashMap::new();
    let mut batch_list: Vec<BatchId> = Vec::new();
    let mut out_counter = 0u64;
    let mut by_round: Vec<BTreeMap<NodeId, ProposalId>> = Vec::new();
    let mut steps = Vec::new();
    let mut pending: Vec<(Round, ProposalId)> = Vec::new();

    for r in 0..rounds {
        let mut authors: Vec<NodeId> = (0..n).filter(|_| rng.gen_bool(0.85)).collect();
        while authors.len() < quorum {
            let a = rng.gen_range(0..n);
            if !authors.contains(&a) {
                authors.push(a);
            }
        }
        authors.sort_unstable();
        let mut row = BTreeMap::new();
        let mut added = Vec::new();
        for &a in &authors {
            let parents: BTreeSet<ProposalId> = if r == 0 {
                BTreeSet::new()
            } else {
                let prev = &by_round[r as usize - 1];
                let mut ids: Vec<(NodeId, ProposalId)> = prev.iter().map(|(k, v)| (*k, *v)).collect();
                ids.shuffle(&mut rng);
                let k = rng.gen_range(quorum..=ids.len());
                let mut chosen: BTreeSet<ProposalId> = ids[..k].iter().map(|x| x.1).collect();
                if let Some(own) = prev.get(&a) {
                    chosen.insert(*own);
                }
                chosen
            };
            let mut bs = Vec::new();
            for _ in 0..rng.gen_range(0..=2) {
                if !batch_list.is_empty() && rng.gen_bool(0.1) {
                    let b = *batch_list.choose(&mut rng).unwrap();
                    if !bs.contains(&b) {
                        bs.push(b);
                    }
                    continue;
                }
                let mut txs = Vec::new();
                let mut used = HashSet::new();
                for _ in 0..rng.gen_range(1..=3) {
                    let k = rng.gen_range(1..=2);
                    let inputs: Vec<u64> = (0..k).map(|_| rng.gen_range(0..pool_size)).collect::<BTreeSet<_>>().into_iter().collect();
                    if inputs.iter().any(|i| used.contains(i)) {
                        continue;
                    }
                    used.extend(inputs.iter().copied());
                    out_counter += 1;
                    let tx = Transaction::new(
                        inputs.iter().map(|&i| TxInput { txo: TxoId::genesis(i), witness: vec![] }).collect(),
                        vec![(out_counter.to_le_bytes().to_vec(), Script::AlwaysTrue)],
                    )
                    .unwrap();
                    txs.push(tx);
                }
                let batch = make_batch(txs, &pool, &profile).expect("inputs are disjoint");
                let id = batch.id();
                batches.insert(id, Arc::new(batch));
                batch_list.push(id);
                bs.push(id);
            }
            let p = Proposal::new(a, r, bs, parents);
            row.insert(a, p.id());
            added.push(p);
        }
        added.shuffle(&mut rng);
        steps.extend(added.into_iter().map(Step::Add));
        by_round.push(row);

        // Commit a leader one or two rounds after its round is complete.
        pending.retain(|(due, id)| {
            if *due == r {
                steps.push(Step::Commit(*id));
                false
            } else {
                true
            }
        });
        if r >= 2 && r % 2 == 0 && rng.gen_bool(0.7) {
            let ids: Vec<ProposalId> = by_round[r as usize].values().copied().collect();
            let leader = *ids.choose(&mut rng).unwrap();
            let due = r + rng.gen_range(1..=2);
            if due < rounds {
                pending.push((due, leader));
            }
        }
    }
    Case { committee, batches, steps }
}

/// From-scratch recomputation of everything the Board maintains
/// incrementally, over the proposals added so far.
#[derive(Default)]
pub struct Oracle {
    proposals: HashMap<ProposalId, Proposal>,
    batches: HashMap<BatchId, Arc<Batch>>,
    committed_proposals: HashSet<ProposalId>,
    committed_batches: HashSet<BatchId>,
    results: HashMap<TxId, TxResult>,
}

impl Oracle {
    pub fn new(batches: HashMap<BatchId, Arc<Batch>>) -> Self {
        Self { batches, ..Self::default() }
    }

    pub fn add(&mut self, p: Proposal) {
        self.proposals.insert(p.id(), p);
    }

    /// `id` and all its ancestors.
    pub fn closure(&self, id: &ProposalId) -> HashSet<ProposalId> {
        let mut seen = HashSet::new();
        let mut stack = vec![*id];
        while let Some(x) = stack.pop() {
            if seen.insert(x) {
                stack.extend(self.proposals[&x].parents.iter().copied());
            }
        }
        seen
    }

    fn txs_of(&self, b: &BatchId) -> Vec<&Transaction> {
        self.batches[b].txs().iter().collect()
    }

    /// Each node's vote on a transaction: the lowest round of its proposals
    /// whose ancestry contains the transaction.
    pub fn votes(&self) -> HashMap<TxId, BTreeMap<NodeId, Round>> {
        let mut out: HashMap<TxId, BTreeMap<NodeId, Round>> = HashMap::new();
        for p in self.proposals.values() {
            for q in self.closure(&p.id()) {
                for b in &self.proposals[&q].batches {
                    for tx in self.txs_of(b) {
                        let r = out.entry(tx.id()).or_default().entry(p.author).or_insert(p.round);
                        *r = (*r).min(p.round);
                    }
                }
            }
        }
        out
    }

    /// Every known transaction, keyed by id.
    fn known(&self) -> HashMap<TxId, &Transaction> {
        let mut out = HashMap::new();
        for p in self.proposals.values() {
            for b in &p.batches {
                for tx in self.txs_of(b) {
                    out.insert(tx.id(), tx);
                }
            }
        }
        out
    }

    fn shares_input(a: &Transaction, b: &Transaction) -> bool {
        a.id() != b.id() && a.input_ids().any(|i| b.input_ids().any(|j| i == j))
    }

    /// Transactions sharing an input with some other known transaction.
    pub fn conflicted(&self) -> HashSet<TxId> {
        let known = self.known();
        known
            .values()
            .filter(|a| known.values().any(|b| Self::shares_input(a, b)))
            .map(|a| a.id())
            .collect()
    }

    /// Per-node highest round inside the leader's ancestry.
    pub fn frontier(&self, leader: &ProposalId) -> Frontier {
        let mut f = Frontier::new();
        for id in self.closure(leader) {
            let p = &self.proposals[&id];
            let r = f.entry(p.author).or_insert(p.round);
            *r = (*r).max(p.round);
        }
        f
    }

    /// Commits `leader`'s not-yet-committed ancestry and resolves results:
    /// spenders of a success fail, unconflicted transactions succeed, and
    /// conflict groups are settled input by input in ascending order by
    /// counting each node's earliest in-frontier vote, ties going to the
    /// greater id. A winner's other conflictors fail with it.
    pub fn commit(&mut self, leader: &ProposalId) -> (CommitOutcome, BTreeSet<BatchId>) {
        let fresh: Vec<ProposalId> =
            self.closure(leader).into_iter().filter(|id| !self.committed_proposals.contains(id)).collect();
        let mut new_batches = BTreeSet::new();
        for id in &fresh {
            for b in &self.proposals[id].batches {
                if !self.committed_batches.contains(b) {
                    new_batches.insert(*b);
                }
            }
        }
        let known = self.known();
        let mut t: Vec<&Transaction> = Vec::new();
        for b in &new_batches {
            for tx in self.txs_of(b) {
                if !self.results.contains_key(&tx.id()) {
                    t.push(tx);
                }
            }
        }

        let conflicted = self.conflicted();
        let frontier = self.frontier(leader);
        let votes = self.votes();
        let in_frontier = |tx: &TxId| -> BTreeMap<NodeId, Round> {
            votes
                .get(tx)
                .map(|v| v.iter().filter(|(n, r)| frontier.get(n).is_some_and(|f| *r <= f)).map(|(n, r)| (*n, *r)).collect())
                .unwrap_or_default()
        };

        let mut out = CommitOutcome::default();
        let mut rest: Vec<&Transaction> = Vec::new();
        for tx in t {
            let beaten = known.values().any(|o| Self::shares_input(tx, o) && self.results.get(&o.id()) == Some(&TxResult::Success));
            if beaten {
                out.ft.insert(tx.id());
            } else if !conflicted.contains(&tx.id()) {
                out.st.insert(tx.id());
            } else {
                rest.push(tx);
            }
        }

        let inputs: BTreeSet<TxoId> = rest.iter().flat_map(|tx| tx.input_ids()).collect();
        let mut decided: HashSet<TxId> = HashSet::new();
        for txo in inputs {
            let group: Vec<&Transaction> =
                rest.iter().copied().filter(|tx| !decided.contains(&tx.id()) && tx.input_ids().any(|i| i == txo)).collect();
            if group.is_empty() {
                continue;
            }
            let pruned: Vec<BTreeMap<NodeId, Round>> = group.iter().map(|tx| in_frontier(&tx.id())).collect();
            let mut earliest: BTreeMap<NodeId, Round> = BTreeMap::new();
            for v in &pruned {
                for (n, r) in v {
                    let e = earliest.entry(*n).or_insert(*r);
                    *e = (*e).min(*r);
                }
            }
            let winner = group
                .iter()
                .zip(&pruned)
                .map(|(tx, v)| (v.iter().filter(|(n, r)| earliest[n] == **r).count(), tx.id().to_string(), *tx))
                .max_by(|a, b| (a.0, &a.1).cmp(&(b.0, &b.1)))
                .unwrap()
                .2;
            for tx in &group {
                decided.insert(tx.id());
                if tx.id() == winner.id() {
                    out.st.insert(tx.id());
                } else {
                    out.ft.insert(tx.id());
                }
            }
            for tx in &rest {
                if Self::shares_input(tx, winner) && decided.insert(tx.id()) {
                    out.ft.insert(tx.id());
                }
            }
        }

        for tx in &out.st {
            self.results.insert(*tx, TxResult::Success);
        }
        for tx in &out.ft {
            self.results.insert(*tx, TxResult::Failed);
        }
        self.committed_proposals.extend(fresh);
        self.committed_batches.extend(new_batches.iter().copied());
        (out, new_batches)
    }
}

fn flip(d: &Digest) -> Digest {
    let mut b = d.0;
    b[0] ^= 1;
    Digest(b)
}

fn path_variants(p: &MerklePath) -> Vec<MerklePath> {
    let mut out = Vec::new();
    if !p.siblings.is_empty() {
        let mut flipped = p.clone();
        flipped.siblings[0] = flip(&flipped.siblings[0]);
        out.push(flipped);
        let mut short = p.clone();
        short.siblings.pop();
        out.push(short);
    }
    let mut long = p.clone();
    long.siblings.push(Digest::of(b"extra"));
    out.push(long);
    out
}

/// Every single-field corruption of a hyper-block, labelled by field.
pub fn hyperblock_mutations(hb: &HyperBlock) -> Vec<(String, HyperBlock)> {
    let mut out: Vec<(String, HyperBlock)> = Vec::new();
    let mut push = |name: &str, f: &dyn Fn(&mut HyperBlock)| {
        let mut m = hb.clone();
        f(&mut m);
        out.push((name.to_string(), m));
    };
    push("leader", &|m| m.leadership.leader.0 = flip(&m.leadership.leader.0));
    push("author", &|m| m.leadership.author = (m.leadership.author + 1) % m.leadership.n);
    push("round", &|m| m.leadership.round += 2);
    push("seed", &|m| m.leadership.seed ^= 1);
    push("n", &|m| m.leadership.n += 1);
    push("coin", &|m| m.leadership.coin = flip(&m.leadership.coin));
    push("supporter.drop", &|m| {
        m.leadership.supporters.pop();
    });
    push("supporter.proposal", &|m| m.leadership.supporters[0].proposal.0 = flip(&m.leadership.supporters[0].proposal.0));
    push("supporter.author", &|m| {
        let s = &mut m.leadership.supporters[0];
        s.author = (s.author + 1) % 64;
    });
    push("supporter.tag", &|m| m.leadership.supporters[0].tag = flip(&m.leadership.supporters[0].tag));
    push("witness_root", &|m| m.witness_root = flip(&m.witness_root));
    push("entry.prev", &|m| {
        m.entry.prev = match m.entry.prev {
            Some(_) => None,
            None => Some(m.leadership.leader),
        }
    });
    push("entry.wb.root", &|m| m.entry.wb.root = flip(&m.entry.wb.root));
    push("entry.wb.size", &|m| m.entry.wb.size += 1);
    push("entry.wf.root", &|m| m.entry.wf.root = flip(&m.entry.wf.root));
    push("entry.wf.size", &|m| m.entry.wf.size += 1);
    push("entry_index", &|m| m.entry_index += 1);
    push("entry_count", &|m| m.entry_count += 1);
    push("endorsement.drop", &|m| {
        m.endorsements.pop();
    });
    push("endorsement.node", &|m| {
        let a = &mut m.endorsements[0];
        a.node = (a.node + 1) % 64;
    });
    push("endorsement.tag", &|m| m.endorsements[0].tag = flip(&m.endorsements[0].tag));
    for (i, p) in path_variants(&hb.entry_path).into_iter().enumerate() {
        let mut m = hb.clone();
        m.entry_path = p;
        out.push((format!("entry_path.{i}"), m));
    }
    out
}

/// Every single-field corruption of a result proof, labelled by field.
pub fn proof_mutations(p: &TxResultProof) -> Vec<(String, TxResultProof)> {
    let mut out: Vec<(String, TxResultProof)> = Vec::new();
    let mut with = |name: String, m: TxResultProof| out.push((name, m));
    let mut m = p.clone();
    m.tx.0 = flip(&m.tx.0);
    with("tx".into(), m);
    let mut m = p.clone();
    m.batch.0 = flip(&m.batch.0);
    with("batch".into(), m);
    let mut m = p.clone();
    m.batch_proof.index += 1;
    with("batch_proof.index".into(), m);
    for (i, path) in path_variants(&p.batch_proof.path).into_iter().enumerate() {
        let mut m = p.clone();
        m.batch_proof.path = path;
        with(format!("batch_proof.path.{i}"), m);
    }
    let mut m = p.clone();
    m.tx_index += 1;
    with("tx_index".into(), m);
    let mut m = p.clone();
    m.batch_size += 1;
    with("batch_size".into(), m);
    for (i, path) in path_variants(&p.tx_path).into_iter().enumerate() {
        let mut m = p.clone();
        m.tx_path = path;
        with(format!("tx_path.{i}"), m);
    }
    match &p.result {
        ResultProof::Failed(mp) => {
            let mut m = p.clone();
            m.result = ResultProof::Failed(board_clerk::hyperblock::MembershipProof { index: mp.index + 1, path: mp.path.clone() });
            with("failed.index".into(), m);
            for (i, path) in path_variants(&mp.path).into_iter().enumerate() {
                let mut m = p.clone();
                m.result = ResultProof::Failed(board_clerk::hyperblock::MembershipProof { index: mp.index, path });
                with(format!("failed.path.{i}"), m);
            }
            let mut m = p.clone();
            m.result = ResultProof::Success(board_clerk::hyperblock::NonMembershipProof { left: None, right: None });
            with("result.kind".into(), m);
        }
        ResultProof::Success(nm) => {
            for (side, neighbor) in [("left", &nm.left), ("right", &nm.right)] {
                let Some(nb) = neighbor else { continue };
                let set = |m: &mut TxResultProof, v| {
                    if let ResultProof::Success(x) = &mut m.result {
                        if side == "left" {
                            x.left = v;
                        } else {
                            x.right = v;
                        }
                    }
                };
                let mut m = p.clone();
                set(&mut m, None);
                with(format!("{side}.drop"), m);
                let mut item = nb.clone();
                item.item = flip(&item.item);
                let mut m = p.clone();
                set(&mut m, Some(item));
                with(format!("{side}.item"), m);
                let mut index = nb.clone();
                index.index += 1;
                let mut m = p.clone();
                set(&mut m, Some(index));
                with(format!("{side}.index"), m);
                for (i, path) in path_variants(&nb.path).into_iter().enumerate() {
                    let mut n2 = nb.clone();
                    n2.path = path;
                    let mut m = p.clone();
                    set(&mut m, Some(n2));
                    with(format!("{side}.path.{i}"), m);
                }
            }
            let mut m = p.clone();
            m.result = ResultProof::Failed(board_clerk::hyperblock::MembershipProof { index: 0, path: MerklePath { siblings: vec![] } });
            with("result.kind".into(), m);
        }
    }
    out
}

/// Replays a generated case through DagStore and Board, comparing votes and
/// the conflicted set after every insertion and each commit's outcome with
/// the oracle. Returns the number of commits checked and of transactions
/// they failed.
pub fn check_case(seed: u64) -> Result<(usize, usize), String> {
    use board_clerk::board::{Board, FastQuorum};
    use board_clerk::dag::{DagStore, InsertOutcome};

    let case = random_case(seed);
    let mut dag = DagStore::new(case.committee);
    for b in case.batches.values() {
        dag.insert_batch(b.clone());
    }
    let mut board = Board::new(case.committee, FastQuorum::BeyondQuorum);
    let mut oracle = Oracle::new(case.batches.clone());
    let mut commits = 0;
    let mut failed = 0;
    for step in case.steps {
        match step {
            Step::Add(p) => {
                let outcome = dag.add_proposal(p.clone());
                if outcome != (InsertOutcome::Accepted { new: true }) {
                    return Err(format!("generated proposal not accepted: {outcome:?}"));
                }
                board.process(&p, &dag).map_err(|e| e.to_string())?;
                oracle.add(p);
                let expected = oracle.votes();
                let got: HashMap<TxId, BTreeMap<NodeId, Round>> =
                    board.all_tx_votes().iter().map(|(t, v)| (*t, v.as_map().clone())).collect();
                if got != expected {
                    return Err("vote records differ from recount".into());
                }
                if *board.conflicted_set() != oracle.conflicted() {
                    return Err("conflicted set differs from recount".into());
                }
            }
            Step::Commit(leader) => {
                let round = dag.get(&leader).unwrap().round;
                let ps = dag.uncommitted_sub_dag(&leader).map_err(|e| e.to_string())?;
                let frontier = dag.frontier(&leader).map_err(|e| e.to_string())?;
                if frontier != oracle.frontier(&leader) {
                    return Err("frontier differs".into());
                }
                let report = board.commit_unchecked(&ps, &frontier, round).map_err(|e| e.to_string())?;
                let ids: Vec<ProposalId> = ps.iter().map(|p| p.id()).collect();
                dag.mark_committed(&ids, round);
                let (outcome, batches) = oracle.commit(&leader);
                if report.outcome != outcome {
                    return Err(format!("commit of round {round} leader: board {:?} oracle {:?}", report.outcome, outcome));
                }
                let got: BTreeSet<BatchId> = report.batches.iter().copied().collect();
                if got != batches || got.len() != report.batches.len() {
                    return Err(format!("commit of round {round} leader: batch lists differ"));
                }
                commits += 1;
                failed += outcome.ft.len();
            }
        }
    }
    Ok((commits, failed))
}

/// Checks that honest nodes' leader decisions and (ST, FT) streams agree
/// on their common prefix. Returns the shortest committed-leader count.
pub fn agreement(out: &board_clerk::sim::SimOutput) -> Result<usize, String> {
    let honest: Vec<&board_clerk::node::Node> = out.honest().collect();
    let Some(first) = honest.first() else { return Ok(0) };
    let mut shortest = first.commits().len();
    for node in &honest[1..] {
        let (a, b) = (first.committed_sequence(), node.committed_sequence());
        let k = a.len().min(b.len());
        if a[..k] != b[..k] {
            return Err(format!("leader sequences of nodes {} and {} diverge", first.id(), node.id()));
        }
        let (a, b) = (first.commits(), node.commits());
        let k = a.len().min(b.len());
        for (x, y) in a[..k].iter().zip(&b[..k]) {
            if x.leader != y.leader || x.outcome != y.outcome || x.batches != y.batches {
                return Err(format!("nodes {} and {} commit round {} differently", first.id(), node.id(), x.round));
            }
        }
        shortest = shortest.min(k);
    }
    Ok(shortest)
}

/// Tallies from one seeded hyper-block comparison.
#[derive(Debug, Default)]
pub struct HyperBlockStats {
    /// Leaders realized in both the blocking and non-blocking run.
    pub leaders: usize,
    pub witness_mismatches: usize,
    pub proofs: usize,
    pub rejected_honest: usize,
    /// Committed leaders for which no hyper-block could be assembled.
    pub unassembled: usize,
    pub mutations: usize,
    pub surviving: Vec<String>,
    pub proposal_counts_equal: bool,
}

/// Runs one seed with hyper-blocks off, blocking and non-blocking, and
/// checks witnesses, honest proofs and every single-field mutation.
pub fn hyperblock_check(seed: u64) -> HyperBlockStats {
    use board_clerk::hyperblock::{verify_tx_result, Mode, SetCommitment, Verdict};
    use board_clerk::sim::{run, SimConfig};

    let base = SimConfig { seed, max_rounds: 24, load: 20.0, conflict_fraction: 0.2, ..SimConfig::default() };
    let off = run(&SimConfig { mode: Mode::Off, ..base.clone() }).unwrap();
    let blocking = run(&SimConfig { mode: Mode::Blocking, ..base.clone() }).unwrap();
    let nonblocking = run(&SimConfig { mode: Mode::NonBlocking, ..base }).unwrap();

    let mut stats = HyperBlockStats {
        proposal_counts_equal: off.proposals_per_round == blocking.proposals_per_round
            && off.proposals_per_round == nonblocking.proposals_per_round,
        ..HyperBlockStats::default()
    };
    let witnesses = |out: &board_clerk::sim::SimOutput, stats: &mut HyperBlockStats| {
        let mut m: HashMap<(Round, NodeId), (SetCommitment, SetCommitment)> = HashMap::new();
        for r in out.hyperblocks(0) {
            match r {
                Ok((hb, _)) => {
                    m.insert((hb.leadership.round, hb.leadership.author), (hb.entry.wb, hb.entry.wf));
                }
                Err(_) => stats.unassembled += 1,
            }
        }
        m
    };
    let wb = witnesses(&blocking, &mut stats);
    let mut ignored = HyperBlockStats::default();
    let wn = witnesses(&nonblocking, &mut ignored);
    for (k, v) in &wb {
        if let Some(w) = wn.get(k) {
            stats.leaders += 1;
            if v != w {
                stats.witness_mismatches += 1;
            }
        }
    }

    for (hb, proofs) in blocking.hyperblocks(0).into_iter().flatten() {
        for p in &proofs {
            stats.proofs += 1;
            if verify_tx_result(p, &hb, &p.tx) == Verdict::Invalid {
                stats.rejected_honest += 1;
            }
            for (field, m) in proof_mutations(p) {
                stats.mutations += 1;
                if verify_tx_result(&m, &hb, &p.tx) != Verdict::Invalid {
                    stats.surviving.push(format!("proof.{field}"));
                }
            }
        }
        if let Some(p) = proofs.first() {
            for (field, m) in hyperblock_mutations(&hb) {
                stats.mutations += 1;
                if verify_tx_result(p, &m, &p.tx) != Verdict::Invalid {
                    stats.surviving.push(format!("hyperblock.{field}"));
                }
            }
        }
    }
    stats
}
