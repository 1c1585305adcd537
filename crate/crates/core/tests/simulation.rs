mod common;

use std::collections::HashMap;

use board_clerk::dag::NodeId;
use board_clerk::sim::{run, LogRecord, SimConfig};
use board_clerk::utxo::{TxResult, TxoId};

fn cfg(n: u32, seed: u64) -> SimConfig {
    SimConfig { n, f: (n - 1) / 3, seed, max_rounds: 60, load: 20.0, ..SimConfig::default() }
}

#[test]
fn honest_nodes_agree_under_conflicts_and_crashes() {
    for (n, seed) in [(4, 1), (4, 2), (7, 3), (7, 4)] {
        let f = (n - 1) / 3;
        let crashes: Vec<(NodeId, f64)> = (0..f).map(|i| (n - 1 - i, 40.0 + 30.0 * i as f64)).collect();
        let out = run(&SimConfig { conflict_fraction: 0.2, crashes, ..cfg(n, seed) }).unwrap();
        let k = common::agreement(&out).unwrap_or_else(|e| panic!("n={n} seed={seed}: {e}"));
        assert!(k >= 10, "n={n} seed={seed}: only {k} common commits");
        assert_eq!(out.violations(), 0);
        assert!(!out.truncated);
    }
}

#[test]
fn identical_seeds_give_byte_identical_logs() {
    let c = SimConfig { conflict_fraction: 0.1, crashes: vec![(3, 50.0)], ..cfg(4, 9) };
    let a = run(&c).unwrap();
    let b = run(&c).unwrap();
    assert_eq!(a.log_json_lines(), b.log_json_lines());
    assert_eq!(a.latencies, b.latencies);
    let other = run(&SimConfig { seed: 10, ..c }).unwrap();
    assert_ne!(a.log_json_lines(), other.log_json_lines());
}

#[test]
fn crashing_more_than_f_nodes_halts_commits() {
    let c = SimConfig { crashes: vec![(2, 50.0), (3, 50.0)], max_time: 2_000.0, ..cfg(4, 5) };
    let out = run(&c).unwrap();
    assert!(out.truncated, "a run that cannot finish must be marked truncated");
    let last_leader = out
        .log
        .iter()
        .filter_map(|r| match r {
            LogRecord::Leader { time, .. } => Some(*time),
            _ => None,
        })
        .fold(0.0, f64::max);
    // Messages already in flight may still complete a round or two.
    assert!(last_leader < 100.0, "commit at {last_leader}");
    assert!(out.honest().all(|node| node.round().unwrap() < c.max_rounds));
}

/// For each spent output, the committed results of its spenders as seen by node 0.
fn spender_results(out: &board_clerk::sim::SimOutput) -> HashMap<TxoId, Vec<TxResult>> {
    let board = out.nodes[0].board();
    let mut m: HashMap<TxoId, Vec<TxResult>> = HashMap::new();
    for tx in out.transactions.values() {
        if let Some(r) = board.committed_result(&tx.id()) {
            for i in tx.input_ids() {
                m.entry(i).or_default().push(r);
            }
        }
    }
    m
}

#[test]
fn no_output_is_spent_twice() {
    let out = run(&SimConfig { conflict_fraction: 0.2, ..cfg(4, 11) }).unwrap();
    let groups = spender_results(&out);
    let mut contested = 0;
    for rs in groups.values() {
        let wins = rs.iter().filter(|r| **r == TxResult::Success).count();
        assert!(wins <= 1);
        if rs.len() > 1 {
            contested += 1;
            assert_eq!(wins, 1, "a fully committed conflict group has one winner");
        }
    }
    assert!(contested > 10);
}

#[test]
fn two_nodes_with_every_transaction_in_conflict() {
    let out = run(&SimConfig { n: 2, f: 0, conflict_fraction: 1.0, ..cfg(2, 3) }).unwrap();
    let groups = spender_results(&out);
    let pairs: Vec<&Vec<TxResult>> = groups.values().filter(|rs| rs.len() == 2).collect();
    assert!(pairs.len() > 20);
    assert!(groups.values().all(|rs| rs.len() <= 2));
    for rs in pairs {
        assert_eq!(rs.iter().filter(|r| **r == TxResult::Success).count(), 1);
    }
}
