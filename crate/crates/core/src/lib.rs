//! Board-and-Clerk: DAG-based BFT consensus over UTXO transactions with a
//! fast-commit channel, hyper-block result proofs and a deterministic
//! network simulator.

pub mod board;
pub mod clerk;
pub mod dag;
pub mod harness;
pub mod hash;
pub mod hyperblock;
pub mod merkle;
pub mod node;
pub mod sim;
pub mod utxo;
