//! Payments across several concatenated cycle coins.
//!
//! Each cycle carries its own coins. A payment walks along one cycle and may
//! switch cycle ("hop") at a trusted intermediary, who receives on one cycle
//! and pays on with a coin it holds on the next. The route is a shortest path
//! in the hop graph; the payer collects signed promises first, each leg is a
//! cycle-coin payment in its own micro round, and a payee who says it was
//! not paid triggers a walk back along the route.

use simnet::{ProcessId, SimError};
use thiserror::Error;

mod dispute;
mod exec;
mod experiment;
mod graph;
mod topology;

pub use dispute::{dispute_walkback, WalkEvent, WalkStep, Walkback};
pub use exec::{
    check_payment_proof, coin_instance, execute_hop_payment, Behavior, HopConfig, HopProcess, HopRun, HopStatus,
    PromiseText, Receipt, Route,
};
pub use experiment::{hop_experiment, samples_to_csv, HopSample};
pub use graph::{HopGraph, HopPath, Leg, Vertex};
pub use topology::{bfs_distances, diameter, gen_binary_search_cycle, gen_random_cycles, CycleSet};

#[derive(Debug, Error)]
pub enum HopError {
    #[error("no hop path from {a} to {b}")]
    NoPath { a: ProcessId, b: ProcessId },
    #[error("{0} holds nothing on any cycle")]
    NoFunds(ProcessId),
    #[error("{0} paying itself needs no route")]
    SelfPayment(ProcessId),
    #[error("bad topology: {0}")]
    Topology(String),
    #[error("bad route: {0}")]
    Route(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
