//! Causal structure learning over mixed continuous and categorical data.
//!
//! The pipeline learns an undirected mixed graphical model, prunes and
//! orients it with order-independent constraint-based search driven by a
//! likelihood-ratio independence test, and scores the result against a
//! known DAG. A simulator for mixed structural equation models and a
//! complementary-pairs stability selection wrapper round it out.

pub mod bench;
pub mod citest;
pub mod cpss;
pub mod error;
pub mod graph;
pub mod io;
pub mod metrics;
pub mod mgm;
pub mod model;
pub mod regress;
pub mod rng;
pub mod search;
pub mod simulate;

pub use error::{Error, Result};
pub use graph::{EdgeMark, Endpoint, MarkedGraph};
pub use model::{edge_type, Column, EdgeType, MixedDataset, VariableKind, VariableMeta};
