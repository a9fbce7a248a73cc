//! Joint sparsification of graph structure and GCN weights, and iterative
//! search for graph lottery tickets.

pub mod analysis;
pub mod autodiff;
pub mod checkpoint;
pub mod dataset;
pub mod error;
pub mod glt;
pub mod graph;
pub mod model;
pub mod optim;
pub mod report;
pub mod sparse;
pub mod ugs;

pub use error::{GltError, Result};
