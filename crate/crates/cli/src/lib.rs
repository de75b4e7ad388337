//! Pipeline orchestration behind the `tabgraph` binary.

pub mod config;
pub mod layout;
pub mod pipeline;
pub mod refine;
pub mod svg;
