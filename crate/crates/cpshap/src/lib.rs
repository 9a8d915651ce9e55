//! Runtime around `cpshap-core`: the concurrent attribution pipeline,
//! benchmark harnesses, CSV ingestion and report files.

pub mod attribution;
pub mod bench;
pub mod data;
pub mod report;
pub mod cli;
