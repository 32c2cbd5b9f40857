//! Track files, replay, scenario synthesis, the HTTP race service and
//! post-race reports around the `draftwatch-core` engine.

pub mod cli;
pub mod client;
pub mod iso;
pub mod replay;
pub mod report;
pub mod scenario;
pub mod service;
pub mod settings;
pub mod track;
pub mod wire;

pub use draftwatch_core as core;
