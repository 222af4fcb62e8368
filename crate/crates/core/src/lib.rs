//! sparktrace core: a concolic testing pipeline for MiniScript.
//!
//! The pipeline has three stages, each usable on its own:
//!
//! 1. **Capture** — [`bytecode`] compiles MiniScript to register bytecode,
//!    [`interp`] defines the reference semantics, and [`tracer`] executes
//!    the same bytecode through per-op handlers that emit a machine-level
//!    micro-op trace of one concrete run.
//! 2. **Translation** — [`lifter`] filters and lifts an extracted trace
//!    into a self-contained SSA module with memory and symbolic
//!    intrinsics, plus an evaluator for concrete replay.
//! 3. **Analysis** — [`concolic`] replays lifted modules symbolically,
//!    negates branch conditions, and solves for new string inputs;
//!    [`harness`] measures statement coverage and turns exceptions into
//!    bug findings across a library corpus.

pub mod bytecode;
pub mod concolic;
pub mod config;
pub mod frontend;
pub mod harness;
pub mod interp;
pub mod lifter;
pub mod semantics;
pub mod tracer;
pub mod util;
pub mod value;

pub use bytecode::{BytecodeFunction, CompiledProgram, Op};
pub use config::Config;
pub use frontend::{Program, SourceProgram};
pub use interp::{ExecOutcome, OutcomeKind};
pub use util::Span;
pub use value::Value;

/// Version tag of the trace file format.
pub const TRACE_FORMAT_VERSION: &str = "TRACE v1";
/// Version tag of the lifted-module file format.
pub const MODULE_FORMAT_VERSION: &str = "MODULE v1";
