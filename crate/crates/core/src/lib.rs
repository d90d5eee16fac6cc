//! Resilience prediction toolkit core.
//!
//! A small typed IR with an interpreter, a single-bit fault-injection
//! campaign runner that labels programs with success / SDC / interruption
//! rates, a dynamic instruction trace format, and the trace features
//! (weighted instruction-group densities, resilience patterns and bigram
//! order features) that the learning crate trains on.

pub mod features;
pub mod fi;
pub mod ir;
pub mod par;
pub mod trace;

pub use features::{assemble_feature_vector, FoundationVector, OrderedFeatureVector};
pub use fi::{
    classify, execute, inject_and_execute, required_sample_size, run_campaign, sample_injection,
    CampaignConfig, ExecutionOutcome, InjectionPoint, Manifestation, ManifestationRates, Status,
    Verifier,
};
pub use ir::{parse_program, validate_program, GroupTag, Opcode, OperandKind, Program, Value};
pub use trace::{parse_trace, Chunk, InstructionRecord, OperandRecord, Trace};
