//! Candidate-aware structured routing for agent networks.
//!
//! A query plus a candidate agent subset is mapped to one of four routing
//! actions (single-agent call, multi-agent plan, direct answer, escalation)
//! through a decide-then-ground pipeline. Deterministic safeguards repair
//! failed or incomplete stages, and a confidence gate can hand the whole
//! decision to a stronger cloud backend once.
//!
//! The crate also ships a template benchmark generator and an exact-match
//! evaluation harness.

pub mod benchgen;
pub mod deciders;
pub mod eval;
pub mod fallback;
pub mod pipeline;
pub mod registry;
pub mod routing;
pub mod text;
pub mod validation;

pub use deciders::{
    ActionDecision, Decider, DeciderConfig, DeciderError, DeciderKind, GroundingResult,
    RetrieveRankDecider, RuleBasedDecider,
};
pub use fallback::SafeguardConfig;
pub use pipeline::{PipelineConfig, RouteTrace, Router};
pub use registry::{AgentCard, ArgumentSchema, Registry, SchemaField, SlotType};
pub use routing::{
    parse_routing_output, ArgumentSet, Backend, ExecObject, ParseFailure, Plan, PlanStep,
    RoutingAction, RoutingInput, RoutingOutput,
};
pub use validation::{validate_output, ValidationReport};
