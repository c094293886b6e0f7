//! Neuro-symbolic task planning: schema-guided information extraction,
//! deterministic PDDL mapping, classical planning with diagnostics, layered
//! validation and a failure-triggered repair loop.

pub mod corpus;
pub mod extraction;
pub mod harness;
pub mod llm;
pub mod mapper;
pub mod orchestrator;
pub mod pddl;
pub mod plan_validator;
pub mod planner;
pub mod schema;
pub mod validation;
