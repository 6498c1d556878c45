//! PILOT privacy policies.
//!
//! * [`hierarchy`]: partial orders over entities, datatypes and purposes.
//! * [`condition`]: terms, conditions, three-valued evaluation, entailment.
//! * [`policy`]: policies with their subsumption and join operators.
//! * [`text`]: the natural-language concrete syntax.
//! * [`exec`]: system states and the request / send / transfer / use events.
//! * [`analysis`]: exhaustive exploration of event interleavings and risk
//!   queries with witness traces.
//! * [`scenario`]: the scenario file format and the record store.
//! * [`service`] and [`cli`]: HTTP and command-line front ends.

pub mod analysis;
pub mod cli;
pub mod condition;
pub mod error;
pub mod exec;
pub mod hierarchy;
pub mod policy;
pub mod scenario;
pub mod service;
pub mod text;
pub mod timestamp;

pub use condition::{entails, Condition, Predicate, Term, TruthValue, Value};
pub use error::{LabelKind, PilotError, Result};
pub use hierarchy::{Hierarchies, Hierarchy};
pub use policy::{purpose_cap, DataCommunicationRule, DataUsageRule, JoinMode, PilotPolicy};
pub use text::{parse_policy, render_policy};
pub use timestamp::Timestamp;
