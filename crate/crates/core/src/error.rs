use std::fmt;

use serde::{Deserialize, Serialize};

use crate::condition::EvalError;
use crate::text::SyntaxError;

/// Which of the three label universes a label belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelKind {
    Entity,
    Datatype,
    Purpose,
}

impl fmt::Display for LabelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LabelKind::Entity => "entity",
            LabelKind::Datatype => "datatype",
            LabelKind::Purpose => "purpose",
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PilotError {
    #[error("invalid date `{0}` (expected DD/MM/YYYY)")]
    InvalidDate(String),

    #[error("unknown {kind} `{label}`")]
    UnknownLabel { kind: LabelKind, label: String },

    #[error("{kind} hierarchy has a cycle through `{label}`")]
    CyclicHierarchy { kind: LabelKind, label: String },

    #[error("{kind} labels `{a}` and `{b}` are incomparable; join cannot be formed")]
    Incomparable { kind: LabelKind, a: String, b: String },

    #[error(transparent)]
    Syntax(#[from] SyntaxError),

    #[error(transparent)]
    Eval(#[from] EvalError),

    #[error("event is not enabled: {0}")]
    NotEnabled(String),

    #[error("state budget of {limit} states exceeded")]
    BudgetExceeded { limit: usize },

    /// A scenario or request violates a named invariant.
    #[error("{violation}: {detail}")]
    Invalid { violation: &'static str, detail: String },

    #[error("unknown {kind} `{id}`")]
    UnknownReference { kind: &'static str, id: String },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl PilotError {
    pub(crate) fn invalid(violation: &'static str, detail: impl Into<String>) -> Self {
        PilotError::Invalid {
            violation,
            detail: detail.into(),
        }
    }

    /// Machine-readable name of the error, used by the HTTP service.
    pub fn code(&self) -> &'static str {
        match self {
            PilotError::InvalidDate(_) => "invalid_date",
            PilotError::UnknownLabel { .. } => "unknown_label",
            PilotError::CyclicHierarchy { .. } => "cyclic_hierarchy",
            PilotError::Incomparable { .. } => "incomparable",
            PilotError::Syntax(_) => "syntax_error",
            PilotError::Eval(_) => "evaluation_error",
            PilotError::NotEnabled(_) => "not_enabled",
            PilotError::BudgetExceeded { .. } => "state_budget_exceeded",
            PilotError::Invalid { violation, .. } => violation,
            PilotError::UnknownReference { .. } => "unknown_reference",
            PilotError::Io(_) => "io_error",
            PilotError::Json(_) => "json_error",
        }
    }
}

pub type Result<T, E = PilotError> = std::result::Result<T, E>;
