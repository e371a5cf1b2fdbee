//! Semantic upright priors: label cleanup, per-label bias tables and the
//! remote prior service with its offline fallback.

mod labels;
mod service;
mod table;

pub use labels::{build_detection_prompt, simplify_label};
pub use service::{fetch_priors, parse_response, request_body, PriorCache, PriorFetch, PriorServiceConfig, SYSTEM_PROMPT};
pub use table::{
    effective_gravity_weight, fallback_priors, PriorOverride, PriorSource, SemanticPriorTable, DEFAULT_BIAS,
};
