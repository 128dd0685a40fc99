//! Pseudo-geodesics and numerical shadowing tests.

pub mod chain;
pub mod reparam;
pub mod search;
pub mod spec;
pub mod weak;

pub use chain::{accumulated_time, chain_eval, validate_chain, ChainValidation, ExtensionRule, JumpRecord, PseudoGeodesic};
pub use reparam::Reparameterization;
pub use search::{shadow_search, SearchBudget, SearchEffort, SeedGrid, ShadowReport, Verdict};
pub use spec::{specification_shadow_search, SpecificationInstance};
pub use weak::{weak_horizon, weak_shadow_check, weak_shadow_search, VertexDistance, WeakShadowCheck, WeakShadowReport};
