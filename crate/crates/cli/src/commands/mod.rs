pub mod analyze;
pub mod cohort;
pub mod eval;
pub mod extract;
pub mod link;
pub mod report;
pub mod synth;
