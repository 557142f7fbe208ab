//! Report-level pipeline for incidental thyroid findings: corpus I/O,
//! detection, entity extraction, cohort construction and cascade linkage.

pub mod cascade;
pub mod charlson;
pub mod codes;
pub mod cohort;
pub mod corpus;
pub mod detect;
pub mod eval;
pub mod extract;
pub mod labels;
pub mod matcher;
pub mod seed;
pub mod synthgen;
pub mod text;
