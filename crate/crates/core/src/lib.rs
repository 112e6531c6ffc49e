pub mod clock;
pub mod eval;
pub mod generate;
pub mod grounding;
pub mod ingest;
pub mod kg;
pub mod prompt;
