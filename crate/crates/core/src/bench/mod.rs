//! Ingestion, splits and experiment orchestration.

pub mod data;
pub mod provenance;
pub mod run;
pub mod synthetic;

pub use data::{chronological_split, ingest, parse_corpus, phases, Corpus, LineError, Split};
pub use provenance::{verify_provenance, ProvenanceCheck};
pub use run::{group_seed, run_experiment, CellSummary, Method, Plan, PredictionRecord, RunConfig, RunReport, TransferPair};
