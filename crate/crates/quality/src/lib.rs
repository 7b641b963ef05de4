//! Observation quality assessment. Raw records are enriched from a
//! knowledge base, checked for duplicacy against the stream's last result
//! time, and non-duplicates are assessed for delay and range against
//! configured quality factors before being stored.

pub mod assess;
pub mod enrich;
pub mod error;
pub mod factor;
pub mod http;
pub mod intake;
pub mod kb;
pub mod pipeline;
pub mod report;
pub mod store;
pub mod triples;

pub use assess::{assess_delay, assess_duplicacy, is_out_of_range, time_delay, AssessmentResult, Duplicacy, StreamState};
pub use enrich::{enrich, mint_uri, EnrichedObservation, RawRecord};
pub use error::{QualityError, Result};
pub use factor::{FactorKind, FactorTable, QualityFactor, TimeWindow};
pub use http::router;
pub use intake::{parse_notification, Intake};
pub use kb::{KnowledgeBase, KnowledgeBaseEntry, ObservedProperty};
pub use pipeline::{DeadLetter, JournalRun, Outcome, Pipeline, PipelineStats, Stage};
pub use report::{histogram, report, QualityReport, RangeTally, SlotSample, DEFAULT_BIN_SECS};
pub use store::{AssessedObservation, AssessedStore, DuplicateUpdate, StoreRecord};
pub use triples::write_triples;
