//! Survey extract ingestion.
//!
//! A [`LayoutSpec`] says where each field lives (fixed-width columns or CSV
//! headers) and which semantic role it fills; [`RecodeMap`]s turn raw survey
//! codes into category labels. [`read_records`] then yields one
//! `Result<ObservationRecord, RecordError>` per input line. A bad record never
//! aborts the file; only I/O failures do.

pub mod classified;
pub mod layout;
pub mod reader;
pub mod recode;
pub mod record;
pub mod writer;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::summation::NeumaierSum;

pub use classified::{read_classified, write_classified, write_classified_jsonl, ClassifiedRow};
pub use layout::{parse_layout, EXAMPLE_CSV, EXAMPLE_FIXED_WIDTH, FieldKind, FieldSource, FieldSpec, LayoutError, LayoutSpec, RecordFormat, Role};
pub use reader::{read_all, read_records, ErrorCause, RecordError, RecordReader, RecordResult};
pub use recode::{DefaultPolicy, RecodeError, RecodeMap, RecodeSet};
pub use record::{
    AgeGroup, EnterpriseProfile, Gender, JobProfile, JobStatus, ObservationRecord, Ownership, Sector, SizeClass,
    SocialGroup, SocialSecurity, UnknownLabel,
};
pub use writer::{RecordWriter, WriteError};

/// Stream-level ingest failures.
#[derive(Debug, Error)]
pub enum IngestError {
    #[error("layout references recode map `{0}`, which was not supplied")]
    MissingRecode(String),
    #[error("input has no column named `{0}`")]
    MissingColumn(String),
    #[error("malformed classified file: {0}")]
    Classified(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Accepted/rejected accounting for one input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub lines: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub rejected_by_cause: BTreeMap<String, usize>,
    pub accepted_weight: f64,
    pub rejected_weight: f64,
    /// Rejected weight over all weight that parsed.
    pub rejected_weight_share: f64,
}

pub fn ingest_summary<'a, I>(results: I) -> IngestReport
where
    I: IntoIterator<Item = &'a RecordResult>,
{
    let mut lines = 0;
    let mut accepted = 0;
    let mut rejected_by_cause = BTreeMap::new();
    let mut accepted_weight = NeumaierSum::new();
    let mut rejected_weight = NeumaierSum::new();
    for r in results {
        lines += 1;
        match r {
            Ok(rec) => {
                accepted += 1;
                accepted_weight.add(rec.weight);
            }
            Err(e) => {
                *rejected_by_cause.entry(e.cause.as_str().to_string()).or_insert(0) += 1;
                if let Some(w) = e.weight {
                    rejected_weight.add(w);
                }
            }
        }
    }
    let (acc, rej) = (accepted_weight.value(), rejected_weight.value());
    let all = acc + rej;
    IngestReport {
        lines,
        accepted,
        rejected: lines - accepted,
        rejected_by_cause,
        accepted_weight: acc,
        rejected_weight: rej,
        rejected_weight_share: if all > 0.0 { rej / all } else { 0.0 },
    }
}
