//! Flat file of normalised records plus their employment class, as written by
//! `classify` and read back by the analysis commands.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::record::{
    AgeGroup, EnterpriseProfile, Gender, JobProfile, JobStatus, ObservationRecord, Ownership, Sector, SizeClass,
    SocialGroup, SocialSecurity,
};
use super::IngestError;
use crate::taxonomy::EmploymentClass;

/// One output row; field order is the column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifiedRow {
    pub record_id: String,
    pub weight: f64,
    pub mpce: Option<f64>,
    pub occupation: Option<String>,
    pub industry: Option<String>,
    pub sector: Option<Sector>,
    pub gender: Option<Gender>,
    pub social_group: Option<SocialGroup>,
    pub age: Option<u32>,
    pub age_group: Option<AgeGroup>,
    pub region: Option<String>,
    pub enterprise_ownership: Ownership,
    pub enterprise_size: SizeClass,
    pub job_status: JobStatus,
    pub social_security: SocialSecurity,
    pub employment_class: EmploymentClass,
}

impl ClassifiedRow {
    pub fn new(r: &ObservationRecord, class: EmploymentClass) -> Self {
        Self {
            record_id: r.record_id.clone(),
            weight: r.weight,
            mpce: r.mpce,
            occupation: r.occupation.clone(),
            industry: r.industry.clone(),
            sector: r.sector,
            gender: r.gender,
            social_group: r.social_group,
            age: r.age,
            age_group: r.age_group,
            region: r.region.clone(),
            enterprise_ownership: r.enterprise.ownership,
            enterprise_size: r.enterprise.size_class,
            job_status: r.job.status,
            social_security: r.job.social_security,
            employment_class: class,
        }
    }

    pub fn into_parts(self) -> (ObservationRecord, EmploymentClass) {
        let rec = ObservationRecord {
            record_id: self.record_id,
            weight: self.weight,
            mpce: self.mpce,
            occupation: self.occupation,
            industry: self.industry,
            sector: self.sector,
            gender: self.gender,
            social_group: self.social_group,
            age: self.age,
            age_group: self.age_group,
            region: self.region,
            enterprise: EnterpriseProfile {
                ownership: self.enterprise_ownership,
                size_class: self.enterprise_size,
            },
            job: JobProfile {
                status: self.job_status,
                social_security: self.social_security,
            },
        };
        (rec, self.employment_class)
    }
}

fn csv_error(e: csv::Error) -> IngestError {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => IngestError::Io(io),
            _ => unreachable!(),
        }
    } else {
        IngestError::Classified(e.to_string())
    }
}

pub fn write_classified<W: Write>(out: W, rows: &[(ObservationRecord, EmploymentClass)]) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(out);
    for (r, c) in rows {
        w.serialize(ClassifiedRow::new(r, *c)).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// One JSON object per line.
pub fn write_classified_jsonl<W: Write>(
    mut out: W,
    rows: &[(ObservationRecord, EmploymentClass)],
) -> Result<(), IngestError> {
    for (r, c) in rows {
        let line = serde_json::to_string(&ClassifiedRow::new(r, *c)).map_err(|e| IngestError::Classified(e.to_string()))?;
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_classified<R: Read>(input: R) -> Result<Vec<(ObservationRecord, EmploymentClass)>, IngestError> {
    let mut reader = csv::Reader::from_reader(input);
    reader
        .deserialize::<ClassifiedRow>()
        .map(|row| row.map(ClassifiedRow::into_parts).map_err(csv_error))
        .collect()
}
