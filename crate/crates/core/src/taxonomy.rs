//! NCEUS formal/informal classification.
//!
//! An enterprise is in the informal sector when it is an unincorporated
//! proprietary or partnership concern with fewer than ten workers. A worker is
//! informally employed when working in the informal sector or in a household,
//! unless in a regular wage job with social security, or when working in the
//! formal sector without social security.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::record::label_enum;
use crate::ingest::{EnterpriseProfile, JobProfile, JobStatus, ObservationRecord, Ownership, SizeClass, SocialSecurity, UnknownLabel};
use crate::summation::NeumaierSum;

label_enum!(SectorClass, "sector class" {
    InformalSector,
    FormalSector,
    HouseholdSector,
    Indeterminate,
});
label_enum!(EmploymentClass, "employment class" { Formal, Informal, Indeterminate });

pub fn classify_enterprise(e: &EnterpriseProfile) -> SectorClass {
    match (e.ownership, e.size_class) {
        (Ownership::Household, _) => SectorClass::HouseholdSector,
        (Ownership::IncorporatedOrOtherLegal, _) => SectorClass::FormalSector,
        (Ownership::ProprietaryOrPartnership, SizeClass::LessThanTen) => SectorClass::InformalSector,
        (Ownership::ProprietaryOrPartnership, SizeClass::TenOrMore) => SectorClass::FormalSector,
        (Ownership::ProprietaryOrPartnership, SizeClass::Unknown) | (Ownership::Unknown, _) => {
            SectorClass::Indeterminate
        }
    }
}

/// The built-in rule. Unknown job fields give `Indeterminate` only when the
/// outcome depends on them.
pub fn classify_worker(sector: SectorClass, job: &JobProfile) -> EmploymentClass {
    use EmploymentClass::*;
    use JobStatus as J;
    use SocialSecurity as S;
    match sector {
        SectorClass::Indeterminate => Indeterminate,
        SectorClass::InformalSector | SectorClass::HouseholdSector => match (job.status, job.social_security) {
            (J::RegularWage, S::Available) => Formal,
            (_, S::NotAvailable) | (J::Casual | J::SelfEmployed, _) => Informal,
            (J::RegularWage | J::Unknown, _) => Indeterminate,
        },
        SectorClass::FormalSector => match job.social_security {
            S::Available => Formal,
            S::NotAvailable => Informal,
            S::Unknown => Indeterminate,
        },
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PolicyError {
    #[error("policy header must be `sector_class,job_status,social_security,employment_class`")]
    BadHeader,
    #[error("policy line {line}: {message}")]
    Malformed { line: u64, message: String },
    #[error("policy line {line}: cell ({sector}, {status}, {social_security}) already set")]
    DuplicateCell {
        line: u64,
        sector: SectorClass,
        status: JobStatus,
        social_security: SocialSecurity,
    },
}

const CELLS: usize = 4 * 4 * 3;

/// Every `SectorClass x JobStatus x SocialSecurity` cell with its class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecisionTable {
    cells: [EmploymentClass; CELLS],
}

fn cell_index(sector: SectorClass, status: JobStatus, ss: SocialSecurity) -> usize {
    (sector as usize * 4 + status as usize) * 3 + ss as usize
}

impl Default for DecisionTable {
    fn default() -> Self {
        Self::nceus()
    }
}

impl DecisionTable {
    pub fn nceus() -> Self {
        let mut cells = [EmploymentClass::Indeterminate; CELLS];
        for (sector, status, ss) in Self::keys() {
            let job = JobProfile {
                status,
                social_security: ss,
            };
            cells[cell_index(sector, status, ss)] = classify_worker(sector, &job);
        }
        Self { cells }
    }

    pub fn keys() -> impl Iterator<Item = (SectorClass, JobStatus, SocialSecurity)> {
        SectorClass::ALL.iter().flat_map(|&sector| {
            JobStatus::ALL
                .iter()
                .flat_map(move |&status| SocialSecurity::ALL.iter().map(move |&ss| (sector, status, ss)))
        })
    }

    pub fn get(&self, sector: SectorClass, status: JobStatus, ss: SocialSecurity) -> EmploymentClass {
        self.cells[cell_index(sector, status, ss)]
    }

    pub fn set(&mut self, sector: SectorClass, status: JobStatus, ss: SocialSecurity, class: EmploymentClass) {
        self.cells[cell_index(sector, status, ss)] = class;
    }

    pub fn classify(&self, enterprise: &EnterpriseProfile, job: &JobProfile) -> EmploymentClass {
        self.get(classify_enterprise(enterprise), job.status, job.social_security)
    }

    /// Built-in table with cells overridden by a policy CSV
    /// (`sector_class,job_status,social_security,employment_class`).
    pub fn with_overrides(text: &str) -> Result<Self, PolicyError> {
        let mut table = Self::nceus();
        let mut seen = [false; CELLS];
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let header = reader.headers().map_err(|e| PolicyError::Malformed {
            line: 1,
            message: e.to_string(),
        })?;
        if header.iter().ne(["sector_class", "job_status", "social_security", "employment_class"]) {
            return Err(PolicyError::BadHeader);
        }
        for row in reader.records() {
            let row = row.map_err(|e| PolicyError::Malformed {
                line: e.position().map_or(0, |p| p.line()),
                message: e.to_string(),
            })?;
            let line = row.position().map_or(0, |p| p.line());
            let bad = |e: UnknownLabel| PolicyError::Malformed {
                line,
                message: e.to_string(),
            };
            let sector: SectorClass = row[0].parse().map_err(bad)?;
            let status: JobStatus = row[1].parse().map_err(bad)?;
            let ss: SocialSecurity = row[2].parse().map_err(bad)?;
            let class: EmploymentClass = row[3].parse().map_err(bad)?;
            let i = cell_index(sector, status, ss);
            if std::mem::replace(&mut seen[i], true) {
                return Err(PolicyError::DuplicateCell {
                    line,
                    sector,
                    status,
                    social_security: ss,
                });
            }
            table.cells[i] = class;
        }
        Ok(table)
    }

    /// Sector classes where a regular wage worker who gains social security
    /// would move away from `Formal`.
    pub fn monotonicity_violations(&self) -> Vec<SectorClass> {
        let rank = |c: EmploymentClass| match c {
            EmploymentClass::Informal => 0,
            EmploymentClass::Indeterminate => 1,
            EmploymentClass::Formal => 2,
        };
        SectorClass::ALL
            .iter()
            .copied()
            .filter(|&sector| {
                let granted = rank(self.get(sector, JobStatus::RegularWage, SocialSecurity::Available));
                SocialSecurity::ALL
                    .iter()
                    .any(|&ss| rank(self.get(sector, JobStatus::RegularWage, ss)) > granted)
            })
            .collect()
    }
}

/// What downstream statistics do with `Indeterminate` workers.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IndeterminatePolicy {
    #[default]
    Exclude,
    Informal,
}

impl IndeterminatePolicy {
    /// The class used downstream, or `None` if the record is dropped.
    pub fn resolve(self, class: EmploymentClass) -> Option<EmploymentClass> {
        match (class, self) {
            (EmploymentClass::Indeterminate, IndeterminatePolicy::Exclude) => None,
            (EmploymentClass::Indeterminate, IndeterminatePolicy::Informal) => Some(EmploymentClass::Informal),
            (c, _) => Some(c),
        }
    }
}

impl FromStr for IndeterminatePolicy {
    type Err = UnknownLabel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exclude" => Ok(Self::Exclude),
            "informal" => Ok(Self::Informal),
            _ => Err(UnknownLabel {
                kind: "indeterminate policy",
                label: s.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassCount {
    pub count: usize,
    pub weight: f64,
    pub weight_share: f64,
}

/// Per-class counts and weighted shares.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Tally {
    pub formal: ClassCount,
    pub informal: ClassCount,
    pub indeterminate: ClassCount,
    pub total_weight: f64,
}

impl Tally {
    pub fn from_pairs<I>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (f64, EmploymentClass)>,
    {
        let mut counts = [0usize; 3];
        let mut weights = [NeumaierSum::new(), NeumaierSum::new(), NeumaierSum::new()];
        for (w, class) in pairs {
            counts[class as usize] += 1;
            weights[class as usize].add(w);
        }
        let w = weights.map(|s| s.value());
        let total: f64 = crate::summation::sum(&w);
        let entry = |i: usize| ClassCount {
            count: counts[i],
            weight: w[i],
            weight_share: if total > 0.0 { w[i] / total } else { 0.0 },
        };
        Tally {
            formal: entry(EmploymentClass::Formal as usize),
            informal: entry(EmploymentClass::Informal as usize),
            indeterminate: entry(EmploymentClass::Indeterminate as usize),
            total_weight: total,
        }
    }

    pub fn get(&self, class: EmploymentClass) -> &ClassCount {
        match class {
            EmploymentClass::Formal => &self.formal,
            EmploymentClass::Informal => &self.informal,
            EmploymentClass::Indeterminate => &self.indeterminate,
        }
    }
}

/// Classifies each record in order and tallies the result.
pub fn classify_dataset<I>(records: I, table: &DecisionTable) -> (Vec<(ObservationRecord, EmploymentClass)>, Tally)
where
    I: IntoIterator<Item = ObservationRecord>,
{
    let rows: Vec<_> = records
        .into_iter()
        .map(|r| {
            let class = table.classify(&r.enterprise, &r.job);
            (r, class)
        })
        .collect();
    let tally = Tally::from_pairs(rows.iter().map(|(r, c)| (r.weight, *c)));
    (rows, tally)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn job(status: JobStatus, social_security: SocialSecurity) -> JobProfile {
        JobProfile { status, social_security }
    }

    fn ent(ownership: Ownership, size_class: SizeClass) -> EnterpriseProfile {
        EnterpriseProfile { ownership, size_class }
    }

    #[test]
    fn enterprise_rules() {
        use Ownership::*;
        use SizeClass::*;
        assert_eq!(classify_enterprise(&ent(ProprietaryOrPartnership, LessThanTen)), SectorClass::InformalSector);
        assert_eq!(classify_enterprise(&ent(IncorporatedOrOtherLegal, LessThanTen)), SectorClass::FormalSector);
        assert_eq!(classify_enterprise(&ent(ProprietaryOrPartnership, TenOrMore)), SectorClass::FormalSector);
        assert_eq!(classify_enterprise(&ent(ProprietaryOrPartnership, SizeClass::Unknown)), SectorClass::Indeterminate);
        assert_eq!(classify_enterprise(&ent(Household, SizeClass::Unknown)), SectorClass::HouseholdSector);
        assert_eq!(classify_enterprise(&ent(Ownership::Unknown, TenOrMore)), SectorClass::Indeterminate);
    }

    #[test]
    fn worker_rules() {
        use JobStatus::*;
        use SocialSecurity::*;
        let c = classify_worker;
        assert_eq!(c(SectorClass::InformalSector, &job(Casual, NotAvailable)), EmploymentClass::Informal);
        assert_eq!(c(SectorClass::InformalSector, &job(RegularWage, Available)), EmploymentClass::Formal);
        assert_eq!(c(SectorClass::FormalSector, &job(RegularWage, NotAvailable)), EmploymentClass::Informal);
        assert_eq!(c(SectorClass::HouseholdSector, &job(SelfEmployed, SocialSecurity::Unknown)), EmploymentClass::Informal);
        assert_eq!(c(SectorClass::InformalSector, &job(RegularWage, SocialSecurity::Unknown)), EmploymentClass::Indeterminate);
        assert_eq!(c(SectorClass::FormalSector, &job(SelfEmployed, Available)), EmploymentClass::Formal);
        assert_eq!(c(SectorClass::FormalSector, &job(JobStatus::Unknown, SocialSecurity::Unknown)), EmploymentClass::Indeterminate);
    }

    #[test]
    fn table_covers_all_cells_and_matches_rule() {
        let t = DecisionTable::nceus();
        assert_eq!(DecisionTable::keys().count(), 48);
        for (s, st, ss) in DecisionTable::keys() {
            assert_eq!(t.get(s, st, ss), classify_worker(s, &job(st, ss)));
        }
        assert!(t.monotonicity_violations().is_empty());
    }

    #[test]
    fn overrides_apply_and_reject_duplicates() {
        let text = "sector_class,job_status,social_security,employment_class\nIndeterminate,Casual,NotAvailable,Informal\n";
        let t = DecisionTable::with_overrides(text).unwrap();
        assert_eq!(
            t.get(SectorClass::Indeterminate, JobStatus::Casual, SocialSecurity::NotAvailable),
            EmploymentClass::Informal
        );
        let dup = format!("{text}Indeterminate,Casual,NotAvailable,Formal\n");
        assert!(matches!(DecisionTable::with_overrides(&dup), Err(PolicyError::DuplicateCell { line: 3, .. })));
        assert_eq!(DecisionTable::with_overrides("a,b\n"), Err(PolicyError::BadHeader));
        let bad = "sector_class,job_status,social_security,employment_class\nNowhere,Casual,Available,Formal\n";
        assert!(matches!(DecisionTable::with_overrides(bad), Err(PolicyError::Malformed { line: 2, .. })));
    }

    #[test]
    fn monotonicity_detects_inverted_override() {
        let text = "sector_class,job_status,social_security,employment_class\nFormalSector,RegularWage,Available,Informal\n";
        let t = DecisionTable::with_overrides(text).unwrap();
        assert_eq!(t.monotonicity_violations(), vec![SectorClass::FormalSector]);
    }

    #[test]
    fn indeterminate_policy() {
        assert_eq!(IndeterminatePolicy::Exclude.resolve(EmploymentClass::Indeterminate), None);
        assert_eq!(
            IndeterminatePolicy::Informal.resolve(EmploymentClass::Indeterminate),
            Some(EmploymentClass::Informal)
        );
        assert_eq!(IndeterminatePolicy::Exclude.resolve(EmploymentClass::Formal), Some(EmploymentClass::Formal));
    }

    #[test]
    fn empty_dataset_tallies_zero() {
        let (rows, tally) = classify_dataset(Vec::new(), &DecisionTable::nceus());
        assert!(rows.is_empty());
        assert_eq!(tally, Tally::default());
    }
}
