//! From classified records to decompositions: admission filters, grouping
//! keys and exclusion accounting.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decompose::{decompose, DecomposeError, DecompositionResult, NestedBuilder, NestedDecompositionResult, PartitionBuilder};
use crate::ingest::{ObservationRecord, UnknownLabel};
use crate::stats::{weighted_quantile, WeightedSample};
use crate::summation::NeumaierSum;
use crate::tabulate::Category;
use crate::taxonomy::{EmploymentClass, IndeterminatePolicy};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error("record `{0}` has no mpce value; the layout must bind the mpce role to decompose")]
    MissingMpce(String),
    #[error("trim percentage must lie in [0, 100), got {0}")]
    BadTrim(f64),
    #[error(transparent)]
    Decompose(#[from] DecomposeError),
}

/// What records are grouped by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupKey {
    EmploymentClass,
    #[serde(untagged)]
    Category(Category),
}

impl GroupKey {
    pub fn as_str(self) -> &'static str {
        match self {
            GroupKey::EmploymentClass => "employment_class",
            GroupKey::Category(c) => c.as_str(),
        }
    }

    pub fn label(self, r: &ObservationRecord, class: EmploymentClass) -> &str {
        match self {
            GroupKey::EmploymentClass => class.label(),
            GroupKey::Category(c) => c.label(r),
        }
    }

    /// Labels in output order: employment classes in their natural order,
    /// category values sorted.
    fn labels(self, rows: &[(&ObservationRecord, EmploymentClass)]) -> Vec<String> {
        match self {
            GroupKey::EmploymentClass => {
                let mut labels = vec![EmploymentClass::Formal.label().to_string(), EmploymentClass::Informal.label().to_string()];
                if rows.iter().any(|(_, c)| *c == EmploymentClass::Indeterminate) {
                    labels.push(EmploymentClass::Indeterminate.label().to_string());
                }
                labels
            }
            GroupKey::Category(c) => {
                let set: BTreeSet<&str> = rows.iter().map(|(r, _)| c.label(r)).collect();
                set.into_iter().map(str::to_string).collect()
            }
        }
    }
}

impl fmt::Display for GroupKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GroupKey {
    type Err = UnknownLabel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "employment_class" {
            return Ok(GroupKey::EmploymentClass);
        }
        s.parse::<Category>().map(GroupKey::Category).map_err(|_| UnknownLabel {
            kind: "grouping key",
            label: s.to_string(),
        })
    }
}

/// Filters applied before any statistic is computed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Admission {
    pub indeterminate: IndeterminatePolicy,
    /// Drop workers younger than this (and workers with no recorded age).
    pub min_age: Option<u32>,
    /// Drop the top `p` percent of the weighted mpce distribution.
    pub trim_top_percent: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Excluded {
    pub count: usize,
    pub weight: f64,
    pub weight_share: f64,
}

/// Where the input weight went.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Exclusions {
    pub input_records: usize,
    pub input_weight: f64,
    pub indeterminate: Excluded,
    pub below_min_age: Excluded,
    pub trimmed: Excluded,
    pub admitted: Excluded,
}

#[derive(Default)]
struct Bucket {
    count: usize,
    weight: NeumaierSum,
}

impl Bucket {
    fn add(&mut self, w: f64) {
        self.count += 1;
        self.weight.add(w);
    }

    fn finish(&self, total: f64) -> Excluded {
        let weight = self.weight.value();
        Excluded {
            count: self.count,
            weight,
            weight_share: if total > 0.0 { weight / total } else { 0.0 },
        }
    }
}

/// Admitted rows, borrowed from the input.
pub type Admitted<'a> = Vec<(&'a ObservationRecord, EmploymentClass)>;

/// Applies `admission`, returning the admitted rows (with Indeterminate
/// resolved per policy) in input order.
pub fn admit<'a>(
    rows: &'a [(ObservationRecord, EmploymentClass)],
    admission: &Admission,
) -> Result<(Admitted<'a>, Exclusions), PipelineError> {
    let mut input = Bucket::default();
    let (mut indeterminate, mut young, mut trimmed, mut admitted) =
        (Bucket::default(), Bucket::default(), Bucket::default(), Bucket::default());
    let mut kept = Vec::with_capacity(rows.len());
    for (r, c) in rows {
        input.add(r.weight);
        let Some(class) = admission.indeterminate.resolve(*c) else {
            indeterminate.add(r.weight);
            continue;
        };
        if let Some(min) = admission.min_age {
            if r.age.is_none_or(|a| a < min) {
                young.add(r.weight);
                continue;
            }
        }
        kept.push((r, class));
    }

    if let Some(p) = admission.trim_top_percent {
        if !(0.0..100.0).contains(&p) {
            return Err(PipelineError::BadTrim(p));
        }
        if p > 0.0 && !kept.is_empty() {
            let values = kept
                .iter()
                .map(|(r, _)| r.mpce.ok_or_else(|| PipelineError::MissingMpce(r.record_id.clone())))
                .collect::<Result<Vec<_>, _>>()?;
            let weights = kept.iter().map(|(r, _)| r.weight).collect();
            if let Ok(s) = WeightedSample::new(values, weights) {
                let cut = weighted_quantile(&s, 1.0 - p / 100.0);
                kept.retain(|(r, _)| {
                    let over = r.mpce.is_some_and(|y| y > cut);
                    if over {
                        trimmed.add(r.weight);
                    }
                    !over
                });
            }
        }
    }
    kept.iter().for_each(|(r, _)| admitted.add(r.weight));

    let total = input.weight.value();
    Ok((
        kept,
        Exclusions {
            input_records: input.count,
            input_weight: total,
            indeterminate: indeterminate.finish(total),
            below_min_age: young.finish(total),
            trimmed: trimmed.finish(total),
            admitted: admitted.finish(total),
        },
    ))
}

fn mpce(r: &ObservationRecord) -> Result<f64, PipelineError> {
    r.mpce.ok_or_else(|| PipelineError::MissingMpce(r.record_id.clone()))
}

pub fn decompose_records(
    rows: &[(ObservationRecord, EmploymentClass)],
    key: GroupKey,
    alpha: f64,
    admission: &Admission,
) -> Result<(DecompositionResult, Exclusions), PipelineError> {
    let (kept, exclusions) = admit(rows, admission)?;
    let mut b = PartitionBuilder::new(key.as_str());
    for label in key.labels(&kept) {
        b.declare(&label);
    }
    b.reserve(kept.len());
    for (r, c) in &kept {
        b.push(key.label(r, *c), mpce(r)?, r.weight);
    }
    Ok((decompose(&b.build()?, alpha)?, exclusions))
}

pub fn nested_decompose_records(
    rows: &[(ObservationRecord, EmploymentClass)],
    outer: GroupKey,
    inner: GroupKey,
    alpha: f64,
    admission: &Admission,
) -> Result<(NestedDecompositionResult, Exclusions), PipelineError> {
    let (kept, exclusions) = admit(rows, admission)?;
    let mut b = NestedBuilder::new(outer.as_str(), inner.as_str());
    for label in outer.labels(&kept) {
        b.declare_outer(&label);
    }
    for label in inner.labels(&kept) {
        b.declare_inner(&label);
    }
    for (r, c) in &kept {
        b.push(outer.label(r, *c), inner.label(r, *c), mpce(r)?, r.weight);
    }
    Ok((b.decompose(alpha)?, exclusions))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{EnterpriseProfile, JobProfile};

    fn rec(id: &str, occupation: &str, mpce: f64, weight: f64, age: Option<u32>) -> ObservationRecord {
        ObservationRecord {
            record_id: id.into(),
            weight,
            mpce: Some(mpce),
            occupation: Some(occupation.into()),
            industry: None,
            sector: None,
            gender: None,
            social_group: None,
            age,
            age_group: None,
            region: None,
            enterprise: EnterpriseProfile::default(),
            job: JobProfile::default(),
        }
    }

    fn rows() -> Vec<(ObservationRecord, EmploymentClass)> {
        use EmploymentClass::*;
        vec![
            (rec("1", "b", 10.0, 1.0, Some(30)), Formal),
            (rec("2", "a", 4.0, 2.0, Some(14)), Informal),
            (rec("3", "a", 3.0, 1.0, None), Informal),
            (rec("4", "b", 100.0, 0.5, Some(50)), Formal),
            (rec("5", "a", 2.0, 3.0, Some(40)), Indeterminate),
            (rec("6", "b", 5.0, 2.0, Some(22)), Informal),
        ]
    }

    #[test]
    fn keys_parse() {
        assert_eq!("employment_class".parse::<GroupKey>().unwrap(), GroupKey::EmploymentClass);
        assert_eq!("occupation".parse::<GroupKey>().unwrap(), GroupKey::Category(Category::Occupation));
        assert!("shoe_size".parse::<GroupKey>().is_err());
    }

    #[test]
    fn exclusion_accounting() {
        let rows = rows();
        let admission = Admission {
            min_age: Some(15),
            ..Admission::default()
        };
        let (kept, ex) = admit(&rows, &admission).unwrap();
        assert_eq!(ex.indeterminate.count, 1);
        assert_eq!(ex.below_min_age.count, 2);
        assert_eq!(kept.len(), 3);
        assert_eq!(ex.admitted.weight + ex.indeterminate.weight + ex.below_min_age.weight, ex.input_weight);
    }

    #[test]
    fn trimming_drops_the_top() {
        let rows = rows();
        let admission = Admission {
            trim_top_percent: Some(10.0),
            ..Admission::default()
        };
        let (kept, ex) = admit(&rows, &admission).unwrap();
        assert_eq!(ex.trimmed.count, 1);
        assert!(kept.iter().all(|(r, _)| r.mpce != Some(100.0)));
        assert!(admit(&rows, &Admission { trim_top_percent: Some(100.0), ..admission }).is_err());
    }

    #[test]
    fn labels_are_sorted_and_classes_ordered() {
        let rows = rows();
        let (d, _) = decompose_records(&rows, GroupKey::Category(Category::Occupation), 1.3, &Admission::default()).unwrap();
        let labels: Vec<_> = d.rows.iter().map(|r| r.label.as_str()).collect();
        assert_eq!(labels, ["a", "b"]);
        let (d, _) = decompose_records(&rows, GroupKey::EmploymentClass, 1.3, &Admission::default()).unwrap();
        let labels: Vec<_> = d.rows.iter().map(|r| r.label.as_str()).collect();
        assert_eq!(labels, ["Formal", "Informal"]);
    }

    #[test]
    fn missing_mpce_is_an_error() {
        let mut rows = rows();
        rows[0].0.mpce = None;
        let err = decompose_records(&rows, GroupKey::EmploymentClass, 1.3, &Admission::default()).unwrap_err();
        assert_eq!(err, PipelineError::MissingMpce("1".into()));
    }

    #[test]
    fn nested_totals() {
        let (n, _) = nested_decompose_records(
            &rows(),
            GroupKey::EmploymentClass,
            GroupKey::Category(Category::Occupation),
            1.3,
            &Admission::default(),
        )
        .unwrap();
        assert!((n.total_percent - 100.0).abs() < 1e-9);
    }
}
