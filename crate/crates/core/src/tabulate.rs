//! Weighted informality shares by category.
//!
//! A [`ShareTable`] gives, per category value, the formal/informal split
//! within that value and the value's share of all formal and of all informal
//! workers. A [`CrossTab`] splits the same counts by a second category.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{ObservationRecord, UnknownLabel};
use crate::summation::NeumaierSum;
use crate::taxonomy::{EmploymentClass, IndeterminatePolicy};

/// Label used for records with no value for the category.
pub const MISSING_LABEL: &str = "NA";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Occupation,
    Industry,
    Sector,
    Gender,
    SocialGroup,
    AgeGroup,
    Region,
}

impl Category {
    pub const ALL: &'static [Category] = &[
        Category::Occupation,
        Category::Industry,
        Category::Sector,
        Category::Gender,
        Category::SocialGroup,
        Category::AgeGroup,
        Category::Region,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Occupation => "occupation",
            Category::Industry => "industry",
            Category::Sector => "sector",
            Category::Gender => "gender",
            Category::SocialGroup => "social_group",
            Category::AgeGroup => "age_group",
            Category::Region => "region",
        }
    }

    pub fn label(self, r: &ObservationRecord) -> &str {
        let label = match self {
            Category::Occupation => r.occupation.as_deref(),
            Category::Industry => r.industry.as_deref(),
            Category::Region => r.region.as_deref(),
            Category::Sector => r.sector.map(|v| v.label()),
            Category::Gender => r.gender.map(|v| v.label()),
            Category::SocialGroup => r.social_group.map(|v| v.label()),
            Category::AgeGroup => r.age_group.map(|v| v.label()),
        };
        label.unwrap_or(MISSING_LABEL)
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = UnknownLabel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Category::ALL
            .iter()
            .copied()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| UnknownLabel {
                kind: "category",
                label: s.to_string(),
            })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TabulateError {
    #[error("no records left to tabulate")]
    EmptyInput,
    #[error("category `{0}` has zero total weight")]
    ZeroWeight(Category),
}

#[derive(Debug, Clone, Copy, Default)]
struct Counts {
    formal: NeumaierSum,
    informal: NeumaierSum,
}

impl Counts {
    fn add(&mut self, class: EmploymentClass, w: f64) {
        match class {
            EmploymentClass::Formal => self.formal.add(w),
            EmploymentClass::Informal => self.informal.add(w),
            EmploymentClass::Indeterminate => unreachable!("resolved before counting"),
        }
    }
}

fn percent(part: f64, whole: f64) -> f64 {
    if whole > 0.0 {
        100.0 * part / whole
    } else {
        0.0
    }
}

/// Weight dropped by the indeterminate policy, and the admitted rows.
struct Admitted<'a> {
    rows: Vec<(&'a ObservationRecord, EmploymentClass)>,
    excluded_weight: f64,
    total_weight: f64,
}

fn admit(rows: &[(ObservationRecord, EmploymentClass)], policy: IndeterminatePolicy) -> Admitted<'_> {
    let mut excluded = NeumaierSum::new();
    let mut total = NeumaierSum::new();
    let mut kept = Vec::with_capacity(rows.len());
    for (r, c) in rows {
        total.add(r.weight);
        match policy.resolve(*c) {
            Some(c) => kept.push((r, c)),
            None => excluded.add(r.weight),
        }
    }
    Admitted {
        rows: kept,
        excluded_weight: excluded.value(),
        total_weight: total.value(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShareRow {
    pub label: String,
    pub formal_weight: f64,
    pub informal_weight: f64,
    pub weighted_count: f64,
    pub pct_formal_within: f64,
    pub pct_informal_within: f64,
    pub pct_of_all_formal_across: f64,
    pub pct_of_all_informal_across: f64,
    /// Zero weight; within-shares are reported as 0.
    pub empty: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShareTable {
    pub category: Category,
    pub rows: Vec<ShareRow>,
    pub formal_weight: f64,
    pub informal_weight: f64,
    /// Weight of records dropped as indeterminate.
    pub excluded_weight: f64,
    /// `excluded_weight` over the weight of every input record.
    pub excluded_weight_share: f64,
}

fn share_rows(by_label: BTreeMap<String, Counts>) -> (Vec<ShareRow>, f64, f64) {
    let (mut formal_total, mut informal_total) = (NeumaierSum::new(), NeumaierSum::new());
    let totals: Vec<(String, f64, f64)> = by_label
        .into_iter()
        .map(|(label, c)| {
            let (f, i) = (c.formal.value(), c.informal.value());
            formal_total.add(f);
            informal_total.add(i);
            (label, f, i)
        })
        .collect();
    let (ft, it) = (formal_total.value(), informal_total.value());
    let rows = totals
        .into_iter()
        .map(|(label, f, i)| {
            let n = f + i;
            ShareRow {
                label,
                formal_weight: f,
                informal_weight: i,
                weighted_count: n,
                pct_formal_within: percent(f, n),
                pct_informal_within: percent(i, n),
                pct_of_all_formal_across: percent(f, ft),
                pct_of_all_informal_across: percent(i, it),
                empty: n == 0.0,
            }
        })
        .collect();
    (rows, ft, it)
}

/// Within and across shares for each value of `category`, on survey weights.
pub fn share_table(
    rows: &[(ObservationRecord, EmploymentClass)],
    category: Category,
    policy: IndeterminatePolicy,
) -> Result<ShareTable, TabulateError> {
    let admitted = admit(rows, policy);
    if admitted.rows.is_empty() {
        return Err(TabulateError::EmptyInput);
    }
    let mut by_label: BTreeMap<String, Counts> = BTreeMap::new();
    for (r, c) in &admitted.rows {
        by_label.entry(category.label(r).to_string()).or_default().add(*c, r.weight);
    }
    let (rows, formal_weight, informal_weight) = share_rows(by_label);
    if formal_weight + informal_weight <= 0.0 {
        return Err(TabulateError::ZeroWeight(category));
    }
    Ok(ShareTable {
        category,
        rows,
        formal_weight,
        informal_weight,
        excluded_weight: admitted.excluded_weight,
        excluded_weight_share: admitted.excluded_weight / admitted.total_weight.max(f64::MIN_POSITIVE),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossCell {
    pub primary: String,
    pub secondary: String,
    pub formal_weight: f64,
    pub informal_weight: f64,
    pub pct_informal_within: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossTab {
    pub primary: Category,
    pub secondary: Category,
    /// Sorted by primary then secondary label; only combinations that occur.
    pub cells: Vec<CrossCell>,
    pub excluded_weight: f64,
    pub excluded_weight_share: f64,
}

impl CrossTab {
    /// `(label, formal, informal)` weights per primary value, summed over
    /// secondary values.
    pub fn marginals(&self) -> Vec<(String, f64, f64)> {
        let mut m: BTreeMap<&str, Counts> = BTreeMap::new();
        for c in &self.cells {
            let e = m.entry(&c.primary).or_default();
            e.formal.add(c.formal_weight);
            e.informal.add(c.informal_weight);
        }
        m.into_iter()
            .map(|(l, c)| (l.to_string(), c.formal.value(), c.informal.value()))
            .collect()
    }
}

pub fn cross_tab(
    rows: &[(ObservationRecord, EmploymentClass)],
    primary: Category,
    secondary: Category,
    policy: IndeterminatePolicy,
) -> Result<CrossTab, TabulateError> {
    let admitted = admit(rows, policy);
    if admitted.rows.is_empty() {
        return Err(TabulateError::EmptyInput);
    }
    let mut cells: BTreeMap<(String, String), Counts> = BTreeMap::new();
    for (r, c) in &admitted.rows {
        let key = (primary.label(r).to_string(), secondary.label(r).to_string());
        cells.entry(key).or_default().add(*c, r.weight);
    }
    let cells: Vec<CrossCell> = cells
        .into_iter()
        .map(|((p, s), c)| {
            let (f, i) = (c.formal.value(), c.informal.value());
            CrossCell {
                primary: p,
                secondary: s,
                formal_weight: f,
                informal_weight: i,
                pct_informal_within: percent(i, f + i),
            }
        })
        .collect();
    if cells.iter().all(|c| c.formal_weight + c.informal_weight <= 0.0) {
        return Err(TabulateError::ZeroWeight(primary));
    }
    Ok(CrossTab {
        primary,
        secondary,
        cells,
        excluded_weight: admitted.excluded_weight,
        excluded_weight_share: admitted.excluded_weight / admitted.total_weight.max(f64::MIN_POSITIVE),
    })
}
