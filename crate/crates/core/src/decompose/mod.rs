//! Population-subgroup decomposition of GE indices.
//!
//! For groups `j` with population share `P_j`, income share `R_j` and index
//! `I_j`, the within-group term is `I_w = sum_j W_j I_j` with
//! `W_j = R_j^alpha P_j^(1-alpha)`, and the between-group term is the residual
//! `I_b = I - I_w`.

pub mod nested;
pub mod table;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stats::{ge_index, StatsError, WeightedSample};
use crate::summation::NeumaierSum;

pub use nested::{InnerBlock, NestedBuilder, NestedDecompositionResult};
pub use table::{parse_fixture, validate_published_table, FixtureError, PublishedTable, ValidationReport};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecomposeError {
    #[error("no admitted records to decompose")]
    EmptyInput,
    #[error("group `{label}`: {source}")]
    Group { label: String, source: StatsError },
    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// Accumulates `(label, value, weight)` triples for a [`GroupPartition`].
#[derive(Debug, Clone, Default)]
pub struct PartitionBuilder {
    key: String,
    labels: Vec<String>,
    index: HashMap<String, usize>,
    values: Vec<Vec<f64>>,
    weights: Vec<Vec<f64>>,
    pooled_values: Vec<f64>,
    pooled_weights: Vec<f64>,
}

impl PartitionBuilder {
    pub fn new(key: impl Into<String>) -> Self {
        Self {
            key: key.into(),
            ..Self::default()
        }
    }

    /// Declares a group so it appears in the output even if nothing is pushed
    /// to it. Returns its index; declaring an existing label is a no-op.
    pub fn declare(&mut self, label: &str) -> usize {
        if let Some(&i) = self.index.get(label) {
            return i;
        }
        let i = self.labels.len();
        self.labels.push(label.to_string());
        self.index.insert(label.to_string(), i);
        self.values.push(Vec::new());
        self.weights.push(Vec::new());
        i
    }

    pub fn push(&mut self, label: &str, value: f64, weight: f64) {
        let i = self.declare(label);
        self.push_index(i, value, weight);
    }

    /// Pushes to a group by the index `declare` returned.
    pub fn push_index(&mut self, group: usize, value: f64, weight: f64) {
        self.values[group].push(value);
        self.weights[group].push(weight);
        self.pooled_values.push(value);
        self.pooled_weights.push(weight);
    }

    pub fn reserve(&mut self, additional: usize) {
        self.pooled_values.reserve(additional);
        self.pooled_weights.reserve(additional);
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn build(self) -> Result<GroupPartition, DecomposeError> {
        if self.pooled_values.is_empty() {
            return Err(DecomposeError::EmptyInput);
        }
        let pooled = WeightedSample::new(self.pooled_values, self.pooled_weights).map_err(|e| match e {
            StatsError::EmptySample => DecomposeError::EmptyInput,
            e => DecomposeError::Stats(e),
        })?;
        let (total_weight, mu) = (pooled.total_weight(), pooled.mean());
        let groups = self
            .labels
            .into_iter()
            .zip(self.values.into_iter().zip(self.weights))
            .map(|(label, (values, weights))| {
                let sample = match WeightedSample::new(values, weights) {
                    Ok(s) => Some(s),
                    Err(StatsError::EmptySample) => None,
                    Err(source) => return Err(DecomposeError::Group { label, source }),
                };
                Ok(Group::new(label, sample, total_weight, mu))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(GroupPartition {
            key: self.key,
            pooled,
            groups,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Group {
    pub label: String,
    /// `None` for a group with no positive weight.
    pub sample: Option<WeightedSample>,
    pub weight: f64,
    pub p: f64,
    pub r: f64,
    /// Group mean; 0 for an empty group.
    pub mu: f64,
}

impl Group {
    fn new(label: String, sample: Option<WeightedSample>, total_weight: f64, pooled_mean: f64) -> Self {
        match &sample {
            Some(s) => {
                let p = s.total_weight() / total_weight;
                let mu = s.mean();
                Group {
                    label,
                    weight: s.total_weight(),
                    p,
                    r: p * mu / pooled_mean,
                    mu,
                    sample,
                }
            }
            None => Group {
                label,
                sample,
                weight: 0.0,
                p: 0.0,
                r: 0.0,
                mu: 0.0,
            },
        }
    }

    pub fn is_empty(&self) -> bool {
        self.sample.is_none()
    }
}

/// A pooled sample split by one categorical key.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupPartition {
    pub key: String,
    pub pooled: WeightedSample,
    pub groups: Vec<Group>,
}

impl GroupPartition {
    /// Builds a partition from `(label, value, weight)` items in order.
    pub fn from_labeled<'a, I>(key: &str, items: I) -> Result<Self, DecomposeError>
    where
        I: IntoIterator<Item = (&'a str, f64, f64)>,
    {
        let mut b = PartitionBuilder::new(key);
        for (label, y, w) in items {
            b.push(label, y, w);
        }
        b.build()
    }
}

/// `W_j = R_j^alpha P_j^(1-alpha)`; zero when `P_j = 0`.
pub fn subgroup_weight(p: f64, r: f64, alpha: f64) -> f64 {
    if p == 0.0 {
        0.0
    } else {
        r.powf(alpha) * p.powf(1.0 - alpha)
    }
}

/// Dual form `W_j = P_j (mu_j/mu)^alpha`.
pub fn subgroup_weight_from_means(p: f64, mu_j: f64, mu: f64, alpha: f64) -> f64 {
    if p == 0.0 {
        0.0
    } else {
        p * (mu_j / mu).powf(alpha)
    }
}

pub fn subgroup_weights(partition: &GroupPartition, alpha: f64) -> Vec<f64> {
    partition.groups.iter().map(|g| subgroup_weight(g.p, g.r, alpha)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRow {
    pub label: String,
    pub p: f64,
    pub r: f64,
    pub mu: f64,
    pub w: f64,
    pub index: f64,
    pub c_w: f64,
    pub c_t_percent: f64,
    pub empty: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DecompositionWarning {
    /// Total index is zero; percentage contributions are reported as 0.
    DegenerateTotal,
    /// Residual between-group term came out negative.
    NegativeBetween { value: f64 },
    EmptyGroup { label: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionResult {
    pub key: String,
    pub alpha: f64,
    pub total: f64,
    pub within: f64,
    pub between: f64,
    pub rows: Vec<GroupRow>,
    pub share_within_percent: f64,
    pub share_between_percent: f64,
    /// Factor applied to every percentage (the outer-group weight for a
    /// nested block, otherwise 1).
    pub scale: f64,
    /// Index the percentages are expressed against.
    pub reference_index: f64,
    pub warnings: Vec<DecompositionWarning>,
}

impl DecompositionResult {
    pub fn is_degenerate(&self) -> bool {
        self.warnings.contains(&DecompositionWarning::DegenerateTotal)
    }
}

pub fn decompose(partition: &GroupPartition, alpha: f64) -> Result<DecompositionResult, DecomposeError> {
    let total = ge_index(&partition.pooled, alpha)?.value;
    decompose_against(partition, alpha, total, 1.0, total)
}

fn nudge_between(total: f64, within: f64) -> Option<f64> {
    let between = total - within;
    if within + between == total {
        return Some(between);
    }
    let (mut up, mut down) = (between, between);
    for _ in 0..4 {
        up = up.next_up();
        down = down.next_down();
        if within + up == total {
            return Some(up);
        }
        if within + down == total {
            return Some(down);
        }
    }
    None
}

/// Splits `total` into `(within, total - within)` so that the two add back to
/// `total` exactly in floating point.
///
/// The between term alone cannot always be chosen: when `within` has a bit
/// below the last place of `total`, round-half-to-even makes some sums
/// unreachable. `within` then moves by an ulp or two, well inside the
/// rounding error of the sum that produced it.
pub fn exact_split(total: f64, within: f64) -> (f64, f64) {
    let (mut up, mut down) = (within, within);
    if let Some(b) = nudge_between(total, within) {
        return (within, b);
    }
    for _ in 0..4 {
        up = up.next_up();
        down = down.next_down();
        for w in [up, down] {
            if let Some(b) = nudge_between(total, w) {
                return (w, b);
            }
        }
    }
    (within, total - within)
}

/// Decomposition whose percentages are `100 * scale * x / reference`.
pub(crate) fn decompose_against(
    partition: &GroupPartition,
    alpha: f64,
    total: f64,
    scale: f64,
    reference: f64,
) -> Result<DecompositionResult, DecomposeError> {
    let mut warnings = Vec::new();
    let mut rows = Vec::with_capacity(partition.groups.len());
    for g in &partition.groups {
        let index = match &g.sample {
            Some(s) => ge_index(s, alpha)
                .map_err(|source| DecomposeError::Group {
                    label: g.label.clone(),
                    source,
                })?
                .value,
            None => {
                warnings.push(DecompositionWarning::EmptyGroup { label: g.label.clone() });
                0.0
            }
        };
        let w = subgroup_weight(g.p, g.r, alpha);
        rows.push(GroupRow {
            label: g.label.clone(),
            p: g.p,
            r: g.r,
            mu: g.mu,
            w,
            index,
            c_w: w * index,
            c_t_percent: 0.0,
            empty: g.is_empty(),
        });
    }
    let within: f64 = rows.iter().map(|r| r.c_w).collect::<NeumaierSum>().value();
    let (within, between) = exact_split(total, within);
    if between < 0.0 {
        log::warn!("negative between-group term {between:e} for key `{}`", partition.key);
        warnings.push(DecompositionWarning::NegativeBetween { value: between });
    }

    let percent = |x: f64| if reference > 0.0 { 100.0 * scale * x / reference } else { 0.0 };
    if reference <= 0.0 {
        warnings.push(DecompositionWarning::DegenerateTotal);
    }
    for row in &mut rows {
        row.c_t_percent = percent(row.c_w);
    }
    Ok(DecompositionResult {
        key: partition.key.clone(),
        alpha,
        total,
        within,
        between,
        rows,
        share_within_percent: percent(within),
        share_between_percent: percent(between),
        scale,
        reference_index: reference,
        warnings,
    })
}
