//! Two-level decomposition: an outer key (typically employment class) and an
//! inner key decomposed inside each outer group.
//!
//! Inner percentages are expressed against the grand total, so a leaf's
//! contribution is `100 * W_g * W_gj * I_gj / I`. Leaves, inner between-terms
//! and the outer between-term together add up to 100.

use serde::{Deserialize, Serialize};

use super::{decompose, decompose_against, DecomposeError, DecompositionResult, PartitionBuilder};
use crate::summation::NeumaierSum;

#[derive(Debug, Clone)]
pub struct NestedBuilder {
    outer: PartitionBuilder,
    inner_key: String,
    inner_labels: Vec<String>,
    inner: Vec<PartitionBuilder>,
}

impl NestedBuilder {
    pub fn new(outer_key: &str, inner_key: &str) -> Self {
        Self {
            outer: PartitionBuilder::new(outer_key),
            inner_key: inner_key.to_string(),
            inner_labels: Vec::new(),
            inner: Vec::new(),
        }
    }

    pub fn declare_outer(&mut self, label: &str) -> usize {
        let i = self.outer.declare(label);
        if i == self.inner.len() {
            let mut b = PartitionBuilder::new(self.inner_key.clone());
            for l in &self.inner_labels {
                b.declare(l);
            }
            self.inner.push(b);
        }
        i
    }

    /// Declares an inner label in every outer block.
    pub fn declare_inner(&mut self, label: &str) -> usize {
        match self.inner_labels.iter().position(|l| l == label) {
            Some(j) => j,
            None => {
                self.inner_labels.push(label.to_string());
                for b in &mut self.inner {
                    b.declare(label);
                }
                self.inner_labels.len() - 1
            }
        }
    }

    pub fn push(&mut self, outer: &str, inner: &str, value: f64, weight: f64) {
        let g = self.declare_outer(outer);
        let j = self.declare_inner(inner);
        self.push_index(g, j, value, weight);
    }

    pub fn push_index(&mut self, outer: usize, inner: usize, value: f64, weight: f64) {
        self.outer.push_index(outer, value, weight);
        self.inner[outer].push_index(inner, value, weight);
    }

    pub fn decompose(self, alpha: f64) -> Result<NestedDecompositionResult, DecomposeError> {
        let outer_partition = self.outer.build()?;
        let outer = decompose(&outer_partition, alpha)?;
        drop(outer_partition);

        let mut inner = Vec::with_capacity(self.inner.len());
        for (row, builder) in outer.rows.iter().zip(self.inner) {
            let result = if row.empty {
                None
            } else {
                let partition = builder.build()?;
                Some(decompose_against(&partition, alpha, row.index, row.w, outer.reference_index)?)
            };
            inner.push(InnerBlock {
                outer_label: row.label.clone(),
                outer_weight: row.w,
                result,
            });
        }

        let mut total = NeumaierSum::new();
        total.add(outer.share_between_percent);
        for r in inner.iter().filter_map(|b| b.result.as_ref()) {
            total.add(r.share_between_percent);
            r.rows.iter().for_each(|row| total.add(row.c_t_percent));
        }
        Ok(NestedDecompositionResult {
            alpha,
            outer,
            inner,
            total_percent: total.value(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InnerBlock {
    pub outer_label: String,
    pub outer_weight: f64,
    /// `None` when the outer group is empty.
    pub result: Option<DecompositionResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NestedDecompositionResult {
    pub alpha: f64,
    pub outer: DecompositionResult,
    pub inner: Vec<InnerBlock>,
    /// Sum of every leaf contribution and between-term; 100 up to round-off
    /// unless the total is degenerate.
    pub total_percent: f64,
}
