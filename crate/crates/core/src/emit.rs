//! Flat CSV renderings of results. Indices and shares carry 3 decimals,
//! percentages 2; JSON output (via serde) keeps full precision.

use std::io::Write;

use crate::decompose::table::ValidationReport;
use crate::decompose::{DecompositionResult, NestedDecompositionResult};
use crate::tabulate::{CrossTab, ShareTable};

fn fixed(x: f64, places: usize) -> String {
    let s = format!("{x:.places$}");
    // "-0.000" reads as a sign error in a table
    if s.starts_with('-') && s[1..].bytes().all(|b| b == b'0' || b == b'.') {
        s[1..].to_string()
    } else {
        s
    }
}

fn index(x: f64) -> String {
    fixed(x, 3)
}

fn pct(x: f64) -> String {
    fixed(x, 2)
}

pub const DECOMPOSITION_HEADER: [&str; 10] = ["block", "row", "C_w", "GEI", "P", "R", "W", "W/B", "Index", "C_t"];

fn decomposition_block<W: Write>(
    w: &mut csv::Writer<W>,
    block: &str,
    d: &DecompositionResult,
    total_share: Option<f64>,
) -> csv::Result<()> {
    let blank = String::new;
    w.write_record([
        block.to_string(),
        "@total".into(),
        blank(),
        blank(),
        blank(),
        blank(),
        blank(),
        blank(),
        index(d.total),
        total_share.map(pct).unwrap_or_default(),
    ])?;
    for (label, value, share) in [
        ("@within", d.within, d.share_within_percent),
        ("@between", d.between, d.share_between_percent),
    ] {
        w.write_record([
            block.to_string(),
            label.into(),
            blank(),
            blank(),
            blank(),
            blank(),
            blank(),
            index(value),
            blank(),
            pct(share),
        ])?;
    }
    for r in &d.rows {
        w.write_record([
            block.to_string(),
            r.label.clone(),
            index(r.c_w),
            index(r.index),
            index(r.p),
            index(r.r),
            index(r.w),
            blank(),
            blank(),
            pct(r.c_t_percent),
        ])?;
    }
    Ok(())
}

pub fn write_decomposition_csv<W: Write>(out: W, d: &DecompositionResult) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(DECOMPOSITION_HEADER)?;
    let total = if d.is_degenerate() { 0.0 } else { 100.0 };
    decomposition_block(&mut w, "outer", d, Some(total))?;
    w.flush()?;
    Ok(())
}

/// Outer block, then one block per outer group named `inner:<label>`.
pub fn write_nested_csv<W: Write>(out: W, n: &NestedDecompositionResult) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(DECOMPOSITION_HEADER)?;
    let total = if n.outer.is_degenerate() { 0.0 } else { 100.0 };
    decomposition_block(&mut w, "outer", &n.outer, Some(total))?;
    for b in &n.inner {
        if let Some(r) = &b.result {
            decomposition_block(&mut w, &format!("inner:{}", b.outer_label), r, None)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub const SHARE_HEADER: [&str; 8] = [
    "label",
    "within_formal",
    "within_informal",
    "across_formal",
    "across_informal",
    "formal_weight",
    "informal_weight",
    "weighted_count",
];

pub fn write_share_table_csv<W: Write>(out: W, t: &ShareTable) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SHARE_HEADER)?;
    for r in &t.rows {
        w.write_record([
            r.label.clone(),
            pct(r.pct_formal_within),
            pct(r.pct_informal_within),
            pct(r.pct_of_all_formal_across),
            pct(r.pct_of_all_informal_across),
            r.formal_weight.to_string(),
            r.informal_weight.to_string(),
            r.weighted_count.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_cross_tab_csv<W: Write>(out: W, x: &CrossTab) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([x.primary.as_str(), x.secondary.as_str(), "formal_weight", "informal_weight", "within_informal"])?;
    for c in &x.cells {
        w.write_record([
            c.primary.clone(),
            c.secondary.clone(),
            c.formal_weight.to_string(),
            c.informal_weight.to_string(),
            pct(c.pct_informal_within),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One line per checked cell.
pub fn write_validation_csv<W: Write>(out: W, v: &ValidationReport) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["block", "label", "quantity", "published", "recomputed", "deviation", "tolerance", "pass"])?;
    for c in &v.cells {
        w.write_record([
            c.block.clone(),
            c.label.clone(),
            c.quantity.as_str().to_string(),
            c.published.to_string(),
            format!("{:.6}", c.recomputed),
            format!("{:.6}", c.deviation),
            c.tolerance.to_string(),
            c.pass.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
