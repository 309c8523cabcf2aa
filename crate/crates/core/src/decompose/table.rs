//! Consistency check of a published decomposition table.
//!
//! The fixture is a CSV with columns `level,label,P,R,GEI,C_w_published,C_t_published`.
//! `level` is `outer` or `inner:<outer label>`. Group rows carry `P`, `R` and
//! the group index in `GEI`. Three marker labels carry block aggregates, with
//! the index value in `GEI`:
//!
//! * `@total`: the block's total index (`I` for the outer block, `I_g` for an
//!   inner block);
//! * `@within`, `@between`: the within and between terms and their published
//!   percentage contributions.
//!
//! Published values are rounded, so recomputed identities are checked against
//! a rounding allowance of half a unit in the last published place per term.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::subgroup_weight;

pub const C_W_TOLERANCE: f64 = 0.001;
pub const C_T_TOLERANCE: f64 = 0.15;
pub const INDEX_TOLERANCE: f64 = 0.001;
const HALF_UNIT_INDEX: f64 = 0.5e-3;
const HALF_UNIT_PERCENT: f64 = 0.5e-2;

const HEADER: [&str; 7] = ["level", "label", "P", "R", "GEI", "C_w_published", "C_t_published"];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FixtureError {
    #[error("fixture header must be `{}`", HEADER.join(","))]
    BadHeader,
    #[error("fixture line {line}: {message}")]
    Malformed { line: u64, message: String },
    #[error("fixture has no outer block with an @total row")]
    MissingOuterTotal,
    #[error("fixture line {line}: inner block `{parent}` has no matching outer row")]
    UnknownParent { line: u64, parent: String },
    #[error("fixture line {line}: duplicate row `{label}` in block `{block}`")]
    DuplicateRow { line: u64, block: String, label: String },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Marker {
    pub index: Option<f64>,
    pub c_t: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PublishedGroup {
    pub label: String,
    pub p: f64,
    pub r: f64,
    pub gei: f64,
    pub c_w: Option<f64>,
    pub c_t: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PublishedBlock {
    /// `outer`, or `inner:<label>`.
    pub name: String,
    /// Outer label for an inner block.
    pub parent: Option<String>,
    pub total: Option<Marker>,
    pub within: Option<Marker>,
    pub between: Option<Marker>,
    pub groups: Vec<PublishedGroup>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PublishedTable {
    pub outer: PublishedBlock,
    pub inner: Vec<PublishedBlock>,
}

/// The bundled fixture of the formal/informal by occupation decomposition
/// (NSSO round 68, alpha = 1.3).
pub const BUNDLED_FIXTURE: &str = include_str!("../../fixtures/table1.csv");

fn number(line: u64, column: &str, text: &str) -> Result<Option<f64>, FixtureError> {
    let text = text.trim();
    if text.is_empty() || text == "-" {
        return Ok(None);
    }
    text.parse::<f64>().map(Some).map_err(|_| FixtureError::Malformed {
        line,
        message: format!("column {column}: `{text}` is not a number"),
    })
}

pub fn parse_fixture(text: &str) -> Result<PublishedTable, FixtureError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| FixtureError::Malformed {
        line: 1,
        message: e.to_string(),
    })?;
    if header.iter().ne(HEADER) {
        return Err(FixtureError::BadHeader);
    }

    let mut blocks: BTreeMap<String, PublishedBlock> = BTreeMap::new();
    let mut order: Vec<String> = Vec::new();
    let mut lines: BTreeMap<String, u64> = BTreeMap::new();
    for row in reader.records() {
        let row = row.map_err(|e| FixtureError::Malformed {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = row.position().map_or(0, |p| p.line());
        let level = &row[0];
        let parent = match level {
            "outer" => None,
            l => match l.strip_prefix("inner:") {
                Some(p) if !p.trim().is_empty() => Some(p.trim().to_string()),
                _ => {
                    return Err(FixtureError::Malformed {
                        line,
                        message: format!("level `{l}` is neither `outer` nor `inner:<label>`"),
                    })
                }
            },
        };
        let block = blocks.entry(level.to_string()).or_insert_with(|| {
            order.push(level.to_string());
            lines.insert(level.to_string(), line);
            PublishedBlock {
                name: level.to_string(),
                parent,
                ..PublishedBlock::default()
            }
        });
        let label = row[1].to_string();
        let (p, r, gei) = (number(line, "P", &row[2])?, number(line, "R", &row[3])?, number(line, "GEI", &row[4])?);
        let (c_w, c_t) = (
            number(line, "C_w_published", &row[5])?,
            number(line, "C_t_published", &row[6])?,
        );
        let duplicate = || FixtureError::DuplicateRow {
            line,
            block: level.to_string(),
            label: label.clone(),
        };
        let marker = Marker { index: gei, c_t };
        let slot = match label.as_str() {
            "@total" => Some(&mut block.total),
            "@within" => Some(&mut block.within),
            "@between" => Some(&mut block.between),
            _ => None,
        };
        match slot {
            Some(slot) => {
                if slot.replace(marker).is_some() {
                    return Err(duplicate());
                }
            }
            None => {
                if block.groups.iter().any(|g| g.label == label) {
                    return Err(duplicate());
                }
                let (Some(p), Some(r), Some(gei)) = (p, r, gei) else {
                    return Err(FixtureError::Malformed {
                        line,
                        message: format!("group row `{label}` needs P, R and GEI"),
                    });
                };
                block.groups.push(PublishedGroup {
                    label,
                    p,
                    r,
                    gei,
                    c_w,
                    c_t,
                });
            }
        }
    }

    let outer = blocks.remove("outer").ok_or(FixtureError::MissingOuterTotal)?;
    if outer.total.and_then(|m| m.index).is_none() {
        return Err(FixtureError::MissingOuterTotal);
    }
    let mut inner = Vec::new();
    for name in order.into_iter().filter(|n| n != "outer") {
        let block = blocks.remove(&name).expect("every ordered name has a block");
        let parent = block.parent.clone().expect("inner blocks have a parent");
        if !outer.groups.iter().any(|g| g.label == parent) {
            return Err(FixtureError::UnknownParent {
                line: lines[&name],
                parent,
            });
        }
        inner.push(block);
    }
    Ok(PublishedTable { outer, inner })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    #[serde(rename = "C_w")]
    ContributionWithin,
    #[serde(rename = "C_t")]
    ContributionTotal,
    Index,
}

impl Quantity {
    pub fn as_str(self) -> &'static str {
        match self {
            Quantity::ContributionWithin => "C_w",
            Quantity::ContributionTotal => "C_t",
            Quantity::Index => "index",
        }
    }
}

/// One published cell against its recomputed value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellCheck {
    pub block: String,
    pub label: String,
    pub quantity: Quantity,
    pub published: f64,
    pub recomputed: f64,
    pub deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// An identity among published values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub block: String,
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecomputedRow {
    pub block: String,
    pub label: String,
    pub p: f64,
    pub r: f64,
    pub gei: f64,
    pub w: f64,
    pub c_w: f64,
    pub c_t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Finding {
    /// An inner block's published total differs from its outer row's index.
    IndexMismatch {
        block: String,
        block_total: f64,
        outer_row_index: f64,
        difference: f64,
    },
    IdentityFailed {
        block: String,
        name: String,
        deviation: f64,
    },
    CellOutOfTolerance {
        block: String,
        label: String,
        quantity: Quantity,
        deviation: f64,
    },
    /// The inner between-share recomputed two ways: as the parent's
    /// contribution less the leaves, and as `100 W_g I_b / I` from the
    /// published inner between index.
    BetweenRoute {
        block: String,
        published: f64,
        residual_route: f64,
        scaled_route: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub alpha: f64,
    pub total_index: f64,
    pub rows: Vec<RecomputedRow>,
    pub cells: Vec<CellCheck>,
    pub identities: Vec<IdentityCheck>,
    pub findings: Vec<Finding>,
    pub max_c_w_deviation: f64,
    pub max_c_t_deviation: f64,
    /// Every published `C_w` and `C_t` cell is reproduced within tolerance.
    pub consistent: bool,
}

struct Checker {
    cells: Vec<CellCheck>,
    identities: Vec<IdentityCheck>,
}

impl Checker {
    fn cell(&mut self, block: &str, label: &str, quantity: Quantity, published: Option<f64>, recomputed: f64, tolerance: f64) {
        if let Some(published) = published {
            let deviation = (recomputed - published).abs();
            self.cells.push(CellCheck {
                block: block.to_string(),
                label: label.to_string(),
                quantity,
                published,
                recomputed,
                deviation,
                tolerance,
                pass: deviation <= tolerance + 1e-12,
            });
        }
    }

    fn identity(&mut self, block: &str, name: &str, lhs: f64, rhs: f64, tolerance: f64) {
        let deviation = (lhs - rhs).abs();
        self.identities.push(IdentityCheck {
            block: block.to_string(),
            name: name.to_string(),
            lhs,
            rhs,
            deviation,
            tolerance,
            pass: deviation <= tolerance + 1e-12,
        });
    }
}

struct BlockOutcome {
    sum_c_w: f64,
    sum_c_t: f64,
}

/// Recomputes `W`, `C_w` and `C_t` from the published `(P, R, GEI)` triples.
///
/// Outer rows give `C_t = 100 C_w / I`; inner rows are scaled by their outer
/// row's recomputed weight, `C_t = 100 W_g C_w / I`.
pub fn validate_published_table(table: &PublishedTable, alpha: f64) -> ValidationReport {
    let total_index = table.outer.total.and_then(|m| m.index).expect("checked by parse_fixture");
    let mut check = Checker {
        cells: Vec::new(),
        identities: Vec::new(),
    };
    let mut rows = Vec::new();
    let mut findings = Vec::new();

    let mut recompute_block = |block: &PublishedBlock, scale: f64, check: &mut Checker| -> BlockOutcome {
        let (mut sum_c_w, mut sum_c_t) = (0.0, 0.0);
        for g in &block.groups {
            let w = subgroup_weight(g.p, g.r, alpha);
            let c_w = w * g.gei;
            let c_t = 100.0 * scale * c_w / total_index;
            sum_c_w += c_w;
            sum_c_t += c_t;
            check.cell(&block.name, &g.label, Quantity::ContributionWithin, g.c_w, c_w, C_W_TOLERANCE);
            check.cell(&block.name, &g.label, Quantity::ContributionTotal, g.c_t, c_t, C_T_TOLERANCE);
            rows.push(RecomputedRow {
                block: block.name.clone(),
                label: g.label.clone(),
                p: g.p,
                r: g.r,
                gei: g.gei,
                w,
                c_w,
                c_t,
            });
        }
        BlockOutcome { sum_c_w, sum_c_t }
    };

    let outer = &table.outer;
    let n = outer.groups.len() as f64;
    let o = recompute_block(outer, 1.0, &mut check);
    if let Some(m) = outer.within {
        check.cell("outer", "@within", Quantity::Index, m.index, o.sum_c_w, HALF_UNIT_INDEX * n);
        check.cell("outer", "@within", Quantity::ContributionTotal, m.c_t, o.sum_c_t, C_T_TOLERANCE);
    }
    if let Some(m) = outer.between {
        check.cell("outer", "@between", Quantity::Index, m.index, total_index - o.sum_c_w, HALF_UNIT_INDEX * (n + 1.0));
        check.cell("outer", "@between", Quantity::ContributionTotal, m.c_t, 100.0 - o.sum_c_t, C_T_TOLERANCE);
    }
    published_identities(&mut check, outer, Some(total_index), Some(100.0));

    let mut grand = outer.between.and_then(|m| m.c_t).unwrap_or(0.0);
    let mut grand_terms = 1.0;
    for block in &table.inner {
        let parent_label = block.parent.as_deref().expect("inner block");
        let parent = outer.groups.iter().find(|g| g.label == parent_label).expect("checked by parse_fixture");
        let parent_w = subgroup_weight(parent.p, parent.r, alpha);
        let parent_c_t = 100.0 * parent_w * parent.gei / total_index;
        let n = block.groups.len() as f64;
        let b = recompute_block(block, parent_w, &mut check);

        if let Some(block_total) = block.total.and_then(|m| m.index) {
            check.cell(&block.name, "@total", Quantity::Index, Some(block_total), parent.gei, INDEX_TOLERANCE);
            if (block_total - parent.gei).abs() > INDEX_TOLERANCE + 1e-12 {
                findings.push(Finding::IndexMismatch {
                    block: block.name.clone(),
                    block_total,
                    outer_row_index: parent.gei,
                    difference: block_total - parent.gei,
                });
            }
        }
        if let Some(m) = block.within {
            check.cell(&block.name, "@within", Quantity::Index, m.index, b.sum_c_w, HALF_UNIT_INDEX * n);
            check.cell(&block.name, "@within", Quantity::ContributionTotal, m.c_t, b.sum_c_t, C_T_TOLERANCE);
        }
        if let Some(m) = block.between {
            check.cell(&block.name, "@between", Quantity::Index, m.index, parent.gei - b.sum_c_w, HALF_UNIT_INDEX * (n + 1.0));
            let residual_route = parent_c_t - b.sum_c_t;
            check.cell(&block.name, "@between", Quantity::ContributionTotal, m.c_t, residual_route, C_T_TOLERANCE);
            if let (Some(published), Some(index)) = (m.c_t, m.index) {
                findings.push(Finding::BetweenRoute {
                    block: block.name.clone(),
                    published,
                    residual_route,
                    scaled_route: 100.0 * parent_w * index / total_index,
                });
            }
            grand += m.c_t.unwrap_or(0.0);
            grand_terms += 1.0;
        }
        published_identities(&mut check, block, block.total.and_then(|m| m.index), parent.c_t);
        for c_t in block.groups.iter().filter_map(|g| g.c_t) {
            grand += c_t;
            grand_terms += 1.0;
        }
    }
    if !table.inner.is_empty() {
        check.identity("all", "leaves+between=100", grand, 100.0, HALF_UNIT_PERCENT * grand_terms);
    }

    for c in check.cells.iter().filter(|c| !c.pass && c.label != "@total") {
        findings.push(Finding::CellOutOfTolerance {
            block: c.block.clone(),
            label: c.label.clone(),
            quantity: c.quantity,
            deviation: c.deviation,
        });
    }
    for i in check.identities.iter().filter(|i| !i.pass) {
        findings.push(Finding::IdentityFailed {
            block: i.block.clone(),
            name: i.name.clone(),
            deviation: i.deviation,
        });
    }

    let max_of = |q: Quantity| {
        check
            .cells
            .iter()
            .filter(|c| c.quantity == q)
            .map(|c| c.deviation)
            .fold(0.0, f64::max)
    };
    let consistent = check
        .cells
        .iter()
        .filter(|c| c.quantity != Quantity::Index)
        .all(|c| c.pass);
    ValidationReport {
        alpha,
        total_index,
        rows,
        max_c_w_deviation: max_of(Quantity::ContributionWithin),
        max_c_t_deviation: max_of(Quantity::ContributionTotal),
        cells: check.cells,
        identities: check.identities,
        findings,
        consistent,
    }
}

/// Identities among a block's published numbers. `parent_c_t` is what the
/// block's contributions should add up to.
fn published_identities(check: &mut Checker, block: &PublishedBlock, total: Option<f64>, parent_c_t: Option<f64>) {
    let n = block.groups.len() as f64;
    if block.groups.is_empty() {
        return;
    }
    let name = &block.name;
    let sum_p: f64 = block.groups.iter().map(|g| g.p).sum();
    let sum_r: f64 = block.groups.iter().map(|g| g.r).sum();
    check.identity(name, "sum P=1", sum_p, 1.0, HALF_UNIT_INDEX * n);
    check.identity(name, "sum R=1", sum_r, 1.0, HALF_UNIT_INDEX * n);

    let within = block.within.and_then(|m| m.index);
    let between = block.between.and_then(|m| m.index);
    if let (Some(w), Some(b), Some(t)) = (within, between, total) {
        check.identity(name, "I_w+I_b=I", w + b, t, HALF_UNIT_INDEX * 3.0);
    }
    let Some(target) = parent_c_t else { return };
    let between_c_t = block.between.and_then(|m| m.c_t);
    let group_c_t: Option<Vec<f64>> = block.groups.iter().map(|g| g.c_t).collect();
    if let (Some(cs), Some(b)) = (group_c_t, between_c_t) {
        let lhs = cs.iter().sum::<f64>() + b;
        check.identity(name, "sum C_t+between", lhs, target, HALF_UNIT_PERCENT * (n + 2.0));
    }
    if let (Some(w), Some(b)) = (block.within.and_then(|m| m.c_t), between_c_t) {
        check.identity(name, "within%+between%", w + b, target, HALF_UNIT_PERCENT * 3.0);
    }
}
