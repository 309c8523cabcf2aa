//! Declarative layout descriptors.
//!
//! A layout is a TOML document. Top-level keys:
//!
//! | key             | meaning                                                     |
//! |-----------------|-------------------------------------------------------------|
//! | `format`        | `"fixed-width"` or `"csv"`                                  |
//! | `record_length` | fixed-width only: bytes per record                          |
//! | `delimiter`     | csv only, optional single byte (default `,`)                |
//! | `absent`        | roles deliberately left unbound                             |
//! | `age_bands`     | four ascending lower bounds for G1..G4 (default 15,25,45,65)|
//!
//! followed by one `[[field]]` table per field with `name`, `kind`
//! (`decimal`, `integer` or `code`), either `start` + `width` (1-based
//! columns) or `column` (CSV header name), and optionally `role`, `scale`
//! (power-of-ten divisor for implied decimals) and `recode` (map name).

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Semantic slot a field fills in an [`ObservationRecord`](super::ObservationRecord).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    RecordId,
    Weight,
    Mpce,
    Occupation,
    Industry,
    Sector,
    Gender,
    SocialGroup,
    Age,
    Region,
    EnterpriseType,
    EnterpriseSize,
    JobStatus,
    SocialSecurity,
}

impl Role {
    /// Roles that every layout must bind or list under `absent`.
    pub const REQUIRED: [Role; 12] = [
        Role::Weight,
        Role::Mpce,
        Role::Occupation,
        Role::Industry,
        Role::Sector,
        Role::Gender,
        Role::SocialGroup,
        Role::Age,
        Role::EnterpriseType,
        Role::EnterpriseSize,
        Role::JobStatus,
        Role::SocialSecurity,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::RecordId => "record_id",
            Role::Weight => "weight",
            Role::Mpce => "mpce",
            Role::Occupation => "occupation",
            Role::Industry => "industry",
            Role::Sector => "sector",
            Role::Gender => "gender",
            Role::SocialGroup => "social_group",
            Role::Age => "age",
            Role::Region => "region",
            Role::EnterpriseType => "enterprise_type",
            Role::EnterpriseSize => "enterprise_size",
            Role::JobStatus => "job_status",
            Role::SocialSecurity => "social_security",
        }
    }

    fn accepts(self, kind: FieldKind) -> bool {
        match self {
            Role::Weight | Role::Mpce => matches!(kind, FieldKind::Decimal | FieldKind::Integer),
            Role::Age => kind == FieldKind::Integer,
            _ => true,
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    Decimal,
    Integer,
    Code,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FieldSource {
    /// 1-based start column and width in bytes.
    Fixed { start: usize, width: usize },
    Column(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldSpec {
    pub name: String,
    pub role: Option<Role>,
    pub source: FieldSource,
    pub kind: FieldKind,
    pub scale: Option<u64>,
    pub recode: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordFormat {
    FixedWidth { record_length: usize },
    Csv { delimiter: u8 },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LayoutError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unknown format `{0}` (expected `fixed-width` or `csv`)")]
    UnknownFormat(String),
    #[error("fixed-width layouts need a positive `record_length`")]
    MissingRecordLength,
    #[error("delimiter must be a single byte, got `{0}`")]
    BadDelimiter(String),
    #[error("duplicate field name `{0}`")]
    DuplicateField(String),
    #[error("field `{field}` must use {expected} for a {format} layout")]
    WrongSource {
        field: String,
        expected: &'static str,
        format: &'static str,
    },
    #[error("field `{0}` has zero width or a start column below 1")]
    EmptySpan(String),
    #[error("field `{field}` ends at column {end}, past record length {record_length}")]
    OutOfRecord {
        field: String,
        end: usize,
        record_length: usize,
    },
    #[error("overlapping spans: `{first}` and `{second}`")]
    Overlap { first: String, second: String },
    #[error("field `{field}`: scale {scale} is not a power of ten")]
    BadScale { field: String, scale: u64 },
    #[error("field `{field}`: scale only applies to decimal fields")]
    ScaleOnNonDecimal { field: String },
    #[error("field `{field}` of kind {kind:?} cannot fill role `{role}`")]
    KindMismatch {
        field: String,
        role: Role,
        kind: FieldKind,
    },
    #[error("role `{role}` is bound to both `{first}` and `{second}`")]
    RoleBoundTwice {
        role: Role,
        first: String,
        second: String,
    },
    #[error("role `{0}` is both bound and listed as absent")]
    BoundAndAbsent(Role),
    #[error("missing required role `{0}` (bind it or list it under `absent`)")]
    MissingRole(Role),
    #[error("age_bands must be four strictly ascending ages")]
    BadAgeBands,
}

/// Validated layout.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayoutSpec {
    pub format: RecordFormat,
    pub fields: Vec<FieldSpec>,
    pub absent: BTreeSet<Role>,
    pub age_bands: [u32; 4],
    bindings: BTreeMap<Role, usize>,
}

pub const DEFAULT_AGE_BANDS: [u32; 4] = [15, 25, 45, 65];

/// Example fixed-width layout binding every role against the built-in recodes.
pub const EXAMPLE_FIXED_WIDTH: &str = include_str!("../../data/layouts/fixed_width.toml");
/// The same fields as [`EXAMPLE_FIXED_WIDTH`] in CSV form.
pub const EXAMPLE_CSV: &str = include_str!("../../data/layouts/csv.toml");

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLayout {
    format: String,
    record_length: Option<usize>,
    delimiter: Option<String>,
    #[serde(default)]
    absent: Vec<Role>,
    age_bands: Option<Vec<u32>>,
    #[serde(default, rename = "field")]
    fields: Vec<RawField>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawField {
    name: String,
    kind: FieldKind,
    role: Option<Role>,
    start: Option<usize>,
    width: Option<usize>,
    column: Option<String>,
    scale: Option<u64>,
    recode: Option<String>,
}

fn position(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, column)
}

pub fn parse_layout(descriptor_text: &str) -> Result<LayoutSpec, LayoutError> {
    let raw: RawLayout = toml::from_str(descriptor_text).map_err(|e| {
        let (line, column) = e.span().map_or((0, 0), |s| position(descriptor_text, s.start));
        LayoutError::Syntax {
            line,
            column,
            message: e.message().to_string(),
        }
    })?;

    let format = match raw.format.as_str() {
        "fixed-width" => match raw.record_length {
            Some(n) if n > 0 => RecordFormat::FixedWidth { record_length: n },
            _ => return Err(LayoutError::MissingRecordLength),
        },
        "csv" => {
            let delimiter = match raw.delimiter.as_deref() {
                None => b',',
                Some(d) if d.len() == 1 => d.as_bytes()[0],
                Some(d) => return Err(LayoutError::BadDelimiter(d.to_string())),
            };
            RecordFormat::Csv { delimiter }
        }
        other => return Err(LayoutError::UnknownFormat(other.to_string())),
    };

    let fields = raw
        .fields
        .into_iter()
        .map(|f| {
            let source = match (format, f.start, f.width, f.column) {
                (RecordFormat::FixedWidth { .. }, Some(start), Some(width), None) => {
                    FieldSource::Fixed { start, width }
                }
                (RecordFormat::Csv { .. }, None, None, Some(column)) => FieldSource::Column(column),
                (RecordFormat::FixedWidth { .. }, ..) => {
                    return Err(LayoutError::WrongSource {
                        field: f.name,
                        expected: "`start` and `width`",
                        format: "fixed-width",
                    })
                }
                (RecordFormat::Csv { .. }, ..) => {
                    return Err(LayoutError::WrongSource {
                        field: f.name,
                        expected: "`column`",
                        format: "csv",
                    })
                }
            };
            Ok(FieldSpec {
                name: f.name,
                role: f.role,
                source,
                kind: f.kind,
                scale: f.scale,
                recode: f.recode,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let age_bands = match raw.age_bands {
        None => DEFAULT_AGE_BANDS,
        Some(b) => {
            let bands: [u32; 4] = b.try_into().map_err(|_| LayoutError::BadAgeBands)?;
            if !bands.windows(2).all(|w| w[0] < w[1]) {
                return Err(LayoutError::BadAgeBands);
            }
            bands
        }
    };

    LayoutSpec::new(format, fields, raw.absent, age_bands)
}

impl LayoutSpec {
    /// Validates and assembles a layout.
    pub fn new(
        format: RecordFormat,
        fields: Vec<FieldSpec>,
        absent: impl IntoIterator<Item = Role>,
        age_bands: [u32; 4],
    ) -> Result<Self, LayoutError> {
        let absent: BTreeSet<Role> = absent.into_iter().collect();

        let mut names = HashSet::new();
        for f in &fields {
            if !names.insert(f.name.as_str()) {
                return Err(LayoutError::DuplicateField(f.name.clone()));
            }
            if let Some(scale) = f.scale {
                if f.kind != FieldKind::Decimal {
                    return Err(LayoutError::ScaleOnNonDecimal { field: f.name.clone() });
                }
                if !is_power_of_ten(scale) {
                    return Err(LayoutError::BadScale {
                        field: f.name.clone(),
                        scale,
                    });
                }
            }
        }

        if let RecordFormat::FixedWidth { record_length } = format {
            let mut spans = Vec::new();
            for f in &fields {
                let FieldSource::Fixed { start, width } = f.source else {
                    return Err(LayoutError::WrongSource {
                        field: f.name.clone(),
                        expected: "`start` and `width`",
                        format: "fixed-width",
                    });
                };
                if start == 0 || width == 0 {
                    return Err(LayoutError::EmptySpan(f.name.clone()));
                }
                let end = start + width - 1;
                if end > record_length {
                    return Err(LayoutError::OutOfRecord {
                        field: f.name.clone(),
                        end,
                        record_length,
                    });
                }
                spans.push((start, end, &f.name));
            }
            spans.sort();
            for pair in spans.windows(2) {
                if pair[1].0 <= pair[0].1 {
                    return Err(LayoutError::Overlap {
                        first: pair[0].2.clone(),
                        second: pair[1].2.clone(),
                    });
                }
            }
        }

        let mut bindings = BTreeMap::new();
        for (i, f) in fields.iter().enumerate() {
            let Some(role) = f.role else { continue };
            if !role.accepts(f.kind) {
                return Err(LayoutError::KindMismatch {
                    field: f.name.clone(),
                    role,
                    kind: f.kind,
                });
            }
            if let Some(&prev) = bindings.get(&role) {
                let prev: &FieldSpec = &fields[prev];
                return Err(LayoutError::RoleBoundTwice {
                    role,
                    first: prev.name.clone(),
                    second: f.name.clone(),
                });
            }
            if absent.contains(&role) {
                return Err(LayoutError::BoundAndAbsent(role));
            }
            bindings.insert(role, i);
        }
        for role in Role::REQUIRED {
            if !bindings.contains_key(&role) && !absent.contains(&role) {
                return Err(LayoutError::MissingRole(role));
            }
        }

        Ok(Self {
            format,
            fields,
            absent,
            age_bands,
            bindings,
        })
    }

    /// Field bound to `role`, if any.
    pub fn field_for(&self, role: Role) -> Option<&FieldSpec> {
        self.bindings.get(&role).map(|&i| &self.fields[i])
    }

    pub fn bound_roles(&self) -> impl Iterator<Item = Role> + '_ {
        self.bindings.keys().copied()
    }

    /// Names of every recode map the layout references.
    pub fn recode_names(&self) -> BTreeSet<&str> {
        self.fields.iter().filter_map(|f| f.recode.as_deref()).collect()
    }
}

fn is_power_of_ten(mut n: u64) -> bool {
    if n == 0 {
        return false;
    }
    while n.is_multiple_of(10) {
        n /= 10;
    }
    n == 1
}
