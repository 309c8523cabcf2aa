//! Line-oriented decoding of fixed-width and CSV extracts.

use std::borrow::Cow;
use std::collections::BTreeMap;
use std::io::{self, BufRead};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::layout::{FieldKind, FieldSource, FieldSpec, LayoutSpec, RecordFormat, Role};
use super::recode::{RecodeMap, RecodeSet};
use super::record::{
    AgeGroup, EnterpriseProfile, JobProfile, JobStatus, ObservationRecord, Ownership, SizeClass,
    SocialSecurity, UnknownLabel,
};
use super::IngestError;

/// Why a single record was rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorCause {
    /// Code not present in its recode map and the map's default rejects.
    Recode,
    NonpositiveMpce,
    BadNumber,
    /// Recoded label outside the role's closed enumeration.
    BadLabel,
    NegativeWeight,
    LineLength,
    ColumnCount,
    Encoding,
}

impl ErrorCause {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCause::Recode => "recode",
            ErrorCause::NonpositiveMpce => "nonpositive-mpce",
            ErrorCause::BadNumber => "bad-number",
            ErrorCause::BadLabel => "bad-label",
            ErrorCause::NegativeWeight => "negative-weight",
            ErrorCause::LineLength => "line-length",
            ErrorCause::ColumnCount => "column-count",
            ErrorCause::Encoding => "encoding",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordError {
    /// 1-based physical line in the input.
    pub line: u64,
    pub field: Option<String>,
    pub cause: ErrorCause,
    pub detail: String,
    /// Survey weight, when it parsed before the failure.
    pub weight: Option<f64>,
}

pub type RecordResult = Result<ObservationRecord, RecordError>;

struct Failure {
    field: Option<String>,
    cause: ErrorCause,
    detail: String,
}

impl Failure {
    fn at(field: &FieldSpec, cause: ErrorCause, detail: impl Into<String>) -> Self {
        Failure {
            field: Some(field.name.clone()),
            cause,
            detail: detail.into(),
        }
    }
}

/// Turns raw field texts into records under a layout.
struct Decoder<'a> {
    layout: &'a LayoutSpec,
    recodes: Vec<Option<&'a RecodeMap>>,
    roles: BTreeMap<Role, usize>,
}

impl<'a> Decoder<'a> {
    fn new(layout: &'a LayoutSpec, recodes: &'a RecodeSet) -> Result<Self, IngestError> {
        let recodes = layout
            .fields
            .iter()
            .map(|f| match &f.recode {
                None => Ok(None),
                Some(name) => recodes
                    .get(name)
                    .map(Some)
                    .ok_or_else(|| IngestError::MissingRecode(name.clone())),
            })
            .collect::<Result<_, _>>()?;
        let roles = layout
            .fields
            .iter()
            .enumerate()
            .filter_map(|(i, f)| f.role.map(|r| (r, i)))
            .collect();
        Ok(Self { layout, recodes, roles })
    }

    /// `text(i)` yields the raw text of field `i`.
    fn decode<'t, F>(&self, line: u64, text: F) -> RecordResult
    where
        F: Fn(usize) -> Result<Cow<'t, str>, Failure>,
    {
        let mut weight = None;
        self.decode_fields(line, &text, &mut weight).map_err(|f| RecordError {
            line,
            field: f.field,
            cause: f.cause,
            detail: f.detail,
            weight,
        })
    }

    fn decode_fields<'t, F>(&self, line: u64, text: &F, weight_out: &mut Option<f64>) -> Result<ObservationRecord, Failure>
    where
        F: Fn(usize) -> Result<Cow<'t, str>, Failure>,
    {
        let fields = &self.layout.fields;

        let weight = match self.roles.get(&Role::Weight) {
            None => 1.0,
            Some(&i) => {
                let f = &fields[i];
                let raw = text(i)?;
                let v = raw.trim();
                let w = parse_number(f, v).ok_or_else(|| Failure::at(f, ErrorCause::BadNumber, format!("weight `{v}`")))?;
                if w < 0.0 {
                    return Err(Failure::at(f, ErrorCause::NegativeWeight, format!("weight {w}")));
                }
                w
            }
        };
        *weight_out = Some(weight);

        let mpce = match self.roles.get(&Role::Mpce) {
            None => None,
            Some(&i) => {
                let f = &fields[i];
                let raw = text(i)?;
                let v = raw.trim();
                if v.is_empty() {
                    return Err(Failure::at(f, ErrorCause::NonpositiveMpce, "missing mpce"));
                }
                let y = parse_number(f, v).ok_or_else(|| Failure::at(f, ErrorCause::BadNumber, format!("mpce `{v}`")))?;
                if y <= 0.0 {
                    return Err(Failure::at(f, ErrorCause::NonpositiveMpce, format!("mpce {y}")));
                }
                Some(y)
            }
        };

        let record_id = match self.roles.get(&Role::RecordId) {
            Some(&i) => text(i)?.trim().to_string(),
            None => line.to_string(),
        };

        let age = match self.roles.get(&Role::Age) {
            None => None,
            Some(&i) => {
                let f = &fields[i];
                let raw = text(i)?;
                let v = raw.trim();
                if v.is_empty() {
                    None
                } else {
                    Some(v.parse::<u32>().map_err(|_| Failure::at(f, ErrorCause::BadNumber, format!("age `{v}`")))?)
                }
            }
        };

        Ok(ObservationRecord {
            record_id,
            weight,
            mpce,
            occupation: self.label(Role::Occupation, text)?,
            industry: self.label(Role::Industry, text)?,
            sector: self.closed(Role::Sector, text)?,
            gender: self.closed(Role::Gender, text)?,
            social_group: self.closed(Role::SocialGroup, text)?,
            age,
            age_group: age.and_then(|a| AgeGroup::from_age(a, &self.layout.age_bands)),
            region: self.label(Role::Region, text)?,
            enterprise: EnterpriseProfile {
                ownership: self.closed(Role::EnterpriseType, text)?.unwrap_or(Ownership::Unknown),
                size_class: self.closed(Role::EnterpriseSize, text)?.unwrap_or(SizeClass::Unknown),
            },
            job: JobProfile {
                status: self.closed(Role::JobStatus, text)?.unwrap_or(JobStatus::Unknown),
                social_security: self.closed(Role::SocialSecurity, text)?.unwrap_or(SocialSecurity::Unknown),
            },
        })
    }

    /// Recoded label for a categorical role; blank means missing.
    fn label<'t, F>(&self, role: Role, text: &F) -> Result<Option<String>, Failure>
    where
        F: Fn(usize) -> Result<Cow<'t, str>, Failure>,
    {
        let Some(&i) = self.roles.get(&role) else { return Ok(None) };
        let f = &self.layout.fields[i];
        let raw = text(i)?;
        let code = match f.kind {
            FieldKind::Code => raw.trim_end(),
            _ => raw.trim(),
        };
        if code.is_empty() {
            return Ok(None);
        }
        let out = match self.recodes[i] {
            None => code,
            Some(map) => map.lookup(code).ok_or_else(|| {
                Failure::at(f, ErrorCause::Recode, format!("code `{code}` not in recode map `{}`", map.name()))
            })?,
        };
        Ok((!out.is_empty()).then(|| out.to_string()))
    }

    /// Label parsed into a closed enumeration.
    fn closed<'t, T, F>(&self, role: Role, text: &F) -> Result<Option<T>, Failure>
    where
        T: FromStr<Err = UnknownLabel>,
        F: Fn(usize) -> Result<Cow<'t, str>, Failure>,
    {
        let Some(label) = self.label(role, text)? else { return Ok(None) };
        label.parse::<T>().map(Some).map_err(|e| {
            let f = &self.layout.fields[self.roles[&role]];
            Failure::at(f, ErrorCause::BadLabel, e.to_string())
        })
    }
}

/// Decimal and integer parsing with implied decimals.
///
/// Text containing a decimal point or exponent is taken literally and the
/// field's scale is ignored; bare digit strings are divided by the scale.
pub(crate) fn parse_number(field: &FieldSpec, text: &str) -> Option<f64> {
    if text.is_empty() {
        return None;
    }
    let explicit = text.contains(['.', 'e', 'E']);
    let v = match field.kind {
        FieldKind::Integer if !explicit => text.parse::<i64>().ok()? as f64,
        FieldKind::Integer => return None,
        _ if explicit => text.parse::<f64>().ok()?,
        _ => {
            let n = text.parse::<i64>().ok()? as f64;
            match field.scale {
                Some(s) => n / s as f64,
                None => n,
            }
        }
    };
    v.is_finite().then_some(v)
}

fn fixed_slice<'a>(line: &'a [u8], field: &FieldSpec) -> Result<Cow<'a, str>, Failure> {
    let FieldSource::Fixed { start, width } = field.source else {
        unreachable!("fixed-width layout validated")
    };
    let from = (start - 1).min(line.len());
    let to = (start - 1 + width).min(line.len());
    std::str::from_utf8(&line[from..to])
        .map(Cow::Borrowed)
        .map_err(|_| Failure::at(field, ErrorCause::Encoding, "field is not valid UTF-8"))
}

fn decode_fixed(decoder: &Decoder<'_>, record_length: usize, line_no: u64, line: &[u8]) -> RecordResult {
    if line.len() > record_length {
        return Err(RecordError {
            line: line_no,
            field: None,
            cause: ErrorCause::LineLength,
            detail: format!("{} bytes, record length {record_length}", line.len()),
            weight: None,
        });
    }
    let fields = &decoder.layout.fields;
    decoder.decode(line_no, |i| fixed_slice(line, &fields[i]))
}

fn decode_csv(decoder: &Decoder<'_>, columns: &[usize], width: usize, line_no: u64, row: &csv::ByteRecord) -> RecordResult {
    if row.len() != width {
        return Err(RecordError {
            line: line_no,
            field: None,
            cause: ErrorCause::ColumnCount,
            detail: format!("{} columns, header has {width}", row.len()),
            weight: None,
        });
    }
    let fields = &decoder.layout.fields;
    decoder.decode(line_no, |i| {
        std::str::from_utf8(&row[columns[i]])
            .map(Cow::Borrowed)
            .map_err(|_| Failure::at(&fields[i], ErrorCause::Encoding, "field is not valid UTF-8"))
    })
}

fn csv_columns(layout: &LayoutSpec, headers: &csv::ByteRecord) -> Result<Vec<usize>, IngestError> {
    layout
        .fields
        .iter()
        .map(|f| {
            let FieldSource::Column(name) = &f.source else {
                unreachable!("csv layout validated")
            };
            headers
                .iter()
                .position(|h| h == name.as_bytes())
                .ok_or_else(|| IngestError::MissingColumn(name.clone()))
        })
        .collect()
}

enum Source<R: BufRead> {
    Fixed {
        lines: io::Split<R>,
        line_no: u64,
        record_length: usize,
    },
    Csv {
        reader: csv::Reader<R>,
        columns: Vec<usize>,
        width: usize,
        row: csv::ByteRecord,
    },
}

/// Streaming reader: one item per input record, in input order.
pub struct RecordReader<'a, R: BufRead> {
    decoder: Decoder<'a>,
    source: Source<R>,
}

fn csv_reader<R: BufRead>(input: R, delimiter: u8) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .flexible(true)
        .has_headers(true)
        .from_reader(input)
}

fn csv_error(e: csv::Error) -> IngestError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => IngestError::Io(io),
        other => IngestError::Io(io::Error::new(io::ErrorKind::InvalidData, format!("{other:?}"))),
    }
}

/// Opens a streaming record reader over `input`.
pub fn read_records<'a, R: BufRead>(
    input: R,
    layout: &'a LayoutSpec,
    recodes: &'a RecodeSet,
) -> Result<RecordReader<'a, R>, IngestError> {
    let decoder = Decoder::new(layout, recodes)?;
    let source = match layout.format {
        RecordFormat::FixedWidth { record_length } => Source::Fixed {
            lines: input.split(b'\n'),
            line_no: 0,
            record_length,
        },
        RecordFormat::Csv { delimiter } => {
            let mut reader = csv_reader(input, delimiter);
            let headers = reader.byte_headers().map_err(csv_error)?.clone();
            let columns = csv_columns(layout, &headers)?;
            Source::Csv {
                reader,
                columns,
                width: headers.len(),
                row: csv::ByteRecord::new(),
            }
        }
    };
    Ok(RecordReader { decoder, source })
}

fn strip_cr(mut line: Vec<u8>) -> Vec<u8> {
    if line.last() == Some(&b'\r') {
        line.pop();
    }
    line
}

impl<R: BufRead> Iterator for RecordReader<'_, R> {
    type Item = Result<RecordResult, IngestError>;

    fn next(&mut self) -> Option<Self::Item> {
        match &mut self.source {
            Source::Fixed {
                lines,
                line_no,
                record_length,
            } => {
                let line = match lines.next()? {
                    Ok(l) => strip_cr(l),
                    Err(e) => return Some(Err(IngestError::Io(e))),
                };
                *line_no += 1;
                Some(Ok(decode_fixed(&self.decoder, *record_length, *line_no, &line)))
            }
            Source::Csv {
                reader,
                columns,
                width,
                row,
            } => match reader.read_byte_record(row) {
                Ok(false) => None,
                Ok(true) => {
                    let line_no = row.position().map_or(0, |p| p.line());
                    Some(Ok(decode_csv(&self.decoder, columns, *width, line_no, row)))
                }
                Err(e) => Some(Err(csv_error(e))),
            },
        }
    }
}

/// Reads the whole input, then decodes records in parallel. Output order
/// matches input order.
pub fn read_all(input: impl BufRead, layout: &LayoutSpec, recodes: &RecodeSet) -> Result<Vec<RecordResult>, IngestError> {
    let decoder = Decoder::new(layout, recodes)?;
    match layout.format {
        RecordFormat::FixedWidth { record_length } => {
            let lines = input
                .split(b'\n')
                .map(|l| l.map(strip_cr))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(lines
                .par_iter()
                .enumerate()
                .map(|(i, line)| decode_fixed(&decoder, record_length, i as u64 + 1, line))
                .collect())
        }
        RecordFormat::Csv { delimiter } => {
            let mut reader = csv_reader(input, delimiter);
            let headers = reader.byte_headers().map_err(csv_error)?.clone();
            let columns = csv_columns(layout, &headers)?;
            let rows = reader
                .byte_records()
                .collect::<Result<Vec<_>, _>>()
                .map_err(csv_error)?;
            Ok(rows
                .par_iter()
                .map(|row| {
                    let line_no = row.position().map_or(0, |p| p.line());
                    decode_csv(&decoder, &columns, headers.len(), line_no, row)
                })
                .collect())
        }
    }
}
