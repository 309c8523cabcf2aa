//! Serialises records back into a layout's on-disk form.

use std::io::Write;

use thiserror::Error;

use super::layout::{FieldKind, FieldSource, FieldSpec, LayoutSpec, RecordFormat, Role};
use super::recode::RecodeSet;
use super::record::ObservationRecord;

#[derive(Debug, Error)]
pub enum WriteError {
    #[error("field `{field}`: `{text}` does not fit in {width} columns")]
    Overflow {
        field: String,
        text: String,
        width: usize,
    },
    #[error("field `{field}`: label `{label}` has no source code in recode map `{map}`")]
    Unencodable {
        field: String,
        label: String,
        map: String,
    },
    #[error("recode map `{0}` referenced by the layout is missing")]
    MissingRecode(String),
    #[error("field `{field}`: {value} is not an integer")]
    NotIntegral { field: String, value: f64 },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn unknown_blank(e: WriteError, unknown: &str) -> Result<String, WriteError> {
    match e {
        WriteError::Unencodable { label, .. } if label == unknown => Ok(String::new()),
        e => Err(e),
    }
}

pub struct RecordWriter<'a> {
    layout: &'a LayoutSpec,
    recodes: &'a RecodeSet,
}

impl<'a> RecordWriter<'a> {
    pub fn new(layout: &'a LayoutSpec, recodes: &'a RecodeSet) -> Result<Self, WriteError> {
        for name in layout.recode_names() {
            if recodes.get(name).is_none() {
                return Err(WriteError::MissingRecode(name.to_string()));
            }
        }
        Ok(Self { layout, recodes })
    }

    fn field_text(&self, field: &FieldSpec, rec: &ObservationRecord) -> Result<String, WriteError> {
        let Some(role) = field.role else { return Ok(String::new()) };
        let number = |v: f64| -> Result<String, WriteError> {
            match (field.kind, field.scale) {
                (FieldKind::Integer, _) => {
                    if v.fract() != 0.0 {
                        return Err(WriteError::NotIntegral {
                            field: field.name.clone(),
                            value: v,
                        });
                    }
                    Ok(format!("{}", v as i64))
                }
                (_, Some(scale)) => {
                    let s = scale as f64;
                    let k = (v * s).round();
                    // implied decimals only when they reproduce the value exactly
                    if k / s == v && k.abs() < 9e15 {
                        Ok(format!("{}", k as i64))
                    } else {
                        Ok(format!("{v}"))
                    }
                }
                _ => Ok(format!("{v}")),
            }
        };
        let coded = |label: Option<&str>| -> Result<String, WriteError> {
            let Some(label) = label else { return Ok(String::new()) };
            match &field.recode {
                None => Ok(label.to_string()),
                Some(map_name) => {
                    let map = self.recodes.get(map_name).expect("checked in new");
                    map.encode(label).ok_or_else(|| WriteError::Unencodable {
                        field: field.name.clone(),
                        label: label.to_string(),
                        map: map_name.clone(),
                    })
                }
            }
        };

        match role {
            Role::RecordId => Ok(rec.record_id.clone()),
            Role::Weight => number(rec.weight),
            Role::Mpce => rec.mpce.map_or(Ok(String::new()), number),
            Role::Age => Ok(rec.age.map(|a| a.to_string()).unwrap_or_default()),
            Role::Occupation => coded(rec.occupation.as_deref()),
            Role::Industry => coded(rec.industry.as_deref()),
            Role::Region => coded(rec.region.as_deref()),
            Role::Sector => coded(rec.sector.map(|v| v.label())),
            Role::Gender => coded(rec.gender.map(|v| v.label())),
            Role::SocialGroup => coded(rec.social_group.map(|v| v.label())),
            // blank reads back as Unknown when no code carries that label
            Role::EnterpriseType => coded(Some(rec.enterprise.ownership.label())).or_else(|e| unknown_blank(e, "Unknown")),
            Role::EnterpriseSize => coded(Some(rec.enterprise.size_class.label())).or_else(|e| unknown_blank(e, "Unknown")),
            Role::JobStatus => coded(Some(rec.job.status.label())).or_else(|e| unknown_blank(e, "Unknown")),
            Role::SocialSecurity => {
                coded(Some(rec.job.social_security.label())).or_else(|e| unknown_blank(e, "Unknown"))
            }
        }
    }

    /// One fixed-width line without the trailing newline. Implied-decimal
    /// numbers are zero-padded, other numbers right-aligned, codes left-aligned.
    pub fn fixed_width_line(&self, rec: &ObservationRecord) -> Result<String, WriteError> {
        let RecordFormat::FixedWidth { record_length } = self.layout.format else {
            panic!("fixed_width_line called on a csv layout");
        };
        let mut line = vec![b' '; record_length];
        for f in &self.layout.fields {
            let FieldSource::Fixed { start, width } = f.source else { unreachable!() };
            let text = self.field_text(f, rec)?;
            if text.len() > width {
                return Err(WriteError::Overflow {
                    field: f.name.clone(),
                    text,
                    width,
                });
            }
            let padded = match f.kind {
                FieldKind::Code => format!("{text:<width$}"),
                _ if text.is_empty() => " ".repeat(width),
                FieldKind::Decimal if f.scale.is_some() && !text.contains(['.', 'e', 'E']) => {
                    match text.strip_prefix('-') {
                        Some(digits) => format!("-{digits:0>w$}", w = width - 1),
                        None => format!("{text:0>width$}"),
                    }
                }
                _ => format!("{text:>width$}"),
            };
            line[start - 1..start - 1 + width].copy_from_slice(padded.as_bytes());
        }
        Ok(String::from_utf8(line).expect("ascii padding around utf-8 fields"))
    }

    pub fn write_fixed_width<W: Write>(&self, out: &mut W, records: &[ObservationRecord]) -> Result<(), WriteError> {
        for rec in records {
            writeln!(out, "{}", self.fixed_width_line(rec)?)?;
        }
        Ok(())
    }

    /// Header row from the layout's column names, then one row per record.
    pub fn write_csv<W: Write>(&self, out: W, records: &[ObservationRecord]) -> Result<(), WriteError> {
        let RecordFormat::Csv { delimiter } = self.layout.format else {
            panic!("write_csv called on a fixed-width layout");
        };
        let mut w = csv::WriterBuilder::new().delimiter(delimiter).from_writer(out);
        let header: Vec<&str> = self
            .layout
            .fields
            .iter()
            .map(|f| match &f.source {
                FieldSource::Column(c) => c.as_str(),
                FieldSource::Fixed { .. } => unreachable!(),
            })
            .collect();
        w.write_record(&header)?;
        for rec in records {
            let row = self
                .layout
                .fields
                .iter()
                .map(|f| self.field_text(f, rec))
                .collect::<Result<Vec<_>, _>>()?;
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}
