//! Code-to-label recode maps.
//!
//! A recode file is a directive line followed by a two-column CSV:
//!
//! ```text
//! #default=reject
//! source_code,target_label
//! 1,Rural
//! 2,Urban
//! ```
//!
//! The directive is one of `#default=reject`, `#default=pass-through` or
//! `#default=fixed-label:<label>`. Further lines starting with `#` are
//! comments. The map's name is supplied by the caller (the CLI uses the file
//! stem).

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RecodeError {
    #[error("recode map `{name}`: first line must be a `#default=...` directive")]
    MissingDirective { name: String },
    #[error("recode map `{name}`: unrecognised default policy `{policy}`")]
    BadDirective { name: String, policy: String },
    #[error("recode map `{name}`: default=fixed-label requires a label")]
    MissingFixedLabel { name: String },
    #[error("recode map `{name}`: duplicate source code `{code}`")]
    DuplicateCode { name: String, code: String },
    #[error("recode map `{name}`: header must be `source_code,target_label`")]
    BadHeader { name: String },
    #[error("recode map `{name}` line {line}: {message}")]
    Malformed {
        name: String,
        line: u64,
        message: String,
    },
}

/// What to do with a source code that has no entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DefaultPolicy {
    Reject,
    PassThrough,
    FixedLabel(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecodeMap {
    name: String,
    entries: BTreeMap<String, String>,
    default: DefaultPolicy,
}

impl RecodeMap {
    pub fn new<I, S, T>(name: &str, entries: I, default: DefaultPolicy) -> Result<Self, RecodeError>
    where
        I: IntoIterator<Item = (S, T)>,
        S: Into<String>,
        T: Into<String>,
    {
        if matches!(&default, DefaultPolicy::FixedLabel(l) if l.is_empty()) {
            return Err(RecodeError::MissingFixedLabel { name: name.into() });
        }
        let mut map = BTreeMap::new();
        for (code, label) in entries {
            match map.entry(code.into()) {
                Entry::Vacant(v) => {
                    v.insert(label.into());
                }
                Entry::Occupied(o) => {
                    return Err(RecodeError::DuplicateCode {
                        name: name.into(),
                        code: o.key().clone(),
                    })
                }
            }
        }
        Ok(Self {
            name: name.into(),
            entries: map,
            default,
        })
    }

    pub fn parse(name: &str, text: &str) -> Result<Self, RecodeError> {
        let text = text.strip_prefix('\u{feff}').unwrap_or(text);
        let (first, rest) = text.split_once('\n').unwrap_or((text, ""));
        let directive = first
            .trim()
            .strip_prefix('#')
            .and_then(|d| d.trim().strip_prefix("default="))
            .ok_or_else(|| RecodeError::MissingDirective { name: name.into() })?;
        let default = match directive.trim() {
            "reject" => DefaultPolicy::Reject,
            "pass-through" => DefaultPolicy::PassThrough,
            d => match d.strip_prefix("fixed-label") {
                Some(label) => {
                    let label = label.strip_prefix(':').unwrap_or("").trim();
                    DefaultPolicy::FixedLabel(label.to_string())
                }
                None => {
                    return Err(RecodeError::BadDirective {
                        name: name.into(),
                        policy: d.to_string(),
                    })
                }
            },
        };

        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(rest.as_bytes());
        let header = reader.headers().map_err(|e| RecodeError::Malformed {
            name: name.into(),
            line: 2,
            message: e.to_string(),
        })?;
        if header.len() != 2 || &header[0] != "source_code" || &header[1] != "target_label" {
            return Err(RecodeError::BadHeader { name: name.into() });
        }
        let mut entries = Vec::new();
        for row in reader.records() {
            let row = row.map_err(|e| RecodeError::Malformed {
                name: name.into(),
                line: e.position().map_or(0, |p| p.line() + 1),
                message: e.to_string(),
            })?;
            entries.push((row[0].to_string(), row[1].to_string()));
        }
        Self::new(name, entries, default)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn default_policy(&self) -> &DefaultPolicy {
        &self.default
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// Target label for `code`, or `None` when the default policy rejects it.
    pub fn lookup<'a>(&'a self, code: &'a str) -> Option<&'a str> {
        match self.entries.get(code) {
            Some(label) => Some(label),
            None => match &self.default {
                DefaultPolicy::Reject => None,
                DefaultPolicy::PassThrough => Some(code),
                DefaultPolicy::FixedLabel(label) => Some(label),
            },
        }
    }

    /// A source code that maps to `label`: the smallest matching entry, or the
    /// label itself under pass-through.
    pub fn encode(&self, label: &str) -> Option<String> {
        if let Some((code, _)) = self.entries.iter().find(|(_, l)| l.as_str() == label) {
            return Some(code.clone());
        }
        match &self.default {
            DefaultPolicy::PassThrough if !self.entries.contains_key(label) => Some(label.to_string()),
            _ => None,
        }
    }
}

/// Named collection of recode maps.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RecodeSet {
    maps: BTreeMap<String, RecodeMap>,
}

const BUILTIN: &[(&str, &str)] = &[
    ("enterprise_size", include_str!("../../data/recodes/enterprise_size.csv")),
    ("enterprise_type", include_str!("../../data/recodes/enterprise_type.csv")),
    ("gender", include_str!("../../data/recodes/gender.csv")),
    ("industry", include_str!("../../data/recodes/industry.csv")),
    ("job_status", include_str!("../../data/recodes/job_status.csv")),
    ("occupation", include_str!("../../data/recodes/occupation.csv")),
    ("sector", include_str!("../../data/recodes/sector.csv")),
    ("social_group", include_str!("../../data/recodes/social_group.csv")),
    ("social_security", include_str!("../../data/recodes/social_security.csv")),
];

impl RecodeSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Default maps for NSSO employment-unemployment extracts. The same files
    /// ship under `crates/core/data/recodes/` for editing.
    pub fn builtin() -> Self {
        let mut set = Self::new();
        for (name, text) in BUILTIN {
            set.insert(RecodeMap::parse(name, text).expect("bundled recode maps are valid"));
        }
        set
    }

    /// Adds `map`, replacing any map of the same name.
    pub fn insert(&mut self, map: RecodeMap) {
        self.maps.insert(map.name.clone(), map);
    }

    pub fn get(&self, name: &str) -> Option<&RecodeMap> {
        self.maps.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.maps.keys().map(String::as_str)
    }
}
