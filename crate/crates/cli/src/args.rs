use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use informality::pipeline::GroupKey;
use informality::tabulate::Category;
use informality::IndeterminatePolicy;

const EXIT_CODES: &str = "\
Exit codes:
  0  success
  1  internal error
  2  configuration error (bad flags, missing or invalid layout/recode/policy files, refusing to overwrite)
  3  input could not be read or parsed
  4  degenerate statistics (no admitted records, zero weight, zero total inequality)
  5  published table failed validation";

#[derive(Debug, Parser)]
#[command(name = "informality", version, about = "Formal/informal worker classification and GE inequality decomposition", after_help = EXIT_CODES)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Extract {
    FixedWidth,
    Csv,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Input file; raw extract when --layout is given, classified CSV otherwise.
    #[arg(long, global = true, env = "INFORMALITY_INPUT", value_delimiter = ',')]
    pub input: Vec<PathBuf>,

    /// TOML layout describing the raw extract.
    #[arg(long, global = true, env = "INFORMALITY_LAYOUT")]
    pub layout: Option<PathBuf>,

    /// Recode CSV files or directories of them; the file stem names the map.
    #[arg(long, global = true, env = "INFORMALITY_RECODES", value_delimiter = ',')]
    pub recodes: Vec<PathBuf>,

    /// Decision-table overrides (sector_class,job_status,social_security,employment_class).
    #[arg(long, global = true, env = "INFORMALITY_POLICY")]
    pub policy: Option<PathBuf>,

    #[arg(long, global = true, default_value_t = informality::DEFAULT_ALPHA)]
    pub alpha: f64,

    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,

    /// What to do with workers the rules cannot classify.
    #[arg(long, global = true, default_value = "exclude", value_parser = parse_policy)]
    pub indeterminate: IndeterminatePolicy,

    /// Keep only workers at least this old.
    #[arg(long, global = true)]
    pub min_age: Option<u32>,

    /// Drop the top PERCENT of the weighted mpce distribution before decomposing.
    #[arg(long, global = true, value_name = "PERCENT")]
    pub trim_top: Option<f64>,

    #[arg(long, global = true, env = "INFORMALITY_OUT_DIR", default_value = ".")]
    pub out_dir: PathBuf,

    /// Overwrite existing outputs.
    #[arg(long, global = true)]
    pub force: bool,
}

fn parse_policy(s: &str) -> Result<IndeterminatePolicy, String> {
    s.parse().map_err(|e| format!("{e}"))
}

fn parse_key(s: &str) -> Result<GroupKey, String> {
    s.parse().map_err(|e| format!("{e}"))
}

fn parse_category(s: &str) -> Result<Category, String> {
    s.parse().map_err(|e| format!("{e}"))
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a raw extract and report rejected records.
    Ingest,
    /// Classify workers and write a classified CSV (JSON lines with --format json).
    Classify,
    /// Weighted formal/informal shares by category.
    Tabulate {
        #[arg(long, value_parser = parse_category)]
        category: Category,
        /// Split each category value by a second category.
        #[arg(long, value_parser = parse_category)]
        cross: Option<Category>,
    },
    /// Single-level GE decomposition of mpce.
    Decompose {
        #[arg(long, default_value = "employment_class", value_parser = parse_key)]
        category: GroupKey,
    },
    /// Two-level decomposition: inner key within each outer group.
    NestedDecompose {
        #[arg(long, default_value = "employment_class", value_parser = parse_key)]
        outer_key: GroupKey,
        #[arg(long, default_value = "occupation", value_parser = parse_key)]
        inner_key: GroupKey,
    },
    /// Recompute a published decomposition table and check its arithmetic.
    ValidateTable {
        /// Table CSV; the bundled table when omitted.
        #[arg(long)]
        fixture: Option<PathBuf>,
    },
    /// Write a seeded synthetic raw extract plus its layout.
    Synth {
        #[arg(long, env = "INFORMALITY_SEED", default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 10_000)]
        records: usize,
        #[arg(long, value_enum, default_value_t = Extract::FixedWidth)]
        extract: Extract,
    },
}
