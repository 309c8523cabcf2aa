use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use informality::decompose::table::{parse_fixture, validate_published_table, BUNDLED_FIXTURE};
use informality::decompose::DecompositionWarning;
use informality::emit;
use informality::ingest::{self, IngestReport, LayoutSpec, ObservationRecord, RecodeMap, RecodeSet, RecordError};
use informality::pipeline::{decompose_records, nested_decompose_records, Admission, GroupKey, PipelineError};
use informality::tabulate::{cross_tab, share_table};
use informality::taxonomy::{classify_dataset, Tally};
use informality::{DecisionTable, EmploymentClass};
use serde_json::{json, Map, Value};

use crate::args::{Command, Common, Format};
use crate::fail::{Exit, Fail, OrExit, Outcome};
use crate::output::{describe_input, Outputs};
use crate::synth;

type Rows = Vec<(ObservationRecord, EmploymentClass)>;

fn read_file(path: &Path) -> Outcome<Vec<u8>> {
    fs::read(path).or_exit(Exit::Config, || format!("reading {}", path.display()))
}

fn load_layout(common: &Common, inputs: &mut Vec<Value>) -> Outcome<Option<LayoutSpec>> {
    let Some(path) = &common.layout else { return Ok(None) };
    let bytes = read_file(path)?;
    inputs.push(describe_input("layout", path, &bytes));
    let text = String::from_utf8(bytes).or_exit(Exit::Config, || format!("layout {} is not UTF-8", path.display()))?;
    ingest::parse_layout(&text)
        .map(Some)
        .or_exit(Exit::Config, || format!("parsing layout {}", path.display()))
}

fn recode_files(path: &Path) -> Outcome<Vec<PathBuf>> {
    if !path.is_dir() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut files = Vec::new();
    for entry in fs::read_dir(path).or_exit(Exit::Config, || format!("listing {}", path.display()))? {
        let p = entry.or_exit(Exit::Config, || format!("listing {}", path.display()))?.path();
        if p.extension().is_some_and(|e| e == "csv") {
            files.push(p);
        }
    }
    files.sort();
    Ok(files)
}

/// Built-in maps, replaced by name by any supplied files.
fn load_recodes(common: &Common, inputs: &mut Vec<Value>) -> Outcome<RecodeSet> {
    let mut set = RecodeSet::builtin();
    for path in &common.recodes {
        for file in recode_files(path)? {
            let bytes = read_file(&file)?;
            inputs.push(describe_input("recode", &file, &bytes));
            let name = file
                .file_stem()
                .and_then(|s| s.to_str())
                .ok_or_else(|| Fail::msg(Exit::Config, format!("cannot name a recode map after {}", file.display())))?;
            let text = String::from_utf8_lossy(&bytes);
            let map = RecodeMap::parse(name, &text).or_exit(Exit::Config, || format!("parsing recode map {}", file.display()))?;
            set.insert(map);
        }
    }
    Ok(set)
}

fn load_table(common: &Common, inputs: &mut Vec<Value>) -> Outcome<DecisionTable> {
    let Some(path) = &common.policy else { return Ok(DecisionTable::nceus()) };
    let bytes = read_file(path)?;
    inputs.push(describe_input("policy", path, &bytes));
    let table = DecisionTable::with_overrides(&String::from_utf8_lossy(&bytes))
        .or_exit(Exit::Config, || format!("parsing policy {}", path.display()))?;
    for sector in table.monotonicity_violations() {
        log::warn!("policy makes {sector} workers with social security less formal than without");
    }
    Ok(table)
}

fn require_input(common: &Common) -> Outcome<&[PathBuf]> {
    if common.input.is_empty() {
        return Err(Fail::msg(Exit::Config, "--input is required (or set INFORMALITY_INPUT)"));
    }
    Ok(&common.input)
}

struct Raw {
    records: Vec<ObservationRecord>,
    rejects: Vec<(PathBuf, RecordError)>,
    report: IngestReport,
}

fn read_raw(common: &Common, layout: &LayoutSpec, recodes: &RecodeSet, inputs: &mut Vec<Value>) -> Outcome<Raw> {
    let mut results = Vec::new();
    let mut origin = Vec::new();
    for path in require_input(common)? {
        let bytes = read_file(path)?;
        inputs.push(describe_input("input", path, &bytes));
        let parsed = ingest::read_all(&bytes[..], layout, recodes).map_err(|e| match e {
            ingest::IngestError::Io(_) | ingest::IngestError::Classified(_) => {
                Fail::new(Exit::Parse, anyhow::Error::new(e).context(format!("reading {}", path.display())))
            }
            other => Fail::new(Exit::Config, anyhow::Error::new(other).context(format!("reading {}", path.display()))),
        })?;
        origin.extend(std::iter::repeat_n(path.clone(), parsed.len()));
        results.extend(parsed);
    }
    let report = ingest::ingest_summary(&results);
    if report.rejected > 0 {
        log::warn!("{} of {} records rejected", report.rejected, report.lines);
    }
    let mut records = Vec::with_capacity(report.accepted);
    let mut rejects = Vec::new();
    for (r, path) in results.into_iter().zip(origin) {
        match r {
            Ok(rec) => records.push(rec),
            Err(e) => rejects.push((path, e)),
        }
    }
    Ok(Raw {
        records,
        rejects,
        report,
    })
}

/// Classified rows from either a raw extract (with --layout) or a classified CSV.
struct Loaded {
    rows: Rows,
    tally: Tally,
    ingest: Option<IngestReport>,
}

fn load_rows(common: &Common, inputs: &mut Vec<Value>) -> Outcome<Loaded> {
    match load_layout(common, inputs)? {
        Some(layout) => {
            let recodes = load_recodes(common, inputs)?;
            let table = load_table(common, inputs)?;
            let raw = read_raw(common, &layout, &recodes, inputs)?;
            let (rows, tally) = classify_dataset(raw.records, &table);
            Ok(Loaded {
                rows,
                tally,
                ingest: Some(raw.report),
            })
        }
        None => {
            if common.policy.is_some() || !common.recodes.is_empty() {
                log::warn!("input is already classified; --policy and --recodes are ignored");
            }
            let mut rows = Vec::new();
            for path in require_input(common)? {
                let bytes = read_file(path)?;
                inputs.push(describe_input("input", path, &bytes));
                let part = ingest::read_classified(&bytes[..])
                    .or_exit(Exit::Parse, || format!("reading classified input {}", path.display()))?;
                rows.extend(part);
            }
            let tally = Tally::from_pairs(rows.iter().map(|(r, c)| (r.weight, *c)));
            Ok(Loaded {
                rows,
                tally,
                ingest: None,
            })
        }
    }
}

fn admission(common: &Common) -> Admission {
    Admission {
        indeterminate: common.indeterminate,
        min_age: common.min_age,
        trim_top_percent: common.trim_top,
    }
}

fn pipeline_fail(e: PipelineError) -> Fail {
    match e {
        PipelineError::Decompose(_) => Fail::new(Exit::Degenerate, e),
        _ => Fail::new(Exit::Config, e),
    }
}

fn ext(format: Format) -> &'static str {
    match format {
        Format::Csv => "csv",
        Format::Json => "json",
    }
}

fn base_fields(loaded: &Loaded, common: &Common) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("records".into(), json!(loaded.rows.len()));
    if let Some(report) = &loaded.ingest {
        m.insert("ingest".into(), json!(report));
    }
    m.insert("tally".into(), json!(loaded.tally));
    m.insert(
        "settings".into(),
        json!({
            "alpha": common.alpha,
            "indeterminate": common.indeterminate,
            "min_age": common.min_age,
            "trim_top_percent": common.trim_top,
        }),
    );
    m
}

fn degenerate_check(warnings: &[DecompositionWarning]) -> Outcome<()> {
    if warnings.iter().any(|w| matches!(w, DecompositionWarning::DegenerateTotal)) {
        return Err(Fail::msg(Exit::Degenerate, "total inequality is zero; contribution shares are undefined"));
    }
    Ok(())
}

fn ingest_cmd(common: &Common) -> Outcome<()> {
    let mut inputs = Vec::new();
    let layout = load_layout(common, &mut inputs)?
        .ok_or_else(|| Fail::msg(Exit::Config, "ingest needs --layout"))?;
    let recodes = load_recodes(common, &mut inputs)?;
    let raw = read_raw(common, &layout, &recodes, &mut inputs)?;
    let mut out = Outputs::plan(&common.out_dir, "ingest".into(), &[ext(common.format)], common.force)?;
    match common.format {
        Format::Csv => out.write("csv", |w| {
            let mut csv = csv::Writer::from_writer(w);
            csv.write_record(["input", "line", "field", "cause", "detail"])?;
            for (path, e) in &raw.rejects {
                csv.write_record([
                    path.display().to_string(),
                    e.line.to_string(),
                    e.field.clone().unwrap_or_default(),
                    e.cause.as_str().to_string(),
                    e.detail.clone(),
                ])?;
            }
            csv.flush()?;
            Ok(())
        })?,
        Format::Json => {
            let rejects: Vec<Value> = raw
                .rejects
                .iter()
                .map(|(p, e)| json!({"input": p.display().to_string(), "error": e}))
                .collect();
            out.write_json("json", &json!({"report": raw.report, "rejects": rejects}))?
        }
    };
    let mut fields = Map::new();
    fields.insert("ingest".into(), json!(raw.report));
    out.finish("ingest", inputs, fields)
}

fn classify_cmd(common: &Common) -> Outcome<()> {
    let mut inputs = Vec::new();
    if common.layout.is_none() {
        return Err(Fail::msg(Exit::Config, "classify needs --layout"));
    }
    let loaded = load_rows(common, &mut inputs)?;
    let ext = match common.format {
        Format::Csv => "csv",
        Format::Json => "jsonl",
    };
    let mut out = Outputs::plan(&common.out_dir, "classify".into(), &[ext], common.force)?;
    out.write(ext, |w| {
        match common.format {
            Format::Csv => ingest::write_classified(w, &loaded.rows)?,
            Format::Json => ingest::write_classified_jsonl(w, &loaded.rows)?,
        }
        Ok(())
    })?;
    out.finish("classify", inputs, base_fields(&loaded, common))
}

fn tabulate_cmd(
    common: &Common,
    category: informality::tabulate::Category,
    cross: Option<informality::tabulate::Category>,
) -> Outcome<()> {
    let mut inputs = Vec::new();
    let mut loaded = load_rows(common, &mut inputs)?;
    if common.trim_top.is_some() {
        log::warn!("--trim-top does not apply to tabulate");
    }
    let before = loaded.rows.len();
    if let Some(min) = common.min_age {
        loaded.rows.retain(|(r, _)| r.age.is_some_and(|a| a >= min));
    }
    let below_min_age = before - loaded.rows.len();
    let stem = match cross {
        Some(x) => format!("tabulate-{category}-by-{x}"),
        None => format!("tabulate-{category}"),
    };
    let mut out = Outputs::plan(&common.out_dir, stem, &[ext(common.format)], common.force)?;
    let tab_fail = |e| Fail::new(Exit::Degenerate, e);
    let excluded_share = match cross {
        None => {
            let t = share_table(&loaded.rows, category, common.indeterminate).map_err(tab_fail)?;
            match common.format {
                Format::Csv => out.write("csv", |w| Ok(emit::write_share_table_csv(w, &t)?))?,
                Format::Json => out.write_json("json", &t)?,
            };
            t.excluded_weight_share
        }
        Some(secondary) => {
            let x = cross_tab(&loaded.rows, category, secondary, common.indeterminate).map_err(tab_fail)?;
            match common.format {
                Format::Csv => out.write("csv", |w| Ok(emit::write_cross_tab_csv(w, &x)?))?,
                Format::Json => out.write_json("json", &x)?,
            };
            x.excluded_weight_share
        }
    };
    let mut fields = base_fields(&loaded, common);
    fields.insert("below_min_age".into(), json!(below_min_age));
    fields.insert("indeterminate_excluded_weight_share".into(), json!(excluded_share));
    out.finish("tabulate", inputs, fields)
}

fn decompose_cmd(common: &Common, key: GroupKey) -> Outcome<()> {
    let mut inputs = Vec::new();
    let loaded = load_rows(common, &mut inputs)?;
    let (d, exclusions) = decompose_records(&loaded.rows, key, common.alpha, &admission(common)).map_err(pipeline_fail)?;
    let mut out = Outputs::plan(&common.out_dir, format!("decompose-{key}"), &[ext(common.format)], common.force)?;
    match common.format {
        Format::Csv => out.write("csv", |w| Ok(emit::write_decomposition_csv(w, &d)?))?,
        Format::Json => out.write_json("json", &d)?,
    };
    let mut fields = base_fields(&loaded, common);
    fields.insert("exclusions".into(), json!(exclusions));
    fields.insert("warnings".into(), json!(d.warnings));
    out.finish("decompose", inputs, fields)?;
    degenerate_check(&d.warnings)
}

fn nested_cmd(common: &Common, outer: GroupKey, inner: GroupKey) -> Outcome<()> {
    if outer == inner {
        return Err(Fail::msg(Exit::Config, "--outer-key and --inner-key must differ"));
    }
    let mut inputs = Vec::new();
    let loaded = load_rows(common, &mut inputs)?;
    let (n, exclusions) =
        nested_decompose_records(&loaded.rows, outer, inner, common.alpha, &admission(common)).map_err(pipeline_fail)?;
    let stem = format!("nested-decompose-{outer}-{inner}");
    let mut out = Outputs::plan(&common.out_dir, stem, &[ext(common.format)], common.force)?;
    match common.format {
        Format::Csv => out.write("csv", |w| Ok(emit::write_nested_csv(w, &n)?))?,
        Format::Json => out.write_json("json", &n)?,
    };
    let inner_warnings: Vec<Value> = n
        .inner
        .iter()
        .filter_map(|b| b.result.as_ref().map(|r| json!({"outer": b.outer_label, "warnings": r.warnings})))
        .collect();
    let mut fields = base_fields(&loaded, common);
    fields.insert("exclusions".into(), json!(exclusions));
    fields.insert("warnings".into(), json!({"outer": n.outer.warnings, "inner": inner_warnings}));
    fields.insert("total_percent".into(), json!(n.total_percent));
    out.finish("nested-decompose", inputs, fields)?;
    degenerate_check(&n.outer.warnings)
}

fn validate_cmd(common: &Common, fixture: Option<&Path>) -> Outcome<()> {
    let mut inputs = Vec::new();
    let text = match fixture {
        Some(path) => {
            let bytes = read_file(path)?;
            inputs.push(describe_input("fixture", path, &bytes));
            String::from_utf8(bytes).or_exit(Exit::Parse, || format!("{} is not UTF-8", path.display()))?
        }
        None => BUNDLED_FIXTURE.to_string(),
    };
    let table = parse_fixture(&text).or_exit(Exit::Parse, || "parsing table fixture".to_string())?;
    let report = validate_published_table(&table, common.alpha);
    let mut out = Outputs::plan(&common.out_dir, "validate-table".into(), &[ext(common.format)], common.force)?;
    match common.format {
        Format::Csv => out.write("csv", |w| Ok(emit::write_validation_csv(w, &report)?))?,
        Format::Json => out.write_json("json", &report)?,
    };
    for f in &report.findings {
        log::warn!("{}", serde_json::to_string(f).unwrap_or_default());
    }
    let mut fields = Map::new();
    fields.insert("fixture".into(), json!(fixture.map_or("bundled".to_string(), |p| p.display().to_string())));
    fields.insert("alpha".into(), json!(common.alpha));
    fields.insert("consistent".into(), json!(report.consistent));
    fields.insert("max_c_w_deviation".into(), json!(report.max_c_w_deviation));
    fields.insert("max_c_t_deviation".into(), json!(report.max_c_t_deviation));
    fields.insert("findings".into(), json!(report.findings));
    out.finish("validate-table", inputs, fields)?;
    let mut stderr = std::io::stderr();
    let _ = writeln!(
        stderr,
        "max |C_w| deviation {:.4}, max |C_t| deviation {:.4} pp, {} finding(s)",
        report.max_c_w_deviation,
        report.max_c_t_deviation,
        report.findings.len()
    );
    if report.consistent {
        Ok(())
    } else {
        Err(Fail::msg(Exit::Validation, "published table is not internally consistent"))
    }
}

pub fn run(common: &Common, command: &Command) -> Outcome<()> {
    if !common.alpha.is_finite() {
        return Err(Fail::msg(Exit::Config, format!("--alpha must be finite, got {}", common.alpha)));
    }
    match command {
        Command::Ingest => ingest_cmd(common),
        Command::Classify => classify_cmd(common),
        Command::Tabulate { category, cross } => tabulate_cmd(common, *category, *cross),
        Command::Decompose { category } => decompose_cmd(common, *category),
        Command::NestedDecompose { outer_key, inner_key } => nested_cmd(common, *outer_key, *inner_key),
        Command::ValidateTable { fixture } => validate_cmd(common, fixture.as_deref()),
        Command::Synth { seed, records, extract } => synth::run(common, *seed, *records, *extract),
    }
}
