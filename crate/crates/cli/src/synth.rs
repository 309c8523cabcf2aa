//! Seeded synthetic extracts in the example layouts, for demos and smoke tests.

use std::io::Write;

use informality::ingest::layout::DEFAULT_AGE_BANDS;
use informality::ingest::{
    parse_layout, AgeGroup, EnterpriseProfile, Gender, JobProfile, JobStatus, ObservationRecord, Ownership, RecodeSet,
    RecordWriter, Sector, SizeClass, SocialGroup, SocialSecurity, EXAMPLE_CSV, EXAMPLE_FIXED_WIDTH,
};
use rand::distr::weighted::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::LogNormal;
use serde_json::{json, Map};

use crate::args::{Common, Extract};
use crate::fail::{Exit, Fail, OrExit, Outcome};
use crate::output::Outputs;

fn pick<T: Copy, R: Rng>(rng: &mut R, items: &[(T, f64)]) -> T {
    let dist = WeightedIndex::new(items.iter().map(|(_, w)| *w)).expect("positive weights");
    items[dist.sample(rng)].0
}

fn distinct_labels(recodes: &RecodeSet, name: &str) -> Vec<String> {
    let mut labels: Vec<String> = Vec::new();
    if let Some(map) = recodes.get(name) {
        for (_, label) in map.entries() {
            if !labels.iter().any(|l| l == label) {
                labels.push(label.to_string());
            }
        }
    }
    labels
}

fn cents(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

pub fn generate(seed: u64, n: usize, recodes: &RecodeSet) -> Vec<ObservationRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let occupations = distinct_labels(recodes, "occupation");
    let industries = distinct_labels(recodes, "industry");
    // skilled occupations first in the recode map, so earlier labels earn more
    let occupation_weights: Vec<f64> = (0..occupations.len()).map(|i| 1.0 + i as f64).collect();
    let occupation_dist = WeightedIndex::new(&occupation_weights).expect("occupation recode map is empty");
    let spread = LogNormal::new(0.0, 0.55).expect("valid lognormal");

    (0..n)
        .map(|i| {
            let sector = pick(&mut rng, &[(Sector::Rural, 0.65), (Sector::Urban, 0.35)]);
            let gender = pick(&mut rng, &[(Gender::Male, 0.7), (Gender::Female, 0.3)]);
            let social_group = pick(
                &mut rng,
                &[
                    (SocialGroup::ST, 0.1),
                    (SocialGroup::SC, 0.2),
                    (SocialGroup::OBC, 0.42),
                    (SocialGroup::Others, 0.28),
                ],
            );
            let age = rng.random_range(15..=75u32);
            let ownership = pick(
                &mut rng,
                &[
                    (Ownership::ProprietaryOrPartnership, 0.62),
                    (Ownership::IncorporatedOrOtherLegal, 0.25),
                    (Ownership::Household, 0.09),
                    (Ownership::Unknown, 0.04),
                ],
            );
            let size_class = pick(
                &mut rng,
                &[(SizeClass::LessThanTen, 0.7), (SizeClass::TenOrMore, 0.26), (SizeClass::Unknown, 0.04)],
            );
            let status = pick(
                &mut rng,
                &[
                    (JobStatus::SelfEmployed, 0.45),
                    (JobStatus::Casual, 0.3),
                    (JobStatus::RegularWage, 0.22),
                    (JobStatus::Unknown, 0.03),
                ],
            );
            let covered = if status == JobStatus::RegularWage { 0.45 } else { 0.03 };
            let social_security = pick(
                &mut rng,
                &[
                    (SocialSecurity::Available, covered),
                    (SocialSecurity::NotAvailable, 0.97 - covered),
                    (SocialSecurity::Unknown, 0.03),
                ],
            );
            let occ = occupation_dist.sample(&mut rng);
            let industry = industries.choose(&mut rng).cloned();
            let premium = (occupations.len() - occ) as f64 * 0.12
                + if social_security == SocialSecurity::Available { 0.5 } else { 0.0 }
                + if sector == Sector::Urban { 0.3 } else { 0.0 };
            let mpce = cents(900.0 * premium.exp() * spread.sample(&mut rng)).max(1.0);
            let weight = cents(rng.random_range(20.0..2000.0));
            ObservationRecord {
                record_id: format!("{:010}", i + 1),
                weight,
                mpce: Some(mpce),
                occupation: occupations.get(occ).cloned(),
                industry,
                sector: Some(sector),
                gender: Some(gender),
                social_group: Some(social_group),
                age: Some(age),
                age_group: AgeGroup::from_age(age, &DEFAULT_AGE_BANDS),
                region: Some(format!("{:02}", rng.random_range(1..=35))),
                enterprise: EnterpriseProfile { ownership, size_class },
                job: JobProfile { status, social_security },
            }
        })
        .collect()
}

pub fn run(common: &Common, seed: u64, n: usize, extract: Extract) -> Outcome<()> {
    let (layout_text, data_ext) = match extract {
        Extract::FixedWidth => (EXAMPLE_FIXED_WIDTH, "dat"),
        Extract::Csv => (EXAMPLE_CSV, "csv"),
    };
    let layout = parse_layout(layout_text).or_exit(Exit::Internal, || "parsing bundled layout".into())?;
    let recodes = RecodeSet::builtin();
    let writer = RecordWriter::new(&layout, &recodes).map_err(|e| Fail::new(Exit::Internal, e))?;
    let records = generate(seed, n, &recodes);

    let mut out = Outputs::plan(&common.out_dir, "synth".into(), &[data_ext, "layout.toml"], common.force)?;
    let data = out.write(data_ext, |w| {
        match extract {
            Extract::FixedWidth => writer.write_fixed_width(w, &records)?,
            Extract::Csv => writer.write_csv(w, &records)?,
        }
        Ok(())
    })?;
    out.write("layout.toml", |w| Ok(w.write_all(layout_text.as_bytes())?))?;
    eprintln!("wrote {n} records to {}", data.display());

    let mut fields = Map::new();
    fields.insert("seed".into(), json!(seed));
    fields.insert("records".into(), json!(n));
    out.finish("synth", Vec::new(), fields)
}
