//! Shared test helpers: a deliberately naive decomposition oracle and record
//! generators.
#![allow(dead_code)]

use informality::ingest::layout::DEFAULT_AGE_BANDS;
use informality::ingest::{
    AgeGroup, EnterpriseProfile, Gender, JobProfile, JobStatus, ObservationRecord, Ownership, RecodeSet, Sector,
    SizeClass, SocialGroup, SocialSecurity,
};
use rand::Rng;
use rand_distr::{Distribution, LogNormal, Pareto};

/// GE index straight from its definition, plain loops and `powf`.
pub fn naive_ge(y: &[f64], w: &[f64], alpha: f64) -> f64 {
    let total_w: f64 = w.iter().sum();
    let mu = y.iter().zip(w).map(|(y, w)| y * w).sum::<f64>() / total_w;
    if y.iter().zip(w).filter(|(_, w)| **w > 0.0).all(|(v, _)| *v == y[0]) {
        return 0.0;
    }
    if alpha.abs() < 1e-9 {
        y.iter().zip(w).map(|(y, w)| w * (mu / y).ln()).sum::<f64>() / total_w
    } else if (alpha - 1.0).abs() < 1e-9 {
        y.iter().zip(w).map(|(y, w)| w * (y / mu) * (y / mu).ln()).sum::<f64>() / total_w
    } else {
        let m = y.iter().zip(w).map(|(y, w)| w * (y / mu).powf(alpha)).sum::<f64>() / total_w;
        (m - 1.0) / (alpha * (alpha - 1.0))
    }
}

#[derive(Debug, Clone)]
pub struct NaiveRow {
    pub p: f64,
    pub r: f64,
    pub w: f64,
    pub index: f64,
    pub c_w: f64,
    pub c_t: f64,
}

#[derive(Debug, Clone)]
pub struct Naive {
    pub total: f64,
    pub within: f64,
    pub between: f64,
    pub rows: Vec<NaiveRow>,
}

/// Items are `(group, value, weight)`; every group in `0..groups` must be
/// non-empty.
pub fn naive_decomposition(items: &[(usize, f64, f64)], groups: usize, alpha: f64) -> Naive {
    let y: Vec<f64> = items.iter().map(|i| i.1).collect();
    let w: Vec<f64> = items.iter().map(|i| i.2).collect();
    let total = naive_ge(&y, &w, alpha);
    let total_w: f64 = w.iter().sum();
    let mu = y.iter().zip(&w).map(|(y, w)| y * w).sum::<f64>() / total_w;
    let mut rows = Vec::new();
    let mut within = 0.0;
    for g in 0..groups {
        let gy: Vec<f64> = items.iter().filter(|i| i.0 == g).map(|i| i.1).collect();
        let gw: Vec<f64> = items.iter().filter(|i| i.0 == g).map(|i| i.2).collect();
        let wg: f64 = gw.iter().sum();
        let mu_g = gy.iter().zip(&gw).map(|(y, w)| y * w).sum::<f64>() / wg;
        let p = wg / total_w;
        let r = p * mu_g / mu;
        let weight = r.powf(alpha) * p.powf(1.0 - alpha);
        let index = naive_ge(&gy, &gw, alpha);
        let c_w = weight * index;
        within += c_w;
        rows.push(NaiveRow {
            p,
            r,
            w: weight,
            index,
            c_w,
            c_t: 100.0 * c_w / total,
        });
    }
    Naive {
        total,
        within,
        between: total - within,
        rows,
    }
}

/// `|a - b| <= tol * max(1, |b|)`.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

#[derive(Debug, Clone, Copy)]
pub enum Shape {
    LogNormal,
    Pareto,
}

pub fn draw_values<R: Rng>(rng: &mut R, n: usize, shape: Shape) -> Vec<f64> {
    match shape {
        Shape::LogNormal => {
            let d = LogNormal::new(7.0, 0.8).unwrap();
            (0..n).map(|_| d.sample(rng)).collect()
        }
        Shape::Pareto => {
            let d = Pareto::new(500.0, 2.2).unwrap();
            (0..n).map(|_| d.sample(rng)).collect()
        }
    }
}

pub fn draw_weights<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(1.0..500.0)).collect()
}

fn labels(recodes: &RecodeSet, map: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for (_, label) in recodes.get(map).unwrap().entries() {
        if !out.iter().any(|l| l == label) {
            out.push(label.to_string());
        }
    }
    out
}

fn maybe<T, R: Rng>(rng: &mut R, f: impl FnOnce(&mut R) -> T) -> Option<T> {
    if rng.random_bool(0.9) {
        Some(f(rng))
    } else {
        None
    }
}

fn one_of<T: Copy, R: Rng>(rng: &mut R, items: &[T]) -> T {
    items[rng.random_range(0..items.len())]
}

/// A record every field of which survives the example layouts: money in whole
/// cents, codes drawn from the built-in recode maps.
pub fn random_record<R: Rng>(rng: &mut R, id: usize, recodes: &RecodeSet) -> ObservationRecord {
    let occupations = labels(recodes, "occupation");
    let industries = labels(recodes, "industry");
    let age = maybe(rng, |r| r.random_range(0..=110u32));
    ObservationRecord {
        record_id: format!("{id:010}"),
        weight: rng.random_range(0..50_000_000u64) as f64 / 100.0,
        mpce: Some(rng.random_range(1..500_000_000u64) as f64 / 100.0),
        occupation: maybe(rng, |r| occupations[r.random_range(0..occupations.len())].clone()),
        industry: maybe(rng, |r| industries[r.random_range(0..industries.len())].clone()),
        sector: maybe(rng, |r| one_of(r, Sector::ALL)),
        gender: maybe(rng, |r| one_of(r, Gender::ALL)),
        social_group: maybe(rng, |r| one_of(r, SocialGroup::ALL)),
        age,
        age_group: age.and_then(|a| AgeGroup::from_age(a, &DEFAULT_AGE_BANDS)),
        region: maybe(rng, |r| format!("{:02}", r.random_range(1..=36))),
        enterprise: EnterpriseProfile {
            ownership: one_of(rng, Ownership::ALL),
            size_class: one_of(rng, SizeClass::ALL),
        },
        job: JobProfile {
            status: one_of(rng, JobStatus::ALL),
            social_security: one_of(rng, SocialSecurity::ALL),
        },
    }
}
