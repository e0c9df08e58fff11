//! Serialized records and text formats written by the commands.

use serde::Serialize;

use crate::enhancement::{DifferenceStatus, EnhancementReport};
use crate::nats_to_bits;
use crate::solver::{BoundaryPoint, BoundaryTrace, Target};

/// `v` with six significant digits; scientific notation outside `[1e-5, 1e6)`.
pub fn fmt_sig(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let e = v.abs().log10().floor() as i32;
    if (-5..6).contains(&e) {
        format!("{:.*}", (5 - e) as usize, v)
    } else {
        format!("{v:.5e}")
    }
}

fn kind(target: Target) -> &'static str {
    match target {
        Target::Weighted(_) => "weighted",
        Target::MaxR1 => "max_r1",
        Target::MaxR2 => "max_r2",
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolutionRecord {
    /// Rates clamped at zero, as in the CSV.
    pub r1_bits: f64,
    pub r2_bits: f64,
    pub objective_bits: f64,
    pub kkt_res1: f64,
    pub kkt_res2: f64,
    pub slackness: [f64; 3],
    pub active_ranks: [usize; 3],
    pub converged: bool,
    pub iterations: usize,
    pub restart: usize,
    pub b1: Vec<f64>,
    pub b2: Vec<f64>,
    pub o1: Vec<f64>,
    pub o2: Vec<f64>,
    pub o3: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PointRecord {
    pub kind: &'static str,
    /// `null` for the corner solves.
    pub mu: Option<f64>,
    /// `certified`, `uncertified` or `failed`.
    pub status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solution: Option<SolutionRecord>,
}

impl PointRecord {
    pub fn from_point(p: &BoundaryPoint) -> Self {
        let mu = match p.target {
            Target::Weighted(mu) => Some(mu),
            _ => None,
        };
        match &p.outcome {
            Err(e) => Self { kind: kind(p.target), mu, status: "failed", error: Some(e.clone()), solution: None },
            Ok(s) => {
                let (r1, r2) = s.rates.clamped();
                let c = &s.certificate;
                Self {
                    kind: kind(p.target),
                    mu,
                    status: if s.certified { "certified" } else { "uncertified" },
                    error: None,
                    solution: Some(SolutionRecord {
                        r1_bits: r1,
                        r2_bits: r2,
                        objective_bits: nats_to_bits(s.objective_nats),
                        kkt_res1: c.stationarity_residual_1,
                        kkt_res2: c.stationarity_residual_2,
                        slackness: c.slackness,
                        active_ranks: c.active_ranks,
                        converged: s.converged,
                        iterations: s.iterations,
                        restart: s.restart,
                        b1: s.split.b1.to_row_major(),
                        b2: s.split.b2.to_row_major(),
                        o1: c.o1.to_row_major(),
                        o2: c.o2.to_row_major(),
                        o3: c.o3.to_row_major(),
                    }),
                }
            }
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundaryRecord {
    pub label: Option<String>,
    pub t: usize,
    pub seed: u64,
    pub mu_grid: Vec<f64>,
    /// Same order as the CSV rows.
    pub points: Vec<PointRecord>,
    pub envelope: Vec<[f64; 2]>,
}

/// `boundary.csv`: one row per solve, ordered by `r1`. The `mu` column is
/// `0` for the max-R1 corner and `inf` for the max-R2 corner.
pub fn boundary_csv(trace: &BoundaryTrace) -> String {
    let mut out = String::from("mu,r1_bits,r2_bits,kkt_res1,kkt_res2\n");
    for p in trace.sorted_by_r1() {
        let mu = fmt_sig(p.target.mu_value());
        let row = match &p.outcome {
            Ok(s) => {
                let (r1, r2) = s.rates.clamped();
                let c = &s.certificate;
                [mu, fmt_sig(r1), fmt_sig(r2), fmt_sig(c.stationarity_residual_1), fmt_sig(c.stationarity_residual_2)]
            }
            Err(_) => [mu, "nan".into(), "nan".into(), "nan".into(), "nan".into()],
        };
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn plot_script(label: Option<&str>) -> String {
    let title = label.unwrap_or("secrecy rate region").replace('\'', "");
    format!(
        "set datafile separator ','\n\
         set title '{title}'\n\
         set xlabel 'R1 (bits/channel use)'\n\
         set ylabel 'R2 (bits/channel use)'\n\
         set key off\n\
         set grid\n\
         plot 'boundary.csv' every ::1 using 2:3 with linespoints pt 7\n"
    )
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckRecord {
    /// `pass`, `fail` or `skipped: <reason>`.
    pub status: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub values: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl CheckRecord {
    fn new(ok: bool, values: Vec<f64>) -> Self {
        Self { status: if ok { "pass" } else { "fail" }.into(), values, note: None }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ChecksRecord {
    /// Minimum eigenvalues of `N1−N1′`, `N2−N2′`, `N3−N3′`, `N2′−N1′`.
    pub ordering: CheckRecord,
    pub proportionality: CheckRecord,
    /// `|ΔR1|`, `|ΔR2|` in bits.
    pub rate_preservation: CheckRecord,
    pub enhanced_kkt: CheckRecord,
    /// Left and right side in bits.
    pub epi: CheckRecord,
    pub asymmetry_of_a: f64,
    pub difference: &'static str,
    pub alpha: f64,
}

impl ChecksRecord {
    pub fn from_report(r: &EnhancementReport) -> Self {
        let (epi, note) = match &r.epi_bits {
            Ok((l, rr)) => (vec![*l, *rr], None),
            Err(e) => (Vec::new(), Some(e.clone())),
        };
        let mut epi = CheckRecord::new(r.epi_ok, epi);
        epi.note = note;
        Self {
            ordering: CheckRecord::new(r.ordering_ok, r.ordering_margins.to_vec()),
            proportionality: CheckRecord::new(r.proportionality_ok, vec![r.proportionality]),
            rate_preservation: CheckRecord::new(r.rates_ok, vec![r.rate_deltas_bits.0, r.rate_deltas_bits.1]),
            enhanced_kkt: CheckRecord::new(r.enhanced_kkt_ok, vec![r.enhanced_kkt]),
            epi,
            asymmetry_of_a: r.enhanced.asymmetry_of_a,
            difference: match r.enhanced.difference_status {
                DifferenceStatus::Regular => "regular",
                DifferenceStatus::PartiallySingular => "partially singular",
                DifferenceStatus::Vanishing => "vanishing",
            },
            alpha: r.enhanced.alpha,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyPointRecord {
    pub mu: f64,
    /// `checked`, `skipped: mu=1 singular`, or `failed: <reason>`.
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certified: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r1_bits: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r2_bits: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checks: Option<ChecksRecord>,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationRecord {
    pub label: Option<String>,
    pub t: usize,
    pub seed: u64,
    pub verify_tol: f64,
    pub rate_tol: f64,
    pub points: Vec<VerifyPointRecord>,
    /// Any certified point failed a check.
    pub failed: bool,
}
