//! Batch verification: sequence-level embedding oracles, trace and
//! retraction studies, maximal-norm checks and reporting.

pub mod checks;
pub mod config;
pub mod corpus;
pub mod embedding;
pub mod report;

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::decomposition::{BandSet, Decomposer, ShiftLattice};
use crate::error::{Error, Result};
use crate::norms::NormSpec;
use crate::trace::{pointwise_maximal_bound, trace, ExtensionProfile, TraceEngine};

pub use checks::{
    check_maximal_equivalence, check_retraction, check_trace_inequality, check_triebel_maximal,
    regularity_scan, RetractionSetup,
};
pub use config::{ExperimentConfig, FieldGeometry};
pub use corpus::{generate_corpus, CorpusKind, CorpusMember};
pub use embedding::{check_embedding, embedding_bound, CaseId, EmbeddingCase};
pub use report::{Report, ReportRow, Summary};

/// An exponent in `(0, inf]`, written as a number or `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Exponent(pub f64);

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_infinite() {
            f.write_str("inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl FromStr for Exponent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let v = match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" => f64::INFINITY,
            other => other
                .parse::<f64>()
                .map_err(|_| Error::InvalidParameter(format!("not an exponent: {s:?}")))?,
        };
        if v.is_nan() || v <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "exponents must be positive, got {s}"
            )));
        }
        Ok(Exponent(v))
    }
}

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_infinite() {
            serializer.serialize_str("inf")
        } else {
            serializer.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Number(v) if v > 0.0 => Ok(Exponent(v)),
            Raw::Number(v) => Err(serde::de::Error::custom(format!(
                "exponents must be positive, got {v}"
            ))),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    All,
    Embeddings,
    Trace,
    Retraction,
    Maximal,
    Triebel,
}

impl Suite {
    const PARTS: [Suite; 5] = [
        Suite::Embeddings,
        Suite::Trace,
        Suite::Retraction,
        Suite::Maximal,
        Suite::Triebel,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::All => "all",
            Suite::Embeddings => "embeddings",
            Suite::Trace => "trace",
            Suite::Retraction => "retraction",
            Suite::Maximal => "maximal",
            Suite::Triebel => "triebel",
        }
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Suite::All]
            .into_iter()
            .chain(Suite::PARTS)
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown suite {s:?}")))
    }
}

/// Runs `suite` under `config`. Rows come out in a fixed order: suites,
/// then geometries, then corpus members, then parameters.
pub fn run_suite(config: &ExperimentConfig, suite: Suite) -> Result<Report> {
    config.validate()?;
    let mut report = Report::new();
    let parts: Vec<Suite> = match suite {
        Suite::All => Suite::PARTS.to_vec(),
        one => vec![one],
    };
    for part in parts {
        match part {
            Suite::Embeddings => report.extend(embedding_suite(config)?),
            Suite::Trace => {
                for g in &config.geometries {
                    report.extend(trace_suite(config, g)?);
                }
            }
            Suite::Retraction => {
                for g in &config.geometries {
                    report.extend(retraction_suite(config, g)?);
                }
            }
            Suite::Maximal => {
                for g in &config.geometries {
                    report.extend(maximal_suite(config, g)?);
                }
            }
            Suite::Triebel => {
                for g in &config.geometries {
                    report.extend(triebel_suite(config, g)?);
                }
            }
            Suite::All => unreachable!(),
        }
    }
    Ok(report)
}

fn flatten(rows: Vec<Vec<ReportRow>>) -> Vec<ReportRow> {
    rows.into_iter().flatten().collect()
}

/// Random sequences for every configured case, `sequences_per_case` per case
/// id and dimension. Parameter sets and sequence shapes are cycled.
pub fn embedding_suite(config: &ExperimentConfig) -> Result<Vec<ReportRow>> {
    let ec = &config.embedding;
    let mut rows = Vec::new();
    for &n in &ec.dimensions {
        for (ci, id) in CaseId::ALL.into_iter().enumerate() {
            let cases: Vec<EmbeddingCase> = ec.cases.iter().copied().filter(|c| c.case_id == id).collect();
            if cases.is_empty() {
                continue;
            }
            let bounds: Vec<f64> = cases
                .iter()
                .map(|c| embedding_bound(c, n))
                .collect::<Result<_>>()?;
            let chunk: Vec<ReportRow> = (0..ec.sequences_per_case)
                .into_par_iter()
                .map(|i| {
                    let j = i % cases.len();
                    let shapes = embedding::SequenceShape::ALL;
                    let shape = shapes[(i / cases.len()) % shapes.len()];
                    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                    rng.set_stream(((ci as u64 * 16 + n as u64) << 32) | i as u64);
                    let raw = embedding::random_sequence(&mut rng, shape, n, ec.support_radius, cases[j].s)?;
                    let a = embedding::normalize_sequence(&raw, cases[j].q(), cases[j].s)?;
                    let mut row = check_embedding(&cases[j], bounds[j], &a)?;
                    row.params.push_str(&format!(";seq={i};shape={shape:?}"));
                    Ok(row)
                })
                .collect::<Result<_>>()?;
            rows.extend(chunk);
        }
    }
    Ok(rows)
}

/// Exponent triples `(p, q, s)` from a list of pairs and an `s` grid.
fn exponent_triples(pairs: &[config::Exponents], s: &[f64]) -> Vec<(f64, f64, f64)> {
    pairs
        .iter()
        .flat_map(|e| s.iter().map(move |&s| (e.p.0, e.q.0, s)))
        .collect()
}

/// Band identity and hyperplane maximal bound on the main corpus; the trace
/// inequality on the trace corpus at both resolutions.
pub fn trace_suite(config: &ExperimentConfig, geometry: &FieldGeometry) -> Result<Vec<ReportRow>> {
    if geometry.dimension < 2 {
        return Ok(Vec::new());
    }
    let family = geometry.family(config.bump)?;
    let grid = geometry.grid()?;
    let fine = geometry.refined_grid()?;
    let engine = TraceEngine::new(grid.clone(), family)?;
    let fine_engine = TraceEngine::new(fine, family)?;
    let size = config.corpus_size.max(config.trace.corpus_size);
    let corpus = generate_corpus(&grid, geometry.radius, config.seed, size)?;
    let triples = exponent_triples(&config.trace.exponents, &config.trace.s);
    let top = geometry.radius - 1;
    let kbars: Vec<Vec<i64>> = engine
        .reduced()
        .family()
        .indices()
        .filter(|k| k.iter().all(|v| v.abs() <= top))
        .collect();
    let glabel = geometry.label();

    // rows of each member, plus (coarse, refined) ratios per exponent triple
    type MemberRows = (Vec<ReportRow>, Vec<(f64, f64)>);
    let per_member: Vec<MemberRows> = corpus
        .par_iter()
        .map(|m| {
            let label = format!("{glabel};{}", m.label());
            let f = m.field();
            let mut rows = Vec::new();
            let bands = engine.full().decompose(&f)?;
            if m.index < config.corpus_size {
                let mut residual: f64 = 0.0;
                for k in &kbars {
                    residual = residual.max(engine.band_identity_residual(&f, k)?);
                }
                rows.push(ReportRow::residual(
                    "trace_band_identity",
                    label.clone(),
                    residual,
                    f.max_abs(),
                    1e-9,
                ));
                for &b in &config.trace.margin_b {
                    rows.extend(margin_rows(&bands, b, &label)?);
                }
            }
            let mut ratios = Vec::new();
            if m.index < config.trace.corpus_size {
                let traced = engine.reduced().decompose(&trace(&f)?)?;
                let ff = m.field_on(fine_engine.full().spec())?;
                let fine_bands = fine_engine.full().decompose(&ff)?;
                let fine_traced = fine_engine.reduced().decompose(&trace(&ff)?)?;
                for &(p, q, s) in &triples {
                    let coarse = checks::trace_inequality_row(&bands, &traced, p, q, s, &label)?;
                    let mut refined =
                        checks::trace_inequality_row(&fine_bands, &fine_traced, p, q, s, &label)?;
                    refined.check = "trace_inequality_refined".into();
                    ratios.push((coarse.ratio, refined.ratio));
                    rows.push(coarse);
                    rows.push(refined);
                    rows.extend(checks::denominator_order_row(&bands, p, q, s, &label)?);
                }
            }
            Ok((rows, ratios))
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    for (r, _) in &per_member {
        rows.extend(r.iter().cloned());
    }
    for (t, &(p, q, s)) in triples.iter().enumerate() {
        let (mut coarse, mut refined) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for (_, ratios) in per_member.iter().filter(|(_, r)| !r.is_empty()) {
            coarse = coarse.max(ratios[t].0);
            refined = refined.max(ratios[t].1);
        }
        let change = (refined - coarse).abs() / coarse;
        let finite = coarse.is_finite() && refined.is_finite();
        rows.push(ReportRow::residual(
            "trace_inequality_stability",
            format!(
                "p={};q={};s={s};{glabel};max={coarse};refined_max={refined}",
                Exponent(p),
                Exponent(q)
            ),
            if finite { change } else { f64::INFINITY },
            coarse,
            0.05,
        ));
    }
    Ok(rows)
}

/// Hyperplane bound over all bands: the sample-shift read is the contract,
/// the integer-lattice read is recorded alongside.
fn margin_rows(bands: &BandSet, b: f64, label: &str) -> Result<Vec<ReportRow>> {
    let mut rows = Vec::new();
    for (shifts, read) in [(ShiftLattice::Grid, "grid"), (ShiftLattice::Integer, "lattice")] {
        let mut margin = f64::INFINITY;
        let mut ratio: f64 = 0.0;
        for c in bands.components().iter().filter(|c| !c.is_zero()) {
            let h = pointwise_maximal_bound(c, b, shifts)?;
            margin = margin.min(h.margin);
            ratio = ratio.max(h.ratio);
        }
        let params = format!("b={b};read={read};margin={margin};{label}");
        rows.push(match shifts {
            ShiftLattice::Grid => {
                ReportRow::with_pass("maximal_margin", params, ratio, 1.0, Some(1.0), margin >= 0.0)
            }
            ShiftLattice::Integer => ReportRow::recorded("maximal_margin", params, ratio, 1.0),
        });
    }
    Ok(rows)
}

/// Extension of `(n-1)`-dimensional corpus fields onto the extension grid.
pub fn retraction_suite(config: &ExperimentConfig, geometry: &FieldGeometry) -> Result<Vec<ReportRow>> {
    if geometry.dimension < 2 {
        return Ok(Vec::new());
    }
    let family = geometry.family(config.bump)?;
    let target = geometry.extension_grid()?;
    let base = target.drop_last_axis()?;
    let setup = RetractionSetup::new(base.clone(), target, family, ExtensionProfile::new(config.bump))?;
    let corpus = generate_corpus(&base, geometry.radius, config.seed, config.retraction.corpus_size)?;
    let triples = exponent_triples(&config.retraction.exponents, &config.retraction.s);
    let glabel = geometry.label();
    let mut rows = flatten(
        corpus
            .par_iter()
            .map(|m| check_retraction(&m.field(), &setup, &triples, &format!("{glabel};{}", m.label())))
            .collect::<Result<_>>()?,
    );
    let ratio_rows: Vec<&ReportRow> = rows.iter().filter(|r| r.check == "retraction_ratio").collect();
    let mut summary = Vec::new();
    for (t, &(p, q, s)) in triples.iter().enumerate() {
        let values: Vec<f64> = ratio_rows
            .iter()
            .skip(t)
            .step_by(triples.len())
            .map(|r| r.ratio)
            .collect();
        let (cv, mean) = checks::coefficient_of_variation(&values);
        summary.push(ReportRow::residual(
            "retraction_ratio_cv",
            format!("p={};q={};s={s};{glabel}", Exponent(p), Exponent(q)),
            cv,
            mean,
            1e-6,
        ));
    }
    rows.extend(summary);
    Ok(rows)
}

/// Plain against maximal norms on the main corpus, for each configured
/// offset of `b` from `n / min(p, q)`.
pub fn maximal_suite(config: &ExperimentConfig, geometry: &FieldGeometry) -> Result<Vec<ReportRow>> {
    let mc = &config.maximal;
    let family = geometry.family(config.bump)?;
    let decomposer = Decomposer::new(geometry.grid()?, family)?;
    let corpus = generate_corpus(
        decomposer.spec(),
        geometry.radius,
        config.seed,
        config.corpus_size,
    )?;
    let n = geometry.dimension as f64;
    let threshold = n / mc.p.0.min(mc.q.0);
    let specs: Vec<NormSpec> = mc
        .b_offsets
        .iter()
        .map(|off| {
            let b = threshold + off;
            let spec = NormSpec::maximal_isotropic(mc.p.0, mc.q.0, mc.s, b);
            spec.validate().map(|_| spec)
        })
        .collect::<Result<_>>()?;
    let glabel = geometry.label();
    let mut rows = flatten(
        corpus
            .par_iter()
            .map(|m| {
                let bands = decomposer.decompose(&m.field())?;
                let label = format!("{glabel};{}", m.label());
                let mut rows = Vec::new();
                for spec in &specs {
                    rows.extend(check_maximal_equivalence(
                        &bands,
                        spec,
                        ShiftLattice::Integer,
                        &label,
                    )?);
                    if m.index < mc.grid_read_members {
                        rows.extend(check_maximal_equivalence(
                            &bands,
                            spec,
                            ShiftLattice::Grid,
                            &label,
                        )?);
                    }
                }
                Ok(rows)
            })
            .collect::<Result<_>>()?,
    );
    let mut summary = Vec::new();
    for spec in &specs {
        for read in ["lattice", "grid"] {
            let tag = format!(";b={};read={read};", spec.b.expect("maximal"));
            let upper: Vec<&ReportRow> = rows
                .iter()
                .filter(|r| r.check == "maximal_upper" && r.params.contains(&tag))
                .collect();
            if let Some(worst) = upper.iter().max_by(|a, b| a.ratio.total_cmp(&b.ratio)) {
                summary.push(ReportRow::recorded(
                    "maximal_upper_max",
                    worst.params.clone(),
                    worst.lhs,
                    worst.rhs,
                ));
            }
        }
    }
    rows.extend(summary);
    Ok(rows)
}

pub fn triebel_suite(config: &ExperimentConfig, geometry: &FieldGeometry) -> Result<Vec<ReportRow>> {
    let tc = &config.triebel;
    let decomposer = Decomposer::new(geometry.grid()?, geometry.family(config.bump)?)?;
    let corpus = generate_corpus(
        decomposer.spec(),
        geometry.radius,
        config.seed,
        config.corpus_size,
    )?;
    let glabel = geometry.label();
    corpus
        .par_iter()
        .map(|m| {
            let bands = decomposer.decompose(&m.field())?;
            check_triebel_maximal(&bands, tc.p.0, tc.q.0, tc.r, &format!("{glabel};{}", m.label()))
        })
        .collect()
}
