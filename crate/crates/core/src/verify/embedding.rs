//! Sequence-level embedding oracles `W^{p,q}_s -> W^{p,q,r}_{s'}` with the
//! constants that the pointwise proof chain produces.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::pairwise_sum;
use crate::norms::{bracket, sequence_mixed_norm, SequenceMode, WeightedSequence};
use crate::verify::report::ReportRow;
use crate::verify::Exponent;

/// Absolute slack allowed on `lhs <= bound * rhs`.
pub const EMBEDDING_SLACK: f64 = 1e-12;

/// Terms summed explicitly before the analytic tail takes over.
const SERIES_TERMS: usize = 1 << 17;
/// Half-width of the lattice box searched for the II-ii sup factor.
const SUP_BOX: i64 = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CaseId {
    #[serde(rename = "I-i")]
    OneI,
    #[serde(rename = "I-ii")]
    OneII,
    #[serde(rename = "II-i")]
    TwoI,
    #[serde(rename = "II-ii")]
    TwoII,
    #[serde(rename = "III-i")]
    ThreeI,
    #[serde(rename = "III-ii")]
    ThreeII,
}

impl CaseId {
    pub const ALL: [CaseId; 6] = [
        CaseId::OneI,
        CaseId::OneII,
        CaseId::TwoI,
        CaseId::TwoII,
        CaseId::ThreeI,
        CaseId::ThreeII,
    ];

    pub fn label(self) -> &'static str {
        match self {
            CaseId::OneI => "I-i",
            CaseId::OneII => "I-ii",
            CaseId::TwoI => "II-i",
            CaseId::TwoII => "II-ii",
            CaseId::ThreeI => "III-i",
            CaseId::ThreeII => "III-ii",
        }
    }

    /// The case an exponent pair falls into.
    pub fn classify(q: f64, r: f64) -> Self {
        use std::cmp::Ordering::*;
        match r.partial_cmp(&q).unwrap_or(Equal) {
            Equal if q.is_infinite() => CaseId::OneI,
            Equal => CaseId::OneII,
            Less if q.is_infinite() => CaseId::TwoI,
            Less => CaseId::TwoII,
            Greater if r.is_infinite() => CaseId::ThreeI,
            Greater => CaseId::ThreeII,
        }
    }

    fn uses_epsilon(self) -> bool {
        matches!(self, CaseId::TwoI | CaseId::TwoII)
    }
}

impl fmt::Display for CaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for CaseId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CaseId::ALL
            .into_iter()
            .find(|c| c.label() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown embedding case {s:?}")))
    }
}

/// One admissible parameter choice for the embedding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingCase {
    pub case_id: CaseId,
    pub s: f64,
    pub q: Exponent,
    pub r: Exponent,
    #[serde(default)]
    pub epsilon: Option<f64>,
}

impl EmbeddingCase {
    pub fn new(case_id: CaseId, s: f64, q: f64, r: f64, epsilon: Option<f64>) -> Result<Self> {
        let case = Self {
            case_id,
            s,
            q: Exponent(q),
            r: Exponent(r),
            epsilon,
        };
        case.validate()?;
        Ok(case)
    }

    pub fn q(&self) -> f64 {
        self.q.0
    }

    pub fn r(&self) -> f64 {
        self.r.0
    }

    pub fn validate(&self) -> Result<()> {
        let (q, r) = (self.q(), self.r());
        for (name, v) in [("q", q), ("r", r)] {
            if v.is_nan() || v <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if CaseId::classify(q, r) != self.case_id {
            return Err(Error::InvalidParameter(format!(
                "(q, r) = ({q}, {r}) belongs to case {}, not {}",
                CaseId::classify(q, r),
                self.case_id
            )));
        }
        if !(self.s.is_finite() && self.s >= 0.0) {
            return Err(Error::InvalidParameter(format!("s must be >= 0, got {}", self.s)));
        }
        match (self.case_id.uses_epsilon(), self.epsilon) {
            (true, Some(e)) if e.is_finite() && e > 0.0 => {}
            (true, _) => {
                return Err(Error::InvalidParameter(format!(
                    "case {} needs a positive epsilon",
                    self.case_id
                )))
            }
            (false, Some(_)) => {
                return Err(Error::InvalidParameter(format!(
                    "case {} takes no epsilon",
                    self.case_id
                )))
            }
            (false, None) => {}
        }
        if let Some(t) = self.threshold() {
            if self.s <= t {
                return Err(Error::InvalidParameter(format!(
                    "case {} needs s > {t}, got {}",
                    self.case_id, self.s
                )));
            }
        }
        Ok(())
    }

    /// Lower limit on `s` for the two cases that lose regularity.
    fn threshold(&self) -> Option<f64> {
        match self.case_id {
            CaseId::TwoI => Some(1.0 / self.r()),
            CaseId::TwoII => Some(1.0 / self.r() - 1.0 / self.q()),
            _ => None,
        }
    }

    /// Target regularity: `s - 1/r - eps` (II-i), `s - (1/r - 1/q) - eps`
    /// (II-ii), otherwise `s`.
    pub fn s_prime(&self) -> f64 {
        match (self.threshold(), self.epsilon) {
            (Some(t), Some(e)) => self.s - t - e,
            _ => self.s,
        }
    }

    /// `1 - r/q + eps r`, only for II-ii.
    pub fn alpha(&self) -> Option<f64> {
        (self.case_id == CaseId::TwoII)
            .then(|| 1.0 - self.r() / self.q() + self.epsilon.expect("validated") * self.r())
    }

    /// `eps` as used by the bound. When `s' < 0` the target norm is dominated
    /// by the one at `s' = 0`, which corresponds to the smaller
    /// `eps = s - threshold`.
    fn bound_epsilon(&self) -> Option<f64> {
        match (self.threshold(), self.epsilon) {
            (Some(t), Some(e)) => Some(e.min(self.s - t)),
            _ => None,
        }
    }

    pub fn params(&self) -> String {
        let mut out = format!("case={};s={};q={};r={}", self.case_id, self.s, self.q, self.r);
        if let Some(e) = self.epsilon {
            out.push_str(&format!(";eps={e}"));
        }
        out
    }
}

/// `sum_{j >= 1} f(j)` for `f` decreasing, truncated at [`SERIES_TERMS`]
/// with `tail` bounding the rest.
fn series_with_tail(f: impl Fn(f64) -> f64, tail: f64) -> f64 {
    let terms: Vec<f64> = (1..=SERIES_TERMS).map(|j| f(j as f64)).collect();
    pairwise_sum(&terms) + tail
}

/// `2^{s/2} (sum_m (1 + |m|)^{-(s - s')r})^{1/r}`.
///
/// The factor `2^{s/2}` comes from `<k> >= (<kbar> + |k_n|) / sqrt 2`, which
/// turns `<k>^{-s}` into the `(t + |m|)^{-s}` form the majorization uses.
fn bound_two_i(case: &EmbeddingCase, eps: f64) -> f64 {
    let (s, r) = (case.s, case.r());
    let s_prime = s - 1.0 / r - eps;
    let beta = (s - s_prime) * r;
    let m = SERIES_TERMS as f64;
    let tail = (1.0 + m).powf(1.0 - beta) / (beta - 1.0);
    let one_side = series_with_tail(|j| (1.0 + j).powf(-beta), tail);
    2f64.powf(s / 2.0) * (1.0 + 2.0 * one_side).powf(1.0 / r)
}

/// Holder factor times `sup_k <kbar>^{s'} <k_n>^{alpha/r} <k>^{-s}`.
fn bound_two_ii(case: &EmbeddingCase, eps: f64, dimension: usize) -> f64 {
    let (s, q, r) = (case.s, case.q(), case.r());
    let s_prime = s - (1.0 / r - 1.0 / q) - eps;
    let alpha = 1.0 - r / q + eps * r;
    let conj = q / (q - r);
    let gamma = alpha * conj;
    let m = SERIES_TERMS as f64;
    let tail = m.powf(1.0 - gamma) / (gamma - 1.0);
    let one_side = series_with_tail(|j| (1.0 + j * j).powf(-gamma / 2.0), tail);
    let holder = (1.0 + 2.0 * one_side).powf(1.0 / conj).powf(1.0 / r);
    holder * sup_factor(s, s_prime, dimension)
}

/// `sup_k (<k_n>/<k>)^{s - s'} (<kbar>/<k>)^{s'}`: a lattice search on
/// `|k|_inf <= SUP_BOX` combined with the bound
/// `c^{s/2} (a/(a+b))^a (b/(a+b))^b`, `c = 1 + 1/<k>^2`, valid outside it.
fn sup_factor(s: f64, s_prime: f64, dimension: usize) -> f64 {
    let (a, b) = (s_prime / 2.0, (s - s_prime) / 2.0);
    let shape = (a / (a + b)).powf(a) * (b / (a + b)).powf(b);
    let outside_norm2 = ((SUP_BOX + 1) * (SUP_BOX + 1)) as f64;
    let outside = (1.0 + 1.0 / (1.0 + outside_norm2)).powf(s / 2.0) * shape;
    // the value depends on k only through |kbar|^2 and |k_n|
    let mut kbar_norms: Vec<i64> = vec![0];
    for _ in 1..dimension {
        let mut next: Vec<i64> = kbar_norms
            .iter()
            .flat_map(|&acc| (-SUP_BOX..=SUP_BOX).map(move |v| acc + v * v))
            .collect();
        next.sort_unstable();
        next.dedup();
        kbar_norms = next;
    }
    let mut inside: f64 = 0.0;
    for &kb2 in &kbar_norms {
        for kn in 0..=SUP_BOX {
            let kn2 = kn * kn;
            let k = 1.0 + (kb2 + kn2) as f64;
            let value = ((1.0 + kn2 as f64) / k).powf(b) * ((1.0 + kb2 as f64) / k).powf(a);
            inside = inside.max(value);
        }
    }
    inside.max(outside)
}

/// The constant of the proof chain for `case` on `Z^dimension`.
pub fn embedding_bound(case: &EmbeddingCase, dimension: usize) -> Result<f64> {
    case.validate()?;
    if dimension < 2 {
        return Err(Error::UnsupportedDimension(dimension, "embeddings need n >= 2"));
    }
    Ok(match case.case_id {
        CaseId::OneI | CaseId::OneII | CaseId::ThreeI | CaseId::ThreeII => 1.0,
        CaseId::TwoI => bound_two_i(case, case.bound_epsilon().expect("validated")),
        CaseId::TwoII => bound_two_ii(case, case.bound_epsilon().expect("validated"), dimension),
    })
}

/// `LHS = ||a||_{l^r l^q, s'}`, `RHS = ||a||_{l^q, s}`; passes when
/// `LHS <= bound * RHS + EMBEDDING_SLACK`.
pub fn check_embedding(case: &EmbeddingCase, bound: f64, a: &WeightedSequence) -> Result<ReportRow> {
    case.validate()?;
    let (q, r) = (case.q(), case.r());
    let lhs = sequence_mixed_norm(a, q, r, case.s_prime(), SequenceMode::AnisoLast)?;
    let rhs = sequence_mixed_norm(a, q, q, case.s, SequenceMode::Iso)?;
    let pass = lhs <= bound * rhs + EMBEDDING_SLACK;
    Ok(ReportRow::with_pass(
        "embedding",
        format!("{};n={}", case.params(), a.dimension()),
        lhs,
        rhs,
        Some(bound),
        pass,
    ))
}

/// Shapes of the random sequences fed to the oracles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SequenceShape {
    /// A few entries scattered over the box.
    Sparse,
    /// `<k>^{-s}`-profiled entries along a line parallel to the last axis.
    Line,
    /// Every entry of a small centered block.
    Block,
    /// Entries on one hyperplane `k_n = const`.
    Slab,
    Delta,
}

impl SequenceShape {
    pub const ALL: [SequenceShape; 5] = [
        SequenceShape::Sparse,
        SequenceShape::Line,
        SequenceShape::Block,
        SequenceShape::Slab,
        SequenceShape::Delta,
    ];
}

fn random_point<R: Rng>(rng: &mut R, dimension: usize, radius: i64) -> Vec<i64> {
    (0..dimension).map(|_| rng.gen_range(-radius..=radius)).collect()
}

/// Log-uniform magnitude in `[1e-3, 1]`.
fn magnitude<R: Rng>(rng: &mut R) -> f64 {
    10f64.powf(rng.gen_range(-3.0..=0.0))
}

/// A random nonnegative sequence supported in `|k|_inf <= radius`.
pub fn random_sequence<R: Rng>(
    rng: &mut R,
    shape: SequenceShape,
    dimension: usize,
    radius: i64,
    s: f64,
) -> Result<WeightedSequence> {
    let mut a = WeightedSequence::new(dimension);
    match shape {
        SequenceShape::Sparse => {
            let count = rng.gen_range(1..=48);
            for _ in 0..count {
                let k = random_point(rng, dimension, radius);
                let v = magnitude(rng);
                a.insert(k, v)?;
            }
        }
        SequenceShape::Line => {
            let mut base = random_point(rng, dimension, radius.min(2));
            for kn in -radius..=radius {
                base[dimension - 1] = kn;
                let v = bracket(&base, -s) * rng.gen_range(0.5..=1.0);
                a.insert(base.clone(), v)?;
            }
        }
        SequenceShape::Block => {
            let half = radius.min(2);
            let side = (2 * half + 1) as usize;
            for flat in 0..side.pow(dimension as u32) {
                let mut rest = flat;
                let k: Vec<i64> = (0..dimension)
                    .map(|_| {
                        let c = (rest % side) as i64 - half;
                        rest /= side;
                        c
                    })
                    .collect();
                let v = magnitude(rng);
                a.insert(k, v)?;
            }
        }
        SequenceShape::Slab => {
            let kn = rng.gen_range(-radius..=radius);
            let count = rng.gen_range(1..=32);
            for _ in 0..count {
                let mut k = random_point(rng, dimension, radius);
                k[dimension - 1] = kn;
                let v = magnitude(rng);
                a.insert(k, v)?;
            }
        }
        SequenceShape::Delta => {
            a.insert(random_point(rng, dimension, radius), 1.0)?;
        }
    }
    Ok(a)
}

/// `a / ||a||_{l^q, s}` so that the absolute slack acts as a relative one.
pub fn normalize_sequence(a: &WeightedSequence, q: f64, s: f64) -> Result<WeightedSequence> {
    let norm = sequence_mixed_norm(a, q, q, s, SequenceMode::Iso)?;
    if !(norm > 0.0 && norm.is_finite()) {
        return Ok(a.clone());
    }
    WeightedSequence::from_entries(a.dimension(), a.iter().map(|(k, v)| (k.to_vec(), v / norm)))
}
