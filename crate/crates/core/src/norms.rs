//! Wiener amalgam quasi-norms over a precomputed [`BandSet`], and the
//! weighted mixed sequence norms they are built from.
//!
//! Every norm here is "inner sequence norm at each point, then `L^p` in
//! space". The anisotropic variants split the lattice index into an inner
//! block (weighted by the bracket of the inner coordinates only) and an
//! outer block made of the last one or two coordinates.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decomposition::{maximal_at, BandSet, MaximalParams, ShiftLattice};
use crate::error::{Error, Result};
use crate::field::{check_exponent, pow, root, RealField};

/// Japanese bracket power `(1 + |k|^2)^{s/2}`.
pub fn bracket(k: &[i64], s: f64) -> f64 {
    let norm2: f64 = k.iter().map(|&v| (v as f64) * (v as f64)).sum();
    (1.0 + norm2).powf(s / 2.0)
}

/// `(sum v^q)^{1/q}`, or the maximum when `q` is infinite.
pub(crate) fn lq_sum(values: impl Iterator<Item = f64>, q: f64) -> f64 {
    lq_sum_with(&mut Vec::new(), values, q)
}

/// [`lq_sum`] reusing `buf` for the powered terms.
pub(crate) fn lq_sum_with(buf: &mut Vec<f64>, values: impl Iterator<Item = f64>, q: f64) -> f64 {
    if q.is_infinite() {
        return values.fold(0.0, f64::max);
    }
    buf.clear();
    buf.extend(values.map(|v| pow(v, q)));
    root(crate::field::pairwise_sum(buf), q)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormVariant {
    Isotropic,
    AnisoLast,
    AnisoLast2,
    MaximalIsotropic,
    MaximalAniso,
}

impl NormVariant {
    pub fn is_maximal(self) -> bool {
        matches!(self, Self::MaximalIsotropic | Self::MaximalAniso)
    }

    fn needs_r(self) -> bool {
        matches!(self, Self::AnisoLast | Self::AnisoLast2 | Self::MaximalAniso)
    }

    /// Number of trailing index coordinates that form the outer `l^r` block.
    fn outer_axes(self) -> usize {
        match self {
            Self::Isotropic | Self::MaximalIsotropic => 0,
            Self::AnisoLast | Self::MaximalAniso => 1,
            Self::AnisoLast2 => 2,
        }
    }
}

/// Selects one of the amalgam quasi-norms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormSpec {
    pub p: f64,
    pub q: f64,
    pub r: Option<f64>,
    pub s: f64,
    pub variant: NormVariant,
    pub b: Option<f64>,
}

impl NormSpec {
    pub fn isotropic(p: f64, q: f64, s: f64) -> Self {
        Self {
            p,
            q,
            r: None,
            s,
            variant: NormVariant::Isotropic,
            b: None,
        }
    }

    pub fn aniso_last(p: f64, q: f64, r: f64, s: f64) -> Self {
        Self {
            r: Some(r),
            variant: NormVariant::AnisoLast,
            ..Self::isotropic(p, q, s)
        }
    }

    pub fn aniso_last2(p: f64, q: f64, r: f64, s: f64) -> Self {
        Self {
            r: Some(r),
            variant: NormVariant::AnisoLast2,
            ..Self::isotropic(p, q, s)
        }
    }

    pub fn maximal_isotropic(p: f64, q: f64, s: f64, b: f64) -> Self {
        Self {
            b: Some(b),
            variant: NormVariant::MaximalIsotropic,
            ..Self::isotropic(p, q, s)
        }
    }

    pub fn maximal_aniso(p: f64, q: f64, r: f64, s: f64, b: f64) -> Self {
        Self {
            r: Some(r),
            b: Some(b),
            variant: NormVariant::MaximalAniso,
            ..Self::isotropic(p, q, s)
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_exponent("p", self.p)?;
        check_exponent("q", self.q)?;
        if !self.s.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "s must be finite, got {}",
                self.s
            )));
        }
        match (self.variant.needs_r(), self.r) {
            (true, Some(r)) => check_exponent("r", r)?,
            (true, None) => {
                return Err(Error::InvalidParameter(format!(
                    "{:?} needs an r exponent",
                    self.variant
                )))
            }
            (false, Some(_)) => {
                return Err(Error::InvalidParameter(format!(
                    "{:?} takes no r exponent",
                    self.variant
                )))
            }
            (false, None) => {}
        }
        match (self.variant.is_maximal(), self.b) {
            (true, Some(b)) if b.is_finite() && b > 0.0 => {}
            (true, Some(b)) => return Err(Error::InvalidParameter(format!("b must be positive, got {b}"))),
            (true, None) => {
                return Err(Error::InvalidParameter("maximal norms need b".into()));
            }
            (false, Some(_)) => {
                return Err(Error::InvalidParameter(format!(
                    "{:?} takes no b parameter",
                    self.variant
                )))
            }
            (false, None) => {}
        }
        Ok(())
    }

    /// Whether `b > n / min(p, q)`, the range where the maximal norms are
    /// known to be equivalent to the plain ones.
    pub fn maximal_threshold_met(&self, dimension: usize) -> bool {
        self.b
            .map(|b| b > dimension as f64 / self.p.min(self.q))
            .unwrap_or(false)
    }

    /// Same parameters without the maximal function.
    pub fn plain(&self) -> Self {
        match self.variant {
            NormVariant::MaximalIsotropic => Self::isotropic(self.p, self.q, self.s),
            NormVariant::MaximalAniso => Self::aniso_last(self.p, self.q, self.r.unwrap_or(self.q), self.s),
            _ => *self,
        }
    }
}

/// Groups of `(band position, weight)` sharing one outer index.
fn band_groups(bands: &BandSet, outer_axes: usize, s: f64) -> Vec<Vec<(usize, f64)>> {
    let n = bands.dimension();
    let split = n - outer_axes;
    let mut groups: BTreeMap<Vec<i64>, Vec<(usize, f64)>> = BTreeMap::new();
    for (pos, c) in bands.components().iter().enumerate() {
        let k = c.index();
        let entry = groups.entry(k[split..].to_vec()).or_default();
        if !c.is_zero() {
            entry.push((pos, bracket(&k[..split], s)));
        }
    }
    groups.into_values().collect()
}

/// Pointwise mixed sequence norm of the band magnitudes, before `L^p`.
///
/// `mags[pos]` holds the magnitude field of band `pos`, or `None` for an
/// identically zero band.
fn pointwise_profile(bands: &BandSet, mags: &[Option<Vec<f64>>], spec: &NormSpec) -> Result<RealField> {
    let groups = band_groups(bands, spec.variant.outer_axes(), spec.s);
    let (q, r) = (spec.q, spec.r.unwrap_or(spec.q));
    let values: Vec<f64> = (0..bands.spec().len())
        .into_par_iter()
        .map_init(
            || (Vec::new(), Vec::new()),
            |(terms, inner), x| {
                inner.clear();
                for g in &groups {
                    let v = lq_sum_with(
                        terms,
                        g.iter()
                            .map(|&(pos, w)| w * mags[pos].as_ref().map_or(0.0, |m| m[x])),
                        q,
                    );
                    inner.push(v);
                }
                if groups.len() == 1 {
                    inner[0]
                } else {
                    lq_sum_with(terms, inner.iter().copied(), r)
                }
            },
        )
        .collect();
    RealField::new(bands.spec().clone(), values)
}

fn check_bands(bands: &BandSet, spec: &NormSpec) -> Result<()> {
    spec.validate()?;
    if bands.is_empty() {
        return Err(Error::MissingBands("band set is empty".into()));
    }
    let n = bands.dimension();
    let need = match spec.variant.outer_axes() {
        0 => 1,
        1 => 2,
        _ => 3,
    };
    if n < need {
        return Err(Error::UnsupportedDimension(
            n,
            "anisotropic norms need n >= 2 (last axis) or n >= 3 (last two axes)",
        ));
    }
    Ok(())
}

fn plain_magnitudes(bands: &BandSet) -> Vec<Option<Vec<f64>>> {
    bands
        .components()
        .iter()
        .map(|c| (!c.is_zero()).then(|| c.magnitudes()))
        .collect()
}

fn maximal_magnitudes(bands: &BandSet, params: &MaximalParams) -> Result<Vec<Option<Vec<f64>>>> {
    let positions: Vec<usize> = (0..bands.spec().len()).collect();
    bands
        .components()
        .iter()
        .map(|c| {
            if c.is_zero() {
                Ok(None)
            } else {
                maximal_at(bands.spec(), &c.magnitudes(), params, &positions).map(Some)
            }
        })
        .collect()
}

/// The scalar field `x -> ||{<k>^s box_k f(x)}||` that the `L^p` norm is
/// taken of. Maximal variants use the integer-lattice supremum.
pub fn amalgam_profile(bands: &BandSet, spec: &NormSpec) -> Result<RealField> {
    amalgam_profile_with(bands, spec, ShiftLattice::Integer)
}

pub fn amalgam_profile_with(bands: &BandSet, spec: &NormSpec, shifts: ShiftLattice) -> Result<RealField> {
    check_bands(bands, spec)?;
    let mags = if spec.variant.is_maximal() {
        let params = MaximalParams {
            b: spec.b.expect("validated"),
            scale: 1.0,
            shifts,
        };
        maximal_magnitudes(bands, &params)?
    } else {
        plain_magnitudes(bands)
    };
    pointwise_profile(bands, &mags, spec)
}

/// Evaluates any variant; maximal variants use the integer-lattice supremum.
pub fn evaluate(bands: &BandSet, spec: &NormSpec) -> Result<f64> {
    amalgam_profile(bands, spec)?.lp_norm(spec.p)
}

fn expect_variant(spec: &NormSpec, allowed: &[NormVariant]) -> Result<()> {
    if !allowed.contains(&spec.variant) {
        return Err(Error::InvalidParameter(format!(
            "variant {:?} not accepted here",
            spec.variant
        )));
    }
    Ok(())
}

/// `|| ||{<k>^s box_k f}||_{l^q} ||_{L^p}`.
pub fn wiener_norm(bands: &BandSet, spec: &NormSpec) -> Result<f64> {
    expect_variant(spec, &[NormVariant::Isotropic])?;
    evaluate(bands, spec)
}

/// `L^p l^r_{k_n} l^q_{kbar}` with weight `<kbar>^s`.
pub fn aniso_norm(bands: &BandSet, spec: &NormSpec) -> Result<f64> {
    expect_variant(spec, &[NormVariant::AnisoLast])?;
    evaluate(bands, spec)
}

/// `L^p l^r_{(k_{n-1}, k_n)} l^q_{kbarbar}` with weight `<kbarbar>^s`.
pub fn aniso2_norm(bands: &BandSet, spec: &NormSpec) -> Result<f64> {
    expect_variant(spec, &[NormVariant::AnisoLast2])?;
    evaluate(bands, spec)
}

/// Maximal-function variant of the isotropic or last-axis norm.
pub fn maximal_wiener_norm(bands: &BandSet, spec: &NormSpec, shifts: ShiftLattice) -> Result<f64> {
    expect_variant(spec, &[NormVariant::MaximalIsotropic, NormVariant::MaximalAniso])?;
    amalgam_profile_with(bands, spec, shifts)?.lp_norm(spec.p)
}

/// Nonnegative sequence with finite support on `Z^n`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct WeightedSequence {
    dimension: usize,
    entries: BTreeMap<Vec<i64>, f64>,
}

impl WeightedSequence {
    pub fn new(dimension: usize) -> Self {
        Self {
            dimension,
            entries: BTreeMap::new(),
        }
    }

    pub fn from_entries(
        dimension: usize,
        entries: impl IntoIterator<Item = (Vec<i64>, f64)>,
    ) -> Result<Self> {
        let mut seq = Self::new(dimension);
        for (k, v) in entries {
            seq.insert(k, v)?;
        }
        Ok(seq)
    }

    /// Sets `a_k`; repeated indices overwrite.
    pub fn insert(&mut self, k: Vec<i64>, value: f64) -> Result<()> {
        if k.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                got: k.len(),
            });
        }
        if !(value.is_finite() && value >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sequence values must be finite and nonnegative, got {value}"
            )));
        }
        self.entries.insert(k, value);
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn get(&self, k: &[i64]) -> f64 {
        self.entries.get(k).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[i64], f64)> {
        self.entries.iter().map(|(k, v)| (k.as_slice(), *v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SequenceMode {
    /// `(sum_k <k>^{sq} a_k^q)^{1/q}`.
    Iso,
    /// `(sum_{k_n} (sum_{kbar} <kbar>^{sq} a_k^q)^{r/q})^{1/r}`.
    AnisoLast,
}

/// Weighted mixed sequence norm; infinite exponents become suprema.
pub fn sequence_mixed_norm(a: &WeightedSequence, q: f64, r: f64, s: f64, mode: SequenceMode) -> Result<f64> {
    check_exponent("q", q)?;
    match mode {
        SequenceMode::Iso => Ok(lq_sum(a.iter().map(|(k, v)| bracket(k, s) * v), q)),
        SequenceMode::AnisoLast => {
            check_exponent("r", r)?;
            let n = a.dimension();
            if n < 2 {
                return Err(Error::UnsupportedDimension(n, "last-axis split needs n >= 2"));
            }
            let mut slabs: BTreeMap<i64, Vec<f64>> = BTreeMap::new();
            for (k, v) in a.iter() {
                slabs
                    .entry(k[n - 1])
                    .or_default()
                    .push(bracket(&k[..n - 1], s) * v);
            }
            Ok(lq_sum(
                slabs.into_values().map(|slab| lq_sum(slab.into_iter(), q)),
                r,
            ))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomposition::decompose;
    use crate::field::{inverse_transform, GridSpec, SampledField, Spectrum};
    use crate::partition::{BumpProfile, WindowFamily};
    use num_complex::Complex64;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const INF: f64 = f64::INFINITY;

    fn grid2() -> (GridSpec, WindowFamily) {
        (
            GridSpec::uniform(2, 4, 32).unwrap(),
            WindowFamily::new(2, 2, BumpProfile::default()).unwrap(),
        )
    }

    fn random_field(spec: &GridSpec, reach: f64, seed: u64) -> SampledField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = Spectrum::zeros(spec.clone());
        for flat in 0..spec.len() {
            if s.frequency_at(flat).iter().all(|v| v.abs() <= reach) && rng.gen_bool(0.4) {
                s.coefficients_mut()[flat] =
                    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            }
        }
        inverse_transform(&s)
    }

    /// Literal double sum over samples and bands, used when p = q.
    fn double_sum_oracle(bands: &BandSet, q: f64, s: f64, weight_axes: usize) -> f64 {
        let cell = bands.spec().cell_volume();
        let mut total = 0.0;
        for c in bands.components() {
            let w = bracket(&c.index()[..weight_axes], s);
            for v in c.field().values() {
                total += (w * v.norm()).powf(q);
            }
        }
        (cell * total).powf(1.0 / q)
    }

    #[test]
    fn bracket_examples() {
        assert_eq!(bracket(&[0, 0], 3.7), 1.0);
        assert!((bracket(&[3, 4], 1.0) - 26f64.sqrt()).abs() < 1e-15);
        assert_eq!(bracket(&[5, -2, 1], 0.0), 1.0);
    }

    #[test]
    fn spec_validation() {
        assert!(NormSpec::isotropic(2.0, 1.0, 0.5).validate().is_ok());
        assert!(NormSpec::isotropic(0.0, 1.0, 0.5).validate().is_err());
        assert!(NormSpec::isotropic(2.0, -1.0, 0.5).validate().is_err());
        assert!(NormSpec::aniso_last(2.0, 1.0, INF, 0.0).validate().is_ok());
        let mut bad = NormSpec::isotropic(2.0, 1.0, 0.0);
        bad.r = Some(1.0);
        assert!(bad.validate().is_err());
        bad = NormSpec::aniso_last(2.0, 1.0, 1.0, 0.0);
        bad.r = None;
        assert!(bad.validate().is_err());
        bad = NormSpec::maximal_isotropic(2.0, 2.0, 0.0, 1.0);
        bad.b = None;
        assert!(bad.validate().is_err());
        assert!(NormSpec::maximal_isotropic(2.0, 2.0, 0.0, 1.01).maximal_threshold_met(2));
        assert!(!NormSpec::maximal_isotropic(2.0, 2.0, 0.0, 0.9).maximal_threshold_met(2));
    }

    #[test]
    fn single_tone_norms() {
        let spec = GridSpec::uniform(2, 4, 64).unwrap();
        let fam = WindowFamily::new(2, 4, BumpProfile::default()).unwrap();
        let f = SampledField::tone(spec, &[3, 4]).unwrap();
        let bands = decompose(&f, &fam).unwrap();
        for (p, q) in [(2.0, 1.0), (1.0, 2.0), (0.5, 0.7), (3.0, INF), (INF, 2.0)] {
            // L = 4, n = 2: the unit-modulus band has L^p norm (L^n)^{1/p}
            let want = 26f64.sqrt() * 16f64.powf(if p == INF { 0.0 } else { 1.0 / p });
            let got = wiener_norm(&bands, &NormSpec::isotropic(p, q, 1.0)).unwrap();
            let tol = if q < 1.0 { 1e-6 } else { 1e-10 };
            assert!((got - want).abs() <= tol * want, "p={p} q={q}: {got} vs {want}");

            let aniso_want = bracket(&[3], 1.0) * 16f64.powf(if p == INF { 0.0 } else { 1.0 / p });
            let got = aniso_norm(&bands, &NormSpec::aniso_last(p, q, 1.0, 1.0)).unwrap();
            assert!((got - aniso_want).abs() <= 1e-10 * aniso_want);
            // r < 1 lifts roundoff-level bands to about eps^r
            let got = aniso_norm(&bands, &NormSpec::aniso_last(p, q, 0.5, 1.0)).unwrap();
            assert!((got - aniso_want).abs() <= 1e-6 * aniso_want);
        }
    }

    #[test]
    fn zero_field_has_zero_norm() {
        let (spec, fam) = grid2();
        let bands = decompose(&SampledField::zeros(spec), &fam).unwrap();
        assert_eq!(
            wiener_norm(&bands, &NormSpec::isotropic(2.0, 1.0, 0.5)).unwrap(),
            0.0
        );
        assert_eq!(
            maximal_wiener_norm(
                &bands,
                &NormSpec::maximal_isotropic(2.0, 1.0, 0.5, 2.1),
                ShiftLattice::Integer
            )
            .unwrap(),
            0.0
        );
    }

    #[test]
    fn order_swap_identity_at_p_equals_q() {
        let (spec, fam) = grid2();
        for seed in 0..4 {
            let bands = decompose(&random_field(&spec, 1.0, seed), &fam).unwrap();
            for (q, s) in [(2.0, 0.0), (1.0, 0.5), (0.6, 1.3), (3.0, -0.4)] {
                let got = wiener_norm(&bands, &NormSpec::isotropic(q, q, s)).unwrap();
                let want = double_sum_oracle(&bands, q, s, 2);
                assert!((got - want).abs() <= 1e-12 * want);
                // the anisotropic norm with r = q regroups the same sum, weighted by <kbar>
                let got = aniso_norm(&bands, &NormSpec::aniso_last(q, q, q, s)).unwrap();
                let want = double_sum_oracle(&bands, q, s, 1);
                assert!((got - want).abs() <= 1e-12 * want);
            }
        }
    }

    #[test]
    fn aniso_on_stacked_tones_matches_direct_sum() {
        // bands live only at kbar = 0, so the inner l^q is a single term
        let spec = GridSpec::uniform(2, 4, 64).unwrap();
        let fam = WindowFamily::new(2, 4, BumpProfile::default()).unwrap();
        let mut f = SampledField::zeros(spec.clone());
        for (kn, amp) in [(-2i64, 0.4), (0, 1.0), (3, -0.7)] {
            f = f
                .combine(
                    Complex64::new(1.0, 0.0),
                    &SampledField::tone(spec.clone(), &[0, kn]).unwrap(),
                    Complex64::new(amp, 0.2),
                )
                .unwrap();
        }
        let bands = decompose(&f, &fam).unwrap();
        let p = 1.5;
        let direct: Vec<f64> = (0..spec.len())
            .map(|x| {
                bands
                    .components()
                    .iter()
                    .filter(|c| c.index()[0] == 0)
                    .map(|c| c.field().values()[x].norm())
                    .sum()
            })
            .collect();
        let want = crate::field::lp_of_magnitudes(&direct, spec.cell_volume(), p);
        let got = aniso_norm(&bands, &NormSpec::aniso_last(p, 2.0, 1.0, 0.8)).unwrap();
        assert!((got - want).abs() <= 1e-12 * want);
    }

    #[test]
    fn aniso2_examples() {
        let spec = GridSpec::uniform(3, 4, 32).unwrap();
        let fam = WindowFamily::new(3, 2, BumpProfile::default()).unwrap();
        let tone = SampledField::tone(spec.clone(), &[1, -1, 2]).unwrap();
        let bands = decompose(&tone, &fam).unwrap();
        let want = bracket(&[1], 0.7) * 64f64.powf(1.0 / 2.0);
        let got = aniso2_norm(&bands, &NormSpec::aniso_last2(2.0, 1.0, 1.0, 0.7)).unwrap();
        assert!((got - want).abs() <= 1e-10 * want);
        let got = aniso2_norm(&bands, &NormSpec::aniso_last2(2.0, 1.0, 0.5, 0.7)).unwrap();
        assert!((got - want).abs() <= 1e-6 * want);

        // bands only at kbarbar = 0: plain l^r over (k_2, k_3)
        let mut f = SampledField::zeros(spec.clone());
        for (k2, k3, amp) in [(0i64, 0i64, 1.0), (1, -1, 0.5), (-1, 1, 0.8)] {
            f = f
                .combine(
                    Complex64::new(1.0, 0.0),
                    &SampledField::tone(spec.clone(), &[0, k2, k3]).unwrap(),
                    Complex64::new(amp, 0.0),
                )
                .unwrap();
        }
        let bands = decompose(&f, &fam).unwrap();
        let (p, r) = (2.0, 0.5);
        let direct: Vec<f64> = (0..spec.len())
            .map(|x| {
                let terms = bands.components().iter().map(|c| c.field().values()[x].norm());
                lq_sum(terms, r)
            })
            .collect();
        let want = crate::field::lp_of_magnitudes(&direct, spec.cell_volume(), p);
        let got = aniso2_norm(&bands, &NormSpec::aniso_last2(p, 3.0, r, 1.1)).unwrap();
        assert!((got - want).abs() <= 1e-12 * want);

        // r = q with s = 0 regroups the isotropic sum
        let iso = wiener_norm(&bands, &NormSpec::isotropic(1.5, 1.5, 0.0)).unwrap();
        let grouped = aniso2_norm(&bands, &NormSpec::aniso_last2(1.5, 1.5, 1.5, 0.0)).unwrap();
        assert!((iso - grouped).abs() <= 1e-12 * iso);
    }

    #[test]
    fn dimension_checks() {
        let (spec, fam) = grid2();
        let bands = decompose(&SampledField::zeros(spec), &fam).unwrap();
        assert!(matches!(
            aniso2_norm(&bands, &NormSpec::aniso_last2(2.0, 1.0, 1.0, 0.0)),
            Err(Error::UnsupportedDimension(2, _))
        ));
        let line = GridSpec::uniform(1, 4, 32).unwrap();
        let bands = decompose(&SampledField::zeros(line), &fam.with_dimension(1).unwrap()).unwrap();
        assert!(aniso_norm(&bands, &NormSpec::aniso_last(2.0, 1.0, 1.0, 0.0)).is_err());
        assert!(wiener_norm(&bands, &NormSpec::aniso_last(2.0, 1.0, 1.0, 0.0)).is_err());
    }

    #[test]
    fn maximal_norm_dominates_and_matches_on_tones() {
        let (spec, fam) = grid2();
        let tone = decompose(&SampledField::tone(spec.clone(), &[1, 0]).unwrap(), &fam).unwrap();
        let plain = wiener_norm(&tone, &NormSpec::isotropic(2.0, 2.0, 0.0)).unwrap();
        let max = maximal_wiener_norm(
            &tone,
            &NormSpec::maximal_isotropic(2.0, 2.0, 0.0, 1.01),
            ShiftLattice::Integer,
        )
        .unwrap();
        assert!((plain - max).abs() <= 1e-12 * plain);

        let bands = decompose(&random_field(&spec, 1.0, 3), &fam).unwrap();
        for shifts in [ShiftLattice::Integer, ShiftLattice::Grid] {
            let spec_m = NormSpec::maximal_aniso(2.0, 1.0, 0.5, 0.3, 2.5);
            let m = maximal_wiener_norm(&bands, &spec_m, shifts).unwrap();
            let p = aniso_norm(&bands, &spec_m.plain()).unwrap();
            assert!(m >= p);
        }
    }

    #[test]
    fn sequence_norm_examples() {
        let mut delta = WeightedSequence::new(2);
        delta.insert(vec![0, 0], 1.0).unwrap();
        for mode in [SequenceMode::Iso, SequenceMode::AnisoLast] {
            for (q, r, s) in [
                (1.0, 1.0, 0.0),
                (0.5, 3.0, 2.0),
                (INF, 2.0, 1.0),
                (2.0, INF, -1.0),
            ] {
                assert_eq!(sequence_mixed_norm(&delta, q, r, s, mode).unwrap(), 1.0);
            }
        }
        let ones = WeightedSequence::from_entries(
            2,
            (-1..=1).flat_map(|i| (-1..=1).map(move |j| (vec![i, j], 1.0))),
        )
        .unwrap();
        for mode in [SequenceMode::Iso, SequenceMode::AnisoLast] {
            assert_eq!(sequence_mixed_norm(&ones, 1.0, 1.0, 0.0, mode).unwrap(), 9.0);
        }
        assert!(delta.clone().insert(vec![1], 1.0).is_err());
        assert!(delta.clone().insert(vec![1, 1], -1.0).is_err());
        let line = WeightedSequence::from_entries(1, [(vec![0], 1.0)]).unwrap();
        assert!(sequence_mixed_norm(&line, 1.0, 1.0, 0.0, SequenceMode::AnisoLast).is_err());
    }

    fn random_sequence(n: usize, seed: u64) -> WeightedSequence {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut seq = WeightedSequence::new(n);
        for _ in 0..40 {
            let k: Vec<i64> = (0..n).map(|_| rng.gen_range(-6..=6)).collect();
            seq.insert(k, rng.gen_range(0.0..3.0)).unwrap();
        }
        seq
    }

    #[test]
    fn sequence_norm_matches_naive_sum() {
        for seed in 0..20 {
            let seq = random_sequence(3, seed);
            let (q, s) = (1.7, 0.6);
            let mut naive = 0.0;
            for (k, v) in seq.iter() {
                let norm2: f64 = k.iter().map(|&x| (x * x) as f64).sum();
                naive += ((1.0 + norm2).sqrt().powf(s) * v).powf(q);
            }
            let got = sequence_mixed_norm(&seq, q, q, s, SequenceMode::Iso).unwrap();
            assert!((got - naive.powf(1.0 / q)).abs() <= 1e-14 * got.max(1.0));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn sequence_lq_is_nonincreasing_in_q(seed in 0u64..10_000, q1 in 0.2f64..4.0, dq in 0.0f64..4.0, s in -1.0f64..2.0) {
            let seq = random_sequence(2, seed);
            let lo = sequence_mixed_norm(&seq, q1, 1.0, s, SequenceMode::Iso).unwrap();
            let hi = sequence_mixed_norm(&seq, q1 + dq, 1.0, s, SequenceMode::Iso).unwrap();
            let sup = sequence_mixed_norm(&seq, INF, 1.0, s, SequenceMode::Iso).unwrap();
            prop_assert!(hi <= lo * (1.0 + 1e-12));
            prop_assert!(sup <= hi * (1.0 + 1e-12));
        }

        #[test]
        fn wiener_norm_is_monotone_in_s_and_homogeneous(
            seed in 0u64..200, s2 in -1.0f64..1.5, ds in 0.0f64..1.5,
            p in 0.5f64..3.0, q in 0.5f64..3.0, cr in -2.0f64..2.0, ci in -2.0f64..2.0,
        ) {
            let (spec, fam) = grid2();
            let f = random_field(&spec, 1.0, seed);
            let bands = decompose(&f, &fam).unwrap();
            let lo = wiener_norm(&bands, &NormSpec::isotropic(p, q, s2)).unwrap();
            let hi = wiener_norm(&bands, &NormSpec::isotropic(p, q, s2 + ds)).unwrap();
            prop_assert!(hi >= lo * (1.0 - 1e-13));

            let c = Complex64::new(cr, ci);
            let scaled = bands.scale(c);
            for spec_n in [
                NormSpec::isotropic(p, q, s2),
                NormSpec::aniso_last(p, q, 0.7, s2),
                NormSpec::isotropic(p, INF, s2),
                NormSpec::aniso_last(INF, q, INF, s2),
            ] {
                let a = evaluate(&scaled, &spec_n).unwrap();
                let b = c.norm() * evaluate(&bands, &spec_n).unwrap();
                prop_assert!((a - b).abs() <= 1e-13 * b.max(1e-300));
            }
        }
    }
}
