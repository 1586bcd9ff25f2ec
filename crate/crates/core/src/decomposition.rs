//! Frequency-uniform decomposition `box_k f = F^{-1}(phi_k f^)`, the mixed
//! operator `box_{kbar,l}`, reconstruction, and the shift maximal function.

use std::fs;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{self, GridSpec, NdFft, RealField, SampledField, Spectrum};
use crate::partition::{BumpProfile, WindowFamily};

/// One band `box_k f`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandComponent {
    index: Vec<i64>,
    field: SampledField,
    zero: bool,
}

impl BandComponent {
    fn new(index: Vec<i64>, field: SampledField) -> Self {
        let zero = field.values().iter().all(|v| v.re == 0.0 && v.im == 0.0);
        Self { index, field, zero }
    }

    pub fn index(&self) -> &[i64] {
        &self.index
    }

    pub fn field(&self) -> &SampledField {
        &self.field
    }

    /// True when every sample is exactly zero.
    pub fn is_zero(&self) -> bool {
        self.zero
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.field.values().iter().map(|v| v.norm()).collect()
    }
}

/// The dense family `{box_k f : max_i |k_i| <= K}` in the row-major order of
/// [`WindowFamily::indices`].
#[derive(Debug, Clone, PartialEq)]
pub struct BandSet {
    spec: GridSpec,
    family: WindowFamily,
    components: Vec<BandComponent>,
}

impl BandSet {
    pub fn new(spec: GridSpec, family: WindowFamily, components: Vec<BandComponent>) -> Result<Self> {
        if components.len() != family.len() {
            return Err(Error::MissingBands(format!(
                "expected {} components, got {}",
                family.len(),
                components.len()
            )));
        }
        for (pos, c) in components.iter().enumerate() {
            if c.field.spec() != &spec {
                return Err(Error::Geometry("band components live on different grids".into()));
            }
            if family.position_of(&c.index) != Some(pos) {
                return Err(Error::MissingBands(format!(
                    "component {pos} carries index {:?}",
                    c.index
                )));
            }
        }
        Ok(Self {
            spec,
            family,
            components,
        })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn family(&self) -> &WindowFamily {
        &self.family
    }

    pub fn dimension(&self) -> usize {
        self.spec.dimension()
    }

    pub fn components(&self) -> &[BandComponent] {
        &self.components
    }

    pub fn get(&self, k: &[i64]) -> Option<&BandComponent> {
        self.family.position_of(k).map(|p| &self.components[p])
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Every component multiplied by `c`.
    pub fn scale(&self, c: Complex64) -> Self {
        let components = self
            .components
            .iter()
            .map(|b| BandComponent::new(b.index.clone(), b.field.scale(c)))
            .collect();
        Self {
            spec: self.spec.clone(),
            family: self.family,
            components,
        }
    }

    /// Number of bands whose sup-norm exceeds `tol`.
    pub fn count_above(&self, tol: f64) -> usize {
        self.components
            .iter()
            .filter(|c| !c.is_zero() && c.field.max_abs() > tol)
            .count()
    }
}

/// Separable Fourier multiplier stored as one nonzero list per axis of
/// `(centered slot, value)`.
struct SeparableMask {
    axes: Vec<Vec<(usize, f64)>>,
}

impl SeparableMask {
    fn from_tables(tables: Vec<Vec<f64>>) -> Self {
        let axes = tables
            .into_iter()
            .map(|t| t.into_iter().enumerate().filter(|(_, v)| *v != 0.0).collect())
            .collect();
        Self { axes }
    }

    fn is_zero(&self) -> bool {
        self.axes.iter().any(|a| a.is_empty())
    }

    /// Returns `mask * spectrum` as a new spectrum.
    fn apply(&self, spectrum: &Spectrum) -> Spectrum {
        let spec = spectrum.spec();
        let mut out = Spectrum::zeros(spec.clone());
        if self.is_zero() {
            return out;
        }
        let strides = spec.strides();
        let n = self.axes.len();
        let mut cursor = vec![0usize; n];
        let src = spectrum.coefficients();
        let dst = out.coefficients_mut();
        loop {
            let mut flat = 0usize;
            let mut weight = 1.0;
            for a in 0..n {
                let (slot, v) = self.axes[a][cursor[a]];
                flat += slot * strides[a];
                weight *= v;
            }
            dst[flat] = src[flat] * weight;
            let mut a = n;
            loop {
                if a == 0 {
                    return out;
                }
                a -= 1;
                cursor[a] += 1;
                if cursor[a] < self.axes[a].len() {
                    break;
                }
                cursor[a] = 0;
            }
        }
    }
}

/// Reusable decomposition engine for one grid and one window family.
///
/// Per-axis window values at every representable frequency are tabulated
/// once; each band is then a separable mask plus one inverse transform.
pub struct Decomposer {
    spec: GridSpec,
    family: WindowFamily,
    fft: NdFft,
    // axis_tables[a][j + K][c] = phi^{(1)}_j(xi_c) on axis a
    axis_tables: Vec<Vec<Vec<f64>>>,
}

impl Decomposer {
    pub fn new(spec: GridSpec, family: WindowFamily) -> Result<Self> {
        spec.check_window_compat(&family)?;
        let k = family.truncation_radius();
        let axis_tables = (0..spec.dimension())
            .map(|a| {
                (-k..=k)
                    .map(|j| {
                        (0..spec.samples()[a])
                            .map(|c| family.axis_window(j, spec.frequency(a, c)))
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let fft = NdFft::new(&spec);
        Ok(Self {
            spec,
            family,
            fft,
            axis_tables,
        })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn family(&self) -> &WindowFamily {
        &self.family
    }

    fn check_field(&self, f: &SampledField) -> Result<()> {
        if f.spec() != &self.spec {
            return Err(Error::Geometry(format!(
                "field grid {:?} does not match decomposer grid {:?}",
                f.spec(),
                self.spec
            )));
        }
        Ok(())
    }

    fn check_index(&self, k: &[i64]) -> Result<()> {
        if self.family.position_of(k).is_none() {
            if k.len() != self.family.dimension() {
                return Err(Error::DimensionMismatch {
                    expected: self.family.dimension(),
                    got: k.len(),
                });
            }
            return Err(Error::IndexOutOfRange {
                index: k.to_vec(),
                radius: self.family.truncation_radius(),
            });
        }
        Ok(())
    }

    fn table(&self, axis: usize, j: i64) -> &[f64] {
        &self.axis_tables[axis][(j + self.family.truncation_radius()) as usize]
    }

    fn band_mask(&self, k: &[i64]) -> SeparableMask {
        SeparableMask::from_tables(
            k.iter()
                .enumerate()
                .map(|(a, &j)| self.table(a, j).to_vec())
                .collect(),
        )
    }

    pub fn spectrum(&self, f: &SampledField) -> Result<Spectrum> {
        self.check_field(f)?;
        Ok(self.fft.forward(f))
    }

    fn band_from_spectrum(&self, spectrum: &Spectrum, k: &[i64]) -> BandComponent {
        let mask = self.band_mask(k);
        let field = if mask.is_zero() {
            SampledField::zeros(self.spec.clone())
        } else {
            self.fft.inverse(&mask.apply(spectrum))
        };
        BandComponent::new(k.to_vec(), field)
    }

    /// `box_k f`.
    pub fn box_op(&self, f: &SampledField, k: &[i64]) -> Result<BandComponent> {
        self.check_index(k)?;
        let spectrum = self.spectrum(f)?;
        Ok(self.band_from_spectrum(&spectrum, k))
    }

    /// All bands from a single forward transform.
    pub fn decompose(&self, f: &SampledField) -> Result<BandSet> {
        let spectrum = self.spectrum(f)?;
        let components = (0..self.family.len())
            .into_par_iter()
            .map(|pos| self.band_from_spectrum(&spectrum, &self.family.index_at(pos)))
            .collect();
        Ok(BandSet {
            spec: self.spec.clone(),
            family: self.family,
            components,
        })
    }

    /// `box_{kbar,l} f = F^{-1}(phi_kbar(xibar) phi_l(xi) f^)`. `reduced`
    /// supplies the `(n-1)`-dimensional windows.
    pub fn mixed_box_op(
        &self,
        f: &SampledField,
        reduced: &WindowFamily,
        kbar: &[i64],
        l: &[i64],
    ) -> Result<BandComponent> {
        let spectrum = self.spectrum(f)?;
        self.mixed_from_spectrum(&spectrum, reduced, kbar, l)
    }

    pub(crate) fn mixed_from_spectrum(
        &self,
        spectrum: &Spectrum,
        reduced: &WindowFamily,
        kbar: &[i64],
        l: &[i64],
    ) -> Result<BandComponent> {
        let n = self.spec.dimension();
        if reduced.dimension() + 1 != n {
            return Err(Error::DimensionMismatch {
                expected: n.saturating_sub(1),
                got: reduced.dimension(),
            });
        }
        if kbar.len() + 1 != n {
            return Err(Error::DimensionMismatch {
                expected: n.saturating_sub(1),
                got: kbar.len(),
            });
        }
        self.check_index(l)?;
        if reduced.position_of(kbar).is_none() {
            return Err(Error::IndexOutOfRange {
                index: kbar.to_vec(),
                radius: reduced.truncation_radius(),
            });
        }
        let far = kbar.iter().zip(l).any(|(a, b)| (a - b).abs() >= 2);
        if far {
            return Ok(BandComponent::new(
                l.to_vec(),
                SampledField::zeros(self.spec.clone()),
            ));
        }
        let mut tables: Vec<Vec<f64>> = Vec::with_capacity(n);
        for a in 0..n {
            let base = self.table(a, l[a]);
            if a + 1 < n {
                tables.push(
                    base.iter()
                        .enumerate()
                        .map(|(c, v)| v * reduced.axis_window(kbar[a], self.spec.frequency(a, c)))
                        .collect(),
                );
            } else {
                tables.push(base.to_vec());
            }
        }
        let mask = SeparableMask::from_tables(tables);
        let field = if mask.is_zero() {
            SampledField::zeros(self.spec.clone())
        } else {
            self.fft.inverse(&mask.apply(spectrum))
        };
        Ok(BandComponent::new(l.to_vec(), field))
    }
}

pub fn box_op(f: &SampledField, k: &[i64], family: &WindowFamily) -> Result<BandComponent> {
    Decomposer::new(f.spec().clone(), *family)?.box_op(f, k)
}

pub fn decompose(f: &SampledField, family: &WindowFamily) -> Result<BandSet> {
    Decomposer::new(f.spec().clone(), *family)?.decompose(f)
}

pub fn mixed_box_op(
    f: &SampledField,
    kbar: &[i64],
    l: &[i64],
    full: &WindowFamily,
    reduced: &WindowFamily,
) -> Result<BandComponent> {
    Decomposer::new(f.spec().clone(), *full)?.mixed_box_op(f, reduced, kbar, l)
}

/// Pointwise sum of all components.
pub fn reconstruct(bands: &BandSet) -> Result<SampledField> {
    if bands.components.is_empty() || bands.components.len() != bands.family.len() {
        return Err(Error::MissingBands(format!(
            "have {} of {} components",
            bands.components.len(),
            bands.family.len()
        )));
    }
    let mut acc = vec![Complex64::default(); bands.spec.len()];
    for c in bands.components.iter().filter(|c| !c.is_zero()) {
        for (a, v) in acc.iter_mut().zip(c.field.values()) {
            *a += v;
        }
    }
    SampledField::new(bands.spec.clone(), acc)
}

/// Which translates `y` enter the supremum of the maximal function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShiftLattice {
    /// `y` in `Z^n`, folded to the torus.
    Integer,
    /// Every sample shift `y` in `(L/N) Z^n`.
    Grid,
}

/// Parameters of `sup_y |g(x - y)| / (1 + |scale * y|^b)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaximalParams {
    pub b: f64,
    pub scale: f64,
    pub shifts: ShiftLattice,
}

impl MaximalParams {
    /// The lattice supremum with unit scale.
    pub fn lattice(b: f64) -> Self {
        Self {
            b,
            scale: 1.0,
            shifts: ShiftLattice::Integer,
        }
    }

    pub fn grid(b: f64) -> Self {
        Self {
            b,
            scale: 1.0,
            shifts: ShiftLattice::Grid,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.b.is_finite() && self.b > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "maximal exponent b must be positive, got {}",
                self.b
            )));
        }
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "maximal scale must be positive, got {}",
                self.scale
            )));
        }
        Ok(())
    }
}

struct Shift {
    offsets: Vec<usize>,
    weight: f64,
}

/// Shifts with `max_i |y_i| <= L_i / 2`, each folded to its minimal-norm
/// representative, sorted by increasing weight. The zero shift is excluded.
fn shift_table(spec: &GridSpec, params: &MaximalParams) -> Result<Vec<Shift>> {
    let n = spec.dimension();
    // per axis: (sample offset, signed displacement)
    let mut axes: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
    for a in 0..n {
        let (count, step, unit) = match params.shifts {
            ShiftLattice::Integer => {
                let (l, nn) = (spec.period()[a], spec.samples()[a]);
                if nn % l != 0 {
                    return Err(Error::Geometry(format!(
                        "axis {a}: integer shifts need N divisible by L (N={nn}, L={l})"
                    )));
                }
                (l, nn / l, 1.0)
            }
            ShiftLattice::Grid => (spec.samples()[a], 1, spec.spacing(a)),
        };
        axes.push(
            (0..count)
                .map(|r| {
                    let signed = if 2 * r <= count {
                        r as i64
                    } else {
                        r as i64 - count as i64
                    };
                    (r * step, signed as f64 * unit)
                })
                .collect(),
        );
    }
    let total: usize = axes.iter().map(|a| a.len()).product();
    let mut shifts = Vec::with_capacity(total.saturating_sub(1));
    let mut cursor = vec![0usize; n];
    for _ in 0..total {
        let norm2: f64 = (0..n).map(|a| axes[a][cursor[a]].1.powi(2)).sum();
        if norm2 > 0.0 {
            let dist = params.scale * norm2.sqrt();
            shifts.push(Shift {
                offsets: (0..n).map(|a| axes[a][cursor[a]].0).collect(),
                weight: 1.0 + dist.powf(params.b),
            });
        }
        for a in (0..n).rev() {
            cursor[a] += 1;
            if cursor[a] < axes[a].len() {
                break;
            }
            cursor[a] = 0;
        }
    }
    // stable sort keeps enumeration order among ties
    shifts.sort_by(|x, y| x.weight.total_cmp(&y.weight));
    Ok(shifts)
}

/// Magnitudes repeated twice along every axis, so that `x - y` for a sample
/// `x` and a shift offset `0 <= y < N` is a plain index into the copy.
struct Padded {
    values: Vec<f64>,
    strides: Vec<usize>,
}

impl Padded {
    fn new(spec: &GridSpec, mags: &[f64]) -> Self {
        let dims = spec.samples();
        let n = dims.len();
        let mut strides = vec![1usize; n];
        for a in (0..n.saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * 2 * dims[a + 1];
        }
        let total: usize = dims.iter().map(|d| 2 * d).product();
        let mut values = vec![0.0; total];
        let mut idx = vec![0usize; n];
        for (flat, v) in values.iter_mut().enumerate() {
            let mut rest = flat;
            let mut src = 0;
            for a in (0..n).rev() {
                idx[a] = rest % (2 * dims[a]);
                rest /= 2 * dims[a];
            }
            for a in 0..n {
                src = src * dims[a] + idx[a] % dims[a];
            }
            *v = mags[src];
        }
        Self { values, strides }
    }

    fn offset(&self, shift: &[usize]) -> usize {
        shift.iter().zip(&self.strides).map(|(o, s)| o * s).sum()
    }
}

/// Evaluates the maximal function of the magnitudes `mags` at the requested
/// flat sample positions.
pub(crate) fn maximal_at(
    spec: &GridSpec,
    mags: &[f64],
    params: &MaximalParams,
    positions: &[usize],
) -> Result<Vec<f64>> {
    params.validate()?;
    let table = shift_table(spec, params)?;
    let peak = mags.iter().copied().fold(0.0, f64::max);
    if peak == 0.0 {
        return Ok(positions.iter().map(|&x| mags[x]).collect());
    }
    let padded = Padded::new(spec, mags);
    // (offset into the padded copy, 1 / weight, weight)
    let shifts: Vec<(usize, f64, f64)> = table
        .iter()
        .map(|s| (padded.offset(&s.offsets), 1.0 / s.weight, s.weight))
        .collect();
    let dims = spec.samples();
    Ok(positions
        .par_iter()
        .map(|&x| {
            let mut best = mags[x];
            let idx = spec.unravel(x);
            // x + N in padded coordinates, so that subtracting any offset stays in range
            let base: usize = idx
                .iter()
                .zip(dims)
                .zip(&padded.strides)
                .map(|((i, d), s)| (i + d) * s)
                .sum();
            for &(delta, inv, weight) in &shifts {
                if peak <= best * weight {
                    break;
                }
                let v = padded.values[base - delta] * inv;
                if v > best {
                    best = v;
                }
            }
            best
        })
        .collect())
}

/// The shift maximal function of a band, at every sample.
pub fn maximal_op(band: &BandComponent, params: &MaximalParams) -> Result<RealField> {
    maximal_of_field(band.field(), params)
}

pub fn maximal_of_field(f: &SampledField, params: &MaximalParams) -> Result<RealField> {
    let spec = f.spec();
    let mags: Vec<f64> = f.values().iter().map(|v| v.norm()).collect();
    let positions: Vec<usize> = (0..spec.len()).collect();
    let values = maximal_at(spec, &mags, params, &positions)?;
    RealField::new(spec.clone(), values)
}

#[derive(Debug, Serialize, Deserialize)]
struct BandIndexFile {
    grid: GridRecord,
    #[serde(rename = "K")]
    truncation_radius: i64,
    window: BumpProfile,
    bands: Vec<BandRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
struct GridRecord {
    n: usize,
    #[serde(rename = "L")]
    period: Vec<usize>,
    #[serde(rename = "N")]
    samples: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct BandRecord {
    k: Vec<i64>,
    file: String,
}

pub fn band_file_name(k: &[i64]) -> String {
    let parts: Vec<String> = k.iter().map(|v| v.to_string()).collect();
    format!("band_{}.amf", parts.join("_"))
}

/// Writes one AMF file per band plus `index.json` into `dir`.
pub fn export_bandset(bands: &BandSet, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut records = Vec::with_capacity(bands.len());
    for c in bands.components() {
        let name = band_file_name(c.index());
        field::save_amf(c.field(), dir.join(&name))?;
        records.push(BandRecord {
            k: c.index().to_vec(),
            file: name,
        });
    }
    let index = BandIndexFile {
        grid: GridRecord {
            n: bands.dimension(),
            period: bands.spec().period().to_vec(),
            samples: bands.spec().samples().to_vec(),
        },
        truncation_radius: bands.family().truncation_radius(),
        window: *bands.family().bump(),
        bands: records,
    };
    fs::write(dir.join("index.json"), serde_json::to_vec_pretty(&index)?)?;
    Ok(())
}

pub fn import_bandset(dir: impl AsRef<Path>) -> Result<BandSet> {
    let dir = dir.as_ref();
    let index: BandIndexFile = serde_json::from_slice(&fs::read(dir.join("index.json"))?)?;
    let spec = GridSpec::new(index.grid.period, index.grid.samples)?;
    if spec.dimension() != index.grid.n {
        return Err(Error::Format("index n does not match grid arrays".into()));
    }
    let family = WindowFamily::new(spec.dimension(), index.truncation_radius, index.window)?;
    let mut components = Vec::with_capacity(index.bands.len());
    for rec in index.bands {
        let field = field::load_amf(dir.join(&rec.file))?;
        components.push(BandComponent::new(rec.k, field));
    }
    BandSet::new(spec, family, components)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{forward_transform, inverse_transform};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn setup() -> (GridSpec, WindowFamily) {
        (
            GridSpec::uniform(2, 4, 64).unwrap(),
            WindowFamily::new(2, 4, BumpProfile::default()).unwrap(),
        )
    }

    /// Random trigonometric polynomial with frequencies in `max |xi_i| <= reach`.
    fn band_limited(spec: &GridSpec, reach: f64, seed: u64) -> SampledField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = Spectrum::zeros(spec.clone());
        for flat in 0..spec.len() {
            let xi = s.frequency_at(flat);
            if xi.iter().all(|v| v.abs() <= reach) && rng.gen_bool(0.3) {
                s.coefficients_mut()[flat] = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            }
        }
        inverse_transform(&s)
    }

    #[test]
    fn tone_lands_in_its_own_band() {
        let (spec, fam) = setup();
        let f = SampledField::tone(spec, &[2, -3]).unwrap();
        let bands = decompose(&f, &fam).unwrap();
        assert_eq!(bands.count_above(1e-12), 1);
        let own = bands.get(&[2, -3]).unwrap();
        assert!(own.field().max_abs_difference(&f) < 1e-12);
        for b in bands.components() {
            if b.index() != [2, -3] {
                assert!(b.field().max_abs() < 1e-13);
            }
        }
    }

    #[test]
    fn separated_tones_give_two_bands() {
        let (spec, fam) = setup();
        let f = SampledField::tone(spec.clone(), &[0, 1])
            .unwrap()
            .combine(
                c(1.0, 0.0),
                &SampledField::tone(spec, &[2, -1]).unwrap(),
                c(0.5, 0.5),
            )
            .unwrap();
        let bands = decompose(&f, &fam).unwrap();
        assert_eq!(bands.count_above(1e-12), 2);
    }

    #[test]
    fn bands_sum_to_the_field() {
        let (spec, fam) = setup();
        for seed in 0..5 {
            let f = band_limited(&spec, 3.0, seed);
            let bands = decompose(&f, &fam).unwrap();
            assert!(reconstruct(&bands).unwrap().relative_error(&f) <= 1e-11);
        }
    }

    #[test]
    fn box_op_is_linear_and_respects_support() {
        let (spec, fam) = setup();
        let f = band_limited(&spec, 3.0, 1);
        let g = band_limited(&spec, 3.0, 2);
        let (a, b) = (c(0.7, -0.2), c(-1.5, 2.0));
        let lhs = box_op(&f.combine(a, &g, b).unwrap(), &[1, 1], &fam).unwrap();
        let rhs = box_op(&f, &[1, 1], &fam)
            .unwrap()
            .field()
            .combine(a, box_op(&g, &[1, 1], &fam).unwrap().field(), b)
            .unwrap();
        assert!(lhs.field().max_abs_difference(&rhs) <= 1e-13);

        // spectrum supported in |xi - k|_inf > 1
        let mut s = Spectrum::zeros(spec);
        s.set(&[12, 0], c(1.0, 0.0)).unwrap();
        s.set(&[-4, 8], c(0.0, 1.0)).unwrap();
        let far = inverse_transform(&s);
        assert_eq!(box_op(&far, &[1, 1], &fam).unwrap().field().max_abs(), 0.0);
    }

    #[test]
    fn band_spectrum_stays_in_support() {
        let (spec, fam) = setup();
        let f = band_limited(&spec, 3.0, 9);
        let band = box_op(&f, &[-1, 2], &fam).unwrap();
        let s = forward_transform(band.field());
        let sup = fam.support(&[-1, 2]).unwrap();
        let total: f64 = s.coefficients().iter().map(|v| v.norm_sqr()).sum();
        let outside: f64 = (0..spec.len())
            .filter(|&i| !sup.contains(&s.frequency_at(i)))
            .map(|i| s.coefficients()[i].norm_sqr())
            .sum();
        assert!(outside.sqrt() <= 1e-12 * total.sqrt());
    }

    #[test]
    fn almost_orthogonality() {
        let (spec, fam) = setup();
        let f = band_limited(&spec, 3.0, 4);
        let bands = decompose(&f, &fam).unwrap();
        let k = [0i64, 1];
        let mut acc = vec![Complex64::default(); spec.len()];
        for b in bands.components() {
            let far = b.index().iter().zip(&k).any(|(x, y)| (x - y).abs() >= 2);
            if far {
                for (a, v) in acc.iter_mut().zip(b.field().values()) {
                    *a += v;
                }
            }
        }
        let rest = SampledField::new(spec, acc).unwrap();
        let cross = box_op(&rest, &k, &fam).unwrap();
        assert!(cross.field().max_abs() <= 1e-12 * rest.max_abs().max(1.0));
    }

    #[test]
    fn geometry_and_index_errors() {
        let fam = WindowFamily::new(2, 4, BumpProfile::default()).unwrap();
        let coarse = SampledField::zeros(GridSpec::uniform(2, 16, 64).unwrap());
        assert!(matches!(decompose(&coarse, &fam), Err(Error::Geometry(_))));
        let (spec, fam) = setup();
        let f = SampledField::zeros(spec);
        assert!(box_op(&f, &[5, 0], &fam).is_err());
        assert!(box_op(&f, &[0], &fam).is_err());
        let empty = BandSet {
            spec: f.spec().clone(),
            family: fam,
            components: vec![],
        };
        assert!(matches!(reconstruct(&empty), Err(Error::MissingBands(_))));
    }

    #[test]
    fn mixed_operator_examples() {
        let (spec, fam) = setup();
        let reduced = fam.with_dimension(1).unwrap();
        let tone = SampledField::tone(spec.clone(), &[2, -1]).unwrap();
        let same = mixed_box_op(&tone, &[2], &[2, -1], &fam, &reduced).unwrap();
        assert!(same.field().max_abs_difference(&tone) < 1e-12);
        let f = band_limited(&spec, 3.0, 5);
        let far = mixed_box_op(&f, &[0], &[2, 1], &fam, &reduced).unwrap();
        assert!(far.is_zero());
        assert!(mixed_box_op(&f, &[0, 0], &[2, 1], &fam, &reduced).is_err());
        assert!(mixed_box_op(&f, &[0], &[2, 1], &fam, &fam).is_err());
    }

    #[test]
    fn maximal_examples() {
        let (spec, fam) = setup();
        let tone = SampledField::tone(spec.clone(), &[1, 1]).unwrap();
        let band = box_op(&tone, &[1, 1], &fam).unwrap();
        for params in [MaximalParams::lattice(1.5), MaximalParams::grid(1.5)] {
            let m = maximal_op(&band, &params).unwrap();
            for (v, b) in m.values().iter().zip(band.field().values()) {
                assert_eq!(*v, b.norm());
            }
        }
        let zero = BandComponent::new(vec![0, 0], SampledField::zeros(spec.clone()));
        assert!(maximal_op(&zero, &MaximalParams::lattice(1.0))
            .unwrap()
            .values()
            .iter()
            .all(|&v| v == 0.0));
        assert!(maximal_op(&band, &MaximalParams::lattice(0.0)).is_err());
        assert!(maximal_op(&band, &MaximalParams::lattice(-1.0)).is_err());
        let odd = SampledField::zeros(GridSpec::uniform(1, 3, 8).unwrap());
        assert!(maximal_of_field(&odd, &MaximalParams::lattice(1.0)).is_err());
    }

    /// Exhaustive supremum over all lattice shifts, no pruning.
    fn maximal_oracle(f: &SampledField, b: f64) -> Vec<f64> {
        let spec = f.spec();
        let (l0, l1) = (spec.period()[0] as i64, spec.period()[1] as i64);
        let (n0, n1) = (spec.samples()[0] as i64, spec.samples()[1] as i64);
        let (s0, s1) = (n0 / l0, n1 / l1);
        let mut out = vec![0.0; spec.len()];
        for i in 0..n0 {
            for j in 0..n1 {
                let mut best: f64 = 0.0;
                for y0 in -l0 / 2..=l0 / 2 {
                    for y1 in -l1 / 2..=l1 / 2 {
                        let ii = (i - y0 * s0).rem_euclid(n0);
                        let jj = (j - y1 * s1).rem_euclid(n1);
                        // fold to the minimal representative
                        let f0 = if y0.abs() * 2 == l0 {
                            (l0 / 2) as f64
                        } else {
                            y0 as f64
                        };
                        let f1 = if y1.abs() * 2 == l1 {
                            (l1 / 2) as f64
                        } else {
                            y1 as f64
                        };
                        let w = 1.0 + (f0 * f0 + f1 * f1).sqrt().powf(b);
                        let v = f.values()[(ii * n1 + jj) as usize].norm() / w;
                        best = best.max(v);
                    }
                }
                out[(i * n1 + j) as usize] = best;
            }
        }
        out
    }

    #[test]
    fn pruned_maximal_matches_exhaustive_oracle() {
        let spec = GridSpec::uniform(2, 4, 32).unwrap();
        let fam = WindowFamily::new(2, 2, BumpProfile::default()).unwrap();
        let f = band_limited(&spec, 1.0, 12);
        let band = box_op(&f, &[1, 0], &fam).unwrap();
        let got = maximal_op(&band, &MaximalParams::lattice(1.3)).unwrap();
        let want = maximal_oracle(band.field(), 1.3);
        for (g, w) in got.values().iter().zip(&want) {
            assert!((g - w).abs() <= 1e-15 * w.max(1.0));
        }
    }

    #[test]
    fn bandset_export_round_trip() {
        let spec = GridSpec::uniform(1, 2, 16).unwrap();
        let fam = WindowFamily::new(1, 2, BumpProfile::new(1.5, 8).unwrap()).unwrap();
        let f = band_limited(&spec, 1.0, 3);
        let bands = decompose(&f, &fam).unwrap();
        let dir = tempfile::tempdir().unwrap();
        export_bandset(&bands, dir.path()).unwrap();
        assert!(dir.path().join("band_-2.amf").exists());
        assert!(dir.path().join("band_0.amf").exists());
        let index: serde_json::Value =
            serde_json::from_slice(&fs::read(dir.path().join("index.json")).unwrap()).unwrap();
        assert_eq!(index["K"], 2);
        assert_eq!(index["window"]["transition_sharpness"], 1.5);
        let back = import_bandset(dir.path()).unwrap();
        assert_eq!(back, bands);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn maximal_dominates_and_is_monotone_in_b(
            seed in 0u64..500, b1 in 0.2f64..3.0, extra in 0.0f64..2.0,
            k0 in -1i64..=1, k1 in -1i64..=1,
        ) {
            let spec = GridSpec::uniform(2, 4, 32).unwrap();
            let fam = WindowFamily::new(2, 2, BumpProfile::default()).unwrap();
            let f = band_limited(&spec, 1.0, seed);
            let band = box_op(&f, &[k0, k1], &fam).unwrap();
            let lo = maximal_op(&band, &MaximalParams::lattice(b1)).unwrap();
            let hi = maximal_op(&band, &MaximalParams::lattice(b1 + extra)).unwrap();
            for ((a, b), v) in lo.values().iter().zip(hi.values()).zip(band.field().values()) {
                prop_assert!(*b >= v.norm());
                prop_assert!(*a >= *b);
            }
        }

        #[test]
        fn decomposition_commutes_with_full_period_shift(seed in 0u64..200) {
            // sampling f(x + L e_1) reproduces the same samples, hence the same bands
            let spec = GridSpec::uniform(2, 2, 16).unwrap();
            let fam = WindowFamily::new(2, 2, BumpProfile::default()).unwrap();
            let f = band_limited(&spec, 1.0, seed);
            let s = forward_transform(&f);
            let shifted = SampledField::from_fn(spec.clone(), |x| {
                let mut acc = Complex64::default();
                for (flat, coef) in s.coefficients().iter().enumerate() {
                    let xi = s.frequency_at(flat);
                    let phase = (x[0] + 2.0) * xi[0] + x[1] * xi[1];
                    acc += coef * Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * phase);
                }
                acc / spec.volume()
            }).unwrap();
            let a = decompose(&f, &fam).unwrap();
            let b = decompose(&shifted, &fam).unwrap();
            for (x, y) in a.components().iter().zip(b.components()) {
                prop_assert!(x.field().max_abs_difference(y.field()) <= 1e-11);
            }
        }
    }
}
