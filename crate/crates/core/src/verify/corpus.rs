//! Seeded band-limited test fields, defined by their spectra so that the
//! same member can be sampled on a refined grid without change.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{inverse_transform, GridSpec, SampledField, Spectrum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusKind {
    Tone,
    TrigPolynomial,
    Gaussian,
    Separable,
}

impl CorpusKind {
    const CYCLE: [CorpusKind; 4] = [
        CorpusKind::Tone,
        CorpusKind::TrigPolynomial,
        CorpusKind::Gaussian,
        CorpusKind::Separable,
    ];

    pub fn label(self) -> &'static str {
        match self {
            CorpusKind::Tone => "tone",
            CorpusKind::TrigPolynomial => "trig",
            CorpusKind::Gaussian => "gauss",
            CorpusKind::Separable => "separable",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusMember {
    pub index: usize,
    pub kind: CorpusKind,
    spectrum: Spectrum,
}

impl CorpusMember {
    pub fn label(&self) -> String {
        format!("{}#{}", self.kind.label(), self.index)
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    pub fn field(&self) -> SampledField {
        inverse_transform(&self.spectrum)
    }

    /// The same trigonometric polynomial sampled on `spec`.
    pub fn field_on(&self, spec: &GridSpec) -> Result<SampledField> {
        Ok(inverse_transform(&self.spectrum.resample(spec)?))
    }
}

/// Deterministic corpus on `spec` with spectrum in `max_i |xi_i| <= radius - 1`,
/// normalized to unit `L^2`. Members cycle through tones, random
/// trigonometric polynomials, modulated Gaussians and separable products.
/// Member `i` depends only on `(seed, i)`.
pub fn generate_corpus(spec: &GridSpec, radius: i64, seed: u64, size: usize) -> Result<Vec<CorpusMember>> {
    if radius < 1 {
        return Err(Error::InvalidParameter(format!(
            "window radius must be >= 1, got {radius}"
        )));
    }
    (0..size)
        .into_par_iter()
        .map(|index| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(index as u64);
            let kind = CorpusKind::CYCLE[index % CorpusKind::CYCLE.len()];
            let spectrum = member_spectrum(spec, (radius - 1) as f64, kind, &mut rng)?;
            Ok(CorpusMember {
                index,
                kind,
                spectrum,
            })
        })
        .collect()
}

fn complex<R: Rng>(rng: &mut R) -> Complex64 {
    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

fn member_spectrum<R: Rng>(spec: &GridSpec, reach: f64, kind: CorpusKind, rng: &mut R) -> Result<Spectrum> {
    let n = spec.dimension();
    let mut s = Spectrum::zeros(spec.clone());
    let inside = |xi: &[f64]| xi.iter().all(|v| v.abs() <= reach + 1e-12);
    match kind {
        CorpusKind::Tone => {
            let top = reach.floor() as i64;
            let k: Vec<i64> = (0..n).map(|_| rng.gen_range(-top..=top)).collect();
            let m: Vec<i64> = k.iter().zip(spec.period()).map(|(&v, &l)| v * l as i64).collect();
            s.set(&m, Complex64::new(1.0, 0.0))?;
        }
        CorpusKind::TrigPolynomial => {
            let density = rng.gen_range(0.05..0.4);
            for flat in 0..spec.len() {
                if inside(&s.frequency_at(flat)) && rng.gen_bool(density) {
                    s.coefficients_mut()[flat] = complex(rng);
                }
            }
        }
        CorpusKind::Gaussian => {
            let center: Vec<f64> = (0..n).map(|_| rng.gen_range(-reach..=reach).round()).collect();
            let width = rng.gen_range(0.3..1.0);
            for flat in 0..spec.len() {
                let xi = s.frequency_at(flat);
                if inside(&xi) {
                    let d2: f64 = xi.iter().zip(&center).map(|(a, b)| (a - b).powi(2)).sum();
                    s.coefficients_mut()[flat] = Complex64::new((-d2 / (2.0 * width * width)).exp(), 0.0);
                }
            }
        }
        CorpusKind::Separable => {
            let factors: Vec<Vec<Complex64>> = (0..n)
                .map(|a| {
                    let count = spec.samples()[a];
                    let mut axis = vec![Complex64::default(); count];
                    for (c, v) in axis.iter_mut().enumerate() {
                        if spec.frequency(a, c).abs() <= reach + 1e-12 && rng.gen_bool(0.5) {
                            *v = complex(rng);
                        }
                    }
                    if axis.iter().all(|v| *v == Complex64::default()) {
                        axis[spec.origin_slot(a)] = Complex64::new(1.0, 0.0);
                    }
                    axis
                })
                .collect();
            for flat in 0..spec.len() {
                let idx = spec.unravel(flat);
                s.coefficients_mut()[flat] = idx.iter().enumerate().map(|(a, &c)| factors[a][c]).product();
            }
        }
    }
    if s.coefficients().iter().all(|v| v.norm_sqr() == 0.0) {
        // a sparse draw can come up empty; fall back to the constant
        s.set(&vec![0; n], Complex64::new(1.0, 0.0))?;
    }
    normalized(s)
}

/// Unit `L^2` by Parseval: `||f||_2^2 = sum |c_m|^2 / prod L`.
fn normalized(mut s: Spectrum) -> Result<Spectrum> {
    let volume = s.spec().volume();
    let energy: f64 = s.coefficients().iter().map(|v| v.norm_sqr()).sum();
    let scale = (volume / energy).sqrt();
    for v in s.coefficients_mut() {
        *v *= scale;
    }
    Ok(s)
}
