//! Synthetic Raman-like spectra: a baseline plus jittered peaks plus noise.

use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::spectra::{SpectraSet, WavenumberAxis};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PeakShape {
    #[default]
    Lorentzian,
    Gaussian,
}

/// One band. `width` is the half-width at half-maximum for both shapes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakSpec {
    pub center: f64,
    pub width: f64,
    pub amplitude: f64,
    #[serde(default)]
    pub shape: PeakShape,
    /// Relative amplitude jitter of this band alone; `None` uses the
    /// recipe-wide `amplitude_jitter`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jitter: Option<f64>,
}

impl PeakSpec {
    pub fn lorentzian(center: f64, width: f64, amplitude: f64) -> Self {
        Self {
            center,
            width,
            amplitude,
            shape: PeakShape::Lorentzian,
            jitter: None,
        }
    }

    pub fn gaussian(center: f64, width: f64, amplitude: f64) -> Self {
        Self {
            center,
            width,
            amplitude,
            shape: PeakShape::Gaussian,
            jitter: None,
        }
    }

    /// Unit-height profile at wavenumber `w`.
    pub fn profile(&self, w: f64) -> f64 {
        let u = (w - self.center) / self.width;
        match self.shape {
            PeakShape::Lorentzian => 1.0 / (1.0 + u * u),
            PeakShape::Gaussian => (-std::f64::consts::LN_2 * u * u).exp(),
        }
    }

    pub fn value(&self, w: f64) -> f64 {
        self.amplitude * self.profile(w)
    }

    fn validate(&self) -> Result<()> {
        if !(self.width > 0.0 && self.width.is_finite()) {
            return Err(Error::InvalidArgument(format!("peak width must be positive, got {}", self.width)));
        }
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "peak amplitude must be non-negative, got {}",
                self.amplitude
            )));
        }
        if let Some(j) = self.jitter {
            if !(j >= 0.0 && j.is_finite()) {
                return Err(Error::InvalidArgument(format!("peak jitter must be non-negative, got {j}")));
            }
        }
        if !self.center.is_finite() {
            return Err(Error::InvalidArgument("peak center must be finite".into()));
        }
        Ok(())
    }
}

/// Distribution of every random draw, standardized to unit variance.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseShape {
    #[default]
    Gaussian,
    /// Uniform on `[-√3, √3]`; bounded, so a 3σ outlier gate never fires
    /// on clean data.
    Uniform,
}

impl NoiseShape {
    fn draw<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            NoiseShape::Gaussian => rng.sample(StandardNormal),
            NoiseShape::Uniform => rng.random_range(-3f64.sqrt()..=3f64.sqrt()),
        }
    }
}

/// Spectrum model for one class:
/// `s · (baseline + Σ aₖ · profileₖ(w)) + noise`, with
/// `s = 1 + scale_jitter · z` and `aₖ = amplitudeₖ · (1 + amplitude_jitter · zₖ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRecipe {
    pub peaks: Vec<PeakSpec>,
    pub baseline: f64,
    pub noise_sigma: f64,
    /// Relative standard deviation of each peak amplitude.
    pub amplitude_jitter: f64,
    /// Relative standard deviation of the overall intensity.
    #[serde(default)]
    pub scale_jitter: f64,
    #[serde(default)]
    pub noise_shape: NoiseShape,
}

impl ClassRecipe {
    pub fn validate(&self) -> Result<()> {
        for p in &self.peaks {
            p.validate()?;
        }
        for (name, v) in [
            ("noise_sigma", self.noise_sigma),
            ("amplitude_jitter", self.amplitude_jitter),
            ("scale_jitter", self.scale_jitter),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be non-negative, got {v}")));
            }
        }
        if !self.baseline.is_finite() {
            return Err(Error::InvalidArgument("baseline must be finite".into()));
        }
        Ok(())
    }
}

/// Noise-free spectrum of `recipe` on `axis`.
pub fn expected_spectrum(recipe: &ClassRecipe, axis: &WavenumberAxis) -> Vec<f64> {
    axis.values()
        .iter()
        .map(|&w| recipe.baseline + recipe.peaks.iter().map(|p| p.value(w)).sum::<f64>())
        .collect()
}

fn sample_class(recipe: &ClassRecipe, axis: &WavenumberAxis, class: u64, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let profiles: Vec<Vec<f64>> = recipe
        .peaks
        .iter()
        .map(|p| axis.values().iter().map(|&w| p.profile(w)).collect())
        .collect();
    let shape = recipe.noise_shape;
    (0..n as u64)
        .map(|i| {
            let mut rng = rng::stream(seed, rng::SYNTH_BASE + (class << 32) + i);
            let scale = 1.0 + recipe.scale_jitter * shape.draw(&mut rng);
            let amplitudes: Vec<f64> = recipe
                .peaks
                .iter()
                .map(|p| {
                    let jitter = p.jitter.unwrap_or(recipe.amplitude_jitter);
                    (p.amplitude * (1.0 + jitter * shape.draw(&mut rng))).max(0.0)
                })
                .collect();
            (0..axis.len())
                .map(|j| {
                    let clean: f64 = recipe.baseline
                        + amplitudes.iter().zip(&profiles).map(|(a, prof)| a * prof[j]).sum::<f64>();
                    scale * clean + recipe.noise_sigma * shape.draw(&mut rng)
                })
                .collect()
        })
        .collect()
}

/// `n_per_class` spectra from each recipe; rows of `recipe1` come first
/// and carry label 1. Spectrum `i` of class `c` draws from its own stream,
/// so sets of different sizes share their leading rows.
pub fn generate(
    recipe1: &ClassRecipe,
    recipe2: &ClassRecipe,
    n_per_class: usize,
    axis: &WavenumberAxis,
    seed: u64,
) -> Result<SpectraSet> {
    if n_per_class == 0 {
        return Err(Error::InvalidArgument("n_per_class must be at least 1".into()));
    }
    recipe1.validate()?;
    recipe2.validate()?;
    let mut rows = sample_class(recipe1, axis, 1, n_per_class, seed);
    rows.extend(sample_class(recipe2, axis, 0, n_per_class, seed));
    let labels = (0..2 * n_per_class).map(|i| u8::from(i < n_per_class)).collect();
    SpectraSet::new(axis.clone(), rows, labels)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Null,
    ColonLike,
    MelanomaLike,
    SubtypeLike,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::Null, Preset::ColonLike, Preset::MelanomaLike, Preset::SubtypeLike];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Null => "null",
            Preset::ColonLike => "colon_like",
            Preset::MelanomaLike => "melanoma_like",
            Preset::SubtypeLike => "subtype_like",
        }
    }
}

impl std::fmt::Display for Preset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == key)
            .ok_or_else(|| Error::Unknown {
                kind: "preset",
                name: s.to_string(),
            })
    }
}

/// Shared background: bands near 234, 380 and 514 cm⁻¹ in the low range,
/// the CH stretching bands near 2880 and 2934 cm⁻¹ and a broad shoulder
/// above 3200 cm⁻¹ in the high range.
fn background() -> ClassRecipe {
    ClassRecipe {
        peaks: vec![
            PeakSpec::gaussian(234.0, 30.0, 0.8),
            PeakSpec::gaussian(380.0, 30.0, 0.4),
            PeakSpec::gaussian(514.0, 25.0, 0.6),
            PeakSpec::lorentzian(1004.0, 8.0, 0.5),
            PeakSpec::lorentzian(1450.0, 15.0, 0.4),
            PeakSpec::gaussian(2880.0, 25.0, 0.5),
            PeakSpec::gaussian(2934.0, 35.0, 2.0),
            PeakSpec::gaussian(3300.0, 80.0, 0.4),
        ],
        baseline: 1.0,
        noise_sigma: 0.005,
        amplitude_jitter: 0.1,
        scale_jitter: 0.05,
        noise_shape: NoiseShape::Gaussian,
    }
}

fn peak_mut(recipe: &mut ClassRecipe, center: f64) -> &mut PeakSpec {
    recipe
        .peaks
        .iter_mut()
        .find(|p| p.center == center)
        .expect("preset peak exists")
}

fn set_amplitude(recipe: &mut ClassRecipe, center: f64, amplitude: f64) {
    peak_mut(recipe, center).amplitude = amplitude;
}

/// Documented recipe pairs `(label 1, label 0)`:
///
/// * `null`: identical recipes.
/// * `colon_like`: the 2934 cm⁻¹ band is 1.5 times stronger in the first
///   class; nothing else differs, so differences stay inside 2700–3200 cm⁻¹.
/// * `melanoma_like`: the 514 cm⁻¹ band is 1.5 times stronger and the
///   3300 cm⁻¹ shoulder twice as strong in the first class.
/// * `subtype_like`: in both classes the 234 cm⁻¹ band is strong and its
///   amplitude varies by 50% from spectrum to spectrum. In the low range the
///   first class carries 1.2 extra amplitude on the 234 cm⁻¹ band and the
///   second on the equally wide 380 cm⁻¹ band: a shape change with equal
///   mean intensity, hidden from whole-range rules by the 234 cm⁻¹ jitter.
///   In the high range the 2934 cm⁻¹ band is 2.5 times stronger in the
///   first class.
pub fn preset(p: Preset) -> (ClassRecipe, ClassRecipe) {
    let base = background();
    let mut first = base.clone();
    let mut second = base;
    match p {
        Preset::Null => {}
        Preset::ColonLike => set_amplitude(&mut first, 2934.0, 3.0),
        Preset::MelanomaLike => {
            set_amplitude(&mut first, 514.0, 0.9);
            set_amplitude(&mut first, 3300.0, 0.8);
        }
        Preset::SubtypeLike => {
            for r in [&mut first, &mut second] {
                let p = peak_mut(r, 234.0);
                p.amplitude = 8.5;
                p.jitter = Some(0.5);
            }
            set_amplitude(&mut first, 234.0, 9.7);
            set_amplitude(&mut second, 380.0, 1.6);
            set_amplitude(&mut first, 2934.0, 5.0);
        }
    }
    (first, second)
}

pub fn preset_by_name(name: &str) -> Result<(ClassRecipe, ClassRecipe)> {
    Ok(preset(name.parse()?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quiet(mut r: ClassRecipe) -> ClassRecipe {
        r.noise_sigma = 0.0;
        r.amplitude_jitter = 0.0;
        r.scale_jitter = 0.0;
        r
    }

    #[test]
    fn noiseless_rows_identical() {
        let (a, b) = preset(Preset::ColonLike);
        let axis = WavenumberAxis::uniform(2300.0, 3400.0, 100).unwrap();
        let s = generate(&quiet(a.clone()), &quiet(b), 4, &axis, 1).unwrap();
        for i in 1..4 {
            assert_eq!(s.row(i), s.row(0));
        }
        assert_eq!(s.row(0), expected_spectrum(&a, &axis).as_slice());
        assert_eq!(s.labels(), &[1, 1, 1, 1, 0, 0, 0, 0]);
    }

    #[test]
    fn seeded() {
        let (a, b) = preset(Preset::Null);
        let axis = WavenumberAxis::uniform(100.0, 600.0, 50).unwrap();
        assert_eq!(generate(&a, &b, 5, &axis, 3).unwrap(), generate(&a, &b, 5, &axis, 3).unwrap());
        assert_ne!(generate(&a, &b, 5, &axis, 3).unwrap(), generate(&a, &b, 5, &axis, 4).unwrap());
        let big = generate(&a, &b, 8, &axis, 3).unwrap();
        assert_eq!(big.row(0), generate(&a, &b, 5, &axis, 3).unwrap().row(0));
    }

    #[test]
    fn profile_half_width() {
        for p in [PeakSpec::gaussian(10.0, 2.0, 1.0), PeakSpec::lorentzian(10.0, 2.0, 1.0)] {
            assert_eq!(p.value(10.0), 1.0);
            assert!((p.value(12.0) - 0.5).abs() < 1e-15);
            assert!((p.value(8.0) - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn presets_parse() {
        for p in Preset::ALL {
            assert_eq!(p.name().parse::<Preset>().unwrap(), p);
        }
        assert!("glioma".parse::<Preset>().is_err());
        let (a, b) = preset(Preset::Null);
        assert_eq!(a, b);
    }

    #[test]
    fn colon_differs_only_in_ch_band() {
        let (a, b) = preset(Preset::ColonLike);
        let axis = WavenumberAxis::reference();
        let (ea, eb) = (expected_spectrum(&a, &axis), expected_spectrum(&b, &axis));
        for (j, &w) in axis.values().iter().enumerate() {
            if !(2700.0..=3200.0).contains(&w) {
                assert!((ea[j] - eb[j]).abs() < 1e-12, "{w}");
            }
        }
    }

    #[test]
    fn subtype_low_range_keeps_mean() {
        let (a, b) = preset(Preset::SubtypeLike);
        let axis = WavenumberAxis::reference();
        let lw = axis.select(125.25, 549.27);
        let mean = |r: &ClassRecipe| {
            let e = expected_spectrum(r, &axis);
            e[lw.clone()].iter().sum::<f64>() / lw.len() as f64
        };
        assert!((mean(&a) - mean(&b)).abs() < 1e-3 * mean(&b));
    }

    #[test]
    fn bad_recipe_rejected() {
        let mut r = background();
        r.peaks[0].width = 0.0;
        assert!(r.validate().is_err());
        let mut r = background();
        r.noise_sigma = -1.0;
        assert!(r.validate().is_err());
        let (a, b) = preset(Preset::Null);
        assert!(generate(&a, &b, 0, &WavenumberAxis::reference(), 0).is_err());
    }
}
