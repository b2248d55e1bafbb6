//! Binary classification of one-dimensional Raman spectra.
//!
//! Spectra are loaded as [`SpectraSet`]s, cleaned by an outlier gate and
//! Savitzky–Golay smoothing, restricted to a wavenumber region and scored by
//! one of five classifiers ([`MethodKind`]) under k-fold cross-validation.
//! Pooled-band models are inspected with permutation importance and the
//! convolutional network with gradient saliency maps. [`synth`] produces
//! labelled stand-in data.

pub mod cnn;
pub mod error;
pub mod eval;
pub mod explain;
pub mod linear;
pub mod math;
pub mod methods;
pub mod pipeline;
pub mod preprocess;
pub mod rng;
pub mod spectra;
pub mod synth;

pub use error::{Error, Result};
pub use eval::{cross_validate, roc_auc, summary_table, EvalReport, FoldPlan, SummaryTable};
pub use methods::{fit_method, MethodConfig, MethodKind, TrainedModel};
pub use pipeline::{preprocess, preprocess_region, PreprocessConfig, Preprocessed};
pub use spectra::{load_spectra, merge, RegionSpec, SpectraSet, WavenumberAxis};
