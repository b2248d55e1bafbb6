use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde_json::json;

use raman_core::cnn::{CnnArch, TrainConfig};
use raman_core::eval::{holdout_split, roc_auc};
use raman_core::explain::{permutation_importance, saliency_map, EcdfMode};
use raman_core::linear::{pool_features, LogisticConfig, PoolingSpec};
use raman_core::preprocess::{EdgeMode, SgConfig, SurfaceFit};
use raman_core::rng;
use raman_core::synth::{self, NoiseShape, Preset};
use raman_core::{
    cross_validate, fit_method, load_spectra, merge, preprocess as run_preprocess, summary_table, FoldPlan,
    MethodConfig, MethodKind, PreprocessConfig, RegionSpec, SpectraSet, TrainedModel, WavenumberAxis,
};

use crate::output::{InputRecord, Run};
use crate::settings::{List, Settings, Switch};
use crate::{Common, EvaluateArgs, ExplainArgs, Inputs, ModelOpts, PreprocessArgs, PreprocessOpts, SynthArgs};

struct Resolved {
    out: PathBuf,
    seed: u64,
}

fn common(s: &mut Settings, c: &Common) -> Result<Resolved> {
    Ok(Resolved {
        out: PathBuf::from(s.get::<String>("out", c.out.as_deref(), "out")?),
        seed: s.get("seed", c.seed.as_deref(), "0")?,
    })
}

fn preprocess_config(s: &mut Settings, a: &PreprocessOpts) -> Result<PreprocessConfig> {
    let window: Switch<usize> = s.get("sg-window", a.sg_window.as_deref(), "91")?;
    let smoothing = match window {
        Switch::Off => None,
        Switch::On(window) => {
            let cfg = SgConfig {
                window,
                poly_order: s.get("sg-order", a.sg_order.as_deref(), "3")?,
                edge: s.get::<EdgeMode>("sg-edge", a.sg_edge.as_deref(), "mirror")?,
            };
            cfg.validate()?;
            Some(cfg)
        }
    };
    let outlier_k = s.get::<Switch<f64>>("outlier-k", a.outlier_k.as_deref(), "3")?.into_option();
    if let Some(k) = outlier_k {
        if !(k > 0.0 && k.is_finite()) {
            bail!("--outlier-k must be positive, got {k}");
        }
    }
    Ok(PreprocessConfig {
        outlier_k,
        surface_fit: s.get::<SurfaceFit>("surface", a.surface.as_deref(), "per_label")?,
        smoothing,
    })
}

fn method_config(s: &mut Settings, a: &ModelOpts) -> Result<MethodConfig> {
    let d = MethodConfig::default();
    let cuts: Switch<List<f64>> = match s.get::<String>("pool-cuts", a.pool_cuts.as_deref(), "auto")?.as_str() {
        "auto" => Switch::Off,
        raw => Switch::On(raw.parse().with_context(|| format!("invalid --pool-cuts `{raw}`"))?),
    };
    let pooling = match cuts {
        Switch::Off => None,
        Switch::On(List(cuts)) => Some(PoolingSpec::new(cuts)?),
    };
    let logistic = LogisticConfig {
        shrinkage: s.get("shrinkage", a.shrinkage.as_deref(), &d.logistic.shrinkage.to_string())?,
        ..d.logistic
    };
    let cnn_arch = CnnArch {
        blocks: s.get("cnn-blocks", a.cnn_blocks.as_deref(), &d.cnn_arch.blocks.to_string())?,
        filters: s.get("cnn-filters", a.cnn_filters.as_deref(), &d.cnn_arch.filters.to_string())?,
        kernel: s.get("cnn-kernel", a.cnn_kernel.as_deref(), &d.cnn_arch.kernel.to_string())?,
        pool: s.get("cnn-pool", a.cnn_pool.as_deref(), &d.cnn_arch.pool.to_string())?,
        dropout: s.get("dropout", a.dropout.as_deref(), &d.cnn_arch.dropout.to_string())?,
        hidden: s.get("cnn-hidden", a.cnn_hidden.as_deref(), &d.cnn_arch.hidden.to_string())?,
    };
    cnn_arch.validate()?;
    let t = &d.cnn_train;
    let default_patience = t.patience.map_or("off".to_string(), |p| p.to_string());
    let cnn_train = TrainConfig {
        epochs: s.get("epochs", a.epochs.as_deref(), &t.epochs.to_string())?,
        batch_size: s.get("batch-size", a.batch_size.as_deref(), &t.batch_size.to_string())?,
        learning_rate: s.get("learning-rate", a.learning_rate.as_deref(), &t.learning_rate.to_string())?,
        patience: s
            .get::<Switch<usize>>("patience", a.patience.as_deref(), &default_patience)?
            .into_option(),
        validation_fraction: s.get(
            "validation-fraction",
            a.validation_fraction.as_deref(),
            &t.validation_fraction.to_string(),
        )?,
        ..t.clone()
    };
    cnn_train.validate()?;
    Ok(MethodConfig {
        logistic,
        pooling,
        pca_components: s.get("pca-components", a.pca_components.as_deref(), &d.pca_components.to_string())?,
        inner_folds: s.get("inner-folds", a.inner_folds.as_deref(), &d.inner_folds.to_string())?,
        cnn_arch,
        cnn_train,
    })
}

fn regions(s: &mut Settings, flag: Option<&str>) -> Result<Vec<RegionSpec>> {
    let List(names) = s.get::<List<String>>("region", flag, "LW,HW")?;
    if names.is_empty() {
        bail!("no region given");
    }
    names.iter().map(|n| Ok(RegionSpec::by_name(n)?)).collect()
}

fn methods(s: &mut Settings, flag: Option<&str>, default: &str) -> Result<Vec<MethodKind>> {
    let List(mut methods) = s.get::<List<MethodKind>>("methods", flag, default)?;
    if methods.is_empty() {
        bail!("no method given");
    }
    methods.dedup();
    Ok(methods)
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn load(path: &Path, label: u8) -> Result<(SpectraSet, InputRecord)> {
    let set = load_spectra(path, label)?;
    let record = InputRecord {
        path: path.to_path_buf(),
        label,
        n_spectra: set.n_spectra(),
        n_points: set.n_points(),
    };
    Ok((set, record))
}

/// Loads both samples and stacks them (a = label 1, b = label 0).
fn load_pair(s: &mut Settings, inputs: &Inputs) -> Result<(SpectraSet, Vec<InputRecord>)> {
    let path_a = PathBuf::from(s.require::<String>("input-a", inputs.input_a.as_deref())?);
    let path_b = PathBuf::from(s.require::<String>("input-b", inputs.input_b.as_deref())?);
    let (a, ra) = load(&path_a, 1)?;
    let (b, rb) = load(&path_b, 0)?;
    let (name_a, name_b) = (stem(&path_a), stem(&path_b));
    let a = a.with_names(name_a.clone(), name_a);
    let b = b.with_names(name_b.clone(), name_b);
    let data = merge(&a, &b).context("the two inputs must share one wavenumber axis")?;
    Ok((data, vec![ra, rb]))
}

/// Runs `body` inside an output directory and always leaves a manifest.
fn with_run(
    dir: &Path,
    command: &'static str,
    inputs: Vec<InputRecord>,
    settings: &Settings,
    body: impl FnOnce(&mut Run) -> Result<()>,
) -> Result<()> {
    for key in settings.unused() {
        log::warn!("config key `{key}` is not used by `{command}`");
    }
    let mut run = Run::start(dir, command, inputs)?;
    let result = body(&mut run);
    run.finish(settings, result.as_ref().err())?;
    result
}

fn gate_summary(rejected: &[usize], data: &SpectraSet) -> serde_json::Value {
    let per_label: Vec<usize> = [1u8, 0]
        .iter()
        .map(|&l| rejected.iter().filter(|&&i| data.labels()[i] == l).count())
        .collect();
    json!({
        "rejected": rejected.len(),
        "of": data.n_spectra(),
        "rejected_label_1": per_label[0],
        "rejected_label_0": per_label[1],
        "rejected_rows": rejected,
    })
}

pub fn synth(a: &SynthArgs) -> Result<()> {
    let mut s = Settings::load(a.common.config.as_deref())?;
    let c = common(&mut s, &a.common)?;
    let preset: Preset = s.require("preset", a.preset.as_deref())?;
    let n: usize = s.get("n", a.n.as_deref(), "200")?;
    let prefix: String = s.get("prefix", a.prefix.as_deref(), preset.name())?;
    let bounded: bool = s.get("bounded-noise", a.bounded_noise.then_some("true"), "false")?;

    let (mut r1, mut r2) = synth::preset(preset);
    if bounded {
        r1.noise_shape = NoiseShape::Uniform;
        r2.noise_shape = NoiseShape::Uniform;
    }
    let axis = WavenumberAxis::reference();
    let data = synth::generate(&r1, &r2, n, &axis, c.seed)?;

    with_run(&c.out, "synth", Vec::new(), &s, |run| {
        for (label, suffix) in [(1u8, "a"), (0, "b")] {
            let name = format!("{prefix}_{suffix}.csv");
            data.class_subset(label).save_csv(run.path(&name))?;
            run.record(&name);
            println!("{}", run.path(&name).display());
        }
        run.write_json(
            &format!("{prefix}_recipes.json"),
            json!({ "preset": preset.name(), "a": r1, "b": r2 }),
        )?;
        Ok(())
    })
}

pub fn preprocess(a: &PreprocessArgs) -> Result<()> {
    let mut s = Settings::load(a.common.config.as_deref())?;
    let c = common(&mut s, &a.common)?;
    let cfg = preprocess_config(&mut s, &a.pre)?;
    let region = match s.get::<String>("region", a.region.as_deref(), "all")?.as_str() {
        "all" => None,
        name => Some(RegionSpec::by_name(name)?),
    };

    let path_a = PathBuf::from(s.require::<String>("input-a", a.inputs.input_a.as_deref())?);
    let path_b = match a.inputs.input_b.as_deref() {
        Some(p) => Some(PathBuf::from(s.get::<String>("input-b", Some(p), "")?)),
        None => None,
    };
    let (set_a, rec_a) = load(&path_a, 1)?;
    let mut records = vec![rec_a];
    let mut paths = vec![(path_a, 1u8)];
    let data = match &path_b {
        Some(pb) => {
            let (set_b, rec_b) = load(pb, 0)?;
            records.push(rec_b);
            paths.push((pb.clone(), 0));
            merge(&set_a, &set_b).context("the two inputs must share one wavenumber axis")?
        }
        None => set_a,
    };

    with_run(&c.out, "preprocess", records, &s, |run| {
        let out = run_preprocess(&data, &cfg)?;
        let cleaned = match &region {
            Some(r) => out.spectra.extract_region(r)?,
            None => out.spectra,
        };
        let stems: Vec<String> = paths.iter().map(|(p, _)| stem(p)).collect();
        let clash = stems.len() == 2 && stems[0] == stems[1];
        for ((_, label), st) in paths.iter().zip(&stems) {
            let name = if clash {
                format!("input_{}_preprocessed.csv", if *label == 1 { "a" } else { "b" })
            } else {
                format!("{st}_preprocessed.csv")
            };
            cleaned.class_subset(*label).save_csv(run.path(&name))?;
            run.record(&name);
        }
        println!("rejected {} of {} spectra", out.rejected.len(), data.n_spectra());
        run.note("outlier_gate", gate_summary(&out.rejected, &data));
        Ok(())
    })
}

pub fn evaluate(a: &EvaluateArgs) -> Result<()> {
    let mut s = Settings::load(a.common.config.as_deref())?;
    let c = common(&mut s, &a.common)?;
    let pcfg = preprocess_config(&mut s, &a.pre)?;
    let mcfg = method_config(&mut s, &a.model)?;
    let regions = regions(&mut s, a.region.as_deref())?;
    let methods = methods(&mut s, a.methods.as_deref(), "lra,l2d,lrp,pca,cnn")?;
    let folds: usize = s.get("folds", a.folds.as_deref(), "10")?;
    let (data, records) = load_pair(&mut s, &a.inputs)?;

    with_run(&c.out, "evaluate", records, &s, |run| {
        let pre = run_preprocess(&data, &pcfg)?;
        if !pre.rejected.is_empty() {
            log::warn!("outlier gate removed {} of {} spectra", pre.rejected.len(), data.n_spectra());
        }
        run.note("outlier_gate", gate_summary(&pre.rejected, &data));
        let mut reports = Vec::new();
        for region in &regions {
            let sub = pre.spectra.extract_region(region)?;
            let plan = FoldPlan::stratified(sub.labels(), folds, c.seed)?;
            for &m in &methods {
                log::info!("evaluating {m} on {}", region.name);
                let report = cross_validate(m, &mcfg, &sub, &plan, &region.name)
                    .with_context(|| format!("{m} on {}", region.name))?;
                let tag = format!("{}_{}", m.id(), region.name);
                run.write_json(&format!("report_{tag}.json"), serde_json::to_value(&report)?)?;
                run.write(&format!("roc_{tag}.csv"), report.roc_csv())?;
                eprintln!(
                    "{m} {}: AUC {:.4} ± {:.4} (SEM)",
                    region.name, report.mean_auc, report.sem
                );
                reports.push(report);
            }
        }
        let table = summary_table(&reports);
        run.write("summary.csv", table.to_csv())?;
        run.write("summary.txt", table.to_text())?;
        print!("{}", table.to_text());
        Ok(())
    })
}

pub fn explain(a: &ExplainArgs) -> Result<()> {
    let mut s = Settings::load(a.common.config.as_deref())?;
    let c = common(&mut s, &a.common)?;
    let pcfg = preprocess_config(&mut s, &a.pre)?;
    let mcfg = method_config(&mut s, &a.model)?;
    let regions = regions(&mut s, a.region.as_deref())?;
    let methods = methods(&mut s, a.methods.as_deref(), "lrp,cnn")?;
    if let Some(m) = methods.iter().find(|m| !matches!(m, MethodKind::Lrp | MethodKind::Cnn)) {
        bail!("explain supports lrp and cnn, not {m}");
    }
    let test_fraction: f64 = s.get("test-fraction", a.test_fraction.as_deref(), "0.3")?;
    let n_perm: usize = s.get("permutations", a.permutations.as_deref(), "30")?;
    let ecdf: EcdfMode = s.get("ecdf", a.ecdf.as_deref(), "pooled")?;
    let plots: bool = s.get("plots", a.plots.then_some("true"), "false")?;
    let (data, records) = load_pair(&mut s, &a.inputs)?;

    with_run(&c.out, "explain", records, &s, |run| {
        let pre = run_preprocess(&data, &pcfg)?;
        run.note("outlier_gate", gate_summary(&pre.rejected, &data));
        let (train_rows, test_rows) = holdout_split(pre.spectra.labels(), test_fraction, c.seed)?;
        let model_seed = rng::derive_seed(c.seed, rng::EXPLAIN_MODEL);
        for region in &regions {
            let sub = pre.spectra.extract_region(region)?;
            let train = sub.subset(&train_rows);
            let test = sub.subset(&test_rows);
            for &m in &methods {
                log::info!("fitting {m} on {} ({} train, {} test)", region.name, train.n_spectra(), test.n_spectra());
                match fit_method(m, &mcfg, &train, model_seed)? {
                    TrainedModel::Lrp { pooling, logistic } => {
                        let features = pool_features(&test, &pooling)?;
                        let labels: Vec<String> = pooling.bands(test.axis())?.iter().map(|b| b.label()).collect();
                        let report =
                            permutation_importance(&logistic, &features, test.labels(), &labels, n_perm, c.seed)?;
                        let csv = format!("importance_{}.csv", region.name);
                        run.write(&csv, report.to_csv())?;
                        run.write_json(&format!("importance_{}.json", region.name), serde_json::to_value(&report)?)?;
                        if plots {
                            run.write(&format!("importance_{}.gp", region.name), report.gnuplot_script(&csv))?;
                        }
                        let top = &report.features[report.top()];
                        println!(
                            "LRP {}: test AUC {:.4}, top band {} (importance {:.4} ± {:.4})",
                            region.name, report.baseline_auc, top.label, top.importance, top.half_width
                        );
                    }
                    TrainedModel::Cnn(model) => {
                        let map = saliency_map(&model, &test, ecdf)?;
                        let csv = format!("saliency_{}.csv", region.name);
                        run.write(&csv, map.to_csv())?;
                        if plots {
                            run.write(&format!("saliency_{}.gp", region.name), map.gnuplot_script(&csv))?;
                        }
                        let scores = model.predict_many(&test.rows().collect::<Vec<_>>())?;
                        let (auc, _) = roc_auc(&scores, test.labels())?;
                        run.note(&format!("cnn_test_auc_{}", region.name), json!(auc));
                        println!(
                            "CNN {}: test AUC {auc:.4}, saliency over {} test spectra",
                            region.name, map.n_spectra
                        );
                    }
                    _ => unreachable!("methods were checked above"),
                }
            }
        }
        Ok(())
    })
}
