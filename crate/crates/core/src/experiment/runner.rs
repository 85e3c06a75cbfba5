use crate::baselines::{continue_cae, continue_cls, hog_matrix, original_features, pca_fit, HogConfig, PCA_COMPONENTS};
use crate::datasets::{ExperimentSplit, Label};
use crate::losses::LossWeights;
use crate::matrix::Matrix;
use crate::metrics::{aggregate, balanced_accuracy, ConfusionCounts};
use crate::nn::AutoencoderParams;
use crate::ocsvm::{self, OcsvmParams};
use crate::pipeline::{continue_from_stage1, extract_features, stage1_train, TrainConfig};
use crate::{par, Error, Result};

use super::data::Dataset;
use super::manifest::{Manifest, Method, ThresholdRule};

/// Balanced accuracy of a cell, or why it failed.
pub type Outcome = std::result::Result<f64, String>;

/// Outcome of one (class, method, seed) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub normal_class: u8,
    pub method: Method,
    pub seed: u64,
    /// Balanced accuracy on the evaluation split, or the error message.
    pub bacc: Outcome,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub dataset: String,
    pub classes: Vec<u8>,
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
    /// Ordered by class, then method (manifest order), then seed.
    pub cells: Vec<CellResult>,
}

impl RunReport {
    pub fn failures(&self) -> usize {
        self.cells.iter().filter(|c| c.bacc.is_err()).count()
    }

    /// Balanced accuracies of one method as `(class, seed, result)`.
    pub fn method_cells(&self, method: Method) -> Vec<(u8, u64, Outcome)> {
        self.cells
            .iter()
            .filter(|c| c.method == method)
            .map(|c| (c.normal_class, c.seed, c.bacc.clone()))
            .collect()
    }

    pub fn summary(&self, method: Method) -> Summary {
        summarize(&self.classes, &self.method_cells(method))
    }
}

/// Per-class and overall aggregation of one method's cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    /// `(class, mean, std, failures)`; mean and std are `None` if every seed failed.
    pub per_class: Vec<(u8, Option<(f64, f64)>, usize)>,
    /// Mean over classes of the per-class mean and of the per-class std.
    pub overall: Option<(f64, f64)>,
    pub failures: usize,
}

pub fn summarize(classes: &[u8], cells: &[(u8, u64, Outcome)]) -> Summary {
    let mut per_class = Vec::with_capacity(classes.len());
    let mut stats = Vec::new();
    let mut failures = 0;
    for &class in classes {
        let mine: Vec<_> = cells.iter().filter(|c| c.0 == class).collect();
        let ok: Vec<f64> = mine.iter().filter_map(|c| c.2.as_ref().ok().copied()).collect();
        let failed = mine.len() - ok.len();
        failures += failed;
        let agg = aggregate(&ok).ok();
        if let Some(a) = agg {
            stats.push(a);
        }
        per_class.push((class, agg, failed));
    }
    let overall = (!stats.is_empty()).then(|| {
        let n = stats.len() as f64;
        (stats.iter().map(|s| s.0).sum::<f64>() / n, stats.iter().map(|s| s.1).sum::<f64>() / n)
    });
    Summary {
        per_class,
        overall,
        failures,
    }
}

/// Fit the one-class SVM on training features, pick the threshold, and score
/// the evaluation split.
pub fn evaluate_features(
    train: &Matrix,
    validation: (&Matrix, &[Label]),
    evaluation: (&Matrix, &[Label]),
    params: &OcsvmParams,
    rule: ThresholdRule,
) -> Result<f64> {
    let mut model = ocsvm::fit(train, params)?;
    if rule == ThresholdRule::Validation {
        model.tune_threshold(validation.0, validation.1)?;
    }
    let predicted = model.predict_all(evaluation.0)?;
    balanced_accuracy(&ConfusionCounts::from_predictions(evaluation.1, &predicted)?)
}

fn evaluate_split<F>(split: &ExperimentSplit, manifest: &Manifest, features: F) -> Result<f64>
where
    F: Fn(&crate::datasets::ImageSet) -> Result<Matrix>,
{
    let train = features(&split.train)?;
    let val = features(&split.validation.images)?;
    let eval = features(&split.evaluation.images)?;
    evaluate_features(
        &train,
        (&val, &split.validation.labels),
        (&eval, &split.evaluation.labels),
        &manifest.ocsvm,
        manifest.threshold,
    )
}

fn evaluate_params(split: &ExperimentSplit, manifest: &Manifest, params: &AutoencoderParams) -> Result<f64> {
    evaluate_split(split, manifest, |set| extract_features(params, set))
}

/// Evaluate a method that does not train, so its result is shared by all seeds.
fn fixed_method(method: Method, split: &ExperimentSplit, manifest: &Manifest, external: Option<&ExperimentSplit>) -> Result<f64> {
    match method {
        Method::Original => evaluate_split(split, manifest, |s| Ok(original_features(s))),
        Method::Pca => {
            let model = pca_fit(&original_features(&split.train), PCA_COMPONENTS)?;
            evaluate_split(split, manifest, |s| model.transform(&original_features(s)))
        }
        Method::Hog => {
            let cfg = HogConfig::for_shape(split.train.shape());
            evaluate_split(split, manifest, |s| hog_matrix(s, &cfg))
        }
        Method::External => {
            let ext = external.ok_or_else(|| Error::Config("no external features loaded".into()))?;
            evaluate_split(ext, manifest, |s| Ok(original_features(s)))
        }
        _ => unreachable!("learned methods train per seed"),
    }
}

/// Train stage 1 once, then branch into every requested learned method.
fn learned_methods(split: &ExperimentSplit, manifest: &Manifest, seed: u64, methods: &[Method]) -> Vec<Outcome> {
    let cfg = TrainConfig {
        seed,
        ..manifest.train.clone()
    };
    let stage1 = match stage1_train(&split.train, &cfg) {
        Ok(t) => t,
        Err(e) => return vec![Err(e.to_string()); methods.len()],
    };
    methods
        .iter()
        .map(|m| {
            let trainer = stage1.clone();
            let params = match m {
                Method::Ours => continue_from_stage1(trainer, &split.train)?.params,
                Method::Cae => continue_cae(trainer, &split.train)?.into_params(),
                Method::Cls => continue_cls(trainer, &split.train)?.into_params(),
                _ => unreachable!("fixed methods are evaluated once"),
            };
            evaluate_params(split, manifest, &params)
        })
        .map(|r: Result<f64>| r.map_err(|e| e.to_string()))
        .collect()
}

enum Unit {
    Fixed(usize),
    Learned(usize, u64),
}

fn make_splits(manifest: &Manifest, data: &Dataset) -> Vec<Result<ExperimentSplit>> {
    manifest
        .classes
        .iter()
        .map(|&c| data.split(c, &manifest.experiment, manifest.split_seed))
        .collect()
}

/// Run every (class, method, seed) cell of the manifest. Cell failures are
/// recorded in the report; only an unusable manifest is an error.
pub fn run_grid(manifest: &Manifest, data: &Dataset, external: Option<&Dataset>) -> Result<RunReport> {
    let splits = make_splits(manifest, data);
    let ext_splits: Option<Vec<Result<ExperimentSplit>>> = external.map(|d| make_splits(manifest, d));
    let learned: Vec<Method> = manifest.methods.iter().copied().filter(|m| m.is_learned()).collect();
    let fixed: Vec<Method> = manifest.methods.iter().copied().filter(|m| !m.is_learned()).collect();

    let mut units = Vec::new();
    for ci in 0..manifest.classes.len() {
        if !fixed.is_empty() {
            units.push(Unit::Fixed(ci));
        }
        if !learned.is_empty() {
            units.extend(manifest.seeds.iter().map(|&s| Unit::Learned(ci, s)));
        }
    }
    let outcomes: Vec<Vec<Outcome>> = par::map_slice(&units, |unit| match *unit {
        Unit::Fixed(ci) => match &splits[ci] {
            Err(e) => vec![Err(e.to_string()); fixed.len()],
            Ok(split) => fixed
                .iter()
                .map(|&m| {
                    let ext = match (&ext_splits, m) {
                        (Some(s), Method::External) => Some(s[ci].as_ref().map_err(|e| e.to_string())?),
                        _ => None,
                    };
                    fixed_method(m, split, manifest, ext).map_err(|e| e.to_string())
                })
                .collect(),
        },
        Unit::Learned(ci, seed) => match &splits[ci] {
            Err(e) => vec![Err(e.to_string()); learned.len()],
            Ok(split) => learned_methods(split, manifest, seed, &learned),
        },
    });

    let mut cells = Vec::new();
    for (ci, &class) in manifest.classes.iter().enumerate() {
        for &method in &manifest.methods {
            for &seed in &manifest.seeds {
                let result = units.iter().zip(&outcomes).find_map(|(u, out)| match *u {
                    Unit::Fixed(c) if c == ci && !method.is_learned() => {
                        Some(&out[fixed.iter().position(|&m| m == method).expect("fixed method")])
                    }
                    Unit::Learned(c, s) if c == ci && s == seed && method.is_learned() => {
                        Some(&out[learned.iter().position(|&m| m == method).expect("learned method")])
                    }
                    _ => None,
                });
                let bacc = result.expect("every cell has a unit").clone();
                cells.push(CellResult {
                    normal_class: class,
                    method,
                    seed,
                    bacc,
                });
            }
        }
    }
    Ok(RunReport {
        dataset: manifest.dataset_name.clone(),
        classes: manifest.classes.clone(),
        methods: manifest.methods.clone(),
        seeds: manifest.seeds.clone(),
        cells,
    })
}

/// Stage-3 setting varied by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Rho,
    /// Both dispersion weights at once.
    Beta,
}

impl SweepParam {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepParam::Rho => "rho",
            SweepParam::Beta => "beta",
        }
    }

    fn apply(self, base: &TrainConfig, value: f64) -> (f64, LossWeights) {
        match self {
            SweepParam::Rho => (value, base.weights),
            SweepParam::Beta => (
                base.rho,
                LossWeights {
                    beta1: value,
                    beta2: value,
                    ..base.weights
                },
            ),
        }
    }

    pub fn validate(self, values: &[f64]) -> Result<()> {
        if values.is_empty() {
            return Err(Error::Config(format!("no {} values to sweep", self.as_str())));
        }
        for &v in values {
            let ok = match self {
                SweepParam::Rho => (0.0..=100.0).contains(&v),
                SweepParam::Beta => v > 0.0 && v.is_finite(),
            };
            if !ok {
                return Err(Error::Config(format!("{} = {v} out of range", self.as_str())));
            }
        }
        Ok(())
    }
}

/// One aggregate point of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub value: f64,
    pub summary: Summary,
}

/// Run the proposed method for every class and seed at each value of `param`,
/// sharing the stage-1 network of a (class, seed) pair across values.
pub fn run_sweep(manifest: &Manifest, data: &Dataset, param: SweepParam, values: &[f64]) -> Result<Vec<CurvePoint>> {
    param.validate(values)?;
    let splits = make_splits(manifest, data);
    let units: Vec<(usize, u64)> = (0..manifest.classes.len())
        .flat_map(|ci| manifest.seeds.iter().map(move |&s| (ci, s)))
        .collect();
    let outcomes: Vec<Vec<Outcome>> = par::map_slice(&units, |&(ci, seed)| {
        let split = match &splits[ci] {
            Ok(s) => s,
            Err(e) => return vec![Err(e.to_string()); values.len()],
        };
        let cfg = TrainConfig {
            seed,
            ..manifest.train.clone()
        };
        let stage1 = match stage1_train(&split.train, &cfg) {
            Ok(t) => t,
            Err(e) => return vec![Err(e.to_string()); values.len()],
        };
        values
            .iter()
            .map(|&v| {
                let (rho, weights) = param.apply(&cfg, v);
                let trainer = stage1.clone().with_stage3(rho, weights)?;
                let params = continue_from_stage1(trainer, &split.train)?.params;
                evaluate_params(split, manifest, &params)
            })
            .map(|r| r.map_err(|e| e.to_string()))
            .collect()
    });
    Ok(values
        .iter()
        .enumerate()
        .map(|(vi, &value)| {
            let cells: Vec<_> = units
                .iter()
                .zip(&outcomes)
                .map(|(&(ci, seed), out)| (manifest.classes[ci], seed, out[vi].clone()))
                .collect();
            CurvePoint {
                value,
                summary: summarize(&manifest.classes, &cells),
            }
        })
        .collect())
}
