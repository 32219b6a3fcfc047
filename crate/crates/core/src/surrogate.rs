//! Linear surrogate evaluators trained by stochastic gradient descent.
//!
//! The regressor minimises the epsilon-insensitive loss and the classifier the
//! hinge loss (a linear support vector machine), both with an L2 penalty and
//! an inverse-scaling learning rate `eta0 / t^power_t`. The step counter `t`
//! lives in the model so that [`SurrogateModel::partial_fit`] resumes the
//! schedule where the previous batch left it.
//!
//! Features are scaled to `[0, 1]` by the allele range. Regression targets are
//! standardised with the mean and deviation of the first batch the model sees;
//! predictions are mapped back to fitness units.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Example;
use crate::evaluation::Label;

const FORMAT_HEADER: &str = "ctt-surrogate v1";

#[derive(Debug, Error)]
pub enum SurrogateError {
    #[error("model has not been fitted")]
    Unfitted,
    #[error("model is a {found} model, {expected} required")]
    WrongTask { expected: Task, found: Task },
    #[error("expected {expected} features, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid feature scale: {0}")]
    InvalidScale(String),
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparameters(String),
    #[error("training needs at least 2 examples, got {0}")]
    NotEnoughExamples(usize),
    #[error("model file line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Regression,
    Classification,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Regression => "regression",
            Task::Classification => "classification",
        })
    }
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "regression" => Ok(Task::Regression),
            "classification" => Ok(Task::Classification),
            other => Err(format!("unknown task '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparameters {
    pub eta0: f64,
    pub power_t: f64,
    pub alpha: f64,
    pub epochs: usize,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Self {
            eta0: 0.01,
            power_t: 0.25,
            alpha: 1e-4,
            epochs: 5,
            epsilon: 0.1,
            seed: 0,
        }
    }
}

impl Hyperparameters {
    pub fn validate(&self) -> Result<(), SurrogateError> {
        let ok = |x: f64| x.is_finite() && x >= 0.0;
        if !(self.eta0.is_finite() && self.eta0 > 0.0) {
            return Err(SurrogateError::InvalidHyperparameters(
                "eta0 must be positive".into(),
            ));
        }
        if !ok(self.power_t) || !ok(self.alpha) || !ok(self.epsilon) {
            return Err(SurrogateError::InvalidHyperparameters(
                "power_t, alpha and epsilon must be non-negative".into(),
            ));
        }
        if self.epochs == 0 {
            return Err(SurrogateError::InvalidHyperparameters(
                "epochs must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Per-feature affine map `(x - offset) / divisor`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureScale {
    offset: Vec<f64>,
    divisor: Vec<f64>,
}

impl FeatureScale {
    pub fn new(offset: Vec<f64>, divisor: Vec<f64>) -> Result<Self, SurrogateError> {
        if offset.len() != divisor.len() {
            return Err(SurrogateError::InvalidScale(format!(
                "{} offsets for {} divisors",
                offset.len(),
                divisor.len()
            )));
        }
        if let Some(d) = divisor.iter().find(|d| !(d.is_finite() && **d > 0.0)) {
            return Err(SurrogateError::InvalidScale(format!(
                "divisor {d} is not positive"
            )));
        }
        if offset.iter().any(|o| !o.is_finite()) {
            return Err(SurrogateError::InvalidScale("offset is not finite".into()));
        }
        Ok(Self { offset, divisor })
    }

    /// Maps alleles `0..n_alleles` onto `[0, 1]`.
    pub fn for_alleles(n_features: usize, n_alleles: usize) -> Result<Self, SurrogateError> {
        let divisor = n_alleles.saturating_sub(1) as f64;
        Self::new(vec![0.0; n_features], vec![divisor; n_features])
    }

    pub fn len(&self) -> usize {
        self.offset.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offset.is_empty()
    }

    pub fn offset(&self) -> &[f64] {
        &self.offset
    }

    pub fn divisor(&self) -> &[f64] {
        &self.divisor
    }

    pub fn apply(&self, features: &[u32]) -> Result<Vec<f64>, SurrogateError> {
        if features.len() != self.len() {
            return Err(SurrogateError::DimensionMismatch {
                expected: self.len(),
                found: features.len(),
            });
        }
        Ok(features
            .iter()
            .zip(self.offset.iter().zip(&self.divisor))
            .map(|(&x, (o, d))| (f64::from(x) - o) / d)
            .collect())
    }
}

/// Fitted or unfitted linear surrogate.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateModel {
    task: Task,
    hyper: Hyperparameters,
    scale: FeatureScale,
    weights: Vec<f64>,
    bias: f64,
    target_offset: f64,
    target_scale: f64,
    steps: u64,
    fits: u64,
    fitted: bool,
    degenerate: bool,
}

impl SurrogateModel {
    pub fn new(
        task: Task,
        scale: FeatureScale,
        hyper: Hyperparameters,
    ) -> Result<Self, SurrogateError> {
        hyper.validate()?;
        Ok(Self {
            task,
            hyper,
            weights: vec![0.0; scale.len()],
            scale,
            bias: 0.0,
            target_offset: 0.0,
            target_scale: 1.0,
            steps: 0,
            fits: 0,
            fitted: false,
            degenerate: false,
        })
    }

    /// A fitted model with the given coefficients and identity target map.
    pub fn from_parts(
        task: Task,
        scale: FeatureScale,
        weights: Vec<f64>,
        bias: f64,
        hyper: Hyperparameters,
    ) -> Result<Self, SurrogateError> {
        if weights.len() != scale.len() {
            return Err(SurrogateError::DimensionMismatch {
                expected: scale.len(),
                found: weights.len(),
            });
        }
        let mut model = Self::new(task, scale, hyper)?;
        model.weights = weights;
        model.bias = bias;
        model.fitted = true;
        Ok(model)
    }

    /// Fresh model fitted on `examples`.
    pub fn train(
        task: Task,
        examples: &[&Example],
        scale: FeatureScale,
        hyper: Hyperparameters,
    ) -> Result<Self, SurrogateError> {
        if examples.len() < 2 {
            return Err(SurrogateError::NotEnoughExamples(examples.len()));
        }
        let mut model = Self::new(task, scale, hyper)?;
        model.partial_fit(examples)?;
        Ok(model)
    }

    /// Continues gradient descent over `batch` only. An empty batch leaves
    /// the model untouched.
    pub fn partial_fit(&mut self, batch: &[&Example]) -> Result<(), SurrogateError> {
        if batch.is_empty() {
            return Ok(());
        }
        let xs = batch
            .iter()
            .map(|e| self.scale.apply(&e.features))
            .collect::<Result<Vec<_>, _>>()?;

        if !self.fitted {
            match self.task {
                Task::Regression => {
                    let n = batch.len() as f64;
                    let mean = batch.iter().map(|e| e.fitness as f64).sum::<f64>() / n;
                    let var = batch
                        .iter()
                        .map(|e| (e.fitness as f64 - mean).powi(2))
                        .sum::<f64>()
                        / n;
                    self.target_offset = mean;
                    self.target_scale = if var.sqrt() > f64::EPSILON * mean.abs().max(1.0) {
                        var.sqrt()
                    } else {
                        1.0
                    };
                }
                Task::Classification => {
                    let first = batch[0].label;
                    if batch.iter().all(|e| e.label == first) {
                        log::warn!("classification batch holds a single class; fitting a constant classifier");
                        self.bias = sign(first);
                        self.degenerate = true;
                        self.fitted = true;
                        self.fits += 1;
                        return Ok(());
                    }
                }
            }
        }
        let ys: Vec<f64> = batch
            .iter()
            .map(|e| match self.task {
                Task::Regression => (e.fitness as f64 - self.target_offset) / self.target_scale,
                Task::Classification => sign(e.label),
            })
            .collect();

        let mut rng = ChaCha8Rng::seed_from_u64(self.hyper.seed);
        rng.set_stream(self.fits);
        let mut order: Vec<usize> = (0..batch.len()).collect();
        let Hyperparameters {
            eta0,
            power_t,
            alpha,
            epsilon,
            epochs,
            ..
        } = self.hyper;
        for _ in 0..epochs {
            order.shuffle(&mut rng);
            for &i in &order {
                self.steps += 1;
                let eta = eta0 / (self.steps as f64).powf(power_t);
                let x = &xs[i];
                let p = dot(&self.weights, x) + self.bias;
                let g = match self.task {
                    Task::Regression => {
                        let r = ys[i] - p;
                        if r > epsilon {
                            1.0
                        } else if r < -epsilon {
                            -1.0
                        } else {
                            0.0
                        }
                    }
                    Task::Classification => {
                        if ys[i] * p < 1.0 {
                            ys[i]
                        } else {
                            0.0
                        }
                    }
                };
                if alpha > 0.0 {
                    let decay = (1.0 - eta * alpha).max(0.0);
                    self.weights.iter_mut().for_each(|w| *w *= decay);
                }
                if g != 0.0 {
                    let step = eta * g;
                    for (w, xj) in self.weights.iter_mut().zip(x) {
                        *w += step * xj;
                    }
                    self.bias += step;
                }
            }
        }
        self.fitted = true;
        self.degenerate = false;
        self.fits += 1;
        Ok(())
    }

    /// Raw linear score `w · scale(x) + b`.
    pub fn decision(&self, features: &[u32]) -> Result<f64, SurrogateError> {
        if !self.fitted {
            return Err(SurrogateError::Unfitted);
        }
        let x = self.scale.apply(features)?;
        Ok(dot(&self.weights, &x) + self.bias)
    }

    pub fn predict_fitness(&self, features: &[u32]) -> Result<f64, SurrogateError> {
        self.require(Task::Regression)?;
        Ok(self.target_offset + self.target_scale * self.decision(features)?)
    }

    pub fn predict_feasible(&self, features: &[u32]) -> Result<Label, SurrogateError> {
        self.require(Task::Classification)?;
        Ok(if self.decision(features)? >= 0.0 {
            Label::Feasible
        } else {
            Label::NonFeasible
        })
    }

    fn require(&self, task: Task) -> Result<(), SurrogateError> {
        if self.task != task {
            return Err(SurrogateError::WrongTask {
                expected: task,
                found: self.task,
            });
        }
        Ok(())
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn hyperparameters(&self) -> &Hyperparameters {
        &self.hyper
    }

    pub fn scale(&self) -> &FeatureScale {
        &self.scale
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn n_features(&self) -> usize {
        self.weights.len()
    }

    pub fn is_fitted(&self) -> bool {
        self.fitted
    }

    /// True when the last fit saw a single class and produced a constant
    /// classifier.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn to_text(&self) -> String {
        let h = &self.hyper;
        let mut out = String::new();
        let mut line = |s: String| {
            out.push_str(&s);
            out.push('\n');
        };
        line(FORMAT_HEADER.to_owned());
        line(format!("task {}", self.task));
        line(format!("n_features {}", self.weights.len()));
        line(format!("seed {}", h.seed));
        line(format!("eta0 {}", real(h.eta0)));
        line(format!("power_t {}", real(h.power_t)));
        line(format!("alpha {}", real(h.alpha)));
        line(format!("epochs {}", h.epochs));
        line(format!("epsilon {}", real(h.epsilon)));
        line(format!("steps {}", self.steps));
        line(format!("fits {}", self.fits));
        line(format!("fitted {}", u8::from(self.fitted)));
        line(format!("degenerate {}", u8::from(self.degenerate)));
        line(format!("target_offset {}", real(self.target_offset)));
        line(format!("target_scale {}", real(self.target_scale)));
        line(format!("bias {}", real(self.bias)));
        line("features offset divisor weight".to_owned());
        for i in 0..self.weights.len() {
            line(format!(
                "{} {} {}",
                real(self.scale.offset[i]),
                real(self.scale.divisor[i]),
                real(self.weights[i])
            ));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, SurrogateError> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        let mut next = |what: &str| -> Result<(usize, &str), SurrogateError> {
            lines.next().ok_or(SurrogateError::Format {
                line: text.lines().count() + 1,
                message: format!("missing {what}"),
            })
        };
        let (n, header) = next("header")?;
        if header != FORMAT_HEADER {
            return Err(SurrogateError::Format {
                line: n,
                message: format!("expected '{FORMAT_HEADER}'"),
            });
        }
        let mut field = |key: &str| -> Result<(usize, String), SurrogateError> {
            let (n, l) = next(key)?;
            match l.split_once(' ') {
                Some((k, v)) if k == key => Ok((n, v.to_owned())),
                _ => Err(SurrogateError::Format {
                    line: n,
                    message: format!("expected '{key}'"),
                }),
            }
        };
        fn parse<T: FromStr>((n, v): (usize, String)) -> Result<T, SurrogateError> {
            v.parse().map_err(|_| SurrogateError::Format {
                line: n,
                message: format!("cannot parse '{v}'"),
            })
        }
        let task: Task = parse(field("task")?)?;
        let n_features: usize = parse(field("n_features")?)?;
        let hyper = Hyperparameters {
            seed: parse(field("seed")?)?,
            eta0: parse(field("eta0")?)?,
            power_t: parse(field("power_t")?)?,
            alpha: parse(field("alpha")?)?,
            epochs: parse(field("epochs")?)?,
            epsilon: parse(field("epsilon")?)?,
        };
        let steps: u64 = parse(field("steps")?)?;
        let fits: u64 = parse(field("fits")?)?;
        let fitted: u8 = parse(field("fitted")?)?;
        let degenerate: u8 = parse(field("degenerate")?)?;
        let target_offset: f64 = parse(field("target_offset")?)?;
        let target_scale: f64 = parse(field("target_scale")?)?;
        let bias: f64 = parse(field("bias")?)?;
        field("features")?;

        let mut offset = Vec::with_capacity(n_features);
        let mut divisor = Vec::with_capacity(n_features);
        let mut weights = Vec::with_capacity(n_features);
        for _ in 0..n_features {
            let (n, l) = next("feature row")?;
            let values: Vec<&str> = l.split_whitespace().collect();
            if values.len() != 3 {
                return Err(SurrogateError::Format {
                    line: n,
                    message: "expected offset, divisor and weight".into(),
                });
            }
            offset.push(parse((n, values[0].to_owned()))?);
            divisor.push(parse((n, values[1].to_owned()))?);
            weights.push(parse((n, values[2].to_owned()))?);
        }
        if let Some((n, l)) = next("end").ok().filter(|(_, l)| !l.is_empty()) {
            return Err(SurrogateError::Format {
                line: n,
                message: format!("unexpected trailing content '{l}'"),
            });
        }
        let mut model = Self::new(task, FeatureScale::new(offset, divisor)?, hyper)?;
        model.weights = weights;
        model.bias = bias;
        model.target_offset = target_offset;
        model.target_scale = target_scale;
        model.steps = steps;
        model.fits = fits;
        model.fitted = fitted != 0;
        model.degenerate = degenerate != 0;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<(), SurrogateError> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, SurrogateError> {
        Self::from_text(&fs::read_to_string(path)?)
    }
}

fn sign(label: Label) -> f64 {
    match label {
        Label::Feasible => 1.0,
        Label::NonFeasible => -1.0,
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn real(x: f64) -> String {
    format!("{x:.16e}")
}
