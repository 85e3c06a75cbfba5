//! ν-one-class SVM with an RBF kernel.
//!
//! The dual
//!
//! ```text
//! min ½ Σ_ij α_i α_j k(x_i, x_j)   s.t.  0 ≤ α_i ≤ 1/(νN),  Σ α_i = 1
//! ```
//!
//! is solved by SMO with maximal-violating-pair selection. The decision
//! function is `Σ α_i k(x_i, x) − ρ`, positive inside the learned region.

mod kernel;
mod threshold;

pub use kernel::rbf_kernel;
pub use threshold::{best_threshold, choose_threshold};

use std::fmt::Write as _;
use std::path::Path;

use kernel::{rbf, KernelCache};

use crate::datasets::Label;
use crate::matrix::Matrix;
use crate::{par, Error, Result};

/// Kernel width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gamma {
    /// `1 / #features`.
    Auto,
    Fixed(f64),
}

impl Gamma {
    pub fn resolve(self, features: usize) -> f64 {
        match self {
            Gamma::Auto => 1.0 / features.max(1) as f64,
            Gamma::Fixed(g) => g,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OcsvmParams {
    pub nu: f64,
    pub gamma: Gamma,
    /// Stop once the maximal KKT violation drops below this.
    pub tol: f64,
    /// Cap on SMO pair updates.
    pub max_iter: u64,
    /// Memory budget of the kernel row cache.
    pub cache_bytes: usize,
}

impl Default for OcsvmParams {
    fn default() -> Self {
        Self {
            nu: 0.1,
            gamma: Gamma::Auto,
            tol: 1e-4,
            max_iter: 10_000_000,
            cache_bytes: 256 << 20,
        }
    }
}

impl OcsvmParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0 && self.nu <= 1.0) {
            return Err(Error::Config(format!("nu {} outside (0, 1]", self.nu)));
        }
        if let Gamma::Fixed(g) = self.gamma {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::Config(format!("gamma {g} must be positive")));
            }
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!("tolerance {} must be positive", self.tol)));
        }
        Ok(())
    }
}

/// Solution of the dual for every training row, in the caller's row order.
#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    pub rho: f64,
    pub gamma: f64,
    /// Box bound `1/(νN)`.
    pub upper: f64,
    pub objective: f64,
    pub iterations: u64,
}

/// Solve the one-class dual on the rows of `x`.
///
/// Rows are processed in lexicographic order internally, so the solution does
/// not depend on how the caller ordered the training set.
pub fn solve_dual(x: &Matrix, params: &OcsvmParams) -> Result<DualSolution> {
    params.validate()?;
    let n = x.rows();
    if n == 0 {
        return Err(Error::Empty("one-class SVM needs at least one training row".into()));
    }
    if let Some(i) = x.as_slice().iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("training feature {i}")));
    }
    let gamma = params.gamma.resolve(x.cols());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        x.row(a)
            .iter()
            .zip(x.row(b))
            .map(|(p, q)| p.total_cmp(q))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let sorted = x.select_rows(&order);
    let upper = 1.0 / (params.nu * n as f64);
    let mut cache = KernelCache::new(&sorted, gamma, params.cache_bytes);

    // Feasible start: fill the first coordinates up to the box bound.
    let mut alpha = vec![0.0; n];
    let mut left = 1.0f64;
    for a in alpha.iter_mut() {
        if left <= 0.0 {
            break;
        }
        *a = left.min(upper);
        left -= *a;
    }
    let mut grad = vec![0.0; n];
    for i in 0..n {
        if alpha[i] > 0.0 {
            let a = alpha[i];
            for (g, k) in grad.iter_mut().zip(cache.row(i)) {
                *g += a * k;
            }
        }
    }

    let at_upper = |a: f64| a >= upper;
    let mut iterations = 0u64;
    loop {
        // i: may grow (α < C) with the smallest gradient.
        // j: may shrink (α > 0) with the largest gradient.
        let (mut i, mut gi) = (usize::MAX, f64::INFINITY);
        let (mut j, mut gj) = (usize::MAX, f64::NEG_INFINITY);
        for t in 0..n {
            if !at_upper(alpha[t]) && grad[t] < gi {
                i = t;
                gi = grad[t];
            }
            if alpha[t] > 0.0 && grad[t] > gj {
                j = t;
                gj = grad[t];
            }
        }
        if i == usize::MAX || j == usize::MAX || gj - gi < params.tol {
            break;
        }
        if iterations >= params.max_iter {
            return Err(Error::NonConvergence {
                iterations,
                violation: gj - gi,
            });
        }
        iterations += 1;
        let (ki, kj) = cache.pair(i, j);
        let curvature = (ki[i] + kj[j] - 2.0 * ki[j]).max(1e-12);
        let step = ((gj - gi) / curvature).min(upper - alpha[i]).min(alpha[j]);
        alpha[i] += step;
        alpha[j] -= step;
        if alpha[j] < 1e-15 {
            alpha[j] = 0.0;
        }
        if upper - alpha[i] < 1e-15 {
            alpha[i] = upper;
        }
        for t in 0..n {
            grad[t] += step * (ki[t] - kj[t]);
        }
    }

    // Offset: average gradient over free vectors, else the midpoint of the
    // interval allowed by the bounded ones.
    let (mut free_sum, mut free_n) = (0.0, 0usize);
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for t in 0..n {
        if alpha[t] > 0.0 && !at_upper(alpha[t]) {
            free_sum += grad[t];
            free_n += 1;
        } else if at_upper(alpha[t]) {
            lo = lo.max(grad[t]);
        } else {
            hi = hi.min(grad[t]);
        }
    }
    let rho = if free_n > 0 {
        free_sum / free_n as f64
    } else if lo.is_finite() && hi.is_finite() {
        0.5 * (lo + hi)
    } else if lo.is_finite() {
        lo
    } else {
        hi
    };
    let objective = 0.5 * alpha.iter().zip(&grad).map(|(a, g)| a * g).sum::<f64>();

    let mut unsorted = vec![0.0; n];
    for (pos, &orig) in order.iter().enumerate() {
        unsorted[orig] = alpha[pos];
    }
    Ok(DualSolution {
        alpha: unsorted,
        rho,
        gamma,
        upper,
        objective,
        iterations,
    })
}

/// A fitted one-class SVM: support vectors with their coefficients, the
/// offset, and the classification threshold on the decision score.
#[derive(Debug, Clone, PartialEq)]
pub struct OcsvmModel {
    pub nu: f64,
    pub gamma: f64,
    pub rho: f64,
    /// Samples scoring below this are abnormal. Zero after fitting.
    pub threshold: f64,
    pub support: Matrix,
    pub alpha: Vec<f64>,
    pub iterations: u64,
}

const MODEL_MAGIC: &str = "INTRASPLIT-OCSVM 1";

/// Fit on the rows of `x`.
pub fn fit(x: &Matrix, params: &OcsvmParams) -> Result<OcsvmModel> {
    let sol = solve_dual(x, params)?;
    let sv: Vec<usize> = (0..x.rows()).filter(|&i| sol.alpha[i] > 0.0).collect();
    Ok(OcsvmModel {
        nu: params.nu,
        gamma: sol.gamma,
        rho: sol.rho,
        threshold: 0.0,
        support: x.select_rows(&sv),
        alpha: sv.iter().map(|&i| sol.alpha[i]).collect(),
        iterations: sol.iterations,
    })
}

impl OcsvmModel {
    pub fn features(&self) -> usize {
        self.support.cols()
    }

    /// `Σ α_i k(x_i, x) − ρ`.
    pub fn decision_score(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.features() {
            return Err(Error::Shape(format!(
                "query has {} features, model expects {}",
                x.len(),
                self.features()
            )));
        }
        Ok(self.score_unchecked(x))
    }

    fn score_unchecked(&self, x: &[f64]) -> f64 {
        let s: f64 = self
            .support
            .iter_rows()
            .zip(&self.alpha)
            .map(|(sv, a)| a * rbf(sv, x, self.gamma))
            .sum();
        s - self.rho
    }

    /// Decision scores of every row, computed in parallel.
    pub fn decision_scores(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.cols() != self.features() {
            return Err(Error::Shape(format!(
                "queries have {} features, model expects {}",
                x.cols(),
                self.features()
            )));
        }
        Ok(par::map_range(x.rows(), |i| self.score_unchecked(x.row(i))))
    }

    /// Abnormal iff the score is strictly below the threshold.
    pub fn label_for(&self, score: f64) -> Label {
        if score < self.threshold {
            Label::Abnormal
        } else {
            Label::Normal
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<Label> {
        Ok(self.label_for(self.decision_score(x)?))
    }

    pub fn predict_all(&self, x: &Matrix) -> Result<Vec<Label>> {
        Ok(self.decision_scores(x)?.into_iter().map(|s| self.label_for(s)).collect())
    }

    /// Tune the threshold on labeled validation features.
    pub fn tune_threshold(&mut self, x: &Matrix, labels: &[Label]) -> Result<f64> {
        let (t, bacc) = best_threshold(&self.decision_scores(x)?, labels)?;
        self.threshold = t;
        Ok(bacc)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{MODEL_MAGIC}");
        let _ = writeln!(s, "nu {}", self.nu);
        let _ = writeln!(s, "gamma {}", self.gamma);
        let _ = writeln!(s, "rho {}", self.rho);
        let _ = writeln!(s, "threshold {}", self.threshold);
        let _ = writeln!(s, "iterations {}", self.iterations);
        let _ = writeln!(s, "support {} {}", self.support.rows(), self.support.cols());
        for (row, a) in self.support.iter_rows().zip(&self.alpha) {
            s.push_str(&a.to_string());
            for v in row {
                let _ = write!(s, " {v}");
            }
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |what: &str| Error::Format(format!("model file: {what}"));
        let mut lines = text.lines();
        if lines.next() != Some(MODEL_MAGIC) {
            return Err(bad("unknown header"));
        }
        let mut field = |name: &str| -> Result<String> {
            let line = lines.next().ok_or_else(|| bad("truncated"))?;
            line.strip_prefix(name)
                .and_then(|r| r.strip_prefix(' '))
                .map(str::to_owned)
                .ok_or_else(|| bad(&format!("expected `{name}`")))
        };
        let num = |s: String| s.parse::<f64>().map_err(|_| bad(&format!("bad number `{s}`")));
        let nu = num(field("nu")?)?;
        let gamma = num(field("gamma")?)?;
        let rho = num(field("rho")?)?;
        let threshold = num(field("threshold")?)?;
        let iterations = field("iterations")?.parse().map_err(|_| bad("bad iteration count"))?;
        let dims = field("support")?;
        let (rows, cols) = dims
            .split_once(' ')
            .and_then(|(r, c)| Some((r.parse::<usize>().ok()?, c.parse::<usize>().ok()?)))
            .ok_or_else(|| bad("bad support dimensions"))?;
        let mut alpha = Vec::with_capacity(rows);
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let line = lines.next().ok_or_else(|| bad("truncated support vectors"))?;
            let vals = line
                .split(' ')
                .map(|v| v.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| bad("bad support vector"))?;
            if vals.len() != cols + 1 {
                return Err(bad("support vector width"));
            }
            alpha.push(vals[0]);
            data.extend_from_slice(&vals[1..]);
        }
        if lines.any(|l| !l.trim().is_empty()) {
            return Err(bad("trailing data"));
        }
        Ok(Self {
            nu,
            gamma,
            rho,
            threshold,
            support: Matrix::from_vec(rows, cols, data)?,
            alpha,
            iterations,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}
