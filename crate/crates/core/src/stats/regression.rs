//! Least squares and logistic regression on named design matrices.

use indexmap::IndexMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::linalg::{invert_symmetric, mat_vec};
use super::{logistic, StatsError};

/// Row-major design matrix with named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    names: Vec<String>,
    rows: usize,
    data: Vec<f64>,
}

impl Design {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Self {
        Design { names: names.into_iter().map(Into::into).collect(), rows: 0, data: Vec::new() }
    }

    pub fn push_row(&mut self, row: &[f64]) {
        assert_eq!(row.len(), self.names.len(), "row width does not match design columns");
        self.data.extend_from_slice(row);
        self.rows += 1;
    }

    pub fn from_rows<S: Into<String>>(names: impl IntoIterator<Item = S>, rows: &[Vec<f64>]) -> Self {
        let mut d = Design::new(names);
        for r in rows {
            d.push_row(r);
        }
        d
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.cols();
        &self.data[i * p..(i + 1) * p]
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.rows).map(move |i| self.data[i * self.cols() + j])
    }

    /// Copy without the columns that take a single value across all rows,
    /// except those named in `keep` (typically the intercept).
    pub fn without_constant_columns(&self, keep: &[&str]) -> Design {
        let retained: Vec<usize> = (0..self.cols())
            .filter(|&j| {
                keep.contains(&self.names[j].as_str()) || {
                    let first = self.data.get(j).copied();
                    self.column(j).any(|v| Some(v) != first)
                }
            })
            .collect();
        let mut out = Design::new(retained.iter().map(|&j| self.names[j].clone()));
        for i in 0..self.rows {
            let r = self.row(i);
            out.data.extend(retained.iter().map(|&j| r[j]));
            out.rows += 1;
        }
        out
    }

    fn predict(&self, beta: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|i| self.row(i).iter().zip(beta).map(|(x, b)| x * b).sum()).collect()
    }

    /// `X' diag(w) X`, or `X'X` when `w` is `None`.
    fn gram(&self, w: Option<&[f64]>) -> Vec<f64> {
        let p = self.cols();
        let mut g = vec![0.0; p * p];
        for i in 0..self.rows {
            let r = self.row(i);
            let wi = w.map_or(1.0, |w| w[i]);
            for a in 0..p {
                let ra = r[a] * wi;
                for b in a..p {
                    g[a * p + b] += ra * r[b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                g[a * p + b] = g[b * p + a];
            }
        }
        g
    }

    fn xt(&self, v: &[f64]) -> Vec<f64> {
        let p = self.cols();
        let mut out = vec![0.0; p];
        for (i, &vi) in v.iter().enumerate().take(self.rows) {
            for (o, x) in out.iter_mut().zip(self.row(i)) {
                *o += x * vi;
            }
        }
        out
    }

    fn check(&self, response: &[f64]) -> Result<(), StatsError> {
        if response.len() != self.rows {
            return Err(StatsError::LengthMismatch { rows: self.rows, response: response.len() });
        }
        if self.rows < self.cols() || self.cols() == 0 {
            return Err(StatsError::Underdetermined { rows: self.rows, cols: self.cols() });
        }
        Ok(())
    }
}

/// Fitted coefficients keyed by regressor name.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionFit {
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub standard_errors: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub n: usize,
}

impl RegressionFit {
    pub fn coef(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.coefficients[i])
    }

    pub fn se(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.standard_errors[i])
    }

    /// Normal-approximation interval for coefficient `i`.
    pub fn wald_interval(&self, i: usize, z: f64) -> (f64, f64) {
        let (b, s) = (self.coefficients[i], self.standard_errors[i]);
        (b - z * s, b + z * s)
    }
}

#[derive(Serialize, Deserialize)]
struct FitRecord {
    coef: IndexMap<String, f64>,
    se: IndexMap<String, Option<f64>>,
    n: usize,
    converged: bool,
    #[serde(default)]
    iterations: usize,
}

impl Serialize for RegressionFit {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        FitRecord {
            coef: self.names.iter().cloned().zip(self.coefficients.iter().copied()).collect(),
            se: self
                .names
                .iter()
                .cloned()
                .zip(self.standard_errors.iter().map(|&v| v.is_finite().then_some(v)))
                .collect(),
            n: self.n,
            converged: self.converged,
            iterations: self.iterations,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for RegressionFit {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let r = FitRecord::deserialize(d)?;
        let names: Vec<String> = r.coef.keys().cloned().collect();
        let standard_errors =
            names.iter().map(|n| r.se.get(n).copied().flatten().unwrap_or(f64::NAN)).collect();
        Ok(RegressionFit {
            coefficients: r.coef.values().copied().collect(),
            names,
            standard_errors,
            converged: r.converged,
            iterations: r.iterations,
            n: r.n,
        })
    }
}

fn invert_or_rank_error(design: &Design, gram: &[f64]) -> Result<Vec<f64>, StatsError> {
    invert_symmetric(gram, design.cols()).map_err(|j| StatsError::RankDeficient(design.names[j].clone()))
}

/// Ordinary least squares through the normal equations.
pub fn ols_fit(design: &Design, response: &[f64]) -> Result<RegressionFit, StatsError> {
    design.check(response)?;
    let p = design.cols();
    let inv = invert_or_rank_error(design, &design.gram(None))?;
    let beta = mat_vec(&inv, p, &design.xt(response));
    let fitted = design.predict(&beta);
    let rss: f64 = response.iter().zip(&fitted).map(|(y, f)| (y - f).powi(2)).sum();
    let dof = design.rows() - p;
    let sigma2 = if dof > 0 { rss / dof as f64 } else { f64::NAN };
    let standard_errors = (0..p).map(|j| (sigma2 * inv[j * p + j]).sqrt()).collect();
    Ok(RegressionFit {
        names: design.names.clone(),
        coefficients: beta,
        standard_errors,
        converged: true,
        iterations: 1,
        n: design.rows(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticOptions {
    pub max_iter: usize,
    /// Convergence threshold on the Euclidean norm of the score vector.
    pub tol: f64,
}

impl Default for LogisticOptions {
    fn default() -> Self {
        LogisticOptions { max_iter: 100, tol: 1e-8 }
    }
}

/// Log-likelihood of a Bernoulli response under linear predictor `eta`.
fn log_likelihood(y: &[f64], eta: &[f64]) -> f64 {
    // log(1 + e^eta) computed without overflow
    let softplus = |z: f64| if z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() };
    y.iter().zip(eta).map(|(&y, &e)| y * e - softplus(e)).sum()
}

/// Coefficient magnitude treated as divergence once iterations run out.
const DIVERGENT_COEFFICIENT: f64 = 25.0;

/// Maximum-likelihood logistic regression by iteratively reweighted least
/// squares (Newton-Raphson with step halving).
pub fn logistic_fit(design: &Design, response: &[f64], opts: LogisticOptions) -> Result<RegressionFit, StatsError> {
    design.check(response)?;
    if let Some(i) = response.iter().position(|&y| y != 0.0 && y != 1.0) {
        return Err(StatsError::NonBinaryResponse(i));
    }
    let p = design.cols();
    let mut beta = vec![0.0; p];
    let mut eta = design.predict(&beta);
    let mut ll = log_likelihood(response, &eta);

    for iter in 0..=opts.max_iter {
        // A linear predictor that classifies every row correctly proves the
        // data are separable, so no finite maximum exists.
        if iter > 0 && response.iter().zip(&eta).all(|(&y, &e)| (2.0 * y - 1.0) * e > 0.0) {
            return Err(StatsError::Separation);
        }
        let mu: Vec<f64> = eta.iter().map(|&e| logistic(e)).collect();
        let w: Vec<f64> = mu.iter().map(|m| m * (1.0 - m)).collect();
        let resid: Vec<f64> = response.iter().zip(&mu).map(|(y, m)| y - m).collect();
        let score = design.xt(&resid);
        let score_norm = score.iter().map(|s| s * s).sum::<f64>().sqrt();
        let info = design.gram(Some(&w));
        let inv = match invert_symmetric(&info, p) {
            Ok(inv) => inv,
            // weights only collapse when fitted probabilities run to 0 or 1
            Err(_) if iter > 0 => return Err(StatsError::Separation),
            Err(j) => return Err(StatsError::RankDeficient(design.names[j].clone())),
        };
        let step = mat_vec(&inv, p, &score);
        let beta_scale = 1.0 + beta.iter().fold(0.0f64, |m, b| m.max(b.abs()));
        let step_size = step.iter().fold(0.0f64, |m, s| m.max(s.abs()));
        if score_norm <= opts.tol || step_size <= 1e-13 * beta_scale {
            let standard_errors = (0..p).map(|j| inv[j * p + j].sqrt()).collect();
            return Ok(RegressionFit {
                names: design.names.clone(),
                coefficients: beta,
                standard_errors,
                converged: true,
                iterations: iter,
                n: design.rows(),
            });
        }
        if iter == opts.max_iter {
            break;
        }

        let mut t = 1.0;
        loop {
            let candidate: Vec<f64> = beta.iter().zip(&step).map(|(b, s)| b + t * s).collect();
            let cand_eta = design.predict(&candidate);
            let cand_ll = log_likelihood(response, &cand_eta);
            if cand_ll >= ll - 1e-12 * ll.abs().max(1.0) || t < 1e-8 {
                beta = candidate;
                eta = cand_eta;
                ll = cand_ll;
                break;
            }
            t *= 0.5;
        }
    }

    if beta.iter().any(|b| b.abs() > DIVERGENT_COEFFICIENT) {
        Err(StatsError::Separation)
    } else {
        Err(StatsError::NotConverged(opts.max_iter))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;

    #[test]
    fn ols_recovers_exact_line() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![1.0, i as f64 * 0.37]).collect();
        let y: Vec<f64> = rows.iter().map(|r| 2.0 + 3.0 * r[1]).collect();
        let fit = ols_fit(&Design::from_rows(["intercept", "x"], &rows), &y).unwrap();
        assert!((fit.coef("intercept").unwrap() - 2.0).abs() < 1e-10);
        assert!((fit.coef("x").unwrap() - 3.0).abs() < 1e-10);
    }

    #[test]
    fn ols_rank_deficient() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![1.0, i as f64, i as f64]).collect();
        let y: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let err = ols_fit(&Design::from_rows(["intercept", "x", "x_copy"], &rows), &y).unwrap_err();
        assert_eq!(err, StatsError::RankDeficient("x_copy".into()));
    }

    #[test]
    fn ols_shape_errors() {
        let d = Design::from_rows(["a", "b"], &[vec![1.0, 2.0]]);
        assert!(matches!(ols_fit(&d, &[1.0]), Err(StatsError::Underdetermined { .. })));
        assert!(matches!(ols_fit(&d, &[1.0, 2.0]), Err(StatsError::LengthMismatch { .. })));
    }

    #[test]
    fn ols_residuals_orthogonal() {
        let mut r = rng::stream(5, "ols-orth", 0);
        let rows: Vec<Vec<f64>> =
            (0..500).map(|_| vec![1.0, r.random::<f64>() * 10.0, r.random::<f64>()]).collect();
        let y: Vec<f64> = rows.iter().map(|x| 1.0 + 0.5 * x[1] - 2.0 * x[2] + r.random::<f64>() - 0.5).collect();
        let d = Design::from_rows(["intercept", "x1", "x2"], &rows);
        let fit = ols_fit(&d, &y).unwrap();
        let fitted = d.predict(&fit.coefficients);
        let resid: Vec<f64> = y.iter().zip(&fitted).map(|(a, b)| a - b).collect();
        let rnorm = resid.iter().map(|v| v * v).sum::<f64>().sqrt();
        for j in 0..d.cols() {
            let col: Vec<f64> = d.column(j).collect();
            let cnorm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
            let dot: f64 = col.iter().zip(&resid).map(|(a, b)| a * b).sum();
            assert!(dot.abs() <= 1e-8 * cnorm * rnorm, "column {j}: {dot}");
        }
    }

    #[test]
    fn logistic_detects_separation() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![1.0, i as f64]).collect();
        let y: Vec<f64> = (0..20).map(|i| if i < 10 { 0.0 } else { 1.0 }).collect();
        let d = Design::from_rows(["intercept", "x"], &rows);
        assert_eq!(logistic_fit(&d, &y, LogisticOptions::default()), Err(StatsError::Separation));
        let ones = vec![1.0; 20];
        assert_eq!(logistic_fit(&d, &ones, LogisticOptions::default()), Err(StatsError::Separation));
    }

    #[test]
    fn logistic_rejects_non_binary() {
        let d = Design::from_rows(["intercept"], &[vec![1.0], vec![1.0]]);
        assert_eq!(logistic_fit(&d, &[0.0, 0.5], LogisticOptions::default()), Err(StatsError::NonBinaryResponse(1)));
    }

    #[test]
    fn logistic_score_vanishes_at_optimum() {
        let mut r = rng::stream(9, "logit-score", 0);
        let rows: Vec<Vec<f64>> = (0..2000).map(|_| vec![1.0, r.random::<f64>() * 4.0 - 2.0]).collect();
        let y: Vec<f64> = rows
            .iter()
            .map(|x| if r.random::<f64>() < logistic(0.3 + 1.2 * x[1]) { 1.0 } else { 0.0 })
            .collect();
        let d = Design::from_rows(["intercept", "x"], &rows);
        let opts = LogisticOptions::default();
        let fit = logistic_fit(&d, &y, opts).unwrap();
        assert!(fit.converged);
        let eta = d.predict(&fit.coefficients);
        let resid: Vec<f64> = y.iter().zip(&eta).map(|(y, e)| y - logistic(*e)).collect();
        let score = d.xt(&resid);
        assert!(score.iter().map(|s| s * s).sum::<f64>().sqrt() <= opts.tol);
        assert!((fit.coef("x").unwrap() - 1.2).abs() < 4.0 * fit.se("x").unwrap());
    }

    #[test]
    fn constant_columns_are_dropped() {
        let d = Design::from_rows(["intercept", "x", "z"], &[vec![1.0, 1.0, 0.0], vec![1.0, 2.0, 0.0]]);
        let kept = d.without_constant_columns(&["intercept"]);
        assert_eq!(kept.names(), &["intercept".to_string(), "x".to_string()]);
        assert_eq!(kept.row(1), &[1.0, 2.0]);
    }

    #[test]
    fn fit_json_keeps_regressor_order() {
        let fit = RegressionFit {
            names: vec!["intercept".into(), "b".into(), "a".into()],
            coefficients: vec![1.0, 2.0, 3.0],
            standard_errors: vec![0.1, f64::NAN, 0.3],
            converged: true,
            iterations: 4,
            n: 10,
        };
        let json = serde_json::to_string(&fit).unwrap();
        assert_eq!(
            json,
            r#"{"coef":{"intercept":1.0,"b":2.0,"a":3.0},"se":{"intercept":0.1,"b":null,"a":0.3},"n":10,"converged":true,"iterations":4}"#
        );
        let back: RegressionFit = serde_json::from_str(&json).unwrap();
        assert_eq!(back.names, fit.names);
        assert!(back.standard_errors[1].is_nan());
    }
}
