//! Negative binomial (NB2, log link) regression of h-index on bibliometric and
//! mentorship covariates, fitted by iteratively reweighted least squares.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::UNKNOWN_FIELD;
use crate::math::{self, KahanSum};
use crate::stats::percentile_sorted;
use crate::{Error, Result};

pub const DEFAULT_ALPHA: f64 = 1.0;
pub const OUTLIER_QUANTILE: f64 = 0.99;
pub const MAX_ITERATIONS: u32 = 100;
pub const TOLERANCE: f64 = 1e-8;
const Z_95: f64 = 1.96;
/// Extra IRLS steps taken after the tolerance is met.
const POLISH_STEPS: u32 = 3;
/// Relative pivot below which a column counts as linearly dependent.
const RANK_TOL: f64 = 1e-10;

/// One author's row before encoding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuthorCovariates {
    pub author_id: String,
    pub h_index: Option<u64>,
    pub field_of_study: String,
    pub paper_count: f64,
    pub citation_count: f64,
    pub menteeship_sum: f64,
    pub menteeship_mean: f64,
    pub mentorship_sum: f64,
    pub mentorship_mean: f64,
}

/// Binned covariates in column order.
pub const BINNED_COVARIATES: [&str; 6] = [
    "paper_count",
    "citation_count",
    "menteeship_sum",
    "menteeship_mean",
    "mentorship_sum",
    "mentorship_mean",
];

/// Covariates subject to outlier removal.
pub const OUTLIER_COVARIATES: [&str; 4] = ["paper_count", "citation_count", "menteeship_sum", "mentorship_sum"];

impl AuthorCovariates {
    pub fn covariate(&self, name: &str) -> f64 {
        match name {
            "paper_count" => self.paper_count,
            "citation_count" => self.citation_count,
            "menteeship_sum" => self.menteeship_sum,
            "menteeship_mean" => self.menteeship_mean,
            "mentorship_sum" => self.mentorship_sum,
            "mentorship_mean" => self.mentorship_mean,
            _ => panic!("unknown covariate {name}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OutlierReport {
    pub input_rows: usize,
    /// `(covariate, cutoff, rows above cutoff)`; a row can count under several covariates.
    pub per_covariate: Vec<(String, f64, usize)>,
    pub dropped: usize,
}

/// Drops rows whose value exceeds the 99th percentile of any outlier covariate.
/// Cutoffs come from the whole input; a value equal to its cutoff survives.
pub fn remove_outliers(rows: Vec<AuthorCovariates>) -> Result<(Vec<AuthorCovariates>, OutlierReport)> {
    if rows.is_empty() {
        return Err(Error::EmptyInput("outlier removal"));
    }
    let mut report = OutlierReport {
        input_rows: rows.len(),
        ..Default::default()
    };
    let mut cutoffs = Vec::with_capacity(OUTLIER_COVARIATES.len());
    for name in OUTLIER_COVARIATES {
        let mut v: Vec<f64> = rows.iter().map(|r| r.covariate(name)).collect();
        v.sort_by(f64::total_cmp);
        let cut = percentile_sorted(&v, OUTLIER_QUANTILE)?;
        let above = rows.iter().filter(|r| r.covariate(name) > cut).count();
        report.per_covariate.push((name.to_string(), cut, above));
        cutoffs.push(cut);
    }
    let kept: Vec<AuthorCovariates> = rows
        .into_iter()
        .filter(|r| OUTLIER_COVARIATES.iter().zip(&cutoffs).all(|(n, &c)| r.covariate(n) <= c))
        .collect();
    report.dropped = report.input_rows - kept.len();
    if kept.is_empty() {
        return Err(Error::NoRowsLeft("outlier removal"));
    }
    Ok((kept, report))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuintileBinner {
    /// 20th, 40th, 60th and 80th percentiles.
    pub cuts: [f64; 4],
}

impl QuintileBinner {
    pub fn fit(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput("quintile binning"));
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let mut cuts = [0.0; 4];
        for (i, c) in cuts.iter_mut().enumerate() {
            *c = percentile_sorted(&v, (i + 1) as f64 / 5.0)?;
        }
        Ok(Self { cuts })
    }

    /// Bin in `1..=5`: the first `b` with `v <= cut_b`, else 5.
    pub fn bin(&self, v: f64) -> u8 {
        self.cuts.iter().position(|&c| v <= c).map_or(5, |i| i as u8 + 1)
    }
}

pub fn quintile_bin(values: &[f64]) -> Result<(QuintileBinner, Vec<u8>)> {
    let binner = QuintileBinner::fit(values)?;
    Ok((binner, values.iter().map(|&v| binner.bin(v)).collect()))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DesignReport {
    pub input_rows: usize,
    pub missing_h_index: usize,
    pub outliers: OutlierReport,
    /// Columns that were all zero or a linear combination of earlier columns.
    pub dropped_columns: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlmDesign {
    pub columns: Vec<String>,
    /// Row-major.
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    pub author_ids: Vec<String>,
    pub reference_field: String,
    pub binners: Vec<(String, QuintileBinner)>,
    pub report: DesignReport,
}

impl GlmDesign {
    /// A design from raw columns, for fitting arbitrary data.
    pub fn from_parts(columns: Vec<String>, x: Vec<Vec<f64>>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::InvalidParameter {
                name: "y",
                reason: format!("{} responses for {} rows", y.len(), x.len()),
            });
        }
        if let Some(r) = x.iter().find(|r| r.len() != columns.len()) {
            return Err(Error::SchemaMismatch {
                expected: columns.len(),
                found: r.len(),
            });
        }
        Ok(Self {
            author_ids: (0..x.len()).map(|i| i.to_string()).collect(),
            columns,
            x,
            y,
            reference_field: String::new(),
            binners: Vec::new(),
            report: DesignReport::default(),
        })
    }

    pub fn n_rows(&self) -> usize {
        self.x.len()
    }
}

/// Skips rows without an h-index, removes outliers, bins the covariates into
/// quintiles on the surviving rows and one-hot encodes field of study.
///
/// The field reference is `unknown` when present, otherwise the alphabetically
/// first label. Quintile 1 is the reference of every binned covariate.
pub fn build_design(rows: Vec<AuthorCovariates>) -> Result<GlmDesign> {
    let input_rows = rows.len();
    let rows: Vec<AuthorCovariates> = rows.into_iter().filter(|r| r.h_index.is_some()).collect();
    let missing_h_index = input_rows - rows.len();
    if rows.is_empty() {
        return Err(Error::NoRowsLeft("dropping rows without an h-index"));
    }
    let (rows, outliers) = remove_outliers(rows)?;

    let fields: BTreeSet<&str> = rows.iter().map(|r| r.field_of_study.as_str()).collect();
    let reference = if fields.contains(UNKNOWN_FIELD) {
        UNKNOWN_FIELD
    } else {
        fields.iter().next().copied().expect("rows are nonempty")
    };
    let fos: Vec<&str> = fields.iter().copied().filter(|f| *f != reference).collect();

    let mut columns = vec!["intercept".to_string()];
    columns.extend(fos.iter().map(|f| format!("fos_{f}")));
    let mut binners = Vec::with_capacity(BINNED_COVARIATES.len());
    for name in BINNED_COVARIATES {
        let values: Vec<f64> = rows.iter().map(|r| r.covariate(name)).collect();
        binners.push((name.to_string(), QuintileBinner::fit(&values)?));
        columns.extend((2..=5).map(|q| format!("{name}_q{q}")));
    }

    let mut x = Vec::with_capacity(rows.len());
    for r in &rows {
        let mut row = vec![0.0; columns.len()];
        row[0] = 1.0;
        if let Some(i) = fos.iter().position(|f| *f == r.field_of_study) {
            row[1 + i] = 1.0;
        }
        for (j, (name, b)) in binners.iter().enumerate() {
            let q = b.bin(r.covariate(name)) as usize;
            if q >= 2 {
                row[1 + fos.len() + 4 * j + (q - 2)] = 1.0;
            }
        }
        x.push(row);
    }

    // Greedy left-to-right: a column is kept unless it is a linear combination
    // of kept columns before it (all-zero columns included).
    let p = columns.len();
    let mut gram = vec![vec![0.0; p]; p];
    for row in &x {
        for j in 0..p {
            if row[j] == 0.0 {
                continue;
            }
            for k in 0..=j {
                gram[j][k] += row[j] * row[k];
            }
        }
    }
    for j in 0..p {
        for k in 0..j {
            gram[k][j] = gram[j][k];
        }
    }
    let dependent = cholesky(&gram).err().unwrap_or_default();
    let keep: Vec<usize> = (0..p).filter(|j| !dependent.contains(j)).collect();
    let dropped_columns: Vec<String> = dependent.iter().map(|&j| columns[j].clone()).collect();
    if !dropped_columns.is_empty() {
        columns = keep.iter().map(|&j| columns[j].clone()).collect();
        for row in &mut x {
            *row = keep.iter().map(|&j| row[j]).collect();
        }
    }

    Ok(GlmDesign {
        columns,
        x,
        y: rows.iter().map(|r| r.h_index.unwrap_or(0) as f64).collect(),
        author_ids: rows.iter().map(|r| r.author_id.clone()).collect(),
        reference_field: reference.to_string(),
        binners,
        report: DesignReport {
            input_rows,
            missing_h_index,
            outliers,
            dropped_columns,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub name: String,
    pub coef: f64,
    pub std_err: f64,
    pub z: f64,
    pub p_value: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlmResult {
    pub coefficients: Vec<Coefficient>,
    pub alpha: f64,
    pub converged: bool,
    pub iterations: u32,
    pub log_likelihood: f64,
    pub n_obs: usize,
}

impl GlmResult {
    pub fn coef(&self, name: &str) -> Option<&Coefficient> {
        self.coefficients.iter().find(|c| c.name == name)
    }

    pub fn beta(&self) -> Vec<f64> {
        self.coefficients.iter().map(|c| c.coef).collect()
    }
}

/// Multiplicative effect of a coefficient on the expected response.
pub fn interpret_multiplicative(coef: f64) -> f64 {
    math::exp(coef)
}

fn linear_predictor(row: &[f64], beta: &[f64]) -> f64 {
    row.iter().zip(beta).map(|(a, b)| a * b).sum()
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "alpha",
            reason: format!("must be > 0, got {alpha}"),
        })
    }
}

/// NB2 log-likelihood at `beta`.
pub fn log_likelihood(design: &GlmDesign, beta: &[f64], alpha: f64) -> f64 {
    let inv = 1.0 / alpha;
    let lg_inv = math::ln_gamma(inv);
    let mut acc = KahanSum::default();
    for (row, &y) in design.x.iter().zip(&design.y) {
        let eta = linear_predictor(row, beta);
        let mu = math::exp(eta);
        let log1p_amu = math::ln_1p(alpha * mu);
        acc.add(math::ln_gamma(y + inv) - lg_inv - math::ln_gamma(y + 1.0));
        // y * ln(alpha * mu / (1 + alpha * mu)) - ln(1 + alpha * mu) / alpha
        acc.add(y * (math::ln(alpha) + eta - log1p_amu) - inv * log1p_amu);
    }
    acc.value()
}

/// Gradient of [`log_likelihood`] with respect to `beta`.
pub fn gradient(design: &GlmDesign, beta: &[f64], alpha: f64) -> Vec<f64> {
    let mut acc = vec![KahanSum::default(); beta.len()];
    for (row, &y) in design.x.iter().zip(&design.y) {
        let mu = math::exp(linear_predictor(row, beta));
        let r = (y - mu) / (1.0 + alpha * mu);
        for (a, &xj) in acc.iter_mut().zip(row) {
            a.add(r * xj);
        }
    }
    acc.iter().map(KahanSum::value).collect()
}

/// Lower-triangular Cholesky factor of a symmetric matrix, or the indices of
/// columns that are linear combinations of earlier ones.
fn cholesky(a: &[Vec<f64>]) -> core::result::Result<Vec<Vec<f64>>, Vec<usize>> {
    let p = a.len();
    let mut l = vec![vec![0.0; p]; p];
    let mut dependent = Vec::new();
    for j in 0..p {
        let d = a[j][j] - (0..j).map(|k| l[j][k] * l[j][k]).sum::<f64>();
        if !(d > RANK_TOL * a[j][j].abs().max(f64::MIN_POSITIVE)) {
            dependent.push(j);
            continue;
        }
        let djj = math::sqrt(d);
        l[j][j] = djj;
        for i in j + 1..p {
            let s = a[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
            l[i][j] = s / djj;
        }
    }
    if dependent.is_empty() {
        Ok(l)
    } else {
        Err(dependent)
    }
}

fn cholesky_solve(l: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let p = l.len();
    let mut z = vec![0.0; p];
    for i in 0..p {
        let s = b[i] - (0..i).map(|k| l[i][k] * z[k]).sum::<f64>();
        z[i] = s / l[i][i];
    }
    let mut x = vec![0.0; p];
    for i in (0..p).rev() {
        let s = z[i] - (i + 1..p).map(|k| l[k][i] * x[k]).sum::<f64>();
        x[i] = s / l[i][i];
    }
    x
}

/// `X^T W X` and `X^T W z` in one pass.
fn normal_equations(design: &GlmDesign, w: &[f64], z: &[f64]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let p = design.columns.len();
    let mut a = vec![vec![0.0; p]; p];
    let mut b = vec![0.0; p];
    for ((row, &wi), &zi) in design.x.iter().zip(w).zip(z) {
        for j in 0..p {
            let wx = wi * row[j];
            if wx == 0.0 {
                continue;
            }
            b[j] += wx * zi;
            for k in 0..=j {
                a[j][k] += wx * row[k];
            }
        }
    }
    for j in 0..p {
        for k in 0..j {
            a[k][j] = a[j][k];
        }
    }
    (a, b)
}

fn factor(design: &GlmDesign, a: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    cholesky(a).map_err(|dep| Error::RankDeficient {
        columns: dep.into_iter().map(|j| design.columns[j].clone()).collect(),
    })
}

/// Fits the NB2 model with dispersion `alpha` held fixed.
pub fn fit_negbin_glm(design: &GlmDesign, alpha: f64) -> Result<GlmResult> {
    check_alpha(alpha)?;
    let n = design.n_rows();
    let p = design.columns.len();
    if n == 0 || p == 0 {
        return Err(Error::EmptyInput("glm design"));
    }
    if let Some(&y) = design.y.iter().find(|&&y| !(y >= 0.0 && y.is_finite() && y == math::round(y))) {
        return Err(Error::InvalidParameter {
            name: "response",
            reason: format!("counts must be nonnegative integers, got {y}"),
        });
    }
    let ybar = design.y.iter().sum::<f64>() / n as f64;
    // start from mu halfway between each response and the mean
    let mut mu: Vec<f64> = design.y.iter().map(|&y| (y + ybar) / 2.0).map(|m| m.max(1e-3)).collect();
    let mut eta: Vec<f64> = mu.iter().map(|&m| math::ln(m)).collect();
    let mut beta: Option<Vec<f64>> = None;
    let mut converged = false;
    let mut iterations = 0;
    let mut polish = 0;
    let mut w = vec![0.0; n];
    let mut z = vec![0.0; n];
    while iterations < MAX_ITERATIONS + POLISH_STEPS {
        for i in 0..n {
            w[i] = mu[i] / (1.0 + alpha * mu[i]);
            z[i] = eta[i] + (design.y[i] - mu[i]) / mu[i];
        }
        let (a, b) = normal_equations(design, &w, &z);
        let l = factor(design, &a)?;
        let next = cholesky_solve(&l, &b);
        iterations += 1;
        let step = beta
            .as_ref()
            .map_or(f64::INFINITY, |old| old.iter().zip(&next).map(|(o, v)| (o - v).abs()).fold(0.0, f64::max));
        for (i, row) in design.x.iter().enumerate() {
            eta[i] = linear_predictor(row, &next);
            mu[i] = math::exp(eta[i]);
        }
        beta = Some(next);
        if !step.is_finite() && iterations > 1 {
            break;
        }
        if converged {
            polish += 1;
            if polish >= POLISH_STEPS || step == 0.0 {
                break;
            }
        } else if step < TOLERANCE {
            converged = true;
            if POLISH_STEPS == 0 {
                break;
            }
        } else if iterations >= MAX_ITERATIONS {
            break;
        }
    }
    let beta = beta.expect("at least one iteration ran");
    if beta.iter().any(|b| !b.is_finite()) {
        converged = false;
    }

    for i in 0..n {
        w[i] = mu[i] / (1.0 + alpha * mu[i]);
    }
    let (info, _) = normal_equations(design, &w, &z);
    let l = factor(design, &info)?;
    let mut coefficients = Vec::with_capacity(p);
    for (j, name) in design.columns.iter().enumerate() {
        let mut e = vec![0.0; p];
        e[j] = 1.0;
        let var = cholesky_solve(&l, &e)[j];
        let se = math::sqrt(var);
        let coef = beta[j];
        let zstat = coef / se;
        coefficients.push(Coefficient {
            name: name.clone(),
            coef,
            std_err: se,
            z: zstat,
            p_value: math::two_sided_normal_p(zstat),
            ci_lo: coef - Z_95 * se,
            ci_hi: coef + Z_95 * se,
        });
    }
    Ok(GlmResult {
        log_likelihood: log_likelihood(design, &beta, alpha),
        coefficients,
        alpha,
        converged,
        iterations,
        n_obs: n,
    })
}
