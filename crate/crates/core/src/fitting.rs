//! Tail estimation and GB2 maximum likelihood.
//!
//! Rank-size cumulatives avoid histogram binning. The Hill estimator is a
//! cross-check for the GB2 fit, whose upper tail is Pareto with index `a q`.

use nalgebra::{Matrix4, Vector4};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::beta::{beta_reg, ln_beta};
use statrs::function::gamma::digamma;

use crate::error::{invalid, Error, Result};
use crate::stats::{compensated_sum, trigamma, NeumaierSum};

/// Minimum number of tail observations accepted by the tail estimators.
pub const DEFAULT_TAIL_FLOOR: usize = 30;
/// Default Hill tail fraction.
pub const DEFAULT_TAIL_FRACTION: f64 = 0.1;
/// Minimum sample size for GB2 fitting and fit-range selection.
pub const MIN_FIT_SAMPLE: usize = 100;

/// GB2 parameters for
/// `f(x) = a x^{ap-1} / (b^{ap} B(p,q) (1 + (x/b)^a)^{p+q})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gb2Params {
    pub a: f64,
    pub b: f64,
    pub p: f64,
    pub q: f64,
}

fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

fn logistic(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

impl Gb2Params {
    pub fn new(a: f64, b: f64, p: f64, q: f64) -> Result<Self> {
        let g = Gb2Params { a, b, p, q };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("a", self.a), ("b", self.b), ("p", self.p), ("q", self.q)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(name, format!("GB2 parameter must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Upper-tail index of the survival function.
    pub fn tail_index(&self) -> f64 {
        self.a * self.q
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let t = self.a * (x / self.b).ln();
        self.a.ln() + (self.a * self.p - 1.0) * x.ln()
            - self.a * self.p * self.b.ln()
            - ln_beta(self.p, self.q)
            - (self.p + self.q) * softplus(t)
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }

    /// `P(X > x) = I_{1/(1+z)}(q, p)` with `z = (x/b)^a`.
    pub fn survival(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 1.0;
        }
        let t = self.a * (x / self.b).ln();
        beta_reg(self.q, self.p, logistic(-t))
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let t = self.a * (x / self.b).ln();
        beta_reg(self.p, self.q, logistic(t))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitMethod {
    Hill,
    TrimmedHill,
    WeightedHill,
    Gb2Tail,
}

/// An estimated Pareto tail `P_>(c) ~ (c / c0)^{-mu}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParetoFit {
    pub mu_hat: f64,
    pub c0_hat: f64,
    pub fit_lo: f64,
    pub fit_hi: f64,
    pub stderr: f64,
    pub method: FitMethod,
    pub n_tail: usize,
}

impl ParetoFit {
    /// `|mu_1 - mu_2| <= z sqrt(se_1^2 + se_2^2)`.
    pub fn agrees_with(&self, other: &ParetoFit, z: f64) -> bool {
        (self.mu_hat - other.mu_hat).abs() <= z * self.stderr.hypot(other.stderr)
    }
}

fn check_positive(samples: &[f64]) -> Result<()> {
    if let Some((index, &value)) = samples
        .iter()
        .enumerate()
        .find(|(_, v)| !(**v > 0.0 && v.is_finite()))
    {
        return Err(Error::NonPositiveSample { index, value });
    }
    Ok(())
}

fn sorted_descending(samples: &[f64]) -> Vec<f64> {
    let mut v = samples.to_vec();
    // stable, so tied values keep their input order
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// Empirical survival function: the `i`-th largest value maps to `i/N`.
pub fn rank_size(samples: &[f64]) -> Result<Vec<(f64, f64)>> {
    if samples.is_empty() {
        return Err(Error::SampleTooSmall {
            size: 0,
            required: 1,
        });
    }
    check_positive(samples)?;
    let n = samples.len() as f64;
    Ok(sorted_descending(samples)
        .into_iter()
        .enumerate()
        .map(|(i, c)| (c, (i + 1) as f64 / n))
        .collect())
}

/// Deterministic Pareto quantiles `c0 (i/(N+1))^{-1/mu}`, `i = 1..=N`.
pub fn pareto_quantile_grid(mu: f64, c0: f64, n: usize) -> Vec<f64> {
    let m = (n + 1) as f64;
    (1..=n).map(|i| c0 * (i as f64 / m).powf(-1.0 / mu)).collect()
}

/// Hill estimator on the top `ceil(tail_fraction * N)` observations with the
/// default floor of 30.
pub fn hill_estimator(samples: &[f64], tail_fraction: f64) -> Result<ParetoFit> {
    hill_estimator_with_floor(samples, tail_fraction, DEFAULT_TAIL_FLOOR)
}

pub fn hill_estimator_with_floor(
    samples: &[f64],
    tail_fraction: f64,
    floor: usize,
) -> Result<ParetoFit> {
    if !(tail_fraction > 0.0 && tail_fraction < 1.0) {
        return Err(invalid("tail_fraction", "must lie in (0, 1)"));
    }
    check_positive(samples)?;
    let k = (tail_fraction * samples.len() as f64).ceil() as usize;
    hill_top_k(samples, k, floor)
}

/// Hill estimator on exactly the `k` largest observations.
pub fn hill_top_k(samples: &[f64], k: usize, floor: usize) -> Result<ParetoFit> {
    check_positive(samples)?;
    let n = samples.len();
    if k < floor.max(1) || k >= n {
        return Err(Error::InsufficientTail {
            available: k.min(n.saturating_sub(1)),
            floor: floor.max(1),
        });
    }
    let sorted = sorted_descending(samples);
    let threshold = sorted[k];
    let ln_t = threshold.ln();
    let sum: f64 = sorted[..k].iter().map(|c| c.ln() - ln_t).sum();
    if !(sum > 0.0) {
        return Err(Error::InvalidDistribution(
            "tail observations have no spread above the threshold".into(),
        ));
    }
    let kf = k as f64;
    let mu_hat = kf / sum;
    Ok(ParetoFit {
        mu_hat,
        c0_hat: threshold * (kf / n as f64).powf(1.0 / mu_hat),
        fit_lo: threshold,
        fit_hi: sorted[0],
        stderr: mu_hat / kf.sqrt(),
        method: FitMethod::Hill,
        n_tail: k,
    })
}

/// Hill estimator for a sample whose `trimmed` largest values were removed
/// beforehand. The tail holds `ceil(tail_fraction * (N + trimmed))` values
/// of the original sample, of which `m` remain. With `Y_1 >= Y_2 >= ...` the
/// retained values, `mu = m / T` with
/// `T = (trimmed + 1) ln(Y_1/Y_{m+1}) + sum_{i=2}^{m} ln(Y_i/Y_{m+1})`,
/// the sum of the retained normalized log-spacings; for an exact Pareto tail
/// these are i.i.d. exponential, so the trimming introduces no bias.
/// `trimmed = 0` reproduces [`hill_estimator`].
pub fn trimmed_hill_estimator(
    samples: &[f64],
    tail_fraction: f64,
    trimmed: usize,
) -> Result<ParetoFit> {
    if !(tail_fraction > 0.0 && tail_fraction < 1.0) {
        return Err(invalid("tail_fraction", "must lie in (0, 1)"));
    }
    check_positive(samples)?;
    let n = samples.len();
    let n_orig = n + trimmed;
    let k_total = (tail_fraction * n_orig as f64).ceil() as usize;
    let m = k_total.saturating_sub(trimmed);
    if m < DEFAULT_TAIL_FLOOR || m >= n {
        return Err(Error::InsufficientTail {
            available: m.min(n.saturating_sub(1)),
            floor: DEFAULT_TAIL_FLOOR,
        });
    }
    let sorted = sorted_descending(samples);
    let threshold = sorted[m];
    let ln_t = threshold.ln();
    let sum = (trimmed + 1) as f64 * (sorted[0].ln() - ln_t)
        + sorted[1..m].iter().map(|c| c.ln() - ln_t).sum::<f64>();
    if !(sum > 0.0) {
        return Err(Error::InvalidDistribution(
            "tail observations have no spread above the threshold".into(),
        ));
    }
    let mf = m as f64;
    let mu_hat = mf / sum;
    Ok(ParetoFit {
        mu_hat,
        c0_hat: threshold * (k_total as f64 / n_orig as f64).powf(1.0 / mu_hat),
        fit_lo: threshold,
        fit_hi: sorted[0],
        stderr: mu_hat / mf.sqrt(),
        method: if trimmed == 0 {
            FitMethod::Hill
        } else {
            FitMethod::TrimmedHill
        },
        n_tail: m,
    })
}

/// Hill estimator where observation `i` carries weight `w_i` (for example
/// its worker count). The tail is the top `tail_fraction` of total weight;
/// the standard error uses the Kish effective sample size of the tail.
pub fn weighted_hill_estimator(
    values: &[f64],
    weights: &[f64],
    tail_fraction: f64,
) -> Result<ParetoFit> {
    if values.len() != weights.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} values but {} weights",
            values.len(),
            weights.len()
        )));
    }
    if !(tail_fraction > 0.0 && tail_fraction < 1.0) {
        return Err(invalid("tail_fraction", "must lie in (0, 1)"));
    }
    check_positive(values)?;
    if weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
        return Err(invalid("weights", "must be positive and finite"));
    }
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&i, &j| values[j].total_cmp(&values[i]));
    let total: f64 = weights.iter().sum();
    let target = tail_fraction * total;
    let mut acc = 0.0;
    let mut k = 0;
    while k < idx.len() && acc < target {
        acc += weights[idx[k]];
        k += 1;
    }
    if k < DEFAULT_TAIL_FLOOR || k >= idx.len() {
        return Err(Error::InsufficientTail {
            available: k.min(idx.len().saturating_sub(1)),
            floor: DEFAULT_TAIL_FLOOR,
        });
    }
    let threshold = values[idx[k]];
    let ln_t = threshold.ln();
    let (mut w_sum, mut w_sq, mut w_log) = (0.0, 0.0, 0.0);
    for &i in &idx[..k] {
        let w = weights[i];
        w_sum += w;
        w_sq += w * w;
        w_log += w * (values[i].ln() - ln_t);
    }
    if !(w_log > 0.0) {
        return Err(Error::InvalidDistribution(
            "tail observations have no spread above the threshold".into(),
        ));
    }
    let mu_hat = w_sum / w_log;
    let n_eff = w_sum * w_sum / w_sq;
    Ok(ParetoFit {
        mu_hat,
        c0_hat: threshold * (w_sum / total).powf(1.0 / mu_hat),
        fit_lo: threshold,
        fit_hi: values[idx[0]],
        stderr: mu_hat / n_eff.sqrt(),
        method: FitMethod::WeightedHill,
        n_tail: k,
    })
}

/// Outcome of one optimizer start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartOutcome {
    pub initial: Gb2Params,
    pub params: Gb2Params,
    pub log_likelihood: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Log-likelihood after every accepted step.
    pub trace: Vec<f64>,
}

/// A GB2 maximum-likelihood fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gb2Fit {
    pub params: Gb2Params,
    pub log_likelihood: f64,
    pub gradient_norm: f64,
    pub winner: usize,
    pub starts: Vec<StartOutcome>,
    /// Observed-information standard errors of (a, b, p, q).
    pub stderr: Option<[f64; 4]>,
    /// Observed-information covariance of (ln a, ln b, ln p, ln q).
    #[serde(skip)]
    pub log_covariance: Option<Matrix4<f64>>,
    pub sample_size: usize,
    pub sample_max: f64,
    pub n_above_scale: usize,
}

impl Gb2Fit {
    /// The tail index `a q` with a delta-method standard error.
    pub fn tail_fit(&self) -> ParetoFit {
        let mut fit = tail_fit_from_params(&self.params, self.sample_max, self.n_above_scale);
        if let Some(cov) = &self.log_covariance {
            let var = cov[(0, 0)] + cov[(3, 3)] + 2.0 * cov[(0, 3)];
            if var >= 0.0 {
                fit.stderr = fit.mu_hat * var.sqrt();
            }
        }
        fit
    }
}

fn tail_fit_from_params(params: &Gb2Params, sample_max: f64, n_tail: usize) -> ParetoFit {
    ParetoFit {
        mu_hat: params.tail_index(),
        c0_hat: params.b,
        fit_lo: params.b,
        fit_hi: sample_max.max(params.b),
        stderr: f64::NAN,
        method: FitMethod::Gb2Tail,
        n_tail,
    }
}

/// Pareto tail implied by GB2 parameters over the range `[b, max sample]`.
pub fn pareto_index_from_gb2(params: &Gb2Params, samples: &[f64]) -> ParetoFit {
    let max = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let n_tail = samples.iter().filter(|&&x| x >= params.b).count();
    tail_fit_from_params(params, max, n_tail)
}

/// Optimizer settings for [`gb2_mle`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gb2Options {
    /// Tolerance on the max-norm gradient of the mean log-likelihood with
    /// respect to the log-parameters.
    pub gradient_tol: f64,
    pub max_iterations: usize,
}

impl Default for Gb2Options {
    fn default() -> Self {
        Gb2Options {
            gradient_tol: 1e-8,
            max_iterations: 2000,
        }
    }
}

/// Log-data summary used by the likelihood; data are divided by their
/// geometric mean so the fitted scale starts near 1.
struct Gb2Data {
    ln_y: Vec<f64>,
    sum_ln_y: f64,
    ln_scale: f64,
}

impl Gb2Data {
    /// Mean negative log-likelihood and its gradient in
    /// `theta = (ln a, ln b, ln p, ln q)` of the rescaled data.
    fn objective(&self, theta: &Vector4<f64>) -> (f64, Vector4<f64>) {
        let (a, ln_b, p, q) = (theta[0].exp(), theta[1], theta[2].exp(), theta[3].exp());
        let n = self.ln_y.len() as f64;
        let mut sums = [NeumaierSum::default(); 4];
        for &ly in &self.ln_y {
            let u = ly - ln_b;
            let t = a * u;
            let s = logistic(t);
            sums[0].add(u);
            sums[1].add(s * u);
            sums[2].add(s);
            sums[3].add(softplus(t));
        }
        let [s_u, s_su, s_s, s_sp] = sums.map(|s| s.total());
        let s_ln_y = self.sum_ln_y;
        let ll = n * a.ln() + (a * p - 1.0) * s_ln_y - a * p * n * ln_b - n * ln_beta(p, q)
            - (p + q) * s_sp;
        let d_a = n / a + p * s_u - (p + q) * s_su;
        let d_ln_b = -a * p * n + (p + q) * a * s_s;
        let psi_pq = digamma(p + q);
        let d_p = a * s_u - n * (digamma(p) - psi_pq) - s_sp;
        let d_q = -n * (digamma(q) - psi_pq) - s_sp;
        let grad = Vector4::new(a * d_a, d_ln_b, p * d_p, q * d_q);
        (-ll / n, -grad / n)
    }

    fn params(&self, theta: &Vector4<f64>) -> Gb2Params {
        Gb2Params {
            a: theta[0].exp(),
            b: (theta[1] + self.ln_scale).exp(),
            p: theta[2].exp(),
            q: theta[3].exp(),
        }
    }

    fn theta(&self, g: &Gb2Params) -> Vector4<f64> {
        Vector4::new(g.a.ln(), g.b.ln() - self.ln_scale, g.p.ln(), g.q.ln())
    }

    fn log_likelihood(&self, mean_neg: f64) -> f64 {
        // undo the rescaling: ln f_x(x) = ln f_y(y) - ln g
        -mean_neg * self.ln_y.len() as f64 - self.ln_y.len() as f64 * self.ln_scale
    }
}

/// BFGS on the mean negative log-likelihood with a backtracking line search
/// that only ever accepts non-increasing objective values.
fn bfgs(data: &Gb2Data, start: Vector4<f64>, opts: &Gb2Options) -> (Vector4<f64>, f64, f64, usize, bool, Vec<f64>) {
    let mut x = start;
    let (mut f, mut g) = data.objective(&x);
    let mut h = Matrix4::<f64>::identity();
    let mut trace = vec![data.log_likelihood(f)];
    let mut first = true;
    let mut newton_tried = false;
    let mut iterations = 0;
    if !f.is_finite() {
        return (x, f, f64::INFINITY, 0, false, trace);
    }
    while iterations < opts.max_iterations {
        if g.amax() < opts.gradient_tol {
            return (x, f, g.amax(), iterations, true, trace);
        }
        iterations += 1;
        let mut d = -(h * g);
        let mut dg = d.dot(&g);
        if !(dg < 0.0) {
            h = Matrix4::identity();
            d = -g;
            dg = d.dot(&g);
        }
        let mut step = (2.0 / d.amax()).min(1.0);
        let mut accepted = None;
        while step > 1e-10 {
            let xn = x + d * step;
            let (fn_, gn) = data.objective(&xn);
            let armijo = fn_ <= f + 1e-4 * step * dg;
            // Close to the optimum the predicted decrease drops below the
            // resolution of f; accept a step that reduces the gradient and
            // changes f by no more than rounding.
            let unresolved = (step * dg).abs() < 64.0 * f64::EPSILON * f.abs();
            let noise_floor = unresolved
                && fn_ - f <= 4.0 * f64::EPSILON * f.abs()
                && gn.amax() < g.amax();
            if fn_.is_finite() && (armijo || noise_floor) {
                accepted = Some((xn, fn_, gn));
                break;
            }
            step *= 0.5;
        }
        let Some((xn, fn_, gn)) = accepted else {
            // a stale BFGS metric stalls at the rounding floor; retry once
            // with the finite-difference Newton metric
            let newton = (!newton_tried)
                .then(|| observed_information(data, &x))
                .flatten()
                .and_then(|info| (info / data.ln_y.len() as f64).try_inverse());
            if let Some(inv) = newton {
                h = inv;
                newton_tried = true;
                continue;
            }
            let gnorm = g.amax();
            return (x, f, gnorm, iterations, gnorm < opts.gradient_tol, trace);
        };
        newton_tried = false;
        let s = xn - x;
        let y = gn - g;
        let sy = s.dot(&y);
        if sy > 1e-14 * s.norm() * y.norm() {
            if first {
                h *= sy / y.dot(&y);
                first = false;
            }
            let rho = 1.0 / sy;
            let i = Matrix4::<f64>::identity();
            h = (i - s * y.transpose() * rho) * h * (i - y * s.transpose() * rho)
                + s * s.transpose() * rho;
        }
        x = xn;
        f = fn_;
        g = gn;
        trace.push(data.log_likelihood(f));
    }
    let gnorm = g.amax();
    (x, f, gnorm, iterations, gnorm < opts.gradient_tol, trace)
}

/// Shape pairs for the deterministic multi-start; `a` and `b` are then
/// matched to the mean and variance of `ln x`.
const START_SHAPES: [(f64, f64); 8] = [
    (1.0, 1.0),
    (0.5, 0.5),
    (2.0, 2.0),
    (1.0, 0.5),
    (0.5, 1.0),
    (2.0, 1.0),
    (1.0, 2.0),
    (4.0, 4.0),
];

fn moment_matched(mean_ln: f64, var_ln: f64, p: f64, q: f64) -> Gb2Params {
    // Var[ln x] = (psi'(p) + psi'(q)) / a^2, E[ln x] = ln b + (psi(p) - psi(q)) / a
    let a = ((trigamma(p) + trigamma(q)) / var_ln).sqrt();
    let b = (mean_ln - (digamma(p) - digamma(q)) / a).exp();
    Gb2Params { a, b, p, q }
}

/// Maximum-likelihood GB2 fit with default options.
pub fn gb2_mle(samples: &[f64], init: Option<Gb2Params>) -> Result<Gb2Fit> {
    gb2_mle_with(samples, init, &Gb2Options::default())
}

/// Maximum-likelihood GB2 fit. Starts run in parallel; the highest
/// converged log-likelihood wins, ties going to the lowest start index.
/// A supplied `init` replaces the first moment-matched start.
pub fn gb2_mle_with(samples: &[f64], init: Option<Gb2Params>, opts: &Gb2Options) -> Result<Gb2Fit> {
    if samples.len() < MIN_FIT_SAMPLE {
        return Err(Error::SampleTooSmall {
            size: samples.len(),
            required: MIN_FIT_SAMPLE,
        });
    }
    check_positive(samples)?;
    if let Some(g) = &init {
        g.validate()?;
    }
    let n = samples.len() as f64;
    let raw_ln: Vec<f64> = samples.iter().map(|x| x.ln()).collect();
    let ln_scale = raw_ln.iter().sum::<f64>() / n;
    let ln_y: Vec<f64> = raw_ln.iter().map(|l| l - ln_scale).collect();
    let var_ln = ln_y.iter().map(|l| l * l).sum::<f64>() / n;
    if !(var_ln > 1e-24) {
        return Err(Error::Gb2NotConverged {
            diagnostics: "degenerate sample: zero variance of ln x, likelihood unbounded".into(),
            best: None,
            best_log_likelihood: f64::NAN,
        });
    }
    let sum_ln_y = compensated_sum(ln_y.iter().copied());
    let data = Gb2Data {
        ln_y,
        sum_ln_y,
        ln_scale,
    };

    let mut inits: Vec<Gb2Params> = START_SHAPES
        .iter()
        .map(|&(p, q)| {
            let mut g = moment_matched(ln_scale, var_ln, p, q);
            g.b = g.b.max(f64::MIN_POSITIVE);
            g
        })
        .collect();
    if let Some(g) = init {
        inits[0] = g;
    }

    let starts: Vec<StartOutcome> = inits
        .par_iter()
        .map(|g0| {
            let (theta, _f, gnorm, iterations, converged, trace) =
                bfgs(&data, data.theta(g0), opts);
            StartOutcome {
                initial: *g0,
                params: data.params(&theta),
                log_likelihood: *trace.last().expect("trace starts non-empty"),
                gradient_norm: gnorm,
                iterations,
                converged,
                trace,
            }
        })
        .collect();

    let pick = |only_converged: bool| {
        let mut best: Option<usize> = None;
        for (i, s) in starts.iter().enumerate() {
            if (only_converged && !s.converged) || !s.log_likelihood.is_finite() {
                continue;
            }
            if best.is_none_or(|b| s.log_likelihood > starts[b].log_likelihood) {
                best = Some(i);
            }
        }
        best
    };
    let Some(winner) = pick(true) else {
        let best = pick(false);
        let diagnostics = starts
            .iter()
            .enumerate()
            .map(|(i, s)| {
                format!(
                    "start {i}: ll={:.6} |g|={:.2e} iters={}",
                    s.log_likelihood, s.gradient_norm, s.iterations
                )
            })
            .collect::<Vec<_>>()
            .join("; ");
        return Err(Error::Gb2NotConverged {
            diagnostics,
            best: best.map(|b| starts[b].params),
            best_log_likelihood: best.map_or(f64::NAN, |b| starts[b].log_likelihood),
        });
    };

    let params = starts[winner].params;
    let log_covariance = observed_information(&data, &data.theta(&params))
        .and_then(|info| info.try_inverse());
    let stderr = log_covariance.as_ref().and_then(|cov| {
        let vals = [params.a, params.b, params.p, params.q];
        let mut se = [0.0; 4];
        for i in 0..4 {
            if !(cov[(i, i)] >= 0.0) {
                return None;
            }
            se[i] = vals[i] * cov[(i, i)].sqrt();
        }
        Some(se)
    });
    let sample_max = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(Gb2Fit {
        params,
        log_likelihood: starts[winner].log_likelihood,
        gradient_norm: starts[winner].gradient_norm,
        winner,
        stderr,
        log_covariance,
        sample_size: samples.len(),
        sample_max,
        n_above_scale: samples.iter().filter(|&&x| x >= params.b).count(),
        starts,
    })
}

/// Observed information of the total log-likelihood in log-parameters, by
/// central differences of the analytic gradient.
fn observed_information(data: &Gb2Data, theta: &Vector4<f64>) -> Option<Matrix4<f64>> {
    let n = data.ln_y.len() as f64;
    let h = 1e-5;
    let mut m = Matrix4::zeros();
    for j in 0..4 {
        let mut up = *theta;
        let mut dn = *theta;
        up[j] += h;
        dn[j] -= h;
        let gu = data.objective(&up).1;
        let gd = data.objective(&dn).1;
        let col = (gu - gd) * (n / (2.0 * h));
        m.set_column(j, &col);
    }
    let sym = (m + m.transpose()) * 0.5;
    sym.iter().all(|v| v.is_finite()).then_some(sym)
}

/// A fitted tail window chosen by Kolmogorov-Smirnov distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitRange {
    pub fit_lo: f64,
    pub fit_hi: f64,
    pub n_tail: usize,
    pub mu_hat: f64,
    pub ks_distance: f64,
}

/// Scans candidate lower cutoffs (the `k`-th largest value, `k` on a
/// log-spaced grid from the floor to `N`) and keeps the one whose tail is
/// closest in KS distance to its own maximum-likelihood Pareto fit.
pub fn select_fit_range(samples: &[f64]) -> Result<FitRange> {
    if samples.len() < MIN_FIT_SAMPLE {
        return Err(Error::SampleTooSmall {
            size: samples.len(),
            required: MIN_FIT_SAMPLE,
        });
    }
    check_positive(samples)?;
    let sorted = sorted_descending(samples);
    let n = sorted.len();
    let floor = DEFAULT_TAIL_FLOOR;
    let mut candidates: Vec<usize> = (0..=200)
        .map(|i| {
            let r = (n as f64 / floor as f64).powf(i as f64 / 200.0);
            ((floor as f64 * r).round() as usize).clamp(floor, n)
        })
        .collect();
    candidates.dedup();

    // prefix sums of ln c over the descending sample
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    for c in &sorted {
        let last = *prefix.last().unwrap();
        prefix.push(last + c.ln());
    }

    let mut best: Option<FitRange> = None;
    for k in candidates {
        let x_min = sorted[k - 1];
        let ln_min = x_min.ln();
        let sum = prefix[k] - k as f64 * ln_min;
        if !(sum > 0.0) {
            continue;
        }
        let mu = k as f64 / sum;
        let kf = k as f64;
        let mut d = 0.0f64;
        for (i, &c) in sorted[..k].iter().enumerate() {
            let model = (-(mu) * (c.ln() - ln_min)).exp();
            let hi = (i + 1) as f64 / kf;
            let lo = i as f64 / kf;
            d = d.max((hi - model).abs()).max((lo - model).abs());
        }
        if best.is_none_or(|b| d < b.ks_distance) {
            best = Some(FitRange {
                fit_lo: x_min,
                fit_hi: sorted[0],
                n_tail: k,
                mu_hat: mu,
                ks_distance: d,
            });
        }
    }
    best.ok_or(Error::InsufficientTail {
        available: 0,
        floor,
    })
}
