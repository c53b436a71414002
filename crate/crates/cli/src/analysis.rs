//! Per-year tail fits and the demand exponent implied by them.

use prodisp::fitting::{
    gb2_mle, hill_estimator, trimmed_hill_estimator, weighted_hill_estimator, Gb2Params, ParetoFit,
};
use prodisp::superstats::delta_of;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::panel::{worker_weighted_sample, FirmRecord};

/// `delta` from a firm/worker index pair, with a delta-method band that
/// treats the two fits as independent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaEstimate {
    pub delta: f64,
    pub stderr: f64,
}

pub fn delta_estimate(firm: &ParetoFit, worker: &ParetoFit) -> Result<DeltaEstimate> {
    let (mf, mw) = (firm.mu_hat, worker.mu_hat);
    let delta = delta_of(mf, mw)?;
    // d delta / d mu_W and d delta / d mu_F on the active branch
    let (dw, df) = if mf >= 2.0 {
        (-1.0, 1.0)
    } else {
        (-1.0 / (mf - 1.0), (mw - 1.0) / (mf - 1.0).powi(2))
    };
    let stderr = (dw * worker.stderr).hypot(df * firm.stderr);
    Ok(DeltaEstimate { delta, stderr })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gb2Summary {
    pub params: Gb2Params,
    pub log_likelihood: f64,
    pub tail: ParetoFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YearFits {
    pub year: i32,
    pub firms: usize,
    pub workers: u64,
    pub firm: ParetoFit,
    pub worker: ParetoFit,
    pub delta: Option<DeltaEstimate>,
    pub gb2: Option<Gb2Summary>,
    pub gb2_error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitSettings {
    pub tail_fraction: f64,
    pub gb2: bool,
    /// Weighted Hill on firms; otherwise Hill on one record per worker.
    pub worker_weighting: bool,
    /// Firms removed from the top of each year before fitting; the
    /// firm-level fit corrects for them. At the worker level the removed
    /// firms carry negligible weight and no correction is applied.
    pub trimmed: usize,
}

/// Worker-level Hill fit of a year's records.
pub fn worker_fit(records: &[FirmRecord], settings: &FitSettings) -> Result<ParetoFit> {
    let sample = worker_weighted_sample(records);
    if settings.worker_weighting {
        Ok(weighted_hill_estimator(
            &sample.values,
            &sample.weights,
            settings.tail_fraction,
        )?)
    } else {
        let expanded: Vec<f64> = records
            .iter()
            .flat_map(|r| std::iter::repeat_n(r.productivity, r.workers as usize))
            .collect();
        Ok(hill_estimator(&expanded, settings.tail_fraction)?)
    }
}

pub fn analyze_year(year: i32, records: &[FirmRecord], settings: &FitSettings) -> Result<YearFits> {
    let c: Vec<f64> = records.iter().map(|r| r.productivity).collect();
    let firm = trimmed_hill_estimator(&c, settings.tail_fraction, settings.trimmed)?;
    let worker = worker_fit(records, settings)?;
    // delta is undefined when the estimated indices are not ordered
    let delta = delta_estimate(&firm, &worker).ok();
    let (gb2, gb2_error) = if settings.gb2 {
        match gb2_mle(&c, None) {
            Ok(fit) => (
                Some(Gb2Summary {
                    params: fit.params,
                    log_likelihood: fit.log_likelihood,
                    tail: fit.tail_fit(),
                }),
                None,
            ),
            Err(e) => (None, Some(e.to_string())),
        }
    } else {
        (None, None)
    };
    Ok(YearFits {
        year,
        firms: records.len(),
        workers: records.iter().map(|r| r.workers).sum(),
        firm,
        worker,
        delta,
        gb2,
        gb2_error,
    })
}
