//! (d, ε) sweeps: one build per cell, a versioned CSV and log-log fits.

use std::io::Write;

use kolmonet::constructor::{build_approximator, BuildReport, Mode, TheoryExponents};
use kolmonet::rng::derive_seed;
use kolmonet::PayoffFamily;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::config::Config;
use crate::setup::{self, CliError, CliResult};

pub const SCHEMA: &str = "kolmonet-sweep-v1";

/// Column names after the leading schema/row-index column.
pub const COLUMNS: [&str; 12] = [
    "d",
    "epsilon",
    "payoff_family",
    "n_used",
    "param_count",
    "nonzero_param_count",
    "measured_lp_error",
    "error_stderr",
    "attempts",
    "success",
    "wall_time_seconds",
    "seed",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub index: usize,
    pub d: usize,
    pub epsilon: f64,
    pub family: PayoffFamily,
    pub n_used: usize,
    pub param_count: usize,
    pub nonzero_param_count: usize,
    pub payoff_param_count: usize,
    pub measured_lp_error: Option<f64>,
    pub error_stderr: Option<f64>,
    pub attempts: usize,
    pub success: bool,
    pub wall_time_seconds: f64,
    pub seed: u64,
}

impl SweepRecord {
    pub fn from_report(index: usize, d: usize, epsilon: f64, family: PayoffFamily, report: &BuildReport) -> Self {
        SweepRecord {
            index,
            d,
            epsilon,
            family,
            n_used: report.n_used,
            param_count: report.param_count,
            nonzero_param_count: report.nonzero_param_count,
            payoff_param_count: report.payoff_param_count,
            measured_lp_error: report.error.map(|e| e.estimate),
            error_stderr: report.error.map(|e| e.stderr),
            attempts: report.attempts,
            success: report.succeeded(),
            wall_time_seconds: report.wall_time_seconds,
            seed: report.seed,
        }
    }

    fn fields(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        vec![
            self.index.to_string(),
            self.d.to_string(),
            self.epsilon.to_string(),
            self.family.to_string(),
            self.n_used.to_string(),
            self.param_count.to_string(),
            self.nonzero_param_count.to_string(),
            opt(self.measured_lp_error),
            opt(self.error_stderr),
            self.attempts.to_string(),
            self.success.to_string(),
            format!("{:.3}", self.wall_time_seconds),
            self.seed.to_string(),
        ]
    }
}

/// Header `kolmonet-sweep-v1,d,...`; each row starts with its cell index.
pub fn write_csv<W: Write>(records: &[SweepRecord], sink: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(std::iter::once(SCHEMA).chain(COLUMNS))?;
    for r in records {
        w.write_record(r.fields())?;
    }
    w.flush()?;
    Ok(())
}

/// Seed of one cell, independent of how cells are scheduled.
pub fn cell_seed(seed: u64, d: usize, epsilon: f64, family: PayoffFamily) -> u64 {
    let fam = PayoffFamily::ALL.iter().position(|f| *f == family).unwrap_or(0) as u64;
    derive_seed(seed, &[d as u64, epsilon.to_bits(), fam])
}

/// Builds every (d, ε) cell, d-major, in parallel; rows come back in cell order.
pub fn run(config: &Config) -> CliResult<(PayoffFamily, Vec<SweepRecord>)> {
    let seed: u64 = config.require("seed")?;
    let family = setup::family(config)?;
    let d_list = match config.list::<usize>("d_list")? {
        Some(v) => v,
        None => vec![setup::dimension(config)?],
    };
    let eps_list = match config.list::<f64>("eps_list")? {
        Some(v) => v,
        None => vec![config.require::<f64>("epsilon")?],
    };
    if d_list.is_empty() || eps_list.is_empty() {
        return Err(CliError::Usage("sweep needs at least one d and one epsilon".into()));
    }
    let cells: Vec<(usize, f64)> = d_list.iter().flat_map(|d| eps_list.iter().map(move |e| (*d, *e))).collect();
    let specs = cells
        .iter()
        .map(|&(d, e)| setup::spec(config, family, d, e))
        .collect::<CliResult<Vec<_>>>()?;
    if specs.iter().any(|s| s.mode != Mode::Empirical) {
        return Err(config.invalid("mode", "sweeps run in empirical mode").into());
    }
    let records = cells
        .par_iter()
        .zip(specs.par_iter())
        .enumerate()
        .map(|(i, (&(d, e), spec))| {
            let report = build_approximator(spec, cell_seed(seed, d, e, family))?.report;
            Ok(SweepRecord::from_report(i, d, e, family, &report))
        })
        .collect::<Result<Vec<_>, kolmonet::Error>>()?;
    Ok((family, records))
}

/// Fitted exponent with a 95% confidence interval (NaN bounds when there
/// are no residual degrees of freedom).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisFit {
    pub exponent: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingFit {
    pub quantity: &'static str,
    pub points: usize,
    pub d: Option<AxisFit>,
    pub eps: Option<AxisFit>,
    pub predicted_d: Option<f64>,
    pub predicted_eps: Option<f64>,
}

fn distinct(values: impl Iterator<Item = f64>) -> usize {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v.len()
}

/// Least squares `log y = a + b_d log d + b_e log(1/ε)` over successful
/// cells; an axis enters only with at least 3 distinct values.
pub fn fit(records: &[SweepRecord], quantity: &'static str, value: impl Fn(&SweepRecord) -> f64) -> Option<ScalingFit> {
    let ok: Vec<&SweepRecord> = records.iter().filter(|r| r.success && value(r) > 0.0).collect();
    let use_d = distinct(ok.iter().map(|r| r.d as f64)) >= 3;
    let use_e = distinct(ok.iter().map(|r| r.epsilon)) >= 3;
    if !use_d && !use_e {
        return None;
    }
    let mut cols: Vec<Vec<f64>> = Vec::new();
    if use_d {
        cols.push(ok.iter().map(|r| (r.d as f64).ln()).collect());
    }
    if use_e {
        cols.push(ok.iter().map(|r| (1.0 / r.epsilon).ln()).collect());
    }
    let y: Vec<f64> = ok.iter().map(|r| value(r).ln()).collect();
    let (coef, se, dof) = ols(&cols, &y)?;
    let t = if dof > 0 {
        StudentsT::new(0.0, 1.0, dof as f64).map(|s| s.inverse_cdf(0.975)).unwrap_or(f64::NAN)
    } else {
        f64::NAN
    };
    let axis = |k: usize| AxisFit { exponent: coef[k], ci_low: coef[k] - t * se[k], ci_high: coef[k] + t * se[k] };
    Some(ScalingFit {
        quantity,
        points: ok.len(),
        d: use_d.then(|| axis(0)),
        eps: use_e.then(|| axis(usize::from(use_d))),
        predicted_d: None,
        predicted_eps: None,
    })
}

/// Slopes, their standard errors and residual degrees of freedom for one or
/// two centered regressors.
fn ols(cols: &[Vec<f64>], y: &[f64]) -> Option<(Vec<f64>, Vec<f64>, usize)> {
    let m = y.len();
    let k = cols.len();
    if m <= k {
        return None;
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let yc: Vec<f64> = y.iter().map(|v| v - mean(y)).collect();
    let xc: Vec<Vec<f64>> = cols.iter().map(|c| c.iter().map(|v| v - mean(c)).collect()).collect();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
    let (coef, inv_diag) = match k {
        1 => {
            let sxx = dot(&xc[0], &xc[0]);
            if sxx == 0.0 {
                return None;
            }
            (vec![dot(&xc[0], &yc) / sxx], vec![1.0 / sxx])
        }
        2 => {
            let (a, b, c) = (dot(&xc[0], &xc[0]), dot(&xc[0], &xc[1]), dot(&xc[1], &xc[1]));
            let det = a * c - b * b;
            if det.abs() <= 1e-12 * a * c {
                return None;
            }
            let (r0, r1) = (dot(&xc[0], &yc), dot(&xc[1], &yc));
            (vec![(c * r0 - b * r1) / det, (a * r1 - b * r0) / det], vec![c / det, a / det])
        }
        _ => return None,
    };
    let rss: f64 = (0..m)
        .map(|i| {
            let fit: f64 = (0..k).map(|j| coef[j] * xc[j][i]).sum();
            (yc[i] - fit).powi(2)
        })
        .sum();
    let dof = m - k - 1;
    let sigma2 = if dof > 0 { rss / dof as f64 } else { f64::NAN };
    Some((coef, inv_diag.iter().map(|v| (sigma2 * v).sqrt()).collect(), dof))
}

/// Fits for the parameter count and for `n`, with the theory exponents:
/// `(5 + 𝐳)θ + z` in d (θ = 1/2) and `4 + 𝐳` in 1/ε for the count, 2 in 1/ε for `n`.
pub fn scaling_fits(family: PayoffFamily, records: &[SweepRecord]) -> Vec<ScalingFit> {
    let exps = TheoryExponents::for_family(family, 0.5);
    let mut out = Vec::new();
    if let Some(mut f) = fit(records, "param_count", |r| r.param_count as f64) {
        f.predicted_d = Some(exps.d_exponent());
        f.predicted_eps = Some(exps.eps_exponent());
        out.push(f);
    }
    if let Some(mut f) = fit(records, "n_used", |r| r.n_used as f64) {
        f.predicted_eps = Some(2.0);
        out.push(f);
    }
    out
}

fn describe(axis: &str, fit: Option<AxisFit>, predicted: Option<f64>, relation: &str) -> Option<String> {
    let f = fit?;
    let ci = if f.ci_low.is_nan() {
        "[n/a]".to_string()
    } else {
        format!("[{:.3}, {:.3}]", f.ci_low, f.ci_high)
    };
    let pred = predicted.map_or(String::new(), |p| format!(" ({relation} {p})"));
    Some(format!("{axis}-exponent {:.3} {ci}{pred}", f.exponent))
}

pub fn summary_line(f: &ScalingFit) -> String {
    let relation = if f.quantity == "param_count" { "theory bound" } else { "theory" };
    let parts: Vec<String> = [
        describe("d", f.d, f.predicted_d, relation),
        describe("eps", f.eps, f.predicted_eps, relation),
    ]
    .into_iter()
    .flatten()
    .collect();
    format!("fit {} over {} cells: {}", f.quantity, f.points, parts.join("; "))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(d: usize, eps: f64, n: usize, params: usize) -> SweepRecord {
        SweepRecord {
            index: 0,
            d,
            epsilon: eps,
            family: PayoffFamily::BasketCall,
            n_used: n,
            param_count: params,
            nonzero_param_count: params,
            payoff_param_count: d + 3,
            measured_lp_error: Some(eps / 2.0),
            error_stderr: Some(0.001),
            attempts: 1,
            success: true,
            wall_time_seconds: 0.5,
            seed: 1,
        }
    }

    #[test]
    fn recovers_exact_power_laws() {
        let mut recs = Vec::new();
        for d in [1usize, 2, 4, 8] {
            for eps in [0.2f64, 0.1, 0.05] {
                let n = 3.0 * (d as f64).powf(1.5) * eps.powf(-2.0);
                recs.push(record(d, eps, n.round() as usize, (n * d as f64) as usize));
            }
        }
        let fits = scaling_fits(PayoffFamily::BasketCall, &recs);
        assert_eq!(fits.len(), 2);
        let n_fit = &fits[1];
        assert!((n_fit.d.unwrap().exponent - 1.5).abs() < 0.01);
        assert!((n_fit.eps.unwrap().exponent - 2.0).abs() < 0.01);
        assert_eq!(fits[0].predicted_d, Some(3.5));
        assert!(summary_line(&fits[0]).contains("theory bound 3.5"));
    }

    #[test]
    fn single_axis_and_degenerate_fits() {
        let recs: Vec<_> = [0.2, 0.1, 0.05].iter().map(|e| record(1, *e, (1.0 / (e * e)).round() as usize, 4)).collect();
        let f = fit(&recs, "n_used", |r| r.n_used as f64).unwrap();
        assert!(f.d.is_none());
        assert!((f.eps.unwrap().exponent - 2.0).abs() < 0.01);
        assert!(fit(&recs[..1], "n_used", |r| r.n_used as f64).is_none());
        let mut failed = recs.clone();
        failed[2].success = false;
        assert!(fit(&failed, "n_used", |r| r.n_used as f64).is_none());
    }

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        write_csv(&[record(2, 0.05, 64, 200)], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "kolmonet-sweep-v1,d,epsilon,payoff_family,n_used,param_count,nonzero_param_count,measured_lp_error,error_stderr,attempts,success,wall_time_seconds,seed"
        );
        assert_eq!(lines.next().unwrap(), "0,2,0.05,basket_call,64,200,200,0.025,0.001,1,true,0.500,1");
    }

    #[test]
    fn cell_seeds_differ() {
        let a = cell_seed(1, 2, 0.1, PayoffFamily::BasketCall);
        assert_ne!(a, cell_seed(1, 3, 0.1, PayoffFamily::BasketCall));
        assert_ne!(a, cell_seed(1, 2, 0.05, PayoffFamily::BasketCall));
        assert_ne!(a, cell_seed(1, 2, 0.1, PayoffFamily::CallOnMax));
        assert_eq!(a, cell_seed(1, 2, 0.1, PayoffFamily::BasketCall));
    }
}
