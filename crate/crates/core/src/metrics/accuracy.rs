//! How well each metric predicts post-FEC BER across formats.
//!
//! Rows are grouped into curves by `(label, rate)`. For every metric the
//! value at which a curve crosses the target BER is found by piecewise-linear
//! interpolation of `log10(BER_post)` against the metric; the spread of those
//! values across formats of one code rate is `delta_metric`, and the ratio of
//! the largest to the smallest BER at their mean is `delta_ber`.

use std::collections::BTreeMap;

use serde::Serialize;

use super::MetricReport;
use crate::error::{Error, Result};

/// Metrics compared by default.
pub const PREDICTORS: [&str; 6] = ["one_minus_ber_pre", "i_n", "i_s", "i_a", "ngmi", "i_hat"];

#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub label: String,
    pub rate: String,
    /// `(metric, ber_post)` pairs.
    pub points: Vec<(f64, f64)>,
}

impl Curve {
    fn log_points(&self) -> Vec<(f64, f64)> {
        let mut pts: Vec<(f64, f64)> = self
            .points
            .iter()
            .filter(|(x, b)| x.is_finite() && *b > 0.0)
            .map(|&(x, b)| (x, b.log10()))
            .collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        pts
    }

    /// Metric value at which the curve first falls through `target`.
    pub fn metric_at(&self, target: f64) -> Option<f64> {
        let t = target.log10();
        let pts = self.log_points();
        pts.windows(2).find_map(|w| {
            let ((x0, y0), (x1, y1)) = (w[0], w[1]);
            if y0 >= t && y1 <= t && y0 != y1 {
                Some(x0 + (t - y0) * (x1 - x0) / (y1 - y0))
            } else if y0 == t {
                Some(x0)
            } else {
                None
            }
        })
    }

    /// `log10(BER_post)` at metric value `x`, extrapolating the end segments.
    pub fn log_ber_at(&self, x: f64) -> Option<f64> {
        let pts = self.log_points();
        match pts.len() {
            0 => None,
            1 => Some(pts[0].1),
            n => {
                let i = pts.partition_point(|p| p.0 < x).clamp(1, n - 1);
                let ((x0, y0), (x1, y1)) = (pts[i - 1], pts[i]);
                if x1 == x0 {
                    Some(0.5 * (y0 + y1))
                } else {
                    Some(y0 + (x - x0) * (y1 - y0) / (x1 - x0))
                }
            }
        }
    }
}

/// Builds one curve per `(label, rate)` from metric column `metric`.
pub fn curves(rows: &[MetricReport], metric: &str) -> Result<Vec<Curve>> {
    let mut map: BTreeMap<(String, String), Vec<(f64, f64)>> = BTreeMap::new();
    for r in rows {
        let x = r
            .column(metric)
            .ok_or_else(|| Error::Config(format!("unknown metric column `{metric}`")))?;
        map.entry((r.label.clone(), r.rate.clone()))
            .or_default()
            .push((x, r.ber_post));
    }
    Ok(map
        .into_iter()
        .map(|((label, rate), points)| Curve { label, rate, points })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateAccuracy {
    pub rate: String,
    /// `(label, metric at target)` for every bracketing format.
    pub thresholds: Vec<(String, f64)>,
    pub delta_metric: f64,
    pub mean_metric: f64,
    pub log10_delta_ber: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricAccuracy {
    pub metric: String,
    pub per_rate: Vec<RateAccuracy>,
    /// Largest spread over code rates.
    pub delta_metric: f64,
    /// Largest `log10(max BER / min BER)` over code rates.
    pub log10_delta_ber: f64,
    /// `label@rate` of curves that never cross the target.
    pub excluded: Vec<String>,
}

impl MetricAccuracy {
    pub fn delta_ber(&self) -> f64 {
        10f64.powf(self.log10_delta_ber)
    }

    pub fn threshold(&self, label: &str, rate: &str) -> Option<f64> {
        self.per_rate
            .iter()
            .filter(|r| r.rate == rate)
            .flat_map(|r| &r.thresholds)
            .find(|(l, _)| l == label)
            .map(|&(_, x)| x)
    }
}

pub fn metric_accuracy(rows: &[MetricReport], metric: &str, target: f64) -> Result<MetricAccuracy> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::Domain(format!("target BER {target} outside (0, 1)")));
    }
    let all = curves(rows, metric)?;
    let mut by_rate: BTreeMap<String, Vec<&Curve>> = BTreeMap::new();
    for c in &all {
        by_rate.entry(c.rate.clone()).or_default().push(c);
    }
    let mut excluded = Vec::new();
    let mut per_rate = Vec::new();
    for (rate, group) in by_rate {
        let mut thresholds = Vec::new();
        let mut bracketed = Vec::new();
        for c in group {
            match c.metric_at(target) {
                Some(x) => {
                    thresholds.push((c.label.clone(), x));
                    bracketed.push(c);
                }
                None => excluded.push(format!("{}@{}", c.label, c.rate)),
            }
        }
        if thresholds.is_empty() {
            continue;
        }
        let xs: Vec<f64> = thresholds.iter().map(|t| t.1).collect();
        let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let logs: Vec<f64> = bracketed.iter().filter_map(|c| c.log_ber_at(mean)).collect();
        let spread =
            logs.iter().copied().fold(f64::NEG_INFINITY, f64::max) - logs.iter().copied().fold(f64::INFINITY, f64::min);
        per_rate.push(RateAccuracy {
            rate,
            thresholds,
            delta_metric: hi - lo,
            mean_metric: mean,
            log10_delta_ber: spread,
        });
    }
    Ok(MetricAccuracy {
        metric: metric.to_string(),
        delta_metric: per_rate.iter().map(|r| r.delta_metric).fold(0.0, f64::max),
        log10_delta_ber: per_rate.iter().map(|r| r.log10_delta_ber).fold(0.0, f64::max),
        per_rate,
        excluded,
    })
}

/// Accuracy of every metric in [`PREDICTORS`].
pub fn accuracy_analysis(rows: &[MetricReport], target: f64) -> Result<Vec<MetricAccuracy>> {
    PREDICTORS.iter().map(|m| metric_accuracy(rows, m, target)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AccuracyRow {
    pub metric: String,
    pub rate: String,
    pub label: String,
    pub metric_at_target: Option<f64>,
    pub delta_metric: f64,
    pub log10_delta_ber: f64,
}

/// Flattens an analysis into CSV rows; `rate = "all"` rows hold the maxima.
pub fn write_accuracy<W: std::io::Write>(analysis: &[MetricAccuracy], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for a in analysis {
        for r in &a.per_rate {
            for (label, x) in &r.thresholds {
                wtr.serialize(AccuracyRow {
                    metric: a.metric.clone(),
                    rate: r.rate.clone(),
                    label: label.clone(),
                    metric_at_target: Some(*x),
                    delta_metric: r.delta_metric,
                    log10_delta_ber: r.log10_delta_ber,
                })?;
            }
        }
        for ex in &a.excluded {
            let (label, rate) = ex.rsplit_once('@').unwrap_or((ex.as_str(), ""));
            wtr.serialize(AccuracyRow {
                metric: a.metric.clone(),
                rate: rate.to_string(),
                label: label.to_string(),
                metric_at_target: None,
                delta_metric: f64::NAN,
                log10_delta_ber: f64::NAN,
            })?;
        }
        wtr.serialize(AccuracyRow {
            metric: a.metric.clone(),
            rate: "all".into(),
            label: String::new(),
            metric_at_target: None,
            delta_metric: a.delta_metric,
            log10_delta_ber: a.log10_delta_ber,
        })?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(label: &str, rate: &str, x: f64, ber: f64) -> MetricReport {
        MetricReport {
            label: label.into(),
            rate: rate.into(),
            snr_db: 0.0,
            ber_pre: 1.0 - x,
            ber_post: ber,
            i_n: x,
            i_s: x,
            i_a: x,
            ngmi: x,
            r_c_max: x,
            i_hat: x,
            r_bmd: 0.0,
            h_b: 1.0,
            h_joint: 1.0,
            sum_h_bi: 1.0,
            codewords: 1,
            frame_errors: 0,
            bit_errors: 0,
            info_bits: 1,
            samples: 1,
            seed: 0,
            config_hash: String::new(),
            table_hash: String::new(),
        }
    }

    fn curve(label: &str, shift: f64) -> Vec<MetricReport> {
        (0..6)
            .map(|i| {
                let x = 0.8 + 0.01 * i as f64 + shift;
                row(label, "2/3", x, 10f64.powi(-i))
            })
            .collect()
    }

    #[test]
    fn identical_curves() {
        let mut rows = curve("a", 0.0);
        rows.extend(curve("b", 0.0));
        let a = metric_accuracy(&rows, "i_a", 1e-3).unwrap();
        assert!(a.delta_metric.abs() < 1e-12);
        assert!((a.delta_ber() - 1.0).abs() < 1e-12);
        assert!((a.threshold("a", "2/3").unwrap() - 0.83).abs() < 1e-12);
    }

    #[test]
    fn offset_curves() {
        let mut rows = curve("a", 0.0);
        rows.extend(curve("b", 0.01));
        let a = metric_accuracy(&rows, "i_n", 1e-3).unwrap();
        assert!((a.delta_metric - 0.01).abs() < 1e-12);
        // one decade per 0.01 in metric, mean sits half-way
        assert!((a.log10_delta_ber - 1.0).abs() < 1e-9);
    }

    #[test]
    fn unbracketed_is_excluded() {
        let mut rows = curve("a", 0.0);
        rows.push(row("c", "2/3", 0.9, 0.2));
        rows.push(row("c", "2/3", 0.95, 0.1));
        let a = metric_accuracy(&rows, "i_s", 1e-3).unwrap();
        assert_eq!(a.excluded, vec!["c@2/3".to_string()]);
        assert_eq!(a.per_rate[0].thresholds.len(), 1);
    }

    #[test]
    fn zero_ber_points_are_ignored() {
        let mut rows = curve("a", 0.0);
        rows.push(row("a", "2/3", 0.9, 0.0));
        let a = metric_accuracy(&rows, "i_a", 1e-3).unwrap();
        assert!((a.threshold("a", "2/3").unwrap() - 0.83).abs() < 1e-12);
    }

    #[test]
    fn rates_are_analysed_separately() {
        let mut rows = curve("a", 0.0);
        rows.extend(curve("b", 0.0));
        rows.extend(curve("a", 0.05).into_iter().map(|mut r| {
            r.rate = "5/6".into();
            r
        }));
        rows.extend(curve("b", 0.07).into_iter().map(|mut r| {
            r.rate = "5/6".into();
            r
        }));
        let a = metric_accuracy(&rows, "i_a", 1e-3).unwrap();
        assert_eq!(a.per_rate.len(), 2);
        assert!((a.delta_metric - 0.02).abs() < 1e-12);
    }

    #[test]
    fn bad_inputs() {
        let rows = curve("a", 0.0);
        assert!(metric_accuracy(&rows, "bogus", 1e-3).is_err());
        assert!(metric_accuracy(&rows, "i_a", 0.0).is_err());
        assert_eq!(accuracy_analysis(&rows, 1e-3).unwrap().len(), PREDICTORS.len());
    }
}
