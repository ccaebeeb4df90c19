//! Simulation reports, p-value diagnostics and report files.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use symtest_core::invariance::rejects;
use symtest_core::stats::{ks_distance, ks_pvalue, rejection_rate};

use crate::config::{ExperimentConfig, Format};
use crate::data::{ingest_csv, Schema};
use crate::error::{CliError, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// One-sample KS comparison of p-values with Uniform(0, 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Uniformity {
    pub statistic: f64,
    pub p_value: f64,
    /// Set when every p-value lies on the `(1+k)/(1+B)` lattice, where the
    /// continuous null is only approximate.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lattice_note: Option<String>,
}

/// KS test of uniformity. `b` is the Monte Carlo budget that produced the
/// p-values, when known.
pub fn pvalue_uniformity_check(pvals: &[f64], b: Option<usize>) -> Result<Uniformity> {
    if pvals.len() < 5 {
        return Err(CliError::TooFewValues { needed: 5, got: pvals.len() });
    }
    let statistic = ks_distance(pvals, |p| p.clamp(0.0, 1.0));
    let lattice_note = b.filter(|&b| b > 0).and_then(|b| {
        let on_lattice = pvals.iter().all(|p| {
            let k = p * (b as f64 + 1.0) - 1.0;
            (k - k.round()).abs() < 1e-9 && k.round() >= 0.0
        });
        on_lattice.then(|| format!("p-values lie on the lattice (1+k)/{}; the KS p-value is approximate", b + 1))
    });
    Ok(Uniformity {
        statistic,
        p_value: ks_pvalue(statistic, pvals.len()),
        lattice_note,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub version: String,
    pub method: String,
    pub replications: usize,
    pub p_values: Vec<f64>,
    pub statistics: Vec<f64>,
    pub rejection_rate: f64,
    /// Binomial standard error `√(r(1−r)/N)`.
    pub std_error: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub uniformity: Option<Uniformity>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_wall_time: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_times: Option<Vec<f64>>,
    pub config: ExperimentConfig,
}

impl SimulationReport {
    pub fn new(config: ExperimentConfig, p_values: Vec<f64>, statistics: Vec<f64>, wall_times: Option<Vec<f64>>) -> Result<Self> {
        if p_values.is_empty() {
            return Err(CliError::TooFewValues { needed: 1, got: 0 });
        }
        let (rate, se) = rejection_rate(&p_values, config.alpha);
        let uniformity = if p_values.len() >= 5 {
            let b = (config.method != crate::config::Method::Kci).then_some(config.b);
            Some(pvalue_uniformity_check(&p_values, b)?)
        } else {
            None
        };
        let mean_wall_time = wall_times.as_ref().map(|w| w.iter().sum::<f64>() / w.len() as f64);
        Ok(Self {
            version: VERSION.to_string(),
            method: config.method.to_string(),
            replications: p_values.len(),
            p_values,
            statistics,
            rejection_rate: rate,
            std_error: se,
            uniformity,
            mean_wall_time,
            wall_times,
            config,
        })
    }

    pub fn rejections(&self) -> Vec<bool> {
        self.p_values.iter().map(|&p| rejects(p, self.config.alpha)).collect()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let fmt = |v: f64| v.to_string();
        w.write_record(["replication", "p_value", "statistic", "reject", "wall_time"]).expect("in-memory write");
        for (i, (&p, r)) in self.p_values.iter().zip(self.rejections()).enumerate() {
            let wall = self.wall_times.as_ref().map(|w| fmt(w[i])).unwrap_or_default();
            let stat = self.statistics.get(i).map(|&s| fmt(s)).unwrap_or_default();
            w.write_record([i.to_string(), fmt(p), stat, (r as u8).to_string(), wall]).expect("in-memory write");
        }
        let mut out = w.into_inner().expect("in-memory flush");
        let mut footer = format!(
            "# method={} N={} alpha={} rejection_rate={} std_error={}",
            self.method, self.replications, self.config.alpha, self.rejection_rate, self.std_error
        );
        if let Some(u) = &self.uniformity {
            footer.push_str(&format!(" ks_statistic={} ks_pvalue={}", u.statistic, u.p_value));
        }
        if let Some(t) = self.mean_wall_time {
            footer.push_str(&format!(" mean_wall_time={t}"));
        }
        writeln!(out, "{footer}").expect("in-memory write");
        String::from_utf8(out).expect("utf-8")
    }
}

/// Writes a report as pretty JSON or as CSV with a summary footer.
pub fn emit_report(report: &SimulationReport, path: &Path, format: Format) -> Result<()> {
    let body = match format {
        Format::Json => report.to_json(),
        Format::Csv => report.to_csv(),
    };
    std::fs::write(path, body).map_err(|e| CliError::io(path, e))
}

/// The p-value column of a CSV report.
pub fn read_csv_pvalues(path: &Path) -> Result<Vec<f64>> {
    Ok(ingest_csv(path, &Schema::features(&["p_value"]))?.x.into_vec())
}
