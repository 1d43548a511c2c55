//! Per-round logs and their aggregation into reward, regret and hit-rate curves.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::Visualization;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    /// 1-based round number.
    pub round: u64,
    pub action: Visualization,
    /// Reward the agent saw (after noise).
    pub observed: u8,
    /// Noiseless preference for the action.
    pub truth: u8,
    /// `r* - truth`.
    pub regret: u8,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub records: Vec<RoundRecord>,
}

impl RunLog {
    pub fn new() -> Self {
        RunLog::default()
    }

    pub fn push(&mut self, record: RoundRecord) {
        self.records.push(record);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn total_regret(&self) -> u64 {
        self.records.iter().map(|r| u64::from(r.regret)).sum()
    }
}

fn common_len(logs: &[RunLog]) -> Result<usize> {
    let Some(first) = logs.first() else {
        return Err(invalid("no logs to aggregate"));
    };
    let t = first.len();
    if let Some(bad) = logs.iter().position(|l| l.len() != t) {
        return Err(invalid(format!(
            "log {bad} has {} rounds, expected {t}",
            logs[bad].len()
        )));
    }
    Ok(t)
}

fn pointwise_mean(logs: &[RunLog], f: impl Fn(&RoundRecord) -> f64) -> Result<Vec<f64>> {
    let t = common_len(logs)?;
    let k = logs.len() as f64;
    Ok((0..t)
        .map(|i| logs.iter().map(|l| f(&l.records[i])).sum::<f64>() / k)
        .collect())
}

/// Mean observed reward at each round.
pub fn average_reward_curve(logs: &[RunLog]) -> Result<Vec<f64>> {
    pointwise_mean(logs, |r| f64::from(r.observed))
}

/// Running sum of the mean regret.
pub fn cumulative_regret_curve(logs: &[RunLog]) -> Result<Vec<f64>> {
    let mut acc = 0.0;
    Ok(pointwise_mean(logs, |r| f64::from(r.regret))?
        .into_iter()
        .map(|m| {
            acc += m;
            acc
        })
        .collect())
}

/// Fraction of logs whose round-t action is truly liked.
pub fn hit_rate_at_1(logs: &[RunLog]) -> Result<Vec<f64>> {
    pointwise_mean(logs, |r| f64::from(r.truth))
}

pub fn evaluations_curve(logs: &[RunLog]) -> Result<Vec<f64>> {
    pointwise_mean(logs, |r| r.evaluations as f64)
}

/// The aggregated curves exported per (algorithm, environment).
#[derive(Debug, Clone, PartialEq)]
pub struct MetricTable {
    pub avg_reward: Vec<f64>,
    pub cum_regret: Vec<f64>,
    pub hr_at_1: Vec<f64>,
    pub evals_per_round: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
pub struct MetricRow {
    pub round: u64,
    pub avg_reward: f64,
    pub cum_regret: f64,
    pub hr_at_1: f64,
    pub evals_per_round: f64,
}

impl MetricTable {
    pub fn from_logs(logs: &[RunLog]) -> Result<Self> {
        Ok(MetricTable {
            avg_reward: average_reward_curve(logs)?,
            cum_regret: cumulative_regret_curve(logs)?,
            hr_at_1: hit_rate_at_1(logs)?,
            evals_per_round: evaluations_curve(logs)?,
        })
    }

    pub fn rounds(&self) -> usize {
        self.avg_reward.len()
    }

    pub fn rows(&self) -> impl Iterator<Item = MetricRow> + '_ {
        (0..self.rounds()).map(|i| MetricRow {
            round: i as u64 + 1,
            avg_reward: self.avg_reward[i],
            cum_regret: self.cum_regret[i],
            hr_at_1: self.hr_at_1[i],
            evals_per_round: self.evals_per_round[i],
        })
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in self.rows() {
            w.serialize(row)?;
        }
        if self.rounds() == 0 {
            w.write_record(["round", "avg_reward", "cum_regret", "hr_at_1", "evals_per_round"])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn read_csv_file(path: &Path) -> Result<Self> {
        let mut table = MetricTable {
            avg_reward: vec![],
            cum_regret: vec![],
            hr_at_1: vec![],
            evals_per_round: vec![],
        };
        for row in csv::Reader::from_path(path)?.deserialize() {
            let row: MetricRow = row?;
            table.avg_reward.push(row.avg_reward);
            table.cum_regret.push(row.cum_regret);
            table.hr_at_1.push(row.hr_at_1);
            table.evals_per_round.push(row.evals_per_round);
        }
        Ok(table)
    }
}
