//! Metrics CSV shared by RL training and value pretraining.

use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use crate::engine::Color;
use crate::net::Phase;

pub const HEADER: &str = "phase,role,iteration,steps,mean_episode_reward,mean_episode_length,policy_loss,value_loss,entropy,kl_estimate,validation_loss";

/// One CSV row. RL rows leave `validation_loss` empty; pretraining rows leave the
/// episode and policy columns empty.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsRow {
    pub phase: Phase,
    /// Color being trained, if any.
    pub role: Option<Color>,
    pub iteration: u32,
    pub steps: u64,
    pub mean_episode_reward: Option<f64>,
    pub mean_episode_length: Option<f64>,
    pub policy_loss: Option<f64>,
    pub value_loss: f64,
    pub entropy: Option<f64>,
    pub kl_estimate: Option<f64>,
    pub validation_loss: Option<f64>,
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl MetricsRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.phase.as_str(),
            self.role.map(Color::as_str).unwrap_or(""),
            self.iteration,
            self.steps,
            cell(self.mean_episode_reward),
            cell(self.mean_episode_length),
            cell(self.policy_loss),
            self.value_loss,
            cell(self.entropy),
            cell(self.kl_estimate),
            cell(self.validation_loss),
        )
    }
}

/// Appends rows, writing the header first if the file is new or empty.
pub fn append_rows(path: impl AsRef<Path>, rows: &[MetricsRow]) -> io::Result<()> {
    let path = path.as_ref();
    let fresh = std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    if fresh {
        writeln!(f, "{HEADER}")?;
    }
    for r in rows {
        writeln!(f, "{}", r.to_csv())?;
    }
    Ok(())
}

/// Drops RL rows whose iteration exceeds `max_iteration`.
pub fn truncate_rl_rows(path: impl AsRef<Path>, max_iteration: u32) -> io::Result<()> {
    let path = path.as_ref();
    let Ok(text) = std::fs::read_to_string(path) else {
        return Ok(());
    };
    let kept: Vec<&str> = text
        .lines()
        .enumerate()
        .filter(|(i, line)| {
            let mut cols = line.split(',');
            let phase = cols.next();
            let iteration = cols.nth(1).and_then(|c| c.parse::<u32>().ok());
            *i == 0 || phase != Some(Phase::Rl.as_str()) || iteration.is_some_and(|k| k <= max_iteration)
        })
        .map(|(_, l)| l)
        .collect();
    let mut out = kept.join("\n");
    if !out.is_empty() {
        out.push('\n');
    }
    std::fs::write(path, out)
}

/// Number of data rows (header excluded).
pub fn count_rows(path: impl AsRef<Path>) -> io::Result<usize> {
    let f = BufReader::new(File::open(path)?);
    let mut n = 0;
    for line in f.lines().skip(1) {
        if !line?.trim().is_empty() {
            n += 1;
        }
    }
    Ok(n)
}
