//! Grid search over the verifier hyperparameters (gamma, h0, C_t),
//! scoring each cell by agreement between its gate decisions and reference
//! labels.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::VerifierConfig;
use crate::error::{Error, Result};
use crate::review::confidence;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerificationSample {
    pub accuracy: f64,
    pub consistency: f64,
    pub hop: f64,
    /// Reference accept/reject decision.
    pub label: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub gammas: Vec<f64>,
    pub h0s: Vec<f64>,
    pub thresholds: Vec<f64>,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self {
            gammas: vec![0.1, 0.5, 1.0, 1.5, 2.0, 2.5],
            h0s: vec![1.0, 1.5, 2.0, 2.5, 3.0, 3.5],
            thresholds: vec![0.55, 0.65, 0.70, 0.75, 0.80, 0.85],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub gamma: f64,
    pub h0: f64,
    #[serde(rename = "C_t")]
    pub threshold: f64,
    pub agreement: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub n_samples: usize,
    /// Grid order: gamma outermost, then h0, then C_t.
    pub cells: Vec<SweepCell>,
    /// Highest agreement; the earliest cell in grid order wins ties.
    pub best: SweepCell,
    /// Cells sharing the best agreement.
    pub n_best: usize,
}

impl SweepReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("sweep report serializes")
    }

    /// One block per gamma: rows are h0, columns C_t, cells agreement.
    pub fn to_table(&self, grid: &SweepGrid) -> String {
        use std::fmt::Write as _;
        let mut out = String::new();
        let mut idx = 0;
        for g in &grid.gammas {
            let _ = writeln!(out, "gamma = {g}");
            let _ = write!(out, "{:>6}", "h0\\C_t");
            for t in &grid.thresholds {
                let _ = write!(out, " {t:>6.2}");
            }
            out.push('\n');
            for h in &grid.h0s {
                let _ = write!(out, "{h:>6.2}");
                for _ in &grid.thresholds {
                    let _ = write!(out, " {:>6.4}", self.cells[idx].agreement);
                    idx += 1;
                }
                out.push('\n');
            }
            out.push('\n');
        }
        let b = &self.best;
        let _ = writeln!(
            out,
            "best: gamma={} h0={} C_t={} agreement={:.4} ({} cell(s) tied, n={})",
            b.gamma, b.h0, b.threshold, b.agreement, self.n_best, self.n_samples
        );
        out
    }
}

pub fn sweep(samples: &[VerificationSample], grid: &SweepGrid) -> Result<SweepReport> {
    if samples.is_empty() {
        return Err(Error::Dataset(
            "sweep needs at least one labelled sample".into(),
        ));
    }
    let mut cells = Vec::with_capacity(grid.gammas.len() * grid.h0s.len() * grid.thresholds.len());
    for &gamma in &grid.gammas {
        for &h0 in &grid.h0s {
            for &threshold in &grid.thresholds {
                let cfg = VerifierConfig::new(threshold, h0, gamma)?;
                let mut agree = 0usize;
                for s in samples {
                    let report = confidence(s.accuracy, s.consistency, s.hop, &cfg)?;
                    agree += usize::from(report.accepted == s.label);
                }
                cells.push(SweepCell {
                    gamma,
                    h0,
                    threshold,
                    agreement: agree as f64 / samples.len() as f64,
                });
            }
        }
    }
    let best = *cells
        .iter()
        .reduce(|best, c| {
            if c.agreement > best.agreement {
                c
            } else {
                best
            }
        })
        .ok_or_else(|| Error::Config("empty sweep grid".into()))?;
    let n_best = cells
        .iter()
        .filter(|c| c.agreement == best.agreement)
        .count();
    Ok(SweepReport {
        n_samples: samples.len(),
        cells,
        best,
        n_best,
    })
}

/// Samples with A uniform in [0, 1], F uniform over {0, 0.5, 1} and hop
/// uniform over {1, 2, 3, 4}, labelled by the gate under `truth`.
pub fn synthetic_samples(
    n: usize,
    seed: u64,
    truth: &VerifierConfig,
) -> Result<Vec<VerificationSample>> {
    truth.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let accuracy: f64 = rng.gen_range(0.0..=1.0);
            let consistency = [0.0, 0.5, 1.0][rng.gen_range(0..3)];
            let hop = f64::from(rng.gen_range(1u8..=4));
            let label = confidence(accuracy, consistency, hop, truth)?.accepted;
            Ok(VerificationSample {
                accuracy,
                consistency,
                hop,
                label,
            })
        })
        .collect()
}

pub fn load_samples(path: &Path) -> Result<Vec<VerificationSample>> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Dataset(format!("line {}: {e}", i + 1)))
        })
        .collect()
}
