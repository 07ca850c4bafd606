use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::pixelfly::PixelflyConfig;
use crate::tensor::Rng;
use crate::train::{train_shl, Method, ModelConfig, ShlModel, Splits, TrainConfig};
use crate::{Error, Result};

/// One of the three pixelfly shape parameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParam {
    Levels,
    Block,
    Rank,
}

impl SweepParam {
    pub const ALL: [SweepParam; 3] = [SweepParam::Levels, SweepParam::Block, SweepParam::Rank];

    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Levels => "levels",
            SweepParam::Block => "block",
            SweepParam::Rank => "rank",
        }
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Cartesian grid of pixelfly shapes for an `n × n` first layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub n: usize,
    pub levels: Vec<usize>,
    pub blocks: Vec<usize>,
    pub ranks: Vec<usize>,
}

impl SweepGrid {
    pub fn cells(&self) -> Vec<SweepCell> {
        let mut out = Vec::new();
        for &levels in &self.levels {
            for &block in &self.blocks {
                for &rank in &self.ranks {
                    out.push(SweepCell { levels, block, rank });
                }
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepCell {
    pub levels: usize,
    pub block: usize,
    pub rank: usize,
}

impl SweepCell {
    pub fn get(&self, p: SweepParam) -> usize {
        match p {
            SweepParam::Levels => self.levels,
            SweepParam::Block => self.block,
            SweepParam::Rank => self.rank,
        }
    }

    pub fn pixelfly_config(&self) -> PixelflyConfig {
        PixelflyConfig {
            block: self.block,
            rank: self.rank,
            levels: Some(self.levels),
            bias: true,
        }
    }

    /// SHL parameter count with this cell as the first layer.
    fn shl_params(&self, n: usize) -> Result<usize> {
        if self.levels == 0 {
            return Err(Error::InvalidArgument("levels must be at least 1".into()));
        }
        if self.rank > n {
            return Err(Error::InvalidArgument(format!("rank {} exceeds n = {n}", self.rank)));
        }
        let cfg = ModelConfig::default();
        Ok(self.pixelfly_config().param_count(n)? + n * cfg.classes + cfg.classes)
    }
}

/// Measurements of one trained cell.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellMetrics {
    /// First-layer time over the whole training run.
    pub time_ms: f64,
    pub accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub cell: SweepCell,
    pub n_params: Option<usize>,
    pub metrics: Option<CellMetrics>,
    /// `ok`, `skipped: <reason>` or `failed: <reason>`.
    pub status: String,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricStats {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

impl MetricStats {
    /// Welford's single-pass mean and variance.
    pub fn from_values(values: impl IntoIterator<Item = f64>) -> Self {
        let (mut n, mut mean, mut m2) = (0usize, 0.0, 0.0);
        for v in values {
            n += 1;
            let d = v - mean;
            mean += d / n as f64;
            m2 += d * (v - mean);
        }
        if n == 0 {
            return Self::default();
        }
        Self {
            mean,
            std: (m2 / n as f64).sqrt(),
        }
    }
}

/// Statistics over the varied parameter for one combination of the others.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub held: Vec<(SweepParam, usize)>,
    pub runs: usize,
    pub time_ms: MetricStats,
    pub accuracy: MetricStats,
    pub n_params: MetricStats,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub varied: SweepParam,
    pub groups: Vec<GroupStats>,
    /// Mean of the group means.
    pub mean: [f64; 3],
    /// Largest group standard deviation for time, accuracy and parameters.
    pub max_std: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub grid: SweepGrid,
    pub cells: Vec<CellRecord>,
    pub summaries: Vec<SweepSummary>,
}

/// Evaluate every valid cell of `grid` with `evaluate` and summarise.
/// Invalid shapes and evaluator errors are recorded per cell; the sweep
/// carries on.
pub fn sweep_pixelfly(
    grid: &SweepGrid,
    mut evaluate: impl FnMut(&SweepCell) -> Result<CellMetrics>,
) -> Result<SweepReport> {
    let cells = grid.cells();
    if cells.is_empty() {
        return Err(Error::InvalidArgument("sweep grid is empty".into()));
    }
    let records: Vec<CellRecord> = cells
        .into_iter()
        .map(|cell| match cell.shl_params(grid.n) {
            Err(e) => CellRecord {
                cell,
                n_params: None,
                metrics: None,
                status: format!("skipped: {e}"),
            },
            Ok(n_params) => match evaluate(&cell) {
                Ok(m) => CellRecord {
                    cell,
                    n_params: Some(n_params),
                    metrics: Some(m),
                    status: "ok".into(),
                },
                Err(e) => CellRecord {
                    cell,
                    n_params: Some(n_params),
                    metrics: None,
                    status: format!("failed: {e}"),
                },
            },
        })
        .collect();
    Ok(SweepReport {
        grid: grid.clone(),
        summaries: summarize(&records),
        cells: records,
    })
}

/// For each parameter: group completed cells by the other two parameters,
/// then take statistics across the varied one.
pub fn summarize(records: &[CellRecord]) -> Vec<SweepSummary> {
    SweepParam::ALL
        .into_iter()
        .map(|varied| {
            let held_params: Vec<SweepParam> = SweepParam::ALL.into_iter().filter(|&p| p != varied).collect();
            let mut groups: BTreeMap<Vec<usize>, Vec<(&CellMetrics, usize)>> = BTreeMap::new();
            for r in records {
                if let (Some(m), Some(p)) = (&r.metrics, r.n_params) {
                    let key = held_params.iter().map(|&h| r.cell.get(h)).collect();
                    groups.entry(key).or_default().push((m, p));
                }
            }
            let groups: Vec<GroupStats> = groups
                .into_iter()
                .map(|(key, rows)| GroupStats {
                    held: held_params.iter().copied().zip(key).collect(),
                    runs: rows.len(),
                    time_ms: MetricStats::from_values(rows.iter().map(|r| r.0.time_ms)),
                    accuracy: MetricStats::from_values(rows.iter().map(|r| r.0.accuracy)),
                    n_params: MetricStats::from_values(rows.iter().map(|r| r.1 as f64)),
                })
                .collect();
            let pick = |g: &GroupStats| [g.time_ms, g.accuracy, g.n_params];
            let mut mean = [0.0; 3];
            let mut max_std = [0.0f64; 3];
            for g in &groups {
                for (i, s) in pick(g).iter().enumerate() {
                    mean[i] += s.mean / groups.len() as f64;
                    max_std[i] = max_std[i].max(s.std);
                }
            }
            SweepSummary {
                varied,
                groups,
                mean,
                max_std,
            }
        })
        .collect()
}

/// Evaluator that trains the pixelfly SHL model for each cell and reports
/// first-layer time and test accuracy.
pub fn training_evaluator<'a>(
    splits: &'a Splits,
    train: &'a TrainConfig,
    n: usize,
) -> impl FnMut(&SweepCell) -> Result<CellMetrics> + 'a {
    move |cell| {
        let config = ModelConfig {
            method: Method::Pixelfly,
            input: n,
            hidden: n,
            pixelfly: cell.pixelfly_config(),
            ..ModelConfig::default()
        };
        let mut model = ShlModel::<f32>::new(&config, &mut Rng::seed_from_u64(train.seed))?;
        let out = train_shl(&mut model, splits, train, |_, _| {})?;
        let time_ms = out.timings.iter().map(|t| t.layer1_time_ms).sum::<f64>();
        Ok(CellMetrics {
            time_ms,
            accuracy: out.test_acc,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_pass(v: &[f64]) -> (f64, f64) {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64;
        (m, var.sqrt())
    }

    fn fake(cell: &SweepCell) -> Result<CellMetrics> {
        Ok(CellMetrics {
            time_ms: 1.5 * cell.levels as f64 + 0.25 * cell.block as f64 + 0.01 * cell.rank as f64,
            accuracy: 0.3 + 0.01 * ((cell.levels * 7 + cell.block * 3 + cell.rank) % 11) as f64,
        })
    }

    fn grid() -> SweepGrid {
        SweepGrid {
            n: 1024,
            levels: vec![1, 2, 4, 7],
            blocks: vec![8, 16, 32],
            ranks: vec![2, 4, 64, 128],
        }
    }

    #[test]
    fn welford_matches_two_pass() {
        let v = [3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0];
        let s = MetricStats::from_values(v);
        let (m, sd) = two_pass(&v);
        assert!((s.mean - m).abs() <= 1e-12 && (s.std - sd).abs() <= 1e-12);
        assert_eq!(MetricStats::from_values([4.0]).std, 0.0);
    }

    #[test]
    fn summaries_match_reference() {
        let report = sweep_pixelfly(&grid(), fake).unwrap();
        // levels 7 needs a grid of at least 128 blocks
        let skipped = report.cells.iter().filter(|c| c.status.starts_with("skipped")).count();
        assert_eq!(skipped, 2 * 4);
        for s in &report.summaries {
            let mut max_std = [0.0f64; 3];
            for g in &s.groups {
                let rows: Vec<&CellRecord> = report
                    .cells
                    .iter()
                    .filter(|c| c.metrics.is_some() && g.held.iter().all(|&(p, v)| c.cell.get(p) == v))
                    .collect();
                assert_eq!(rows.len(), g.runs);
                let t: Vec<f64> = rows.iter().map(|c| c.metrics.unwrap().time_ms).collect();
                let a: Vec<f64> = rows.iter().map(|c| c.metrics.unwrap().accuracy).collect();
                let p: Vec<f64> = rows.iter().map(|c| c.n_params.unwrap() as f64).collect();
                for (i, (vals, got)) in [(t, g.time_ms), (a, g.accuracy), (p, g.n_params)]
                    .into_iter()
                    .enumerate()
                {
                    let (m, sd) = two_pass(&vals);
                    assert!((got.mean - m).abs() <= 1e-12 * m.abs().max(1.0));
                    assert!((got.std - sd).abs() <= 1e-12 * sd.abs().max(1.0));
                    max_std[i] = max_std[i].max(sd);
                }
            }
            for (got, want) in s.max_std.iter().zip(max_std) {
                assert!((got - want).abs() <= 1e-12 * want.max(1.0));
            }
        }
    }

    #[test]
    fn rank_steps_change_params_by_two_n() {
        let report = sweep_pixelfly(&grid(), fake).unwrap();
        for c in &report.cells {
            for d in &report.cells {
                if let (Some(pc), Some(pd)) = (c.n_params, d.n_params) {
                    if c.cell.levels == d.cell.levels && c.cell.block == d.cell.block {
                        let dp = pd as i64 - pc as i64;
                        assert_eq!(dp, 2 * 1024 * (d.cell.rank as i64 - c.cell.rank as i64));
                    }
                }
            }
        }
    }

    #[test]
    fn single_cell_has_zero_spread() {
        let g = SweepGrid {
            n: 64,
            levels: vec![1],
            blocks: vec![8],
            ranks: vec![2],
        };
        let report = sweep_pixelfly(&g, fake).unwrap();
        assert!(report.summaries.iter().all(|s| s.max_std == [0.0; 3]));
    }

    #[test]
    fn evaluator_errors_are_recorded() {
        let g = SweepGrid {
            n: 64,
            levels: vec![1],
            blocks: vec![8, 5],
            ranks: vec![2],
        };
        let report = sweep_pixelfly(&g, |_| Err(Error::InvalidArgument("boom".into()))).unwrap();
        assert!(report.cells[0].status.starts_with("failed"));
        assert!(report.cells[1].status.starts_with("skipped"));
        let empty = SweepGrid { ranks: vec![], ..g };
        assert!(sweep_pixelfly(&empty, fake).is_err());
    }
}
