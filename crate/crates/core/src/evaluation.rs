//! Accuracy metrics, the seeded k-fold cross-validation protocol,
//! Wilcoxon signed-rank significance testing, and boxplot statistics over
//! absolute residuals.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::adaptation::{
    build_difference_table, build_rtm_context, estimate_eba, estimate_linear_size,
    estimate_mendes_rules, estimate_mt, estimate_rtm, estimate_similarity,
    estimate_weighted_mean, RtmContext, Strategy,
};
use crate::dataset::{apply_normalizer, fit_normalizer, remove_missing, Dataset};
use crate::modeltree::{ModelTree, TreeParams};
use crate::neighbors::nearest_neighbors;
use crate::{Error, Result};

/// Actual vs predicted effort for one held-out project.
#[derive(Debug, Clone)]
pub struct PredictionPair {
    pub id: String,
    pub actual: f64,
    pub predicted: f64,
}

/// Magnitude of relative error |actual − predicted| / actual.
pub fn mre(pair: &PredictionPair) -> Result<f64> {
    if pair.actual <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "project {}: actual effort must be positive",
            pair.id
        )));
    }
    Ok((pair.actual - pair.predicted).abs() / pair.actual)
}

/// Pooled accuracy metrics over a set of prediction pairs.
#[derive(Debug, Clone)]
pub struct MetricsReport {
    pub mmre: f64,
    pub mdmre: f64,
    /// Percentage (0–100) of predictions with MRE ≤ 0.25.
    pub pred25: f64,
    /// Absolute residuals |actual − predicted|, in pair order.
    pub residuals: Vec<f64>,
    pub n: usize,
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// MMRE, MdMRE, and PRED(25) over non-empty prediction pairs.
pub fn summarize(pairs: &[PredictionPair]) -> Result<MetricsReport> {
    if pairs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mres: Vec<f64> = pairs.iter().map(mre).collect::<Result<_>>()?;
    let n = mres.len();
    let mmre = mres.iter().sum::<f64>() / n as f64;
    let mut sorted = mres.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mdmre = median(&sorted);
    let within = mres.iter().filter(|&&m| m <= 0.25).count();
    let pred25 = 100.0 * within as f64 / n as f64;
    let residuals = pairs
        .iter()
        .map(|p| (p.actual - p.predicted).abs())
        .collect();
    Ok(MetricsReport {
        mmre,
        mdmre,
        pred25,
        residuals,
        n,
    })
}

/// Seeded assignment of every project to one fold.
#[derive(Debug, Clone)]
pub struct FoldPlan {
    pub seed: u64,
    /// Fold index per project, aligned to dataset order.
    pub assignment: Vec<usize>,
    pub folds: usize,
}

impl FoldPlan {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        self.assignment
            .iter()
            .enumerate()
            .filter(|(_, &f)| f == fold)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        self.assignment
            .iter()
            .enumerate()
            .filter(|(_, &f)| f != fold)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Shuffle the project order with the seed, then assign folds round-robin,
/// so fold sizes differ by at most one.
pub fn make_folds(d: &Dataset, folds: usize, seed: u64) -> Result<FoldPlan> {
    if folds == 0 || d.len() < folds {
        return Err(Error::InvalidArgument(format!(
            "dataset of {} projects cannot be split into {} folds",
            d.len(),
            folds
        )));
    }
    let mut order: Vec<usize> = (0..d.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut assignment = vec![0usize; d.len()];
    for (pos, &project) in order.iter().enumerate() {
        assignment[project] = pos % folds;
    }
    Ok(FoldPlan {
        seed,
        assignment,
        folds,
    })
}

fn subset(d: &Dataset, indices: &[usize]) -> Dataset {
    Dataset {
        schema: d.schema.clone(),
        projects: indices.iter().map(|&i| d.projects[i].clone()).collect(),
    }
}

/// Result of one full cross-validation run.
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub pairs: Vec<PredictionPair>,
    pub report: MetricsReport,
    /// How many adapted efforts were floored to stay positive.
    pub floored: usize,
}

/// Run the full protocol: for each fold, fit the normalizer on the training
/// side only, build the strategy's fold context, predict every held-out
/// project, and pool all pairs into one report.
pub fn run_experiment(
    d: &Dataset,
    strategy: Strategy,
    k: usize,
    folds: usize,
    seed: u64,
) -> Result<ExperimentOutcome> {
    let clean = remove_missing(d);
    if clean.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let k = strategy.forced_k().unwrap_or(k);
    if k == 0 {
        return Err(Error::InvalidArgument("K must be at least 1".into()));
    }
    if strategy.requires_size() && clean.schema.size_predictor().is_none() {
        return Err(Error::MissingSizeColumn(strategy.token()));
    }
    let plan = make_folds(&clean, folds, seed)?;
    let mut pairs = Vec::with_capacity(clean.len());
    let mut floored = 0usize;
    for fold in 0..folds {
        let train_raw = subset(&clean, &plan.train_indices(fold));
        let test_raw = subset(&clean, &plan.test_indices(fold));
        if train_raw.len() < k {
            return Err(Error::NotEnoughNeighbors {
                requested: k,
                available: train_raw.len(),
            });
        }
        let normalizer = fit_normalizer(&train_raw)?;
        let train = apply_normalizer(&normalizer, &train_raw)?;
        let test = apply_normalizer(&normalizer, &test_raw)?;
        let train_efforts: Vec<f64> = train_raw.projects.iter().map(|p| p.effort).collect();
        let train_sizes = if strategy.requires_size() {
            train_raw.size_values(strategy.token())?
        } else {
            Vec::new()
        };
        let test_sizes = if strategy.requires_size() {
            test_raw.size_values(strategy.token())?
        } else {
            Vec::new()
        };

        // Fold-level contexts, built once and shared across targets.
        let rtm_ctx: Option<RtmContext> = match strategy {
            Strategy::Rtm => Some(build_rtm_context(&train, &train_sizes)?),
            _ => None,
        };
        let tree: Option<ModelTree> = match strategy {
            Strategy::ModelTree => {
                let table = build_difference_table(&train)?;
                let matrix = table.to_training_matrix()?;
                Some(ModelTree::build(&matrix, &TreeParams::default())?)
            }
            _ => None,
        };

        for (t_idx, target) in test.projects.iter().enumerate() {
            let predicted = match strategy {
                Strategy::Eba => {
                    let nn = nearest_neighbors(target, &train.projects, &train.schema, k)?;
                    estimate_eba(&nn, &train_efforts)?
                }
                Strategy::WeightedMean => {
                    let nn = nearest_neighbors(target, &train.projects, &train.schema, k)?;
                    estimate_weighted_mean(&nn, &train_efforts)?
                }
                Strategy::Similarity => {
                    let nn = nearest_neighbors(target, &train.projects, &train.schema, k)?;
                    estimate_similarity(&nn, &train_efforts)?
                }
                Strategy::LinearSize => {
                    let nn = nearest_neighbors(target, &train.projects, &train.schema, k)?;
                    let analogies: Vec<(f64, f64)> = nn
                        .neighbors
                        .iter()
                        .map(|n| (train_efforts[n.project_index], train_sizes[n.project_index]))
                        .collect();
                    estimate_linear_size(test_sizes[t_idx], &analogies)?
                }
                Strategy::Mendes => {
                    let nn = nearest_neighbors(target, &train.projects, &train.schema, k)?;
                    let analogies: Vec<(f64, Vec<f64>)> = nn
                        .neighbors
                        .iter()
                        .map(|n| {
                            (
                                train_efforts[n.project_index],
                                vec![train_sizes[n.project_index]],
                            )
                        })
                        .collect();
                    estimate_mendes_rules(&[test_sizes[t_idx]], &analogies)?
                }
                Strategy::Rtm => {
                    let nn = nearest_neighbors(target, &train.projects, &train.schema, 1)?;
                    let a = nn.closest()?.project_index;
                    estimate_rtm(train_efforts[a], train_sizes[a], &rtm_ctx.unwrap())?
                }
                Strategy::ModelTree => {
                    let est = estimate_mt(target, &train, tree.as_ref().unwrap(), k)?;
                    if est == crate::adaptation::EFFORT_FLOOR {
                        floored += 1;
                    }
                    est
                }
            };
            pairs.push(PredictionPair {
                id: target.id.clone(),
                actual: target.effort,
                predicted,
            });
        }
    }
    let report = summarize(&pairs)?;
    Ok(ExperimentOutcome {
        pairs,
        report,
        floored,
    })
}

/// Outcome of a paired Wilcoxon signed-rank test (normal approximation with
/// mid-rank ties and tie correction). Negative z means the first sample's
/// values are smaller.
#[derive(Debug, Clone, Copy)]
pub struct WilcoxonResult {
    pub z: f64,
    pub p: f64,
    pub n_effective: usize,
    /// True when fewer than 6 non-zero differences remained; p is then
    /// reported as 1.
    pub low_n: bool,
}

/// Standard normal CDF via an erf approximation (max error ~1.5e-7).
fn normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + erf(z / std::f64::consts::SQRT_2))
}

fn erf(x: f64) -> f64 {
    // Abramowitz & Stegun 7.1.26
    let sign = if x < 0.0 { -1.0 } else { 1.0 };
    let x = x.abs();
    let t = 1.0 / (1.0 + 0.3275911 * x);
    let y = 1.0
        - (((((1.061405429 * t - 1.453152027) * t) + 1.421413741) * t - 0.284496736) * t
            + 0.254829592)
            * t
            * (-x * x).exp();
    sign * y
}

/// Mid-ranks of the absolute differences.
fn mid_ranks(abs_diffs: &[f64]) -> (Vec<f64>, f64) {
    let n = abs_diffs.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| abs_diffs[a].partial_cmp(&abs_diffs[b]).unwrap());
    let mut ranks = vec![0.0; n];
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && abs_diffs[order[j + 1]] == abs_diffs[order[i]] {
            j += 1;
        }
        let avg_rank = (i + j + 2) as f64 / 2.0; // ranks are 1-based
        for &idx in &order[i..=j] {
            ranks[idx] = avg_rank;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * (t + 1.0) * (t - 1.0); // t^3 - t
        i = j + 1;
    }
    (ranks, tie_term)
}

/// Paired test on a_i − b_i.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<WilcoxonResult> {
    if a.len() != b.len() {
        return Err(Error::InvalidArgument(format!(
            "paired samples differ in length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    let diffs: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| x - y)
        .filter(|d| *d != 0.0)
        .collect();
    let n = diffs.len();
    if n < 6 {
        return Ok(WilcoxonResult {
            z: 0.0,
            p: 1.0,
            n_effective: n,
            low_n: true,
        });
    }
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let (ranks, tie_term) = mid_ranks(&abs);
    let w_pos: f64 = diffs
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| r)
        .sum();
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    if var <= 0.0 {
        return Ok(WilcoxonResult {
            z: 0.0,
            p: 1.0,
            n_effective: n,
            low_n: false,
        });
    }
    let z = (w_pos - mean) / var.sqrt();
    // Continuity correction: W is integer-valued, so back off half a step
    // before looking up the tail. This roughly halves the approximation
    // error against exact enumeration for small n.
    let z_corrected = (w_pos - mean).abs().max(0.5) - 0.5;
    let p = (2.0 * (1.0 - normal_cdf(z_corrected / var.sqrt()))).min(1.0);
    Ok(WilcoxonResult {
        z,
        p,
        n_effective: n,
        low_n: false,
    })
}

/// Five-number summary with 1.5·IQR whiskers.
#[derive(Debug, Clone)]
pub struct BoxplotStats {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    /// Most extreme data points still within 1.5·IQR of the quartiles.
    pub lower_whisker: f64,
    pub upper_whisker: f64,
    pub outliers: Vec<f64>,
}

/// Quartiles by the median-of-halves rule (odd n excludes the overall
/// median from both halves).
pub fn boxplot_stats(values: &[f64]) -> Result<BoxplotStats> {
    if values.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    let med = median(&sorted);
    let (lower, upper) = if n == 1 {
        (&sorted[..], &sorted[..])
    } else if n % 2 == 0 {
        (&sorted[..n / 2], &sorted[n / 2..])
    } else {
        (&sorted[..n / 2], &sorted[n / 2 + 1..])
    };
    let q1 = median(lower);
    let q3 = median(upper);
    let iqr = q3 - q1;
    let lo_fence = q1 - 1.5 * iqr;
    let hi_fence = q3 + 1.5 * iqr;
    let inside: Vec<f64> = sorted
        .iter()
        .copied()
        .filter(|&v| v >= lo_fence && v <= hi_fence)
        .collect();
    let outliers: Vec<f64> = sorted
        .iter()
        .copied()
        .filter(|&v| v < lo_fence || v > hi_fence)
        .collect();
    Ok(BoxplotStats {
        min: sorted[0],
        q1,
        median: med,
        q3,
        lower_whisker: inside.first().copied().unwrap_or(q1),
        upper_whisker: inside.last().copied().unwrap_or(q3),
        outliers,
    })
}
