//! Estimation strategies: conventional analogy reuse plus five adjustment
//! mechanisms, including the two-stage model-tree adaptation.
//!
//! Stage I of the model-tree strategy runs a jackknife pass over the training
//! fold: each project is paired with its closest analogy among the others,
//! and the per-attribute differences together with the raw effort difference
//! form one training row. A model tree fitted on those rows then predicts,
//! for a new target, the effort correction to add to the retrieved analogy's
//! effort.

use crate::dataset::{Dataset, FeatureKind, Project, Schema, Value};
use crate::modeltree::{ModelTree, TrainingMatrix};
use crate::neighbors::{nearest_neighbors, NeighborList};
use crate::{Error, Result};

/// Adapted efforts are floored here; the additive adjustment can otherwise
/// go negative.
pub const EFFORT_FLOOR: f64 = 1.0;

/// A named adaptation strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    /// Un-weighted mean of the retrieved efforts (null adaptation).
    Eba,
    /// Similarity-normalized weighted mean.
    WeightedMean,
    /// Linear size extrapolation from each analogy.
    LinearSize,
    /// Size-ratio adaptation rules.
    Mendes,
    /// Similarity-proportional adjustment.
    Similarity,
    /// Regression towards the mean productivity (closest analogy only).
    Rtm,
    /// Model-tree adjusted analogy.
    ModelTree,
}

impl Strategy {
    pub const ALL: [Strategy; 7] = [
        Strategy::Eba,
        Strategy::WeightedMean,
        Strategy::LinearSize,
        Strategy::Mendes,
        Strategy::Similarity,
        Strategy::Rtm,
        Strategy::ModelTree,
    ];

    pub fn parse(token: &str) -> Result<Self> {
        match token {
            "eba" => Ok(Strategy::Eba),
            "wmean" => Ok(Strategy::WeightedMean),
            "l-eba" => Ok(Strategy::LinearSize),
            "mendes" => Ok(Strategy::Mendes),
            "s-eba" => Ok(Strategy::Similarity),
            "r-eba" => Ok(Strategy::Rtm),
            "mt-eba" => Ok(Strategy::ModelTree),
            other => Err(Error::InvalidArgument(format!(
                "unknown strategy `{other}` (expected one of eba, wmean, l-eba, mendes, s-eba, r-eba, mt-eba)"
            ))),
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            Strategy::Eba => "eba",
            Strategy::WeightedMean => "wmean",
            Strategy::LinearSize => "l-eba",
            Strategy::Mendes => "mendes",
            Strategy::Similarity => "s-eba",
            Strategy::Rtm => "r-eba",
            Strategy::ModelTree => "mt-eba",
        }
    }

    /// Strategies that read the raw size attribute.
    pub fn requires_size(self) -> bool {
        matches!(
            self,
            Strategy::LinearSize | Strategy::Mendes | Strategy::Rtm
        )
    }

    /// The regression-towards-the-mean strategy always uses K = 1.
    pub fn forced_k(self) -> Option<usize> {
        match self {
            Strategy::Rtm => Some(1),
            _ => None,
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.token())
    }
}

fn neighbor_efforts(neighbors: &NeighborList, efforts: &[f64]) -> Result<Vec<f64>> {
    if neighbors.is_empty() {
        return Err(Error::EmptyNeighbors);
    }
    Ok(neighbors
        .neighbors
        .iter()
        .map(|n| efforts[n.project_index])
        .collect())
}

/// Arithmetic mean of the K retrieved efforts.
pub fn estimate_eba(neighbors: &NeighborList, efforts: &[f64]) -> Result<f64> {
    let e = neighbor_efforts(neighbors, efforts)?;
    Ok(e.iter().sum::<f64>() / e.len() as f64)
}

/// Weighted mean with normalized inverse-distance similarity weights.
pub fn estimate_weighted_mean(neighbors: &NeighborList, efforts: &[f64]) -> Result<f64> {
    let e = neighbor_efforts(neighbors, efforts)?;
    let total: f64 = neighbors.neighbors.iter().map(|n| n.similarity).sum();
    Ok(neighbors
        .neighbors
        .iter()
        .zip(&e)
        .map(|(n, effort)| n.similarity / total * effort)
        .sum())
}

/// Similarity-proportional adjustment: Σ SM·Effort / Σ SM. Identical in form
/// to the weighted mean but kept as its own strategy surface.
pub fn estimate_similarity(neighbors: &NeighborList, efforts: &[f64]) -> Result<f64> {
    let e = neighbor_efforts(neighbors, efforts)?;
    let total: f64 = neighbors.neighbors.iter().map(|n| n.similarity).sum();
    if total <= 0.0 {
        return Err(Error::InvalidArgument("similarity sum must be > 0".into()));
    }
    let weighted: f64 = neighbors
        .neighbors
        .iter()
        .zip(&e)
        .map(|(n, effort)| n.similarity * effort)
        .sum();
    Ok(weighted / total)
}

/// Linear size extrapolation Effort(p_a)/FP(p_a) × FP(p_t), applied per
/// analogy and averaged for K > 1. Sizes are raw (un-normalized) values.
pub fn estimate_linear_size(target_size: f64, analogies: &[(f64, f64)]) -> Result<f64> {
    if analogies.is_empty() {
        return Err(Error::EmptyNeighbors);
    }
    let mut sum = 0.0;
    for &(effort, size) in analogies {
        if size <= 0.0 {
            return Err(Error::DegenerateSize);
        }
        sum += effort / size * target_size;
    }
    Ok(sum / analogies.len() as f64)
}

/// Size-ratio rules: (1/K) Σ_i [(1/M) Σ_j f_jt/f_ji] · Effort(p_i), over the
/// designated size-like features (raw values, all > 0 on the analogy side).
pub fn estimate_mendes_rules(
    target_features: &[f64],
    analogies: &[(f64, Vec<f64>)],
) -> Result<f64> {
    if analogies.is_empty() {
        return Err(Error::EmptyNeighbors);
    }
    let m = target_features.len();
    if m == 0 {
        return Err(Error::MissingSizeColumn("mendes"));
    }
    let mut sum = 0.0;
    for (effort, feats) in analogies {
        let mut ratio = 0.0;
        for (ft, fi) in target_features.iter().zip(feats) {
            if *fi <= 0.0 {
                return Err(Error::DegenerateSize);
            }
            ratio += ft / fi;
        }
        sum += ratio / m as f64 * effort;
    }
    Ok(sum / analogies.len() as f64)
}

/// Fold-level context for regression-towards-the-mean adaptation.
#[derive(Debug, Clone, Copy)]
pub struct RtmContext {
    /// Mean effort/size productivity over the training fold.
    pub mean_productivity: f64,
    /// Jackknifed Pearson correlation between closest-analogy productivity
    /// and actual productivity, clamped to [−1, 1]; 0 when undefined.
    pub correlation: f64,
}

fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        None
    } else {
        Some(sxy / (sxx * syy).sqrt())
    }
}

/// Compute the productivity context from a training fold.
///
/// `training` must carry normalized features (they drive the jackknife
/// retrieval); `raw_sizes` are the un-normalized size values aligned to it.
pub fn build_rtm_context(training: &Dataset, raw_sizes: &[f64]) -> Result<RtmContext> {
    if training.len() < 3 {
        return Err(Error::InvalidArgument(
            "r-eba needs at least 3 training projects".into(),
        ));
    }
    if raw_sizes.len() != training.len() {
        return Err(Error::InvalidArgument(
            "raw size vector must align with the training set".into(),
        ));
    }
    let productivity: Vec<f64> = training
        .projects
        .iter()
        .zip(raw_sizes)
        .map(|(p, &s)| {
            if s <= 0.0 {
                Err(Error::DegenerateSize)
            } else {
                Ok(p.effort / s)
            }
        })
        .collect::<Result<_>>()?;
    let mean_productivity = productivity.iter().sum::<f64>() / productivity.len() as f64;

    // Jackknife: each project's closest analogy among the remaining N−1.
    let mut analogy_pr = Vec::with_capacity(training.len());
    for i in 0..training.len() {
        let mut pool: Vec<Project> = training.projects.clone();
        pool.remove(i);
        let nn = nearest_neighbors(&training.projects[i], &pool, &training.schema, 1)?;
        let mut j = nn.closest()?.project_index;
        if j >= i {
            j += 1; // undo the removal shift
        }
        analogy_pr.push(productivity[j]);
    }
    let correlation = pearson(&analogy_pr, &productivity)
        .map(|r| r.clamp(-1.0, 1.0))
        .unwrap_or(0.0);
    Ok(RtmContext {
        mean_productivity,
        correlation,
    })
}

/// FP(p_a) × [PR(p_a) + (M − PR(p_a)) × (1 − r)], raw units throughout.
pub fn estimate_rtm(analogy_effort: f64, analogy_size: f64, ctx: &RtmContext) -> Result<f64> {
    if analogy_size <= 0.0 {
        return Err(Error::DegenerateSize);
    }
    let pr = analogy_effort / analogy_size;
    let adjusted = pr + (ctx.mean_productivity - pr) * (1.0 - ctx.correlation);
    Ok(analogy_size * adjusted)
}

/// One jackknife row: per-attribute deltas against the closest analogy plus
/// the raw effort difference.
#[derive(Debug, Clone, PartialEq)]
pub struct DifferenceRecord {
    pub deltas: Vec<f64>,
    pub effort_delta: f64,
}

/// All jackknife rows for a training fold, one per project.
#[derive(Debug, Clone)]
pub struct DifferenceTable {
    pub records: Vec<DifferenceRecord>,
    pub names: Vec<String>,
}

impl DifferenceTable {
    pub fn to_training_matrix(&self) -> Result<TrainingMatrix> {
        TrainingMatrix::new(
            self.records.iter().map(|r| r.deltas.clone()).collect(),
            self.records.iter().map(|r| r.effort_delta).collect(),
            self.names.clone(),
        )
    }
}

/// Signed per-attribute difference vector between a target and an analogy.
/// Numeric columns give the raw value difference (of normalized features);
/// categorical columns give a 0/1 changed indicator.
pub fn difference_vector(target: &Project, analogy: &Project, schema: &Schema) -> Result<Vec<f64>> {
    let preds = schema.predictors();
    if target.features.len() != preds.len() || analogy.features.len() != preds.len() {
        return Err(Error::Schema("feature count mismatch".into()));
    }
    preds
        .iter()
        .enumerate()
        .map(|(j, pred)| match (pred.kind, &target.features[j], &analogy.features[j]) {
            (FeatureKind::Numeric, Value::Num(a), Value::Num(b)) => Ok(a - b),
            (FeatureKind::Categorical, Value::Cat(a), Value::Cat(b)) => {
                Ok(if a == b { 0.0 } else { 1.0 })
            }
            (kind, a, b) => Err(Error::KindMismatch(format!(
                "column {}: expected {kind:?}, got {a:?} vs {b:?}",
                pred.name
            ))),
        })
        .collect()
}

/// Jackknife pass over the training fold: pair each project with its closest
/// analogy among the rest and record the difference row.
pub fn build_difference_table(training: &Dataset) -> Result<DifferenceTable> {
    if training.len() < 2 {
        return Err(Error::InvalidArgument(
            "difference table needs at least 2 projects".into(),
        ));
    }
    let mut records = Vec::with_capacity(training.len());
    for i in 0..training.len() {
        let mut pool: Vec<Project> = training.projects.clone();
        pool.remove(i);
        let target = &training.projects[i];
        let nn = nearest_neighbors(target, &pool, &training.schema, 1)?;
        let analogy = &pool[nn.closest()?.project_index];
        records.push(DifferenceRecord {
            deltas: difference_vector(target, analogy, &training.schema)?,
            effort_delta: target.effort - analogy.effort,
        });
    }
    Ok(DifferenceTable {
        records,
        names: training.schema.predictor_names(),
    })
}

/// Model-tree adjusted estimate: for each of the K closest analogies, predict
/// the effort difference from the attribute deltas and add it to the
/// analogy's effort; average the K adapted efforts. Adapted efforts are
/// floored at [`EFFORT_FLOOR`].
pub fn estimate_mt(
    target: &Project,
    training: &Dataset,
    tree: &ModelTree,
    k: usize,
) -> Result<f64> {
    if k > training.len() {
        return Err(Error::NotEnoughNeighbors {
            requested: k,
            available: training.len(),
        });
    }
    let nn = nearest_neighbors(target, &training.projects, &training.schema, k)?;
    let mut sum = 0.0;
    for neighbor in &nn.neighbors {
        let analogy = &training.projects[neighbor.project_index];
        let deltas = difference_vector(target, analogy, &training.schema)?;
        let effort_delta = tree.predict(&deltas)?;
        sum += (analogy.effort + effort_delta).max(EFFORT_FLOOR);
    }
    Ok(sum / k as f64)
}
