//! Mixed-type distances between projects and exact nearest-neighbor
//! retrieval.
//!
//! The distance is Euclidean over the predictor columns: squared difference
//! for numeric features, a 0/1 mismatch indicator for categorical ones.
//! Similarity is the inverse-distance transform 1/(1 + d), so it lies in
//! (0, 1] and decreases monotonically with distance.

use crate::dataset::{FeatureKind, Project, Schema, Value};
use crate::{Error, Result};

/// One retrieved analogy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    /// Index into the pool passed to [`nearest_neighbors`].
    pub project_index: usize,
    pub distance: f64,
    pub similarity: f64,
}

/// Neighbors sorted ascending by distance, ties broken by ascending pool
/// index, so retrieval is deterministic for a fixed pool.
#[derive(Debug, Clone)]
pub struct NeighborList {
    pub neighbors: Vec<Neighbor>,
}

impl NeighborList {
    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }

    /// The rank-1 (closest) analogy.
    pub fn closest(&self) -> Result<&Neighbor> {
        self.neighbors.first().ok_or(Error::EmptyNeighbors)
    }
}

/// Per-feature contribution to the squared distance.
pub fn feature_delta(a: &Value, b: &Value, kind: FeatureKind) -> Result<f64> {
    match (kind, a, b) {
        (FeatureKind::Numeric, Value::Num(x), Value::Num(y)) => Ok((x - y) * (x - y)),
        (FeatureKind::Categorical, Value::Cat(x), Value::Cat(y)) => {
            Ok(if x == y { 0.0 } else { 1.0 })
        }
        _ => Err(Error::KindMismatch(format!(
            "expected two {kind:?} values, got {a:?} and {b:?}"
        ))),
    }
}

/// Euclidean distance over the predictor columns of the schema.
pub fn distance(p: &Project, q: &Project, schema: &Schema) -> Result<f64> {
    let preds = schema.predictors();
    if p.features.len() != preds.len() || q.features.len() != preds.len() {
        return Err(Error::Schema(format!(
            "projects have {}/{} features, schema declares {}",
            p.features.len(),
            q.features.len(),
            preds.len()
        )));
    }
    let mut sum = 0.0;
    for (j, pred) in preds.iter().enumerate() {
        sum += feature_delta(&p.features[j], &q.features[j], pred.kind)?;
    }
    Ok(sum.sqrt())
}

/// Similarity derived from a distance.
pub fn similarity(distance: f64) -> f64 {
    1.0 / (1.0 + distance)
}

/// Retrieve the K closest pool members by exhaustive scan.
///
/// The caller must exclude the target from the pool when the target is a
/// pool member.
pub fn nearest_neighbors(
    target: &Project,
    pool: &[Project],
    schema: &Schema,
    k: usize,
) -> Result<NeighborList> {
    if pool.is_empty() {
        return Err(Error::EmptyNeighbors);
    }
    if k == 0 || k > pool.len() {
        return Err(Error::NotEnoughNeighbors {
            requested: k,
            available: pool.len(),
        });
    }
    let mut scored = Vec::with_capacity(pool.len());
    for (i, q) in pool.iter().enumerate() {
        let d = distance(target, q, schema)?;
        scored.push(Neighbor {
            project_index: i,
            distance: d,
            similarity: similarity(d),
        });
    }
    scored.sort_by(|a, b| {
        a.distance
            .partial_cmp(&b.distance)
            .unwrap()
            .then(a.project_index.cmp(&b.project_index))
    });
    scored.truncate(k);
    Ok(NeighborList { neighbors: scored })
}
