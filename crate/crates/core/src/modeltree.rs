//! M5-style model tree: binary recursive partitioning on standard-deviation
//! reduction, linear models at every node, bottom-up pruning against an
//! adjusted error estimate, and smoothing of predictions along the path back
//! to the root.
//!
//! Inputs are always numeric here; categorical differences arrive pre-encoded
//! as 0/1 indicators, so 0/1 threshold splits play the role of categorical
//! splits.

use crate::{Error, Result};

/// Rows of (input vector, output) pairs with input column names.
#[derive(Debug, Clone)]
pub struct TrainingMatrix {
    pub inputs: Vec<Vec<f64>>,
    pub outputs: Vec<f64>,
    pub names: Vec<String>,
}

impl TrainingMatrix {
    pub fn new(inputs: Vec<Vec<f64>>, outputs: Vec<f64>, names: Vec<String>) -> Result<Self> {
        if inputs.is_empty() || inputs.len() != outputs.len() {
            return Err(Error::EmptyMatrix);
        }
        let m = names.len();
        if m == 0 || inputs.iter().any(|r| r.len() != m) {
            return Err(Error::InvalidArgument(
                "all rows must have one value per named input".into(),
            ));
        }
        Ok(TrainingMatrix {
            inputs,
            outputs,
            names,
        })
    }

    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }

    pub fn arity(&self) -> usize {
        self.names.len()
    }
}

/// Linear model over a retained subset of the inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub intercept: f64,
    /// (input index, coefficient) pairs; inputs not listed have coefficient 0.
    pub terms: Vec<(usize, f64)>,
}

impl LinearModel {
    pub fn constant(value: f64) -> Self {
        LinearModel {
            intercept: value,
            terms: Vec::new(),
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .fold(self.intercept, |acc, &(j, c)| acc + c * x[j])
    }

    /// Number of fitted parameters (intercept plus retained coefficients).
    fn param_count(&self) -> usize {
        1 + self.terms.len()
    }

    fn format(&self, names: &[String]) -> String {
        let mut s = format!("y = {}", self.intercept);
        for &(j, c) in &self.terms {
            if c < 0.0 {
                s.push_str(&format!(" - {}*{}", -c, names[j]));
            } else {
                s.push_str(&format!(" + {}*{}", c, names[j]));
            }
        }
        s
    }
}

/// Induction parameters. Defaults follow the classic M5 settings: minimum
/// leaf size 4, stop when node sd drops below 5% of the root sd, smoothing
/// constant 15, adjusted-error factor (n + v)/(n − v).
#[derive(Debug, Clone, Copy)]
pub struct TreeParams {
    pub min_leaf: usize,
    pub sd_stop_fraction: f64,
    pub smoothing_k: f64,
    pub prune: bool,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            min_leaf: 4,
            sd_stop_fraction: 0.05,
            smoothing_k: 15.0,
            prune: true,
        }
    }
}

/// A node of the built tree. Rows with value ≤ threshold go left.
#[derive(Debug, Clone)]
pub enum Node {
    Split {
        input: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
        /// Model fitted on this node's own training rows (used by smoothing
        /// and as the collapse candidate during pruning).
        model: LinearModel,
        n: usize,
        /// Adjusted error of `model` on this node's training rows.
        model_error: f64,
    },
    Leaf {
        model: LinearModel,
        n: usize,
        model_error: f64,
    },
}

impl Node {
    pub fn n(&self) -> usize {
        match self {
            Node::Split { n, .. } | Node::Leaf { n, .. } => *n,
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            Node::Leaf { .. } => 1,
            Node::Split { left, right, .. } => left.leaf_count() + right.leaf_count(),
        }
    }

    /// Size-weighted adjusted error of the (possibly pruned) subtree.
    fn subtree_error(&self) -> f64 {
        match self {
            Node::Leaf { model_error, .. } => *model_error,
            Node::Split { left, right, n, .. } => {
                (left.n() as f64 * left.subtree_error() + right.n() as f64 * right.subtree_error())
                    / *n as f64
            }
        }
    }
}

/// A built model tree, ready for prediction.
#[derive(Debug, Clone)]
pub struct ModelTree {
    root: Node,
    arity: usize,
    names: Vec<String>,
    smoothing_k: f64,
}

/// Population standard deviation.
fn pop_sd(values: impl ExactSizeIterator<Item = f64> + Clone) -> f64 {
    let n = values.len();
    if n == 0 {
        return 0.0;
    }
    let mean = values.clone().sum::<f64>() / n as f64;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    var.sqrt()
}

/// Standard deviation reduction of splitting `rows` of `m` on
/// `input_index ≤ threshold`: sd(T) − Σ |T_i|/|T| · sd(T_i).
pub fn sd_reduction(m: &TrainingMatrix, input_index: usize, threshold: f64) -> Result<f64> {
    let (mut left, mut right) = (Vec::new(), Vec::new());
    for (row, &y) in m.inputs.iter().zip(&m.outputs) {
        if row[input_index] <= threshold {
            left.push(y);
        } else {
            right.push(y);
        }
    }
    if left.is_empty() || right.is_empty() {
        return Err(Error::DegenerateSplit);
    }
    let n = m.len() as f64;
    let parent = pop_sd(m.outputs.iter().copied());
    let weighted = left.len() as f64 / n * pop_sd(left.iter().copied())
        + right.len() as f64 / n * pop_sd(right.iter().copied());
    Ok(parent - weighted)
}

/// Solve the normal equations for OLS over the selected input columns.
/// Returns None when the system is singular.
fn solve_ols(
    inputs: &[&Vec<f64>],
    outputs: &[f64],
    selected: &[usize],
) -> Option<(f64, Vec<f64>)> {
    let n = inputs.len();
    let m = selected.len();
    let dim = m + 1;
    // a = X'X (intercept column first), b = X'y
    let mut a = vec![vec![0.0f64; dim]; dim];
    let mut b = vec![0.0f64; dim];
    for (row, &y) in inputs.iter().zip(outputs) {
        let mut x = Vec::with_capacity(dim);
        x.push(1.0);
        x.extend(selected.iter().map(|&j| row[j]));
        for i in 0..dim {
            for j in 0..dim {
                a[i][j] += x[i] * x[j];
            }
            b[i] += x[i] * y;
        }
    }
    // Gaussian elimination with partial pivoting.
    let scale = (n as f64).max(a.iter().flatten().fold(0.0f64, |s, v| s.max(v.abs())));
    for col in 0..dim {
        let pivot_row = (col..dim)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if a[pivot_row][col].abs() < 1e-10 * scale.max(1.0) {
            return None;
        }
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        for row in col + 1..dim {
            let f = a[row][col] / a[col][col];
            for k in col..dim {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut sol = vec![0.0f64; dim];
    for row in (0..dim).rev() {
        let mut v = b[row];
        for k in row + 1..dim {
            v -= a[row][k] * sol[k];
        }
        sol[row] = v / a[row][row];
    }
    if sol.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some((sol[0], sol[1..].to_vec()))
}

/// Adjusted error of a model over rows: (n + v)/(n − v) × mean |residual|,
/// with v the number of fitted parameters. Infinite when n ≤ v.
fn adjusted_error(model: &LinearModel, inputs: &[&Vec<f64>], outputs: &[f64]) -> f64 {
    let n = inputs.len();
    let v = model.param_count();
    let mut mean_abs = inputs
        .iter()
        .zip(outputs)
        .map(|(x, &y)| (y - model.predict(x)).abs())
        .sum::<f64>()
        / n as f64;
    // Residuals at rounding-noise level count as an exact fit; otherwise
    // pruning decisions on noiseless data hinge on 1e-16 differences.
    let scale = outputs.iter().map(|y| y.abs()).fold(0.0f64, f64::max);
    if mean_abs <= 1e-12 * scale.max(1.0) {
        mean_abs = 0.0;
    }
    if n > v {
        (n + v) as f64 / (n - v) as f64 * mean_abs
    } else if mean_abs == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

fn mean_model(outputs: &[f64]) -> LinearModel {
    LinearModel::constant(outputs.iter().sum::<f64>() / outputs.len() as f64)
}

/// Fit an OLS model on the rows, then greedily drop inputs while the
/// adjusted error does not increase. Falls back to the output mean when the
/// sample is too small or the normal system is singular.
pub fn fit_leaf_model(inputs: &[&Vec<f64>], outputs: &[f64], arity: usize) -> LinearModel {
    let n = inputs.len();
    if n == 0 {
        return LinearModel::constant(0.0);
    }
    if n < arity + 2 {
        return mean_model(outputs);
    }
    let mut selected: Vec<usize> = (0..arity).collect();
    let mut model = match solve_ols(inputs, outputs, &selected) {
        Some((intercept, coefs)) => LinearModel {
            intercept,
            terms: selected.iter().copied().zip(coefs).collect(),
        },
        None => return mean_model(outputs),
    };
    let mut err = adjusted_error(&model, inputs, outputs);
    loop {
        let mut best: Option<(LinearModel, f64, usize)> = None;
        for drop_pos in 0..selected.len() {
            let mut reduced = selected.clone();
            reduced.remove(drop_pos);
            let candidate = if reduced.is_empty() {
                mean_model(outputs)
            } else {
                match solve_ols(inputs, outputs, &reduced) {
                    Some((intercept, coefs)) => LinearModel {
                        intercept,
                        terms: reduced.iter().copied().zip(coefs).collect(),
                    },
                    None => continue,
                }
            };
            let cand_err = adjusted_error(&candidate, inputs, outputs);
            if best.as_ref().map_or(true, |(_, e, _)| cand_err < *e) {
                best = Some((candidate, cand_err, drop_pos));
            }
        }
        match best {
            Some((candidate, cand_err, drop_pos)) if cand_err <= err => {
                selected.remove(drop_pos);
                model = candidate;
                err = cand_err;
                if selected.is_empty() {
                    break;
                }
            }
            _ => break,
        }
    }
    model
}

struct Builder<'a> {
    m: &'a TrainingMatrix,
    params: TreeParams,
    root_sd: f64,
}

impl Builder<'_> {
    fn fit_node_model(&self, rows: &[usize]) -> (LinearModel, f64) {
        let inputs: Vec<&Vec<f64>> = rows.iter().map(|&i| &self.m.inputs[i]).collect();
        let outputs: Vec<f64> = rows.iter().map(|&i| self.m.outputs[i]).collect();
        let model = fit_leaf_model(&inputs, &outputs, self.m.arity());
        let err = adjusted_error(&model, &inputs, &outputs);
        (model, err)
    }

    /// Best (input, threshold) by sd reduction; ties broken by lower input
    /// index, then lower threshold (strict improvement keeps the first).
    fn best_split(&self, rows: &[usize]) -> Option<(usize, f64, f64)> {
        let outputs: Vec<f64> = rows.iter().map(|&i| self.m.outputs[i]).collect();
        let parent_sd = pop_sd(outputs.iter().copied());
        let n = rows.len() as f64;
        let mut best: Option<(usize, f64, f64)> = None;
        for input in 0..self.m.arity() {
            let mut order: Vec<usize> = rows.to_vec();
            order.sort_by(|&a, &b| {
                self.m.inputs[a][input]
                    .partial_cmp(&self.m.inputs[b][input])
                    .unwrap()
            });
            let sorted_vals: Vec<f64> = order.iter().map(|&i| self.m.inputs[i][input]).collect();
            let sorted_outs: Vec<f64> = order.iter().map(|&i| self.m.outputs[i]).collect();
            // Prefix sums let each candidate threshold be scored in O(1).
            let mut sum = 0.0;
            let mut sumsq = 0.0;
            let prefix: Vec<(f64, f64)> = sorted_outs
                .iter()
                .map(|&y| {
                    sum += y;
                    sumsq += y * y;
                    (sum, sumsq)
                })
                .collect();
            let total = prefix.last().copied().unwrap_or((0.0, 0.0));
            for cut in 1..order.len() {
                if sorted_vals[cut] <= sorted_vals[cut - 1] {
                    continue; // not a boundary between distinct values
                }
                if cut < self.params.min_leaf || order.len() - cut < self.params.min_leaf {
                    continue;
                }
                let threshold = (sorted_vals[cut - 1] + sorted_vals[cut]) / 2.0;
                let (ls, lss) = prefix[cut - 1];
                let (rs, rss) = (total.0 - ls, total.1 - lss);
                let nl = cut as f64;
                let nr = n - nl;
                let sd_l = ((lss / nl - (ls / nl).powi(2)).max(0.0)).sqrt();
                let sd_r = ((rss / nr - (rs / nr).powi(2)).max(0.0)).sqrt();
                let reduction = parent_sd - (nl / n * sd_l + nr / n * sd_r);
                if reduction > 0.0 && best.map_or(true, |(_, _, r)| reduction > r) {
                    best = Some((input, threshold, reduction));
                }
            }
        }
        best
    }

    fn build(&self, rows: &[usize]) -> Node {
        let (model, model_error) = self.fit_node_model(rows);
        let n = rows.len();
        let outputs: Vec<f64> = rows.iter().map(|&i| self.m.outputs[i]).collect();
        let sd = pop_sd(outputs.iter().copied());
        if n < 2 * self.params.min_leaf || sd < self.params.sd_stop_fraction * self.root_sd {
            return Node::Leaf {
                model,
                n,
                model_error,
            };
        }
        let Some((input, threshold, _)) = self.best_split(rows) else {
            return Node::Leaf {
                model,
                n,
                model_error,
            };
        };
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&i| self.m.inputs[i][input] <= threshold);
        let left = Box::new(self.build(&left_rows));
        let right = Box::new(self.build(&right_rows));
        Node::Split {
            input,
            threshold,
            left,
            right,
            model,
            n,
            model_error,
        }
    }
}

/// Bottom-up pruning: collapse a split to a leaf whenever the node model's
/// adjusted error is no worse than the size-weighted adjusted error of its
/// subtree. Never increases the leaf count.
pub fn prune(node: Node) -> Node {
    match node {
        leaf @ Node::Leaf { .. } => leaf,
        Node::Split {
            input,
            threshold,
            left,
            right,
            model,
            n,
            model_error,
        } => {
            let left = prune(*left);
            let right = prune(*right);
            let subtree_error = (left.n() as f64 * left.subtree_error()
                + right.n() as f64 * right.subtree_error())
                / n as f64;
            if model_error <= subtree_error {
                Node::Leaf {
                    model,
                    n,
                    model_error,
                }
            } else {
                Node::Split {
                    input,
                    threshold,
                    left: Box::new(left),
                    right: Box::new(right),
                    model,
                    n,
                    model_error,
                }
            }
        }
    }
}

impl ModelTree {
    /// Grow (and by default prune) a model tree.
    pub fn build(m: &TrainingMatrix, params: &TreeParams) -> Result<ModelTree> {
        if m.is_empty() {
            return Err(Error::EmptyMatrix);
        }
        let root_sd = pop_sd(m.outputs.iter().copied());
        let builder = Builder {
            m,
            params: *params,
            root_sd,
        };
        let rows: Vec<usize> = (0..m.len()).collect();
        let mut root = builder.build(&rows);
        if params.prune {
            root = prune(root);
        }
        Ok(ModelTree {
            root,
            arity: m.arity(),
            names: m.names.clone(),
            smoothing_k: params.smoothing_k,
        })
    }

    pub fn leaf_count(&self) -> usize {
        self.root.leaf_count()
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    /// Predict with the tree's configured smoothing constant.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        self.predict_smoothed(x, self.smoothing_k)
    }

    /// Route to a leaf, then blend the value back up the path: at each
    /// ancestor p' = (n·p + k·q)/(n + k) with q the ancestor model's
    /// prediction and n its training row count.
    pub fn predict_smoothed(&self, x: &[f64], k: f64) -> Result<f64> {
        if x.len() != self.arity {
            return Err(Error::ArityMismatch {
                expected: self.arity,
                got: x.len(),
            });
        }
        let mut path: Vec<&Node> = Vec::new();
        let mut node = &self.root;
        loop {
            match node {
                Node::Leaf { model, .. } => {
                    let mut value = model.predict(x);
                    if k > 0.0 {
                        for ancestor in path.iter().rev() {
                            if let Node::Split { model, n, .. } = ancestor {
                                let q = model.predict(x);
                                value = (*n as f64 * value + k * q) / (*n as f64 + k);
                            }
                        }
                    }
                    return Ok(value);
                }
                Node::Split {
                    input,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    path.push(node);
                    node = if x[*input] <= *threshold { left } else { right };
                }
            }
        }
    }

    /// Textual dump: nested `if <name> <= <threshold>` / `else` lines, leaf
    /// model lines with their row counts, and a closing rule-count line.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        self.dump_node(&self.root, 0, &mut out);
        out.push_str(&format!(
            "Number of rules in the tree: {}\n",
            self.leaf_count()
        ));
        out
    }

    fn dump_node(&self, node: &Node, depth: usize, out: &mut String) {
        let pad = "  ".repeat(depth);
        match node {
            Node::Leaf { model, n, .. } => {
                out.push_str(&format!("{pad}{} ({n})\n", model.format(&self.names)));
            }
            Node::Split {
                input,
                threshold,
                left,
                right,
                ..
            } => {
                out.push_str(&format!("{pad}if {} <= {}\n", self.names[*input], threshold));
                self.dump_node(left, depth + 1, out);
                out.push_str(&format!("{pad}else\n"));
                self.dump_node(right, depth + 1, out);
            }
        }
    }
}
