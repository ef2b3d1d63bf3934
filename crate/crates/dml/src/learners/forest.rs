//! Bagged CART trees: regression by variance reduction, classification by
//! Gini impurity. Each tree fits a bootstrap resample; each split considers
//! `mtry` features sampled without replacement.

use ndarray::{Array1, ArrayView1, ArrayView2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{Predictor, Task, DEFAULT_CLIP_EPS};
use crate::error::{Error, Result};
use crate::rng::substream;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ForestParams {
    pub num_trees: usize,
    pub mtry: usize,
    pub min_node_size: usize,
    pub max_depth: usize,
    pub task: Task,
}

#[derive(Debug, Clone)]
enum Node {
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    Leaf { value: f64 },
}

#[derive(Debug, Clone)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn predict_row(&self, row: ArrayView1<'_, f64>) -> f64 {
        let mut at = 0usize;
        loop {
            match self.nodes[at] {
                Node::Leaf { value } => return value,
                Node::Split { feature, threshold, left, right } => {
                    at = if row[feature] <= threshold { left } else { right };
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct ForestPredictor {
    trees: Vec<Tree>,
    task: Task,
    clip_eps: f64,
}

impl ForestPredictor {
    pub fn with_clip_eps(mut self, clip_eps: f64) -> Self {
        self.clip_eps = clip_eps;
        self
    }
}

impl Predictor for ForestPredictor {
    fn predict(&self, x: ArrayView2<'_, f64>) -> Array1<f64> {
        let mut out = Array1::zeros(x.nrows());
        for tree in &self.trees {
            for (o, row) in out.iter_mut().zip(x.rows()) {
                *o += tree.predict_row(row);
            }
        }
        out /= self.trees.len() as f64;
        if self.task == Task::Classification {
            out.mapv_inplace(|v| v.clamp(self.clip_eps, 1.0 - self.clip_eps));
        }
        out
    }
}

struct TreeBuilder<'a> {
    x: ArrayView2<'a, f64>,
    y: ArrayView1<'a, f64>,
    params: &'a ForestParams,
    rng: ChaCha8Rng,
    feature_pool: Vec<usize>,
    nodes: Vec<Node>,
    // scratch for the per-feature sort at each node
    pairs: Vec<(f64, f64)>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    score: f64,
}

impl<'a> TreeBuilder<'a> {
    fn leaf_value(&self, samples: &[usize]) -> f64 {
        let sum: f64 = samples.iter().map(|&i| self.y[i]).sum();
        sum / samples.len() as f64
    }

    /// Weighted child impurity: sum of squared errors for regression,
    /// `n_l g_l + n_r g_r` with Gini `g` for classification. Both reduce to
    /// `sumsq - sum^2/n` bookkeeping on the sorted targets (for binary
    /// targets, `sum^2/n` is all that varies).
    fn best_split(&mut self, samples: &[usize]) -> Option<BestSplit> {
        let p = self.x.ncols();
        let mtry = self.params.mtry.min(p);
        // partial Fisher-Yates over the feature pool
        for k in 0..mtry {
            let j = k + self.rng.random_range(0..p - k);
            self.feature_pool.swap(k, j);
        }

        let n = samples.len() as f64;
        let total_sum: f64 = samples.iter().map(|&i| self.y[i]).sum();
        let total_sumsq: f64 = samples.iter().map(|&i| self.y[i] * self.y[i]).sum();
        let parent_score = total_sumsq - total_sum * total_sum / n;

        let mut best: Option<BestSplit> = None;
        for ci in 0..mtry {
            let f = self.feature_pool[ci];
            self.pairs.clear();
            self.pairs.extend(samples.iter().map(|&i| (self.x[[i, f]], self.y[i])));
            self.pairs.sort_unstable_by(|a, b| a.0.partial_cmp(&b.0).expect("finite features"));

            let mut left_sum = 0.0;
            let mut left_sumsq = 0.0;
            let min_size = self.params.min_node_size;
            for s in 0..self.pairs.len() - 1 {
                let (v, yv) = self.pairs[s];
                left_sum += yv;
                left_sumsq += yv * yv;
                let next_v = self.pairs[s + 1].0;
                if v == next_v {
                    continue;
                }
                let n_left = s + 1;
                let n_right = self.pairs.len() - n_left;
                if n_left < min_size || n_right < min_size {
                    continue;
                }
                let right_sum = total_sum - left_sum;
                let right_sumsq = total_sumsq - left_sumsq;
                let score = (left_sumsq - left_sum * left_sum / n_left as f64)
                    + (right_sumsq - right_sum * right_sum / n_right as f64);
                if best.as_ref().is_none_or(|b| score < b.score) {
                    best = Some(BestSplit { feature: f, threshold: 0.5 * (v + next_v), score });
                }
            }
        }
        // require strict improvement so constant targets stay leaves
        best.filter(|b| b.score < parent_score - 1e-12)
    }

    fn build(&mut self, samples: Vec<usize>, depth: usize) -> usize {
        let at = self.nodes.len();
        self.nodes.push(Node::Leaf { value: 0.0 });

        let splittable = depth < self.params.max_depth
            && samples.len() >= 2 * self.params.min_node_size
            && !self.is_pure(&samples);
        if splittable {
            if let Some(split) = self.best_split(&samples) {
                let (left_samples, right_samples): (Vec<usize>, Vec<usize>) = samples
                    .iter()
                    .partition(|&&i| self.x[[i, split.feature]] <= split.threshold);
                let left = self.build(left_samples, depth + 1);
                let right = self.build(right_samples, depth + 1);
                self.nodes[at] =
                    Node::Split { feature: split.feature, threshold: split.threshold, left, right };
                return at;
            }
        }
        self.nodes[at] = Node::Leaf { value: self.leaf_value(&samples) };
        at
    }

    fn is_pure(&self, samples: &[usize]) -> bool {
        let first = self.y[samples[0]];
        samples.iter().all(|&i| self.y[i] == first)
    }
}

/// Fits `num_trees` trees on independent bootstrap resamples. Tree `t`
/// draws from the substream `(seed, t)`, so fits are reproducible and
/// independent of evaluation order.
pub fn fit_random_forest(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    params: &ForestParams,
    seed: u64,
) -> Result<ForestPredictor> {
    let n = x.nrows();
    if n != y.len() {
        return Err(Error::LengthMismatch(format!("{n} rows vs {} targets", y.len())));
    }
    if n == 0 {
        return Err(Error::LengthMismatch("empty sample".into()));
    }
    let p = x.ncols();
    if params.mtry > p {
        return Err(Error::InvalidLearnerSpec(format!(
            "mtry = {} exceeds the number of features {p}",
            params.mtry
        )));
    }
    if params.task == Task::Classification {
        for v in y {
            if *v != 0.0 && *v != 1.0 {
                return Err(Error::InvalidLearnerSpec(format!(
                    "classification forest needs a 0/1 response, found {v}"
                )));
            }
        }
    }

    let mut trees = Vec::with_capacity(params.num_trees);
    for t in 0..params.num_trees {
        let mut rng = substream(seed, &[TREE_STREAM, t as u64]);
        let samples: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        let mut builder = TreeBuilder {
            x,
            y,
            params,
            rng,
            feature_pool: (0..p).collect(),
            nodes: Vec::new(),
            pairs: Vec::with_capacity(n),
        };
        builder.build(samples, 0);
        trees.push(Tree { nodes: builder.nodes });
    }
    Ok(ForestPredictor { trees, task: params.task, clip_eps: DEFAULT_CLIP_EPS })
}

const TREE_STREAM: u64 = 0x5452_4545;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use ndarray::Array2;
    use rand_distr::StandardNormal;

    fn regression_params() -> ForestParams {
        ForestParams { num_trees: 25, mtry: 3, min_node_size: 2, max_depth: 6, task: Task::Regression }
    }

    /// A single stump on a perfectly separating binary feature predicts the
    /// two group means exactly (targets are constant within groups, so any
    /// bootstrap resample has the same group means).
    #[test]
    fn one_stump_recovers_group_means() {
        let n = 24;
        let x = Array2::from_shape_fn((n, 1), |(i, _)| if i % 2 == 0 { 0.0 } else { 1.0 });
        let y: Array1<f64> = (0..n).map(|i| if i % 2 == 0 { -1.5 } else { 2.5 }).collect();
        let params = ForestParams {
            num_trees: 1,
            mtry: 1,
            min_node_size: 1,
            max_depth: 1,
            task: Task::Regression,
        };
        let fit = fit_random_forest(x.view(), y.view(), &params, 3).unwrap();
        let pred = fit.predict(x.view());
        for i in 0..n {
            let expected = if i % 2 == 0 { -1.5 } else { 2.5 };
            assert_eq!(pred[i], expected);
        }
    }

    #[test]
    fn constant_target_predicts_constant() {
        let mut rng = substream(1, &[7]);
        let x = Array2::from_shape_fn((30, 4), |_| rand::Rng::sample::<f64, _>(&mut rng, StandardNormal));
        let y = Array1::from_elem(30, 3.25);
        let fit = fit_random_forest(x.view(), y.view(), &regression_params(), 5).unwrap();
        for v in fit.predict(x.view()) {
            assert_eq!(v, 3.25);
        }
    }

    #[test]
    fn same_seed_same_predictions() {
        let mut rng = substream(2, &[8]);
        let x = Array2::from_shape_fn((60, 5), |_| rand::Rng::sample::<f64, _>(&mut rng, StandardNormal));
        let y: Array1<f64> = x.column(0).to_owned() * 2.0
            + Array1::from_shape_fn(60, |_| rand::Rng::sample::<f64, _>(&mut rng, StandardNormal));
        let a = fit_random_forest(x.view(), y.view(), &regression_params(), 11).unwrap();
        let b = fit_random_forest(x.view(), y.view(), &regression_params(), 11).unwrap();
        assert_eq!(a.predict(x.view()), b.predict(x.view()));
        let c = fit_random_forest(x.view(), y.view(), &regression_params(), 12).unwrap();
        assert_ne!(a.predict(x.view()), c.predict(x.view()));
    }

    #[test]
    fn regression_predictions_stay_in_target_range() {
        let mut rng = substream(3, &[9]);
        let x = Array2::from_shape_fn((80, 3), |_| rand::Rng::sample::<f64, _>(&mut rng, StandardNormal));
        let y: Array1<f64> =
            Array1::from_shape_fn(80, |_| rand::Rng::sample::<f64, _>(&mut rng, StandardNormal));
        let fit = fit_random_forest(x.view(), y.view(), &regression_params(), 4).unwrap();
        let (lo, hi) = y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(*v), hi.max(*v))
        });
        for v in fit.predict(x.view()) {
            assert!(v >= lo && v <= hi);
        }
    }

    #[test]
    fn classification_returns_clipped_proportions() {
        let n = 40;
        let x = Array2::from_shape_fn((n, 1), |(i, _)| if i < n / 2 { 0.0 } else { 1.0 });
        let y: Array1<f64> = (0..n).map(|i| if i < n / 2 { 0.0 } else { 1.0 }).collect();
        let params = ForestParams {
            num_trees: 10,
            mtry: 1,
            min_node_size: 1,
            max_depth: 3,
            task: Task::Classification,
        };
        let fit = fit_random_forest(x.view(), y.view(), &params, 2).unwrap();
        let pred = fit.predict(x.view());
        assert!(pred[0] <= 0.01 + 1e-12);
        assert!(pred[n - 1] >= 0.99 - 1e-12);
    }

    #[test]
    fn mtry_larger_than_p_is_rejected() {
        let x = Array2::zeros((10, 2));
        let y = Array1::zeros(10);
        let params = ForestParams { num_trees: 1, mtry: 3, min_node_size: 1, max_depth: 2, task: Task::Regression };
        assert!(fit_random_forest(x.view(), y.view(), &params, 0).is_err());
    }
}
