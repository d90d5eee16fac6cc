use rand::Rng;

/// Least-squares regression tree with axis-aligned splits at midpoints
/// between consecutive distinct feature values.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<Node>,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "node", rename_all = "lowercase")]
pub enum Node {
    Leaf {
        value: f64,
    },
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Number of features drawn at random per node; `None` tries all.
    pub max_features: Option<usize>,
}

const TIE_EPS: f64 = 1e-10;

struct Builder<'a, R> {
    x: &'a [Vec<f64>],
    y: &'a [f64],
    params: TreeParams,
    rng: Option<&'a mut R>,
    nodes: Vec<Node>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    left: Vec<usize>,
    right: Vec<usize>,
}

impl<R: Rng> Builder<'_, R> {
    fn candidate_features(&mut self, d: usize) -> Vec<usize> {
        match (self.params.max_features, self.rng.as_deref_mut()) {
            (Some(m), Some(rng)) if m < d => {
                let mut f = rand::seq::index::sample(rng, d, m.max(1)).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..d).collect(),
        }
    }

    fn best_split(&mut self, rows: &[usize]) -> Option<BestSplit> {
        let n = rows.len();
        let min_leaf = self.params.min_leaf.max(1);
        if n < 2 * min_leaf {
            return None;
        }
        let total: f64 = rows.iter().map(|&r| self.y[r]).sum();
        // maximizing sum_l^2/n_l + sum_r^2/n_r minimizes the children's SSE
        let parent_score = total * total / n as f64;
        let mut best: Option<(f64, usize, f64)> = None;
        let mut sorted = rows.to_vec();
        for f in self.candidate_features(self.x[rows[0]].len()) {
            let x = self.x;
            sorted.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]).then(a.cmp(&b)));
            let mut left_sum = 0.0;
            for i in 1..n {
                left_sum += self.y[sorted[i - 1]];
                let (lo, hi) = (x[sorted[i - 1]][f], x[sorted[i]][f]);
                if i < min_leaf || n - i < min_leaf || lo == hi {
                    continue;
                }
                let right_sum = total - left_sum;
                let score = left_sum * left_sum / i as f64 + right_sum * right_sum / (n - i) as f64;
                // near-equal scores are ties, so the winner does not hinge on
                // summation order
                if best.is_none_or(|(s, _, _)| score > s + TIE_EPS * s.abs()) {
                    let mut threshold = lo + (hi - lo) / 2.0;
                    if threshold >= hi {
                        threshold = lo;
                    }
                    best = Some((score, f, threshold));
                }
            }
        }
        let (score, feature, threshold) = best?;
        if score <= parent_score + TIE_EPS * parent_score.abs() {
            return None;
        }
        let (left, right) = rows.iter().partition(|&&r| self.x[r][feature] <= threshold);
        Some(BestSplit {
            feature,
            threshold,
            left,
            right,
        })
    }

    fn build(&mut self, rows: &[usize], depth: usize) -> usize {
        let id = self.nodes.len();
        let mean = rows.iter().map(|&r| self.y[r]).sum::<f64>() / rows.len() as f64;
        self.nodes.push(Node::Leaf { value: mean });
        if depth >= self.params.max_depth {
            return id;
        }
        if let Some(split) = self.best_split(rows) {
            let left = self.build(&split.left, depth + 1);
            let right = self.build(&split.right, depth + 1);
            self.nodes[id] = Node::Split {
                feature: split.feature,
                threshold: split.threshold,
                left,
                right,
            };
        }
        id
    }
}

impl RegressionTree {
    /// Fits on the given rows (repeats allowed, as in a bootstrap sample).
    pub fn fit<R: Rng>(
        x: &[Vec<f64>],
        y: &[f64],
        rows: &[usize],
        params: TreeParams,
        rng: Option<&mut R>,
    ) -> Self {
        assert!(!rows.is_empty(), "cannot fit a tree on zero rows");
        let mut b = Builder {
            x,
            y,
            params,
            rng,
            nodes: Vec::new(),
        };
        b.build(rows, 0);
        RegressionTree { nodes: b.nodes }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }
}
