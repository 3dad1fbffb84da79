use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Tree node over encoded columns. Rows with `x[column] <= threshold` go
/// left. On indicator columns a split at 0.5 is a category-membership test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Node {
    Split {
        column: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        /// Fraction of positive training rows reaching this leaf.
        fraction: f64,
        count: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    /// Root at index 0.
    pub nodes: Vec<Node>,
}

impl Tree {
    /// Builds a tree from explicit nodes, checking child indices and leaf
    /// fractions.
    pub fn from_nodes(nodes: Vec<Node>) -> Result<Self, String> {
        if nodes.is_empty() {
            return Err("tree has no nodes".into());
        }
        for (i, n) in nodes.iter().enumerate() {
            match *n {
                Node::Split { left, right, threshold, .. } => {
                    if left <= i || right <= i || left >= nodes.len() || right >= nodes.len() {
                        return Err(format!("node {i}: children must point forward inside the tree"));
                    }
                    if !threshold.is_finite() {
                        return Err(format!("node {i}: non-finite threshold"));
                    }
                }
                Node::Leaf { fraction, .. } => {
                    if !(0.0..=1.0).contains(&fraction) {
                        return Err(format!("node {i}: leaf fraction {fraction} outside [0, 1]"));
                    }
                }
            }
        }
        Ok(Self { nodes })
    }

    #[inline]
    pub fn leaf_fraction(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Split { column, threshold, left, right } => {
                    at = if x[column] <= threshold { left } else { right };
                }
                Node::Leaf { fraction, .. } => return fraction,
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
                Node::Leaf { .. } => 0,
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn max_column(&self) -> Option<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { column, .. } => Some(*column),
                Node::Leaf { .. } => None,
            })
            .max()
    }
}

pub(crate) struct GrowParams {
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub features_per_split: usize,
}

/// Grows a CART classification tree (Gini impurity) on the rows listed in
/// `sample` (duplicates allowed, as produced by bootstrapping).
pub(crate) fn grow<R: Rng>(
    x: &[Vec<f64>],
    y: &[bool],
    sample: &[usize],
    params: &GrowParams,
    rng: &mut R,
) -> Tree {
    let width = x.first().map_or(0, Vec::len);
    let mut grower = Grower {
        x,
        y,
        params,
        columns: (0..width).collect(),
        nodes: Vec::new(),
        scratch: Vec::with_capacity(sample.len()),
    };
    let mut rows = sample.to_vec();
    grower.build(&mut rows, 0, rng);
    Tree { nodes: grower.nodes }
}

struct Grower<'a> {
    x: &'a [Vec<f64>],
    y: &'a [bool],
    params: &'a GrowParams,
    columns: Vec<usize>,
    nodes: Vec<Node>,
    scratch: Vec<(f64, bool)>,
}

struct BestSplit {
    column: usize,
    threshold: f64,
    impurity: f64,
}

impl Grower<'_> {
    fn build<R: Rng>(&mut self, rows: &mut [usize], depth: usize, rng: &mut R) -> usize {
        let id = self.nodes.len();
        let n = rows.len();
        let pos = rows.iter().filter(|&&r| self.y[r]).count();
        self.nodes.push(Node::Leaf {
            fraction: pos as f64 / n as f64,
            count: n,
        });

        let depth_ok = self.params.max_depth.is_none_or(|d| depth < d);
        if !depth_ok || pos == 0 || pos == n || n < 2 * self.params.min_leaf {
            return id;
        }
        let Some(best) = self.best_split(rows, pos, rng) else {
            return id;
        };

        let mut mid = 0;
        for i in 0..rows.len() {
            if self.x[rows[i]][best.column] <= best.threshold {
                rows.swap(i, mid);
                mid += 1;
            }
        }
        let (l, r) = rows.split_at_mut(mid);
        let left = self.build(l, depth + 1, rng);
        let right = self.build(r, depth + 1, rng);
        self.nodes[id] = Node::Split {
            column: best.column,
            threshold: best.threshold,
            left,
            right,
        };
        id
    }

    /// Evaluates columns in a random order until `features_per_split`
    /// non-constant columns have been tried.
    fn best_split<R: Rng>(&mut self, rows: &[usize], pos: usize, rng: &mut R) -> Option<BestSplit> {
        let n = rows.len() as f64;
        let parent = gini(pos as f64, n);
        let mut best: Option<BestSplit> = None;
        let mut tried = 0;
        self.columns.shuffle(rng);
        for k in 0..self.columns.len() {
            if tried >= self.params.features_per_split {
                break;
            }
            let column = self.columns[k];
            self.scratch.clear();
            self.scratch.extend(rows.iter().map(|&r| (self.x[r][column], self.y[r])));
            self.scratch.sort_by(|a, b| a.0.total_cmp(&b.0));
            if self.scratch[0].0 == self.scratch[self.scratch.len() - 1].0 {
                continue;
            }
            tried += 1;

            let min_leaf = self.params.min_leaf;
            let mut left_pos = 0.0;
            for i in 1..self.scratch.len() {
                if self.scratch[i - 1].1 {
                    left_pos += 1.0;
                }
                if self.scratch[i - 1].0 == self.scratch[i].0 || i < min_leaf || self.scratch.len() - i < min_leaf {
                    continue;
                }
                let nl = i as f64;
                let nr = n - nl;
                let right_pos = pos as f64 - left_pos;
                let impurity = (nl * gini(left_pos, nl) + nr * gini(right_pos, nr)) / n;
                if impurity < parent - 1e-12 && best.as_ref().is_none_or(|b| impurity < b.impurity) {
                    let (a, b) = (self.scratch[i - 1].0, self.scratch[i].0);
                    let mut threshold = a + (b - a) / 2.0;
                    if threshold >= b {
                        threshold = a;
                    }
                    best = Some(BestSplit { column, threshold, impurity });
                }
            }
        }
        best
    }
}

#[inline]
fn gini(pos: f64, n: f64) -> f64 {
    if n == 0.0 {
        return 0.0;
    }
    let p = pos / n;
    2.0 * p * (1.0 - p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn from_nodes_rejects_backward_children() {
        let nodes = vec![
            Node::Split { column: 0, threshold: 0.5, left: 0, right: 1 },
            Node::Leaf { fraction: 1.0, count: 1 },
        ];
        assert!(Tree::from_nodes(nodes).is_err());
        assert!(Tree::from_nodes(vec![Node::Leaf { fraction: 1.5, count: 1 }]).is_err());
    }

    #[test]
    fn separable_column_is_split_at_midpoint() {
        let x = vec![vec![1.0], vec![2.0], vec![3.0], vec![4.0]];
        let y = vec![false, false, true, true];
        let params = GrowParams { max_depth: Some(3), min_leaf: 1, features_per_split: 1 };
        let tree = grow(&x, &y, &[0, 1, 2, 3], &params, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(tree.depth(), 1);
        match tree.nodes[0] {
            Node::Split { threshold, .. } => assert_eq!(threshold, 2.5),
            _ => panic!("expected split"),
        }
        assert_eq!(tree.leaf_fraction(&[0.0]), 0.0);
        assert_eq!(tree.leaf_fraction(&[9.0]), 1.0);
    }

    #[test]
    fn respects_depth_and_min_leaf() {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, (i % 3) as f64]).collect();
        let y: Vec<bool> = (0..20).map(|i| i % 2 == 0).collect();
        let rows: Vec<usize> = (0..20).collect();
        let params = GrowParams { max_depth: Some(2), min_leaf: 3, features_per_split: 2 };
        let tree = grow(&x, &y, &rows, &params, &mut ChaCha8Rng::seed_from_u64(3));
        assert!(tree.depth() <= 2);
        for n in &tree.nodes {
            if let Node::Leaf { count, fraction } = n {
                assert!(*count >= 3);
                assert!((0.0..=1.0).contains(fraction));
            }
        }
    }
}
