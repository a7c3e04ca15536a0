//! Single regression tree with exact pre-sorted split search.
//!
//! Growth is level-wise: one pass over each feature's sorted order per
//! level finds every active node's best boundary. Gains are Newton gains
//! `G^2/H`; with unit hessians this reduces to the weighted variance
//! reduction of squared-error boosting. Ties prefer the lowest feature
//! index, then the lowest threshold.

use super::HESSIAN_FLOOR;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f32,
        left: usize,
        right: usize,
        /// Side taken when the feature value is NaN at prediction time.
        default_left: bool,
    },
    Leaf {
        value: f32,
    },
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn eval(&self, x: &[f32]) -> f32 {
        let mut at = 0usize;
        loop {
            match self.nodes[at] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    default_left,
                } => {
                    let v = x[feature];
                    at = if v.is_nan() {
                        if default_left {
                            left
                        } else {
                            right
                        }
                    } else if v < threshold {
                        left
                    } else {
                        right
                    };
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct NodeStats {
    g: f64,
    h: f64,
    count: usize,
}

#[derive(Debug, Clone, Copy, Default)]
struct ScanState {
    g: f64,
    h: f64,
    count: usize,
    last_value: f32,
}

#[derive(Debug, Clone, Copy)]
struct Split {
    feature: usize,
    threshold: f32,
    gain: f64,
}

#[inline]
fn leaf_gain(g: f64, h: f64) -> f64 {
    g * g / h.max(HESSIAN_FLOOR)
}

#[inline]
fn leaf_value(stats: NodeStats) -> f32 {
    (-stats.g / stats.h.max(HESSIAN_FLOOR)) as f32
}

/// Threshold between two adjacent training values: the midpoint, nudged up
/// to the upper value when f32 rounding would otherwise route `lo` right.
#[inline]
fn split_threshold(lo: f32, hi: f32) -> f32 {
    let mid = ((lo as f64 + hi as f64) * 0.5) as f32;
    if mid > lo {
        mid
    } else {
        hi
    }
}

pub(crate) struct TreeGrower<'a> {
    data: super::DataView<'a>,
    /// Per feature, row indices sorted by (value asc, row asc).
    sorted: Vec<Vec<u32>>,
}

impl<'a> TreeGrower<'a> {
    pub fn new(data: super::DataView<'a>) -> Self {
        let sorted = (0..data.cols)
            .map(|f| {
                let mut idx: Vec<u32> = (0..data.rows as u32).collect();
                idx.sort_by(|&a, &b| {
                    let va = data.x[a as usize * data.cols + f];
                    let vb = data.x[b as usize * data.cols + f];
                    va.total_cmp(&vb).then_with(|| a.cmp(&b))
                });
                idx
            })
            .collect();
        Self { data, sorted }
    }

    /// Fit one tree to the given gradients/hessians. `features` must be
    /// sorted ascending.
    pub fn grow(
        &self,
        grad: &[f64],
        hess: &[f64],
        features: &[usize],
        max_depth: usize,
        min_samples_leaf: usize,
    ) -> Tree {
        let rows = self.data.rows;
        let cols = self.data.cols;
        let x = self.data.x;

        let mut nodes: Vec<Node> = vec![Node::Leaf { value: 0.0 }];
        let mut stats: Vec<NodeStats> = vec![NodeStats::default()];
        for i in 0..rows {
            stats[0].g += grad[i];
            stats[0].h += hess[i];
            stats[0].count += 1;
        }
        let mut row_node: Vec<u32> = vec![0; rows];
        let mut active: Vec<usize> = vec![0];

        for _depth in 0..max_depth {
            if active.is_empty() {
                break;
            }
            let mut is_active = vec![false; nodes.len()];
            for &nid in &active {
                is_active[nid] = true;
            }

            let mut best: Vec<Option<Split>> = vec![None; nodes.len()];
            let mut scan: Vec<ScanState> = vec![ScanState::default(); nodes.len()];
            for &f in features {
                for &nid in &active {
                    scan[nid] = ScanState::default();
                }
                for &row in &self.sorted[f] {
                    let row = row as usize;
                    let nid = row_node[row] as usize;
                    if !is_active[nid] {
                        continue;
                    }
                    let v = x[row * cols + f];
                    let st = &mut scan[nid];
                    if st.count > 0 && v > st.last_value {
                        let total = stats[nid];
                        let right_count = total.count - st.count;
                        if st.count >= min_samples_leaf && right_count >= min_samples_leaf {
                            let gl = st.g;
                            let hl = st.h;
                            let gr = total.g - gl;
                            let hr = total.h - hl;
                            let gain =
                                leaf_gain(gl, hl) + leaf_gain(gr, hr) - leaf_gain(total.g, total.h);
                            let current_best = best[nid].map(|s| s.gain).unwrap_or(0.0);
                            if gain > current_best {
                                best[nid] = Some(Split {
                                    feature: f,
                                    threshold: split_threshold(st.last_value, v),
                                    gain,
                                });
                            }
                        }
                    }
                    st.g += grad[row];
                    st.h += hess[row];
                    st.count += 1;
                    st.last_value = v;
                }
            }

            let mut next_active = Vec::new();
            for &nid in &active {
                match best[nid] {
                    Some(split) => {
                        let left = nodes.len();
                        let right = nodes.len() + 1;
                        nodes.push(Node::Leaf { value: 0.0 });
                        nodes.push(Node::Leaf { value: 0.0 });
                        stats.push(NodeStats::default());
                        stats.push(NodeStats::default());
                        nodes[nid] = Node::Split {
                            feature: split.feature,
                            threshold: split.threshold,
                            left,
                            right,
                            default_left: false,
                        };
                        next_active.push(left);
                        next_active.push(right);
                    }
                    None => {
                        nodes[nid] = Node::Leaf {
                            value: leaf_value(stats[nid]),
                        };
                    }
                }
            }

            // route rows one level down and accumulate child stats
            for row in 0..rows {
                let nid = row_node[row] as usize;
                if !is_active[nid] {
                    continue;
                }
                if let Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } = nodes[nid]
                {
                    let child = if x[row * cols + feature] < threshold {
                        left
                    } else {
                        right
                    };
                    row_node[row] = child as u32;
                    stats[child].g += grad[row];
                    stats[child].h += hess[row];
                    stats[child].count += 1;
                }
            }
            active = next_active;
        }

        for &nid in &active {
            nodes[nid] = Node::Leaf {
                value: leaf_value(stats[nid]),
            };
        }
        Tree { nodes }
    }
}
