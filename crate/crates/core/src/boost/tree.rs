//! Depth-limited regression trees fitted to Newton boosting statistics.

use crate::features::FeatureMatrix;

/// L2 penalty on leaf values, in hessian units.
const LEAF_L2: f64 = 1.0;
const MIN_GAIN: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf { value: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] <= threshold { left } else { right },
                Node::Leaf { value } => return value,
            }
        }
    }

    pub fn scale_leaves(&mut self, factor: f64) {
        for n in &mut self.nodes {
            if let Node::Leaf { value } = n {
                *value *= factor;
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Split { left, right, .. } => 1 + go(nodes, left).max(go(nodes, right)),
                Node::Leaf { .. } => 0,
            }
        }
        go(&self.nodes, 0)
    }
}

/// Row order of every feature column, sorted by (value, row).
pub(crate) struct Presorted {
    order: Vec<Vec<u32>>,
}

impl Presorted {
    pub fn new(x: &FeatureMatrix) -> Self {
        let order = (0..x.cols)
            .map(|f| {
                let mut idx: Vec<u32> = (0..x.rows as u32).collect();
                idx.sort_by(|&a, &b| {
                    x.row(a as usize)[f]
                        .total_cmp(&x.row(b as usize)[f])
                        .then(a.cmp(&b))
                });
                idx
            })
            .collect();
        Self { order }
    }
}

#[derive(Clone, Copy, Default)]
struct Stats {
    g: f64,
    h: f64,
}

impl Stats {
    fn score(self) -> f64 {
        self.g * self.g / (self.h + LEAF_L2)
    }

    fn leaf(self) -> f64 {
        self.g / (self.h + LEAF_L2)
    }
}

#[derive(Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

const INACTIVE: u32 = u32::MAX;

/// Grows one tree level by level with an exact scan over each feature's
/// sorted unique values. `grad` holds negative loss gradients (the target
/// direction) and `hess` the matching curvatures.
pub(crate) fn fit_tree(
    x: &FeatureMatrix,
    sorted: &Presorted,
    grad: &[f64],
    hess: &[f64],
    depth_max: usize,
) -> Tree {
    let n = x.rows;
    let mut nodes = vec![Node::Leaf { value: 0.0 }];
    let mut node_of = vec![0u32; n];
    let mut active = vec![0usize];

    for _ in 0..depth_max {
        if active.is_empty() {
            break;
        }
        let slots = nodes.len();
        let mut total = vec![Stats::default(); slots];
        for r in 0..n {
            let k = node_of[r];
            if k != INACTIVE {
                total[k as usize].g += grad[r];
                total[k as usize].h += hess[r];
            }
        }
        let mut best: Vec<Option<Candidate>> = vec![None; slots];
        let mut left = vec![Stats::default(); slots];
        let mut last: Vec<Option<f64>> = vec![None; slots];
        for (f, order) in sorted.order.iter().enumerate() {
            left.iter_mut().for_each(|s| *s = Stats::default());
            last.iter_mut().for_each(|v| *v = None);
            for &r in order {
                let r = r as usize;
                let k = node_of[r];
                if k == INACTIVE {
                    continue;
                }
                let k = k as usize;
                let v = x.row(r)[f];
                if let Some(lv) = last[k] {
                    if v > lv {
                        let l = left[k];
                        let t = total[k];
                        let rgt = Stats {
                            g: t.g - l.g,
                            h: t.h - l.h,
                        };
                        let gain = l.score() + rgt.score() - t.score();
                        if gain > MIN_GAIN && best[k].is_none_or(|b| gain > b.gain) {
                            let mid = 0.5 * (lv + v);
                            best[k] = Some(Candidate {
                                gain,
                                feature: f,
                                threshold: if mid < v { mid } else { lv },
                            });
                        }
                    }
                }
                left[k].g += grad[r];
                left[k].h += hess[r];
                last[k] = Some(v);
            }
        }

        let mut next = Vec::new();
        let mut child_of = vec![(0usize, 0usize); slots];
        for &k in &active {
            match best[k] {
                Some(c) => {
                    let (l, r) = (nodes.len(), nodes.len() + 1);
                    nodes.push(Node::Leaf { value: 0.0 });
                    nodes.push(Node::Leaf { value: 0.0 });
                    nodes[k] = Node::Split {
                        feature: c.feature,
                        threshold: c.threshold,
                        left: l,
                        right: r,
                    };
                    child_of[k] = (l, r);
                    next.push(l);
                    next.push(r);
                }
                None => nodes[k] = Node::Leaf {
                    value: total[k].leaf(),
                },
            }
        }
        for r in 0..n {
            let k = node_of[r];
            if k == INACTIVE {
                continue;
            }
            node_of[r] = match nodes[k as usize] {
                Node::Split {
                    feature, threshold, ..
                } => {
                    let (l, rt) = child_of[k as usize];
                    if x.row(r)[feature] <= threshold {
                        l as u32
                    } else {
                        rt as u32
                    }
                }
                Node::Leaf { .. } => INACTIVE,
            };
        }
        active = next;
    }

    if !active.is_empty() {
        let mut total = vec![Stats::default(); nodes.len()];
        for r in 0..n {
            let k = node_of[r];
            if k != INACTIVE {
                total[k as usize].g += grad[r];
                total[k as usize].h += hess[r];
            }
        }
        for k in active {
            nodes[k] = Node::Leaf {
                value: total[k].leaf(),
            };
        }
    }
    Tree { nodes }
}
