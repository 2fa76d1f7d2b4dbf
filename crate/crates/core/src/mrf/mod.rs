//! MRF energy over superpixels and its minimization by alpha-expansion.
//!
//! ```text
//! E(L) = sum_i D(i, l_i) + lambda * sum_{(i,j) in A} V(l_i, l_j) + sum_c H(c) * [c used in L]
//! ```
//!
//! Each expansion move is solved as a minimum cut. Positive label costs are
//! encoded with one auxiliary node per label; pairwise terms that are not
//! submodular for the move, and negative label costs, are left out of the
//! cut. Every proposal is then re-scored with the exact energy and only
//! accepted on strict decrease.

mod maxflow;

pub use maxflow::{FlowGraph, MinCut};

use crate::fusion::CostField;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SmoothnessMatrix {
    pub num_classes: usize,
    /// Row-major `|C| x |C|`, symmetric with zero diagonal.
    pub v: Vec<f64>,
}

impl SmoothnessMatrix {
    /// Constant penalty `mu` for every pair of distinct labels.
    pub fn potts(num_classes: usize, mu: f64) -> Self {
        let mut v = vec![mu; num_classes * num_classes];
        for c in 0..num_classes {
            v[c * num_classes + c] = 0.0;
        }
        Self { num_classes, v }
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.v[a * self.num_classes + b]
    }
}

/// Pairwise penalties from label co-occurrence between adjacent training
/// superpixels plus a Potts constant:
/// `V(c, c') = -ln((P(c|c') + P(c'|c)) / 2) + mu` for `c != c'`, with
/// `P(c|c') = (N(c, c') + 1) / (sum_k N(k, c') + |C|)` and `N` counting each
/// adjacent pair in both directions.
pub fn smoothness_from_counts(
    pairs: &[(usize, usize)],
    num_classes: usize,
    mu: f64,
) -> Result<SmoothnessMatrix> {
    if !(mu >= 0.0) {
        return Err(Error::InvalidArgument("Potts constant must be >= 0".into()));
    }
    let c = num_classes;
    let mut n = vec![0u64; c * c];
    for &(a, b) in pairs {
        if a >= c || b >= c {
            return Err(Error::InvalidArgument(format!(
                "adjacent label pair ({a}, {b}) outside {c} classes"
            )));
        }
        n[a * c + b] += 1;
        n[b * c + a] += 1;
    }
    let col: Vec<u64> = (0..c).map(|j| (0..c).map(|i| n[i * c + j]).sum()).collect();
    let p = |a: usize, given: usize| (n[a * c + given] + 1) as f64 / (col[given] + c as u64) as f64;
    let mut v = vec![0.0; c * c];
    for a in 0..c {
        for b in 0..c {
            if a != b {
                v[a * c + b] = (-((p(a, b) + p(b, a)) / 2.0).ln() + mu).max(0.0);
            }
        }
    }
    Ok(SmoothnessMatrix { num_classes: c, v })
}

#[derive(Debug, Clone, Copy)]
pub struct EnergyModel<'a> {
    pub costs: &'a CostField,
    /// Adjacent superpixel pairs.
    pub adjacency: &'a [(usize, usize)],
    pub smoothness: &'a SmoothnessMatrix,
    pub lambda: f64,
    /// Per-class label costs `H(c)`; `None` drops the label-cost term.
    pub label_costs: Option<&'a [f64]>,
}

impl<'a> EnergyModel<'a> {
    pub fn new(
        costs: &'a CostField,
        adjacency: &'a [(usize, usize)],
        smoothness: &'a SmoothnessMatrix,
        lambda: f64,
        label_costs: Option<&'a [f64]>,
    ) -> Result<Self> {
        if smoothness.num_classes != costs.cols {
            return Err(Error::DimensionMismatch {
                what: "smoothness matrix vs data costs".into(),
                expected: (costs.cols, costs.cols),
                found: (smoothness.num_classes, smoothness.num_classes),
            });
        }
        if let Some(h) = label_costs {
            if h.len() != costs.cols || h.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument(
                    "label costs must be finite, one per class".into(),
                ));
            }
        }
        if !(lambda >= 0.0) {
            return Err(Error::InvalidArgument("lambda must be >= 0".into()));
        }
        if let Some(&(a, b)) = adjacency
            .iter()
            .find(|&&(a, b)| a >= costs.rows || b >= costs.rows || a == b)
        {
            return Err(Error::InvalidArgument(format!("bad adjacency pair ({a}, {b})")));
        }
        Ok(Self {
            costs,
            adjacency,
            smoothness,
            lambda,
            label_costs,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.costs.rows
    }

    pub fn num_labels(&self) -> usize {
        self.costs.cols
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Energy {
    pub data: f64,
    pub smoothness: f64,
    pub label_cost: f64,
}

impl Energy {
    pub fn total(&self) -> f64 {
        self.data + self.smoothness + self.label_cost
    }
}

/// Evaluates every term of the energy for `labels`.
pub fn energy(labels: &[usize], model: &EnergyModel<'_>) -> Result<Energy> {
    if labels.len() != model.num_nodes() {
        return Err(Error::InvalidArgument(format!(
            "labeling has {} entries for {} superpixels",
            labels.len(),
            model.num_nodes()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= model.num_labels()) {
        return Err(Error::InvalidArgument(format!("label {bad} out of range")));
    }
    Ok(energy_unchecked(labels, model))
}

fn energy_unchecked(labels: &[usize], model: &EnergyModel<'_>) -> Energy {
    let data = labels
        .iter()
        .enumerate()
        .map(|(i, &l)| model.costs.get(i, l))
        .sum();
    let pair: f64 = model
        .adjacency
        .iter()
        .map(|&(i, j)| model.smoothness.get(labels[i], labels[j]))
        .sum();
    let label_cost = match model.label_costs {
        Some(h) => {
            let mut used = vec![false; model.num_labels()];
            for &l in labels {
                used[l] = true;
            }
            used.iter().zip(h).filter(|(u, _)| **u).map(|(_, h)| h).sum()
        }
        None => 0.0,
    };
    Energy {
        data,
        smoothness: model.lambda * pair,
        label_cost,
    }
}

fn improves(new: f64, old: f64) -> bool {
    new < old - 1e-12 * old.abs().max(1.0)
}

/// Best labeling found by one alpha-expansion move, or `None` when the move
/// does not strictly lower the energy.
fn expansion_proposal(
    labels: &[usize],
    alpha: usize,
    model: &EnergyModel<'_>,
    current: f64,
) -> Option<(Vec<usize>, Energy)> {
    let n = labels.len();
    if labels.iter().all(|&l| l == alpha) {
        return None;
    }
    // x_i = 0 keeps l_i (source side), x_i = 1 takes alpha (sink side)
    let mut keep = vec![0.0; n];
    let mut take = vec![0.0; n];
    for i in 0..n {
        keep[i] = model.costs.get(i, labels[i]);
        take[i] = model.costs.get(i, alpha);
    }
    let mut pair_edges = Vec::new();
    for &(i, j) in model.adjacency {
        let v = |a, b| model.lambda * model.smoothness.get(a, b);
        let e00 = v(labels[i], labels[j]);
        let e01 = v(labels[i], alpha);
        let e10 = v(alpha, labels[j]);
        let e11 = v(alpha, alpha);
        // E = e00 + (e10 - e00) x_i + (e11 - e10) x_j + (e01 + e10 - e00 - e11) (1 - x_i) x_j
        take[i] += e10 - e00;
        take[j] += e11 - e10;
        let w = e01 + e10 - e00 - e11;
        if w > 0.0 {
            pair_edges.push((i, j, w));
        }
    }

    let (s, t) = (n, n + 1);
    let mut g = FlowGraph::new(n + 2);
    let mut finite_total = 0.0;
    for i in 0..n {
        let m = keep[i].min(take[i]);
        g.add_edge(s, i, take[i] - m);
        g.add_edge(i, t, keep[i] - m);
        finite_total += (take[i] - m) + (keep[i] - m);
    }
    for &(i, j, w) in &pair_edges {
        g.add_edge(i, j, w);
        finite_total += w;
    }
    if let Some(h) = model.label_costs {
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); model.num_labels()];
        for (i, &l) in labels.iter().enumerate() {
            members[l].push(i);
        }
        finite_total += h.iter().filter(|&&v| v > 0.0).sum::<f64>();
        let hard = finite_total + 1.0;
        for (c, nodes) in members.iter().enumerate() {
            if c == alpha || nodes.is_empty() || h[c] <= 0.0 {
                continue;
            }
            // pay H(c) unless every node of c moves to alpha
            let y = g.add_node();
            g.add_edge(y, t, h[c]);
            for &i in nodes {
                g.add_edge(i, y, hard);
            }
        }
        if members[alpha].is_empty() && h[alpha] > 0.0 {
            // pay H(alpha) as soon as any node takes alpha
            let z = g.add_node();
            g.add_edge(s, z, h[alpha]);
            for i in 0..n {
                g.add_edge(z, i, hard);
            }
        }
    }

    let cut = g.max_flow(s, t);
    let proposal: Vec<usize> = (0..n)
        .map(|i| if cut.source_side[i] { labels[i] } else { alpha })
        .collect();
    let e = energy_unchecked(&proposal, model);
    improves(e.total(), current).then_some((proposal, e))
}

/// One alpha-expansion move from `labels`: every superpixel either keeps its
/// label or switches to `alpha`. Returns the input when no admissible move
/// found by the cut lowers the energy.
pub fn expand(labels: &[usize], alpha: usize, model: &EnergyModel<'_>) -> Result<Vec<usize>> {
    if alpha >= model.num_labels() {
        return Err(Error::InvalidArgument(format!("alpha {alpha} out of range")));
    }
    let current = energy(labels, model)?.total();
    Ok(expansion_proposal(labels, alpha, model, current)
        .map(|(l, _)| l)
        .unwrap_or_else(|| labels.to_vec()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoveRecord {
    pub cycle: usize,
    pub alpha: usize,
    /// Total energy after the move.
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParseResult {
    pub labels: Vec<usize>,
    pub energy: Energy,
    /// Labels in use, ascending.
    pub unique: Vec<usize>,
    /// Accepted moves in order.
    pub moves: Vec<MoveRecord>,
}

/// Cycles expansion moves over all labels in ascending order until a full
/// cycle makes no strict improvement.
pub fn minimize(model: &EnergyModel<'_>, init: &[usize]) -> Result<ParseResult> {
    let mut labels = init.to_vec();
    let mut e = energy(&labels, model)?;
    let mut moves = Vec::new();
    let mut cycle = 0;
    loop {
        let mut improved = false;
        for alpha in 0..model.num_labels() {
            if let Some((next, ne)) = expansion_proposal(&labels, alpha, model, e.total()) {
                labels = next;
                e = ne;
                moves.push(MoveRecord {
                    cycle,
                    alpha,
                    energy: e.total(),
                });
                improved = true;
            }
        }
        if !improved {
            break;
        }
        cycle += 1;
    }
    let mut unique = labels.clone();
    unique.sort_unstable();
    unique.dedup();
    Ok(ParseResult {
        labels,
        energy: e,
        unique,
        moves,
    })
}
