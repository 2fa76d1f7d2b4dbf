//! Dinic's max-flow on a directed graph with real capacities.

use std::collections::VecDeque;

#[derive(Debug, Clone)]
struct Arc {
    to: usize,
    rev: usize,
    cap: f64,
}

#[derive(Debug, Clone, Default)]
pub struct FlowGraph {
    adj: Vec<Vec<Arc>>,
    max_cap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinCut {
    pub flow: f64,
    /// `true` for nodes reachable from the source in the final residual
    /// graph.
    pub source_side: Vec<bool>,
}

impl FlowGraph {
    pub fn new(nodes: usize) -> Self {
        Self {
            adj: vec![Vec::new(); nodes],
            max_cap: 0.0,
        }
    }

    pub fn nodes(&self) -> usize {
        self.adj.len()
    }

    pub fn add_node(&mut self) -> usize {
        self.adj.push(Vec::new());
        self.adj.len() - 1
    }

    /// Adds a directed edge; zero capacities are skipped.
    pub fn add_edge(&mut self, from: usize, to: usize, cap: f64) {
        assert!(cap >= 0.0 && cap.is_finite(), "capacity must be finite and >= 0");
        if cap == 0.0 || from == to {
            return;
        }
        self.max_cap = self.max_cap.max(cap);
        let rf = self.adj[to].len();
        let rt = self.adj[from].len();
        self.adj[from].push(Arc { to, rev: rf, cap });
        self.adj[to].push(Arc {
            to: from,
            rev: rt,
            cap: 0.0,
        });
    }

    fn levels(&self, s: usize, eps: f64) -> Vec<i32> {
        let mut level = vec![-1; self.adj.len()];
        level[s] = 0;
        let mut q = VecDeque::from([s]);
        while let Some(u) = q.pop_front() {
            for a in &self.adj[u] {
                if a.cap > eps && level[a.to] < 0 {
                    level[a.to] = level[u] + 1;
                    q.push_back(a.to);
                }
            }
        }
        level
    }

    fn push(&mut self, u: usize, t: usize, limit: f64, level: &[i32], it: &mut [usize], eps: f64) -> f64 {
        if u == t {
            return limit;
        }
        while it[u] < self.adj[u].len() {
            let Arc { to, rev, cap } = self.adj[u][it[u]];
            if cap > eps && level[to] == level[u] + 1 {
                let d = self.push(to, t, limit.min(cap), level, it, eps);
                if d > 0.0 {
                    self.adj[u][it[u]].cap -= d;
                    self.adj[to][rev].cap += d;
                    return d;
                }
            }
            it[u] += 1;
        }
        0.0
    }

    /// Computes a maximum `s`-`t` flow and the matching minimum cut.
    pub fn max_flow(mut self, s: usize, t: usize) -> MinCut {
        assert!(s != t, "source and sink must differ");
        let eps = 1e-12 * self.max_cap.max(1.0);
        let mut flow = 0.0;
        loop {
            let level = self.levels(s, eps);
            if level[t] < 0 {
                break;
            }
            let mut it = vec![0; self.adj.len()];
            loop {
                let d = self.push(s, t, f64::INFINITY, &level, &mut it, eps);
                if d <= 0.0 {
                    break;
                }
                flow += d;
            }
        }
        let source_side = self.levels(s, eps).iter().map(|&l| l >= 0).collect();
        MinCut { flow, source_side }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_edge() {
        let mut g = FlowGraph::new(2);
        g.add_edge(0, 1, 3.0);
        assert_eq!(g.max_flow(0, 1).flow, 3.0);
    }

    #[test]
    fn diamond() {
        // s=0, a=1, b=2, t=3
        let mut g = FlowGraph::new(4);
        g.add_edge(0, 1, 2.0);
        g.add_edge(0, 2, 2.0);
        g.add_edge(1, 3, 1.0);
        g.add_edge(2, 3, 3.0);
        g.add_edge(1, 2, 1.0);
        let cut = g.max_flow(0, 3);
        assert_eq!(cut.flow, 4.0);
        assert!(cut.source_side[0] && !cut.source_side[3]);
    }

    #[test]
    fn disconnected() {
        let mut g = FlowGraph::new(4);
        g.add_edge(0, 1, 5.0);
        g.add_edge(2, 3, 5.0);
        let cut = g.max_flow(0, 3);
        assert_eq!(cut.flow, 0.0);
        assert_eq!(cut.source_side, vec![true, true, false, false]);
    }
}
