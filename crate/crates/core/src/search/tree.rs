use crate::attributes::{AttributeKind, AttributeVector};
use crate::reward::DegreeBreakdown;

use super::{exploration_coeff, puct_score, SearchConfig, SearchError};

pub type NodeId = usize;

/// Everything computed once a node's summary exists.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub summary: String,
    pub measured: AttributeVector,
    pub breakdown: DegreeBreakdown,
    pub heuristic: Option<f64>,
    /// Value backed up the tree.
    pub value: f64,
    /// Every target is within tolerance.
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum NodeState {
    /// Created by expansion; no summary yet.
    Stub,
    Ready(Evaluation),
    /// Evaluation failed; never selected or backed up.
    Failed(String),
}

/// A node with the statistics of its incoming edge.
#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: NodeId,
    pub parent: Option<NodeId>,
    pub action: Option<AttributeKind>,
    pub depth: usize,
    pub prior: f64,
    pub visits: u64,
    pub total_value: f64,
    pub children: Vec<NodeId>,
    pub state: NodeState,
}

impl Node {
    pub fn mean_value(&self) -> f64 {
        if self.visits == 0 {
            0.0
        } else {
            self.total_value / self.visits as f64
        }
    }
}

/// Where a descent stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Descent {
    /// A materialized, non-terminal node without children.
    Leaf(NodeId),
    /// A child that has not been generated yet.
    Stub(NodeId),
    /// A node that cannot be extended: satisfied, at max depth, or (for the
    /// root) with nothing left to explore.
    Terminal(NodeId),
}

/// Arena-allocated search tree; ids follow creation order.
#[derive(Debug, Clone)]
pub struct SearchTree {
    nodes: Vec<Node>,
    cfg: SearchConfig,
}

impl SearchTree {
    pub fn new(root: Evaluation, cfg: SearchConfig) -> Self {
        Self {
            nodes: vec![Node {
                id: 0,
                parent: None,
                action: None,
                depth: 0,
                prior: 1.0,
                visits: 0,
                total_value: 0.0,
                children: Vec::new(),
                state: NodeState::Ready(root),
            }],
            cfg,
        }
    }

    pub fn root(&self) -> NodeId {
        0
    }

    pub fn config(&self) -> &SearchConfig {
        &self.cfg
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn evaluation(&self, id: NodeId) -> Option<&Evaluation> {
        match &self.nodes[id].state {
            NodeState::Ready(e) => Some(e),
            _ => None,
        }
    }

    /// Node ids from the root down to `id`, inclusive.
    pub fn chain(&self, id: NodeId) -> Vec<NodeId> {
        let mut out = vec![id];
        let mut cur = id;
        while let Some(p) = self.nodes[cur].parent {
            out.push(p);
            cur = p;
        }
        out.reverse();
        out
    }

    /// Actions from the root to `id`.
    pub fn path(&self, id: NodeId) -> Vec<AttributeKind> {
        self.chain(id).iter().filter_map(|&n| self.nodes[n].action).collect()
    }

    pub fn is_terminal(&self, id: NodeId) -> bool {
        let n = &self.nodes[id];
        match &n.state {
            NodeState::Ready(e) => e.satisfied || n.depth >= self.cfg.max_depth,
            _ => false,
        }
    }

    /// True when no simulation through `id` could produce a new summary.
    pub fn is_exhausted(&self, id: NodeId) -> bool {
        let n = &self.nodes[id];
        match n.state {
            NodeState::Failed(_) => true,
            NodeState::Stub => false,
            NodeState::Ready(_) => {
                self.is_terminal(id) || (!n.children.is_empty() && n.children.iter().all(|&c| self.is_exhausted(c)))
            }
        }
    }

    fn selectable(&self, id: NodeId) -> bool {
        match self.nodes[id].state {
            NodeState::Failed(_) => false,
            _ => !(self.cfg.skip_exhausted && self.is_exhausted(id)),
        }
    }

    /// PUCT argmax over the selectable children of `parent`; ties go to the
    /// earliest child.
    pub fn best_child(&self, parent: NodeId) -> Option<NodeId> {
        let children = &self.nodes[parent].children;
        let total: u64 = children.iter().map(|&c| self.nodes[c].visits).sum();
        let c_puct = exploration_coeff(total, self.cfg.c_base, self.cfg.c_init);
        let mut best: Option<(NodeId, f64)> = None;
        for &c in children {
            if !self.selectable(c) {
                continue;
            }
            let n = &self.nodes[c];
            let score = puct_score(n.mean_value(), n.prior, total, n.visits, c_puct);
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((c, score));
            }
        }
        best.map(|(c, _)| c)
    }

    /// Descends from the root by PUCT.
    pub fn select(&self) -> Descent {
        let mut cur = self.root();
        if self.cfg.skip_exhausted && self.is_exhausted(cur) {
            return Descent::Terminal(cur);
        }
        loop {
            let n = &self.nodes[cur];
            match n.state {
                NodeState::Stub => return Descent::Stub(cur),
                NodeState::Failed(_) => unreachable!("failed nodes are never selected"),
                NodeState::Ready(_) => {}
            }
            if self.is_terminal(cur) {
                return Descent::Terminal(cur);
            }
            if n.children.is_empty() {
                return Descent::Leaf(cur);
            }
            match self.best_child(cur) {
                Some(c) => cur = c,
                None => return Descent::Terminal(cur),
            }
        }
    }

    /// Adds one stub per legal action under `id`.
    pub fn expand(&mut self, id: NodeId, legal: &[AttributeKind], priors: &[f64]) -> Result<Vec<NodeId>, SearchError> {
        let depth = self.nodes[id].depth;
        if depth >= self.cfg.max_depth {
            return Err(SearchError::DepthExceeded {
                depth,
                max_depth: self.cfg.max_depth,
            });
        }
        if self.is_terminal(id) || !self.nodes[id].children.is_empty() || self.evaluation(id).is_none() {
            return Err(SearchError::NotExpandable(id));
        }
        if priors.len() != legal.len() {
            return Err(SearchError::InvalidConfig(format!(
                "{} priors for {} actions",
                priors.len(),
                legal.len()
            )));
        }
        let mut created = Vec::with_capacity(legal.len());
        for (&action, &prior) in legal.iter().zip(priors) {
            let child = self.nodes.len();
            self.nodes.push(Node {
                id: child,
                parent: Some(id),
                action: Some(action),
                depth: depth + 1,
                prior,
                visits: 0,
                total_value: 0.0,
                children: Vec::new(),
                state: NodeState::Stub,
            });
            created.push(child);
        }
        self.nodes[id].children = created.clone();
        Ok(created)
    }

    pub fn materialize(&mut self, id: NodeId, eval: Evaluation) {
        debug_assert!(
            matches!(self.nodes[id].state, NodeState::Stub),
            "summaries are generated once"
        );
        self.nodes[id].state = NodeState::Ready(eval);
    }

    pub fn mark_failed(&mut self, id: NodeId, message: String) {
        self.nodes[id].state = NodeState::Failed(message);
    }

    /// Adds `value` to every edge from the root to `leaf`.
    pub fn backpropagate(&mut self, leaf: NodeId, value: f64) {
        for id in self.chain(leaf) {
            let n = &mut self.nodes[id];
            n.visits += 1;
            n.total_value += value;
        }
    }

    /// Highest-degree materialized node; ties go to the shallower node, then
    /// the earlier one.
    pub fn decide(&self) -> NodeId {
        let mut best = self.root();
        let mut best_key = (f64::NEG_INFINITY, usize::MAX);
        for n in &self.nodes {
            if let NodeState::Ready(e) = &n.state {
                let d = e.breakdown.degree;
                if d > best_key.0 || (d == best_key.0 && n.depth < best_key.1) {
                    best = n.id;
                    best_key = (d, n.depth);
                }
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;
    use AttributeKind::*;

    fn eval(degree: f64, satisfied: bool) -> Evaluation {
        Evaluation {
            summary: format!("s{degree}"),
            measured: AttributeVector::default(),
            breakdown: DegreeBreakdown {
                per_attribute: BTreeMap::new(),
                avg_det: 0.0,
                avg_nondet: 0.0,
                degree,
            },
            heuristic: None,
            value: degree,
            satisfied,
        }
    }

    fn tree(max_depth: usize) -> SearchTree {
        let cfg = SearchConfig {
            max_depth,
            ..SearchConfig::default()
        };
        SearchTree::new(eval(0.28, false), cfg)
    }

    #[test]
    fn fresh_root_is_leaf() {
        assert_eq!(tree(5).select(), Descent::Leaf(0));
    }

    #[test]
    fn expansion_is_full_width_and_revisits() {
        let mut t = tree(5);
        let kids = t.expand(0, &AttributeKind::ALL, &[0.2; 5]).unwrap();
        assert_eq!(kids.len(), 5);
        t.materialize(kids[1], eval(0.3, false));
        let grand = t.expand(kids[1], &[Length, Topic], &[0.5, 0.5]).unwrap();
        assert_eq!(t.node(grand[0]).action, Some(Length));
        assert_eq!(t.node(grand[0]).depth, 2);
        assert_eq!(t.path(grand[0]), vec![Length, Length]);
        assert!(t.expand(kids[1], &[Length], &[1.0]).is_err());
    }

    #[test]
    fn depth_limit() {
        let mut t = tree(1);
        let kids = t.expand(0, &[Length], &[1.0]).unwrap();
        t.materialize(kids[0], eval(0.5, false));
        assert!(t.is_terminal(kids[0]));
        assert_eq!(
            t.expand(kids[0], &[Length], &[1.0]),
            Err(SearchError::DepthExceeded { depth: 1, max_depth: 1 })
        );
    }

    #[test]
    fn backprop_statistics() {
        let mut t = tree(5);
        let kids = t.expand(0, &[Length, Topic], &[0.5, 0.5]).unwrap();
        t.materialize(kids[0], eval(0.5, false));
        t.backpropagate(kids[0], 0.5);
        let n = t.node(kids[0]);
        assert_eq!((n.visits, n.total_value, n.mean_value()), (1, 0.5, 0.5));
        t.backpropagate(kids[0], 0.3);
        let n = t.node(kids[0]);
        assert_eq!(n.visits, 2);
        assert!((n.total_value - 0.8).abs() < 1e-12);
        assert!((n.mean_value() - 0.4).abs() < 1e-12);
        assert_eq!(t.node(kids[1]).visits, 0);
    }

    #[test]
    fn descent_follows_dominant_value() {
        let mut t = tree(5);
        let kids = t.expand(0, &[Extractiveness, Length], &[0.5, 0.5]).unwrap();
        t.materialize(kids[0], eval(0.1, false));
        t.materialize(kids[1], eval(5.0, false));
        t.backpropagate(kids[0], 0.1);
        t.backpropagate(kids[1], 5.0);
        let grand = t.expand(kids[1], &[Extractiveness, Length], &[0.5, 0.5]).unwrap();
        assert_eq!(t.select(), Descent::Stub(grand[0]));
        assert_eq!(t.chain(grand[0]), vec![0, kids[1], grand[0]]);
    }

    #[test]
    fn terminal_stops_descent() {
        let mut t = tree(5);
        let kids = t.expand(0, &[Length], &[1.0]).unwrap();
        t.materialize(kids[0], eval(2.0, true));
        t.backpropagate(kids[0], 2.0);
        let cfg = SearchConfig {
            skip_exhausted: false,
            ..t.config().clone()
        };
        let literal = SearchTree { cfg, ..t.clone() };
        assert_eq!(literal.select(), Descent::Terminal(kids[0]));
        // with skipping, the only child is spent so the root reports terminal
        assert_eq!(t.select(), Descent::Terminal(0));
    }

    #[test]
    fn unvisited_stub_ties_go_to_first() {
        let mut t = tree(5);
        let kids = t.expand(0, &[Extractiveness, Length, Topic], &[1.0 / 3.0; 3]).unwrap();
        assert_eq!(t.select(), Descent::Stub(kids[0]));
    }

    #[test]
    fn failed_children_are_avoided() {
        let mut t = tree(5);
        let kids = t.expand(0, &[Extractiveness, Length], &[0.5, 0.5]).unwrap();
        t.mark_failed(kids[0], "boom".into());
        assert_eq!(t.select(), Descent::Stub(kids[1]));
    }

    #[test]
    fn decision_prefers_degree_then_depth() {
        let mut t = tree(5);
        assert_eq!(t.decide(), 0);
        let kids = t.expand(0, &[Length, Topic], &[0.5, 0.5]).unwrap();
        t.materialize(kids[0], eval(0.31, false));
        assert_eq!(t.decide(), kids[0]);
        let grand = t.expand(kids[0], &[Length], &[1.0]).unwrap();
        t.materialize(grand[0], eval(0.9, false));
        let deep = t.expand(grand[0], &[Length], &[1.0]).unwrap();
        t.materialize(deep[0], eval(0.9, false));
        t.materialize(kids[1], eval(0.9, false));
        // depth 1 beats depths 2 and 3 at equal degree
        assert_eq!(t.decide(), kids[1]);
    }
}
