//! Summary-level MCTS.
//!
//! Each node holds a full summary. Edges carry the usual PUCT statistics
//! (visits, cumulative value, prior). A simulation descends by PUCT, expands
//! a leaf into one stub per legal action, generates and scores one stub and
//! backs its value up the path. The answer is the highest-degree node
//! anywhere in the tree, the root included.

mod tree;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attributes::{measure_all, AttributeError, AttributeKind, Document, Providers};
use crate::policy::{self, History, Policy, PolicyError};
use crate::reward::{self, DegreeBreakdown, RewardConfig, RewardError};

pub use tree::{Descent, Evaluation, Node, NodeId, NodeState, SearchTree};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SearchError {
    #[error("invalid search configuration: {0}")]
    InvalidConfig(String),
    #[error("generating the initial summary: {0}")]
    RootGeneration(#[source] PolicyError),
    #[error("scoring the initial summary: {0}")]
    RootEvaluation(String),
    #[error("node at depth {depth} cannot be expanded (max depth {max_depth})")]
    DepthExceeded { depth: usize, max_depth: usize },
    #[error("node {0} cannot be expanded")]
    NotExpandable(NodeId),
    #[error(transparent)]
    Reward(#[from] RewardError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    pub simulations: usize,
    pub max_depth: usize,
    pub c_base: f64,
    pub c_init: f64,
    /// Skip subtrees with nothing left to generate. Off reproduces plain
    /// PUCT descent, which may revisit terminal nodes.
    pub skip_exhausted: bool,
    #[serde(flatten)]
    pub reward: RewardConfig,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            simulations: 8,
            max_depth: 5,
            c_base: 19652.0,
            c_init: 1.25,
            skip_exhausted: true,
            reward: RewardConfig::default(),
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), SearchError> {
        if self.simulations < 1 {
            return Err(SearchError::InvalidConfig("simulations must be at least 1".into()));
        }
        if self.max_depth < 1 {
            return Err(SearchError::InvalidConfig("max_depth must be at least 1".into()));
        }
        if !(self.c_base > 0.0 && self.c_base.is_finite()) {
            return Err(SearchError::InvalidConfig("c_base must be positive".into()));
        }
        if !self.c_init.is_finite() {
            return Err(SearchError::InvalidConfig("c_init must be finite".into()));
        }
        self.reward.validate()?;
        Ok(())
    }
}

/// `ln((total_visits + c_base + 1) / c_base) + c_init`.
pub fn exploration_coeff(total_visits: u64, c_base: f64, c_init: f64) -> f64 {
    ((total_visits as f64 + c_base + 1.0) / c_base).ln() + c_init
}

/// `q + c_puct * prior * sqrt(total_visits) / (1 + child_visits)`.
pub fn puct_score(mean_value: f64, prior: f64, total_visits: u64, child_visits: u64, c_puct: f64) -> f64 {
    mean_value + c_puct * prior * (total_visits as f64).sqrt() / (1.0 + child_visits as f64)
}

/// Search output plus the whole tree.
#[derive(Debug, Clone)]
pub struct SearchResult {
    pub doc_id: String,
    pub best: NodeId,
    pub summary: String,
    pub breakdown: DegreeBreakdown,
    pub path: Vec<AttributeKind>,
    /// Simulations that ended in a backpropagation.
    pub simulations: usize,
    /// Evaluations that failed and were skipped.
    pub failures: usize,
    /// Initial plus adjustment calls.
    pub policy_calls: usize,
    pub heuristic_calls: usize,
    pub tree: SearchTree,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceNode {
    pub id: NodeId,
    pub parent: Option<NodeId>,
    pub action: Option<AttributeKind>,
    pub depth: usize,
    pub status: String,
    pub summary: Option<String>,
    pub measured: Option<crate::attributes::AttributeVector>,
    pub degree: Option<f64>,
    #[serde(rename = "N")]
    pub visits: u64,
    #[serde(rename = "W")]
    pub total_value: f64,
    #[serde(rename = "Q")]
    pub mean_value: f64,
    pub prior: f64,
    pub value: Option<f64>,
    pub heuristic: Option<f64>,
    pub terminal: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

/// Serializable view of a finished search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchTrace {
    pub doc_id: String,
    pub best_id: NodeId,
    pub best_path: Vec<AttributeKind>,
    pub best_degree: f64,
    pub simulations: usize,
    pub failures: usize,
    pub policy_calls: usize,
    pub heuristic_calls: usize,
    pub nodes: Vec<TraceNode>,
}

impl SearchResult {
    pub fn trace(&self) -> SearchTrace {
        let nodes = self
            .tree
            .nodes()
            .iter()
            .map(|n| {
                let (status, eval, error) = match &n.state {
                    NodeState::Stub => ("stub", None, None),
                    NodeState::Ready(e) => ("ready", Some(e), None),
                    NodeState::Failed(msg) => ("failed", None, Some(msg.clone())),
                };
                TraceNode {
                    id: n.id,
                    parent: n.parent,
                    action: n.action,
                    depth: n.depth,
                    status: status.into(),
                    summary: eval.map(|e| e.summary.clone()),
                    measured: eval.map(|e| e.measured.clone()),
                    degree: eval.map(|e| e.breakdown.degree),
                    visits: n.visits,
                    total_value: n.total_value,
                    mean_value: n.mean_value(),
                    prior: n.prior,
                    value: eval.map(|e| e.value),
                    heuristic: eval.and_then(|e| e.heuristic),
                    terminal: self.tree.is_terminal(n.id),
                    error,
                }
            })
            .collect();
        SearchTrace {
            doc_id: self.doc_id.clone(),
            best_id: self.best,
            best_path: self.path.clone(),
            best_degree: self.breakdown.degree,
            simulations: self.simulations,
            failures: self.failures,
            policy_calls: self.policy_calls,
            heuristic_calls: self.heuristic_calls,
            nodes,
        }
    }
}

struct Evaluator<'a> {
    doc: &'a Document,
    policy: &'a dyn Policy,
    providers: &'a Providers,
    reward: &'a RewardConfig,
    policy_calls: usize,
    heuristic_calls: usize,
}

impl Evaluator<'_> {
    /// Measures and scores a summary. `path` is `None` for the root, whose
    /// value is its degree.
    fn score(&mut self, summary: String, path: Option<&[AttributeKind]>) -> Result<Evaluation, String> {
        let measured = measure_all(&summary, self.doc, self.providers).map_err(|e: AttributeError| e.to_string())?;
        let breakdown = reward::degree(&measured, &self.doc.targets, self.reward).map_err(|e| e.to_string())?;
        let satisfied = reward::satisfied(&measured, &self.doc.targets, self.reward).map_err(|e| e.to_string())?;
        let (heuristic, value) = match path {
            Some(path) if self.reward.value_mode.uses_heuristic() => {
                self.heuristic_calls += 1;
                let h = policy::yes_probability(self.policy, self.doc, &summary, path).map_err(|e| e.to_string())?;
                let v =
                    reward::node_value(breakdown.degree, Some(h), self.reward.value_mode).map_err(|e| e.to_string())?;
                (Some(h), v)
            }
            _ => (None, breakdown.degree),
        };
        Ok(Evaluation {
            summary,
            measured,
            breakdown,
            heuristic,
            value,
            satisfied,
        })
    }

    fn root(&mut self) -> Result<Evaluation, SearchError> {
        self.policy_calls += 1;
        let summary = policy::generate_initial(self.policy, self.doc).map_err(SearchError::RootGeneration)?;
        self.score(summary, None).map_err(SearchError::RootEvaluation)
    }

    fn child(&mut self, tree: &SearchTree, stub: NodeId) -> Result<Evaluation, String> {
        let chain = tree.chain(stub);
        let root = tree.evaluation(chain[0]).expect("root is materialized");
        let mut history = History::new(root.summary.clone());
        for &id in &chain[1..chain.len() - 1] {
            let node = tree.node(id);
            let eval = tree.evaluation(id).expect("ancestors are materialized");
            history.push(node.action.expect("non-root has an action"), eval.summary.clone());
        }
        let action = tree.node(stub).action.expect("stub has an action");
        self.policy_calls += 1;
        let summary = policy::adjust(self.policy, self.doc, &history, action).map_err(|e| e.to_string())?;
        let mut path = history.path();
        path.push(action);
        self.score(summary, Some(&path))
    }
}

/// Runs `cfg.simulations` simulations for `doc` and returns the best node.
pub fn run_search(
    doc: &Document,
    policy: &dyn Policy,
    providers: &Providers,
    cfg: &SearchConfig,
) -> Result<SearchResult, SearchError> {
    cfg.validate()?;
    if cfg.reward.value_mode.uses_heuristic() && !policy.supports_heuristic() {
        return Err(RewardError::HeuristicUnavailable.into());
    }
    let legal = doc.legal_actions();
    let mut ev = Evaluator {
        doc,
        policy,
        providers,
        reward: &cfg.reward,
        policy_calls: 0,
        heuristic_calls: 0,
    };
    let mut tree = SearchTree::new(ev.root()?, cfg.clone());
    let (mut completed, mut failures) = (0usize, 0usize);

    for sim in 0..cfg.simulations {
        let target = match tree.select() {
            Descent::Terminal(id) if id == tree.root() => {
                tracing::debug!(doc = %doc.id, sim, "nothing left to explore");
                break;
            }
            Descent::Terminal(id) => {
                let value = tree.evaluation(id).map(|e| e.value).unwrap_or(0.0);
                tree.backpropagate(id, value);
                completed += 1;
                continue;
            }
            Descent::Leaf(id) => {
                let summary = &tree.evaluation(id).expect("leaf is materialized").summary;
                let priors = policy::action_priors(policy, doc, summary, &legal);
                tree.expand(id, &legal, &priors)?;
                tree.best_child(id).expect("fresh children are selectable")
            }
            Descent::Stub(id) => id,
        };
        match ev.child(&tree, target) {
            Ok(eval) => {
                let value = eval.value;
                tree.materialize(target, eval);
                tree.backpropagate(target, value);
                completed += 1;
            }
            Err(message) => {
                tracing::warn!(doc = %doc.id, node = target, %message, "evaluation failed");
                tree.mark_failed(target, message);
                failures += 1;
            }
        }
    }

    let best = tree.decide();
    let eval = tree.evaluation(best).expect("decision is materialized");
    Ok(SearchResult {
        doc_id: doc.id.clone(),
        best,
        summary: eval.summary.clone(),
        breakdown: eval.breakdown.clone(),
        path: tree.path(best),
        simulations: completed,
        failures,
        policy_calls: ev.policy_calls,
        heuristic_calls: ev.heuristic_calls,
        tree,
    })
}
