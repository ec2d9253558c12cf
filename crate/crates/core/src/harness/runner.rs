use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{rouge1_f, CorpusRecord, HarnessError};
use crate::attributes::{measure_all, AttributeKind, AttributeVector, Document, Providers, Targets};
use crate::baselines::{self, BaselineOutcome};
use crate::policy::{PlanVariant, Policy};
use crate::reward::{self, DegreeBreakdown};
use crate::search::{run_search, SearchConfig, SearchTrace};

/// A summarization system under evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Paco,
    Single,
    Implicit,
    Explicit,
    ExplicitAdaptive,
    /// The corpus reference summary, scored like any other output.
    Reference,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Paco,
        Method::Single,
        Method::Implicit,
        Method::Explicit,
        Method::ExplicitAdaptive,
        Method::Reference,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Paco => "paco",
            Method::Single => "single",
            Method::Implicit => "implicit",
            Method::Explicit => "explicit",
            Method::ExplicitAdaptive => "explicit-adaptive",
            Method::Reference => "reference",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| HarnessError::UnknownMethod(s.to_string()))
    }
}

/// An intermediate summary of a planned baseline, measured for the trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub action: Option<AttributeKind>,
    pub summary: String,
    pub measured: Option<AttributeVector>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum MethodDetail {
    Search(Box<SearchTrace>),
    Plan {
        plan: Option<Vec<AttributeKind>>,
        plan_fallback: bool,
        steps: Vec<StepRecord>,
    },
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodOutput {
    pub summary: String,
    pub measured: AttributeVector,
    pub breakdown: DegreeBreakdown,
    pub satisfied: bool,
    pub rouge1: Option<f64>,
    pub quality: Option<f64>,
    pub policy_calls: usize,
    pub detail: MethodDetail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum MethodRecord {
    Ok(Box<MethodOutput>),
    Failed { error: String },
}

/// Everything recorded for one document across methods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentTrace {
    pub doc_id: String,
    pub targets: Targets,
    pub methods: BTreeMap<Method, MethodRecord>,
}

fn score_output(
    doc: &Document,
    summary: String,
    providers: &Providers,
    cfg: &SearchConfig,
    policy_calls: usize,
    detail: MethodDetail,
) -> Result<MethodOutput, String> {
    let measured = measure_all(&summary, doc, providers).map_err(|e| e.to_string())?;
    let breakdown = reward::degree(&measured, &doc.targets, &cfg.reward).map_err(|e| e.to_string())?;
    let satisfied = reward::satisfied(&measured, &doc.targets, &cfg.reward).map_err(|e| e.to_string())?;
    let (rouge1, quality) = match &doc.reference_summary {
        Some(reference) => (
            Some(rouge1_f(&summary, reference).map_err(|e| e.to_string())?),
            Some(
                providers
                    .embedder
                    .pair_score(&summary, reference)
                    .map_err(|e| e.to_string())?,
            ),
        ),
        None => (None, None),
    };
    Ok(MethodOutput {
        summary,
        measured,
        breakdown,
        satisfied,
        rouge1,
        quality,
        policy_calls,
        detail,
    })
}

fn plan_detail(doc: &Document, outcome: &BaselineOutcome, providers: &Providers) -> MethodDetail {
    let steps = outcome
        .steps
        .iter()
        .map(|s| StepRecord {
            action: s.action,
            summary: s.summary.clone(),
            measured: measure_all(&s.summary, doc, providers).ok(),
        })
        .collect();
    MethodDetail::Plan {
        plan: outcome.plan.clone(),
        plan_fallback: outcome.plan_fallback,
        steps,
    }
}

fn run_method(
    doc: &Document,
    method: Method,
    policy: &dyn Policy,
    providers: &Providers,
    cfg: &SearchConfig,
) -> Result<MethodOutput, String> {
    let baseline = |r: Result<BaselineOutcome, baselines::BaselineError>| -> Result<MethodOutput, String> {
        let out = r.map_err(|e| e.to_string())?;
        let detail = plan_detail(doc, &out, providers);
        score_output(doc, out.summary, providers, cfg, out.policy_calls, detail)
    };
    match method {
        Method::Paco => {
            let res = run_search(doc, policy, providers, cfg).map_err(|e| e.to_string())?;
            let trace = res.trace();
            score_output(
                doc,
                res.summary,
                providers,
                cfg,
                res.policy_calls,
                MethodDetail::Search(Box::new(trace)),
            )
        }
        Method::Single => baseline(baselines::single_pass(policy, doc)),
        Method::Implicit => baseline(baselines::implicit_plan(policy, doc)),
        Method::Explicit => baseline(baselines::explicit_plan(policy, doc, PlanVariant::Base)),
        Method::ExplicitAdaptive => baseline(baselines::explicit_plan(policy, doc, PlanVariant::Adaptive)),
        Method::Reference => {
            let reference = doc
                .reference_summary
                .clone()
                .ok_or_else(|| "document has no reference summary".to_string())?;
            score_output(doc, reference, providers, cfg, 0, MethodDetail::None)
        }
    }
}

/// Runs every method on one document. Failures are recorded, not raised.
pub fn run_document(
    doc: &Document,
    methods: &[Method],
    policy: &dyn Policy,
    providers: &Providers,
    cfg: &SearchConfig,
) -> DocumentTrace {
    let methods = methods
        .iter()
        .map(|&m| {
            let record = match run_method(doc, m, policy, providers, cfg) {
                Ok(out) => MethodRecord::Ok(Box::new(out)),
                Err(error) => {
                    tracing::warn!(doc = %doc.id, method = %m, %error, "method failed");
                    MethodRecord::Failed { error }
                }
            };
            (m, record)
        })
        .collect();
    DocumentTrace {
        doc_id: doc.id.clone(),
        targets: doc.targets.clone(),
        methods,
    }
}

/// Runs `methods` over the corpus on up to `jobs` threads. Output order
/// follows the corpus.
pub fn evaluate_corpus(
    records: &[CorpusRecord],
    methods: &[Method],
    policy: &dyn Policy,
    providers: &Providers,
    cfg: &SearchConfig,
    jobs: usize,
) -> Result<Vec<DocumentTrace>, HarnessError> {
    cfg.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| HarnessError::Pool(e.to_string()))?;
    Ok(pool.install(|| {
        records
            .par_iter()
            .map(|r| run_document(&r.document, methods, policy, providers, cfg))
            .collect()
    }))
}
