//! Python bindings: registry, router, scorer, parser, generator and
//! evaluator. Structured values cross the boundary as JSON-derived dicts.

use std::sync::Arc;

use agentgate::benchgen::{self, CategoryCounts, GenSpec};
use agentgate::eval::{self, Split};
use agentgate::fallback;
use agentgate::{AgentCard, Decider, DeciderKind, PipelineConfig, Registry, RoutingInput, SafeguardConfig};
use pyo3::exceptions::{PyKeyError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyAny;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn loads<'py>(py: Python<'py>, json: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (json,))
}

fn safeguards(hint_weight: Option<f64>) -> PyResult<SafeguardConfig> {
    let mut sg = SafeguardConfig::default();
    if let Some(w) = hint_weight {
        sg = sg.with_hint_weight(w);
    }
    sg.validate().map_err(value_err)?;
    Ok(sg)
}

#[pyclass(name = "Registry", frozen)]
struct PyRegistry {
    inner: Registry,
}

#[pymethods]
impl PyRegistry {
    /// Empty registry, or the built-in demo catalog with `demo=True`.
    #[new]
    #[pyo3(signature = (demo = false))]
    fn new(demo: bool) -> PyResult<Self> {
        let inner = if demo {
            Registry::from_cards(benchgen::all_agent_cards()).map_err(value_err)?
        } else {
            Registry::new()
        };
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_json(json: &str) -> PyResult<Self> {
        Ok(Self { inner: Registry::from_json(json).map_err(value_err)? })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self { inner: Registry::load(path).map_err(value_err)? })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn names(&self) -> Vec<String> {
        self.inner.agents().iter().map(|a| a.name.clone()).collect()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// Names of the top-`k` agents for `query`.
    #[pyo3(signature = (query, k = 5, hint_weight = None))]
    fn retrieve(&self, query: &str, k: usize, hint_weight: Option<f64>) -> PyResult<Vec<String>> {
        let cards = self.inner.retrieve_candidates(query, k, &safeguards(hint_weight)?).map_err(value_err)?;
        Ok(cards.into_iter().map(|c| c.name).collect())
    }
}

#[pyclass(name = "Router", frozen)]
struct PyRouter {
    inner: agentgate::Router,
}

fn decider(kind: &str, sg: &SafeguardConfig) -> PyResult<Arc<dyn Decider>> {
    let kind: DeciderKind = kind.parse().map_err(value_err)?;
    if kind == DeciderKind::Remote {
        return Err(PyValueError::new_err("remote backends are configured through the CLI or service"));
    }
    agentgate::DeciderConfig { kind, remote: None }.build(sg).map_err(value_err)
}

#[pymethods]
impl PyRouter {
    /// `backend` and `cloud` are `"rule"` or `"rank"`.
    #[new]
    #[pyo3(signature = (backend = "rule", tau = 0.8, cloud = None, hint_weight = None))]
    fn new(backend: &str, tau: f64, cloud: Option<&str>, hint_weight: Option<f64>) -> PyResult<Self> {
        let sg = safeguards(hint_weight)?;
        let mut cfg = PipelineConfig::new(decider(backend, &sg)?, sg.clone()).with_tau(tau);
        if let Some(c) = cloud {
            cfg = cfg.with_cloud(decider(c, &sg)?);
        }
        Ok(Self { inner: agentgate::Router::new(cfg).map_err(value_err)? })
    }

    /// Routes `query` over named candidates from `registry` (all of them
    /// when `candidates` is None). Returns the output as a dict, plus the
    /// trace under `"trace"` when asked.
    #[pyo3(signature = (registry, query, candidates = None, context = None, trace = false))]
    fn route<'py>(
        &self,
        py: Python<'py>,
        registry: &PyRegistry,
        query: &str,
        candidates: Option<Vec<String>>,
        context: Option<String>,
        trace: bool,
    ) -> PyResult<Bound<'py, PyAny>> {
        let cards: Vec<AgentCard> = match candidates {
            Some(names) => registry.inner.resolve(&names).map_err(|e| PyKeyError::new_err(e.to_string()))?,
            None => registry.inner.agents().to_vec(),
        };
        let input = RoutingInput::new(query, cards, context).map_err(value_err)?;
        let (output, t) = py.detach(|| self.inner.route(&input)).map_err(value_err)?;
        let out = loads(py, &output.to_canonical_json())?;
        if trace {
            out.set_item("trace", loads(py, &serde_json::to_string(&t).map_err(value_err)?)?)?;
        }
        Ok(out)
    }
}

/// Lexical relevance of an agent card (JSON) to `query`.
#[pyfunction]
#[pyo3(signature = (card_json, query, hints = None, hint_weight = 2.0))]
fn heuristic_score(card_json: &str, query: &str, hints: Option<Vec<String>>, hint_weight: f64) -> PyResult<f64> {
    let card: AgentCard = serde_json::from_str(card_json).map_err(value_err)?;
    let mut sg = SafeguardConfig::default().with_hint_weight(hint_weight);
    if let Some(h) = hints {
        sg = sg.with_hints(h);
    }
    Ok(fallback::heuristic_score(&card, query, &sg))
}

/// Strict parse of a routing output; raises ValueError on failure.
#[pyfunction]
fn parse_routing_output<'py>(py: Python<'py>, raw: &str) -> PyResult<Bound<'py, PyAny>> {
    let out = agentgate::parse_routing_output(raw).map_err(value_err)?;
    loads(py, &out.to_canonical_json())
}

/// Benchmark JSONL (header line first).
#[pyfunction]
#[pyo3(signature = (seed = 42, counts = (200, 60, 40, 20), hard_negative_fraction = 0.25))]
fn generate_benchmark(seed: u64, counts: (usize, usize, usize, usize), hard_negative_fraction: f64) -> PyResult<String> {
    let (call, plan, direct, escalate) = counts;
    let spec = GenSpec {
        seed,
        counts: CategoryCounts { call, plan, direct, escalate },
        hard_negative_fraction,
        ..GenSpec::default()
    };
    benchgen::generate_jsonl(&spec).map_err(value_err)
}

/// Metrics report for `router` over benchmark JSONL text.
#[pyfunction]
#[pyo3(signature = (router, bench_jsonl, split = None))]
fn evaluate<'py>(
    py: Python<'py>,
    router: &PyRouter,
    bench_jsonl: &str,
    split: Option<&str>,
) -> PyResult<Bound<'py, PyAny>> {
    let split = split.map(str::parse::<Split>).transpose().map_err(PyValueError::new_err)?;
    let instances = eval::filter_split(eval::parse_benchmark(bench_jsonl).map_err(value_err)?, split);
    let report = py.detach(|| eval::evaluate(&router.inner, &instances)).map_err(value_err)?;
    loads(py, &serde_json::to_string(&report).map_err(value_err)?)
}

#[pymodule]
#[pyo3(name = "agentgate")]
fn agentgate_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyRegistry>()?;
    m.add_class::<PyRouter>()?;
    m.add_function(wrap_pyfunction!(heuristic_score, m)?)?;
    m.add_function(wrap_pyfunction!(parse_routing_output, m)?)?;
    m.add_function(wrap_pyfunction!(generate_benchmark, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    Ok(())
}
