//! Python view of the pipeline: graphs, coarsening, expansion,
//! the MMD battery, cost estimates, and the full command runner.

use std::path::Path;

use pyo3::exceptions::{PyFileNotFoundError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use lgdc_core::config::RunConfig;
use lgdc_core::datasets::{DatasetSpec, Family, SbmParams};
use lgdc_core::expansion::{expand, refine, ExpansionVector};
use lgdc_core::io::to_dot;
use lgdc_core::iso::are_isomorphic;
use lgdc_core::metrics::{self, ALL_KINDS};
use lgdc_core::pipeline::{self, Command};
use lgdc_core::{coarsen, datasets, flops, rng, Graph};

fn to_py(e: lgdc_core::Error) -> PyErr {
    use lgdc_core::Error as E;
    match e {
        E::Config(_) => PyValueError::new_err(e.to_string()),
        E::MissingArtifact(_) => PyFileNotFoundError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Weighted undirected graph with optional node labels.
#[pyclass(name = "Graph", from_py_object)]
#[derive(Clone)]
struct PyGraph {
    inner: Graph,
}

#[pymethods]
impl PyGraph {
    #[new]
    #[pyo3(signature = (n, edges, labels=None))]
    fn new(
        n: usize,
        edges: Vec<(usize, usize, f64)>,
        labels: Option<Vec<usize>>,
    ) -> PyResult<Self> {
        let mut g = Graph::from_edges(n, &edges).map_err(to_py)?;
        if let Some(l) = labels {
            g = g.with_labels(l).map_err(to_py)?;
        }
        Ok(PyGraph { inner: g })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m()
    }

    fn edges(&self) -> Vec<(usize, usize, f64)> {
        self.inner.edges().collect()
    }

    fn labels(&self) -> Option<Vec<usize>> {
        self.inner.node_labels().map(|l| l.to_vec())
    }

    fn is_connected(&self) -> bool {
        self.inner.is_connected()
    }

    fn is_tree(&self) -> bool {
        self.inner.is_tree()
    }

    fn to_dot(&self) -> String {
        to_dot(&self.inner)
    }

    fn __repr__(&self) -> String {
        format!("Graph(n={}, m={})", self.inner.n(), self.inner.m())
    }
}

/// One coarsening outcome: the labeled coarse graph, the cluster sizes,
/// the keep mask over its canonical candidate edges, and the spectral
/// distortion achieved.
#[pyclass(name = "Coarsening")]
struct PyCoarsening {
    #[pyo3(get)]
    coarse: PyGraph,
    #[pyo3(get)]
    sizes: Vec<usize>,
    #[pyo3(get)]
    keep: Vec<bool>,
    #[pyo3(get)]
    epsilon: f64,
}

fn parse_family(name: &str) -> PyResult<Family> {
    Family::parse(name).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (family, count, n_min, n_max, seed, communities=2, p_in=0.3, p_out=0.05))]
#[allow(clippy::too_many_arguments)]
fn generate(
    family: &str,
    count: usize,
    n_min: usize,
    n_max: usize,
    seed: u64,
    communities: usize,
    p_in: f64,
    p_out: f64,
) -> PyResult<Vec<PyGraph>> {
    let spec = DatasetSpec {
        family: parse_family(family)?,
        count,
        n_min,
        n_max,
        seed,
        sbm: SbmParams { communities, p_in, p_out },
    };
    Ok(datasets::generate(&spec)
        .map_err(to_py)?
        .into_iter()
        .map(|g| PyGraph { inner: g })
        .collect())
}

#[pyfunction]
#[pyo3(signature = (graph, ratio=0.2, v_max=8, k_eig=8, seed=0))]
fn coarsen_graph(
    graph: PyGraph,
    ratio: f64,
    v_max: usize,
    k_eig: usize,
    seed: u64,
) -> PyResult<PyCoarsening> {
    let mut rng = rng::from_seed(seed);
    let r = coarsen::coarsen_to_ratio(&graph.inner, ratio, v_max, k_eig, &mut rng)
        .map_err(to_py)?;
    Ok(PyCoarsening {
        coarse: PyGraph { inner: r.coarse },
        sizes: r.v_star,
        keep: r.e_star,
        epsilon: r.epsilon,
    })
}

/// Deterministic decode of a coarse graph given sizes and a keep mask over
/// the canonical candidate order; the teacher-forced reconstruction.
#[pyfunction]
fn expand_refine(coarse: PyGraph, sizes: Vec<usize>, keep: Vec<bool>) -> PyResult<PyGraph> {
    let v = ExpansionVector(sizes);
    let (skeleton, cands) = expand(&coarse.inner, &v).map_err(to_py)?;
    let fine = refine(&skeleton, &cands, &keep).map_err(to_py)?;
    Ok(PyGraph { inner: fine })
}

#[pyfunction]
fn isomorphic(a: PyGraph, b: PyGraph) -> bool {
    are_isomorphic(&a.inner, &b.inner)
}

fn unwrap_graphs(graphs: Vec<PyGraph>) -> Vec<Graph> {
    graphs.into_iter().map(|g| g.inner).collect()
}

#[pyfunction]
fn mmd(kind: &str, a: Vec<PyGraph>, b: Vec<PyGraph>) -> PyResult<f64> {
    let k = ALL_KINDS
        .iter()
        .copied()
        .find(|k| k.name() == kind)
        .ok_or_else(|| PyValueError::new_err(format!("unknown metric {kind:?}")))?;
    metrics::mmd(k, &unwrap_graphs(a), &unwrap_graphs(b)).map_err(to_py)
}

#[pyfunction]
fn mmd_battery(a: Vec<PyGraph>, b: Vec<PyGraph>) -> PyResult<Vec<(String, f64)>> {
    let values = metrics::mmd_battery(&unwrap_graphs(a), &unwrap_graphs(b)).map_err(to_py)?;
    Ok(ALL_KINDS
        .iter()
        .zip(values)
        .map(|(k, v)| (k.name().to_string(), v))
        .collect())
}

/// (valid, unique, novel, combined) percentages.
#[pyfunction]
fn vun(
    samples: Vec<PyGraph>,
    train: Vec<PyGraph>,
    family: &str,
) -> PyResult<(f64, f64, f64, f64)> {
    let validity = datasets::validity_predicate(parse_family(family)?);
    let v = metrics::vun(&unwrap_graphs(samples), &unwrap_graphs(train), validity)
        .map_err(to_py)?;
    Ok((v.valid, v.unique, v.novel, v.combined))
}

#[pyfunction]
fn flops_oneshot(n: u64, t: u64) -> u128 {
    flops::flops_oneshot(n, t)
}

#[pyfunction]
fn flops_autoregressive(n: u64, t: u64) -> f64 {
    flops::flops_autoregressive(n, t)
}

#[pyfunction]
fn flops_lgdc(n: u64, n_c: u64, t: u64) -> PyResult<u128> {
    flops::flops_lgdc(n, n_c, t).map_err(to_py)
}

/// Run one pipeline command against a config given as text; returns the
/// command's summary.
#[pyfunction]
#[pyo3(signature = (config_text, command, out_dir, seed=None))]
fn run_pipeline(
    config_text: &str,
    command: &str,
    out_dir: &str,
    seed: Option<u64>,
) -> PyResult<String> {
    let cfg = RunConfig::parse(config_text).map_err(to_py)?;
    let cmd = Command::parse(command).map_err(to_py)?;
    let seed = seed.unwrap_or(cfg.seed);
    pipeline::run(&cfg, cmd, Path::new(out_dir), seed).map_err(to_py)
}

#[pymodule]
fn lgdc_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGraph>()?;
    m.add_class::<PyCoarsening>()?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(coarsen_graph, m)?)?;
    m.add_function(wrap_pyfunction!(expand_refine, m)?)?;
    m.add_function(wrap_pyfunction!(isomorphic, m)?)?;
    m.add_function(wrap_pyfunction!(mmd, m)?)?;
    m.add_function(wrap_pyfunction!(mmd_battery, m)?)?;
    m.add_function(wrap_pyfunction!(vun, m)?)?;
    m.add_function(wrap_pyfunction!(flops_oneshot, m)?)?;
    m.add_function(wrap_pyfunction!(flops_autoregressive, m)?)?;
    m.add_function(wrap_pyfunction!(flops_lgdc, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    Ok(())
}
