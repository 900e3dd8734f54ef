//! Named dense tensors, the Adam optimizer, and the text checkpoint format.
//!
//! Checkpoints are line-oriented text:
//! ```text
//! #ckpt lgdc 1 a=<node_cats> b=<edge_cats> d=<hidden> L=<layers>
//! param <name> <rank> <dim...>
//! <numel/last_dim lines of last_dim values each, printed as {:.16e}>
//! ```
//! 17 significant digits round-trip f64 exactly and the store preserves
//! insertion order, so save -> load -> save is byte-identical.

use std::fmt::Write as _;
use std::path::Path;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    dims: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(dims: &[usize]) -> Tensor {
        let numel = dims.iter().product();
        Tensor { dims: dims.to_vec(), data: vec![0.0; numel] }
    }

    pub fn from_vec(dims: &[usize], data: Vec<f64>) -> Result<Tensor> {
        let numel: usize = dims.iter().product();
        if data.len() != numel {
            return Err(Error::Checkpoint(format!(
                "{} values for shape {dims:?}",
                data.len()
            )));
        }
        Ok(Tensor { dims: dims.to_vec(), data })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Row i of a rank-2 tensor (row-major).
    pub fn row(&self, i: usize) -> &[f64] {
        debug_assert_eq!(self.dims.len(), 2);
        let c = self.dims[1];
        &self.data[i * c..(i + 1) * c]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        debug_assert_eq!(self.dims.len(), 2);
        let c = self.dims[1];
        &mut self.data[i * c..(i + 1) * c]
    }
}

/// Ordered collection of named tensors. Order is part of the on-disk
/// format, hence the Vec rather than a map; lookups are linear but the
/// stores here hold tens of entries.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TensorStore {
    items: Vec<(String, Tensor)>,
}

impl TensorStore {
    pub fn new() -> TensorStore {
        TensorStore::default()
    }

    pub fn insert(&mut self, name: &str, t: Tensor) {
        assert!(
            self.get(name).is_none(),
            "duplicate tensor {name:?}; checkpoint names must be unique"
        );
        self.items.push((name.to_string(), t));
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.items.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.items.iter_mut().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn expect(&self, name: &str) -> Result<&Tensor> {
        self.get(name)
            .ok_or_else(|| Error::Checkpoint(format!("missing tensor {name:?}")))
    }

    pub fn remove(&mut self, name: &str) -> Option<Tensor> {
        let idx = self.items.iter().position(|(n, _)| n == name)?;
        Some(self.items.remove(idx).1)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.items.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor)> {
        self.items.iter_mut().map(|(n, t)| (n.as_str(), t))
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Same names and shapes, all zeros. Gradient accumulators start here.
    pub fn zeros_like(&self) -> TensorStore {
        TensorStore {
            items: self
                .items
                .iter()
                .map(|(n, t)| (n.clone(), Tensor::zeros(t.dims())))
                .collect(),
        }
    }

    /// self += scale * other, matched by name.
    pub fn add_scaled(&mut self, other: &TensorStore, scale: f64) {
        for (name, t) in &mut self.items {
            if let Some(o) = other.get(name) {
                for (a, b) in t.data.iter_mut().zip(o.data()) {
                    *a += scale * b;
                }
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for (_, t) in &mut self.items {
            for a in &mut t.data {
                *a *= s;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CkptMeta {
    pub node_cats: usize,
    pub edge_cats: usize,
    pub hidden: usize,
    pub layers: usize,
}

pub fn render_checkpoint(meta: &CkptMeta, store: &TensorStore) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "#ckpt lgdc 1 a={} b={} d={} L={}",
        meta.node_cats, meta.edge_cats, meta.hidden, meta.layers
    )
    .expect("string write");
    for (name, t) in store.iter() {
        write!(out, "param {name} {}", t.dims().len()).expect("string write");
        for d in t.dims() {
            write!(out, " {d}").expect("string write");
        }
        out.push('\n');
        let cols = *t.dims().last().expect("rank >= 1");
        for row in t.data().chunks(cols.max(1)) {
            for (k, v) in row.iter().enumerate() {
                if k > 0 {
                    out.push(' ');
                }
                write!(out, "{v:.16e}").expect("string write");
            }
            out.push('\n');
        }
    }
    out
}

pub fn save_checkpoint(path: &Path, meta: &CkptMeta, store: &TensorStore) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, render_checkpoint(meta, store))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(CkptMeta, TensorStore)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::MissingArtifact(format!("{}: {e}", path.display())))?;
    parse_checkpoint(&text).map_err(|e| match e {
        Error::Checkpoint(msg) => Error::Checkpoint(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn render_checkpoint_stamped(
    run: &crate::io::RunStamp,
    meta: &CkptMeta,
    store: &TensorStore,
) -> String {
    let mut out = crate::io::render_run_stamp(run);
    out.push_str(&render_checkpoint(meta, store));
    out
}

pub fn save_checkpoint_stamped(
    path: &Path,
    run: &crate::io::RunStamp,
    meta: &CkptMeta,
    store: &TensorStore,
) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, render_checkpoint_stamped(run, meta, store))?;
    Ok(())
}

pub fn load_checkpoint_stamped(
    path: &Path,
) -> Result<(Option<crate::io::RunStamp>, CkptMeta, TensorStore)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::MissingArtifact(format!("{}: {e}", path.display())))?;
    parse_checkpoint_stamped(&text).map_err(|e| match e {
        Error::Checkpoint(msg) => Error::Checkpoint(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Stamp-aware parse; files written without a stamp yield `None`.
pub fn parse_checkpoint_stamped(
    text: &str,
) -> Result<(Option<crate::io::RunStamp>, CkptMeta, TensorStore)> {
    if text.starts_with("#run") {
        let (line, body) = text
            .split_once('\n')
            .ok_or_else(|| Error::Checkpoint("truncated run stamp".into()))?;
        let run = crate::io::parse_run_stamp(line)
            .map_err(|e| Error::Checkpoint(e.to_string()))?;
        let (meta, store) = parse_checkpoint(body)?;
        Ok((Some(run), meta, store))
    } else {
        let (meta, store) = parse_checkpoint(text)?;
        Ok((None, meta, store))
    }
}

pub fn parse_checkpoint(text: &str) -> Result<(CkptMeta, TensorStore)> {
    let bad = |msg: String| Error::Checkpoint(msg);
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad("empty file".into()))?;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    if tokens.len() != 7 || tokens[0] != "#ckpt" || tokens[1] != "lgdc" {
        return Err(bad(format!("bad header {header:?}")));
    }
    if tokens[2] != "1" {
        return Err(bad(format!("unsupported format version {}", tokens[2])));
    }
    let mut meta = CkptMeta { node_cats: 0, edge_cats: 0, hidden: 0, layers: 0 };
    for tok in &tokens[3..] {
        let (k, v) = tok.split_once('=').ok_or_else(|| bad(format!("bad field {tok:?}")))?;
        let v: usize = v.parse().map_err(|e| bad(format!("bad {k}: {e}")))?;
        match k {
            "a" => meta.node_cats = v,
            "b" => meta.edge_cats = v,
            "d" => meta.hidden = v,
            "L" => meta.layers = v,
            other => return Err(bad(format!("unknown header field {other:?}"))),
        }
    }

    let mut store = TensorStore::new();
    while let Some(line) = lines.next() {
        if line.trim().is_empty() {
            continue;
        }
        let mut tok = line.split_whitespace();
        if tok.next() != Some("param") {
            return Err(bad(format!("expected param line, got {line:?}")));
        }
        let name = tok.next().ok_or_else(|| bad("param line missing name".into()))?;
        let rank: usize = tok
            .next()
            .ok_or_else(|| bad("param line missing rank".into()))?
            .parse()
            .map_err(|e| bad(format!("bad rank: {e}")))?;
        if rank == 0 {
            return Err(bad(format!("tensor {name:?} has rank 0")));
        }
        let dims: std::result::Result<Vec<usize>, _> = tok.map(str::parse).collect();
        let dims = dims.map_err(|e| bad(format!("bad dim: {e}")))?;
        if dims.len() != rank {
            return Err(bad(format!("tensor {name:?}: {} dims for rank {rank}", dims.len())));
        }
        let cols = *dims.last().expect("rank >= 1");
        let numel: usize = dims.iter().product();
        let rows = if cols == 0 { 0 } else { numel / cols };
        let mut data = Vec::with_capacity(numel);
        for r in 0..rows {
            let row = lines
                .next()
                .ok_or_else(|| bad(format!("tensor {name:?}: missing value row {r}")))?;
            for v in row.split_whitespace() {
                let x: f64 = v
                    .parse()
                    .map_err(|e| bad(format!("tensor {name:?}: bad value {v:?}: {e}")))?;
                data.push(x);
            }
            if data.len() != (r + 1) * cols {
                return Err(bad(format!("tensor {name:?}: row {r} has wrong arity")));
            }
        }
        if store.get(name).is_some() {
            return Err(bad(format!("duplicate tensor {name:?}")));
        }
        store.insert(name, Tensor::from_vec(&dims, data)?);
    }
    Ok((meta, store))
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Adam with bias correction. Steps with any non-finite gradient are
/// skipped entirely and counted, so one bad batch cannot poison the
/// moments.
#[derive(Debug, Clone)]
pub struct Adam {
    m: TensorStore,
    v: TensorStore,
    step: u64,
    pub skipped: u64,
}

impl Adam {
    pub fn new(params: &TensorStore) -> Adam {
        Adam { m: params.zeros_like(), v: params.zeros_like(), step: 0, skipped: 0 }
    }

    /// Returns false when the step was skipped due to non-finite gradients.
    pub fn step(&mut self, params: &mut TensorStore, grads: &TensorStore, lr: f64) -> bool {
        let finite = grads.iter().all(|(_, t)| t.data().iter().all(|x| x.is_finite()));
        if !finite {
            self.skipped += 1;
            return false;
        }
        self.step += 1;
        let t = self.step as f64;
        let bc1 = 1.0 - ADAM_BETA1.powf(t);
        let bc2 = 1.0 - ADAM_BETA2.powf(t);
        for (name, p) in params.iter_mut() {
            let Some(g) = grads.get(name) else { continue };
            let m = self.m.get_mut(name).expect("moment exists");
            for (mi, gi) in m.data_mut().iter_mut().zip(g.data()) {
                *mi = ADAM_BETA1 * *mi + (1.0 - ADAM_BETA1) * gi;
            }
            let v = self.v.get_mut(name).expect("moment exists");
            for (vi, gi) in v.data_mut().iter_mut().zip(g.data()) {
                *vi = ADAM_BETA2 * *vi + (1.0 - ADAM_BETA2) * gi * gi;
            }
            let m = self.m.get(name).expect("moment exists");
            let v = self.v.get(name).expect("moment exists");
            for ((pi, mi), vi) in p.data_mut().iter_mut().zip(m.data()).zip(v.data()) {
                let mhat = mi / bc1;
                let vhat = vi / bc2;
                *pi -= lr * mhat / (vhat.sqrt() + ADAM_EPS);
            }
        }
        true
    }
}
