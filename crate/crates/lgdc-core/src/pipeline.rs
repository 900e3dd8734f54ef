//! Command orchestration: generate data, coarsen, train, sample, evaluate.
//!
//! Every stage writes plain-text artifacts stamped with the config hash
//! and seed, refuses upstream artifacts from a different run, and every
//! artifact re-renders byte-identically through its parser. Missing
//! inputs name the command that produces them.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::Rng as _;
use rayon::prelude::*;

use crate::coarsen::coarsen_to_ratio;
use crate::config::RunConfig;
use crate::datasets::{generate_split, validity_predicate};
use crate::diffusion::{
    build_noise, coarse_to_latent, diffusion_loss, empirical_marginals, latent_to_coarse,
    sample_latent, uniform_marginal, LatentState, NoiseKind, EDGE_BUCKETS,
};
use crate::expansion::{decode, expand, train_expander, ExpanderExample, ExpanderNets, ExpansionVector};
use crate::flops::FlopsModel;
use crate::graph::Graph;
use crate::io::{self, DatasetHeader, RunStamp};
use crate::metrics::{
    mmd_battery, ratio_summary, table4_protocol, vun, MetricKind, RatioSummary, Vun, ALL_KINDS,
};
use crate::mpn::{Mpn, MpnConfig, TIME_FEATURES};
use crate::rng::{self, stage};
use crate::tensor::{load_checkpoint_stamped, save_checkpoint_stamped, Adam, Tensor};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    GenData,
    Coarsen,
    Train,
    Sample,
    Eval,
    Flops,
    ExportDot,
}

impl Command {
    pub fn parse(s: &str) -> Result<Command> {
        match s {
            "gen-data" => Ok(Command::GenData),
            "coarsen" => Ok(Command::Coarsen),
            "train" => Ok(Command::Train),
            "sample" => Ok(Command::Sample),
            "eval" => Ok(Command::Eval),
            "flops" => Ok(Command::Flops),
            "export-dot" => Ok(Command::ExportDot),
            other => Err(Error::Config(format!("unknown command `{other}`"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Command::GenData => "gen-data",
            Command::Coarsen => "coarsen",
            Command::Train => "train",
            Command::Sample => "sample",
            Command::Eval => "eval",
            Command::Flops => "flops",
            Command::ExportDot => "export-dot",
        }
    }
}

/// On-disk layout under one output root.
#[derive(Debug, Clone)]
pub struct Layout {
    pub data: PathBuf,
    pub checkpoints: PathBuf,
    pub reports: PathBuf,
}

impl Layout {
    pub fn new(out: &Path, cfg: &RunConfig) -> Layout {
        Layout {
            data: out.join(&cfg.data_dir),
            checkpoints: out.join(&cfg.checkpoint_dir),
            reports: out.join(&cfg.report_dir),
        }
    }

    pub fn train_set(&self) -> PathBuf {
        self.data.join("train.txt")
    }
    pub fn test_set(&self) -> PathBuf {
        self.data.join("test.txt")
    }
    pub fn pairs(&self) -> PathBuf {
        self.data.join("pairs.txt")
    }
    pub fn latent_samples(&self) -> PathBuf {
        self.data.join("latent.txt")
    }
    pub fn samples(&self) -> PathBuf {
        self.data.join("samples.txt")
    }
    pub fn denoiser_ckpt(&self) -> PathBuf {
        self.checkpoints.join("denoiser.ckpt")
    }
    pub fn expander_v_ckpt(&self) -> PathBuf {
        self.checkpoints.join("expander_v.ckpt")
    }
    pub fn expander_e_ckpt(&self) -> PathBuf {
        self.checkpoints.join("expander_e.ckpt")
    }
    pub fn epsilon_report(&self) -> PathBuf {
        self.reports.join("epsilon.txt")
    }
    pub fn denoiser_curve(&self) -> PathBuf {
        self.reports.join("train_denoiser.txt")
    }
    pub fn expander_curve(&self) -> PathBuf {
        self.reports.join("train_expander.txt")
    }
    pub fn eval_report(&self) -> PathBuf {
        self.reports.join("eval.txt")
    }
    pub fn flops_report(&self) -> PathBuf {
        self.reports.join("flops.txt")
    }
    pub fn dot_dir(&self) -> PathBuf {
        self.reports.join("dot")
    }
}

fn require(path: &Path, producer: Command) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::MissingArtifact(format!(
            "{} not found; run `lgdc {}` first",
            path.display(),
            producer.name()
        )))
    }
}

fn check_stamp(found: Option<RunStamp>, want: RunStamp, what: &str, producer: Command) -> Result<()> {
    match found {
        Some(s) if s == want => Ok(()),
        Some(s) => Err(Error::Config(format!(
            "{what} was produced under config {:016x} seed {}, current run is {:016x} seed {}; \
             rerun `lgdc {}`",
            s.config_hash,
            s.seed,
            want.config_hash,
            want.seed,
            producer.name()
        ))),
        None => Err(Error::Parse(format!("{what} lacks a run stamp"))),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, text)?;
    Ok(())
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::MissingArtifact(format!("{}: {e}", path.display())))
}

/// Entry point shared by the CLI and tests. Returns a human-readable
/// summary of what was written.
pub fn run(cfg: &RunConfig, command: Command, out: &Path, seed: u64) -> Result<String> {
    let layout = Layout::new(out, cfg);
    let stamp = RunStamp { config_hash: cfg.hash(), seed };
    match command {
        Command::GenData => cmd_gen_data(cfg, &layout, stamp),
        Command::Coarsen => cmd_coarsen(cfg, &layout, stamp),
        Command::Train => cmd_train(cfg, &layout, stamp),
        Command::Sample => cmd_sample(cfg, &layout, stamp),
        Command::Eval => cmd_eval(cfg, &layout, stamp),
        Command::Flops => cmd_flops(cfg, &layout, stamp),
        Command::ExportDot => cmd_export_dot(cfg, &layout, stamp),
    }
}

// ---------------------------------------------------------------- gen-data

fn dataset_header(cfg: &RunConfig, count: usize, seed: u64) -> DatasetHeader {
    let mut params = vec![
        ("n_min".to_string(), cfg.n_min.to_string()),
        ("n_max".to_string(), cfg.n_max.to_string()),
    ];
    if cfg.family == crate::datasets::Family::Community {
        params.push(("communities".to_string(), cfg.communities.to_string()));
        params.push(("p_in".to_string(), cfg.p_in.to_string()));
        params.push(("p_out".to_string(), cfg.p_out.to_string()));
    }
    DatasetHeader { family: cfg.family.name().to_string(), count, seed, params }
}

fn cmd_gen_data(cfg: &RunConfig, layout: &Layout, stamp: RunStamp) -> Result<String> {
    let mut spec = cfg.dataset_spec();
    spec.seed = rng::mix(stamp.seed, stage::GEN, 0);
    let (train, test) = generate_split(&spec, cfg.test_count)?;
    io::write_dataset(
        &layout.train_set(),
        Some(&stamp),
        Some(&dataset_header(cfg, train.len(), spec.seed)),
        &train,
    )?;
    io::write_dataset(
        &layout.test_set(),
        Some(&stamp),
        Some(&dataset_header(cfg, test.len(), spec.seed)),
        &test,
    )?;
    Ok(format!(
        "wrote {} train + {} test {} graphs to {}\n",
        train.len(),
        test.len(),
        cfg.family.name(),
        layout.data.display()
    ))
}

// ----------------------------------------------------------------- coarsen

/// One supervised coarsening pair. The keep mask indexes the canonical
/// candidate order of `expand(coarse, sizes)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairRecord {
    pub fine: Graph,
    pub coarse: Graph,
    pub v_star: Vec<usize>,
    pub e_star: Vec<bool>,
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairsFile {
    pub run: RunStamp,
    pub records: Vec<PairRecord>,
}

pub fn render_pairs(file: &PairsFile) -> String {
    let mut out = io::render_run_stamp(&file.run);
    writeln!(out, "#pairs {}", file.records.len()).expect("string write");
    for (idx, r) in file.records.iter().enumerate() {
        writeln!(out, "#pair {idx} {}", r.epsilon).expect("string write");
        writeln!(out, "#fine {} {}", r.fine.n(), r.fine.m()).expect("string write");
        for (u, v, w) in r.fine.edges() {
            writeln!(out, "{u} {v} {w}").expect("string write");
        }
        writeln!(out, "#coarse {} {}", r.coarse.n(), r.coarse.m()).expect("string write");
        for (u, v, w) in r.coarse.edges() {
            writeln!(out, "{u} {v} {w}").expect("string write");
        }
        out.push_str("#sizes");
        for s in &r.v_star {
            write!(out, " {s}").expect("string write");
        }
        out.push('\n');
        out.push_str("#keep");
        if !r.e_star.is_empty() {
            out.push(' ');
            for &b in &r.e_star {
                out.push(if b { '1' } else { '0' });
            }
        }
        out.push('\n');
    }
    out
}

fn tagged_line(lines: &[&str], pos: &mut usize, want: &str) -> Result<Vec<String>> {
    let line = lines
        .get(*pos)
        .ok_or_else(|| Error::Parse(format!("unexpected end of file, wanted {want}")))?;
    *pos += 1;
    let toks: Vec<String> = line.split_whitespace().map(str::to_string).collect();
    if toks.first().map(String::as_str) != Some(want) {
        return Err(Error::Parse(format!("line {pos}: expected {want}, got {line:?}")));
    }
    Ok(toks)
}

fn edge_lines(lines: &[&str], pos: &mut usize, m: usize) -> Result<Vec<(usize, usize, f64)>> {
    let mut edges = Vec::with_capacity(m);
    for _ in 0..m {
        let line = lines
            .get(*pos)
            .ok_or_else(|| Error::Parse("unexpected end of file in edge list".into()))?;
        *pos += 1;
        let t: Vec<&str> = line.split_whitespace().collect();
        if t.len() != 3 {
            return Err(Error::Parse(format!("bad edge line {line:?}")));
        }
        let u = t[0].parse().map_err(|e| Error::Parse(format!("bad edge: {e}")))?;
        let v = t[1].parse().map_err(|e| Error::Parse(format!("bad edge: {e}")))?;
        let w = t[2].parse().map_err(|e| Error::Parse(format!("bad edge: {e}")))?;
        edges.push((u, v, w));
    }
    Ok(edges)
}

pub fn parse_pairs(text: &str) -> Result<PairsFile> {
    let lines: Vec<&str> = text.lines().collect();
    let run = io::parse_run_stamp(lines.first().unwrap_or(&""))?;
    let mut pos = 1usize;
    let count: usize = {
        let toks = tagged_line(&lines, &mut pos, "#pairs")?;
        toks.get(1)
            .ok_or_else(|| Error::Parse("#pairs needs a count".into()))?
            .parse()
            .map_err(|e| Error::Parse(format!("bad pair count: {e}")))?
    };

    let mut records = Vec::with_capacity(count);
    for idx in 0..count {
        let toks = tagged_line(&lines, &mut pos, "#pair")?;
        if toks.get(1).and_then(|s| s.parse::<usize>().ok()) != Some(idx) {
            return Err(Error::Parse(format!("pair records out of order at {idx}")));
        }
        let epsilon: f64 = toks
            .get(2)
            .ok_or_else(|| Error::Parse("#pair needs an epsilon".into()))?
            .parse()
            .map_err(|e| Error::Parse(format!("bad epsilon: {e}")))?;
        if !(epsilon.is_finite() && epsilon >= 0.0) {
            return Err(Error::Parse(format!("pair {idx}: epsilon {epsilon} out of range")));
        }

        let toks = tagged_line(&lines, &mut pos, "#fine")?;
        let (n, m): (usize, usize) = (
            toks.get(1).and_then(|s| s.parse().ok()).ok_or_else(|| Error::Parse("bad #fine".into()))?,
            toks.get(2).and_then(|s| s.parse().ok()).ok_or_else(|| Error::Parse("bad #fine".into()))?,
        );
        let fine = Graph::from_edges(n, &edge_lines(&lines, &mut pos, m)?)?;

        let toks = tagged_line(&lines, &mut pos, "#coarse")?;
        let (nc, mc): (usize, usize) = (
            toks.get(1).and_then(|s| s.parse().ok()).ok_or_else(|| Error::Parse("bad #coarse".into()))?,
            toks.get(2).and_then(|s| s.parse().ok()).ok_or_else(|| Error::Parse("bad #coarse".into()))?,
        );
        let coarse_bare = Graph::from_edges(nc, &edge_lines(&lines, &mut pos, mc)?)?;

        let toks = tagged_line(&lines, &mut pos, "#sizes")?;
        let v_star: Vec<usize> = toks[1..]
            .iter()
            .map(|s| s.parse().map_err(|e| Error::Parse(format!("bad size: {e}"))))
            .collect::<Result<_>>()?;
        if v_star.len() != nc || v_star.iter().any(|&s| s == 0) {
            return Err(Error::Parse(format!("pair {idx}: bad size vector")));
        }
        if v_star.iter().sum::<usize>() != n {
            return Err(Error::Parse(format!("pair {idx}: sizes do not sum to the fine order")));
        }
        let coarse = coarse_bare.with_labels(v_star.iter().map(|&s| s - 1).collect())?;

        let toks = tagged_line(&lines, &mut pos, "#keep")?;
        let bits = toks.get(1).map(String::as_str).unwrap_or("");
        let e_star: Vec<bool> = bits
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::Parse(format!("bad keep bit {other:?}"))),
            })
            .collect::<Result<_>>()?;
        let (_, cands) = expand(&coarse, &ExpansionVector(v_star.clone()))?;
        if e_star.len() != cands.len() {
            return Err(Error::Parse(format!(
                "pair {idx}: keep mask has {} bits, candidate set has {}",
                e_star.len(),
                cands.len()
            )));
        }
        records.push(PairRecord { fine, coarse, v_star, e_star, epsilon });
    }
    if pos != lines.len() {
        return Err(Error::Parse(format!("trailing content after pair {}", count - 1)));
    }
    Ok(PairsFile { run, records })
}

pub fn read_pairs(path: &Path) -> Result<PairsFile> {
    parse_pairs(&read_text(path)?).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}

fn render_epsilon_report(run: &RunStamp, eps: &[f64]) -> String {
    let mut out = io::render_run_stamp(run);
    writeln!(out, "#epsilon {}", eps.len()).expect("string write");
    for (i, e) in eps.iter().enumerate() {
        writeln!(out, "{i} {e}").expect("string write");
    }
    let mean = eps.iter().sum::<f64>() / eps.len().max(1) as f64;
    let max = eps.iter().cloned().fold(0.0f64, f64::max);
    writeln!(out, "mean {mean}").expect("string write");
    writeln!(out, "max {max}").expect("string write");
    out
}

pub fn parse_epsilon_report(text: &str) -> Result<(RunStamp, Vec<f64>)> {
    let mut lines = text.lines();
    let run = io::parse_run_stamp(lines.next().unwrap_or(""))?;
    let head = lines.next().ok_or_else(|| Error::Parse("missing #epsilon header".into()))?;
    let count: usize = head
        .strip_prefix("#epsilon ")
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Parse(format!("bad header {head:?}")))?;
    let mut eps = Vec::with_capacity(count);
    for i in 0..count {
        let line = lines.next().ok_or_else(|| Error::Parse("truncated epsilon list".into()))?;
        let t: Vec<&str> = line.split_whitespace().collect();
        if t.len() != 2 || t[0].parse::<usize>() != Ok(i) {
            return Err(Error::Parse(format!("bad epsilon line {line:?}")));
        }
        eps.push(t[1].parse().map_err(|e| Error::Parse(format!("bad epsilon: {e}")))?);
    }
    for want in ["mean", "max"] {
        let line = lines.next().unwrap_or("");
        if !line.starts_with(want) {
            return Err(Error::Parse(format!("expected {want} line, got {line:?}")));
        }
    }
    Ok((run, eps))
}

fn cmd_coarsen(cfg: &RunConfig, layout: &Layout, stamp: RunStamp) -> Result<String> {
    require(&layout.train_set(), Command::GenData)?;
    let ds = io::read_dataset(&layout.train_set())?;
    check_stamp(ds.run, stamp, "training set", Command::GenData)?;

    let results: Result<Vec<_>> = ds
        .graphs
        .par_iter()
        .enumerate()
        .map(|(i, g)| {
            let mut rng = rng::stream(stamp.seed, stage::COARSEN, i as u64);
            coarsen_to_ratio(g, cfg.target_ratio, cfg.v_max, cfg.k_eig, &mut rng)
        })
        .collect();
    let results = results?;

    let records: Vec<PairRecord> = ds
        .graphs
        .iter()
        .zip(&results)
        .map(|(fine, r)| PairRecord {
            fine: fine.clone(),
            coarse: r.coarse.clone(),
            v_star: r.v_star.clone(),
            e_star: r.e_star.clone(),
            epsilon: r.epsilon,
        })
        .collect();
    let eps: Vec<f64> = records.iter().map(|r| r.epsilon).collect();

    write_text(&layout.pairs(), &render_pairs(&PairsFile { run: stamp, records }))?;
    write_text(&layout.epsilon_report(), &render_epsilon_report(&stamp, &eps))?;

    let mean = eps.iter().sum::<f64>() / eps.len().max(1) as f64;
    let max = eps.iter().cloned().fold(0.0f64, f64::max);
    Ok(format!(
        "coarsened {} graphs (ratio {}, v_max {}); epsilon mean {mean:.4} max {max:.4}\n",
        eps.len(),
        cfg.target_ratio,
        cfg.v_max
    ))
}

// ------------------------------------------------------------------- train

pub fn render_curve(run: &RunStamp, names: &[&str], rows: &[Vec<f64>]) -> String {
    let mut out = io::render_run_stamp(run);
    out.push_str("#curve");
    for n in names {
        write!(out, " {n}").expect("string write");
    }
    out.push('\n');
    for (i, row) in rows.iter().enumerate() {
        write!(out, "{i}").expect("string write");
        for v in row {
            write!(out, " {v}").expect("string write");
        }
        out.push('\n');
    }
    out
}

pub fn parse_curve(text: &str) -> Result<(RunStamp, Vec<String>, Vec<Vec<f64>>)> {
    let mut lines = text.lines();
    let run = io::parse_run_stamp(lines.next().unwrap_or(""))?;
    let head = lines.next().ok_or_else(|| Error::Parse("missing #curve header".into()))?;
    let names: Vec<String> = head
        .strip_prefix("#curve")
        .ok_or_else(|| Error::Parse(format!("bad curve header {head:?}")))?
        .split_whitespace()
        .map(str::to_string)
        .collect();
    if names.is_empty() {
        return Err(Error::Parse("curve header names no columns".into()));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let t: Vec<&str> = line.split_whitespace().collect();
        if t.len() != names.len() + 1 || t[0].parse::<usize>() != Ok(i) {
            return Err(Error::Parse(format!("bad curve row {line:?}")));
        }
        let row: Vec<f64> = t[1..]
            .iter()
            .map(|s| s.parse().map_err(|e| Error::Parse(format!("bad value: {e}"))))
            .collect::<Result<_>>()?;
        rows.push(row);
    }
    Ok((run, names, rows))
}

fn cmd_train(cfg: &RunConfig, layout: &Layout, stamp: RunStamp) -> Result<String> {
    require(&layout.pairs(), Command::Coarsen)?;
    let pairs = read_pairs(&layout.pairs())?;
    check_stamp(Some(pairs.run), stamp, "coarsening pairs", Command::Coarsen)?;

    // Latent views of the coarse graphs drive the denoiser.
    let states: Vec<_> = pairs
        .records
        .iter()
        .map(|r| coarse_to_latent(&r.coarse))
        .collect::<Result<_>>()?;
    let (m_x, m_e) = match cfg.noise {
        NoiseKind::Marginal => empirical_marginals(&states, cfg.v_max, EDGE_BUCKETS),
        NoiseKind::Uniform => (uniform_marginal(cfg.v_max), uniform_marginal(EDGE_BUCKETS)),
    };
    let noise = build_noise(cfg.steps, &m_x, &m_e)?;

    let mut rng = rng::stream(stamp.seed, stage::TRAIN_DENOISER, 0);
    let mut net = Mpn::init(
        MpnConfig {
            node_cats: cfg.v_max,
            edge_cats: EDGE_BUCKETS,
            hidden: cfg.d,
            layers: cfg.l,
            node_out: cfg.v_max,
            edge_out: EDGE_BUCKETS,
            time_feats: TIME_FEATURES,
            node_scalar: false,
        },
        &mut rng,
    );
    let mut adam = Adam::new(&net.params);
    let mut denoiser_curve = Vec::with_capacity(cfg.train_steps);
    for _ in 0..cfg.train_steps {
        let mut grads = net.params.zeros_like();
        let (mut loss, mut node_ce, mut edge_ce) = (0.0, 0.0, 0.0);
        for _ in 0..cfg.batch {
            let (x0, e0) = &states[rng.random_range(0..states.len())];
            let (parts, g) = diffusion_loss(&net, &noise, x0, e0, cfg.lambda_e, &mut rng)?;
            grads.add_scaled(&g, 1.0 / cfg.batch as f64);
            loss += parts.loss / cfg.batch as f64;
            node_ce += parts.node_ce / cfg.batch as f64;
            edge_ce += parts.edge_ce / cfg.batch as f64;
        }
        adam.step(&mut net.params, &grads, cfg.lr);
        denoiser_curve.push(vec![loss, node_ce, edge_ce]);
    }

    // The checkpoint carries the data-derived extras needed at sampling
    // time: category marginals and the latent size histogram.
    let max_nc = pairs.records.iter().map(|r| r.coarse.n()).max().unwrap_or(1);
    let mut size_hist = vec![0.0f64; max_nc + 1];
    for r in &pairs.records {
        size_hist[r.coarse.n()] += 1.0;
    }
    let meta = net.meta();
    let mut store = net.params;
    store.insert("m_x", Tensor::from_vec(&[m_x.len()], m_x.clone())?);
    store.insert("m_e", Tensor::from_vec(&[m_e.len()], m_e.clone())?);
    store.insert("size_hist", Tensor::from_vec(&[size_hist.len()], size_hist)?);
    save_checkpoint_stamped(&layout.denoiser_ckpt(), &stamp, &meta, &store)?;
    write_text(
        &layout.denoiser_curve(),
        &render_curve(&stamp, &["loss", "node_ce", "edge_ce"], &denoiser_curve),
    )?;

    let mut rng = rng::stream(stamp.seed, stage::TRAIN_EXPANDER, 0);
    let mut nets = ExpanderNets::init(cfg.v_max, cfg.d, cfg.l, &mut rng);
    let examples: Vec<ExpanderExample> = pairs
        .records
        .iter()
        .map(|r| ExpanderExample {
            coarse: r.coarse.clone(),
            v_star: r.v_star.clone(),
            e_star: r.e_star.clone(),
        })
        .collect();
    let expander_curve =
        train_expander(&mut nets, &examples, cfg.expander_steps, cfg.batch, cfg.lr, &mut rng)?;
    let expander_rows: Vec<Vec<f64>> =
        expander_curve.iter().map(|&(v, e)| vec![v, e]).collect();
    save_checkpoint_stamped(
        &layout.expander_v_ckpt(),
        &stamp,
        &nets.v_net.meta(),
        &nets.v_net.params,
    )?;
    // The edge-keeper checkpoint carries the training class weight so
    // sampling can undo the loss reweighting.
    let e_meta = nets.e_net.meta();
    let mut e_store = nets.e_net.params;
    e_store.insert("pos_weight", Tensor::from_vec(&[1], vec![nets.pos_weight])?);
    save_checkpoint_stamped(&layout.expander_e_ckpt(), &stamp, &e_meta, &e_store)?;
    write_text(
        &layout.expander_curve(),
        &render_curve(&stamp, &["v_loss", "e_loss"], &expander_rows),
    )?;

    let d_final = denoiser_curve.last().map(|r| r[0]).unwrap_or(f64::NAN);
    let (v_final, e_final) = expander_curve.last().copied().unwrap_or((f64::NAN, f64::NAN));
    Ok(format!(
        "trained denoiser ({} steps, final loss {d_final:.4}) and expander \
         ({} steps, final v {v_final:.4} e {e_final:.4})\n",
        cfg.train_steps, cfg.expander_steps
    ))
}

// ------------------------------------------------------------------ sample

fn load_net(path: &Path, stamp: RunStamp, what: &str) -> Result<Mpn> {
    let (run, meta, store) = load_checkpoint_stamped(path)?;
    check_stamp(run, stamp, what, Command::Train)?;
    Mpn::from_store(&meta, store)
}

fn draw_size(hist: &[f64], rng: &mut rng::Rng) -> Result<usize> {
    let total: f64 = hist.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Checkpoint("empty latent size histogram".into()));
    }
    let mut u = rng.random::<f64>() * total;
    for (k, &c) in hist.iter().enumerate() {
        u -= c;
        if u <= 0.0 && c > 0.0 {
            return Ok(k);
        }
    }
    Ok(hist.iter().rposition(|&c| c > 0.0).expect("total positive"))
}

fn cmd_sample(cfg: &RunConfig, layout: &Layout, stamp: RunStamp) -> Result<String> {
    for path in [layout.denoiser_ckpt(), layout.expander_v_ckpt(), layout.expander_e_ckpt()] {
        require(&path, Command::Train)?;
    }
    let (run, meta, mut store) = load_checkpoint_stamped(&layout.denoiser_ckpt())?;
    check_stamp(run, stamp, "denoiser checkpoint", Command::Train)?;
    let mut extra = |name: &str| -> Result<Vec<f64>> {
        Ok(store
            .remove(name)
            .ok_or_else(|| Error::Checkpoint(format!("denoiser checkpoint lacks {name}")))?
            .data()
            .to_vec())
    };
    let m_x = extra("m_x")?;
    let m_e = extra("m_e")?;
    let size_hist = extra("size_hist")?;
    let net = Mpn::from_store(&meta, store)?;
    let noise = build_noise(cfg.steps, &m_x, &m_e)?;

    let (e_run, e_meta, mut e_store) = load_checkpoint_stamped(&layout.expander_e_ckpt())?;
    check_stamp(e_run, stamp, "edge-keeper checkpoint", Command::Train)?;
    let pos_weight = e_store
        .remove("pos_weight")
        .ok_or_else(|| Error::Checkpoint("edge-keeper checkpoint lacks pos_weight".into()))?
        .data()[0];
    let nets = ExpanderNets {
        v_net: load_net(&layout.expander_v_ckpt(), stamp, "size-predictor checkpoint")?,
        e_net: Mpn::from_store(&e_meta, e_store)?,
        v_max: cfg.v_max,
        pos_weight,
    };

    let mut latents = Vec::with_capacity(cfg.sample_count);
    let mut fines = Vec::with_capacity(cfg.sample_count);
    let mut dense = 0usize;
    for s in 0..cfg.sample_count {
        let mut rng = rng::stream(stamp.seed, stage::SAMPLE, s as u64);
        let n_c = draw_size(&size_hist, &mut rng)?;
        let state = sample_latent(&net, &noise, n_c, &mut rng)?;
        latents.push(latent_to_coarse(&state)?);
        let (fine, stats) = decode(&nets, &state, cfg.temperature, &mut rng)?;
        if stats.dense_warning {
            dense += 1;
        }
        fines.push(fine);
    }

    let latent_header = DatasetHeader {
        family: "latent".to_string(),
        count: latents.len(),
        seed: stamp.seed,
        params: Vec::new(),
    };
    io::write_dataset(&layout.latent_samples(), Some(&stamp), Some(&latent_header), &latents)?;
    io::write_dataset(
        &layout.samples(),
        Some(&stamp),
        Some(&dataset_header(cfg, fines.len(), stamp.seed)),
        &fines,
    )?;

    let mut summary = format!(
        "sampled {} latent graphs and decoded them (T = {}, temperature {})\n",
        cfg.sample_count, cfg.steps, cfg.temperature
    );
    if dense > 0 {
        writeln!(summary, "note: {dense} decodes had unusually dense candidate sets")
            .expect("string write");
    }
    Ok(summary)
}

// -------------------------------------------------------------------- eval

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub run: RunStamp,
    /// Decoded samples against the test split, `ALL_KINDS` order.
    pub sample_mmds: Vec<f64>,
    /// Train split against the test split, the ratio denominator.
    pub reference_mmds: Vec<f64>,
    pub ratios: RatioSummary,
    pub vun: Vun,
    /// Latent samples against the bucketed coarse references.
    pub table4_latent: Vec<f64>,
    /// Decoded samples against the fine test references.
    pub table4_decoded: Vec<f64>,
}

pub fn render_eval(report: &EvalReport) -> String {
    let mut out = io::render_run_stamp(&report.run);
    out.push_str("#eval\n");
    let battery = |out: &mut String, tag: &str, values: &[f64]| {
        for (kind, v) in ALL_KINDS.iter().zip(values) {
            writeln!(out, "{tag} {} {v}", kind.name()).expect("string write");
        }
    };
    battery(&mut out, "mmd", &report.sample_mmds);
    battery(&mut out, "ref", &report.reference_mmds);
    writeln!(out, "ratio local {}", report.ratios.local).expect("string write");
    writeln!(out, "ratio global {}", report.ratios.global).expect("string write");
    writeln!(out, "ratio avg {}", report.ratios.avg).expect("string write");
    out.push_str("excluded");
    for k in &report.ratios.excluded {
        write!(out, " {}", k.name()).expect("string write");
    }
    out.push('\n');
    writeln!(out, "vun valid {}", report.vun.valid).expect("string write");
    writeln!(out, "vun unique {}", report.vun.unique).expect("string write");
    writeln!(out, "vun novel {}", report.vun.novel).expect("string write");
    writeln!(out, "vun combined {}", report.vun.combined).expect("string write");
    battery(&mut out, "table4 latent", &report.table4_latent);
    battery(&mut out, "table4 decoded", &report.table4_decoded);
    out
}

fn eval_battery<'a>(
    lines: &mut impl Iterator<Item = &'a str>,
    prefix: &str,
) -> Result<Vec<f64>> {
    let mut values = Vec::with_capacity(ALL_KINDS.len());
    for kind in ALL_KINDS {
        let line = lines.next().unwrap_or("");
        let rest = line
            .strip_prefix(prefix)
            .and_then(|s| s.strip_prefix(' '))
            .and_then(|s| s.strip_prefix(kind.name()))
            .and_then(|s| s.strip_prefix(' '))
            .ok_or_else(|| {
                Error::Parse(format!("expected `{prefix} {}`, got {line:?}", kind.name()))
            })?;
        values.push(rest.parse().map_err(|e| Error::Parse(format!("bad value: {e}")))?);
    }
    Ok(values)
}

fn eval_scalar<'a>(lines: &mut impl Iterator<Item = &'a str>, prefix: &str) -> Result<f64> {
    let line = lines.next().unwrap_or("");
    line.strip_prefix(prefix)
        .and_then(|s| s.strip_prefix(' '))
        .ok_or_else(|| Error::Parse(format!("expected `{prefix}`, got {line:?}")))?
        .parse()
        .map_err(|e| Error::Parse(format!("bad value: {e}")))
}

pub fn parse_eval(text: &str) -> Result<EvalReport> {
    let mut lines = text.lines();
    let run = io::parse_run_stamp(lines.next().unwrap_or(""))?;
    if lines.next() != Some("#eval") {
        return Err(Error::Parse("missing #eval header".into()));
    }
    let sample_mmds = eval_battery(&mut lines, "mmd")?;
    let reference_mmds = eval_battery(&mut lines, "ref")?;
    let local = eval_scalar(&mut lines, "ratio local")?;
    let global = eval_scalar(&mut lines, "ratio global")?;
    let avg = eval_scalar(&mut lines, "ratio avg")?;
    let excl_line = lines.next().unwrap_or("");
    let excluded: Vec<MetricKind> = excl_line
        .strip_prefix("excluded")
        .ok_or_else(|| Error::Parse(format!("expected excluded line, got {excl_line:?}")))?
        .split_whitespace()
        .map(|name| {
            ALL_KINDS
                .iter()
                .copied()
                .find(|k| k.name() == name)
                .ok_or_else(|| Error::Parse(format!("unknown metric {name:?}")))
        })
        .collect::<Result<_>>()?;
    let valid = eval_scalar(&mut lines, "vun valid")?;
    let unique = eval_scalar(&mut lines, "vun unique")?;
    let novel = eval_scalar(&mut lines, "vun novel")?;
    let combined = eval_scalar(&mut lines, "vun combined")?;
    let table4_latent = eval_battery(&mut lines, "table4 latent")?;
    let table4_decoded = eval_battery(&mut lines, "table4 decoded")?;
    if lines.next().is_some() {
        return Err(Error::Parse("trailing content in eval report".into()));
    }
    Ok(EvalReport {
        run,
        sample_mmds,
        reference_mmds,
        ratios: RatioSummary { local, global, avg, excluded },
        vun: Vun { valid, unique, novel, combined },
        table4_latent,
        table4_decoded,
    })
}

/// Bucketed view of a labeled coarse graph, the representation the latent
/// model actually learns; references must live in the same space as the
/// latent samples.
fn bucket_view(coarse: &Graph) -> Result<Graph> {
    let (x, e) = coarse_to_latent(coarse)?;
    latent_to_coarse(&LatentState::new(0, x, e)?)
}

fn cmd_eval(cfg: &RunConfig, layout: &Layout, stamp: RunStamp) -> Result<String> {
    require(&layout.train_set(), Command::GenData)?;
    require(&layout.test_set(), Command::GenData)?;
    require(&layout.pairs(), Command::Coarsen)?;
    require(&layout.latent_samples(), Command::Sample)?;
    require(&layout.samples(), Command::Sample)?;

    let train = io::read_dataset(&layout.train_set())?;
    check_stamp(train.run, stamp, "training set", Command::GenData)?;
    let test = io::read_dataset(&layout.test_set())?;
    check_stamp(test.run, stamp, "test set", Command::GenData)?;
    let pairs = read_pairs(&layout.pairs())?;
    check_stamp(Some(pairs.run), stamp, "coarsening pairs", Command::Coarsen)?;
    let latent = io::read_dataset(&layout.latent_samples())?;
    check_stamp(latent.run, stamp, "latent samples", Command::Sample)?;
    let decoded = io::read_dataset(&layout.samples())?;
    check_stamp(decoded.run, stamp, "decoded samples", Command::Sample)?;

    let sample_mmds = mmd_battery(&decoded.graphs, &test.graphs)?;
    let reference_mmds = mmd_battery(&train.graphs, &test.graphs)?;
    let ratios = ratio_summary(&sample_mmds, &reference_mmds)?;
    let v = vun(&decoded.graphs, &train.graphs, validity_predicate(cfg.family))?;
    let coarse_refs: Vec<Graph> =
        pairs.records.iter().map(|r| bucket_view(&r.coarse)).collect::<Result<_>>()?;
    let (table4_latent, table4_decoded) =
        table4_protocol(&latent.graphs, &decoded.graphs, &coarse_refs, &test.graphs)?;

    let report = EvalReport {
        run: stamp,
        sample_mmds,
        reference_mmds,
        ratios,
        vun: v,
        table4_latent,
        table4_decoded,
    };
    write_text(&layout.eval_report(), &render_eval(&report))?;

    Ok(format!(
        "eval: ratio local {:.3} global {:.3} avg {:.3}; \
         V.U.N. {:.0}/{:.0}/{:.0} combined {:.0}; wrote {}\n",
        report.ratios.local,
        report.ratios.global,
        report.ratios.avg,
        report.vun.valid,
        report.vun.unique,
        report.vun.novel,
        report.vun.combined,
        layout.eval_report().display()
    ))
}

// ------------------------------------------------------------------- flops

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlopsReport {
    pub run: RunStamp,
    pub model: FlopsModel,
}

pub fn render_flops(report: &FlopsReport) -> String {
    let m = report.model;
    let mult = m.multiplier();
    let mut out = io::render_run_stamp(&report.run);
    writeln!(out, "#flops n {} n_c {} T {} d {} L {}", m.n, m.n_c, m.t, m.d, m.l)
        .expect("string write");
    writeln!(out, "oneshot {} {}", m.oneshot(), m.oneshot() * mult).expect("string write");
    writeln!(
        out,
        "autoregressive {} {}",
        m.autoregressive(),
        m.autoregressive() * mult as f64
    )
    .expect("string write");
    writeln!(out, "lgdc {} {}", m.lgdc(), m.lgdc() * mult).expect("string write");
    writeln!(out, "speedup {}", m.speedup()).expect("string write");
    out
}

pub fn parse_flops(text: &str) -> Result<FlopsReport> {
    let mut lines = text.lines();
    let run = io::parse_run_stamp(lines.next().unwrap_or(""))?;
    let head = lines.next().unwrap_or("");
    let toks: Vec<&str> = head.split_whitespace().collect();
    if toks.len() != 11 || toks[0] != "#flops" {
        return Err(Error::Parse(format!("bad flops header {head:?}")));
    }
    let field = |at: usize, name: &str| -> Result<u64> {
        if toks[at] != name {
            return Err(Error::Parse(format!("expected {name}, got {}", toks[at])));
        }
        toks[at + 1].parse().map_err(|e| Error::Parse(format!("bad {name}: {e}")))
    };
    let model = FlopsModel::new(
        field(1, "n")?,
        field(3, "n_c")?,
        field(5, "T")?,
        field(7, "d")?,
        field(9, "L")?,
    )?;
    // The remaining rows are derived; re-render and compare so corrupted
    // tables are rejected.
    let report = FlopsReport { run, model };
    let want = render_flops(&report);
    if want != text {
        return Err(Error::Parse("flops table rows disagree with its symbols".into()));
    }
    Ok(report)
}

fn cmd_flops(cfg: &RunConfig, layout: &Layout, stamp: RunStamp) -> Result<String> {
    let n = cfg.n_max as u64;
    let n_c = ((cfg.n_max as f64 * cfg.target_ratio).ceil() as u64).clamp(1, n);
    let model = FlopsModel::new(n, n_c, cfg.steps as u64, cfg.d as u64, cfg.l as u64)?;
    let report = FlopsReport { run: stamp, model };
    let text = render_flops(&report);
    write_text(&layout.flops_report(), &text)?;
    let mut summary = String::from("denoiser evaluations (raw, with width/depth multiplier):\n");
    summary.push_str(text.lines().skip(1).collect::<Vec<_>>().join("\n").as_str());
    summary.push('\n');
    Ok(summary)
}

// -------------------------------------------------------------- export-dot

fn cmd_export_dot(_cfg: &RunConfig, layout: &Layout, stamp: RunStamp) -> Result<String> {
    require(&layout.samples(), Command::Sample)?;
    let ds = io::read_dataset(&layout.samples())?;
    check_stamp(ds.run, stamp, "decoded samples", Command::Sample)?;
    let dir = layout.dot_dir();
    std::fs::create_dir_all(&dir)?;
    for (i, g) in ds.graphs.iter().enumerate() {
        std::fs::write(dir.join(format!("sample_{i}.dot")), io::to_dot(g))?;
    }
    Ok(format!("wrote {} DOT files to {}\n", ds.graphs.len(), dir.display()))
}
