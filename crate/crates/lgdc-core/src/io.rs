//! Plain-text graph serialization.
//!
//! A graph record is
//! ```text
//! #graph <id> <n> <m>
//! <u> <v> <w>          (m lines, u < v, ascending lexicographic)
//! #labels <l_0> ... <l_{n-1}>   (only when node labels are present)
//! ```
//! A dataset file optionally starts with a `#run <confighash> <seed>` stamp
//! and a `#dataset <family> <count> <seed> [key=value...]` header, followed
//! by records with ids 0..count-1. Weights print via shortest-round-trip
//! float formatting, so read(write(g)) == g exactly.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use crate::graph::Graph;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetHeader {
    pub family: String,
    pub count: usize,
    pub seed: u64,
    pub params: Vec<(String, String)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunStamp {
    pub config_hash: u64,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct DatasetFile {
    pub run: Option<RunStamp>,
    pub header: Option<DatasetHeader>,
    pub graphs: Vec<Graph>,
}

pub fn render_graph(id: usize, g: &Graph) -> String {
    let mut out = String::new();
    write!(out, "#graph {} {} {}\n", id, g.n(), g.m()).expect("string write");
    for (u, v, w) in g.edges() {
        write!(out, "{u} {v} {w}\n").expect("string write");
    }
    if let Some(labels) = g.node_labels() {
        out.push_str("#labels");
        for l in labels {
            write!(out, " {l}").expect("string write");
        }
        out.push('\n');
    }
    out
}

pub fn render_run_stamp(run: &RunStamp) -> String {
    format!("#run {:016x} {}\n", run.config_hash, run.seed)
}

/// Parse one `#run <confighash> <seed>` line.
pub fn parse_run_stamp(line: &str) -> Result<RunStamp> {
    let mut tok = line.split_whitespace();
    if tok.next() != Some("#run") {
        return Err(Error::Parse(format!("expected #run stamp, got {line:?}")));
    }
    let hash = tok.next().ok_or_else(|| Error::Parse("missing config hash".into()))?;
    let seed = tok.next().ok_or_else(|| Error::Parse("missing seed".into()))?;
    if tok.next().is_some() {
        return Err(Error::Parse(format!("trailing tokens in run stamp {line:?}")));
    }
    Ok(RunStamp {
        config_hash: u64::from_str_radix(hash, 16)
            .map_err(|e| Error::Parse(format!("bad config hash: {e}")))?,
        seed: seed.parse().map_err(|e| Error::Parse(format!("bad seed: {e}")))?,
    })
}

pub fn render_dataset(
    run: Option<&RunStamp>,
    header: Option<&DatasetHeader>,
    graphs: &[Graph],
) -> String {
    let mut out = String::new();
    if let Some(r) = run {
        out.push_str(&render_run_stamp(r));
    }
    if let Some(h) = header {
        write!(out, "#dataset {} {} {}", h.family, h.count, h.seed).expect("string write");
        for (k, v) in &h.params {
            write!(out, " {k}={v}").expect("string write");
        }
        out.push('\n');
    }
    for (id, g) in graphs.iter().enumerate() {
        out.push_str(&render_graph(id, g));
    }
    out
}

pub fn write_dataset(
    path: &Path,
    run: Option<&RunStamp>,
    header: Option<&DatasetHeader>,
    graphs: &[Graph],
) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(render_dataset(run, header, graphs).as_bytes())?;
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<DatasetFile> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::MissingArtifact(format!("{}: {e}", path.display()))
    })?;
    parse_dataset(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

pub fn parse_dataset(text: &str) -> Result<DatasetFile> {
    let mut run = None;
    let mut header = None;
    let mut graphs: Vec<Graph> = Vec::new();
    // Current record under construction.
    let mut pending: Option<(usize, usize, Vec<(usize, usize, f64)>, Option<Vec<usize>>)> = None;

    let finish = |p: Option<(usize, usize, Vec<(usize, usize, f64)>, Option<Vec<usize>>)>,
                  graphs: &mut Vec<Graph>|
     -> Result<()> {
        if let Some((n, m, edges, labels)) = p {
            if edges.len() != m {
                return Err(Error::Parse(format!(
                    "graph {} declares {m} edges, found {}",
                    graphs.len(),
                    edges.len()
                )));
            }
            let mut g = Graph::from_edges(n, &edges)?;
            if let Some(l) = labels {
                g = g.with_labels(l)?;
            }
            graphs.push(g);
        }
        Ok(())
    };

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let ctx = |msg: String| Error::Parse(format!("line {}: {msg}", lineno + 1));
        if line.is_empty() {
            continue;
        }
        let mut tok = line.split_whitespace();
        let first = tok.next().expect("nonempty line");
        match first {
            "#run" => {
                let hash = tok.next().ok_or_else(|| ctx("missing config hash".into()))?;
                let seed = tok.next().ok_or_else(|| ctx("missing seed".into()))?;
                run = Some(RunStamp {
                    config_hash: u64::from_str_radix(hash, 16)
                        .map_err(|e| ctx(format!("bad config hash: {e}")))?,
                    seed: seed.parse().map_err(|e| ctx(format!("bad seed: {e}")))?,
                });
            }
            "#dataset" => {
                let family =
                    tok.next().ok_or_else(|| ctx("missing family".into()))?.to_string();
                let count = tok
                    .next()
                    .ok_or_else(|| ctx("missing count".into()))?
                    .parse()
                    .map_err(|e| ctx(format!("bad count: {e}")))?;
                let seed = tok
                    .next()
                    .ok_or_else(|| ctx("missing seed".into()))?
                    .parse()
                    .map_err(|e| ctx(format!("bad seed: {e}")))?;
                let mut params = Vec::new();
                for kv in tok {
                    let (k, v) = kv
                        .split_once('=')
                        .ok_or_else(|| ctx(format!("bad param {kv:?}, want key=value")))?;
                    params.push((k.to_string(), v.to_string()));
                }
                header = Some(DatasetHeader { family, count, seed, params });
            }
            "#graph" => {
                finish(pending.take(), &mut graphs)?;
                let id: usize = tok
                    .next()
                    .ok_or_else(|| ctx("missing id".into()))?
                    .parse()
                    .map_err(|e| ctx(format!("bad id: {e}")))?;
                if id != graphs.len() {
                    return Err(ctx(format!("graph id {id}, expected {}", graphs.len())));
                }
                let n = tok
                    .next()
                    .ok_or_else(|| ctx("missing n".into()))?
                    .parse()
                    .map_err(|e| ctx(format!("bad n: {e}")))?;
                let m = tok
                    .next()
                    .ok_or_else(|| ctx("missing m".into()))?
                    .parse()
                    .map_err(|e| ctx(format!("bad m: {e}")))?;
                pending = Some((n, m, Vec::new(), None));
            }
            "#labels" => {
                let rec = pending
                    .as_mut()
                    .ok_or_else(|| ctx("#labels outside a graph record".into()))?;
                let labels: std::result::Result<Vec<usize>, _> =
                    tok.map(str::parse).collect();
                let labels = labels.map_err(|e| ctx(format!("bad label: {e}")))?;
                if labels.len() != rec.0 {
                    return Err(ctx(format!(
                        "{} labels for {} nodes",
                        labels.len(),
                        rec.0
                    )));
                }
                rec.3 = Some(labels);
            }
            _ if first.starts_with('#') => {
                return Err(ctx(format!("unknown directive {first:?}")));
            }
            _ => {
                let rec = pending
                    .as_mut()
                    .ok_or_else(|| ctx("edge line outside a graph record".into()))?;
                let u: usize =
                    first.parse().map_err(|e| ctx(format!("bad endpoint: {e}")))?;
                let v: usize = tok
                    .next()
                    .ok_or_else(|| ctx("missing second endpoint".into()))?
                    .parse()
                    .map_err(|e| ctx(format!("bad endpoint: {e}")))?;
                let w: f64 = tok
                    .next()
                    .ok_or_else(|| ctx("missing weight".into()))?
                    .parse()
                    .map_err(|e| ctx(format!("bad weight: {e}")))?;
                if tok.next().is_some() {
                    return Err(ctx("trailing tokens on edge line".into()));
                }
                if u >= v {
                    return Err(ctx(format!("edge ({u},{v}) must satisfy u < v")));
                }
                rec.2.push((u, v, w));
            }
        }
    }
    finish(pending.take(), &mut graphs)?;
    if let Some(h) = &header {
        if h.count != graphs.len() {
            return Err(Error::Parse(format!(
                "header declares {} graphs, found {}",
                h.count,
                graphs.len()
            )));
        }
    }
    Ok(DatasetFile { run, header, graphs })
}

/// Graphviz export; weights and labels are not part of the contract.
pub fn to_dot(g: &Graph) -> String {
    let mut out = String::from("graph G {\n");
    for v in 0..g.n() {
        if g.degree(v) == 0 {
            writeln!(out, "  {v};").expect("string write");
        }
    }
    for (u, v, _) in g.edges() {
        writeln!(out, "  {u} -- {v};").expect("string write");
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn render_and_parse_single_graph() {
        let g = Graph::from_edges(3, &[(0, 1, 1.0), (1, 2, 2.5)])
            .unwrap()
            .with_labels(vec![0, 1, 0])
            .unwrap();
        let text = render_graph(0, &g);
        assert_eq!(text, "#graph 0 3 2\n0 1 1\n1 2 2.5\n#labels 0 1 0\n");
        let parsed = parse_dataset(&text).unwrap();
        assert_eq!(parsed.graphs.len(), 1);
        assert_eq!(parsed.graphs[0], g);
    }

    #[test]
    fn dataset_header_and_stamp_round_trip() {
        let run = RunStamp { config_hash: 0xdeadbeef, seed: 7 };
        let header = DatasetHeader {
            family: "tree".into(),
            count: 2,
            seed: 7,
            params: vec![("n_min".into(), "4".into()), ("n_max".into(), "6".into())],
        };
        let graphs = vec![
            Graph::simple_from_edges(2, &[(0, 1)]).unwrap(),
            Graph::empty(1),
        ];
        let text = render_dataset(Some(&run), Some(&header), &graphs);
        let parsed = parse_dataset(&text).unwrap();
        assert_eq!(parsed.run, Some(run));
        assert_eq!(parsed.header, Some(header));
        assert_eq!(parsed.graphs, graphs);
    }

    #[test]
    fn parse_errors_are_moderately_helpful() {
        for bad in [
            "#graph 1 2 0\n",                  // id must start at 0
            "#graph 0 2 2\n0 1 1\n",           // edge count mismatch
            "#graph 0 2 1\n1 0 1\n",           // u >= v
            "#graph 0 2 1\n0 1 1 9\n",         // trailing tokens
            "#graph 0 2 1\n0 5 1\n",           // out of range
            "0 1 1\n",                         // edge outside record
            "#labels 0\n",                     // labels outside record
            "#graph 0 2 0\n#labels 0\n",       // label count mismatch
            "#wat\n",                          // unknown directive
            "#dataset tree 3 1\n#graph 0 1 0\n", // count mismatch
        ] {
            assert!(parse_dataset(bad).is_err(), "accepted {bad:?}");
        }
    }

    #[test]
    fn dot_export_shape() {
        let g = Graph::simple_from_edges(4, &[(0, 1), (1, 2)]).unwrap();
        assert_eq!(to_dot(&g), "graph G {\n  3;\n  0 -- 1;\n  1 -- 2;\n}\n");
        assert_eq!(to_dot(&Graph::empty(0)), "graph G {\n}\n");
    }

    proptest! {
        /// Lossless round-trip including awkward weights.
        #[test]
        fn round_trip_random_graphs(seed in 0u64..500) {
            use rand::Rng as _;
            let mut rng = crate::rng::from_seed(seed);
            let n = rng.random_range(1..=12);
            let mut edges = Vec::new();
            for u in 0..n {
                for v in (u + 1)..n {
                    if rng.random::<f64>() < 0.3 {
                        // Mix of integers and irrational-looking weights.
                        let w = if rng.random::<f64>() < 0.5 {
                            rng.random_range(1..=5) as f64
                        } else {
                            rng.random::<f64>() * 10.0 + 1e-7
                        };
                        edges.push((u, v, w));
                    }
                }
            }
            let mut g = Graph::from_edges(n, &edges).unwrap();
            if rng.random::<f64>() < 0.5 {
                let labels = (0..n).map(|_| rng.random_range(0..4)).collect();
                g = g.with_labels(labels).unwrap();
            }
            let text = render_dataset(None, None, &[g.clone()]);
            let parsed = parse_dataset(&text).unwrap();
            prop_assert_eq!(&parsed.graphs[0], &g);
            // Idempotent: render(parse(render)) == render.
            prop_assert_eq!(render_dataset(None, None, &parsed.graphs), text);
        }
    }
}
