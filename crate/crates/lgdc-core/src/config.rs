//! Run configuration: flat `key = value` text, `#` comments, no nesting.
//!
//! Parsing starts from the documented defaults and applies overrides;
//! unknown or duplicate keys and out-of-range values are rejected. The
//! canonical rendering round-trips exactly and is what gets hashed into
//! artifact stamps.

use std::path::Path;

use crate::datasets::{DatasetSpec, Family, SbmParams};
use crate::diffusion::NoiseKind;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub family: Family,
    pub count: usize,
    pub test_count: usize,
    pub n_min: usize,
    pub n_max: usize,
    pub seed: u64,
    pub communities: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub target_ratio: f64,
    pub v_max: usize,
    pub k_eig: usize,
    pub steps: usize,
    pub noise: NoiseKind,
    pub lambda_e: f64,
    pub d: usize,
    pub l: usize,
    pub train_steps: usize,
    pub expander_steps: usize,
    pub batch: usize,
    pub lr: f64,
    pub sample_count: usize,
    pub temperature: f64,
    pub data_dir: String,
    pub checkpoint_dir: String,
    pub report_dir: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            family: Family::Tree,
            count: 128,
            test_count: 40,
            n_min: 64,
            n_max: 64,
            seed: 0,
            communities: 2,
            p_in: 0.3,
            p_out: 0.05,
            target_ratio: 0.2,
            v_max: 8,
            k_eig: 8,
            steps: 100,
            noise: NoiseKind::Marginal,
            lambda_e: 5.0,
            d: 64,
            l: 4,
            train_steps: 300,
            expander_steps: 300,
            batch: 8,
            lr: 3e-4,
            sample_count: 40,
            temperature: 1.0,
            data_dir: "data".into(),
            checkpoint_dir: "checkpoints".into(),
            report_dir: "reports".into(),
        }
    }
}

fn bad(key: &str, value: &str, want: &str) -> Error {
    Error::Config(format!("key `{key}`: `{value}` is not {want}"))
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str, want: &str) -> Result<T> {
    value.parse().map_err(|_| bad(key, value, want))
}

impl RunConfig {
    /// Parse overrides on top of the defaults.
    pub fn parse(text: &str) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        let mut seen = std::collections::HashSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", idx + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(Error::Config(format!("duplicate key `{key}`")));
            }
            cfg.set(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        RunConfig::parse(&text)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "family" => self.family = Family::parse(value)?,
            "count" => self.count = parse_num(key, value, "a count")?,
            "test_count" => self.test_count = parse_num(key, value, "a count")?,
            "n_min" => self.n_min = parse_num(key, value, "a node count")?,
            "n_max" => self.n_max = parse_num(key, value, "a node count")?,
            "seed" => self.seed = parse_num(key, value, "a 64-bit seed")?,
            "communities" => self.communities = parse_num(key, value, "a count")?,
            "p_in" => self.p_in = parse_num(key, value, "a probability")?,
            "p_out" => self.p_out = parse_num(key, value, "a probability")?,
            "target_ratio" => self.target_ratio = parse_num(key, value, "a ratio")?,
            "v_max" => self.v_max = parse_num(key, value, "a cluster-size cap")?,
            "k_eig" => self.k_eig = parse_num(key, value, "an eigenpair count")?,
            "steps" => self.steps = parse_num(key, value, "a step count")?,
            "noise" => self.noise = NoiseKind::parse(value)?,
            "lambda_e" => self.lambda_e = parse_num(key, value, "a weight")?,
            "d" => self.d = parse_num(key, value, "a width")?,
            "l" => self.l = parse_num(key, value, "a depth")?,
            "train_steps" => self.train_steps = parse_num(key, value, "a step count")?,
            "expander_steps" => self.expander_steps = parse_num(key, value, "a step count")?,
            "batch" => self.batch = parse_num(key, value, "a batch size")?,
            "lr" => self.lr = parse_num(key, value, "a learning rate")?,
            "sample_count" => self.sample_count = parse_num(key, value, "a count")?,
            "temperature" => self.temperature = parse_num(key, value, "a temperature")?,
            "data_dir" => self.data_dir = value.to_string(),
            "checkpoint_dir" => self.checkpoint_dir = value.to_string(),
            "report_dir" => self.report_dir = value.to_string(),
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    fn validate(&self) -> Result<()> {
        let check = |ok: bool, msg: &str| {
            if ok { Ok(()) } else { Err(Error::Config(msg.into())) }
        };
        check(self.count >= 1, "count must be at least 1")?;
        check(self.test_count >= 1, "test_count must be at least 1")?;
        check(self.n_min >= 1, "n_min must be at least 1")?;
        check(self.n_min <= self.n_max, "n_min must not exceed n_max")?;
        check(self.communities >= 1, "communities must be at least 1")?;
        check(self.p_in > 0.0 && self.p_in <= 1.0, "p_in must be in (0, 1]")?;
        check(self.p_out >= 0.0 && self.p_out <= 1.0, "p_out must be in [0, 1]")?;
        check(
            self.target_ratio > 0.0 && self.target_ratio <= 1.0,
            "target_ratio must be in (0, 1]",
        )?;
        check(self.v_max >= 1, "v_max must be at least 1")?;
        check(self.k_eig >= 1, "k_eig must be at least 1")?;
        check(self.steps >= 1, "steps must be at least 1")?;
        check(self.lambda_e > 0.0, "lambda_e must be positive")?;
        check(self.d >= 1, "d must be at least 1")?;
        check(self.l >= 1, "l must be at least 1")?;
        check(self.train_steps >= 1, "train_steps must be at least 1")?;
        check(self.expander_steps >= 1, "expander_steps must be at least 1")?;
        check(self.batch >= 1, "batch must be at least 1")?;
        check(self.lr > 0.0 && self.lr.is_finite(), "lr must be positive and finite")?;
        check(self.sample_count >= 1, "sample_count must be at least 1")?;
        check(
            self.temperature >= 0.0 && self.temperature.is_finite(),
            "temperature must be non-negative",
        )?;
        for (name, dir) in [
            ("data_dir", &self.data_dir),
            ("checkpoint_dir", &self.checkpoint_dir),
            ("report_dir", &self.report_dir),
        ] {
            check(!dir.is_empty(), &format!("{name} must not be empty"))?;
        }
        Ok(())
    }

    /// Canonical rendering; `parse(render())` reproduces the config
    /// exactly (float formatting is shortest round-trip).
    pub fn render(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        kv("family", self.family.name().into());
        kv("count", self.count.to_string());
        kv("test_count", self.test_count.to_string());
        kv("n_min", self.n_min.to_string());
        kv("n_max", self.n_max.to_string());
        kv("seed", self.seed.to_string());
        kv("communities", self.communities.to_string());
        kv("p_in", self.p_in.to_string());
        kv("p_out", self.p_out.to_string());
        kv("target_ratio", self.target_ratio.to_string());
        kv("v_max", self.v_max.to_string());
        kv("k_eig", self.k_eig.to_string());
        kv("steps", self.steps.to_string());
        kv("noise", self.noise.name().into());
        kv("lambda_e", self.lambda_e.to_string());
        kv("d", self.d.to_string());
        kv("l", self.l.to_string());
        kv("train_steps", self.train_steps.to_string());
        kv("expander_steps", self.expander_steps.to_string());
        kv("batch", self.batch.to_string());
        kv("lr", self.lr.to_string());
        kv("sample_count", self.sample_count.to_string());
        kv("temperature", self.temperature.to_string());
        kv("data_dir", self.data_dir.clone());
        kv("checkpoint_dir", self.checkpoint_dir.clone());
        kv("report_dir", self.report_dir.clone());
        out
    }

    /// FNV-1a over the canonical rendering; stamps artifacts for exact
    /// rerun checks.
    pub fn hash(&self) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        for byte in self.render().bytes() {
            h ^= byte as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        h
    }

    pub fn hash_hex(&self) -> String {
        format!("{:016x}", self.hash())
    }

    /// Training-split dataset spec; the test split reuses it with
    /// `test_count` via `generate_split`.
    pub fn dataset_spec(&self) -> DatasetSpec {
        DatasetSpec {
            family: self.family,
            count: self.count,
            n_min: self.n_min,
            n_max: self.n_max,
            seed: self.seed,
            sbm: SbmParams {
                communities: self.communities,
                p_in: self.p_in,
                p_out: self.p_out,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_render_and_parse() {
        let cfg = RunConfig::default();
        assert_eq!(RunConfig::parse(&cfg.render()).unwrap(), cfg);

        let mut odd = cfg.clone();
        odd.lr = 3e-4;
        odd.p_out = 0.017;
        odd.temperature = 0.0;
        odd.family = Family::Community;
        odd.n_min = 17;
        odd.n_max = 23;
        assert_eq!(RunConfig::parse(&odd.render()).unwrap(), odd);
    }

    #[test]
    fn overrides_comments_and_whitespace() {
        let text = "\n# community desk run\nfamily = community\n  count=12   # small\nn_min = 20\nn_max = 20\nsteps = 50\nnoise = uniform\n";
        let cfg = RunConfig::parse(text).unwrap();
        assert_eq!(cfg.family, Family::Community);
        assert_eq!(cfg.count, 12);
        assert_eq!((cfg.n_min, cfg.n_max), (20, 20));
        assert_eq!(cfg.steps, 50);
        assert_eq!(cfg.noise, NoiseKind::Uniform);
        assert_eq!(cfg.test_count, RunConfig::default().test_count);
    }

    #[test]
    fn rejects_malformed_input() {
        for text in [
            "frobnicate = 1",              // unknown key
            "count = 3\ncount = 4",        // duplicate
            "count zero",                  // missing =
            "count = many",                // not a number
            "count = 0",                   // out of range
            "target_ratio = 1.5",          // out of range
            "n_min = 9\nn_max = 4",        // inverted range
            "noise = banana",              // unknown variant
            "family = lattice",            // unknown variant
            "lr = -0.1",                   // negative
            "p_in = 0",                    // degenerate
            "data_dir =",                  // empty path
        ] {
            assert!(RunConfig::parse(text).is_err(), "accepted: {text}");
        }
    }

    #[test]
    fn hash_tracks_every_field() {
        let base = RunConfig::default();
        let mut other = base.clone();
        other.seed = 1;
        assert_ne!(base.hash(), other.hash());
        let mut other = base.clone();
        other.temperature = 0.9;
        assert_ne!(base.hash(), other.hash());
        assert_eq!(base.hash_hex().len(), 16);
    }

    #[test]
    fn dataset_spec_carries_the_dataset_fields() {
        let cfg = RunConfig::parse("family = community\ncount = 7\nn_min = 10\nn_max = 14\nseed = 99\ncommunities = 3\np_in = 0.4\np_out = 0.02").unwrap();
        let spec = cfg.dataset_spec();
        assert_eq!(spec.family, Family::Community);
        assert_eq!(spec.count, 7);
        assert_eq!((spec.n_min, spec.n_max), (10, 14));
        assert_eq!(spec.seed, 99);
        assert_eq!(spec.sbm.communities, 3);
        assert_eq!(spec.sbm.p_in, 0.4);
        assert_eq!(spec.sbm.p_out, 0.02);
    }
}
