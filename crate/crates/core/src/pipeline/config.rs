use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::adaptive::{AdaptiveConfig, Bandwidth, MmdConfig, Sampling};
use crate::codec::CodecConfig;
use crate::error::{Error, Result};
use crate::recommender::{EncoderKind, TrainConfig};
use crate::sessiondata::{SynthConfig, DEFAULT_GAP_SECS};
use crate::updater::Strategy;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum DataSource {
    Synth(SynthConfig),
    /// Event log, or a dataset cache when the file starts with the cache magic.
    File(PathBuf),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum RatioMode {
    Fixed(u64),
    Adaptive,
}

/// Everything one experiment run needs.
///
/// Config files hold one `key = value` per line; `#` starts a comment.
/// Keys:
///
/// | key | default |
/// |---|---|
/// | `data` | `synth` or a path |
/// | `delimiter` | `tab` (or a single character, `comma`, `space`) |
/// | `session_gap` | 28800 |
/// | `min_len`, `max_len`, `top_items` | 2, 50, none |
/// | `synth.vocab`, `synth.sessions`, `synth.drift` | 1000, 5000, 0.5 |
/// | `synth.clusters`, `synth.zipf`, `synth.noise` | 10, 1.0, 0.1 |
/// | `synth.min_len`, `synth.max_len` | 2, 10 |
/// | `slices` | `1,1,1,1,1` (ratios, normalized) |
/// | `test_fraction` | 0.1 |
/// | `rec.d`, `rec.encoder` | 32, `mean-pool` |
/// | `rec.lr`, `rec.epochs`, `rec.batch`, `rec.l2` | 0.001, 25, 100, 1e-5 |
/// | `warm_start`, `refresh_gate` | true, false |
/// | `codec.n`, `codec.k`, `codec.tau` | 8, 16, 0.1 |
/// | `codec.lr`, `codec.epochs`, `codec.batch` | 0.003, 400, 64 |
/// | `codec.gumbel_noise`, `codec.straight_through` | true, false |
/// | `strategy` | `queue` |
/// | `ratio` | 10, or `adaptive` |
/// | `adaptive.c`, `adaptive.skip_threshold` | 0.2, 1e-6 |
/// | `mmd.samples` | `full` or `n1,n2` |
/// | `mmd.bandwidth` | `median` or a positive number |
/// | `mmd.paired` | false |
/// | `seed`, `timing`, `out` | 0, false, `out` |
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub data: DataSource,
    pub delimiter: char,
    pub session_gap: u64,
    pub min_len: usize,
    pub max_len: usize,
    pub top_items: Option<usize>,
    pub slices: Vec<f64>,
    pub test_fraction: f64,
    pub d: usize,
    pub encoder: EncoderKind,
    pub rec: TrainConfig,
    pub warm_start: bool,
    pub refresh_gate: bool,
    pub codec: CodecConfig,
    pub strategy: Strategy,
    pub ratio: RatioMode,
    pub adaptive: AdaptiveConfig,
    pub mmd: MmdConfig,
    pub seed: u64,
    /// Record wall time in reports; off keeps reports byte-reproducible.
    pub timing: bool,
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let d = 32;
        let codec = CodecConfig::new(8, 16, d);
        Self {
            data: DataSource::Synth(SynthConfig::new(1000, 5000, 0.5)),
            delimiter: '\t',
            session_gap: DEFAULT_GAP_SECS,
            min_len: 2,
            max_len: 50,
            top_items: None,
            slices: vec![1.0; 5],
            test_fraction: 0.1,
            d,
            encoder: EncoderKind::MeanPool,
            rec: TrainConfig::default(),
            warm_start: true,
            refresh_gate: false,
            codec,
            strategy: Strategy::Queue,
            ratio: RatioMode::Fixed(10),
            adaptive: AdaptiveConfig::default(),
            mmd: MmdConfig::default(),
            seed: 0,
            timing: false,
            out: PathBuf::from("out"),
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("bad value {v:?} for key {key}")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::Config(format!("bad boolean {v:?} for key {key}"))),
    }
}

pub fn parse_delimiter(v: &str) -> Result<char> {
    match v {
        "tab" | "\\t" => Ok('\t'),
        "comma" => Ok(','),
        "space" => Ok(' '),
        "semicolon" => Ok(';'),
        _ => {
            let mut chars = v.chars();
            match (chars.next(), chars.next()) {
                (Some(c), None) => Ok(c),
                _ => Err(Error::Config(format!("delimiter must be one character, got {v:?}"))),
            }
        }
    }
}

impl ExperimentConfig {
    /// Parses config text; relative paths resolve against `base`.
    pub fn parse_str(text: &str, base: Option<&Path>) -> Result<Self> {
        let mut cfg = Self::default();
        let mut synth = SynthConfig::new(1000, 5000, 0.5);
        let mut use_synth = true;
        let mut file = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!("line {}: expected key = value", lineno + 1)));
            };
            let (key, v) = (key.trim(), value.trim());
            match key {
                "data" => {
                    if v == "synth" {
                        use_synth = true;
                    } else {
                        use_synth = false;
                        let p = PathBuf::from(v);
                        file = Some(match base {
                            Some(b) if p.is_relative() => b.join(p),
                            _ => p,
                        });
                    }
                }
                "delimiter" => cfg.delimiter = parse_delimiter(v)?,
                "session_gap" => cfg.session_gap = parse(key, v)?,
                "min_len" => cfg.min_len = parse(key, v)?,
                "max_len" => cfg.max_len = parse(key, v)?,
                "top_items" => cfg.top_items = if v == "none" { None } else { Some(parse(key, v)?) },
                "synth.vocab" => synth.vocab_size = parse(key, v)?,
                "synth.sessions" => synth.n_sessions = parse(key, v)?,
                "synth.drift" => synth.drift = parse(key, v)?,
                "synth.clusters" => synth.clusters = parse(key, v)?,
                "synth.zipf" => synth.zipf = parse(key, v)?,
                "synth.noise" => synth.noise = parse(key, v)?,
                "synth.min_len" => synth.min_len = parse(key, v)?,
                "synth.max_len" => synth.max_len = parse(key, v)?,
                "slices" => {
                    cfg.slices = v
                        .split([',', ':'])
                        .map(|s| parse::<f64>(key, s.trim()))
                        .collect::<Result<_>>()?
                }
                "test_fraction" => cfg.test_fraction = parse(key, v)?,
                "rec.d" => cfg.d = parse(key, v)?,
                "rec.encoder" => cfg.encoder = v.parse().map_err(|e: Error| Error::Config(e.to_string()))?,
                "rec.lr" => cfg.rec.lr = parse(key, v)?,
                "rec.epochs" => cfg.rec.epochs = parse(key, v)?,
                "rec.batch" => cfg.rec.batch = parse(key, v)?,
                "rec.l2" => cfg.rec.l2 = parse(key, v)?,
                "warm_start" => cfg.warm_start = parse_bool(key, v)?,
                "refresh_gate" => cfg.refresh_gate = parse_bool(key, v)?,
                "codec.n" => cfg.codec.n = parse(key, v)?,
                "codec.k" => cfg.codec.k = parse(key, v)?,
                "codec.tau" => cfg.codec.tau = parse(key, v)?,
                "codec.lr" => cfg.codec.lr = parse(key, v)?,
                "codec.epochs" => cfg.codec.epochs = parse(key, v)?,
                "codec.batch" => cfg.codec.batch = parse(key, v)?,
                "codec.gumbel_noise" => cfg.codec.gumbel_noise = parse_bool(key, v)?,
                "codec.straight_through" => cfg.codec.straight_through = parse_bool(key, v)?,
                "strategy" => cfg.strategy = v.parse().map_err(|e: Error| Error::Config(e.to_string()))?,
                "ratio" => {
                    cfg.ratio = if v == "adaptive" {
                        RatioMode::Adaptive
                    } else {
                        RatioMode::Fixed(parse(key, v)?)
                    }
                }
                "adaptive.c" => cfg.adaptive.c = parse(key, v)?,
                "adaptive.skip_threshold" => cfg.adaptive.skip_threshold = parse(key, v)?,
                "mmd.samples" => {
                    cfg.mmd.sampling = if v == "full" {
                        Sampling::Full
                    } else {
                        let parts: Vec<usize> = v.split(',').map(|s| parse(key, s.trim())).collect::<Result<_>>()?;
                        match parts[..] {
                            [n] => Sampling::Count { n1: n, n2: n },
                            [n1, n2] => Sampling::Count { n1, n2 },
                            _ => return Err(Error::Config(format!("bad value {v:?} for key {key}"))),
                        }
                    }
                }
                "mmd.bandwidth" => {
                    cfg.mmd.bandwidth = if v == "median" {
                        Bandwidth::Median
                    } else {
                        Bandwidth::Fixed(parse(key, v)?)
                    }
                }
                "mmd.paired" => cfg.mmd.paired = parse_bool(key, v)?,
                "seed" => cfg.seed = parse(key, v)?,
                "timing" => cfg.timing = parse_bool(key, v)?,
                "out" => {
                    let p = PathBuf::from(v);
                    cfg.out = match base {
                        Some(b) if p.is_relative() => b.join(p),
                        _ => p,
                    }
                }
                other => return Err(Error::Config(format!("line {}: unknown key {other:?}", lineno + 1))),
            }
        }
        cfg.data = match (use_synth, file) {
            (false, Some(p)) => DataSource::File(p),
            _ => DataSource::Synth(synth),
        };
        cfg.codec.d = cfg.d;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse_str(&text, path.parent())
    }

    pub fn validate(&self) -> Result<()> {
        if let DataSource::File(p) = &self.data {
            if !p.is_file() {
                return Err(Error::Config(format!("data file {} does not exist", p.display())));
            }
        }
        if let DataSource::Synth(s) = &self.data {
            s.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        if self.slices.is_empty() || self.slices.iter().any(|&f| !(f > 0.0 && f.is_finite())) {
            return Err(Error::Config("slices must be positive ratios".into()));
        }
        if !(0.0..1.0).contains(&self.test_fraction) || self.test_fraction == 0.0 {
            return Err(Error::Config("test_fraction must lie in (0, 1)".into()));
        }
        if self.d < 2 {
            return Err(Error::Config("rec.d must be at least 2".into()));
        }
        if self.session_gap == 0 {
            return Err(Error::Config("session_gap must be positive".into()));
        }
        if let RatioMode::Fixed(0) = self.ratio {
            return Err(Error::Config("ratio must be at least 1".into()));
        }
        self.rec.validate()?;
        self.adaptive.validate()?;
        self.mmd.validate()?;
        Ok(())
    }

    /// Seed for an independent stream derived from the run seed.
    pub fn derived_seed(&self, stream: u64) -> u64 {
        crate::numkit::Rng::new(self.seed).fork(stream).next_u64()
    }

    /// The config in `key = value` form, parseable by [`ExperimentConfig::parse_str`].
    pub fn to_text(&self) -> String {
        let mut lines = Vec::new();
        let mut kv = |k: &str, v: String| lines.push(format!("{k} = {v}"));
        match &self.data {
            DataSource::File(p) => kv("data", p.display().to_string()),
            DataSource::Synth(s) => {
                kv("data", "synth".into());
                kv("synth.vocab", s.vocab_size.to_string());
                kv("synth.sessions", s.n_sessions.to_string());
                kv("synth.drift", s.drift.to_string());
                kv("synth.clusters", s.clusters.to_string());
                kv("synth.zipf", s.zipf.to_string());
                kv("synth.noise", s.noise.to_string());
                kv("synth.min_len", s.min_len.to_string());
                kv("synth.max_len", s.max_len.to_string());
            }
        }
        kv(
            "delimiter",
            match self.delimiter {
                '\t' => "tab".into(),
                ',' => "comma".into(),
                ' ' => "space".into(),
                c => c.to_string(),
            },
        );
        kv("session_gap", self.session_gap.to_string());
        kv("min_len", self.min_len.to_string());
        kv("max_len", self.max_len.to_string());
        kv("top_items", self.top_items.map_or("none".into(), |t| t.to_string()));
        kv("slices", self.slices.iter().map(f64::to_string).collect::<Vec<_>>().join(","));
        kv("test_fraction", self.test_fraction.to_string());
        kv("rec.d", self.d.to_string());
        kv(
            "rec.encoder",
            match self.encoder {
                EncoderKind::MeanPool => "mean-pool".into(),
                EncoderKind::LastItemGated => "last-item-gated".into(),
            },
        );
        kv("rec.lr", self.rec.lr.to_string());
        kv("rec.epochs", self.rec.epochs.to_string());
        kv("rec.batch", self.rec.batch.to_string());
        kv("rec.l2", self.rec.l2.to_string());
        kv("warm_start", self.warm_start.to_string());
        kv("refresh_gate", self.refresh_gate.to_string());
        kv("codec.n", self.codec.n.to_string());
        kv("codec.k", self.codec.k.to_string());
        kv("codec.tau", self.codec.tau.to_string());
        kv("codec.lr", self.codec.lr.to_string());
        kv("codec.epochs", self.codec.epochs.to_string());
        kv("codec.batch", self.codec.batch.to_string());
        kv("codec.gumbel_noise", self.codec.gumbel_noise.to_string());
        kv("codec.straight_through", self.codec.straight_through.to_string());
        kv("strategy", self.strategy.as_str().into());
        kv(
            "ratio",
            match self.ratio {
                RatioMode::Fixed(r) => r.to_string(),
                RatioMode::Adaptive => "adaptive".into(),
            },
        );
        kv("adaptive.c", self.adaptive.c.to_string());
        kv("adaptive.skip_threshold", self.adaptive.skip_threshold.to_string());
        kv(
            "mmd.samples",
            match self.mmd.sampling {
                Sampling::Full => "full".into(),
                Sampling::Count { n1, n2 } => format!("{n1},{n2}"),
            },
        );
        kv(
            "mmd.bandwidth",
            match self.mmd.bandwidth {
                Bandwidth::Median => "median".into(),
                Bandwidth::Fixed(s) => s.to_string(),
            },
        );
        kv("mmd.paired", self.mmd.paired.to_string());
        kv("seed", self.seed.to_string());
        kv("timing", self.timing.to_string());
        kv("out", self.out.display().to_string());
        lines.join("\n") + "\n"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_text() {
        let cfg = ExperimentConfig::default();
        let back = ExperimentConfig::parse_str(&cfg.to_text(), None).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn parses_keys() {
        let text = "# run\nstrategy = stack\nratio = adaptive  # eq\nsynth.drift = 0\nslices = 1:3:6\nmmd.samples = 100,200\nmmd.bandwidth = 0.5\ncodec.n = 4\nrec.d = 16\n";
        let cfg = ExperimentConfig::parse_str(text, None).unwrap();
        assert_eq!(cfg.strategy, Strategy::Stack);
        assert_eq!(cfg.ratio, RatioMode::Adaptive);
        assert_eq!(cfg.slices, vec![1.0, 3.0, 6.0]);
        assert_eq!(cfg.mmd.sampling, Sampling::Count { n1: 100, n2: 200 });
        assert_eq!(cfg.mmd.bandwidth, Bandwidth::Fixed(0.5));
        assert_eq!((cfg.codec.n, cfg.codec.d), (4, 16));
        match cfg.data {
            DataSource::Synth(s) => assert_eq!(s.drift, 0.0),
            _ => panic!(),
        }
    }

    #[test]
    fn rejects_bad_config() {
        for text in [
            "bogus = 1",
            "ratio = 0",
            "rec.lr = 3",
            "strategy = lifo",
            "adaptive.c = 0",
            "no equals sign",
            "data = /nonexistent/events.tsv",
            "test_fraction = 1.5",
        ] {
            assert!(matches!(ExperimentConfig::parse_str(text, None), Err(Error::Config(_))), "{text}");
        }
    }

    #[test]
    fn delimiters() {
        assert_eq!(parse_delimiter("tab").unwrap(), '\t');
        assert_eq!(parse_delimiter(",").unwrap(), ',');
        assert!(parse_delimiter("ab").is_err());
    }
}
