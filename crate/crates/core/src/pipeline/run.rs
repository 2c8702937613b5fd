use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::adaptive::{choose_ratio, mmd2, RatioChoice};
use crate::codec::{model_cr, train_codec, harden, reconstruct_table, relative_mse, CodeMatrix, CodebookStore};
use crate::error::{Error, Result};
use crate::numkit::{Matrix, Rng};
use crate::recommender::{evaluate_many, train, Metrics, RecModel, SessionEncoder};
use crate::sessiondata::{
    filter_and_index, prepare, read_cache, sessionize, synth_event_log, synth_generate, synth_sessions, EventLog, SessionDataset, SlicePlan, SlicedData,
    Vocab, CACHE_MAGIC,
};
use crate::updater::{beta_from_ratio, end_to_end_cr, update_cr, Device, Server, Strategy};
use crate::wire::{decode_delta, encode_delta};

use super::config::{DataSource, ExperimentConfig, RatioMode};
use super::report::RoundReport;

const STREAM_SYNTH: u64 = 1;
const STREAM_INIT: u64 = 2;
const STREAM_TRAIN: u64 = 3;
const STREAM_CODEC: u64 = 4;
const STREAM_MMD: u64 = 5;

/// Loads or generates the sliced dataset named by the config.
pub fn load_data(cfg: &ExperimentConfig) -> Result<(Option<Vocab>, SlicedData)> {
    let plan = SlicePlan::from_ratios(&cfg.slices)?;
    match &cfg.data {
        DataSource::Synth(s) => {
            let mut rng = Rng::new(cfg.derived_seed(STREAM_SYNTH));
            Ok((None, synth_generate(&mut rng, s, &plan, cfg.test_fraction)?))
        }
        DataSource::File(path) => {
            let bytes = std::fs::read(path)?;
            if bytes.starts_with(&CACHE_MAGIC) {
                let (vocab, data) = read_cache(&bytes)?;
                return Ok((Some(vocab), data));
            }
            let log = EventLog::parse(bytes.as_slice(), cfg.delimiter)?;
            if log.is_empty() {
                return Err(Error::EmptyDataset(format!("{} holds no events", path.display())));
            }
            let raw = sessionize(&log, cfg.session_gap)?;
            let (sessions, vocab) = filter_and_index(&raw, cfg.min_len, cfg.max_len, cfg.top_items)?;
            let data = prepare(&sessions, vocab.len(), &plan, cfg.test_fraction)?;
            if data.test.is_empty() {
                return Err(Error::EmptyDataset("the test holdout is empty".into()));
            }
            Ok((Some(vocab), data))
        }
    }
}

/// Generates the configured synthetic stream as an event log plus its sliced dataset.
pub fn synth_dataset(cfg: &ExperimentConfig) -> Result<(EventLog, Vocab, SlicedData)> {
    let DataSource::Synth(s) = &cfg.data else {
        return Err(Error::Config("synth needs `data = synth`".into()));
    };
    let plan = SlicePlan::from_ratios(&cfg.slices)?;
    let mut rng = Rng::new(cfg.derived_seed(STREAM_SYNTH));
    let sessions = synth_sessions(&mut rng, s)?;
    let data = prepare(&sessions, s.vocab_size, &plan, cfg.test_fraction)?;
    let vocab = Vocab::from_ids((0..s.vocab_size).map(|i| format!("i{i}")).collect());
    Ok((synth_event_log(&sessions), vocab, data))
}

/// The cloud model after training on one slice.
#[derive(Clone, Debug)]
pub struct CloudRound {
    pub slice: u32,
    pub model: RecModel,
    pub losses: Vec<f64>,
    pub metrics: [Metrics; 2],
    pub secs: f64,
}

fn metrics_pair(table: &Matrix, enc: &SessionEncoder, data: &SessionDataset) -> Result<[Metrics; 2]> {
    let m = evaluate_many(table, enc, data, &[5.min(table.rows()), 10.min(table.rows())])?;
    Ok([m[0], m[1]])
}

/// Trains the cloud recommender slice by slice, warm-starting unless disabled.
///
/// The gate is frozen after the first slice unless `refresh_gate` is set.
pub fn train_cloud(cfg: &ExperimentConfig, data: &SlicedData) -> Result<Vec<CloudRound>> {
    let mut rounds: Vec<CloudRound> = Vec::with_capacity(data.slices.len());
    let init_seed = cfg.derived_seed(STREAM_INIT);
    for slice in &data.slices {
        let start = Instant::now();
        let mut model = match rounds.last() {
            Some(prev) if cfg.warm_start => prev.model.clone(),
            Some(prev) => {
                let mut m = RecModel::new(data.vocab_size, cfg.d, cfg.encoder, &mut Rng::new(init_seed))?;
                m.encoder = prev.model.encoder;
                m.gate_frozen = prev.model.gate_frozen;
                m
            }
            None => RecModel::new(data.vocab_size, cfg.d, cfg.encoder, &mut Rng::new(init_seed))?,
        };
        let mut rec = cfg.rec.clone();
        rec.seed = cfg.derived_seed(STREAM_TRAIN).wrapping_add(slice.slice_id as u64);
        let losses = train(&mut model, slice, &rec)?;
        if !cfg.refresh_gate {
            model.gate_frozen = true;
        }
        let metrics = metrics_pair(&model.embeddings, &model.encoder, &data.test)?;
        rounds.push(CloudRound {
            slice: slice.slice_id,
            model,
            losses,
            metrics,
            secs: start.elapsed().as_secs_f64(),
        });
    }
    Ok(rounds)
}

/// Output of one simulated run.
#[derive(Clone, Debug)]
pub struct Simulation {
    pub reports: Vec<RoundReport>,
    /// Encoded frame per slice; `None` for skipped rounds.
    pub frames: Vec<Option<Vec<u8>>>,
    /// Device table after each slice.
    pub device_tables: Vec<Matrix>,
}

/// Runs the cloud/device loop over precomputed cloud rounds.
pub fn simulate_with_cloud(cfg: &ExperimentConfig, data: &SlicedData, cloud: &[CloudRound]) -> Result<Simulation> {
    let vocab = data.vocab_size;
    let mut codec = cfg.codec.clone();
    codec.d = cfg.d;
    codec.validate(vocab)?;
    let (n, k, d) = (codec.n, codec.k, codec.d);
    let nk = codec.nk();
    let mut server = Server::new(codec, cfg.strategy);
    let mut device = Device::new(n, k, d, cfg.strategy);
    let mut device_encoder: Option<SessionEncoder> = None;
    let mut cum_bytes = 0usize;
    let mut sim = Simulation {
        reports: Vec::new(),
        frames: Vec::new(),
        device_tables: Vec::new(),
    };
    let codec_seed = cfg.derived_seed(STREAM_CODEC);
    let cr_model = model_cr(vocab, d, n, k);

    for (t, round) in cloud.iter().enumerate() {
        let start = Instant::now();
        server.config_mut().seed = codec_seed.wrapping_add(round.slice as u64);
        let x = &round.model.embeddings;
        let (mmd, r, outcome) = if t == 0 {
            (None, None, Some(server.deploy(x)?))
        } else {
            let mut mcfg = cfg.mmd.clone();
            mcfg.seed = cfg.derived_seed(STREAM_MMD).wrapping_add(round.slice as u64);
            let m = mmd2(&cloud[t - 1].model.embeddings, x, &mcfg)?;
            let choice = match cfg.ratio {
                RatioMode::Adaptive => choose_ratio(m, &cfg.adaptive),
                RatioMode::Fixed(r) => RatioChoice::Ratio(r),
            };
            match choice {
                RatioChoice::Skip => (Some(m), None, None),
                RatioChoice::Ratio(r) => {
                    let out = server.update(x, beta_from_ratio(n, k, r))?;
                    let r = (cfg.strategy != Strategy::Full).then_some(r);
                    (Some(m), r, Some(out))
                }
            }
        };

        let (beta, frame) = match outcome {
            Some(out) => {
                let bytes = encode_delta(&out.delta)?;
                let received = decode_delta(&bytes)?;
                device.apply(&received)?;
                (received.beta(), Some(bytes))
            }
            None => (0, None),
        };
        if server.ledger() != device.ledger() || server.store() != Some(device.store()) {
            return Err(Error::Divergence(format!("server and device disagree after slice {}", round.slice)));
        }
        if device_encoder.is_none() || cfg.refresh_gate {
            device_encoder = Some(round.model.encoder);
        }
        let enc = device_encoder.expect("set above");
        let table = device.table().ok_or_else(|| Error::Divergence("device holds no model".into()))?;
        let dev = metrics_pair(table, &enc, &data.test)?;

        let delta_bytes = frame.as_ref().map_or(0, Vec::len);
        cum_bytes += delta_bytes;
        let (cr_update, cr_total) = if beta == 0 {
            (None, None)
        } else {
            (Some(update_cr(n, k, d, vocab, beta)), Some(end_to_end_cr(vocab, d, n, beta)))
        };
        let secs = if cfg.timing {
            round.secs + start.elapsed().as_secs_f64()
        } else {
            0.0
        };
        debug_assert!(beta <= nk);
        sim.reports.push(RoundReport {
            slice: round.slice,
            strategy: cfg.strategy,
            r,
            beta,
            mmd,
            delta_bytes,
            cum_bytes,
            cloud_p5: round.metrics[0].prec,
            cloud_n5: round.metrics[0].ndcg,
            cloud_p10: round.metrics[1].prec,
            cloud_n10: round.metrics[1].ndcg,
            dev_p5: dev[0].prec,
            dev_n5: dev[0].ndcg,
            dev_p10: dev[1].prec,
            dev_n10: dev[1].ndcg,
            cr_model,
            cr_update,
            cr_total,
            secs,
        });
        sim.frames.push(frame);
        sim.device_tables.push(table.clone());
    }
    Ok(sim)
}

pub fn simulate(cfg: &ExperimentConfig, data: &SlicedData) -> Result<Simulation> {
    let cloud = train_cloud(cfg, data)?;
    simulate_with_cloud(cfg, data, &cloud)
}

/// Per-slice cloud training summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub slice: u32,
    pub pairs: usize,
    pub final_loss: f64,
    pub p5: f64,
    pub n5: f64,
    pub p10: f64,
    pub n10: f64,
}

impl TrainRecord {
    pub fn from_round(round: &CloudRound, pairs: usize) -> Self {
        Self {
            slice: round.slice,
            pairs,
            final_loss: round.losses.last().copied().unwrap_or(f64::NAN),
            p5: round.metrics[0].prec,
            n5: round.metrics[0].ndcg,
            p10: round.metrics[1].prec,
            n10: round.metrics[1].ndcg,
        }
    }
}

/// Result of compressing one embedding table.
#[derive(Clone, Debug)]
pub struct Compressed {
    pub store: CodebookStore,
    pub codes: CodeMatrix,
    pub relative_mse: f64,
    pub model_cr: f64,
}

/// Trains a codec for `model`'s table and hardens it.
pub fn compress_model(cfg: &ExperimentConfig, model: &RecModel) -> Result<Compressed> {
    let mut codec = cfg.codec.clone();
    codec.d = model.d();
    codec.seed = cfg.derived_seed(STREAM_CODEC);
    codec.validate(model.vocab())?;
    let trained = train_codec(&model.embeddings, &codec, None, None)?;
    let mut store = trained.store;
    store.rows_mut().round_to_f32();
    let codes = harden(&trained.encoder, &model.embeddings)?;
    let rel = relative_mse(&reconstruct_table(&store, &codes)?, &model.embeddings)?;
    Ok(Compressed {
        store,
        codes,
        relative_mse: rel,
        model_cr: model_cr(model.vocab(), model.d(), codec.n, codec.k),
    })
}

pub(crate) fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}
