use serde::{Deserialize, Serialize};

use crate::codec::{harden, reconstruct_table, train_codec, CodeMatrix, CodebookStore, CodecConfig, CodecEncoder};
use crate::error::{Error, Result};
use crate::numkit::Matrix;

use super::{plan_slots, SlotLedger, Strategy};

/// One epoch's payload: the full new code matrix plus the replaced rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UpdateDelta {
    pub epoch: u32,
    pub strategy: Strategy,
    pub codes: CodeMatrix,
    /// Row indices written by this delta, in application order.
    pub slots: Vec<usize>,
    /// `β × d`, values exactly representable as `f32`.
    pub new_rows: Matrix,
}

impl UpdateDelta {
    pub fn beta(&self) -> usize {
        self.slots.len()
    }

    pub fn vocab(&self) -> usize {
        self.codes.vocab()
    }

    pub fn d(&self) -> usize {
        self.new_rows.cols()
    }

    pub fn nk(&self) -> usize {
        self.codes.n() * self.codes.k()
    }

    /// Transferred element count `βd + n|V|`.
    pub fn element_count(&self) -> usize {
        self.beta() * self.d() + self.codes.n() * self.vocab()
    }

    pub fn validate(&self) -> Result<()> {
        let nk = self.nk();
        if self.beta() == 0 || self.beta() > nk {
            return Err(Error::invalid(format!("beta must be in [1, {nk}], got {}", self.beta())));
        }
        if self.new_rows.rows() != self.beta() {
            return Err(Error::invalid("row count does not match slot count"));
        }
        let mut seen = vec![false; nk];
        for &s in &self.slots {
            if s >= nk {
                return Err(Error::IndexOutOfRange { index: s, limit: nk });
            }
            if std::mem::replace(&mut seen[s], true) {
                return Err(Error::invalid(format!("slot {s} listed twice")));
            }
        }
        if self.strategy == Strategy::Full && self.beta() != nk {
            return Err(Error::invalid("a full delta must replace every row"));
        }
        Ok(())
    }
}

/// Server-side result of one (re)training round.
#[derive(Clone, Debug)]
pub struct RetrainOutcome {
    pub store: CodebookStore,
    pub encoder: CodecEncoder,
    pub codes: CodeMatrix,
    pub delta: UpdateDelta,
    pub losses: Vec<f64>,
}

/// Retrains the codec toward `new_target` with every row outside `slots` frozen.
///
/// Retrained rows are rounded to `f32` before they enter the store, so the
/// server keeps exactly what the device will hold.
pub fn retrain_update(
    prev_store: &CodebookStore,
    prev_encoder: &CodecEncoder,
    new_target: &Matrix,
    slots: &[usize],
    cfg: &CodecConfig,
    epoch: u32,
    strategy: Strategy,
) -> Result<RetrainOutcome> {
    let nk = cfg.nk();
    let mut in_slots = vec![false; nk];
    for &s in slots {
        if s >= nk {
            return Err(Error::IndexOutOfRange { index: s, limit: nk });
        }
        in_slots[s] = true;
    }
    let frozen: Vec<usize> = (0..nk).filter(|&r| !in_slots[r]).collect();
    let trained = train_codec(new_target, cfg, Some(&frozen), Some((prev_store, prev_encoder)))?;
    finish_round(trained, new_target, slots, epoch, strategy)
}

/// First deployment: train from scratch and ship every row.
pub fn initial_deploy(target: &Matrix, cfg: &CodecConfig) -> Result<RetrainOutcome> {
    let trained = train_codec(target, cfg, None, None)?;
    let all: Vec<usize> = (0..cfg.nk()).collect();
    finish_round(trained, target, &all, 1, Strategy::Full)
}

fn finish_round(
    trained: crate::codec::CodecTraining,
    target: &Matrix,
    slots: &[usize],
    epoch: u32,
    strategy: Strategy,
) -> Result<RetrainOutcome> {
    let mut store = trained.store;
    for &s in slots {
        for v in store.rows_mut().row_mut(s) {
            *v = *v as f32 as f64;
        }
    }
    let codes = harden(&trained.encoder, target)?;
    let delta = UpdateDelta {
        epoch,
        strategy,
        codes: codes.clone(),
        slots: slots.to_vec(),
        new_rows: store.rows().select_rows(slots)?,
    };
    delta.validate()?;
    Ok(RetrainOutcome {
        store,
        encoder: trained.encoder,
        codes,
        delta,
        losses: trained.losses,
    })
}

/// Result of applying a delta on the device.
#[derive(Clone, Debug, PartialEq)]
pub struct AppliedDelta {
    pub store: CodebookStore,
    pub ledger: SlotLedger,
    pub table: Matrix,
}

/// Writes the delta's rows into its slots, advances the ledger and
/// reconstitutes the embedding table from the delta's codes.
///
/// Inputs are not modified; callers commit the returned state. A delta is
/// rejected if its epoch is not the next one, if its strategy is neither
/// `Full` nor `session_strategy`, or if its slot list differs from what the
/// local ledger plans for the same strategy and `β`.
pub fn apply_delta(
    device_store: &CodebookStore,
    device_ledger: &SlotLedger,
    delta: &UpdateDelta,
    session_strategy: Strategy,
) -> Result<AppliedDelta> {
    delta.validate()?;
    let expected = device_ledger.current_epoch() + 1;
    if delta.epoch != expected {
        return Err(Error::StaleDelta {
            expected,
            got: delta.epoch,
        });
    }
    if delta.strategy != Strategy::Full && delta.strategy != session_strategy {
        return Err(Error::Divergence(format!(
            "delta uses {} but this device runs {}",
            delta.strategy, session_strategy
        )));
    }
    if delta.codes.n() != device_store.n() || delta.codes.k() != device_store.k() || delta.d() != device_store.d() {
        return Err(Error::Divergence("delta dimensions differ from the device store".into()));
    }
    let planned = plan_slots(device_ledger, delta.strategy, delta.beta())?;
    if planned != delta.slots {
        return Err(Error::Divergence(format!(
            "slot list {:?} does not match local plan {:?}",
            delta.slots, planned
        )));
    }
    let mut store = device_store.clone();
    for (i, &s) in delta.slots.iter().enumerate() {
        store.rows_mut().row_mut(s).copy_from_slice(delta.new_rows.row(i));
    }
    let mut ledger = device_ledger.clone();
    ledger.commit(&delta.slots, delta.epoch);
    let table = reconstruct_table(&store, &delta.codes)?;
    Ok(AppliedDelta { store, ledger, table })
}

/// Cloud-side codec state across update rounds.
#[derive(Clone, Debug)]
pub struct Server {
    cfg: CodecConfig,
    strategy: Strategy,
    ledger: SlotLedger,
    state: Option<(CodebookStore, CodecEncoder, CodeMatrix)>,
}

impl Server {
    pub fn new(cfg: CodecConfig, strategy: Strategy) -> Self {
        let ledger = SlotLedger::empty(cfg.nk());
        Self {
            cfg,
            strategy,
            ledger,
            state: None,
        }
    }

    pub fn config(&self) -> &CodecConfig {
        &self.cfg
    }

    pub fn config_mut(&mut self) -> &mut CodecConfig {
        &mut self.cfg
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn ledger(&self) -> &SlotLedger {
        &self.ledger
    }

    pub fn store(&self) -> Option<&CodebookStore> {
        self.state.as_ref().map(|s| &s.0)
    }

    pub fn encoder(&self) -> Option<&CodecEncoder> {
        self.state.as_ref().map(|s| &s.1)
    }

    pub fn codes(&self) -> Option<&CodeMatrix> {
        self.state.as_ref().map(|s| &s.2)
    }

    /// Server-side reconstruction of the current compressed table.
    pub fn table(&self) -> Option<Result<Matrix>> {
        self.state.as_ref().map(|(s, _, c)| reconstruct_table(s, c))
    }

    /// Epoch-1 full deployment.
    pub fn deploy(&mut self, target: &Matrix) -> Result<RetrainOutcome> {
        if self.state.is_some() {
            return Err(Error::invalid("server already deployed"));
        }
        let out = initial_deploy(target, &self.cfg)?;
        self.commit(&out);
        Ok(out)
    }

    /// Plans `beta` slots with the server's strategy, retrains and commits.
    pub fn update(&mut self, target: &Matrix, beta: usize) -> Result<RetrainOutcome> {
        let Some((store, encoder, _)) = self.state.as_ref() else {
            return Err(Error::invalid("update before deployment"));
        };
        let beta = if self.strategy == Strategy::Full { self.cfg.nk() } else { beta };
        let slots = plan_slots(&self.ledger, self.strategy, beta)?;
        let epoch = self.ledger.current_epoch() + 1;
        let out = retrain_update(store, encoder, target, &slots, &self.cfg, epoch, self.strategy)?;
        self.commit(&out);
        Ok(out)
    }

    fn commit(&mut self, out: &RetrainOutcome) {
        self.ledger.commit(&out.delta.slots, out.delta.epoch);
        self.state = Some((out.store.clone(), out.encoder.clone(), out.codes.clone()));
    }
}

/// Device-side state: only what arrived over the wire.
#[derive(Clone, Debug)]
pub struct Device {
    strategy: Strategy,
    store: CodebookStore,
    ledger: SlotLedger,
    table: Option<Matrix>,
}

impl Device {
    pub fn new(n: usize, k: usize, d: usize, strategy: Strategy) -> Self {
        Self {
            strategy,
            store: CodebookStore::zeros(n, k, d),
            ledger: SlotLedger::empty(n * k),
            table: None,
        }
    }

    pub fn store(&self) -> &CodebookStore {
        &self.store
    }

    pub fn ledger(&self) -> &SlotLedger {
        &self.ledger
    }

    pub fn table(&self) -> Option<&Matrix> {
        self.table.as_ref()
    }

    /// Applies `delta` atomically: on error nothing changes.
    pub fn apply(&mut self, delta: &UpdateDelta) -> Result<&Matrix> {
        let applied = apply_delta(&self.store, &self.ledger, delta, self.strategy)?;
        self.store = applied.store;
        self.ledger = applied.ledger;
        Ok(self.table.insert(applied.table))
    }
}
