use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which codebook rows an update replaces.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Replace every row.
    Full,
    /// LIFO: replace the most recently inserted rows.
    Stack,
    /// FIFO: replace the oldest rows.
    Queue,
}

impl Strategy {
    pub fn wire_code(self) -> u8 {
        match self {
            Strategy::Full => 0,
            Strategy::Stack => 1,
            Strategy::Queue => 2,
        }
    }

    pub fn from_wire(code: u8) -> Option<Self> {
        match code {
            0 => Some(Strategy::Full),
            1 => Some(Strategy::Stack),
            2 => Some(Strategy::Queue),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Full => "full",
            Strategy::Stack => "stack",
            Strategy::Queue => "queue",
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "full" => Ok(Strategy::Full),
            "stack" => Ok(Strategy::Stack),
            "queue" => Ok(Strategy::Queue),
            other => Err(Error::invalid(format!("unknown strategy {other:?}"))),
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotRecord {
    /// Epoch of the frame that last wrote this row.
    pub epoch: u32,
    /// Global insertion counter; larger means more recent.
    pub seq: u64,
}

/// Per-row insertion bookkeeping shared by server and device.
///
/// Rows are ordered by insertion sequence number. A frame writes its rows in
/// slot-list order, each taking the next sequence number, so the stack top is
/// the highest sequence and the queue front the lowest. After deployment the
/// sequence of row `r` is `r`, which puts the stack top at the highest row
/// indices and the queue front at row 0.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotLedger {
    records: Vec<SlotRecord>,
    current_epoch: u32,
    next_seq: u64,
}

impl SlotLedger {
    /// State before anything is deployed (epoch 0).
    pub fn empty(nk: usize) -> Self {
        Self {
            records: vec![SlotRecord { epoch: 0, seq: 0 }; nk],
            current_epoch: 0,
            next_seq: 0,
        }
    }

    /// State right after deployment: every row inserted at epoch 1, row `r` with sequence `r`.
    pub fn fresh(nk: usize) -> Self {
        let mut l = Self::empty(nk);
        let all: Vec<usize> = (0..nk).collect();
        l.commit(&all, 1);
        l
    }

    pub fn nk(&self) -> usize {
        self.records.len()
    }

    pub fn current_epoch(&self) -> u32 {
        self.current_epoch
    }

    pub fn records(&self) -> &[SlotRecord] {
        &self.records
    }

    /// Rows still holding values first inserted at `epoch`.
    pub fn count_epoch(&self, epoch: u32) -> usize {
        self.records.iter().filter(|r| r.epoch == epoch).count()
    }

    /// Row indices sorted oldest-first.
    pub fn by_age(&self) -> Vec<usize> {
        let mut rows: Vec<usize> = (0..self.records.len()).collect();
        rows.sort_by_key(|&r| (self.records[r].seq, r));
        rows
    }

    /// Records that `slots` were written at `epoch`, in list order.
    pub fn commit(&mut self, slots: &[usize], epoch: u32) {
        for &r in slots {
            self.records[r] = SlotRecord {
                epoch,
                seq: self.next_seq,
            };
            self.next_seq += 1;
        }
        self.current_epoch = epoch;
    }
}

/// Rows the next update of `beta` rows should replace, oldest-first.
///
/// Stack takes the `beta` most recent rows, queue the `beta` oldest, full takes all.
pub fn plan_slots(ledger: &SlotLedger, strategy: Strategy, beta: usize) -> Result<Vec<usize>> {
    let nk = ledger.nk();
    if beta == 0 || beta > nk {
        return Err(Error::invalid(format!("beta must be in [1, {nk}], got {beta}")));
    }
    let order = ledger.by_age();
    Ok(match strategy {
        Strategy::Full => order,
        Strategy::Stack => order[nk - beta..].to_vec(),
        Strategy::Queue => order[..beta].to_vec(),
    })
}

/// `β = max(1, ⌊nk / r⌋)`, capped at `nk`.
pub fn beta_from_ratio(n: usize, k: usize, r: u64) -> usize {
    let nk = n * k;
    ((nk as u64 / r.max(1)) as usize).clamp(1, nk.max(1))
}

/// Element-count ratio of a full compressed model to one update:
/// `(nkd + n|V|) / (βd + n|V|)`.
pub fn update_cr(n: usize, k: usize, d: usize, vocab: usize, beta: usize) -> f64 {
    let (n, k, d, v, b) = (n as f64, k as f64, d as f64, vocab as f64, beta as f64);
    (n * k * d + n * v) / (b * d + n * v)
}

/// Ratio of the raw embedding table to one update: `1 / (β/|V| + n/d)`.
pub fn end_to_end_cr(vocab: usize, d: usize, n: usize, beta: usize) -> f64 {
    1.0 / (beta as f64 / vocab as f64 + n as f64 / d as f64)
}
