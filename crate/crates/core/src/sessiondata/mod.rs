//! Event-log ingestion, sessionization, temporal slicing and the synthetic
//! drifting-session generator.

mod cache;
mod events;
mod prep;
mod synth;

pub use cache::{read_cache, write_cache, CACHE_MAGIC, CACHE_VERSION};
pub use events::{sessionize, Event, EventLog, RawSession};
pub use prep::{
    augment_split, filter_and_index, prepare, split_holdout, temporal_slices, Pair, Session,
    SessionDataset, SlicePlan, SlicedData, Vocab,
};
pub use synth::{synth_event_log, synth_generate, synth_sessions, SynthConfig};

/// Eight hours, the default session gap.
pub const DEFAULT_GAP_SECS: u64 = 8 * 3600;
