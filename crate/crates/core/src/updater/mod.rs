//! Stack- and queue-based partial codebook updates.
//!
//! The server retrains only `β` codebook rows per round (the rest stay
//! frozen), then ships those rows with the complete new code matrix. Both
//! ends keep a [`SlotLedger`] so they agree on which rows a delta replaces.

mod delta;
mod ledger;

pub use delta::{apply_delta, initial_deploy, retrain_update, AppliedDelta, Device, RetrainOutcome, Server, UpdateDelta};
pub use ledger::{beta_from_ratio, end_to_end_cr, plan_slots, update_cr, SlotLedger, SlotRecord, Strategy};
