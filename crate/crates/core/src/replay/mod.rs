//! Replay buffer family: uniform n-step, prioritized (sum tree), sequence
//! replay with periodically stored recurrent state, and a frame-dedup store.
//!
//! Concurrency: a buffer is single-writer (the appender role) and
//! multi-reader; in asynchronous mode the coordinator wraps it in a
//! readers-writer lock, in synchronous mode it is single-context.

mod frame;
mod ring;
mod sequence;
mod sumtree;
mod transition;

pub use frame::FrameStore;
pub use ring::{compute_n_step_return, NStepReturn, ReplayRing, RingLeaves};
pub use sequence::{PrioritySegment, SequenceBatch, SequenceReplay, SequenceSpec};
pub use sumtree::SumTree;
pub use transition::{ActionBatch, NStepReplay, PrioritySpec, ReplayKey, TransitionBatch};
