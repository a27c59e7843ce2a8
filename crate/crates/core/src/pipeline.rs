//! Tracer and forest builder running concurrently over a bounded, ordered
//! channel.

use std::sync::mpsc;
use std::thread;

use thiserror::Error;

use crate::cfg::DagCfg;
use crate::ksf::{KSlabForest, KsfBuilder, KsfError, KsfOptions};
use crate::numbering::EdgeValues;
use crate::tracer::{replay_into, Invocation, ReplayOptions, StreamItem, TraceError};
use crate::word::PathWord;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Ksf(#[from] KsfError),
}

/// Replays `trace` on one thread while another builds the k-SF from the
/// emitted items. `capacity` bounds the number of items in flight.
pub fn trace_and_build<W: PathWord>(
    dag: &DagCfg,
    ev: &EdgeValues<W>,
    trace: &[Invocation],
    replay: ReplayOptions,
    k: usize,
    opts: KsfOptions,
    capacity: usize,
) -> Result<KSlabForest<W>, PipelineError> {
    let mut builder = KsfBuilder::with_options(k, opts)?;
    let (tx, rx) = mpsc::sync_channel::<StreamItem<W>>(capacity.max(1));
    thread::scope(|scope| {
        let producer = scope.spawn(move || {
            // A closed channel means the consumer failed; its error wins.
            replay_into(dag, ev, trace, replay, |item| {
                let _ = tx.send(item);
            })
        });
        let mut failed = None;
        for item in rx {
            if let Err(e) = builder.process(&item) {
                failed = Some(e);
                break;
            }
        }
        let traced = producer.join().expect("tracer thread panicked");
        if let Some(e) = failed {
            return Err(PipelineError::from(e));
        }
        traced.map_err(PipelineError::from)
    })?;
    Ok(builder.finish())
}
