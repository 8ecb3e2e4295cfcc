use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, RwLock};
use std::time::Duration;

use crossbeam_channel::{bounded, Receiver, SendTimeoutError, Sender};

use crate::Params;

/// A fixed-length trajectory segment produced by one actor.
#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    pub task_id: usize,
    pub actor_id: usize,
    /// Version of the snapshot that generated the actions.
    pub params_version: u64,
    /// `n + 1` observations; the last one is the bootstrap state.
    pub observations: Vec<Vec<f64>>,
    pub actions: Vec<usize>,
    /// Transformed rewards.
    pub rewards: Vec<f64>,
    pub behavior_logp: Vec<f64>,
    /// `gamma` per step, 0 where the episode terminated.
    pub discounts: Vec<f64>,
    /// Undiscounted untransformed returns of episodes that ended inside this rollout.
    pub episode_returns: Vec<f64>,
}

impl Rollout {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

/// Holds the most recent parameter snapshot. Snapshots are immutable once
/// published, so readers never observe a partial update.
#[derive(Debug)]
pub struct SnapshotCell {
    latest: RwLock<Arc<Params>>,
}

impl SnapshotCell {
    pub fn new(params: Params) -> Self {
        Self {
            latest: RwLock::new(Arc::new(params)),
        }
    }

    pub fn latest(&self) -> Arc<Params> {
        self.latest.read().expect("snapshot lock poisoned").clone()
    }

    pub fn publish(&self, params: Params) {
        *self.latest.write().expect("snapshot lock poisoned") = Arc::new(params);
    }
}

/// Bounded FIFO between many actors and one learner. Producers block while
/// the queue is full; nothing is dropped.
#[derive(Debug)]
pub struct RolloutQueue {
    tx: Sender<Rollout>,
    rx: Receiver<Rollout>,
    capacity: usize,
    closed: AtomicBool,
    enqueued: AtomicU64,
}

/// Why a push did not go through. The rollout is handed back.
#[derive(Debug)]
pub enum PushError {
    Closed(Rollout),
    Full(Rollout),
}

const POLL: Duration = Duration::from_millis(5);

impl RolloutQueue {
    pub fn new(capacity: usize) -> Self {
        let capacity = capacity.max(1);
        let (tx, rx) = bounded(capacity);
        Self {
            tx,
            rx,
            capacity,
            closed: AtomicBool::new(false),
            enqueued: AtomicU64::new(0),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.rx.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rx.is_empty()
    }

    pub fn enqueued(&self) -> u64 {
        self.enqueued.load(Ordering::SeqCst)
    }

    pub fn close(&self) {
        self.closed.store(true, Ordering::SeqCst);
    }

    pub fn is_closed(&self) -> bool {
        self.closed.load(Ordering::SeqCst)
    }

    /// Blocks until there is room or the queue is closed.
    pub fn push(&self, mut rollout: Rollout) -> Result<(), PushError> {
        loop {
            if self.is_closed() {
                return Err(PushError::Closed(rollout));
            }
            match self.tx.send_timeout(rollout, POLL) {
                Ok(()) => {
                    self.enqueued.fetch_add(1, Ordering::SeqCst);
                    return Ok(());
                }
                Err(SendTimeoutError::Timeout(r)) | Err(SendTimeoutError::Disconnected(r)) => {
                    rollout = r
                }
            }
        }
    }

    pub fn try_push(&self, rollout: Rollout) -> Result<(), PushError> {
        if self.is_closed() {
            return Err(PushError::Closed(rollout));
        }
        match self.tx.try_send(rollout) {
            Ok(()) => {
                self.enqueued.fetch_add(1, Ordering::SeqCst);
                Ok(())
            }
            Err(e) => Err(PushError::Full(e.into_inner())),
        }
    }

    pub fn try_pop(&self) -> Option<Rollout> {
        self.rx.try_recv().ok()
    }

    pub fn pop_timeout(&self, timeout: Duration) -> Option<Rollout> {
        self.rx.recv_timeout(timeout).ok()
    }

    /// Removes everything still queued.
    pub fn drain(&self) -> Vec<Rollout> {
        self.rx.try_iter().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::thread;

    fn rollout(actor_id: usize, seq: u64) -> Rollout {
        Rollout {
            task_id: 0,
            actor_id,
            params_version: seq,
            observations: vec![vec![0.0]],
            actions: vec![],
            rewards: vec![],
            behavior_logp: vec![],
            discounts: vec![],
            episode_returns: vec![],
        }
    }

    #[test]
    fn fifo_and_capacity() {
        let q = RolloutQueue::new(2);
        q.try_push(rollout(0, 1)).unwrap();
        q.try_push(rollout(0, 2)).unwrap();
        assert!(matches!(q.try_push(rollout(0, 3)), Err(PushError::Full(_))));
        assert_eq!(q.len(), 2);
        assert_eq!(q.try_pop().unwrap().params_version, 1);
        assert_eq!(q.try_pop().unwrap().params_version, 2);
        assert!(q.try_pop().is_none());
        assert_eq!(q.enqueued(), 2);
    }

    #[test]
    fn closed_queue_rejects_and_unblocks_producers() {
        let q = Arc::new(RolloutQueue::new(1));
        q.push(rollout(0, 0)).unwrap();
        let producer = {
            let q = q.clone();
            thread::spawn(move || q.push(rollout(0, 1)))
        };
        thread::sleep(Duration::from_millis(20));
        q.close();
        assert!(matches!(producer.join().unwrap(), Err(PushError::Closed(_))));
        assert_eq!(q.drain().len(), 1);
    }

    #[test]
    fn many_producers_deliver_exactly_once_in_per_producer_order() {
        let q = Arc::new(RolloutQueue::new(3));
        let producers: Vec<_> = (0..4)
            .map(|id| {
                let q = q.clone();
                thread::spawn(move || {
                    for seq in 0..50 {
                        q.push(rollout(id, seq)).unwrap();
                    }
                })
            })
            .collect();
        let mut seen = vec![Vec::new(); 4];
        while seen.iter().map(Vec::len).sum::<usize>() < 200 {
            if let Some(r) = q.pop_timeout(Duration::from_secs(5)) {
                seen[r.actor_id].push(r.params_version);
            }
        }
        for p in producers {
            p.join().unwrap();
        }
        for s in seen {
            assert_eq!(s, (0..50).collect::<Vec<_>>());
        }
        assert!(q.is_empty());
        assert_eq!(q.enqueued(), 200);
    }

    #[test]
    fn snapshots_are_swapped_whole() {
        use crate::approximator::Architecture;
        let arch = Architecture {
            obs_dim: 2,
            hidden: 2,
            actions: 4,
            heads: 1,
        };
        let cell = SnapshotCell::new(Params::zeros(arch));
        let old = cell.latest();
        let mut next = Params::zeros(arch);
        next.version = 7;
        cell.publish(next);
        assert_eq!(old.version, 0);
        assert_eq!(cell.latest().version, 7);
    }
}
