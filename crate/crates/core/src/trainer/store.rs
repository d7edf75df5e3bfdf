//! The global parameter store shared by all workers.

use std::sync::{Arc, Mutex, MutexGuard};

use serde::Serialize;

use crate::network::{AdamConfig, AdamState, Gradients, NetParams};

/// Why a submitted gradient was not applied.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rejected {
    /// Contained NaN or infinity; counted as skipped.
    NonFinite,
    /// The update cap was already reached.
    Closed,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct StoreCounts {
    pub version: u64,
    pub submitted: u64,
    pub skipped: u64,
    pub refused: u64,
}

struct Inner {
    params: Arc<NetParams<f32>>,
    adam: AdamState<f32>,
    counts: StoreCounts,
}

/// Current parameters, optimizer state and version counter behind one lock.
/// Snapshots are reference-counted copies, so readers never wait for an
/// Adam step longer than the pointer swap.
pub struct GlobalStore {
    inner: Mutex<Inner>,
    max_updates: Option<u64>,
}

impl GlobalStore {
    pub fn new(params: NetParams<f32>, adam: AdamConfig, max_updates: Option<u64>) -> Self {
        let adam = AdamState::new(params.len(), adam);
        GlobalStore { inner: Mutex::new(Inner { params: Arc::new(params), adam, counts: StoreCounts::default() }), max_updates }
    }

    fn lock(&self) -> MutexGuard<'_, Inner> {
        // a panicking worker cannot leave the store half-updated: the Adam
        // step writes into a fresh copy that is only swapped in on success
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn snapshot(&self) -> (Arc<NetParams<f32>>, u64) {
        let g = self.lock();
        (Arc::clone(&g.params), g.counts.version)
    }

    pub fn version(&self) -> u64 {
        self.lock().counts.version
    }

    pub fn counts(&self) -> StoreCounts {
        self.lock().counts
    }

    /// Whether the update cap has been reached.
    pub fn closed(&self) -> bool {
        self.max_updates.is_some_and(|m| self.version() >= m)
    }

    /// One serialized Adam step. Returns the new version.
    pub fn apply_gradients(&self, grads: &Gradients<f32>) -> Result<u64, Rejected> {
        let mut g = self.lock();
        g.counts.submitted += 1;
        if self.max_updates.is_some_and(|m| g.counts.version >= m) {
            g.counts.refused += 1;
            return Err(Rejected::Closed);
        }
        if grads.len() != g.params.len() || !grads.all_finite() {
            g.counts.skipped += 1;
            return Err(Rejected::NonFinite);
        }
        let mut next = NetParams::clone(&g.params);
        let Inner { adam, .. } = &mut *g;
        adam.step(&mut next, grads).expect("lengths checked");
        g.params = Arc::new(next);
        g.counts.version += 1;
        Ok(g.counts.version)
    }

    /// Records a submission whose gradient could not be computed.
    pub fn reject(&self) {
        let mut g = self.lock();
        g.counts.submitted += 1;
        g.counts.skipped += 1;
    }

    pub fn params(&self) -> NetParams<f32> {
        NetParams::clone(&self.lock().params)
    }

    pub fn adam_steps(&self) -> u64 {
        self.lock().adam.steps()
    }
}
