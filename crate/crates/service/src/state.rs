use std::sync::{Arc, OnceLock};

use enrollcast::FittedHistory;

/// Fitted history shared read-only by every handler. Empty while loading.
#[derive(Debug, Clone, Default)]
pub struct ServiceState {
    history: Arc<OnceLock<Arc<FittedHistory>>>,
}

impl ServiceState {
    pub fn loading() -> Self {
        Self::default()
    }

    pub fn ready(history: FittedHistory) -> Self {
        let state = Self::loading();
        state.install(history);
        state
    }

    /// Publishes the history. Only the first call has an effect.
    pub fn install(&self, history: FittedHistory) -> bool {
        self.history.set(Arc::new(history)).is_ok()
    }

    pub fn history(&self) -> Option<Arc<FittedHistory>> {
        self.history.get().cloned()
    }
}
