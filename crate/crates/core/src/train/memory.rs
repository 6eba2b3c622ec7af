use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MemoryCategory {
    Parameters,
    Gradients,
    Moments,
    Activations,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Allocation {
    pub category: MemoryCategory,
    /// Layer owning the tensor, if any.
    pub layer: Option<usize>,
    pub bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemorySample {
    pub layer: usize,
    pub epoch: usize,
    pub bytes: usize,
}

/// Analytic byte accounting of tracked tensors.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MemoryLedger {
    pub current_bytes: usize,
    pub peak_bytes: usize,
    pub samples: Vec<MemorySample>,
    /// Largest number of layers whose gradients or moments were live at once.
    pub max_layers_with_optimizer_state: usize,
    #[serde(skip)]
    live: BTreeMap<String, Allocation>,
}

impl MemoryLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records an allocation under `key`; re-allocating a live key replaces it.
    pub fn allocate(&mut self, key: impl Into<String>, alloc: Allocation) {
        let key = key.into();
        if let Some(old) = self.live.insert(key, alloc) {
            self.current_bytes -= old.bytes;
        }
        self.current_bytes += alloc.bytes;
        self.peak_bytes = self.peak_bytes.max(self.current_bytes);
        if matches!(alloc.category, MemoryCategory::Gradients | MemoryCategory::Moments) {
            let layers = self.optimizer_layers();
            self.max_layers_with_optimizer_state = self.max_layers_with_optimizer_state.max(layers);
        }
    }

    pub fn release(&mut self, key: &str) -> Result<()> {
        let alloc = self
            .live
            .remove(key)
            .ok_or_else(|| Error::UntrackedRelease(key.to_string()))?;
        self.current_bytes -= alloc.bytes;
        Ok(())
    }

    /// Releases `key` if it is live.
    pub fn release_if_live(&mut self, key: &str) {
        if let Some(alloc) = self.live.remove(key) {
            self.current_bytes -= alloc.bytes;
        }
    }

    pub fn is_live(&self, key: &str) -> bool {
        self.live.contains_key(key)
    }

    pub fn sample(&mut self, layer: usize, epoch: usize) {
        self.samples.push(MemorySample {
            layer,
            epoch,
            bytes: self.current_bytes,
        });
    }

    pub fn live_bytes(&self, category: MemoryCategory) -> usize {
        self.live.values().filter(|a| a.category == category).map(|a| a.bytes).sum()
    }

    fn optimizer_layers(&self) -> usize {
        let mut layers: Vec<Option<usize>> = self
            .live
            .values()
            .filter(|a| matches!(a.category, MemoryCategory::Gradients | MemoryCategory::Moments))
            .map(|a| a.layer)
            .collect();
        layers.sort_unstable();
        layers.dedup();
        layers.len()
    }
}

/// Applies one allocation (`Some`) or release (`None`) event.
pub fn account_memory(ledger: &mut MemoryLedger, key: &str, event: Option<Allocation>) -> Result<()> {
    match event {
        Some(alloc) => {
            ledger.allocate(key, alloc);
            Ok(())
        }
        None => ledger.release(key),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn act(bytes: usize) -> Option<Allocation> {
        Some(Allocation {
            category: MemoryCategory::Activations,
            layer: None,
            bytes,
        })
    }

    #[test]
    fn peak_and_current() {
        let mut l = MemoryLedger::new();
        account_memory(&mut l, "a", act(100)).unwrap();
        account_memory(&mut l, "b", act(50)).unwrap();
        account_memory(&mut l, "a", None).unwrap();
        assert_eq!((l.peak_bytes, l.current_bytes), (150, 50));
        assert!(matches!(account_memory(&mut l, "a", None), Err(Error::UntrackedRelease(_))));
    }

    #[test]
    fn optimizer_layer_count() {
        let mut l = MemoryLedger::new();
        let opt = |layer| Allocation {
            category: MemoryCategory::Moments,
            layer: Some(layer),
            bytes: 8,
        };
        l.allocate("m0", opt(0));
        l.release("m0").unwrap();
        l.allocate("m1", opt(1));
        assert_eq!(l.max_layers_with_optimizer_state, 1);
        l.allocate("m2", opt(2));
        assert_eq!(l.max_layers_with_optimizer_state, 2);
    }
}
