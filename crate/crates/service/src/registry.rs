//! In-memory dataset registry shared by request handlers.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use sha2::{Digest, Sha256};

use taskvis_core::data::Dataset;

#[derive(Debug, Default)]
pub struct Registry {
    datasets: RwLock<HashMap<String, Arc<Dataset>>>,
    counter: AtomicU64,
}

fn content_prefix(bytes: &[u8]) -> String {
    Sha256::digest(bytes)[..6].iter().map(|b| format!("{b:02x}")).collect()
}

impl Registry {
    pub fn new() -> Registry {
        Registry::default()
    }

    /// Register `dataset`, uploaded as `source`. Ids are a content hash
    /// prefix plus a counter, so identical uploads get distinct ids.
    pub fn insert(&self, dataset: Dataset, source: &[u8]) -> (String, Arc<Dataset>) {
        let n = self.counter.fetch_add(1, Ordering::Relaxed) + 1;
        let id = format!("{}-{n}", content_prefix(source));
        let dataset = Arc::new(dataset.with_id(id.clone()));
        self.datasets.write().unwrap().insert(id.clone(), dataset.clone());
        (id, dataset)
    }

    pub fn get(&self, id: &str) -> Option<Arc<Dataset>> {
        self.datasets.read().unwrap().get(id).cloned()
    }

    /// Replace a dataset with `f` applied to it. `None` if the id is unknown.
    pub fn update<E>(&self, id: &str, f: impl FnOnce(&Dataset) -> Result<Dataset, E>) -> Option<Result<Arc<Dataset>, E>> {
        let mut map = self.datasets.write().unwrap();
        let current = map.get(id)?;
        Some(f(current).map(|d| {
            let d = Arc::new(d);
            map.insert(id.to_string(), d.clone());
            d
        }))
    }

    pub fn len(&self) -> usize {
        self.datasets.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
