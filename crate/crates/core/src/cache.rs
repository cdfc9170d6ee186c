//! Build-once memo tables shared across threads.

use std::collections::HashMap;
use std::hash::Hash;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::Result;

type Slot<T> = Arc<OnceLock<Result<Arc<T>>>>;

/// Concurrent readers of a missing key block on a single builder; the outcome, success
/// or error, is stored once.
pub(crate) struct Memo<K, T> {
    slots: Mutex<HashMap<K, Slot<T>>>,
}

impl<K: Hash + Eq + Clone, T> Memo<K, T> {
    pub(crate) fn new() -> Self {
        Memo { slots: Mutex::new(HashMap::new()) }
    }

    pub(crate) fn get_or_build(&self, key: K, build: impl FnOnce() -> Result<T>) -> Result<Arc<T>> {
        let slot = {
            let mut map = self.slots.lock().expect("memo lock poisoned");
            map.entry(key).or_default().clone()
        };
        slot.get_or_init(|| build().map(Arc::new)).clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    #[test]
    fn builds_once_under_contention() {
        let memo: Memo<u32, u64> = Memo::new();
        let calls = AtomicUsize::new(0);
        std::thread::scope(|s| {
            for _ in 0..8 {
                s.spawn(|| {
                    let v = memo
                        .get_or_build(3, || {
                            calls.fetch_add(1, Ordering::SeqCst);
                            Ok(42)
                        })
                        .unwrap();
                    assert_eq!(*v, 42);
                });
            }
        });
        assert_eq!(calls.load(Ordering::SeqCst), 1);
    }
}
