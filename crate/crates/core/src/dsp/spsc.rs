//! Lock-free single-producer/single-consumer sample ring.
//!
//! The capture side never blocks: on overflow it overwrites the oldest
//! samples. The reader copies a window out and then checks, seqlock-style,
//! whether the writer claimed any of the slots it just read. If so the copy
//! is discarded and the read reports [`PopError::DataLost`].

use std::sync::atomic::{fence, AtomicU64, Ordering};
use std::sync::Arc;

use super::ring::{window_range, PopError, WindowSource};
use super::{Segment, WINDOW_LEN};

struct Shared {
    slots: Box<[AtomicU64]>,
    /// End of the range the writer is about to fill.
    claimed: AtomicU64,
    /// End of the range that is fully written.
    published: AtomicU64,
}

impl Shared {
    fn cap(&self) -> u64 {
        self.slots.len() as u64
    }
}

/// Writer half. Not `Clone`: there is exactly one producer.
pub struct Producer {
    shared: Arc<Shared>,
}

/// Reader half. Not `Clone`: there is exactly one consumer.
pub struct Consumer {
    shared: Arc<Shared>,
}

/// Creates a ring holding `capacity` samples.
///
/// # Panics
/// If `capacity` is zero.
pub fn channel(capacity: usize) -> (Producer, Consumer) {
    assert!(capacity > 0, "ring capacity must be positive");
    let slots = (0..capacity).map(|_| AtomicU64::new(0)).collect();
    let shared = Arc::new(Shared {
        slots,
        claimed: AtomicU64::new(0),
        published: AtomicU64::new(0),
    });
    (
        Producer {
            shared: shared.clone(),
        },
        Consumer { shared },
    )
}

impl Producer {
    pub fn write(&mut self, chunk: &[f64]) {
        let cap = self.shared.slots.len();
        for piece in chunk.chunks(cap) {
            self.write_piece(piece);
        }
    }

    fn write_piece(&mut self, piece: &[f64]) {
        let s = &*self.shared;
        let start = s.published.load(Ordering::Relaxed);
        let end = start + piece.len() as u64;
        s.claimed.store(end, Ordering::Relaxed);
        fence(Ordering::Release);
        for (i, v) in piece.iter().enumerate() {
            let slot = ((start + i as u64) % s.cap()) as usize;
            s.slots[slot].store(v.to_bits(), Ordering::Relaxed);
        }
        s.published.store(end, Ordering::Release);
    }

    pub fn write_count(&self) -> u64 {
        self.shared.published.load(Ordering::Relaxed)
    }
}

impl Consumer {
    pub fn capacity(&self) -> usize {
        self.shared.slots.len()
    }

    pub fn read_range(&self, start: u64, len: usize) -> Result<Vec<f64>, PopError> {
        let s = &*self.shared;
        let end = start + len as u64;
        let written = s.published.load(Ordering::Acquire);
        if end > written {
            return Err(PopError::NotReady {
                written,
                needed: end,
            });
        }
        let oldest = written.saturating_sub(s.cap());
        if start < oldest {
            return Err(PopError::DataLost { start, oldest });
        }
        let out: Vec<f64> = (start..end)
            .map(|i| f64::from_bits(s.slots[(i % s.cap()) as usize].load(Ordering::Relaxed)))
            .collect();
        fence(Ordering::Acquire);
        let claimed = s.claimed.load(Ordering::Relaxed);
        let oldest = claimed.saturating_sub(s.cap());
        if start < oldest {
            return Err(PopError::DataLost { start, oldest });
        }
        Ok(out)
    }
}

impl WindowSource for Consumer {
    fn write_count(&self) -> u64 {
        self.shared.published.load(Ordering::Acquire)
    }

    fn pop_segment(&self, next_index: u64) -> Result<Segment, PopError> {
        let (start, _) = window_range(next_index);
        let samples = self.read_range(start, WINDOW_LEN)?;
        Segment::new(next_index, samples).map_err(|_| PopError::DataLost {
            start,
            oldest: start,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::thread;

    #[test]
    fn single_thread_matches_plain_ring() {
        let (mut p, c) = channel(100);
        let data: Vec<f64> = (0..250).map(|i| i as f64 / 250.0).collect();
        p.write(&data[..70]);
        p.write(&data[70..]);
        assert_eq!(c.read_range(150, 100).unwrap(), data[150..].to_vec());
        assert!(matches!(
            c.read_range(149, 10),
            Err(PopError::DataLost { .. })
        ));
        assert!(matches!(
            c.read_range(200, 51),
            Err(PopError::NotReady { .. })
        ));
    }

    #[test]
    fn concurrent_reader_never_sees_torn_windows() {
        // each sample encodes its own stream index, so any successful read
        // must be a contiguous run
        const TOTAL: u64 = 400_000;
        let (mut p, c) = channel(2048);
        let writer = thread::spawn(move || {
            let mut next = 0u64;
            while next < TOTAL {
                let n = 1 + (next % 97);
                let chunk: Vec<f64> = (next..next + n).map(|i| i as f64).collect();
                p.write(&chunk);
                next += n;
            }
        });
        let mut ok = 0u64;
        let mut lost = 0u64;
        loop {
            let written = c.write_count();
            if written >= 512 {
                let start = written - 512;
                match c.read_range(start, 512) {
                    Ok(v) => {
                        for (k, x) in v.iter().enumerate() {
                            assert_eq!(*x, (start + k as u64) as f64);
                        }
                        ok += 1;
                    }
                    Err(PopError::DataLost { .. }) => lost += 1,
                    Err(PopError::NotReady { .. }) => unreachable!(),
                }
            }
            if written >= TOTAL {
                break;
            }
        }
        writer.join().unwrap();
        assert!(ok > 0, "reader made no progress (lost {lost})");
    }
}
