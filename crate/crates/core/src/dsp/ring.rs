use thiserror::Error;

use super::{Segment, HOP_LEN, WINDOW_LEN};

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum PopError {
    /// Fewer than `needed` samples have been written so far.
    #[error("window not complete: {written} of {needed} samples written")]
    NotReady { written: u64, needed: u64 },
    /// The window's oldest sample was overwritten before it was read.
    #[error("window starting at sample {start} was overwritten (oldest kept: {oldest})")]
    DataLost { start: u64, oldest: u64 },
}

/// Anything segments can be popped from: the single-threaded [`RingBuffer`]
/// and the consumer half of [`super::spsc`].
pub trait WindowSource {
    fn write_count(&self) -> u64;
    fn pop_segment(&self, next_index: u64) -> Result<Segment, PopError>;
}

/// Fixed-capacity sample FIFO that overwrites the oldest samples on overflow.
#[derive(Debug, Clone)]
pub struct RingBuffer {
    buf: Vec<f64>,
    write_count: u64,
}

impl RingBuffer {
    /// # Panics
    /// If `capacity` is zero.
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "ring capacity must be positive");
        Self {
            buf: vec![0.0; capacity],
            write_count: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.buf.len()
    }

    /// Total samples ever written.
    pub fn write_count(&self) -> u64 {
        self.write_count
    }

    /// Number of samples currently held.
    pub fn len(&self) -> usize {
        self.write_count.min(self.buf.len() as u64) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.write_count == 0
    }

    pub fn write(&mut self, chunk: &[f64]) {
        let cap = self.buf.len();
        // only the tail of an oversized chunk can survive
        let skip = chunk.len().saturating_sub(cap);
        let start_count = self.write_count + skip as u64;
        let mut pos = (start_count % cap as u64) as usize;
        let mut rest = &chunk[skip..];
        while !rest.is_empty() {
            let n = rest.len().min(cap - pos);
            self.buf[pos..pos + n].copy_from_slice(&rest[..n]);
            rest = &rest[n..];
            pos = (pos + n) % cap;
        }
        self.write_count += chunk.len() as u64;
    }

    /// Index of the oldest sample still held.
    pub fn oldest(&self) -> u64 {
        self.write_count.saturating_sub(self.buf.len() as u64)
    }

    /// Copies stream samples `[start, start + len)` out of the buffer.
    pub fn read_range(&self, start: u64, len: usize) -> Result<Vec<f64>, PopError> {
        let end = start + len as u64;
        if end > self.write_count {
            return Err(PopError::NotReady {
                written: self.write_count,
                needed: end,
            });
        }
        if start < self.oldest() {
            return Err(PopError::DataLost {
                start,
                oldest: self.oldest(),
            });
        }
        let cap = self.buf.len();
        let first = (start % cap as u64) as usize;
        let mut out = Vec::with_capacity(len);
        let head = len.min(cap - first);
        out.extend_from_slice(&self.buf[first..first + head]);
        out.extend_from_slice(&self.buf[..len - head]);
        Ok(out)
    }

    /// Current contents in arrival order.
    pub fn contents(&self) -> Vec<f64> {
        self.read_range(self.oldest(), self.len())
            .expect("held range is always readable")
    }
}

/// Stream sample range `[start, end)` covered by window `index`.
pub fn window_range(index: u64) -> (u64, u64) {
    let start = index * HOP_LEN as u64;
    (start, start + WINDOW_LEN as u64)
}

impl WindowSource for RingBuffer {
    fn write_count(&self) -> u64 {
        self.write_count
    }

    fn pop_segment(&self, next_index: u64) -> Result<Segment, PopError> {
        let (start, _) = window_range(next_index);
        let samples = self.read_range(start, WINDOW_LEN)?;
        Ok(Segment::new(next_index, samples).expect("ring holds validated samples"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ramp(from: u64, n: usize) -> Vec<f64> {
        (0..n as u64).map(|i| ((from + i) % 1000) as f64 / 1000.0).collect()
    }

    #[test]
    fn partial_fill_keeps_order() {
        let mut r = RingBuffer::new(16_000);
        let data = ramp(0, 4000);
        r.write(&data);
        assert_eq!(r.contents(), data);
        assert_eq!(r.write_count(), 4000);
    }

    #[test]
    fn overflow_drops_oldest() {
        let mut r = RingBuffer::new(16_000);
        let data: Vec<f64> = (1..=20_000).map(|i| i as f64 / 20_000.0).collect();
        r.write(&data[..12_000]);
        r.write(&data[12_000..]);
        // samples 4001..=20000, one-based
        assert_eq!(r.contents(), data[4000..].to_vec());
        let mut big = RingBuffer::new(16_000);
        big.write(&data);
        assert_eq!(big.contents(), data[4000..].to_vec());
    }

    #[test]
    fn interleaved_writes_match_single_write() {
        let data = ramp(0, 4512);
        let mut a = RingBuffer::new(4000);
        a.write(&data[..1000]);
        a.write(&data[1000..4000]);
        a.write(&data[4000..]);
        let mut b = RingBuffer::new(4000);
        b.write(&data);
        assert_eq!(a.contents(), b.contents());
        assert_eq!(a.contents(), data[512..].to_vec());
    }

    #[test]
    fn pop_not_ready_one_sample_short() {
        let mut r = RingBuffer::new(32_000);
        r.write(&vec![0.0; 14_999]);
        assert_eq!(
            r.pop_segment(0),
            Err(PopError::NotReady {
                written: 14_999,
                needed: 15_000
            })
        );
    }

    #[test]
    fn pop_second_window() {
        let mut r = RingBuffer::new(32_000);
        let data = ramp(0, 19_000);
        r.write(&data);
        let seg = r.pop_segment(1).unwrap();
        assert_eq!(seg.index(), 1);
        assert_eq!(seg.start_time_s(), 1.0);
        assert_eq!(seg.samples(), &data[4000..19_000]);
    }

    #[test]
    fn pop_evicted_window_is_data_lost() {
        let mut r = RingBuffer::new(16_000);
        r.write(&vec![0.0; 40_000]);
        assert_eq!(
            r.pop_segment(0),
            Err(PopError::DataLost {
                start: 0,
                oldest: 24_000
            })
        );
    }

    #[test]
    fn consecutive_windows_overlap_by_11000() {
        let (a0, a1) = window_range(4);
        let (b0, _) = window_range(5);
        assert_eq!(a1 - b0, 11_000);
        assert_eq!(a1 - a0, WINDOW_LEN as u64);
    }

    proptest! {
        #[test]
        fn reads_never_exceed_capacity(cap in 1usize..300, sizes in proptest::collection::vec(0usize..500, 0..20)) {
            let mut r = RingBuffer::new(cap);
            let mut total = 0u64;
            for s in sizes {
                r.write(&ramp(total, s));
                total += s as u64;
                prop_assert!(r.contents().len() <= cap);
                prop_assert_eq!(r.write_count(), total);
            }
        }
    }
}
