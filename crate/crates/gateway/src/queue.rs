use std::collections::VecDeque;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Mutex;

/// Frames buffered per client before the oldest are dropped.
pub const QUEUE_DEPTH: usize = 64;

#[derive(Debug, Default)]
struct Inner {
    frames: VecDeque<String>,
    dropped: u64,
}

/// Bounded outgoing frame queue of one client, drop-oldest on overflow.
#[derive(Debug)]
pub struct ClientQueue {
    depth: usize,
    inner: Mutex<Inner>,
    closed: AtomicBool,
}

impl ClientQueue {
    /// # Panics
    /// If `depth` is zero.
    pub fn new(depth: usize) -> Self {
        assert!(depth > 0, "queue depth must be positive");
        Self {
            depth,
            inner: Mutex::new(Inner::default()),
            closed: AtomicBool::new(false),
        }
    }

    pub fn push(&self, frame: String) {
        let mut q = self.inner.lock().unwrap();
        if q.frames.len() == self.depth {
            q.frames.pop_front();
            q.dropped += 1;
        }
        q.frames.push_back(frame);
    }

    pub fn len(&self) -> usize {
        self.inner.lock().unwrap().frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Takes every queued frame. If frames were dropped since the last
    /// drain, the first one returned carries a `"dropped"` count.
    pub fn drain(&self) -> Vec<String> {
        let mut q = self.inner.lock().unwrap();
        let mut out: Vec<String> = q.frames.drain(..).collect();
        if let Some(first) = out.first_mut() {
            if q.dropped > 0 {
                *first = with_dropped(first, q.dropped);
                q.dropped = 0;
            }
        }
        out
    }

    pub fn close(&self) {
        self.closed.store(true, Ordering::SeqCst);
    }

    pub fn is_closed(&self) -> bool {
        self.closed.load(Ordering::SeqCst)
    }
}

/// Inserts `"dropped":n` as the second key of a frame object.
fn with_dropped(frame: &str, n: u64) -> String {
    match frame.find(',') {
        Some(i) if frame.starts_with('{') => format!("{},\"dropped\":{n}{}", &frame[..i], &frame[i..]),
        _ => frame.to_string(),
    }
}
