//! Randomized write/read schedules against a flat-list oracle.

use proptest::prelude::*;
use pulsepipe::dsp::spsc;
use pulsepipe::dsp::{PopError, RingBuffer};

#[derive(Debug, Clone)]
enum Op {
    Write(usize),
    Read { back: usize, len: usize },
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        (0usize..300).prop_map(Op::Write),
        (0usize..400, 0usize..200).prop_map(|(back, len)| Op::Read { back, len }),
    ]
}

/// What reading `[start, start+len)` should give, from the whole history.
fn oracle(history: &[f64], cap: usize, start: u64, len: usize) -> Result<Vec<f64>, PopError> {
    let written = history.len() as u64;
    let end = start + len as u64;
    if end > written {
        return Err(PopError::NotReady { written, needed: end });
    }
    let oldest = written.saturating_sub(cap as u64);
    if start < oldest {
        return Err(PopError::DataLost { start, oldest });
    }
    Ok(history[start as usize..end as usize].to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn ring_matches_flat_list(cap in 1usize..256, ops in prop::collection::vec(op(), 1..40)) {
        let mut ring = RingBuffer::new(cap);
        let (mut tx, rx) = spsc::channel(cap);
        let mut history: Vec<f64> = Vec::new();
        for o in ops {
            match o {
                Op::Write(n) => {
                    let chunk: Vec<f64> = (0..n).map(|i| ((history.len() + i) % 997) as f64 / 997.0).collect();
                    ring.write(&chunk);
                    tx.write(&chunk);
                    history.extend(chunk);
                }
                Op::Read { back, len } => {
                    let start = (history.len() as u64).saturating_sub(back as u64);
                    let want = oracle(&history, cap, start, len);
                    prop_assert_eq!(ring.read_range(start, len), want.clone());
                    prop_assert_eq!(rx.read_range(start, len), want);
                }
            }
            prop_assert_eq!(ring.write_count(), history.len() as u64);
            let keep = history.len().saturating_sub(cap);
            prop_assert_eq!(ring.contents(), history[keep..].to_vec());
        }
    }
}
