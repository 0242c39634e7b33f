use gvss_core::beam::debounce_trace;
use gvss_core::BeamStatus::{self, Clear, Obstructed};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// Reference fold: at each index, accept a new state when the last `n`
/// readings (window ending here) all agree and differ from the accepted one.
fn window_fold(n: usize, seq: &[BeamStatus]) -> Vec<(usize, BeamStatus)> {
    let mut accepted = Clear;
    let mut out = Vec::new();
    for i in 0..seq.len() {
        if i + 1 < n {
            continue;
        }
        let window = &seq[i + 1 - n..=i];
        if window.iter().all(|&s| s == window[0]) && window[0] != accepted {
            accepted = window[0];
            out.push((i, accepted));
        }
    }
    out
}

fn random_sequence(rng: &mut StdRng, len: usize) -> Vec<BeamStatus> {
    // bias toward runs so transitions actually happen at larger counts
    let stickiness: f64 = rng.random_range(0.0..0.95);
    let mut cur = Clear;
    (0..len)
        .map(|_| {
            if !rng.random_bool(stickiness) {
                cur = if rng.random_bool(0.5) { Clear } else { Obstructed };
            }
            cur
        })
        .collect()
}

#[test]
fn hand_traced_examples() {
    assert_eq!(window_fold(2, &[Clear, Clear, Obstructed, Obstructed]), vec![(3, Obstructed)]);
    assert!(window_fold(2, &[Clear, Obstructed, Clear, Obstructed, Clear]).is_empty());
}

#[test]
fn matches_window_fold_on_random_sequences() {
    let mut rng = StdRng::seed_from_u64(0x6755_5353);
    let mut mismatches = 0;
    for _ in 0..300 {
        let len = rng.random_range(0..=10_000);
        let n = rng.random_range(1..=6);
        let seq = random_sequence(&mut rng, len);
        if debounce_trace(n as u32, &seq).unwrap() != window_fold(n, &seq) {
            mismatches += 1;
        }
    }
    assert_eq!(mismatches, 0);
}

proptest! {
    #[test]
    fn transitions_alternate(n in 1u32..5, seq in proptest::collection::vec(any::<bool>(), 0..500)) {
        let seq: Vec<BeamStatus> = seq.into_iter().map(|b| if b { Obstructed } else { Clear }).collect();
        let trace = debounce_trace(n, &seq).unwrap();
        let mut expected = Obstructed;
        for (_, state) in trace {
            prop_assert_eq!(state, expected);
            expected = if state == Obstructed { Clear } else { Obstructed };
        }
    }
}
