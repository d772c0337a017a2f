#![allow(dead_code)]

use evsynth::event::{Event, EventStream, Polarity, PolarityMode};
use proptest::prelude::*;
use rand::Rng;

/// Sorted, in-bounds stream from a seeded generator.
pub fn random_stream(seed: u64, max_len: usize, signed: bool) -> EventStream {
    let mut rng = evsynth::rng::stream(seed, evsynth::rng::Domain::Toy, 0);
    let (w, h) = (rng.random_range(1..12u16), rng.random_range(1..12u16));
    let len = rng.random_range(0..=max_len);
    let mut t = rng.random_range(0..1000u64);
    let events = (0..len)
        .map(|_| {
            t += rng.random_range(0..50u64);
            let p = if !signed {
                Polarity::None
            } else if rng.random::<bool>() {
                Polarity::Positive
            } else {
                Polarity::Negative
            };
            Event::new(rng.random_range(0..w), rng.random_range(0..h), t, p)
        })
        .collect();
    let mode = if signed { PolarityMode::Signed } else { PolarityMode::None };
    EventStream::with_events(w, h, mode, events)
}

pub fn arb_stream(max_len: usize) -> impl Strategy<Value = EventStream> {
    (any::<u64>(), any::<bool>()).prop_map(move |(seed, signed)| random_stream(seed, max_len, signed))
}

/// Independent dense counter: `[positive, negative, unsigned]` counts per pixel, row-major.
pub fn dense_counts(events: &[Event], w: usize, h: usize) -> Vec<[u32; 3]> {
    let mut grid = vec![[0u32; 3]; w * h];
    for y in 0..h {
        for x in 0..w {
            for e in events.iter().filter(|e| e.x as usize == x && e.y as usize == y) {
                let k = match e.polarity {
                    Polarity::Positive => 0,
                    Polarity::Negative => 1,
                    Polarity::None => 2,
                };
                grid[y * w + x][k] += 1;
            }
        }
    }
    grid
}

/// Expected signed-mode channel values for a window of events with cap 3.
pub fn oracle_frame(events: &[Event], w: usize, h: usize) -> Vec<f64> {
    let level = |c: u32| c.min(3) as f64 / 3.0;
    let counts = dense_counts(events, w, h);
    let n = w * h;
    let mut out = vec![0.0; 3 * n];
    for (i, [p, q, u]) in counts.into_iter().enumerate() {
        out[i] = level(p + u);
        out[n + i] = level(u);
        out[2 * n + i] = level(q + u);
    }
    out
}

/// Fixed-interval windows computed by scanning every event per window.
pub fn oracle_interval_windows(events: &[Event], dt: u64) -> Vec<Vec<Event>> {
    let (Some(first), Some(last)) = (events.first(), events.last()) else {
        return Vec::new();
    };
    let mut out = Vec::new();
    let mut start = first.t;
    while start <= last.t {
        out.push(events.iter().filter(|e| e.t >= start && e.t < start + dt).copied().collect());
        start += dt;
    }
    out
}
