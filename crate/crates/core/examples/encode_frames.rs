//! Encodes one stream three ways and writes the frames plus preview images.
//!
//! ```text
//! cargo run --example encode_frames -- [OUT_DIR]
//! ```

use evsynth::event::{Event, EventStream, Polarity, PolarityMode};
use evsynth::frame::{encode_fixed_count, encode_fixed_interval, encode_full, save_frame, EncoderConfig};
use rand::Rng;
use std::path::PathBuf;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("encode_frames_out"));
    std::fs::create_dir_all(&out)?;

    let mut rng = evsynth::rng::stream(3, evsynth::rng::Domain::Toy, 0);
    let mut t = 0;
    let events = (0..15_000)
        .map(|_| {
            t += rng.random_range(0..20u64);
            let p = if rng.random::<bool>() { Polarity::Positive } else { Polarity::Negative };
            Event::new(rng.random_range(0..64), rng.random_range(0..64), t, p)
        })
        .collect();
    let stream = EventStream::with_events(64, 64, PolarityMode::Signed, events);
    let cfg = EncoderConfig::default();

    let full = encode_full(&stream, &cfg);
    save_frame(out.join("full.ppm"), &full)?;
    save_frame(out.join("full_preview.ppm"), &full.preview())?;

    let by_count = encode_fixed_count(&stream, 7_500, &cfg)?;
    println!("15000 events at 7500 per frame: {} frames", by_count.len());
    for (i, f) in by_count.iter().enumerate() {
        save_frame(out.join(format!("count_{i}.ppm")), f)?;
    }

    let by_time = encode_fixed_interval(&stream, 20_000, &cfg)?;
    println!("{} us of events at 20 ms per frame: {} frames", t, by_time.len());
    for (i, f) in by_time.iter().enumerate() {
        println!("  window {i}: {:?}", f.source_window);
    }
    println!("frames written to {}", out.display());
    Ok(())
}
