//! Builds an event stream, validates it, slices it and round-trips it through
//! the binary and CSV formats.

use evsynth::event::{load_csv, load_stream, save_csv, save_stream, Event, EventStream, Polarity, PolarityMode};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let events = (0..10u64)
        .map(|i| {
            let p = if i % 3 == 0 { Polarity::Negative } else { Polarity::Positive };
            Event::new((i % 4) as u16, (i / 4) as u16, 100 * i, p)
        })
        .collect();
    let stream = EventStream::with_events(4, 4, PolarityMode::Signed, events);
    println!("{} events, time range {:?}, valid: {}", stream.len(), stream.time_range(), stream.validate().is_ok());

    let window = stream.slice_by_time(200, 500)?;
    println!("[200, 500) us holds {} events", window.len());
    let head = stream.slice_by_count(0, 3)?;
    println!("first three timestamps: {:?}", head.events.iter().map(|e| e.t).collect::<Vec<_>>());

    let mut broken = stream.clone();
    broken.events.swap(1, 2);
    broken.events[5].x = 9;
    for v in broken.validate().violations {
        println!("violation: {v}");
    }

    let dir = tempfile::tempdir()?;
    let bin = dir.path().join("stream.evs");
    let csv = dir.path().join("stream.csv");
    save_stream(&bin, &stream)?;
    save_csv(&csv, &stream)?;
    assert_eq!(load_stream(&bin)?, stream);
    assert_eq!(load_csv(&csv, 4, 4, PolarityMode::Signed)?, stream);
    let size = std::fs::metadata(&bin)?.len();
    println!("binary file: {size} bytes (16-byte header + 16 bytes per event)");
    Ok(())
}
