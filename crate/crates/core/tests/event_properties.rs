mod common;

use common::arb_stream;
use evsynth::event::{read_csv, read_stream, write_csv, write_stream, EventStream};
use proptest::prelude::*;

proptest! {
    #[test]
    fn slice_is_idempotent(s in arb_stream(200), a in 0u64..12_000, len in 0u64..6_000) {
        let once = s.slice_by_time(a, a + len).unwrap();
        prop_assert_eq!(once.slice_by_time(a, a + len).unwrap(), once);
    }

    #[test]
    fn partitions_reassemble_the_stream(s in arb_stream(200), cuts in proptest::collection::vec(0u64..12_000, 0..6)) {
        let Some((lo, hi)) = s.time_range() else { return Ok(()); };
        let mut bounds: Vec<u64> = cuts.into_iter().map(|c| lo + c % (hi - lo + 1)).collect();
        bounds.push(lo);
        bounds.push(hi + 1);
        bounds.sort_unstable();
        bounds.dedup();
        let mut joined = Vec::new();
        for w in bounds.windows(2) {
            joined.extend(s.slice_by_time(w[0], w[1]).unwrap().events);
        }
        prop_assert_eq!(joined, s.events.clone());
    }

    #[test]
    fn binary_round_trip(s in arb_stream(300)) {
        let mut buf = Vec::new();
        write_stream(&mut buf, &s).unwrap();
        prop_assert_eq!(buf.len(), 16 + 16 * s.len());
        prop_assert_eq!(read_stream(&buf[..]).unwrap(), s);
    }

    #[test]
    fn csv_round_trip(s in arb_stream(100)) {
        let mut buf = Vec::new();
        write_csv(&mut buf, &s).unwrap();
        let back = read_csv(&buf[..], s.width, s.height, s.polarity_mode).unwrap();
        prop_assert_eq!(back, s);
    }

    #[test]
    fn count_slices_cover_in_order(s in arb_stream(200), n in 1usize..40) {
        let mut joined = Vec::new();
        let mut start = 0;
        while start < s.len() {
            let take = n.min(s.len() - start);
            joined.extend(s.slice_by_count(start, take).unwrap().events);
            start += take;
        }
        prop_assert_eq!(joined, s.events.clone());
        prop_assert!(s.slice_by_count(s.len(), 1).is_err());
    }

    #[test]
    fn generated_streams_validate(s in arb_stream(200)) {
        prop_assert!(s.validate().is_ok());
        let mut bad: EventStream = s.clone();
        if bad.len() >= 2 && bad.events[0].t != bad.events[bad.len() - 1].t {
            bad.events.reverse();
            prop_assert!(!bad.validate().is_ok());
        }
    }
}
