use std::time::{Duration, Instant};

use draftwatch::replay::{replay, schedule};
use draftwatch::track::Track;
use draftwatch_core::{GeodeticFix, RiderId, Timestamp};

fn track(rider: u32, start_s: i64, n: usize) -> Track {
    let samples = (0..n)
        .map(|k| GeodeticFix::new(46.55 + 1e-5 * k as f64, 15.64, 0.0, Timestamp::from_secs(start_s + k as i64)))
        .collect();
    Track::new(Some(RiderId(rider)), None, samples)
}

#[test]
fn ten_samples_at_speedup_ten() {
    let mut n = 0;
    let rep = replay(&[track(1, 0, 10)], 10.0, &mut |_: RiderId, _: &GeodeticFix| {
        n += 1;
        Ok(())
    })
    .unwrap();
    assert_eq!(rep.delivered, 10);
    assert_eq!(n, 10);
    // Last fix is due 0.9 s in.
    assert!(rep.wall >= Duration::from_millis(900) && rep.wall < Duration::from_millis(1200), "{:?}", rep.wall);
}

#[test]
fn late_starter_offset_scales_with_speedup() {
    let rep = replay(&[track(1, 0, 30), track(2, 20, 5)], 10.0, &mut |_: RiderId, _: &GeodeticFix| Ok(())).unwrap();
    let first = |r| rep.first_delivery.iter().find(|(x, _)| *x == RiderId(r)).unwrap().1;
    let gap = first(2) - first(1);
    assert!((gap.as_secs_f64() - 2.0).abs() < 0.05, "{gap:?}");
}

#[test]
fn global_order_is_preserved() {
    let tracks = [track(3, 0, 50), track(1, 7, 40), track(2, 3, 45)];
    let mut seen = Vec::new();
    replay(&tracks, f64::INFINITY, &mut |r: RiderId, f: &GeodeticFix| {
        seen.push((f.t, r));
        Ok(())
    })
    .unwrap();
    let mut sorted = seen.clone();
    sorted.sort();
    assert_eq!(seen, sorted);
    assert_eq!(seen.len(), schedule(&tracks).unwrap().len());
}

#[test]
fn paced_deliveries_are_punctual() {
    // 1000 fixes over 200 s of race time at 60x: about 3.3 s of wall time.
    let tracks: Vec<Track> = (1..=5).map(|r| track(r, 0, 200)).collect();
    let start = Instant::now();
    let mut late = Duration::ZERO;
    let rep = replay(&tracks, 60.0, &mut |_: RiderId, f: &GeodeticFix| {
        let due = Duration::from_secs_f64(f.t.secs_f64() / 60.0);
        late = late.max(start.elapsed().saturating_sub(due));
        Ok(())
    })
    .unwrap();
    assert_eq!(rep.delivered, 1000);
    assert!(rep.max_lateness < Duration::from_millis(20), "{:?}", rep.max_lateness);
    assert!(late < Duration::from_millis(20), "{late:?}");
}
