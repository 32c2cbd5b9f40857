#![allow(dead_code)]

use super::naive::Report;

/// splitmix64; enough randomness for test fixtures.
pub struct Rng(u64);

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    pub fn below(&mut self, n: u64) -> u64 {
        self.next_u64() % n
    }
}

/// A bunched group of riders with wandering speeds and lines, occasional
/// dropouts and late starts. Returns reports per tick (1 s ticks).
pub fn random_race(seed: u64, riders: usize, ticks: usize, jitter: bool) -> Vec<Vec<Report>> {
    let mut rng = Rng::new(seed);
    struct R {
        l: f64,
        base: f64,
        phase: f64,
        lateral: f64,
        start: usize,
        silent_until: usize,
    }
    let mut rs: Vec<R> = (0..riders)
        .map(|_| R {
            l: rng.range(0.0, 12.0 * riders as f64),
            base: rng.range(7.6, 8.4),
            phase: rng.range(0.0, std::f64::consts::TAU),
            lateral: rng.range(-1.0, 1.0),
            start: if rng.unit() < 0.3 { rng.below(40) as usize } else { 0 },
            silent_until: 0,
        })
        .collect();
    let mut out = Vec::with_capacity(ticks);
    for k in 0..ticks {
        let mut tick = Vec::new();
        for (i, r) in rs.iter_mut().enumerate() {
            let speed = r.base + 0.9 * (r.phase + k as f64 / 25.0).sin() + rng.range(-0.3, 0.3);
            r.l += speed.max(0.0);
            if rng.unit() < 0.04 {
                r.lateral = rng.range(-1.6, 1.6);
            }
            if rng.unit() < 0.015 {
                r.silent_until = k + 1 + rng.below(6) as usize;
            }
            if k < r.start || k < r.silent_until {
                continue;
            }
            let dt = if jitter { rng.below(900) as i64 } else { 0 };
            tick.push(Report { rider: i as u32 + 1, t_ms: k as i64 * 1000 + dt, l: r.l, lateral: r.lateral });
        }
        tick.sort_by_key(|r| (r.t_ms, r.rider));
        out.push(tick);
    }
    out
}
