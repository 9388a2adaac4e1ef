//! Siegert-violating fixture: deletes close cross-channel pairs from a
//! stream, suppressing g²(τ < τ_c) while leaving the field statistics —
//! and hence g¹ and the mean field — untouched.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::qsim::derive_seed;
use crate::tagstore::{TagRecord, TagStream};

const FIXTURE_STREAM_ID: u64 = 0x6669_7874; // "fixt"

/// Scans cross-channel pairs with |Δt| < `tau_c_ps` within each shot, in
/// time order, and deletes one member of each surviving pair with
/// probability `delete_prob` (the victim channel is a fair coin).
/// A deleted tag cannot participate in later pairs.
pub fn nongaussian_fixture(
    stream: &TagStream,
    delete_prob: f64,
    tau_c_ps: u64,
    seed: u64,
) -> Result<TagStream> {
    if !(0.0..=1.0).contains(&delete_prob) {
        return Err(Error::Domain("delete_prob must be in [0, 1]".into()));
    }
    if delete_prob == 0.0 {
        return Ok(stream.clone());
    }
    let shots = stream
        .shots
        .iter()
        .enumerate()
        .map(|(s, shot)| {
            let mut rng =
                ChaCha12Rng::seed_from_u64(derive_seed(seed, FIXTURE_STREAM_ID, s as u64));
            let idx1: Vec<usize> =
                (0..shot.len()).filter(|k| shot[*k].channel == 1).collect();
            let idx2: Vec<usize> =
                (0..shot.len()).filter(|k| shot[*k].channel == 2).collect();
            let mut alive = vec![true; shot.len()];
            // merge sweep over close pairs, ordered by the ch-1 member
            let mut lo = 0usize;
            for &i in &idx1 {
                let t1 = shot[i].time_ps;
                while lo < idx2.len()
                    && shot[idx2[lo]].time_ps + tau_c_ps <= t1
                {
                    lo += 1;
                }
                let mut j = lo;
                while j < idx2.len() && shot[idx2[j]].time_ps < t1 + tau_c_ps {
                    let k2 = idx2[j];
                    j += 1;
                    if !alive[i] {
                        break;
                    }
                    if !alive[k2] {
                        continue;
                    }
                    if rng.random::<f64>() < delete_prob {
                        if rng.random::<f64>() < 0.5 {
                            alive[i] = false;
                        } else {
                            alive[k2] = false;
                        }
                    }
                }
            }
            shot.iter()
                .enumerate()
                .filter(|(k, _)| alive[*k])
                .map(|(_, t)| *t)
                .collect::<Vec<TagRecord>>()
        })
        .collect();
    TagStream::new(stream.header, shots)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tagstore::{StreamHeader, VERSION};

    fn stream(shots: Vec<Vec<TagRecord>>) -> TagStream {
        TagStream::new(
            StreamHeader {
                version: VERSION,
                shot_duration_ps: 100_000,
                bin_width_ps: 1000,
                clock_resolution_ps: 1,
            },
            shots,
        )
        .unwrap()
    }

    #[test]
    fn zero_probability_is_identity() {
        let s = stream(vec![vec![
            TagRecord { channel: 1, time_ps: 100 },
            TagRecord { channel: 2, time_ps: 200 },
        ]]);
        let out = nongaussian_fixture(&s, 0.0, 5000, 1).unwrap();
        assert_eq!(out, s);
    }

    #[test]
    fn certain_deletion_with_huge_window_kills_all_coincidences() {
        let mut shots = Vec::new();
        for k in 0..50u64 {
            shots.push(vec![
                TagRecord { channel: 1, time_ps: 10_000 + 17 * k },
                TagRecord { channel: 1, time_ps: 30_000 + 11 * k },
                TagRecord { channel: 2, time_ps: 50_000 + 13 * k },
                TagRecord { channel: 2, time_ps: 70_000 + 7 * k },
            ]);
        }
        let s = stream(shots);
        let out = nongaussian_fixture(&s, 1.0, 100_000, 3).unwrap();
        for shot in &out.shots {
            let n1 = shot.iter().filter(|t| t.channel == 1).count();
            let n2 = shot.iter().filter(|t| t.channel == 2).count();
            assert_eq!(n1.min(n2), 0, "a cross-channel pair survived");
        }
    }

    #[test]
    fn far_pairs_untouched() {
        let s = stream(vec![vec![
            TagRecord { channel: 1, time_ps: 1000 },
            TagRecord { channel: 2, time_ps: 90_000 },
        ]]);
        let out = nongaussian_fixture(&s, 1.0, 5000, 1).unwrap();
        assert_eq!(out.shots[0].len(), 2);
    }

    #[test]
    fn half_deletion_thins_close_pairs() {
        // isolated pairs, one per shot, all within tau_c
        let shots: Vec<Vec<TagRecord>> = (0..4000u64)
            .map(|k| {
                vec![
                    TagRecord { channel: 1, time_ps: 40_000 + (k % 7) },
                    TagRecord { channel: 2, time_ps: 41_000 + (k % 5) },
                ]
            })
            .collect();
        let s = stream(shots);
        let out = nongaussian_fixture(&s, 0.5, 5000, 11).unwrap();
        let survivors = out
            .shots
            .iter()
            .filter(|shot| {
                shot.iter().any(|t| t.channel == 1) && shot.iter().any(|t| t.channel == 2)
            })
            .count();
        let frac = survivors as f64 / 4000.0;
        assert!((frac - 0.5).abs() < 0.03, "surviving pair fraction {frac}");
    }

    #[test]
    fn deterministic_per_seed() {
        let shots: Vec<Vec<TagRecord>> = (0..100u64)
            .map(|k| {
                vec![
                    TagRecord { channel: 1, time_ps: 1000 * k % 90_000 },
                    TagRecord { channel: 2, time_ps: (1000 * k + 800) % 90_000 },
                ]
            })
            .map(|mut v| {
                v.sort_by_key(|t| t.time_ps);
                v
            })
            .collect();
        let s = stream(shots);
        let a = nongaussian_fixture(&s, 0.4, 3000, 5).unwrap();
        let b = nongaussian_fixture(&s, 0.4, 3000, 5).unwrap();
        assert_eq!(a, b);
    }
}
