//! Time-tagged photon events segmented into repeated experimental shots,
//! and the `PTAG` binary interchange format.
//!
//! Layout (little-endian):
//!
//! ```text
//! header   : magic "PTAG" | u32 version | u64 shot_count | u64 shot_duration_ps
//!            | u64 bin_width_ps | u64 clock_resolution_ps          (40 bytes)
//! per shot : u64 tag_count | tag_count × (u8 channel | u64 time_ps) (9 bytes/tag)
//! ```
//!
//! Timestamps are integer picoseconds relative to the shot trigger. Within a
//! shot records are non-decreasing in time and every `time_ps` is strictly
//! below the shot duration.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"PTAG";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 40;

/// One detected photon: detector index (1 or 2) and arrival time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TagRecord {
    pub channel: u8,
    pub time_ps: u64,
}

/// Stream-level metadata carried in the file header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamHeader {
    pub version: u32,
    pub shot_duration_ps: u64,
    /// Native bin width the stream was produced for; analysis may rebin.
    pub bin_width_ps: u64,
    /// Timing resolution of the (simulated) tagger.
    pub clock_resolution_ps: u64,
}

/// A full two-channel tag record: header plus per-shot tag sequences.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagStream {
    pub header: StreamHeader,
    pub shots: Vec<Vec<TagRecord>>,
}

/// Per-bin tag totals summed over shots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinnedCounts {
    pub bin_width_ps: u64,
    pub counts_ch1: Vec<u64>,
    pub counts_ch2: Vec<u64>,
}

impl TagStream {
    pub fn new(header: StreamHeader, shots: Vec<Vec<TagRecord>>) -> Result<Self> {
        let stream = Self { header, shots };
        stream.validate()?;
        Ok(stream)
    }

    pub fn shot_count(&self) -> u64 {
        self.shots.len() as u64
    }

    pub fn total_tags(&self) -> u64 {
        self.shots.iter().map(|s| s.len() as u64).sum()
    }

    /// Checks every stream invariant; cheap enough to run on load and store.
    pub fn validate(&self) -> Result<()> {
        let h = &self.header;
        if h.shot_duration_ps == 0 {
            return Err(Error::Config("shot duration must be positive".into()));
        }
        if h.bin_width_ps == 0 || h.shot_duration_ps % h.bin_width_ps != 0 {
            return Err(Error::Config(format!(
                "bin width {} ps must divide shot duration {} ps",
                h.bin_width_ps, h.shot_duration_ps
            )));
        }
        for (i, shot) in self.shots.iter().enumerate() {
            let mut prev = 0u64;
            for tag in shot {
                if tag.channel != 1 && tag.channel != 2 {
                    return Err(Error::Corrupt(format!(
                        "shot {i}: channel {} not in {{1, 2}}",
                        tag.channel
                    )));
                }
                if tag.time_ps < prev {
                    return Err(Error::Corrupt(format!(
                        "shot {i}: tags not sorted ({} ps after {} ps)",
                        tag.time_ps, prev
                    )));
                }
                if tag.time_ps >= h.shot_duration_ps {
                    return Err(Error::Range(format!(
                        "shot {i}: tag at {} ps outside shot duration {} ps",
                        tag.time_ps, h.shot_duration_ps
                    )));
                }
                prev = tag.time_ps;
            }
        }
        Ok(())
    }

    /// Histograms tags into `bin_width_ps` bins, summed over all shots.
    ///
    /// A tag exactly on a bin boundary belongs to the higher bin
    /// (floor division of its timestamp).
    pub fn bin_counts(&self, bin_width_ps: u64) -> Result<BinnedCounts> {
        if bin_width_ps == 0 || self.header.shot_duration_ps % bin_width_ps != 0 {
            return Err(Error::Config(format!(
                "bin width {} ps must divide shot duration {} ps",
                bin_width_ps, self.header.shot_duration_ps
            )));
        }
        let nbins = (self.header.shot_duration_ps / bin_width_ps) as usize;
        let mut c1 = vec![0u64; nbins];
        let mut c2 = vec![0u64; nbins];
        for shot in &self.shots {
            for tag in shot {
                let b = (tag.time_ps / bin_width_ps) as usize;
                match tag.channel {
                    1 => c1[b] += 1,
                    _ => c2[b] += 1,
                }
            }
        }
        Ok(BinnedCounts { bin_width_ps, counts_ch1: c1, counts_ch2: c2 })
    }
}

impl BinnedCounts {
    pub fn total_ch1(&self) -> u64 {
        self.counts_ch1.iter().sum()
    }

    pub fn total_ch2(&self) -> u64 {
        self.counts_ch2.iter().sum()
    }

    /// CSV with columns `bin_start_ps,n1,n2`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "bin_start_ps,n1,n2")?;
        for (b, (n1, n2)) in self.counts_ch1.iter().zip(&self.counts_ch2).enumerate() {
            writeln!(w, "{},{},{}", b as u64 * self.bin_width_ps, n1, n2)?;
        }
        Ok(())
    }
}

fn read_u64(buf: &[u8], at: usize) -> u64 {
    u64::from_le_bytes(buf[at..at + 8].try_into().unwrap())
}

/// Parses and fully validates a `PTAG` file.
pub fn read_stream(path: &Path) -> Result<TagStream> {
    let file = File::open(path)?;
    let mut r = BufReader::with_capacity(1 << 20, file);

    let mut head = [0u8; HEADER_LEN];
    r.read_exact(&mut head).map_err(|_| {
        Error::Format(format!("{}: too short for a PTAG header", path.display()))
    })?;
    if &head[0..4] != MAGIC {
        return Err(Error::Format(format!("{}: bad magic bytes", path.display())));
    }
    let version = u32::from_le_bytes(head[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(Error::Format(format!(
            "{}: unsupported version {version} (expected {VERSION})",
            path.display()
        )));
    }
    let shot_count = read_u64(&head, 8);
    let header = StreamHeader {
        version,
        shot_duration_ps: read_u64(&head, 16),
        bin_width_ps: read_u64(&head, 24),
        clock_resolution_ps: read_u64(&head, 32),
    };

    let mut shots = Vec::with_capacity(shot_count.min(1 << 24) as usize);
    let mut count_buf = [0u8; 8];
    for i in 0..shot_count {
        r.read_exact(&mut count_buf)
            .map_err(|_| Error::Corrupt(format!("truncated shot-count prefix at shot {i}")))?;
        let n = u64::from_le_bytes(count_buf) as usize;
        let mut bytes = vec![0u8; n * 9];
        r.read_exact(&mut bytes)
            .map_err(|_| Error::Corrupt(format!("truncated tag payload in shot {i}")))?;
        let mut shot = Vec::with_capacity(n);
        for rec in bytes.chunks_exact(9) {
            shot.push(TagRecord {
                channel: rec[0],
                time_ps: u64::from_le_bytes(rec[1..9].try_into().unwrap()),
            });
        }
        shots.push(shot);
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(Error::Corrupt("trailing bytes after final shot".into()));
    }
    TagStream::new(header, shots)
}

/// Writes a validated stream; nothing is written if validation fails.
pub fn write_stream(stream: &TagStream, path: &Path) -> Result<()> {
    stream.validate()?;
    let file = File::create(path)?;
    let mut w = BufWriter::with_capacity(1 << 20, file);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&stream.shot_count().to_le_bytes())?;
    w.write_all(&stream.header.shot_duration_ps.to_le_bytes())?;
    w.write_all(&stream.header.bin_width_ps.to_le_bytes())?;
    w.write_all(&stream.header.clock_resolution_ps.to_le_bytes())?;
    for shot in &stream.shots {
        w.write_all(&(shot.len() as u64).to_le_bytes())?;
        for tag in shot {
            w.write_all(&[tag.channel])?;
            w.write_all(&tag.time_ps.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use tempfile::tempdir;

    fn header(duration: u64, bin: u64) -> StreamHeader {
        StreamHeader {
            version: VERSION,
            shot_duration_ps: duration,
            bin_width_ps: bin,
            clock_resolution_ps: 1,
        }
    }

    #[test]
    fn empty_stream_round_trip_is_header_only() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("empty.ptag");
        let s = TagStream::new(header(1000, 100), vec![]).unwrap();
        write_stream(&s, &path).unwrap();
        assert_eq!(std::fs::metadata(&path).unwrap().len(), HEADER_LEN as u64);
        let back = read_stream(&path).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.shot_count(), 0);
    }

    #[test]
    fn single_tag_stream_layout() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("one.ptag");
        let s = TagStream::new(
            header(1000, 100),
            vec![vec![TagRecord { channel: 1, time_ps: 42 }]],
        )
        .unwrap();
        write_stream(&s, &path).unwrap();
        // header + shot-count prefix + one 9-byte record
        assert_eq!(
            std::fs::metadata(&path).unwrap().len(),
            (HEADER_LEN + 8 + 9) as u64
        );
        assert_eq!(read_stream(&path).unwrap(), s);
    }

    #[test]
    fn two_tag_order_preserved() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("two.ptag");
        let s = TagStream::new(
            header(1000, 100),
            vec![vec![
                TagRecord { channel: 1, time_ps: 100 },
                TagRecord { channel: 2, time_ps: 250 },
            ]],
        )
        .unwrap();
        write_stream(&s, &path).unwrap();
        let back = read_stream(&path).unwrap();
        assert_eq!(back.shots[0][0], TagRecord { channel: 1, time_ps: 100 });
        assert_eq!(back.shots[0][1], TagRecord { channel: 2, time_ps: 250 });
    }

    #[test]
    fn bad_magic_is_format_error() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.ptag");
        std::fs::write(&path, b"NOPE............................................").unwrap();
        match read_stream(&path) {
            Err(Error::Format(_)) => {}
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn unsorted_tags_rejected() {
        let s = TagStream::new(
            header(1000, 100),
            vec![vec![
                TagRecord { channel: 1, time_ps: 500 },
                TagRecord { channel: 2, time_ps: 100 },
            ]],
        );
        match s {
            Err(Error::Corrupt(_)) => {}
            other => panic!("expected corruption error, got {other:?}"),
        }
    }

    #[test]
    fn out_of_range_timestamp_rejected() {
        let s = TagStream::new(
            header(1000, 100),
            vec![vec![TagRecord { channel: 1, time_ps: 1000 }]],
        );
        match s {
            Err(Error::Range(_)) => {}
            other => panic!("expected range error, got {other:?}"),
        }
    }

    #[test]
    fn write_refuses_invalid_without_touching_disk() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("never.ptag");
        let bad = TagStream {
            header: header(1000, 100),
            shots: vec![vec![TagRecord { channel: 3, time_ps: 10 }]],
        };
        assert!(write_stream(&bad, &path).is_err());
        assert!(!path.exists());
    }

    #[test]
    fn bin_counts_direct_definition() {
        let s = TagStream::new(
            header(4000, 1000),
            vec![vec![
                TagRecord { channel: 1, time_ps: 500 },
                TagRecord { channel: 1, time_ps: 1500 },
            ]],
        )
        .unwrap();
        let b = s.bin_counts(1000).unwrap();
        assert_eq!(b.counts_ch1, vec![1, 1, 0, 0]);
        assert_eq!(b.counts_ch2, vec![0, 0, 0, 0]);
    }

    #[test]
    fn bin_boundary_goes_to_higher_bin() {
        let s = TagStream::new(
            header(4000, 1000),
            vec![vec![TagRecord { channel: 2, time_ps: 2000 }]],
        )
        .unwrap();
        let b = s.bin_counts(1000).unwrap();
        assert_eq!(b.counts_ch2, vec![0, 0, 1, 0]);
    }

    #[test]
    fn empty_stream_bins_to_zero() {
        let s = TagStream::new(header(4000, 1000), vec![]).unwrap();
        let b = s.bin_counts(2000).unwrap();
        assert_eq!(b.counts_ch1, vec![0, 0]);
        assert_eq!(b.total_ch2(), 0);
    }

    #[test]
    fn non_dividing_bin_width_is_config_error() {
        let s = TagStream::new(header(4000, 1000), vec![]).unwrap();
        match s.bin_counts(3000) {
            Err(Error::Config(_)) => {}
            other => panic!("expected config error, got {other:?}"),
        }
    }

    prop_compose! {
        fn arb_stream()(
            duration_bins in 1u64..20,
            bin in prop::sample::select(vec![100u64, 250, 1000]),
            shots in prop::collection::vec(
                prop::collection::vec((1u8..=2, 0.0f64..1.0), 0..40),
                0..12,
            ),
        ) -> TagStream {
            let duration = duration_bins * bin;
            let shots = shots
                .into_iter()
                .map(|raw| {
                    let mut tags: Vec<TagRecord> = raw
                        .into_iter()
                        .map(|(ch, frac)| TagRecord {
                            channel: ch,
                            time_ps: ((frac * duration as f64) as u64).min(duration - 1),
                        })
                        .collect();
                    tags.sort_by_key(|t| t.time_ps);
                    tags
                })
                .collect();
            TagStream::new(
                StreamHeader {
                    version: VERSION,
                    shot_duration_ps: duration,
                    bin_width_ps: bin,
                    clock_resolution_ps: 1,
                },
                shots,
            )
            .unwrap()
        }
    }

    proptest! {
        #[test]
        fn round_trip_identity(s in arb_stream()) {
            let dir = tempdir().unwrap();
            let path = dir.path().join("rt.ptag");
            write_stream(&s, &path).unwrap();
            let back = read_stream(&path).unwrap();
            prop_assert_eq!(back, s);
        }

        #[test]
        fn count_conservation_and_rebinning(s in arb_stream()) {
            let w = s.header.bin_width_ps;
            let fine = s.bin_counts(w).unwrap();
            prop_assert_eq!(
                fine.total_ch1() + fine.total_ch2(),
                s.total_tags()
            );
            // summing adjacent fine bins equals binning at twice the width
            if (s.header.shot_duration_ps / w) % 2 == 0 {
                let coarse = s.bin_counts(2 * w).unwrap();
                let folded: Vec<u64> = fine
                    .counts_ch1
                    .chunks(2)
                    .map(|c| c.iter().sum())
                    .collect();
                prop_assert_eq!(coarse.counts_ch1, folded);
            }
        }
    }
}
