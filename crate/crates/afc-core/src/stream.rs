//! Channelized detection-event streams and their on-disk format.
//!
//! A stream file is a UTF-8 header line
//! `#afc-ts v1 <json metadata>` followed by CSV rows
//! `channel,trial_index,time_ps,flags`. Times are integer picoseconds since
//! the start of the run and must be nondecreasing within a channel.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::stats;

pub const STREAM_MAGIC: &str = "#afc-ts v1";

/// Event flag: idler detection that triggered a conditional storage block.
pub const FLAG_HERALD_TRIGGER: u8 = 0b0000_0001;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Idler,
    SignalA,
    SignalB,
    Reference,
}

impl Channel {
    pub fn as_str(&self) -> &'static str {
        match self {
            Channel::Idler => "idler",
            Channel::SignalA => "signal_a",
            Channel::SignalB => "signal_b",
            Channel::Reference => "reference",
        }
    }

    pub fn parse(s: &str) -> Option<Channel> {
        match s {
            "idler" => Some(Channel::Idler),
            "signal_a" => Some(Channel::SignalA),
            "signal_b" => Some(Channel::SignalB),
            "reference" => Some(Channel::Reference),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TsEvent {
    pub time_ps: i64,
    pub trial_index: u64,
    pub flags: u8,
}

/// Time-ordered events of a single detector channel.
#[derive(Debug, Clone, PartialEq)]
pub struct TimestampStream {
    pub channel: Channel,
    pub events: Vec<TsEvent>,
}

impl TimestampStream {
    pub fn new(channel: Channel) -> Self {
        TimestampStream {
            channel,
            events: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn times(&self) -> impl Iterator<Item = i64> + '_ {
        self.events.iter().map(|e| e.time_ps)
    }

    /// Checks stream invariants: nondecreasing times and, when the trial
    /// period is known, event times consistent with their trial index.
    pub fn validate(&self, trial_period_ps: Option<i64>) -> Result<()> {
        let mut last = i64::MIN;
        for (i, e) in self.events.iter().enumerate() {
            if e.time_ps < last {
                return Err(CoreError::domain(format!(
                    "{} stream not time-ordered at event {i}",
                    self.channel.as_str()
                )));
            }
            last = e.time_ps;
            if let Some(period) = trial_period_ps {
                let start = e.trial_index as i64 * period;
                if e.time_ps < start || e.time_ps >= start + period {
                    return Err(CoreError::domain(format!(
                        "{} event {i} at {} ps is outside trial {}",
                        self.channel.as_str(),
                        e.time_ps,
                        e.trial_index
                    )));
                }
            }
        }
        Ok(())
    }

    /// Independent Bernoulli thinning; keeps each event with probability
    /// `keep`. Deterministic for a fixed seed.
    pub fn thin(&self, keep: f64, seed: u64) -> TimestampStream {
        assert!((0.0..=1.0).contains(&keep));
        let mut rng = stats::substream(seed, 0x7417);
        TimestampStream {
            channel: self.channel,
            events: self
                .events
                .iter()
                .copied()
                .filter(|_| rng.random::<f64>() < keep)
                .collect(),
        }
    }

    /// Keeps events whose intra-trial offset lies in `[from_ps, to_ps)`.
    pub fn restrict_intra_trial(
        &self,
        from_ps: i64,
        to_ps: i64,
        trial_period_ps: i64,
    ) -> TimestampStream {
        TimestampStream {
            channel: self.channel,
            events: self
                .events
                .iter()
                .copied()
                .filter(|e| {
                    let offset = e.time_ps - e.trial_index as i64 * trial_period_ps;
                    offset >= from_ps && offset < to_ps
                })
                .collect(),
        }
    }

    /// Merges two time-ordered streams into one, labelled with `channel`.
    pub fn merged(a: &TimestampStream, b: &TimestampStream, channel: Channel) -> TimestampStream {
        let mut events = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.events.len() && j < b.events.len() {
            if a.events[i].time_ps <= b.events[j].time_ps {
                events.push(a.events[i]);
                i += 1;
            } else {
                events.push(b.events[j]);
                j += 1;
            }
        }
        events.extend_from_slice(&a.events[i..]);
        events.extend_from_slice(&b.events[j..]);
        TimestampStream { channel, events }
    }
}

/// Metadata carried in the stream file header.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct StreamMeta {
    pub seed: u64,
    pub config_hash: String,
    pub trial_period_ps: i64,
    #[serde(default)]
    pub channels: Vec<Channel>,
}

/// Writes one or more channels into a single stream file.
pub fn write_streams<W: Write>(
    out: &mut W,
    streams: &[&TimestampStream],
    meta: &StreamMeta,
) -> Result<()> {
    let mut meta = meta.clone();
    meta.channels = streams.iter().map(|s| s.channel).collect();
    let header = serde_json::to_string(&meta).expect("metadata serializes");
    writeln!(out, "{STREAM_MAGIC} {header}")?;
    for stream in streams {
        for e in &stream.events {
            writeln!(
                out,
                "{},{},{},{}",
                stream.channel.as_str(),
                e.trial_index,
                e.time_ps,
                e.flags
            )?;
        }
    }
    Ok(())
}

pub fn write_streams_to_path(
    path: &Path,
    streams: &[&TimestampStream],
    meta: &StreamMeta,
) -> Result<()> {
    let mut buf = Vec::new();
    write_streams(&mut buf, streams, meta)?;
    std::fs::write(path, buf)?;
    Ok(())
}

/// Reads a stream file, returning one stream per channel in file order.
/// Decode failures report the byte offset of the offending content.
pub fn read_streams<R: Read>(reader: R) -> Result<(Vec<TimestampStream>, StreamMeta)> {
    let mut reader = BufReader::new(reader);
    let mut offset: u64 = 0;
    let mut line = String::new();

    let n = reader.read_line(&mut line)?;
    if n == 0 {
        return Err(CoreError::StreamFormat {
            offset: 0,
            message: "empty file".into(),
        });
    }
    let header = line.trim_end_matches(['\n', '\r']);
    let meta = match header.strip_prefix(STREAM_MAGIC) {
        Some(rest) => serde_json::from_str::<StreamMeta>(rest.trim_start()).map_err(|e| {
            CoreError::StreamFormat {
                offset: STREAM_MAGIC.len() as u64,
                message: format!("bad header metadata: {e}"),
            }
        })?,
        None => {
            return Err(CoreError::StreamFormat {
                offset: 0,
                message: format!("missing `{STREAM_MAGIC}` header"),
            })
        }
    };
    offset += n as u64;

    let mut streams: Vec<TimestampStream> = Vec::new();
    loop {
        line.clear();
        let n = reader.read_line(&mut line)?;
        if n == 0 {
            break;
        }
        let row = line.trim_end_matches(['\n', '\r']);
        if !line.ends_with('\n') && !row.is_empty() {
            // a final row without newline may be a truncated write
            return Err(CoreError::StreamFormat {
                offset,
                message: "file ends mid-row (missing trailing newline)".into(),
            });
        }
        if row.is_empty() {
            offset += n as u64;
            continue;
        }
        let mut fields = row.split(',');
        let parse_err = |what: &str| CoreError::StreamFormat {
            offset,
            message: format!("{what} in row `{row}`"),
        };
        let channel = fields
            .next()
            .and_then(Channel::parse)
            .ok_or_else(|| parse_err("unknown channel"))?;
        let trial_index: u64 = fields
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| parse_err("bad trial index"))?;
        let time_ps: i64 = fields
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| parse_err("bad timestamp"))?;
        let flags: u8 = fields
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| parse_err("bad flags"))?;
        if fields.next().is_some() {
            return Err(parse_err("too many fields"));
        }
        let event = TsEvent {
            time_ps,
            trial_index,
            flags,
        };
        match streams.iter_mut().find(|s| s.channel == channel) {
            Some(s) => s.events.push(event),
            None => {
                let mut s = TimestampStream::new(channel);
                s.events.push(event);
                streams.push(s);
            }
        }
        offset += n as u64;
    }
    for s in &streams {
        s.validate(None).map_err(|e| CoreError::StreamFormat {
            offset,
            message: e.to_string(),
        })?;
    }
    Ok((streams, meta))
}

pub fn read_streams_from_path(path: &Path) -> Result<(Vec<TimestampStream>, StreamMeta)> {
    let file = std::fs::File::open(path)?;
    read_streams(file)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_stream() -> TimestampStream {
        TimestampStream {
            channel: Channel::Idler,
            events: (0..50)
                .map(|i| TsEvent {
                    time_ps: 1000 * i + 13,
                    trial_index: (i as u64) / 10,
                    flags: if i == 0 { FLAG_HERALD_TRIGGER } else { 0 },
                })
                .collect(),
        }
    }

    #[test]
    fn round_trip() {
        let idler = sample_stream();
        let mut signal = TimestampStream::new(Channel::SignalA);
        signal.events.push(TsEvent {
            time_ps: 77,
            trial_index: 0,
            flags: 0,
        });
        let meta = StreamMeta {
            seed: 42,
            config_hash: "abc123".into(),
            trial_period_ps: 10_000,
            channels: vec![],
        };
        let mut buf = Vec::new();
        write_streams(&mut buf, &[&idler, &signal], &meta).unwrap();
        let (streams, meta_back) = read_streams(&buf[..]).unwrap();
        assert_eq!(meta_back.seed, 42);
        assert_eq!(meta_back.trial_period_ps, 10_000);
        assert_eq!(streams.len(), 2);
        assert_eq!(streams[0], idler);
        assert_eq!(streams[1], signal);
    }

    #[test]
    fn truncated_file_reports_offset() {
        let idler = sample_stream();
        let meta = StreamMeta {
            seed: 1,
            config_hash: "h".into(),
            trial_period_ps: 10_000,
            channels: vec![],
        };
        let mut buf = Vec::new();
        write_streams(&mut buf, &[&idler], &meta).unwrap();
        buf.truncate(buf.len() - 3);
        match read_streams(&buf[..]) {
            Err(CoreError::StreamFormat { offset, .. }) => assert!(offset > 0),
            other => panic!("expected stream format error, got {other:?}"),
        }
    }

    #[test]
    fn unordered_stream_rejected() {
        let mut s = sample_stream();
        s.events.swap(0, 1);
        assert!(s.validate(None).is_err());
    }

    #[test]
    fn trial_consistency_checked() {
        let s = sample_stream();
        assert!(s.validate(Some(10_000)).is_ok());
        assert!(s.validate(Some(1_000)).is_err());
    }

    #[test]
    fn thinning_keeps_subset_in_order() {
        let s = sample_stream();
        let t = s.thin(0.5, 9);
        assert!(t.len() < s.len());
        assert!(t.validate(None).is_ok());
        for e in &t.events {
            assert!(s.events.contains(e));
        }
    }

    #[test]
    fn merge_preserves_order() {
        let a = sample_stream();
        let mut b = sample_stream();
        for e in &mut b.events {
            e.time_ps += 437;
        }
        let m = TimestampStream::merged(&a, &b, Channel::SignalA);
        assert_eq!(m.len(), a.len() + b.len());
        assert!(m.validate(None).is_ok());
    }
}
