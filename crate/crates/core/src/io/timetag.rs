//! Timetag files.
//!
//! Binary layout, all integers little-endian:
//!
//! | offset | size | field                                  |
//! |--------|------|----------------------------------------|
//! | 0      | 4    | magic `PHST`                           |
//! | 4      | 2    | format version (1)                     |
//! | 6      | 1    | channel count (2)                      |
//! | 7      | 1    | reserved, 0                            |
//! | 8      | 8    | repetition period, ps                  |
//! | 16     | 8    | number of excitation pulses            |
//! | 24     | 8    | RNG seed                               |
//! | 32     | 8    | record count                           |
//! | 40     | 4    | metadata length `m`                    |
//! | 44     | m    | metadata, UTF-8 `key=value` lines      |
//! | 44+m   | 9·n  | records: channel u8, timestamp u64 ps  |
//!
//! The CSV twin carries the header as `# key=value` comment lines followed by
//! a `channel,timestamp_ps` table.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::simulator::{Channel, Timetag};

pub const MAGIC: &[u8; 4] = b"PHST";
pub const FORMAT_VERSION: u16 = 1;
const HEADER_LEN: usize = 44;
const RECORD_LEN: usize = 9;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimetagHeader {
    pub rep_period_ps: u64,
    pub n_pulses: u64,
    pub seed: u64,
    pub metadata: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimetagFile {
    pub header: TimetagHeader,
    pub tags: Vec<Timetag>,
}

impl TimetagFile {
    pub fn to_binary(&self) -> Vec<u8> {
        let meta = render_metadata(&self.header.metadata);
        let mut out = Vec::with_capacity(HEADER_LEN + meta.len() + RECORD_LEN * self.tags.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.push(2);
        out.push(0);
        out.extend_from_slice(&self.header.rep_period_ps.to_le_bytes());
        out.extend_from_slice(&self.header.n_pulses.to_le_bytes());
        out.extend_from_slice(&self.header.seed.to_le_bytes());
        out.extend_from_slice(&(self.tags.len() as u64).to_le_bytes());
        out.extend_from_slice(&(meta.len() as u32).to_le_bytes());
        out.extend_from_slice(meta.as_bytes());
        for tag in &self.tags {
            out.push(tag.channel.index());
            out.extend_from_slice(&tag.time_ps.to_le_bytes());
        }
        out
    }

    pub fn from_binary(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::format(bytes.len() as u64, "truncated header"));
        }
        if &bytes[0..4] != MAGIC {
            return Err(Error::format(0, "bad magic, not a timetag file"));
        }
        let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != FORMAT_VERSION {
            return Err(Error::format(4, format!("unsupported format version {version}")));
        }
        if bytes[6] != 2 {
            return Err(Error::format(
                6,
                format!("expected 2 channels, header says {}", bytes[6]),
            ));
        }
        let rep_period_ps = u64_at(8);
        if rep_period_ps == 0 {
            return Err(Error::format(8, "repetition period must be > 0"));
        }
        let n_pulses = u64_at(16);
        let seed = u64_at(24);
        let record_count = u64_at(32);
        let meta_len = u32::from_le_bytes(bytes[40..44].try_into().unwrap()) as usize;
        let body_start = HEADER_LEN + meta_len;
        if bytes.len() < body_start {
            return Err(Error::format(bytes.len() as u64, "truncated metadata block"));
        }
        let meta = std::str::from_utf8(&bytes[HEADER_LEN..body_start])
            .map_err(|e| Error::format((HEADER_LEN + e.valid_up_to()) as u64, "metadata is not UTF-8"))?;
        let metadata = parse_metadata(meta, HEADER_LEN as u64)?;

        let body = &bytes[body_start..];
        let complete = body.len() / RECORD_LEN;
        if (complete as u64) < record_count {
            let offset = body_start + complete * RECORD_LEN;
            return Err(Error::format(
                offset as u64,
                format!("truncated body: record {complete} of {record_count} incomplete"),
            ));
        }
        let expected_end = body_start as u64 + record_count * RECORD_LEN as u64;
        if (bytes.len() as u64) > expected_end {
            return Err(Error::format(expected_end, "trailing bytes after last record"));
        }

        let mut tags = Vec::with_capacity(record_count as usize);
        let mut prev = 0u64;
        for (i, rec) in body.chunks_exact(RECORD_LEN).enumerate() {
            let offset = (body_start + i * RECORD_LEN) as u64;
            let channel = Channel::from_index(rec[0])
                .ok_or_else(|| Error::format(offset, format!("invalid channel byte {}", rec[0])))?;
            let time_ps = u64::from_le_bytes(rec[1..9].try_into().unwrap());
            if time_ps < prev {
                return Err(Error::format(offset + 1, "timestamps not monotone"));
            }
            prev = time_ps;
            tags.push(Timetag { time_ps, channel });
        }
        Ok(TimetagFile {
            header: TimetagHeader {
                rep_period_ps,
                n_pulses,
                seed,
                metadata,
            },
            tags,
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str("# photostat-timetag v1\n");
        out.push_str(&format!("# rep_period_ps={}\n", self.header.rep_period_ps));
        out.push_str("# channels=2\n");
        out.push_str(&format!("# n_pulses={}\n", self.header.n_pulses));
        out.push_str(&format!("# seed={}\n", self.header.seed));
        for (k, v) in &self.header.metadata {
            out.push_str(&format!("# meta.{k}={v}\n"));
        }
        out.push_str("channel,timestamp_ps\n");
        for tag in &self.tags {
            out.push_str(&format!("{},{}\n", tag.channel.index(), tag.time_ps));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rep_period_ps = None;
        let mut n_pulses = None;
        let mut seed = 0;
        let mut metadata = BTreeMap::new();
        let mut tags = Vec::new();
        let mut saw_columns = false;
        let mut offset = 0u64;
        for line in text.split_inclusive('\n') {
            let here = offset;
            offset += line.len() as u64;
            let line = line.trim_end_matches(['\n', '\r']);
            if line.trim().is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                let Some((k, v)) = comment.trim().split_once('=') else {
                    continue;
                };
                let num = |v: &str| {
                    v.trim()
                        .parse::<u64>()
                        .map_err(|_| Error::format(here, format!("bad value for {k}")))
                };
                match k.trim() {
                    "rep_period_ps" => rep_period_ps = Some(num(v)?),
                    "n_pulses" => n_pulses = Some(num(v)?),
                    "seed" => seed = num(v)?,
                    "channels" if num(v)? != 2 => return Err(Error::format(here, "expected 2 channels")),
                    key => {
                        if let Some(m) = key.strip_prefix("meta.") {
                            metadata.insert(m.to_string(), v.to_string());
                        }
                    }
                }
                continue;
            }
            if !saw_columns {
                if line.trim() != "channel,timestamp_ps" {
                    return Err(Error::format(here, "expected header `channel,timestamp_ps`"));
                }
                saw_columns = true;
                continue;
            }
            let (ch, t) = line
                .split_once(',')
                .ok_or_else(|| Error::format(here, "expected `channel,timestamp_ps`"))?;
            let channel = ch
                .trim()
                .parse::<u8>()
                .ok()
                .and_then(Channel::from_index)
                .ok_or_else(|| Error::format(here, format!("invalid channel `{ch}`")))?;
            let time_ps = t
                .trim()
                .parse::<u64>()
                .map_err(|_| Error::format(here, format!("invalid timestamp `{t}`")))?;
            if tags.last().is_some_and(|p: &Timetag| p.time_ps > time_ps) {
                return Err(Error::format(here, "timestamps not monotone"));
            }
            tags.push(Timetag { time_ps, channel });
        }
        let rep_period_ps = rep_period_ps
            .filter(|&r| r > 0)
            .ok_or_else(|| Error::format(0, "missing or zero `# rep_period_ps=`"))?;
        let n_pulses = n_pulses.ok_or_else(|| Error::format(0, "missing `# n_pulses=`"))?;
        Ok(TimetagFile {
            header: TimetagHeader {
                rep_period_ps,
                n_pulses,
                seed,
                metadata,
            },
            tags,
        })
    }

    /// Reads either format, recognising binary files by their magic.
    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path)?;
        if bytes.starts_with(MAGIC) {
            return Self::from_binary(&bytes);
        }
        match std::str::from_utf8(&bytes) {
            Ok(text) if text.trim_start().starts_with('#') || text.trim_start().starts_with("channel") => {
                Self::from_csv(text)
            }
            _ => Self::from_binary(&bytes),
        }
    }

    /// Writes CSV when the extension is `.csv`, binary otherwise.
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path)?;
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
            f.write_all(self.to_csv().as_bytes())?;
        } else {
            f.write_all(&self.to_binary())?;
        }
        Ok(())
    }
}

fn render_metadata(meta: &BTreeMap<String, String>) -> String {
    meta.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
}

fn parse_metadata(text: &str, base: u64) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    let mut offset = base;
    for line in text.split_inclusive('\n') {
        let body = line.trim_end_matches('\n');
        if !body.is_empty() {
            let (k, v) = body
                .split_once('=')
                .ok_or_else(|| Error::format(offset, "metadata line lacks `=`"))?;
            map.insert(k.to_string(), v.to_string());
        }
        offset += line.len() as u64;
    }
    Ok(map)
}
