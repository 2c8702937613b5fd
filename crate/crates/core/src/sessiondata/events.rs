use std::collections::BTreeMap;
use std::io::BufRead;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Event {
    pub user: String,
    pub item: String,
    pub timestamp: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EventLog {
    pub records: Vec<Event>,
}

/// A session before item ids are mapped into the vocabulary.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawSession {
    pub user: String,
    pub items: Vec<String>,
    pub start: u64,
}

impl EventLog {
    /// Parses `user<delim>item<delim>unix_seconds` lines. Blank lines and
    /// lines starting with `#` are skipped.
    pub fn parse<R: BufRead>(reader: R, delimiter: char) -> Result<Self> {
        let mut records = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim_end_matches(['\r', '\n']);
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split(delimiter);
            let (Some(user), Some(item), Some(ts)) = (cols.next(), cols.next(), cols.next()) else {
                return Err(Error::Data(format!(
                    "line {}: expected 3 columns separated by {delimiter:?}",
                    lineno + 1
                )));
            };
            let ts = ts.trim();
            let timestamp = ts
                .parse::<u64>()
                .or_else(|_| ts.parse::<f64>().map_err(|_| ()).and_then(|f| {
                    if f.is_finite() && f >= 0.0 {
                        Ok(f as u64)
                    } else {
                        Err(())
                    }
                }))
                .map_err(|_| Error::Data(format!("line {}: bad timestamp {ts:?}", lineno + 1)))?;
            records.push(Event {
                user: user.trim().to_string(),
                item: item.trim().to_string(),
                timestamp,
            });
        }
        Ok(Self { records })
    }

    pub fn write<W: std::io::Write>(&self, mut w: W, delimiter: char) -> Result<()> {
        for e in &self.records {
            writeln!(w, "{}{delimiter}{}{delimiter}{}", e.user, e.item, e.timestamp)?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Splits each user's events into sessions wherever consecutive events are
/// more than `gap` seconds apart.
///
/// Output is ordered by `(start, user)`; record order in the log is irrelevant.
pub fn sessionize(log: &EventLog, gap: u64) -> Result<Vec<RawSession>> {
    if gap == 0 {
        return Err(Error::invalid("session gap must be positive"));
    }
    let mut by_user: BTreeMap<&str, Vec<(u64, &str)>> = BTreeMap::new();
    for e in &log.records {
        by_user
            .entry(e.user.as_str())
            .or_default()
            .push((e.timestamp, e.item.as_str()));
    }
    let mut sessions = Vec::new();
    for (user, mut events) in by_user {
        events.sort_unstable();
        let mut current: Option<RawSession> = None;
        let mut last_ts = 0;
        for (ts, item) in events {
            match current.as_mut() {
                Some(s) if ts - last_ts <= gap => s.items.push(item.to_string()),
                _ => {
                    sessions.extend(current.take());
                    current = Some(RawSession {
                        user: user.to_string(),
                        items: vec![item.to_string()],
                        start: ts,
                    });
                }
            }
            last_ts = ts;
        }
        sessions.extend(current);
    }
    sessions.sort_by(|a, b| (a.start, &a.user).cmp(&(b.start, &b.user)));
    Ok(sessions)
}
