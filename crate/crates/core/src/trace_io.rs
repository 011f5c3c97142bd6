//! Reading post traces and impression logs (JSON lines or CSV) and writing
//! result tables as CSV.
//!
//! Post record: `{"id", "publisher", "created_at"}`. Impression record:
//! `{"user", "post_id", "publisher", "published_at", "impressed_at", "position"}`.
//! Timestamps are RFC 3339 and normalized to whole UTC seconds.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDate, SecondsFormat, Utc};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::analytics::{Impression, Snapshot};
use crate::error::{Result, VoaError};
use crate::simulator::Post;

pub const POST_HEADER: [&str; 3] = ["id", "publisher", "created_at"];
pub const IMPRESSION_HEADER: [&str; 6] = [
    "user",
    "post_id",
    "publisher",
    "published_at",
    "impressed_at",
    "position",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputFormat {
    JsonLines,
    Csv,
}

impl InputFormat {
    /// `.csv` files are CSV, everything else JSON lines.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => InputFormat::Csv,
            _ => InputFormat::JsonLines,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct PostRecord {
    id: String,
    publisher: String,
    created_at: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct ImpressionRecord {
    user: String,
    post_id: String,
    publisher: String,
    published_at: String,
    impressed_at: String,
    position: i64,
}

pub fn parse_timestamp(s: &str) -> std::result::Result<DateTime<Utc>, String> {
    let parsed = DateTime::parse_from_rfc3339(s.trim()).map_err(|e| format!("unparseable timestamp `{s}`: {e}"))?;
    DateTime::from_timestamp(parsed.timestamp(), 0).ok_or_else(|| format!("timestamp `{s}` out of range"))
}

pub fn format_timestamp(t: &DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Secs, true)
}

fn read_records<T: DeserializeOwned, R: Read>(
    input: R,
    format: InputFormat,
    required: &[&str],
) -> Result<Vec<(u64, T)>> {
    let mut out = Vec::new();
    match format {
        InputFormat::JsonLines => {
            for (i, line) in BufReader::new(input).lines().enumerate() {
                let line = line?;
                let lineno = i as u64 + 1;
                if line.trim().is_empty() {
                    continue;
                }
                let record = serde_json::from_str(&line).map_err(|e| VoaError::Parse {
                    line: lineno,
                    message: e.to_string(),
                })?;
                out.push((lineno, record));
            }
        }
        InputFormat::Csv => {
            let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
            let headers = reader
                .headers()
                .map_err(|e| VoaError::Parse {
                    line: 1,
                    message: e.to_string(),
                })?
                .clone();
            if let Some(missing) = required.iter().find(|h| !headers.iter().any(|x| x == **h)) {
                return Err(VoaError::Parse {
                    line: 1,
                    message: format!("header lacks column `{missing}`"),
                });
            }
            for row in reader.records() {
                let row = row.map_err(|e| VoaError::Parse {
                    line: e.position().map_or(0, |p| p.line()),
                    message: e.to_string(),
                })?;
                let lineno = row.position().map_or(0, |p| p.line());
                let record = row.deserialize(Some(&headers)).map_err(|e| VoaError::Parse {
                    line: lineno,
                    message: e.to_string(),
                })?;
                out.push((lineno, record));
            }
        }
    }
    Ok(out)
}

fn timestamp_at(line: u64, s: &str) -> Result<DateTime<Utc>> {
    parse_timestamp(s).map_err(|message| VoaError::Parse { line, message })
}

/// Posts sorted by `(created_at, id)`. Duplicate ids are rejected.
pub fn parse_posts<R: Read>(input: R, format: InputFormat) -> Result<Vec<Post>> {
    let records: Vec<(u64, PostRecord)> = read_records(input, format, &POST_HEADER)?;
    let mut lines_by_id: HashMap<String, u64> = HashMap::new();
    let mut posts = Vec::with_capacity(records.len());
    for (line, r) in records {
        if lines_by_id.insert(r.id.clone(), line).is_some() {
            return Err(VoaError::DuplicateId { id: r.id, line });
        }
        posts.push(Post {
            created_at: timestamp_at(line, &r.created_at)?,
            id: r.id,
            publisher: r.publisher,
        });
    }
    posts.sort_by(|a, b| (a.created_at, &a.id).cmp(&(b.created_at, &b.id)));
    Ok(posts)
}

pub fn read_posts_file(path: &Path) -> Result<Vec<Post>> {
    parse_posts(std::fs::File::open(path)?, InputFormat::from_path(path))
}

/// Snapshots grouped from an impression log.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpressionLog {
    /// Ordered by user, then `taken_at`.
    pub snapshots: Vec<Snapshot>,
    /// Repeated posts dropped inside a snapshot.
    pub duplicates_removed: usize,
}

impl ImpressionLog {
    pub fn users(&self) -> Vec<&str> {
        let mut users: Vec<&str> = self.snapshots.iter().map(|s| s.user.as_str()).collect();
        users.dedup();
        users
    }

    pub fn snapshots_for(&self, user: &str) -> &[Snapshot] {
        let lo = self.snapshots.partition_point(|s| s.user.as_str() < user);
        let hi = self.snapshots.partition_point(|s| s.user.as_str() <= user);
        &self.snapshots[lo..hi]
    }

    /// Distinct posts the user saw, optionally only within the top `k`.
    pub fn posts_seen_by(&self, user: &str, k_truncate: Option<usize>) -> HashSet<String> {
        self.snapshots_for(user)
            .iter()
            .flat_map(|s| s.post_ids(k_truncate))
            .map(str::to_owned)
            .collect()
    }

    pub fn impression_count(&self) -> usize {
        self.snapshots.iter().map(Snapshot::len).sum()
    }
}

/// Groups records sharing `(user, impressed_at)` into snapshots.
pub fn parse_impressions<R: Read>(input: R, format: InputFormat) -> Result<ImpressionLog> {
    let records: Vec<(u64, ImpressionRecord)> = read_records(input, format, &IMPRESSION_HEADER)?;
    let mut groups: BTreeMap<(String, DateTime<Utc>), Vec<Impression>> = BTreeMap::new();
    for (line, r) in records {
        if r.position < 1 || r.position > i64::from(u32::MAX) {
            return Err(VoaError::Parse {
                line,
                message: format!("position must be a positive integer, got {}", r.position),
            });
        }
        let impressed_at = timestamp_at(line, &r.impressed_at)?;
        let impression = Impression {
            published_at: timestamp_at(line, &r.published_at)?,
            impressed_at,
            post_id: r.post_id,
            publisher: r.publisher,
            position: r.position as u32,
        };
        groups.entry((r.user, impressed_at)).or_default().push(impression);
    }
    let mut snapshots = Vec::with_capacity(groups.len());
    let mut duplicates_removed = 0;
    for ((user, taken_at), impressions) in groups {
        let (snapshot, removed) = Snapshot::new(user, taken_at, impressions)?;
        duplicates_removed += removed;
        snapshots.push(snapshot);
    }
    Ok(ImpressionLog {
        snapshots,
        duplicates_removed,
    })
}

pub fn read_impressions_file(path: &Path) -> Result<ImpressionLog> {
    parse_impressions(std::fs::File::open(path)?, InputFormat::from_path(path))
}

fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out)
}

fn csv_err(e: csv::Error) -> VoaError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => VoaError::Io(io),
        other => VoaError::invalid(format!("csv: {other:?}")),
    }
}

fn write_records<W: Write, T: Serialize>(mut out: W, records: &[T], format: InputFormat) -> Result<()> {
    match format {
        InputFormat::JsonLines => {
            for r in records {
                serde_json::to_writer(&mut out, r).map_err(std::io::Error::from)?;
                out.write_all(b"\n")?;
            }
        }
        InputFormat::Csv => {
            let mut w = csv_writer(out);
            for r in records {
                w.serialize(r).map_err(csv_err)?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

pub fn write_posts<W: Write>(out: W, posts: &[Post], format: InputFormat) -> Result<()> {
    let records: Vec<PostRecord> = posts
        .iter()
        .map(|p| PostRecord {
            id: p.id.clone(),
            publisher: p.publisher.clone(),
            created_at: format_timestamp(&p.created_at),
        })
        .collect();
    write_records(out, &records, format)
}

pub fn write_impressions<W: Write>(out: W, snapshots: &[Snapshot], format: InputFormat) -> Result<()> {
    let records: Vec<ImpressionRecord> = snapshots
        .iter()
        .flat_map(|s| {
            s.impressions().iter().map(move |i| ImpressionRecord {
                user: s.user.clone(),
                post_id: i.post_id.clone(),
                publisher: i.publisher.clone(),
                published_at: format_timestamp(&i.published_at),
                impressed_at: format_timestamp(&s.taken_at),
                position: i64::from(i.position),
            })
        })
        .collect();
    write_records(out, &records, format)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DailyCount {
    pub day: NaiveDate,
    pub posts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceMeta {
    pub post_count: usize,
    pub publisher_count: usize,
    pub time_span_hours: f64,
    /// Posts per hour over the observed span.
    pub estimated_lambda: f64,
    /// One entry per UTC calendar day from the first to the last post.
    pub daily_counts: Vec<DailyCount>,
}

pub fn trace_meta(posts: &[Post]) -> Result<TraceMeta> {
    let first = posts
        .iter()
        .map(|p| p.created_at)
        .min()
        .ok_or(VoaError::Empty("trace has no posts"))?;
    let last = posts.iter().map(|p| p.created_at).max().unwrap_or(first);
    let time_span_hours = (last - first).num_seconds() as f64 / 3600.0;
    if time_span_hours <= 0.0 {
        return Err(VoaError::invalid("trace spans zero time; rate undefined"));
    }
    let publisher_count = posts.iter().map(|p| p.publisher.as_str()).collect::<HashSet<_>>().len();
    let mut per_day: BTreeMap<NaiveDate, usize> = BTreeMap::new();
    for p in posts {
        *per_day.entry(p.created_at.date_naive()).or_default() += 1;
    }
    let daily_counts = first
        .date_naive()
        .iter_days()
        .take_while(|d| *d <= last.date_naive())
        .map(|day| DailyCount {
            day,
            posts: per_day.get(&day).copied().unwrap_or(0),
        })
        .collect();
    Ok(TraceMeta {
        post_count: posts.len(),
        publisher_count,
        time_span_hours,
        estimated_lambda: posts.len() as f64 / time_span_hours,
        daily_counts,
    })
}

/// Writes a header row and data rows as CSV with LF line endings.
pub fn write_table<W, I, R>(out: W, header: &[&str], rows: I) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv_writer(out);
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        let row: Vec<String> = row.into_iter().collect();
        if row.len() != header.len() {
            return Err(VoaError::invalid("row width differs from header"));
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_curve_csv<W: Write>(out: W, curve: &crate::simulator::VoaCurve) -> Result<()> {
    let header = [
        curve.abscissa_kind.column_name(),
        "model_voa",
        "sim_mean",
        "sim_std",
        "rounds",
    ];
    let rows = curve.points.iter().map(|p| {
        vec![
            p.abscissa.to_string(),
            p.model_voa.to_string(),
            p.mean_voa.to_string(),
            p.std_voa.to_string(),
            p.rounds.to_string(),
        ]
    });
    write_table(out, &header, rows)
}

pub fn write_ecdf_csv<W: Write>(out: W, ecdf: &crate::analytics::ViewerEcdf) -> Result<()> {
    let rows = ecdf.points.iter().map(|(c, f)| vec![c.to_string(), f.to_string()]);
    write_table(out, &["viewer_count", "cumulative_fraction"], rows)
}

pub fn write_daily_counts_csv<W: Write>(out: W, meta: &TraceMeta) -> Result<()> {
    let rows = meta
        .daily_counts
        .iter()
        .map(|d| vec![d.day.to_string(), d.posts.to_string()]);
    write_table(out, &["day", "posts"], rows)
}
