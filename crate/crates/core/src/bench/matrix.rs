use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::grid::{table1_avg_kbps, table1_grid, AudioCodec, CodecParams, VideoCodec};
use super::BenchError;
use crate::text::compression_ratio;

/// Content id used for the per-parameter averages row.
pub const AVERAGE_ID: &str = "average";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodeResult {
    pub content_id: String,
    pub params: CodecParams,
    /// From packet sizes of the video stream.
    pub video_bps: f64,
    /// From packet sizes of the audio stream.
    pub audio_bps: f64,
    /// From the size of the whole file, container included.
    pub total_bps: f64,
    pub file_bytes: u64,
    pub duration_ms: u64,
}

impl EncodeResult {
    /// Relative gap between the file-size bitrate and the stream sums.
    pub fn container_overhead(&self) -> f64 {
        let streams = self.video_bps + self.audio_bps;
        (self.total_bps - streams).abs() / streams
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum Outcome {
    Ok(EncodeResult),
    Skipped { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixEntry {
    pub content_id: String,
    pub params: CodecParams,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkMatrix {
    pub entries: Vec<MatrixEntry>,
    /// Payload bitrate of the txt2vid encode of each content, if known.
    pub txt2vid_bps: BTreeMap<String, f64>,
    /// Transcoder version and argument templates, for reproducibility.
    pub metadata: BTreeMap<String, String>,
}

impl BenchmarkMatrix {
    pub fn results(&self) -> impl Iterator<Item = &EncodeResult> {
        self.entries.iter().filter_map(|e| match &e.outcome {
            Outcome::Ok(r) => Some(r),
            Outcome::Skipped { .. } => None,
        })
    }

    pub fn skipped(&self) -> usize {
        self.entries.iter().filter(|e| matches!(e.outcome, Outcome::Skipped { .. })).count()
    }

    /// One row per entry, then one averages row per parameter set that has
    /// at least one successful encode.
    pub fn rows(&self) -> Vec<MatrixRow> {
        let mut rows: Vec<MatrixRow> = self
            .entries
            .iter()
            .map(|e| {
                let mut row = MatrixRow::skeleton(&e.content_id, &e.params);
                match &e.outcome {
                    Outcome::Ok(r) => {
                        row.status = "ok".into();
                        row.video_bps = Some(r.video_bps);
                        row.audio_bps = Some(r.audio_bps);
                        row.total_bps = Some(r.total_bps);
                        row.file_bytes = Some(r.file_bytes);
                        row.duration_ms = Some(r.duration_ms);
                    }
                    Outcome::Skipped { reason } => {
                        row.status = "skipped".into();
                        row.note = reason.clone();
                    }
                }
                row.txt2vid_bps = self.txt2vid_bps.get(&e.content_id).copied();
                row.fill_ratio();
                row
            })
            .collect();
        rows.extend(self.averages());
        rows
    }

    /// Mean combined bitrate across contents for each parameter set, the
    /// same quantity as the table's average column.
    pub fn averages(&self) -> Vec<MatrixRow> {
        let mut order: Vec<CodecParams> = Vec::new();
        let mut sums: BTreeMap<CodecParams, (f64, f64, f64, usize, f64, usize)> = BTreeMap::new();
        for r in self.results() {
            if !order.contains(&r.params) {
                order.push(r.params);
            }
            let s = sums.entry(r.params).or_default();
            s.0 += r.video_bps;
            s.1 += r.audio_bps;
            s.2 += r.total_bps;
            s.3 += 1;
            if let Some(t) = self.txt2vid_bps.get(&r.content_id) {
                s.4 += t;
                s.5 += 1;
            }
        }
        order
            .into_iter()
            .map(|p| {
                let (v, a, t, n, tx, ntx) = sums[&p];
                let n = n as f64;
                let mut row = MatrixRow::skeleton(AVERAGE_ID, &p);
                row.status = "ok".into();
                row.video_bps = Some(v / n);
                row.audio_bps = Some(a / n);
                row.total_bps = Some(t / n);
                row.txt2vid_bps = (ntx > 0).then(|| tx / ntx as f64);
                row.fill_ratio();
                row
            })
            .collect()
    }
}

/// Flat row as written to CSV and JSON. Missing values stay empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixRow {
    pub content_id: String,
    pub video_codec: VideoCodec,
    pub crf: u8,
    pub ds_video: u8,
    pub audio_codec: AudioCodec,
    pub audio_br_kbps: u8,
    pub ds_audio: u8,
    pub status: String,
    pub video_bps: Option<f64>,
    pub audio_bps: Option<f64>,
    pub total_bps: Option<f64>,
    pub file_bytes: Option<u64>,
    pub duration_ms: Option<u64>,
    pub txt2vid_bps: Option<f64>,
    pub ratio: Option<f64>,
    pub note: String,
}

impl MatrixRow {
    fn skeleton(content_id: &str, p: &CodecParams) -> Self {
        Self {
            content_id: content_id.to_string(),
            video_codec: p.video_codec,
            crf: p.crf,
            ds_video: p.ds_video,
            audio_codec: p.audio_codec,
            audio_br_kbps: p.audio_br_kbps,
            ds_audio: p.ds_audio,
            status: String::new(),
            video_bps: None,
            audio_bps: None,
            total_bps: None,
            file_bytes: None,
            duration_ms: None,
            txt2vid_bps: None,
            ratio: None,
            note: String::new(),
        }
    }

    pub fn params(&self) -> CodecParams {
        CodecParams {
            video_codec: self.video_codec,
            crf: self.crf,
            ds_video: self.ds_video,
            audio_codec: self.audio_codec,
            audio_br_kbps: self.audio_br_kbps,
            ds_audio: self.ds_audio,
        }
    }

    fn fill_ratio(&mut self) {
        self.ratio = match (self.total_bps, self.txt2vid_bps) {
            (Some(c), Some(t)) => compression_ratio(c, t).ok(),
            _ => None,
        };
    }
}

/// The table's own average bitrates as matrix rows.
pub fn table1_reference_rows() -> Vec<MatrixRow> {
    table1_grid()
        .iter()
        .zip(table1_avg_kbps())
        .map(|(p, kbps)| {
            let mut row = MatrixRow::skeleton(AVERAGE_ID, p);
            row.status = "ok".into();
            row.total_bps = Some(kbps * 1000.0);
            row.note = "reference".into();
            row
        })
        .collect()
}

/// Sets every row's txt2vid rate and ratio. Rows without a total keep an
/// empty ratio.
pub fn with_ratios(rows: &[MatrixRow], txt2vid_bps: f64) -> Result<Vec<MatrixRow>, BenchError> {
    if !(txt2vid_bps.is_finite() && txt2vid_bps > 0.0) {
        return Err(BenchError::BadInput(format!("txt2vid bps must be positive, got {txt2vid_bps}")));
    }
    Ok(rows
        .iter()
        .cloned()
        .map(|mut r| {
            r.txt2vid_bps = Some(txt2vid_bps);
            r.fill_ratio();
            r
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFormat {
    Csv,
    Json,
}

impl MatrixFormat {
    /// Picks JSON for a `.json` path, CSV otherwise.
    pub fn from_path(path: &std::path::Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => MatrixFormat::Json,
            _ => MatrixFormat::Csv,
        }
    }
}

pub fn write_rows<W: Write>(rows: &[MatrixRow], format: MatrixFormat, out: W) -> Result<(), BenchError> {
    match format {
        MatrixFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            for r in rows {
                w.serialize(r)?;
            }
            w.flush()?;
        }
        MatrixFormat::Json => serde_json::to_writer_pretty(out, rows)?,
    }
    Ok(())
}

pub fn read_rows<R: Read>(format: MatrixFormat, input: R) -> Result<Vec<MatrixRow>, BenchError> {
    match format {
        MatrixFormat::Csv => {
            let mut r = csv::Reader::from_reader(input);
            Ok(r.deserialize().collect::<Result<_, _>>()?)
        }
        MatrixFormat::Json => Ok(serde_json::from_reader(input)?),
    }
}

/// Writes the matrix rows (with averages) to `path`; the format follows
/// the extension. Metadata goes to a `<path>.meta.json` sidecar.
pub fn emit_matrix(matrix: &BenchmarkMatrix, path: &std::path::Path) -> Result<(), BenchError> {
    if matrix.entries.is_empty() {
        return Err(BenchError::BadInput("matrix is empty".into()));
    }
    let f = std::fs::File::create(path)?;
    write_rows(&matrix.rows(), MatrixFormat::from_path(path), std::io::BufWriter::new(f))?;
    let mut meta = path.as_os_str().to_owned();
    meta.push(".meta.json");
    std::fs::write(meta, serde_json::to_vec_pretty(&matrix.metadata)?)?;
    Ok(())
}

pub fn load_matrix(path: &std::path::Path) -> Result<Vec<MatrixRow>, BenchError> {
    let f = std::fs::File::open(path)?;
    read_rows(MatrixFormat::from_path(path), std::io::BufReader::new(f))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(content: &str, p: CodecParams, total: f64) -> MatrixEntry {
        MatrixEntry {
            content_id: content.into(),
            params: p,
            outcome: Outcome::Ok(EncodeResult {
                content_id: content.into(),
                params: p,
                video_bps: total * 0.7,
                audio_bps: total * 0.25,
                total_bps: total,
                file_bytes: (total * 10.0 / 8.0) as u64,
                duration_ms: 10_000,
            }),
        }
    }

    #[test]
    fn single_row_ratio() {
        let p = table1_grid()[0];
        let m = BenchmarkMatrix {
            entries: vec![result("a", p, 17_500.0)],
            txt2vid_bps: [("a".to_string(), 85.0)].into(),
            ..Default::default()
        };
        let rows = m.rows();
        assert!((rows[0].ratio.unwrap() - 205.882).abs() < 1e-3);
    }

    #[test]
    fn ratio_empty_without_txt2vid() {
        let p = table1_grid()[0];
        let m = BenchmarkMatrix {
            entries: vec![result("a", p, 17_500.0)],
            ..Default::default()
        };
        let mut buf = Vec::new();
        write_rows(&m.rows(), MatrixFormat::Csv, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let first = text.lines().nth(1).unwrap();
        assert!(first.ends_with(",,,"), "{first}");
    }

    #[test]
    fn averages_across_contents() {
        let g = table1_grid();
        let m = BenchmarkMatrix {
            entries: vec![
                result("a", g[0], 10_000.0),
                result("b", g[0], 20_000.0),
                MatrixEntry {
                    content_id: "a".into(),
                    params: g[8],
                    outcome: Outcome::Skipped { reason: "no av1".into() },
                },
            ],
            ..Default::default()
        };
        let avg = m.averages();
        assert_eq!(avg.len(), 1);
        assert_eq!(avg[0].total_bps, Some(15_000.0));
        assert_eq!(m.skipped(), 1);
        assert_eq!(m.rows().len(), 4);
    }

    #[test]
    fn csv_and_json_agree() {
        let g = table1_grid();
        let m = BenchmarkMatrix {
            entries: vec![
                result("a", g[0], 12_345.678),
                MatrixEntry {
                    content_id: "a".into(),
                    params: g[9],
                    outcome: Outcome::Skipped { reason: "x".into() },
                },
            ],
            txt2vid_bps: [("a".to_string(), 72.5)].into(),
            ..Default::default()
        };
        let rows = m.rows();
        let mut c = Vec::new();
        let mut j = Vec::new();
        write_rows(&rows, MatrixFormat::Csv, &mut c).unwrap();
        write_rows(&rows, MatrixFormat::Json, &mut j).unwrap();
        let from_csv = read_rows(MatrixFormat::Csv, &c[..]).unwrap();
        let from_json = read_rows(MatrixFormat::Json, &j[..]).unwrap();
        assert_eq!(from_csv, rows);
        assert_eq!(from_json, rows);
    }

    #[test]
    fn bad_txt2vid_rate() {
        assert!(with_ratios(&table1_reference_rows(), 0.0).is_err());
    }
}
