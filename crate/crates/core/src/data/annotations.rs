//! Segment annotations: CSV parsing, rasterization to per-frame labels and
//! the inverse run-length extraction.
//!
//! ```text
//! video_id,start_frame,end_frame,label
//! 001-001,0,99,outside
//! 001-001,100,1450,insertion
//! ```
//!
//! Frame indices are at the video's original frame rate and `end_frame` is
//! inclusive. The segments of each video must tile `[0, T)` with no gaps or
//! overlaps.

use serde::{Deserialize, Serialize};

use super::LabelClass;
use crate::error::{Error, Result};

pub const ANNOTATION_HEADER: [&str; 4] = ["video_id", "start_frame", "end_frame", "label"];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentAnnotation {
    pub video_id: String,
    pub start_frame: u64,
    /// Inclusive.
    pub end_frame: u64,
    pub label: LabelClass,
}

impl SegmentAnnotation {
    pub fn frames(&self) -> u64 {
        self.end_frame - self.start_frame + 1
    }
}

fn parse_error(line: u64, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

/// Parses and validates an annotation document.
///
/// Segments come back grouped by video in order of first appearance and
/// sorted by start frame within a video.
pub fn parse_annotations(document: &str) -> Result<Vec<SegmentAnnotation>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(document.as_bytes());
    let header = reader.headers().map_err(|e| parse_error(1, format!("unreadable header: {e}")))?.clone();
    if header.iter().collect::<Vec<_>>() != ANNOTATION_HEADER {
        return Err(parse_error(1, format!("expected header {:?}", ANNOTATION_HEADER.join(","))));
    }

    // (segment, line) grouped per video
    let mut videos: Vec<(String, Vec<(SegmentAnnotation, u64)>)> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_error(line, format!("malformed row: {e}"))
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 4 {
            return Err(parse_error(line, format!("malformed row: expected 4 fields, found {}", record.len())));
        }
        let video_id = record[0].to_string();
        if video_id.is_empty() {
            return Err(parse_error(line, "malformed row: empty video_id"));
        }
        let frame = |i: usize| {
            record[i].parse::<u64>().map_err(|_| {
                parse_error(
                    line,
                    format!("malformed row: {} {:?} is not a frame index", ANNOTATION_HEADER[i], &record[i]),
                )
            })
        };
        let (start_frame, end_frame) = (frame(1)?, frame(2)?);
        if start_frame > end_frame {
            return Err(parse_error(line, format!("malformed row: start {start_frame} after end {end_frame}")));
        }
        let label = LabelClass::from_name(&record[3])
            .ok_or_else(|| parse_error(line, format!("unknown label {:?}", &record[3])))?;
        let seg = SegmentAnnotation { video_id: video_id.clone(), start_frame, end_frame, label };
        match videos.iter_mut().find(|(id, _)| *id == video_id) {
            Some((_, segs)) => segs.push((seg, line)),
            None => videos.push((video_id, vec![(seg, line)])),
        }
    }

    let mut out = Vec::new();
    for (video_id, mut segs) in videos {
        segs.sort_by_key(|(s, line)| (s.start_frame, *line));
        let (first, first_line) = &segs[0];
        if first.start_frame != 0 {
            return Err(parse_error(
                *first_line,
                format!("gap: video {video_id} starts at frame {} instead of 0", first.start_frame),
            ));
        }
        for pair in segs.windows(2) {
            let ((a, la), (b, lb)) = (&pair[0], &pair[1]);
            if b.start_frame <= a.end_frame {
                return Err(parse_error(
                    *lb,
                    format!(
                        "overlap: segment [{}, {}] on line {lb} overlaps [{}, {}] on line {la}",
                        b.start_frame, b.end_frame, a.start_frame, a.end_frame
                    ),
                ));
            }
            if b.start_frame > a.end_frame + 1 {
                return Err(parse_error(
                    *lb,
                    format!(
                        "gap: frames {}..{} of video {video_id} are unannotated (between lines {la} and {lb})",
                        a.end_frame + 1,
                        b.start_frame - 1
                    ),
                ));
            }
        }
        out.extend(segs.into_iter().map(|(s, _)| s));
    }
    Ok(out)
}

/// Serializes segments in the format accepted by [`parse_annotations`].
pub fn write_annotations(segments: &[SegmentAnnotation]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(ANNOTATION_HEADER).expect("in-memory write");
    for s in segments {
        w.write_record([s.video_id.as_str(), &s.start_frame.to_string(), &s.end_frame.to_string(), s.label.name()])
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("UTF-8 input")
}

/// Per-frame labels of one video whose segments tile `[0, frames)`.
pub fn rasterize(segments: &[SegmentAnnotation], frames: usize) -> Result<Vec<LabelClass>> {
    let mut labels = Vec::with_capacity(frames);
    for s in segments {
        if s.start_frame != labels.len() as u64 || s.end_frame < s.start_frame {
            return Err(Error::data(format!(
                "segment [{}, {}] does not continue the coverage at frame {}",
                s.start_frame,
                s.end_frame,
                labels.len()
            )));
        }
        if s.end_frame >= frames as u64 {
            return Err(Error::data(format!(
                "segment [{}, {}] extends past the last frame {}",
                s.start_frame,
                s.end_frame,
                frames as i64 - 1
            )));
        }
        labels.resize(s.end_frame as usize + 1, s.label);
    }
    if labels.len() != frames {
        return Err(Error::data(format!("segments cover {} of {frames} frames", labels.len())));
    }
    Ok(labels)
}

/// Maximal runs of equal labels, the inverse of [`rasterize`].
pub fn segmentize(video_id: &str, labels: &[LabelClass]) -> Vec<SegmentAnnotation> {
    let mut out: Vec<SegmentAnnotation> = Vec::new();
    for (t, &label) in labels.iter().enumerate() {
        match out.last_mut() {
            Some(s) if s.label == label => s.end_frame = t as u64,
            _ => out.push(SegmentAnnotation {
                video_id: video_id.to_string(),
                start_frame: t as u64,
                end_frame: t as u64,
                label,
            }),
        }
    }
    out
}

/// Segments of one video out of a multi-video annotation list.
pub fn segments_for(segments: &[SegmentAnnotation], video_id: &str) -> Vec<SegmentAnnotation> {
    segments.iter().filter(|s| s.video_id == video_id).cloned().collect()
}
