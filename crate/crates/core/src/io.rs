//! On-disk formats.
//!
//! | file        | layout                                                            |
//! |-------------|-------------------------------------------------------------------|
//! | image       | binary PGM (`P5`) or PPM (`P6`), maxval 255                        |
//! | label map   | `"MCGL"`, version `u8 = 1`, `H: u32`, `W: u32`, `H*W` x `u32` (LE)  |
//! | contour map | `"MCGC"`, version `u8 = 1`, `H: u32`, `W: u32`, `(2H-1)(2W-1)` x `f32` |
//! | hierarchy   | a label-map file followed by UTF-8 JSON `{"merges":[...]}`         |
//! | proposals   | JSON lines `{"hierarchy","nodes","rank","score"}`                  |
//!
//! Writes go through a temporary file in the destination directory and are
//! renamed into place.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::contour::ContourMap;
use crate::error::{format, McgError, Result};
use crate::grid::Dims;
use crate::hierarchy::{Merge, Ucm};
use crate::image::{Image, InstanceGroundTruth, LabelMap};

const LABEL_MAGIC: &[u8; 4] = b"MCGL";
const CONTOUR_MAGIC: &[u8; 4] = b"MCGC";
const VERSION: u8 = 1;

fn truncated(what: &str) -> McgError {
    McgError::Io(io::Error::new(io::ErrorKind::UnexpectedEof, format!("truncated {what}")))
}

/// Writes `bytes` to `path` atomically (temp file + rename).
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

// ---------------------------------------------------------------- PGM / PPM

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn header_number(&mut self) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return format("malformed PNM header: expected a number");
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| McgError::Format("malformed PNM header: number out of range".into()))
    }
}

pub fn decode_pnm(bytes: &[u8]) -> Result<Image> {
    let channels = match bytes.get(..2) {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        _ => return format("not a binary PGM (P5) or PPM (P6) file"),
    };
    let mut cur = Cursor { bytes, pos: 2 };
    let width = cur.header_number()?;
    let height = cur.header_number()?;
    let maxval = cur.header_number()?;
    if maxval != 255 {
        return format(format!("unsupported maxval {maxval}, only 255 is accepted"));
    }
    if width == 0 || height == 0 {
        return format("image has zero size");
    }
    match bytes.get(cur.pos) {
        Some(c) if c.is_ascii_whitespace() => cur.pos += 1,
        _ => return format("malformed PNM header: missing separator before payload"),
    }
    let need = width * height * channels;
    let payload = bytes.get(cur.pos..cur.pos + need).ok_or_else(|| truncated("PNM payload"))?;
    let data = payload.iter().map(|&b| f64::from(b) / 255.0).collect();
    Image::new(Dims::new(height, width), channels, data)
}

pub fn encode_pnm(img: &Image) -> Vec<u8> {
    let magic = if img.channels == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{} {}\n255\n", img.dims.width, img.dims.height).into_bytes();
    out.extend(img.data.iter().map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8));
    out
}

pub fn load_image(path: &Path) -> Result<Image> {
    decode_pnm(&fs::read(path)?)
}

pub fn save_image(img: &Image, path: &Path) -> Result<()> {
    write_atomic(path, &encode_pnm(img))
}

// ---------------------------------------------------------------- binary grids

fn read_header(bytes: &[u8], magic: &[u8; 4], what: &str) -> Result<Dims> {
    if bytes.len() < 4 || &bytes[..4] != magic {
        return format(format!("bad {what} magic"));
    }
    if bytes.len() < 13 {
        return Err(truncated(&format!("{what} header")));
    }
    if bytes[4] != VERSION {
        return format(format!("unsupported {what} version {}", bytes[4]));
    }
    let h = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
    let w = u32::from_le_bytes(bytes[9..13].try_into().unwrap()) as usize;
    Ok(Dims::new(h, w))
}

fn write_header(out: &mut Vec<u8>, magic: &[u8; 4], dims: Dims) {
    out.extend_from_slice(magic);
    out.push(VERSION);
    out.extend_from_slice(&(dims.height as u32).to_le_bytes());
    out.extend_from_slice(&(dims.width as u32).to_le_bytes());
}

pub fn encode_labelmap(map: &LabelMap) -> Vec<u8> {
    let mut out = Vec::with_capacity(13 + 4 * map.labels.len());
    write_header(&mut out, LABEL_MAGIC, map.dims);
    for l in &map.labels {
        out.extend_from_slice(&l.to_le_bytes());
    }
    out
}

/// Decodes a label map and returns it with the number of bytes consumed.
pub fn decode_labelmap(bytes: &[u8]) -> Result<(LabelMap, usize)> {
    let dims = read_header(bytes, LABEL_MAGIC, "label map")?;
    let end = 13 + 4 * dims.len();
    let payload = bytes.get(13..end).ok_or_else(|| truncated("label map payload"))?;
    let labels = payload
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((LabelMap::new(dims, labels)?, end))
}

pub fn save_labelmap(map: &LabelMap, path: &Path) -> Result<()> {
    write_atomic(path, &encode_labelmap(map))
}

pub fn load_labelmap(path: &Path) -> Result<LabelMap> {
    Ok(decode_labelmap(&fs::read(path)?)?.0)
}

pub fn encode_contour(cm: &ContourMap) -> Vec<u8> {
    let mut out = Vec::with_capacity(13 + 4 * cm.strength.len());
    write_header(&mut out, CONTOUR_MAGIC, cm.dims);
    for &s in &cm.strength {
        out.extend_from_slice(&(s as f32).to_le_bytes());
    }
    out
}

pub fn decode_contour(bytes: &[u8]) -> Result<ContourMap> {
    let dims = read_header(bytes, CONTOUR_MAGIC, "contour map")?;
    let end = 13 + 4 * dims.contour_len();
    let payload = bytes.get(13..end).ok_or_else(|| truncated("contour map payload"))?;
    let strength = payload
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
        .collect();
    ContourMap::new(dims, strength)
}

pub fn save_contour(cm: &ContourMap, path: &Path) -> Result<()> {
    write_atomic(path, &encode_contour(cm))
}

pub fn load_contour(path: &Path) -> Result<ContourMap> {
    decode_contour(&fs::read(path)?)
}

/// Instance ground truth from a label-map file or a `P5` PGM whose grey
/// values are instance ids.
pub fn load_ground_truth(path: &Path) -> Result<InstanceGroundTruth> {
    let bytes = fs::read(path)?;
    if bytes.starts_with(LABEL_MAGIC) {
        let (map, _) = decode_labelmap(&bytes)?;
        return InstanceGroundTruth::new(map.dims, map.labels);
    }
    if bytes.starts_with(b"P5") {
        let img = decode_pnm(&bytes)?;
        let ids = img.data.iter().map(|v| (v * 255.0).round() as u32).collect();
        return InstanceGroundTruth::new(img.dims, ids);
    }
    format(format!("{}: ground truth must be an MCGL label map or a P5 PGM", path.display()))
}

pub fn save_ground_truth(gt: &InstanceGroundTruth, path: &Path) -> Result<()> {
    save_labelmap(&LabelMap { dims: gt.dims, labels: gt.ids.clone() }, path)
}

// ---------------------------------------------------------------- hierarchies

#[derive(Serialize, Deserialize)]
struct MergeList {
    merges: Vec<Merge>,
}

pub fn encode_ucm(u: &Ucm) -> Result<Vec<u8>> {
    let mut out = encode_labelmap(u.finest());
    serde_json::to_writer(&mut out, &MergeList { merges: u.merges().to_vec() })?;
    Ok(out)
}

pub fn decode_ucm(bytes: &[u8]) -> Result<Ucm> {
    let (finest, used) = decode_labelmap(bytes)?;
    let list: MergeList = serde_json::from_slice(&bytes[used..])
        .map_err(|e| McgError::Format(format!("hierarchy merge list: {e}")))?;
    Ucm::new(finest, list.merges)
}

pub fn save_ucm(u: &Ucm, path: &Path) -> Result<()> {
    write_atomic(path, &encode_ucm(u)?)
}

pub fn load_ucm(path: &Path) -> Result<Ucm> {
    decode_ucm(&fs::read(path)?)
}

// ---------------------------------------------------------------- proposals

/// One line of a proposals file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalRecord {
    pub hierarchy: usize,
    pub nodes: Vec<usize>,
    pub rank: usize,
    pub score: Option<f64>,
}

pub fn encode_proposals(records: &[ProposalRecord]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.push(b'\n');
    }
    Ok(out)
}

pub fn decode_proposals(text: &str) -> Result<Vec<ProposalRecord>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map_err(|e| McgError::Format(format!("proposal line {}: {e}", i + 1)))
        })
        .collect()
}

pub fn save_proposals(records: &[ProposalRecord], path: &Path) -> Result<()> {
    write_atomic(path, &encode_proposals(records)?)
}

pub fn load_proposals(path: &Path) -> Result<Vec<ProposalRecord>> {
    decode_proposals(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn loads_p5_scaled_to_unit_range() {
        let img = decode_pnm(b"P5\n2 2\n255\n\x00\xff\x00\xff").unwrap();
        assert_eq!(img.channels, 1);
        assert_eq!(img.dims, Dims::new(2, 2));
        assert_eq!(img.data, vec![0.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn loads_p6_with_comment() {
        let img = decode_pnm(b"P6\n# red\n1 1\n255\n\xff\x00\x00").unwrap();
        assert_eq!(img.channels, 3);
        assert_eq!(img.data, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn truncated_payload_is_io_error() {
        let mut bytes = b"P5\n4 4\n255\n".to_vec();
        bytes.extend_from_slice(&[7; 8]);
        assert!(matches!(decode_pnm(&bytes), Err(McgError::Io(_))));
    }

    #[test]
    fn malformed_header_is_format_error() {
        assert!(matches!(decode_pnm(b"P3\n1 1\n255\n0"), Err(McgError::Format(_))));
        assert!(matches!(decode_pnm(b"P5\nx 1\n255\n\x00"), Err(McgError::Format(_))));
        assert!(matches!(decode_pnm(b"P5\n1 1\n65535\n\x00\x00"), Err(McgError::Format(_))));
    }

    #[test]
    fn labelmap_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.mcgl");
        let m = LabelMap::new(Dims::new(3, 3), vec![0, 0, 1, 0, 2, 1, 2, 2, 1]).unwrap();
        save_labelmap(&m, &path).unwrap();
        assert_eq!(load_labelmap(&path).unwrap(), m);
    }

    #[test]
    fn labelmap_bad_magic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad");
        fs::write(&path, b"XXXX\x01\x01\x00\x00\x00\x01\x00\x00\x00\x00\x00\x00\x00").unwrap();
        assert!(matches!(load_labelmap(&path), Err(McgError::Format(_))));
    }

    #[test]
    fn single_pixel_labelmap_byte_layout() {
        // magic 4 + version 1 + height 4 + width 4 + one label 4
        let bytes = encode_labelmap(&LabelMap::constant(Dims::new(1, 1)));
        assert_eq!(bytes.len(), 17);
        assert_eq!(&bytes[..5], b"MCGL\x01");
        assert_eq!(&bytes[5..13], &[1, 0, 0, 0, 1, 0, 0, 0]);
    }

    #[test]
    fn contour_file_layout() {
        let cm = ContourMap::from_edges(Dims::new(2, 3), |e| e.a as f64 / 8.0);
        let bytes = encode_contour(&cm);
        assert_eq!(bytes.len(), 13 + 4 * 3 * 5);
        assert_eq!(decode_contour(&bytes).unwrap(), cm);
    }

    #[test]
    fn proposals_lines() {
        let recs = vec![
            ProposalRecord { hierarchy: 0, nodes: vec![6], rank: 0, score: None },
            ProposalRecord { hierarchy: 1, nodes: vec![1, 2], rank: 1, score: Some(0.25) },
        ];
        let bytes = encode_proposals(&recs).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            r#"{"hierarchy":0,"nodes":[6],"rank":0,"score":null}"#
        );
        assert_eq!(decode_proposals(&text).unwrap(), recs);
    }

    proptest! {
        #[test]
        fn labelmap_bytes_round_trip(h in 1usize..6, w in 1usize..6, seed in any::<u64>()) {
            let labels = (0..h * w).map(|i| ((seed >> (i % 60)) & 7) as u32).collect();
            let m = LabelMap::new(Dims::new(h, w), labels).unwrap();
            let (back, used) = decode_labelmap(&encode_labelmap(&m)).unwrap();
            prop_assert_eq!(used, 13 + 4 * h * w);
            prop_assert_eq!(back, m);
        }

        #[test]
        fn pnm_round_trip_is_exact_on_quantized_values(bytes in prop::collection::vec(any::<u8>(), 12)) {
            let data: Vec<f64> = bytes.iter().map(|&b| f64::from(b) / 255.0).collect();
            let img = Image::new(Dims::new(2, 2), 3, data).unwrap();
            prop_assert_eq!(decode_pnm(&encode_pnm(&img)).unwrap(), img);
        }
    }
}
