//! Single-file NRRD reader/writer for 3D axis-aligned label volumes.
//!
//! Supported: magic versions 1..=5, `dimension: 3`, sample types
//! uint8/uint16/int16/float, raw or ascii encodings (gzip with the `gzip`
//! feature). Key/value pairs (`key:=value`) are kept verbatim, which is where
//! 3D Slicer stores its `SegmentN_*` metadata.

use super::{Grid, LabelVolume, Segment, SegmentTable, VolumeError};
use std::fmt::Write as _;
use std::path::Path;

const AXIS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleType {
    U8,
    U16,
    I16,
    F32,
}

impl SampleType {
    pub fn size(self) -> usize {
        match self {
            SampleType::U8 => 1,
            SampleType::U16 | SampleType::I16 => 2,
            SampleType::F32 => 4,
        }
    }

    fn parse(s: &str) -> Result<Self, VolumeError> {
        let norm = s.split_whitespace().collect::<Vec<_>>().join(" ").to_ascii_lowercase();
        Ok(match norm.as_str() {
            "uchar" | "unsigned char" | "uint8" | "uint8_t" => SampleType::U8,
            "ushort" | "unsigned short" | "unsigned short int" | "uint16" | "uint16_t" => {
                SampleType::U16
            }
            "short" | "short int" | "signed short" | "signed short int" | "int16" | "int16_t" => {
                SampleType::I16
            }
            "float" => SampleType::F32,
            _ => return Err(VolumeError::UnsupportedType(s.to_string())),
        })
    }

    fn name(self) -> &'static str {
        match self {
            SampleType::U8 => "unsigned char",
            SampleType::U16 => "unsigned short",
            SampleType::I16 => "short",
            SampleType::F32 => "float",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Encoding {
    Raw,
    Ascii,
    Gzip,
}

impl Encoding {
    fn parse(s: &str) -> Result<Self, VolumeError> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "raw" => Encoding::Raw,
            "ascii" | "text" | "txt" => Encoding::Ascii,
            "gzip" | "gz" => Encoding::Gzip,
            _ => return Err(VolumeError::UnsupportedEncoding(s.to_string())),
        })
    }

    fn name(self) -> &'static str {
        match self {
            Encoding::Raw => "raw",
            Encoding::Ascii => "ascii",
            Encoding::Gzip => "gzip",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endianness {
    Little,
    Big,
}

/// Parsed NRRD header.
///
/// `space_directions[a]` is the world-space step vector of axis `a`.
/// `custom_fields` holds `key:=value` pairs in file order; `unknown_fields`
/// holds `field: value` lines this reader does not interpret (`kinds`,
/// `measurement frame`, ...) so they survive a rewrite.
#[derive(Debug, Clone, PartialEq)]
pub struct NrrdHeader {
    pub version: u8,
    pub dimension: usize,
    pub sizes: Vec<usize>,
    pub sample_type: SampleType,
    pub encoding: Encoding,
    pub endian: Endianness,
    pub space: Option<String>,
    pub space_directions: [[f64; 3]; 3],
    pub space_origin: [f64; 3],
    pub custom_fields: Vec<(String, String)>,
    pub unknown_fields: Vec<(String, String)>,
}

impl NrrdHeader {
    pub fn dims(&self) -> [usize; 3] {
        [self.sizes[0], self.sizes[1], self.sizes[2]]
    }

    pub fn custom(&self, key: &str) -> Option<&str> {
        self.custom_fields.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn payload_len(&self) -> usize {
        self.sizes.iter().product::<usize>() * self.sample_type.size()
    }

    /// Serialized header text, including the terminating blank line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "NRRD000{}", self.version);
        let _ = writeln!(out, "type: {}", self.sample_type.name());
        let _ = writeln!(out, "dimension: {}", self.dimension);
        if let Some(space) = &self.space {
            let _ = writeln!(out, "space: {space}");
        }
        let sizes: Vec<String> = self.sizes.iter().map(|s| s.to_string()).collect();
        let _ = writeln!(out, "sizes: {}", sizes.join(" "));
        let dirs: Vec<String> = self.space_directions.iter().map(|d| fmt_vec(d)).collect();
        let _ = writeln!(out, "space directions: {}", dirs.join(" "));
        if self.sample_type.size() > 1 {
            let endian = match self.endian {
                Endianness::Little => "little",
                Endianness::Big => "big",
            };
            let _ = writeln!(out, "endian: {endian}");
        }
        let _ = writeln!(out, "encoding: {}", self.encoding.name());
        let _ = writeln!(out, "space origin: {}", fmt_vec(&self.space_origin));
        for (k, v) in &self.unknown_fields {
            let _ = writeln!(out, "{k}: {v}");
        }
        for (k, v) in &self.custom_fields {
            let _ = writeln!(out, "{k}:={v}");
        }
        out.push('\n');
        out
    }
}

fn fmt_vec(v: &[f64; 3]) -> String {
    format!("({},{},{})", v[0], v[1], v[2])
}

fn malformed(field: &str, msg: impl Into<String>) -> VolumeError {
    VolumeError::Malformed { field: field.to_string(), msg: msg.into() }
}

fn parse_vec3(field: &str, s: &str) -> Result<[f64; 3], VolumeError> {
    let inner = s
        .trim()
        .strip_prefix('(')
        .and_then(|t| t.strip_suffix(')'))
        .ok_or_else(|| malformed(field, format!("expected (x,y,z), found {s:?}")))?;
    let parts: Vec<&str> = inner.split(',').collect();
    if parts.len() != 3 {
        return Err(malformed(field, format!("expected 3 components, found {}", parts.len())));
    }
    let mut v = [0.0; 3];
    for (slot, p) in v.iter_mut().zip(parts) {
        *slot = p
            .trim()
            .parse::<f64>()
            .map_err(|e| malformed(field, format!("{p:?}: {e}")))?;
        if !slot.is_finite() {
            return Err(malformed(field, "non-finite component"));
        }
    }
    Ok(v)
}

/// Splits `bytes` into header text and payload offset.
fn split_header(bytes: &[u8]) -> Result<(&str, usize), VolumeError> {
    let mut pos = 0;
    while pos < bytes.len() {
        let end = match bytes[pos..].iter().position(|&b| b == b'\n') {
            Some(off) => pos + off,
            None => break,
        };
        let line = &bytes[pos..end];
        let line = line.strip_suffix(b"\r").unwrap_or(line);
        if line.is_empty() && pos > 0 {
            let text = std::str::from_utf8(&bytes[..pos])
                .map_err(|_| malformed("header", "header is not valid UTF-8"))?;
            return Ok((text, end + 1));
        }
        pos = end + 1;
    }
    // Header without a payload is still a header; the blank line is what
    // marks the payload start, so a missing one means no payload at all.
    let text = std::str::from_utf8(bytes).map_err(|_| malformed("header", "header is not valid UTF-8"))?;
    Ok((text, bytes.len()))
}

/// Parses the header portion of an NRRD byte stream.
pub fn parse_nrrd_header(bytes: &[u8]) -> Result<NrrdHeader, VolumeError> {
    parse_header_with_offset(bytes).map(|(h, _)| h)
}

fn parse_header_with_offset(bytes: &[u8]) -> Result<(NrrdHeader, usize), VolumeError> {
    let (text, payload_at) = split_header(bytes)?;
    let mut lines = text.lines();
    let magic = lines.next().unwrap_or("").trim_end_matches('\r');
    let version = magic
        .strip_prefix("NRRD000")
        .and_then(|v| v.parse::<u8>().ok())
        .filter(|v| (1..=5).contains(v))
        .ok_or_else(|| VolumeError::BadMagic(magic.chars().take(16).collect()))?;

    let mut dimension = None;
    let mut sizes = None;
    let mut sample_type = None;
    let mut encoding = Encoding::Raw;
    let mut endian = Endianness::Little;
    let mut space = None;
    let mut directions = None;
    let mut spacings = None;
    let mut origin = [0.0; 3];
    let mut custom_fields = Vec::new();
    let mut unknown_fields = Vec::new();

    for raw in lines {
        let line = raw.trim_end_matches('\r');
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some((k, v)) = line.split_once(":=") {
            custom_fields.push((k.to_string(), v.to_string()));
            continue;
        }
        let (key, value) = line
            .split_once(": ")
            .or_else(|| line.split_once(':'))
            .ok_or_else(|| malformed(line, "expected `field: value`"))?;
        let value = value.trim();
        let lower = key.trim().to_ascii_lowercase();
        match lower.as_str() {
            "type" => sample_type = Some(SampleType::parse(value)?),
            "dimension" => {
                dimension = Some(value.parse::<usize>().map_err(|e| malformed(key, e.to_string()))?)
            }
            "sizes" => {
                let parsed: Result<Vec<usize>, _> =
                    value.split_whitespace().map(|s| s.parse::<usize>()).collect();
                sizes = Some(parsed.map_err(|e| malformed(key, e.to_string()))?);
            }
            "encoding" => encoding = Encoding::parse(value)?,
            "endian" => {
                endian = match value.to_ascii_lowercase().as_str() {
                    "little" => Endianness::Little,
                    "big" => Endianness::Big,
                    _ => return Err(malformed(key, format!("unknown endianness {value:?}"))),
                }
            }
            "space" => space = Some(value.to_string()),
            "space directions" => {
                let vecs: Result<Vec<[f64; 3]>, _> =
                    value.split_whitespace().map(|t| parse_vec3(key, t)).collect();
                directions = Some(vecs?);
            }
            "spacings" => {
                let parsed: Result<Vec<f64>, _> =
                    value.split_whitespace().map(|s| s.parse::<f64>()).collect();
                spacings = Some(parsed.map_err(|e| malformed(key, e.to_string()))?);
            }
            "space origin" => origin = parse_vec3(key, value)?,
            "data file" | "datafile" => return Err(VolumeError::DetachedData),
            "line skip" | "lineskip" | "byte skip" | "byteskip" => {
                if value != "0" {
                    return Err(malformed(key, "nonzero skips are not supported"));
                }
            }
            _ => unknown_fields.push((key.to_string(), value.to_string())),
        }
    }

    let dimension = dimension.ok_or(VolumeError::MissingField("dimension"))?;
    if dimension != 3 {
        return Err(VolumeError::UnsupportedDimension(dimension));
    }
    let sizes = sizes.ok_or(VolumeError::MissingField("sizes"))?;
    if sizes.len() != 3 || sizes.iter().any(|&s| s == 0) {
        return Err(malformed("sizes", format!("expected 3 positive sizes, found {sizes:?}")));
    }
    let sample_type = sample_type.ok_or(VolumeError::MissingField("type"))?;

    let space_directions = match (directions, spacings) {
        (Some(d), _) => {
            if d.len() != 3 {
                return Err(malformed("space directions", "expected 3 vectors"));
            }
            [d[0], d[1], d[2]]
        }
        (None, Some(s)) => {
            if s.len() != 3 || s.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
                return Err(malformed("spacings", "expected 3 positive spacings"));
            }
            [[s[0], 0.0, 0.0], [0.0, s[1], 0.0], [0.0, 0.0, s[2]]]
        }
        (None, None) => [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
    };
    let mut off_diag: f64 = 0.0;
    for (a, dir) in space_directions.iter().enumerate() {
        for (b, &c) in dir.iter().enumerate() {
            if a != b {
                off_diag = off_diag.max(c.abs());
            }
        }
        if dir[a] == 0.0 {
            return Err(malformed("space directions", format!("axis {a} has zero length")));
        }
    }
    if off_diag > AXIS_TOL {
        return Err(VolumeError::NotAxisAligned(off_diag));
    }

    Ok((
        NrrdHeader {
            version,
            dimension,
            sizes,
            sample_type,
            encoding,
            endian,
            space,
            space_directions,
            space_origin: origin,
            custom_fields,
            unknown_fields,
        },
        payload_at,
    ))
}

fn decode_samples(header: &NrrdHeader, payload: &[u8]) -> Result<Vec<u16>, VolumeError> {
    if header.sample_type == SampleType::F32 {
        return Err(VolumeError::FloatLabels);
    }
    let count: usize = header.sizes.iter().product();
    match header.encoding {
        Encoding::Ascii => {
            let text = std::str::from_utf8(payload).map_err(|_| malformed("data", "ascii payload is not UTF-8"))?;
            let mut out = Vec::with_capacity(count);
            for tok in text.split_whitespace() {
                let v = tok.parse::<i64>().map_err(|e| malformed("data", format!("{tok:?}: {e}")))?;
                let max = match header.sample_type {
                    SampleType::U8 => u8::MAX as i64,
                    _ => u16::MAX as i64,
                };
                if !(0..=max).contains(&v) {
                    return Err(VolumeError::BadLabel(v));
                }
                out.push(v as u16);
            }
            if out.len() != count {
                return Err(VolumeError::PayloadLength { expected: count, found: out.len() });
            }
            Ok(out)
        }
        Encoding::Raw => decode_raw(header, payload),
        Encoding::Gzip => decode_raw(header, &gunzip(payload)?),
    }
}

#[cfg(feature = "gzip")]
fn gunzip(payload: &[u8]) -> Result<Vec<u8>, VolumeError> {
    use std::io::Read;
    let mut out = Vec::new();
    flate2::read::MultiGzDecoder::new(payload)
        .read_to_end(&mut out)
        .map_err(|e| malformed("data", format!("gzip: {e}")))?;
    Ok(out)
}

#[cfg(not(feature = "gzip"))]
fn gunzip(_payload: &[u8]) -> Result<Vec<u8>, VolumeError> {
    Err(VolumeError::GzipDisabled)
}

fn decode_raw(header: &NrrdHeader, payload: &[u8]) -> Result<Vec<u16>, VolumeError> {
    let expected = header.payload_len();
    if payload.len() != expected {
        return Err(VolumeError::PayloadLength { expected, found: payload.len() });
    }
    let big = header.endian == Endianness::Big;
    match header.sample_type {
        SampleType::U8 => Ok(payload.iter().map(|&b| b as u16).collect()),
        SampleType::U16 => Ok(payload
            .chunks_exact(2)
            .map(|c| if big { u16::from_be_bytes([c[0], c[1]]) } else { u16::from_le_bytes([c[0], c[1]]) })
            .collect()),
        SampleType::I16 => payload
            .chunks_exact(2)
            .map(|c| {
                let v = if big { i16::from_be_bytes([c[0], c[1]]) } else { i16::from_le_bytes([c[0], c[1]]) };
                u16::try_from(v).map_err(|_| VolumeError::BadLabel(v as i64))
            })
            .collect(),
        SampleType::F32 => Err(VolumeError::FloatLabels),
    }
}

fn segments_from_fields(header: &NrrdHeader) -> Result<SegmentTable, VolumeError> {
    let mut entries = Vec::new();
    for n in 0.. {
        let Some(name) = header.custom(&format!("Segment{n}_Name")) else {
            break;
        };
        let label_key = format!("Segment{n}_LabelValue");
        let label = header
            .custom(&label_key)
            .ok_or_else(|| VolumeError::Segments(format!("missing {label_key}")))?
            .trim()
            .parse::<u16>()
            .map_err(|e| VolumeError::Segments(format!("{label_key}: {e}")))?;
        let color = match header.custom(&format!("Segment{n}_Color")) {
            Some(c) => {
                let parts: Result<Vec<f64>, _> = c.split_whitespace().map(str::parse).collect();
                match parts {
                    Ok(p) if p.len() == 3 => Some([p[0], p[1], p[2]]),
                    _ => return Err(VolumeError::Segments(format!("Segment{n}_Color: {c:?}"))),
                }
            }
            None => None,
        };
        entries.push(Segment { name: name.to_string(), label, color });
    }
    SegmentTable::new(entries)
}

/// Decodes a complete NRRD byte stream into a label volume.
///
/// Negative axis directions are handled by reversing that axis in memory and
/// moving the origin to the first voxel in increasing world coordinate, so
/// the result always has positive spacing.
pub fn parse_label_volume(bytes: &[u8]) -> Result<(LabelVolume, SegmentTable), VolumeError> {
    let (header, offset) = parse_header_with_offset(bytes)?;
    let mut labels = decode_samples(&header, &bytes[offset..])?;
    let dims = header.dims();
    let mut spacing = [0.0; 3];
    let mut origin = header.space_origin;
    for a in 0..3 {
        let step = header.space_directions[a][a];
        spacing[a] = step.abs();
        if step < 0.0 {
            origin[a] += (dims[a] - 1) as f64 * step;
            flip_axis(&mut labels, dims, a);
        }
    }
    let volume = LabelVolume::new(Grid::new(dims, spacing, origin)?, labels)?;
    let segments = segments_from_fields(&header)?;
    Ok((volume, segments))
}

fn flip_axis(labels: &mut [u16], dims: [usize; 3], axis: usize) {
    let src = labels.to_vec();
    let [nx, ny, nz] = dims;
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let mut c = [i, j, k];
                c[axis] = dims[axis] - 1 - c[axis];
                labels[i + nx * (j + ny * k)] = src[c[0] + nx * (c[1] + ny * c[2])];
            }
        }
    }
}

pub fn load_label_volume(path: impl AsRef<Path>) -> Result<(LabelVolume, SegmentTable), VolumeError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| VolumeError::Io { path: path.into(), source })?;
    parse_label_volume(&bytes)
}

/// Header that `write_nrrd` emits for `volume`.
pub fn header_for(volume: &LabelVolume, segments: &SegmentTable) -> NrrdHeader {
    let g = &volume.grid;
    let wide = volume.labels.iter().any(|&l| l > u8::MAX as u16);
    let mut custom_fields = Vec::new();
    for (n, seg) in segments.entries.iter().enumerate() {
        custom_fields.push((format!("Segment{n}_Name"), seg.name.clone()));
        custom_fields.push((format!("Segment{n}_LabelValue"), seg.label.to_string()));
        if let Some(c) = seg.color {
            custom_fields.push((format!("Segment{n}_Color"), format!("{} {} {}", c[0], c[1], c[2])));
        }
    }
    NrrdHeader {
        version: 4,
        dimension: 3,
        sizes: g.dims.to_vec(),
        sample_type: if wide { SampleType::U16 } else { SampleType::U8 },
        encoding: Encoding::Raw,
        endian: Endianness::Little,
        space: Some("left-posterior-superior".to_string()),
        space_directions: [
            [g.spacing[0], 0.0, 0.0],
            [0.0, g.spacing[1], 0.0],
            [0.0, 0.0, g.spacing[2]],
        ],
        space_origin: g.origin,
        custom_fields,
        unknown_fields: vec![("kinds".to_string(), "domain domain domain".to_string())],
    }
}

/// Serializes a label volume: NRRD0004, raw little-endian, uint8 when every
/// label fits in a byte and uint16 otherwise.
pub fn write_nrrd_bytes(volume: &LabelVolume, segments: &SegmentTable) -> Result<Vec<u8>, VolumeError> {
    volume.grid.validate()?;
    segments.validate()?;
    let header = header_for(volume, segments);
    let mut out = header.to_text().into_bytes();
    match header.sample_type {
        SampleType::U8 => out.extend(volume.labels.iter().map(|&l| l as u8)),
        _ => {
            for &l in &volume.labels {
                out.extend_from_slice(&l.to_le_bytes());
            }
        }
    }
    Ok(out)
}

pub fn write_nrrd(volume: &LabelVolume, segments: &SegmentTable, path: impl AsRef<Path>) -> Result<(), VolumeError> {
    let path = path.as_ref();
    let bytes = write_nrrd_bytes(volume, segments)?;
    std::fs::write(path, bytes).map_err(|source| VolumeError::Io { path: path.into(), source })
}
