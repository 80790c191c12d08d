//! Self-describing binary tensor files: a UTF-8 `key: value` header ended by
//! a blank line, then little-endian `f32` values in row-major order.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::renderer::{CaptureStack, TransientMuellerCube};

pub const MAGIC: &str = "POLARTOF1";

/// What a tensor file holds; stored under the `kind` header key.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TensorKind {
    /// `[H, W, T, 16]` transient Mueller cube.
    MuellerCube,
    /// `[N, H, W, T]` ellipsometric capture stack.
    CaptureStack,
    /// `[H, W]` or `[H, W, C]` per-pixel map.
    Map,
}

impl TensorKind {
    fn as_str(self) -> &'static str {
        match self {
            TensorKind::MuellerCube => "mueller_cube",
            TensorKind::CaptureStack => "capture_stack",
            TensorKind::Map => "map",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "mueller_cube" => Ok(TensorKind::MuellerCube),
            "capture_stack" => Ok(TensorKind::CaptureStack),
            "map" => Ok(TensorKind::Map),
            other => Err(Error::Format(format!("unknown tensor kind {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TensorHeader {
    pub kind: TensorKind,
    pub shape: Vec<usize>,
    pub units: String,
    /// Seconds per time bin (0 for maps).
    pub bin_width: f64,
    /// Further `key: value` pairs (e.g. `schedule_ref`), written sorted.
    pub extra: BTreeMap<String, String>,
}

impl TensorHeader {
    pub fn new(kind: TensorKind, shape: Vec<usize>, units: &str, bin_width: f64) -> Self {
        Self {
            kind,
            shape,
            units: units.to_string(),
            bin_width,
            extra: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn to_text(&self) -> String {
        let shape: Vec<String> = self.shape.iter().map(|s| s.to_string()).collect();
        let mut s = format!(
            "magic: {MAGIC}\ndtype: f32\nendianness: LE\nkind: {}\nshape: {}\nunits: {}\nbin_width: {:e}\n",
            self.kind.as_str(),
            shape.join(" "),
            self.units,
            self.bin_width
        );
        for (k, v) in &self.extra {
            s.push_str(&format!("{k}: {v}\n"));
        }
        s.push('\n');
        s
    }
}

/// A header plus its values (in `f64`, converted at the file boundary).
#[derive(Clone, Debug, PartialEq)]
pub struct TensorFile {
    pub header: TensorHeader,
    pub data: Vec<f64>,
}

pub fn write_tensor(path: &Path, header: &TensorHeader, data: &[f64]) -> Result<()> {
    if data.len() != header.len() {
        return Err(Error::shape(header.len(), data.len()));
    }
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(header.to_text().as_bytes())?;
    for &v in data {
        w.write_all(&(v as f32).to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_tensor(path: &Path) -> Result<TensorFile> {
    let mut r = BufReader::new(File::open(path)?);
    let mut fields = BTreeMap::new();
    loop {
        let mut line = String::new();
        if r.read_line(&mut line)? == 0 {
            return Err(Error::Format(format!("{}: header not terminated", path.display())));
        }
        let line = line.trim_end_matches(['\n', '\r']);
        if line.is_empty() {
            break;
        }
        let (k, v) = line
            .split_once(": ")
            .ok_or_else(|| Error::Format(format!("{}: bad header line {line:?}", path.display())))?;
        fields.insert(k.to_string(), v.to_string());
    }
    let mut take = |key: &str| {
        fields
            .remove(key)
            .ok_or_else(|| Error::Format(format!("{}: missing header key {key:?}", path.display())))
    };
    if take("magic")? != MAGIC {
        return Err(Error::Format(format!("{}: not a {MAGIC} file", path.display())));
    }
    if take("dtype")? != "f32" || take("endianness")? != "LE" {
        return Err(Error::Format(format!("{}: only little-endian f32 is supported", path.display())));
    }
    let kind = TensorKind::parse(&take("kind")?)?;
    let shape = take("shape")?
        .split_whitespace()
        .map(|s| s.parse::<usize>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::Format(format!("{}: bad shape: {e}", path.display())))?;
    let units = take("units")?;
    let bin_width = take("bin_width")?
        .parse::<f64>()
        .map_err(|e| Error::Format(format!("{}: bad bin_width: {e}", path.display())))?;
    let header = TensorHeader {
        kind,
        shape,
        units,
        bin_width,
        extra: fields,
    };
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != header.len() * 4 {
        return Err(Error::Format(format!(
            "{}: payload has {} bytes, header shape needs {}",
            path.display(),
            bytes.len(),
            header.len() * 4
        )));
    }
    let data = bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
        .collect();
    Ok(TensorFile { header, data })
}

fn expect_kind(t: &TensorFile, kind: TensorKind, dims: usize) -> Result<()> {
    if t.header.kind != kind || t.header.shape.len() != dims {
        return Err(Error::Format(format!(
            "expected a {} tensor of rank {dims}, found {} with shape {:?}",
            kind.as_str(),
            t.header.kind.as_str(),
            t.header.shape
        )));
    }
    Ok(())
}

pub fn write_cube(path: &Path, cube: &TransientMuellerCube) -> Result<()> {
    let header = TensorHeader::new(
        TensorKind::MuellerCube,
        vec![cube.height, cube.width, cube.num_bins, 16],
        "relative radiance",
        cube.bin_width,
    );
    write_tensor(path, &header, &cube.data)
}

pub fn read_cube(path: &Path) -> Result<TransientMuellerCube> {
    let t = read_tensor(path)?;
    expect_kind(&t, TensorKind::MuellerCube, 4)?;
    let s = &t.header.shape;
    if s[3] != 16 {
        return Err(Error::Format(format!("cube last axis must be 16, found {}", s[3])));
    }
    TransientMuellerCube::from_data(s[1], s[0], s[2], t.header.bin_width, t.data)
}

pub fn write_stack(path: &Path, stack: &CaptureStack) -> Result<()> {
    let mut header = TensorHeader::new(
        TensorKind::CaptureStack,
        vec![stack.n, stack.height, stack.width, stack.num_bins],
        "relative intensity",
        stack.bin_width,
    );
    header.extra.insert("schedule_ref".into(), stack.schedule_ref.clone());
    write_tensor(path, &header, &stack.data)
}

pub fn read_stack(path: &Path) -> Result<CaptureStack> {
    let t = read_tensor(path)?;
    expect_kind(&t, TensorKind::CaptureStack, 4)?;
    let s = &t.header.shape;
    let stack = CaptureStack {
        n: s[0],
        height: s[1],
        width: s[2],
        num_bins: s[3],
        bin_width: t.header.bin_width,
        schedule_ref: t.header.extra.get("schedule_ref").cloned().unwrap_or_default(),
        data: t.data,
    };
    stack.validate()?;
    Ok(stack)
}

/// Writes a `[H, W]` (channels = 1) or `[H, W, C]` map.
pub fn write_map(path: &Path, width: usize, height: usize, channels: usize, units: &str, data: &[f64]) -> Result<()> {
    let shape = if channels == 1 {
        vec![height, width]
    } else {
        vec![height, width, channels]
    };
    write_tensor(path, &TensorHeader::new(TensorKind::Map, shape, units, 0.0), data)
}

/// Reads a map, returning `(width, height, channels, data)`.
pub fn read_map(path: &Path) -> Result<(usize, usize, usize, Vec<f64>)> {
    let t = read_tensor(path)?;
    if t.header.kind != TensorKind::Map || !(2..=3).contains(&t.header.shape.len()) {
        return Err(Error::Format(format!(
            "{}: expected a map tensor, found shape {:?}",
            path.display(),
            t.header.shape
        )));
    }
    let s = &t.header.shape;
    Ok((s[1], s[0], s.get(2).copied().unwrap_or(1), t.data))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cube_round_trips_at_f32_precision() {
        let dir = tempfile::tempdir().unwrap();
        let mut cube = TransientMuellerCube::zeros(3, 2, 5, 25e-12);
        for (i, v) in cube.data.iter_mut().enumerate() {
            *v = (i as f64 * 0.37).sin();
        }
        let path = dir.path().join("c.ptof");
        write_cube(&path, &cube).unwrap();
        let back = read_cube(&path).unwrap();
        assert_eq!((back.width, back.height, back.num_bins), (3, 2, 5));
        assert_eq!(back.bin_width, 25e-12);
        for (a, b) in back.data.iter().zip(&cube.data) {
            assert_eq!(*a, *b as f32 as f64);
        }
        let bytes = std::fs::read(&path).unwrap();
        let header_end = bytes.windows(2).position(|w| w == b"\n\n").unwrap() + 2;
        assert_eq!(bytes.len() - header_end, 3 * 2 * 5 * 16 * 4);
        assert!(bytes.starts_with(b"magic: POLARTOF1\n"));
    }

    #[test]
    fn stack_keeps_schedule_reference() {
        let dir = tempfile::tempdir().unwrap();
        let mut stack = CaptureStack::zeros(20, 2, 2, 4, 25e-12);
        stack.schedule_ref = "schedule-n20-abc".into();
        let path = dir.path().join("s.ptof");
        write_stack(&path, &stack).unwrap();
        let text = String::from_utf8_lossy(&std::fs::read(&path).unwrap()).to_string();
        assert!(text.contains("shape: 20 2 2 4\n"));
        assert_eq!(read_stack(&path).unwrap(), stack);
    }

    #[test]
    fn malformed_files_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.ptof");
        std::fs::write(&path, "magic: NOPE\n\n").unwrap();
        assert!(matches!(read_tensor(&path), Err(Error::Format(_))));
        std::fs::write(
            &path,
            "magic: POLARTOF1\ndtype: f32\nendianness: LE\nkind: map\nshape: 2 2\nunits: m\nbin_width: 0e0\n\nabc",
        )
        .unwrap();
        assert!(matches!(read_tensor(&path), Err(Error::Format(_))));
        assert!(matches!(read_tensor(&dir.path().join("missing")), Err(Error::Io(_))));
        let cube_path = dir.path().join("map.ptof");
        write_map(&cube_path, 2, 2, 1, "m", &[1.0; 4]).unwrap();
        assert!(read_cube(&cube_path).is_err());
        assert_eq!(read_map(&cube_path).unwrap(), (2, 2, 1, vec![1.0; 4]));
    }
}
