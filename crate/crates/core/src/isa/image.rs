//! Loadable program image: flat code/data bytes plus a line-oriented
//! sidecar manifest carrying the load offset, entry point and symbols.

use std::collections::BTreeMap;
use std::io::{self, Read, Write};
use std::path::Path;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ProgramImage {
    /// Local byte offset the image is loaded at.
    pub base: u32,
    pub bytes: Vec<u8>,
    pub symbols: BTreeMap<String, u32>,
    /// Entry offset (absolute local address, within the image).
    pub entry: u32,
}

#[derive(Debug, thiserror::Error)]
pub enum ImageError {
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("bad manifest line {0}: {1}")]
    BadManifest(usize, String),
    #[error("image byte length {0} is odd")]
    OddLength(usize),
    #[error("entry {entry:#x} outside image [{base:#x}, {end:#x})")]
    EntryOutsideImage { entry: u32, base: u32, end: u32 },
}

impl ProgramImage {
    pub fn validate(&self) -> Result<(), ImageError> {
        if self.bytes.len() % 2 != 0 {
            return Err(ImageError::OddLength(self.bytes.len()));
        }
        let end = self.base + self.bytes.len() as u32;
        if !self.bytes.is_empty() && (self.entry < self.base || self.entry >= end) {
            return Err(ImageError::EntryOutsideImage { entry: self.entry, base: self.base, end });
        }
        Ok(())
    }

    pub fn manifest_text(&self) -> String {
        let mut s = String::new();
        s.push_str("eimg 1\n");
        s.push_str(&format!("base {:#010x}\n", self.base));
        s.push_str(&format!("entry {:#010x}\n", self.entry));
        for (name, off) in &self.symbols {
            s.push_str(&format!("symbol {} {:#010x}\n", name, off));
        }
        s
    }

    pub fn parse_manifest(text: &str, bytes: Vec<u8>) -> Result<Self, ImageError> {
        let mut img = ProgramImage { bytes, ..Default::default() };
        let parse_u32 = |s: &str, n: usize| -> Result<u32, ImageError> {
            let s = s.trim();
            let (s, radix) = match s.strip_prefix("0x") {
                Some(rest) => (rest, 16),
                None => (s, 10),
            };
            u32::from_str_radix(s, radix)
                .map_err(|e| ImageError::BadManifest(n, e.to_string()))
        };
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            match parts.next() {
                Some("eimg") => {}
                Some("base") => {
                    img.base = parse_u32(
                        parts.next().ok_or_else(|| ImageError::BadManifest(n, "missing value".into()))?,
                        n,
                    )?
                }
                Some("entry") => {
                    img.entry = parse_u32(
                        parts.next().ok_or_else(|| ImageError::BadManifest(n, "missing value".into()))?,
                        n,
                    )?
                }
                Some("symbol") => {
                    let name = parts
                        .next()
                        .ok_or_else(|| ImageError::BadManifest(n, "missing symbol name".into()))?;
                    let off = parse_u32(
                        parts.next().ok_or_else(|| ImageError::BadManifest(n, "missing offset".into()))?,
                        n,
                    )?;
                    img.symbols.insert(name.to_string(), off);
                }
                Some(other) => {
                    return Err(ImageError::BadManifest(n, format!("unknown key {other}")))
                }
                None => {}
            }
        }
        img.validate()?;
        Ok(img)
    }

    /// Write `<path>` (flat binary) and `<path>.manifest`.
    pub fn save(&self, path: &Path) -> Result<(), ImageError> {
        std::fs::File::create(path)?.write_all(&self.bytes)?;
        let mpath = manifest_path(path);
        std::fs::write(mpath, self.manifest_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ImageError> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        let mpath = manifest_path(path);
        let text = std::fs::read_to_string(mpath)?;
        Self::parse_manifest(&text, bytes)
    }
}

fn manifest_path(path: &Path) -> std::path::PathBuf {
    let mut os = path.as_os_str().to_owned();
    os.push(".manifest");
    os.into()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_round_trip() {
        let mut img = ProgramImage {
            base: 0x100,
            bytes: vec![1, 2, 3, 4],
            entry: 0x102,
            ..Default::default()
        };
        img.symbols.insert("start".into(), 0x102);
        let text = img.manifest_text();
        let back = ProgramImage::parse_manifest(&text, img.bytes.clone()).unwrap();
        assert_eq!(back, img);
    }

    #[test]
    fn entry_outside_image_rejected() {
        let img = ProgramImage { base: 0, bytes: vec![0, 0], entry: 0x10, ..Default::default() };
        assert!(img.validate().is_err());
    }
}
