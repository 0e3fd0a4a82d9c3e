//! ROM images and the architectures they can be analyzed as.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Largest image accepted by [`load_rom`].
pub const MAX_ROM_LEN: usize = 1 << 20;

/// CPU family an image is decoded as. Both families use little-endian
/// 16-bit operands.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Architecture {
    #[serde(rename = "z80")]
    Z80,
    #[serde(rename = "6502")]
    M6502,
}

impl Architecture {
    pub const ALL: [Architecture; 2] = [Architecture::Z80, Architecture::M6502];

    pub fn as_str(self) -> &'static str {
        match self {
            Architecture::Z80 => "z80",
            Architecture::M6502 => "6502",
        }
    }

    /// Maps a CPU designation (including second sources and clones) to a
    /// decodable architecture. Returns `None` for families we cannot decode.
    pub fn from_cpu_name(cpu: &str) -> Option<Architecture> {
        let norm: String = cpu
            .chars()
            .filter(|c| !c.is_whitespace() && *c != '-')
            .collect::<String>()
            .to_ascii_uppercase();
        match norm.as_str() {
            "Z80" | "Z80A" | "Z80B" | "U880" | "U880D" | "MMN80" | "MMN80A" | "LH0080"
            | "LH0080A" | "Z8400" | "Z8400A" | "T34VM1" | "KR1858VM1" => Some(Architecture::Z80),
            "6502" | "6502A" | "UM6502" | "MOS6502" | "R6502" | "SY6502" | "CM630" => {
                Some(Architecture::M6502)
            }
            _ => None,
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "z80" => Ok(Architecture::Z80),
            "6502" | "m6502" | "mos6502" => Ok(Architecture::M6502),
            other => Err(Error::InvalidParam(format!("unknown architecture {other:?}"))),
        }
    }
}

/// SHA-256 of the image bytes.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ContentHash(pub [u8; 32]);

impl ContentHash {
    pub fn of(bytes: &[u8]) -> Self {
        ContentHash(Sha256::digest(bytes).into())
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl fmt::Debug for ContentHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ContentHash({})", self.to_hex())
    }
}

impl fmt::Display for ContentHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for ContentHash {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for ContentHash {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        let raw = hex::decode(&s).map_err(serde::de::Error::custom)?;
        let arr: [u8; 32] = raw
            .try_into()
            .map_err(|_| serde::de::Error::custom("content hash must be 32 bytes"))?;
        Ok(ContentHash(arr))
    }
}

/// An immutable ROM payload placed at a base address.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RomImage {
    bytes: Arc<[u8]>,
    base_addr: u16,
    arch: Architecture,
    source_name: String,
    content_hash: ContentHash,
}

impl RomImage {
    pub fn from_bytes(
        bytes: impl Into<Vec<u8>>,
        arch: Architecture,
        base_addr: u16,
        source_name: impl Into<String>,
    ) -> Result<Self> {
        let bytes = bytes.into();
        if bytes.is_empty() {
            return Err(Error::EmptyRom);
        }
        if bytes.len() > MAX_ROM_LEN {
            return Err(Error::RomTooLarge(bytes.len()));
        }
        let content_hash = ContentHash::of(&bytes);
        Ok(RomImage {
            bytes: bytes.into(),
            base_addr,
            arch,
            source_name: source_name.into(),
            content_hash,
        })
    }

    pub fn bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn len(&self) -> usize {
        self.bytes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bytes.is_empty()
    }

    pub fn base_addr(&self) -> u16 {
        self.base_addr
    }

    pub fn arch(&self) -> Architecture {
        self.arch
    }

    pub fn source_name(&self) -> &str {
        &self.source_name
    }

    pub fn content_hash(&self) -> ContentHash {
        self.content_hash
    }

    /// True when every byte has a distinct 16-bit address.
    pub fn fits_address_space(&self) -> bool {
        self.base_addr as usize + self.bytes.len() <= 0x1_0000
    }

    /// Gate for every operation that turns offsets into addresses.
    pub fn ensure_addressable(&self) -> Result<()> {
        if self.fits_address_space() {
            Ok(())
        } else {
            Err(Error::AddressSpace {
                base: self.base_addr,
                len: self.bytes.len(),
            })
        }
    }

    /// Address of `offset`, wrapping at 0x10000.
    pub fn address_of(&self, offset: usize) -> u16 {
        self.base_addr.wrapping_add(offset as u16)
    }

    pub fn with_arch(&self, arch: Architecture) -> RomImage {
        RomImage {
            arch,
            ..self.clone()
        }
    }
}

/// Source for [`load_rom`].
pub enum RomSource<'a> {
    Path(&'a Path),
    Bytes(&'a [u8]),
}

impl<'a> From<&'a Path> for RomSource<'a> {
    fn from(p: &'a Path) -> Self {
        RomSource::Path(p)
    }
}

impl<'a> From<&'a [u8]> for RomSource<'a> {
    fn from(b: &'a [u8]) -> Self {
        RomSource::Bytes(b)
    }
}

pub fn load_rom<'a>(
    source: impl Into<RomSource<'a>>,
    arch: Architecture,
    base_addr: u16,
) -> Result<RomImage> {
    match source.into() {
        RomSource::Path(path) => {
            let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
            let name = path
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| path.display().to_string());
            RomImage::from_bytes(bytes, arch, base_addr, name)
        }
        RomSource::Bytes(bytes) => RomImage::from_bytes(bytes.to_vec(), arch, base_addr, "<memory>"),
    }
}

/// Cuts `len` bytes starting at `offset` out of `rom` and rebases them at
/// `base_addr`. Banked images larger than 64 KiB go through here before
/// analysis.
pub fn select_window(rom: &RomImage, offset: usize, len: usize, base_addr: u16) -> Result<RomImage> {
    if len == 0 {
        return Err(Error::Window("window length must be at least 1".into()));
    }
    let end = offset
        .checked_add(len)
        .filter(|&end| end <= rom.len())
        .ok_or_else(|| {
            Error::Window(format!(
                "window {offset:#x}+{len:#x} exceeds image of {:#x} bytes",
                rom.len()
            ))
        })?;
    if base_addr as usize + len > 0x1_0000 {
        return Err(Error::Window(format!(
            "window of {len:#x} bytes at base {base_addr:#06x} exceeds 0xFFFF"
        )));
    }
    RomImage::from_bytes(
        rom.bytes()[offset..end].to_vec(),
        rom.arch(),
        base_addr,
        rom.source_name(),
    )
}
