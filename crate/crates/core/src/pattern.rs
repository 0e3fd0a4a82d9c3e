//! Masked byte patterns with typed capture slots.
//!
//! Patterns are written as whitespace-separated tokens:
//!
//! | token          | width | meaning                                   |
//! |----------------|-------|-------------------------------------------|
//! | `HH`           | 1     | literal hex byte (case-insensitive)       |
//! | `??`           | 1     | any byte                                  |
//! | `@name:abs16`  | 2     | little-endian absolute address            |
//! | `@name:rel8`   | 1     | signed displacement, resolved to absolute |
//! | `@name:byte`   | 1     | raw byte value                            |
//!
//! A rel8 slot resolves to `slot_address + 1 + displacement`, i.e. relative to
//! the byte after the operand, which is what Z80 `JR` and 6502 branches use
//! when the slot sits right after the opcode.

use std::collections::{BTreeMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rom::RomImage;
use crate::signature::SignatureDb;

/// Minimum literal bytes a production pattern must contain.
pub const DEFAULT_MIN_LITERALS: usize = 6;
pub const MAX_PATTERN_BYTES: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SlotKind {
    Abs16,
    Rel8,
    Byte,
}

impl SlotKind {
    pub fn width(self) -> usize {
        match self {
            SlotKind::Abs16 => 2,
            SlotKind::Rel8 | SlotKind::Byte => 1,
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            SlotKind::Abs16 => "abs16",
            SlotKind::Rel8 => "rel8",
            SlotKind::Byte => "byte",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PatternElement {
    Literal(u8),
    Any,
    CaptureAbs16(String),
    CaptureRel8(String),
    CaptureByte(String),
}

impl PatternElement {
    pub fn width(&self) -> usize {
        match self {
            PatternElement::CaptureAbs16(_) => 2,
            _ => 1,
        }
    }

    fn slot(&self) -> Option<(&str, SlotKind)> {
        match self {
            PatternElement::CaptureAbs16(n) => Some((n, SlotKind::Abs16)),
            PatternElement::CaptureRel8(n) => Some((n, SlotKind::Rel8)),
            PatternElement::CaptureByte(n) => Some((n, SlotKind::Byte)),
            _ => None,
        }
    }

    fn render(&self) -> String {
        match self {
            PatternElement::Literal(b) => format!("{b:02X}"),
            PatternElement::Any => "??".to_string(),
            other => {
                let (name, kind) = other.slot().expect("capture element");
                format!("@{name}:{}", kind.as_str())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Slot {
    pub name: String,
    pub kind: SlotKind,
    /// Byte offset of the slot inside the match window.
    pub position: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pattern {
    elements: Vec<PatternElement>,
    byte_len: usize,
    literal_count: usize,
    source_text: String,
    literals: Vec<(usize, u8)>,
    slots: Vec<Slot>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CompileOptions {
    pub min_literals: usize,
}

impl Default for CompileOptions {
    fn default() -> Self {
        CompileOptions {
            min_literals: DEFAULT_MIN_LITERALS,
        }
    }
}

impl CompileOptions {
    /// Test-mode compilation with a lowered literal floor.
    pub fn test_mode(min_literals: usize) -> Self {
        CompileOptions { min_literals }
    }
}

pub fn compile_pattern(text: &str) -> Result<Pattern> {
    compile_pattern_with(text, CompileOptions::default())
}

pub fn compile_pattern_with(text: &str, options: CompileOptions) -> Result<Pattern> {
    let mut elements = Vec::new();
    for (position, token) in text.split_whitespace().enumerate() {
        elements.push(parse_token(token, position)?);
    }
    Pattern::from_elements(elements, Some(text.trim().to_string()), options)
}

fn syntax(token: &str, position: usize, message: impl Into<String>) -> Error {
    Error::DslSyntax {
        token: token.to_string(),
        position,
        message: message.into(),
    }
}

fn parse_token(token: &str, position: usize) -> Result<PatternElement> {
    if token == "??" {
        return Ok(PatternElement::Any);
    }
    if let Some(rest) = token.strip_prefix('@') {
        let (name, kind) = rest
            .split_once(':')
            .ok_or_else(|| syntax(token, position, "capture needs a type, e.g. @name:abs16"))?;
        if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(syntax(token, position, "slot names are [A-Za-z0-9_]+"));
        }
        let name = name.to_string();
        return match kind.to_ascii_lowercase().as_str() {
            "abs16" => Ok(PatternElement::CaptureAbs16(name)),
            "rel8" => Ok(PatternElement::CaptureRel8(name)),
            "byte" => Ok(PatternElement::CaptureByte(name)),
            _ => Err(syntax(token, position, "capture type must be abs16, rel8 or byte")),
        };
    }
    if token.len() == 2 && token.bytes().all(|b| b.is_ascii_hexdigit()) {
        return Ok(PatternElement::Literal(
            u8::from_str_radix(token, 16).expect("validated hex"),
        ));
    }
    Err(syntax(token, position, "expected HH, ?? or @name:type"))
}

impl Pattern {
    pub fn from_elements(
        elements: Vec<PatternElement>,
        source_text: Option<String>,
        options: CompileOptions,
    ) -> Result<Pattern> {
        if elements.is_empty() {
            return Err(syntax("", 0, "empty pattern"));
        }
        let mut byte_len = 0;
        let mut literals = Vec::new();
        let mut slots = Vec::new();
        let mut names = HashSet::new();
        for (position, element) in elements.iter().enumerate() {
            match element {
                PatternElement::Literal(b) => literals.push((byte_len, *b)),
                PatternElement::Any => {}
                other => {
                    let (name, kind) = other.slot().expect("capture element");
                    if !names.insert(name.to_string()) {
                        return Err(Error::DuplicateSlot(name.to_string()));
                    }
                    slots.push(Slot {
                        name: name.to_string(),
                        kind,
                        position: byte_len,
                    });
                }
            }
            byte_len += element.width();
            if byte_len > MAX_PATTERN_BYTES {
                return Err(syntax(
                    &element.render(),
                    position,
                    format!("pattern window exceeds {MAX_PATTERN_BYTES} bytes"),
                ));
            }
        }
        if literals.len() < options.min_literals {
            return Err(Error::WeakPattern {
                literals: literals.len(),
                required: options.min_literals,
            });
        }
        let source_text = source_text
            .unwrap_or_else(|| elements.iter().map(PatternElement::render).collect::<Vec<_>>().join(" "));
        Ok(Pattern {
            literal_count: literals.len(),
            elements,
            byte_len,
            source_text,
            literals,
            slots,
        })
    }

    pub fn elements(&self) -> &[PatternElement] {
        &self.elements
    }

    pub fn byte_len(&self) -> usize {
        self.byte_len
    }

    pub fn literal_count(&self) -> usize {
        self.literal_count
    }

    pub fn source_text(&self) -> &str {
        &self.source_text
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    /// Canonical text form (upper-case hex, single spaces).
    pub fn canonical_text(&self) -> String {
        self.elements
            .iter()
            .map(PatternElement::render)
            .collect::<Vec<_>>()
            .join(" ")
    }

    fn matches_at(&self, bytes: &[u8], offset: usize) -> bool {
        self.literals.iter().all(|&(i, b)| bytes[offset + i] == b)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MatchHit {
    pub offset: usize,
    #[serde(with = "crate::hex_u16")]
    pub address: u16,
    #[serde(with = "crate::hex_u16_map")]
    pub captures: BTreeMap<String, u16>,
    pub pattern_name: String,
}

fn resolve_captures(rom: &RomImage, pattern: &Pattern, offset: usize) -> BTreeMap<String, u16> {
    let bytes = rom.bytes();
    pattern
        .slots
        .iter()
        .map(|slot| {
            let at = offset + slot.position;
            let value = match slot.kind {
                SlotKind::Abs16 => u16::from_le_bytes([bytes[at], bytes[at + 1]]),
                SlotKind::Rel8 => rom
                    .address_of(at)
                    .wrapping_add(1)
                    .wrapping_add(bytes[at] as i8 as u16),
                SlotKind::Byte => bytes[at] as u16,
            };
            (slot.name.clone(), value)
        })
        .collect()
}

/// All offsets where `pattern` matches, ascending, overlaps included. Hits are
/// named after the pattern's source text.
pub fn scan(rom: &RomImage, pattern: &Pattern) -> Result<Vec<MatchHit>> {
    scan_named(rom, pattern, pattern.source_text())
}

pub fn scan_named(rom: &RomImage, pattern: &Pattern, name: &str) -> Result<Vec<MatchHit>> {
    rom.ensure_addressable()?;
    let bytes = rom.bytes();
    if pattern.byte_len > bytes.len() {
        return Err(Error::PatternTooLong {
            pattern_len: pattern.byte_len,
            rom_len: bytes.len(),
        });
    }
    let last = bytes.len() - pattern.byte_len;
    let hit = |offset: usize| MatchHit {
        offset,
        address: rom.address_of(offset),
        captures: resolve_captures(rom, pattern, offset),
        pattern_name: name.to_string(),
    };

    let mut hits = Vec::new();
    match pattern.literals.first() {
        None => hits.extend((0..=last).map(hit)),
        Some(&(anchor_pos, anchor_byte)) => {
            // candidates are found by skipping to the next occurrence of the first literal
            let haystack = &bytes[anchor_pos..=last + anchor_pos];
            let mut from = 0;
            while let Some(found) = haystack[from..].iter().position(|&b| b == anchor_byte) {
                let offset = from + found;
                if pattern.matches_at(bytes, offset) {
                    hits.push(hit(offset));
                }
                from = offset + 1;
            }
        }
    }
    Ok(hits)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Parallelism {
    #[default]
    Sequential,
    /// Fan out across signatures on the current rayon pool.
    Parallel,
}

pub fn scan_all(rom: &RomImage, db: &SignatureDb) -> Result<Vec<MatchHit>> {
    scan_all_with(rom, db, Parallelism::Sequential)
}

/// Union of [`scan`] over every signature, ordered by `(offset, pattern_name)`.
/// Signatures whose window is longer than the image contribute no hits.
pub fn scan_all_with(rom: &RomImage, db: &SignatureDb, parallelism: Parallelism) -> Result<Vec<MatchHit>> {
    rom.ensure_addressable()?;
    let one = |sig: &crate::signature::Signature| -> Result<Vec<MatchHit>> {
        if sig.pattern.byte_len() > rom.len() {
            return Ok(Vec::new());
        }
        scan_named(rom, &sig.pattern, &sig.id())
    };
    let per_sig: Vec<Vec<MatchHit>> = match parallelism {
        Parallelism::Sequential => db.signatures().iter().map(one).collect::<Result<_>>()?,
        Parallelism::Parallel => db.signatures().par_iter().map(one).collect::<Result<_>>()?,
    };
    let mut hits: Vec<MatchHit> = per_sig.into_iter().flatten().collect();
    hits.sort_by(|a, b| (a.offset, &a.pattern_name).cmp(&(b.offset, &b.pattern_name)));
    Ok(hits)
}
