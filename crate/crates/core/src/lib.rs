//! Signature-based analysis of 8-bit ROM images.
//!
//! The pipeline is: load a [`RomImage`], scan it with a [`SignatureDb`] of
//! masked byte patterns, fold the hits into a [`RoutineMap`] of entry points,
//! and [`classify`] the BASIC lineage from which families matched. Pairwise
//! similarity ([`similarity`]) is reported alongside but never feeds the
//! verdict.

pub mod builtin;
pub mod catalog;
pub mod cli;
pub mod error;
pub mod isa;
pub mod lineage;
pub mod pattern;
pub mod report;
pub mod rom;
pub mod signature;
pub mod similarity;

pub use catalog::{load_catalog, parse_catalog, write_catalog, ExpectedLineage, MachineRecord, RomRef};
pub use error::{Error, Result};
pub use isa::{decode_at, encode_transfer, Condition, ControlTransfer, TransferKind};
pub use lineage::{
    batch_classify, classify, extract_entry_points, Confidence, LineageVerdict, RoutineMap, Thresholds, Verdict,
};
pub use pattern::{compile_pattern, compile_pattern_with, scan, scan_all, CompileOptions, MatchHit, Pattern, PatternElement};
pub use rom::{load_rom, select_window, Architecture, ContentHash, RomImage};
pub use signature::{builtin_db, load_signatures, Family, Signature, SignatureDb};
pub use similarity::{compare, fingerprint, FingerprintParams, FingerprintSet, SimilarityScore};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Parses `0x1F00`, `$1F00`, `1F00h` or plain decimal.
pub fn parse_u16(text: &str) -> Option<u16> {
    let t = text.trim();
    let lower = t.to_ascii_lowercase();
    if let Some(h) = lower.strip_prefix("0x").or_else(|| lower.strip_prefix('$')) {
        u16::from_str_radix(h, 16).ok()
    } else if let Some(h) = lower.strip_suffix('h') {
        u16::from_str_radix(h, 16).ok()
    } else {
        t.parse().ok()
    }
}

pub(crate) fn fmt_addr(addr: u16) -> String {
    format!("0x{addr:04X}")
}

/// Addresses serialize as `"0x1234"` strings.
pub(crate) mod hex_u16 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &u16, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&super::fmt_addr(*v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u16, D::Error> {
        let s = String::deserialize(d)?;
        super::parse_u16(&s).ok_or_else(|| serde::de::Error::custom(format!("bad address {s:?}")))
    }
}

pub(crate) mod hex_u16_map {
    use std::collections::BTreeMap;

    use serde::ser::SerializeMap;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &BTreeMap<String, u16>, s: S) -> Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(v.len()))?;
        for (k, a) in v {
            m.serialize_entry(k, &super::fmt_addr(*a))?;
        }
        m.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<String, u16>, D::Error> {
        let raw = BTreeMap::<String, String>::deserialize(d)?;
        raw.into_iter()
            .map(|(k, v)| {
                super::parse_u16(&v)
                    .map(|a| (k, a))
                    .ok_or_else(|| serde::de::Error::custom(format!("bad address {v:?}")))
            })
            .collect()
    }
}
