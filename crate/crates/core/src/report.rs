//! JSON reports, human-readable tables and symbol definition export.
//!
//! Reports serialize with sorted maps and without wall-clock data in the
//! comparable body; elapsed time lives in the optional top-level `timing`
//! object.

use std::fmt::Write as _;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lineage::{BatchOutcome, BatchStatus, Confidence, LineageVerdict, RoutineMap, Thresholds};
use crate::pattern::MatchHit;
use crate::rom::{Architecture, RomImage};
use crate::similarity::{ratio_to_f64, FingerprintParams, SimilarityScore};

pub const SCHEMA_VERSION: u32 = 1;
pub const SCHEMA_JSON: &str = include_str!("../schema/report.schema.json");

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RomIdentity {
    pub name: String,
    pub content_hash: String,
    pub arch: Architecture,
    #[serde(with = "crate::hex_u16")]
    pub base_addr: u16,
    pub len: usize,
}

impl From<&RomImage> for RomIdentity {
    fn from(rom: &RomImage) -> Self {
        RomIdentity {
            name: rom.source_name().to_string(),
            content_hash: rom.content_hash().to_hex(),
            arch: rom.arch(),
            base_addr: rom.base_addr(),
            len: rom.len(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioValue {
    pub num: u64,
    pub den: u64,
    pub value: f64,
}

impl From<&Ratio<u64>> for RatioValue {
    fn from(r: &Ratio<u64>) -> Self {
        RatioValue {
            num: *r.numer(),
            den: *r.denom(),
            value: ratio_to_f64(r),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilaritySection {
    pub a: RomIdentity,
    pub b: RomIdentity,
    pub params: FingerprintParams,
    pub jaccard: RatioValue,
    pub containment_a_in_b: RatioValue,
    pub containment_b_in_a: RatioValue,
    pub shared_grams: u64,
    pub size_a: u64,
    pub size_b: u64,
}

impl SimilaritySection {
    pub fn new(a: &RomImage, b: &RomImage, params: FingerprintParams, s: &SimilarityScore) -> Self {
        SimilaritySection {
            a: a.into(),
            b: b.into(),
            params,
            jaccard: (&s.jaccard).into(),
            containment_a_in_b: (&s.containment_a_in_b).into(),
            containment_b_in_a: (&s.containment_b_in_a).into(),
            shared_grams: s.shared_grams,
            size_a: s.size_a,
            size_b: s.size_b,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub elapsed_ms: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub tool_version: String,
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub db_version: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rom: Option<RomIdentity>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub hits: Option<Vec<MatchHit>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub routine_map: Option<RoutineMap>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub verdict: Option<LineageVerdict>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub thresholds: Option<Thresholds>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub similarity: Option<SimilaritySection>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub batch: Option<BatchOutcome>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub timing: Option<Timing>,
}

impl Report {
    pub fn new(command: &str) -> Self {
        Report {
            schema_version: SCHEMA_VERSION,
            tool_version: crate::TOOL_VERSION.to_string(),
            command: command.to_string(),
            db_version: None,
            rom: None,
            hits: None,
            routine_map: None,
            verdict: None,
            thresholds: None,
            similarity: None,
            batch: None,
            timing: None,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Report> {
        serde_json::from_str(text).map_err(|e| Error::Report(e.to_string()))
    }

    /// Copy without the non-comparable timing section.
    pub fn comparable(&self) -> Report {
        Report {
            timing: None,
            ..self.clone()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DefsFormat {
    Asm,
    Header,
}

impl std::str::FromStr for DefsFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "asm" => Ok(DefsFormat::Asm),
            "header" => Ok(DefsFormat::Header),
            other => Err(format!("unknown format {other:?} (asm|header)")),
        }
    }
}

fn symbol_name(prefix: &str, routine: &str) -> String {
    let mut s = String::with_capacity(prefix.len() + routine.len());
    s.push_str(prefix);
    s.extend(routine.chars().map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' }));
    s
}

/// Symbol definitions for cross-compiler libraries: `defc NAME = $HHHH`
/// (z88dk assembler) or `#define NAME 0xHHHH`. A routine found at several
/// distinct addresses gets `_1`, `_2`, ... suffixes and a warning comment.
pub fn emit_defs(rmap: &RoutineMap, format: DefsFormat, prefix: &str) -> Result<String> {
    if rmap.is_empty() {
        return Err(Error::NothingToEmit);
    }
    let mut out = String::new();
    for name in rmap.entries.keys() {
        let addrs = rmap.addresses(name);
        let sym = symbol_name(prefix, name);
        let line = |out: &mut String, sym: &str, addr: u16| match format {
            DefsFormat::Asm => writeln!(out, "defc {sym} = ${addr:04X}"),
            DefsFormat::Header => writeln!(out, "#define {sym} 0x{addr:04X}"),
        };
        if addrs.len() == 1 {
            line(&mut out, &sym, addrs[0]).expect("string write");
            continue;
        }
        let warning = format!("warning: {name} found at {} distinct addresses", addrs.len());
        match format {
            DefsFormat::Asm => writeln!(out, "; {warning}"),
            DefsFormat::Header => writeln!(out, "/* {warning} */"),
        }
        .expect("string write");
        for (i, addr) in addrs.iter().enumerate() {
            line(&mut out, &format!("{sym}_{}", i + 1), *addr).expect("string write");
        }
    }
    Ok(out)
}

fn family_of(pattern_name: &str) -> (&str, &str, &str) {
    let mut parts = pattern_name.splitn(4, '/');
    let family = parts.next().unwrap_or("");
    let _arch = parts.next();
    let routine = parts.next().unwrap_or(pattern_name);
    let variant = parts.next().unwrap_or("");
    (family, routine, variant)
}

/// One row per hit.
pub fn hits_table(hits: &[MatchHit]) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "{:<8} {:<7} {:<10} {:<16} {:<18} CAPTURES",
        "OFFSET", "ADDRESS", "FAMILY", "ROUTINE", "VARIANT"
    )
    .expect("string write");
    for h in hits {
        let (family, routine, variant) = family_of(&h.pattern_name);
        let caps = h
            .captures
            .iter()
            .map(|(k, v)| format!("{k}=${v:04X}"))
            .collect::<Vec<_>>()
            .join(" ");
        writeln!(
            out,
            "{:<8} ${:04X}   {:<10} {:<16} {:<18} {}",
            format!("{:#06x}", h.offset),
            h.address,
            family,
            routine,
            variant,
            caps
        )
        .expect("string write");
    }
    writeln!(out, "{} hit(s)", hits.len()).expect("string write");
    out
}

pub fn routine_table(rmap: &RoutineMap) -> String {
    let mut out = String::new();
    writeln!(out, "{:<20} {:<10} {:<6} VARIANT", "ROUTINE", "FAMILY", "ENTRY").expect("string write");
    for (name, entries) in &rmap.entries {
        let mut last: Option<(u16, &str)> = None;
        for e in entries {
            if last == Some((e.entry_address, e.variant_tag.as_str())) {
                continue;
            }
            last = Some((e.entry_address, e.variant_tag.as_str()));
            writeln!(
                out,
                "{:<20} {:<10} ${:04X}  {}",
                name,
                e.family.as_str(),
                e.entry_address,
                e.variant_tag
            )
            .expect("string write");
        }
    }
    out
}

pub fn verdict_text(v: &LineageVerdict) -> String {
    let scores = v
        .scores
        .iter()
        .map(|(f, s)| format!("{}={s}", f.as_str()))
        .collect::<Vec<_>>()
        .join(" ");
    let confidence = match v.confidence {
        Confidence::High => "high",
        Confidence::Low => "low",
    };
    format!(
        "verdict: {} (confidence {confidence}; scores {scores}; t_derived={} t_original={})\n",
        v.verdict, v.thresholds_used.t_derived, v.thresholds_used.t_original
    )
}

pub fn batch_table(batch: &BatchOutcome) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "{:<26} {:<10} {:<28} {:<36} AGREES",
        "MACHINE", "EXPECTED", "ROM", "RESULT"
    )
    .expect("string write");
    for row in &batch.rows {
        let rom = row.rom_path.clone().unwrap_or_else(|| "-".into());
        let (result, agrees) = match &row.status {
            BatchStatus::Classified { verdict, agreement, .. } => (
                verdict.verdict.to_string(),
                match agreement {
                    Some(true) => "yes",
                    Some(false) => "NO",
                    None => "n/a",
                },
            ),
            BatchStatus::Skipped { reason } => (format!("skipped: {reason}"), "-"),
            BatchStatus::Failed { error } => (format!("error: {error}"), "-"),
        };
        writeln!(
            out,
            "{:<26} {:<10} {:<28} {:<36} {}",
            row.machine,
            row.expected_lineage.as_str(),
            rom,
            result,
            agrees
        )
        .expect("string write");
    }
    out
}

pub fn similarity_text(s: &SimilaritySection) -> String {
    format!(
        "a: {} ({} bytes)\nb: {} ({} bytes)\nk={} winnow={} mask_operands={}\n\
         jaccard            {:.3} ({}/{})\n\
         containment a in b {:.3}\n\
         containment b in a {:.3}\n\
         shared_grams       {}\n",
        s.a.name,
        s.a.len,
        s.b.name,
        s.b.len,
        s.params.k,
        s.params.winnow.map_or("off".to_string(), |w| w.to_string()),
        s.params.mask_operands,
        s.jaccard.value,
        s.jaccard.num,
        s.jaccard.den,
        s.containment_a_in_b.value,
        s.containment_b_in_a.value,
        s.shared_grams
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lineage::EntryPoint;
    use crate::signature::Family;

    fn map(entries: &[(&str, u16)]) -> RoutineMap {
        let mut m = RoutineMap::default();
        for (i, (name, addr)) in entries.iter().enumerate() {
            m.entries.entry(name.to_string()).or_default().push(EntryPoint {
                entry_address: *addr,
                family: Family::Microsoft,
                variant_tag: "v".into(),
                hit_offset: i,
                weight: 1,
                routine: name.to_string(),
                pattern_name: format!("microsoft/z80/{name}/v"),
            });
        }
        for list in m.entries.values_mut() {
            list.sort();
        }
        m
    }

    #[test]
    fn asm_line() {
        let out = emit_defs(&map(&[("FP_ADD", 0x3014)]), DefsFormat::Asm, "").unwrap();
        assert_eq!(out, "defc FP_ADD = $3014\n");
    }

    #[test]
    fn header_line_with_prefix() {
        let out = emit_defs(&map(&[("FP_ADD", 0x3014)]), DefsFormat::Header, "ROM_").unwrap();
        assert_eq!(out, "#define ROM_FP_ADD 0x3014\n");
    }

    #[test]
    fn multiple_addresses_are_suffixed() {
        let out = emit_defs(&map(&[("FP_ADD", 0x4014), ("FP_ADD", 0x3014)]), DefsFormat::Asm, "").unwrap();
        assert_eq!(
            out,
            "; warning: FP_ADD found at 2 distinct addresses\ndefc FP_ADD_1 = $3014\ndefc FP_ADD_2 = $4014\n"
        );
        let out = emit_defs(&map(&[("X", 0x10), ("X", 0x10)]), DefsFormat::Asm, "").unwrap();
        assert_eq!(out, "defc X = $0010\n");
    }

    #[test]
    fn dotted_slot_names_become_identifiers() {
        let out = emit_defs(&map(&[("PAIR.a", 0x10)]), DefsFormat::Header, "").unwrap();
        assert_eq!(out, "#define PAIR_a 0x0010\n");
    }

    #[test]
    fn empty_map_is_an_error() {
        assert!(matches!(
            emit_defs(&RoutineMap::default(), DefsFormat::Asm, ""),
            Err(Error::NothingToEmit)
        ));
    }

    #[test]
    fn report_json_round_trip() {
        let mut r = Report::new("classify");
        r.routine_map = Some(map(&[("A", 1), ("B", 2)]));
        r.thresholds = Some(Thresholds::default());
        r.timing = Some(Timing { elapsed_ms: 3 });
        let back = Report::from_json(&r.to_json()).unwrap();
        assert_eq!(back, r);
        assert!(!r.comparable().to_json().contains("timing"));
    }

    #[test]
    fn schema_is_valid_json() {
        let v: serde_json::Value = serde_json::from_str(SCHEMA_JSON).unwrap();
        assert_eq!(v["properties"]["schema_version"]["const"], SCHEMA_VERSION);
    }
}
