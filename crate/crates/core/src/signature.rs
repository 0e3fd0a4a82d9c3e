//! Named routine signatures grouped by firmware family.
//!
//! Signature files are UTF-8, one entry per line:
//!
//! ```text
//! family|arch|routine|variant_tag|weight|pattern
//! ```
//!
//! Lines starting with `#` are comments; the comment block directly above an
//! entry is kept as that entry's provenance note. A `#! db_version = ...` line
//! names the database version.

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::pattern::{compile_pattern, Pattern};
use crate::rom::Architecture;

pub use crate::builtin::builtin_db;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Microsoft,
    Sinclair,
    HuBasic,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Microsoft, Family::Sinclair, Family::HuBasic];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Microsoft => "microsoft",
            Family::Sinclair => "sinclair",
            Family::HuBasic => "hubasic",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Microsoft => "Microsoft",
            Family::Sinclair => "Sinclair",
            Family::HuBasic => "HuBasic",
        })
    }
}

impl FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "microsoft" => Ok(Family::Microsoft),
            "sinclair" => Ok(Family::Sinclair),
            "hubasic" => Ok(Family::HuBasic),
            other => Err(format!("unknown family {other:?}")),
        }
    }
}

pub const WEIGHT_RANGE: std::ops::RangeInclusive<u8> = 1..=10;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Signature {
    pub routine: String,
    pub family: Family,
    pub arch: Architecture,
    pub pattern: Pattern,
    pub variant_tag: String,
    pub weight: u8,
    /// Where the byte content came from.
    pub note: String,
}

impl Signature {
    /// Unique key, also used as the `pattern_name` of this signature's hits.
    pub fn id(&self) -> String {
        format!("{}/{}/{}/{}", self.family.as_str(), self.arch, self.routine, self.variant_tag)
    }

    fn key(&self) -> (&str, Family, Architecture, &str) {
        (&self.routine, self.family, self.arch, &self.variant_tag)
    }

    fn to_line(&self) -> String {
        format!(
            "{}|{}|{}|{}|{}|{}",
            self.family.as_str(),
            self.arch,
            self.routine,
            self.variant_tag,
            self.weight,
            self.pattern.source_text()
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "path")]
pub enum DbSource {
    Builtin,
    File(PathBuf),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SignatureDb {
    signatures: Vec<Signature>,
    db_version: String,
    source: DbSource,
}

impl SignatureDb {
    /// Builds a db, enforcing key uniqueness and the weight range. May be empty.
    pub fn new(signatures: Vec<Signature>, db_version: impl Into<String>, source: DbSource) -> Result<Self> {
        let mut seen = HashSet::new();
        for sig in &signatures {
            if !WEIGHT_RANGE.contains(&sig.weight) {
                return Err(Error::SignatureLoad {
                    name: sig.id(),
                    cause: format!("weight {} outside 1..=10", sig.weight),
                });
            }
            if !seen.insert(sig.key()) {
                return Err(Error::SignatureLoad {
                    name: sig.id(),
                    cause: "duplicate (routine, family, arch, variant_tag)".into(),
                });
            }
        }
        Ok(SignatureDb {
            signatures,
            db_version: db_version.into(),
            source,
        })
    }

    pub fn signatures(&self) -> &[Signature] {
        &self.signatures
    }

    pub fn len(&self) -> usize {
        self.signatures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signatures.is_empty()
    }

    pub fn db_version(&self) -> &str {
        &self.db_version
    }

    pub fn source(&self) -> &DbSource {
        &self.source
    }

    pub fn get(&self, id: &str) -> Option<&Signature> {
        self.signatures.iter().find(|s| s.id() == id)
    }

    /// Order-preserving subset. `None` means "any".
    pub fn filter(&self, arch: Option<Architecture>, family: Option<Family>) -> SignatureDb {
        SignatureDb {
            signatures: self
                .signatures
                .iter()
                .filter(|s| arch.is_none_or(|a| s.arch == a) && family.is_none_or(|f| s.family == f))
                .cloned()
                .collect(),
            db_version: self.db_version.clone(),
            source: self.source.clone(),
        }
    }

    /// Merges `other` after `self`; keys must stay unique.
    pub fn extend(&self, other: &SignatureDb) -> Result<SignatureDb> {
        let mut all = self.signatures.clone();
        all.extend(other.signatures.iter().cloned());
        SignatureDb::new(
            all,
            format!("{}+{}", self.db_version, other.db_version),
            self.source.clone(),
        )
    }

    /// Renders the db in the signature file format.
    pub fn to_text(&self) -> String {
        let mut out = format!("#! db_version = {}\n", self.db_version);
        for sig in &self.signatures {
            out.push('\n');
            for line in sig.note.lines() {
                out.push_str("# ");
                out.push_str(line);
                out.push('\n');
            }
            out.push_str(&sig.to_line());
            out.push('\n');
        }
        out
    }
}

pub fn load_signatures(path: &Path) -> Result<SignatureDb> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_signatures(&text, DbSource::File(path.to_path_buf()))
}

pub fn parse_signatures(text: &str, source: DbSource) -> Result<SignatureDb> {
    let mut signatures = Vec::new();
    let mut note: Vec<&str> = Vec::new();
    let mut version = None;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if let Some(directive) = line.strip_prefix("#!") {
            if let Some((key, value)) = directive.split_once('=') {
                if key.trim() == "db_version" {
                    version = Some(value.trim().to_string());
                }
            }
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            note.push(comment.strip_prefix(' ').unwrap_or(comment));
            continue;
        }
        if line.is_empty() {
            note.clear();
            continue;
        }
        let sig = parse_entry(line, line_no, note.join("\n"))?;
        note.clear();
        signatures.push(sig);
    }

    if signatures.is_empty() {
        return Err(Error::SignatureLoad {
            name: "<db>".into(),
            cause: "EmptyDb: no signatures".into(),
        });
    }
    let version = version.unwrap_or_else(|| {
        let digest = Sha256::digest(text.as_bytes());
        format!("sha256:{}", &hex::encode(digest)[..12])
    });
    SignatureDb::new(signatures, version, source)
}

fn parse_entry(line: &str, line_no: usize, note: String) -> Result<Signature> {
    let fields: Vec<&str> = line.splitn(6, '|').map(str::trim).collect();
    let name = || {
        fields
            .get(2)
            .map(|r| format!("line {line_no}: {r}"))
            .unwrap_or_else(|| format!("line {line_no}"))
    };
    let fail = |cause: String| Error::SignatureLoad { name: name(), cause };
    if fields.len() != 6 {
        return Err(fail(format!("expected 6 '|'-separated fields, found {}", fields.len())));
    }
    let family: Family = fields[0].parse().map_err(fail)?;
    let arch: Architecture = fields[1].parse().map_err(|e: Error| fail(e.to_string()))?;
    let routine = fields[2].to_string();
    if routine.is_empty() || !routine.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
        return Err(fail("routine names are [A-Za-z0-9_]+".into()));
    }
    let weight: u8 = fields[4]
        .parse()
        .ok()
        .filter(|w| WEIGHT_RANGE.contains(w))
        .ok_or_else(|| fail(format!("weight {:?} outside 1..=10", fields[4])))?;
    let pattern = compile_pattern(fields[5]).map_err(|e| fail(e.to_string()))?;
    Ok(Signature {
        routine,
        family,
        arch,
        pattern,
        variant_tag: fields[3].to_string(),
        weight,
        note,
    })
}
