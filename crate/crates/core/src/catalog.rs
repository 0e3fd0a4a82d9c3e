//! Machine catalog: one record per computer model, with the lineage the
//! operator expects its BASIC to have.
//!
//! The file is comma-separated text with the header
//! `name,country,cpu,year,expected_lineage,rom_path`. A machine with several
//! ROM revisions is written as several rows sharing the same metadata; they
//! are merged into one record on load. A `rom_path` may carry a load address
//! suffix, `roms/primo.bin@0x0000`; without one the image is placed at 0.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rom::Architecture;

pub const CATALOG_HEADER: [&str; 6] = ["name", "country", "cpu", "year", "expected_lineage", "rom_path"];

pub const YEAR_RANGE: std::ops::RangeInclusive<i32> = 1975..=1999;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExpectedLineage {
    Microsoft,
    Sinclair,
    HuBasic,
    Original,
    Unknown,
}

impl ExpectedLineage {
    pub fn as_str(self) -> &'static str {
        match self {
            ExpectedLineage::Microsoft => "microsoft",
            ExpectedLineage::Sinclair => "sinclair",
            ExpectedLineage::HuBasic => "hubasic",
            ExpectedLineage::Original => "original",
            ExpectedLineage::Unknown => "unknown",
        }
    }
}

impl fmt::Display for ExpectedLineage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExpectedLineage {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "microsoft" => Ok(ExpectedLineage::Microsoft),
            "sinclair" => Ok(ExpectedLineage::Sinclair),
            "hubasic" => Ok(ExpectedLineage::HuBasic),
            "original" => Ok(ExpectedLineage::Original),
            "unknown" | "" => Ok(ExpectedLineage::Unknown),
            other => Err(format!("unknown expected_lineage {other:?}")),
        }
    }
}

/// A ROM file reference inside a catalog record.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RomRef {
    pub path: PathBuf,
    pub base_addr: u16,
}

impl RomRef {
    fn parse(field: &str) -> std::result::Result<RomRef, String> {
        match field.rsplit_once('@') {
            Some((path, addr)) => {
                let base = crate::parse_u16(addr)
                    .ok_or_else(|| format!("bad load address {addr:?} in rom_path"))?;
                Ok(RomRef {
                    path: PathBuf::from(path),
                    base_addr: base,
                })
            }
            None => Ok(RomRef {
                path: PathBuf::from(field),
                base_addr: 0,
            }),
        }
    }

    fn render(&self) -> String {
        if self.base_addr == 0 {
            self.path.display().to_string()
        } else {
            format!("{}@{:#06x}", self.path.display(), self.base_addr)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MachineRecord {
    pub name: String,
    pub country: String,
    pub cpu: String,
    pub year: i32,
    pub expected_lineage: ExpectedLineage,
    pub rom_paths: Vec<RomRef>,
}

impl MachineRecord {
    pub fn arch(&self) -> Option<Architecture> {
        Architecture::from_cpu_name(&self.cpu)
    }

    /// False for CPUs outside the decodable families (8080, PDP-11, 8086...).
    pub fn analyzable(&self) -> bool {
        self.arch().is_some()
    }

    fn same_metadata(&self, other: &MachineRecord) -> bool {
        self.country == other.country
            && self.cpu == other.cpu
            && self.year == other.year
            && self.expected_lineage == other.expected_lineage
    }
}

pub fn load_catalog(path: &Path) -> Result<Vec<MachineRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_catalog(&text)
}

pub fn parse_catalog(text: &str) -> Result<Vec<MachineRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());

    let mut records: Vec<MachineRecord> = Vec::new();
    let mut saw_header = false;
    for row in reader.records() {
        let row = row.map_err(|e| Error::CatalogParse {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let fail = |message: String| Error::CatalogParse { line, message };

        if row.iter().all(|f| f.is_empty()) {
            continue;
        }
        if !saw_header {
            let header: Vec<String> = row.iter().map(|f| f.to_ascii_lowercase()).collect();
            if header != CATALOG_HEADER {
                return Err(fail(format!(
                    "expected header {:?}, found {:?}",
                    CATALOG_HEADER.join(","),
                    row.iter().collect::<Vec<_>>().join(",")
                )));
            }
            saw_header = true;
            continue;
        }
        if row.len() != CATALOG_HEADER.len() {
            return Err(fail(format!("expected 6 fields, found {}", row.len())));
        }
        let name = row[0].to_string();
        if name.is_empty() {
            return Err(fail("empty machine name".into()));
        }
        let year: i32 = row[3]
            .parse()
            .map_err(|_| fail(format!("bad year {:?}", &row[3])))?;
        if !YEAR_RANGE.contains(&year) {
            return Err(fail(format!("year {year} outside 1975..=1999")));
        }
        let expected_lineage: ExpectedLineage = row[4].parse().map_err(fail)?;
        let rom_paths = if row[5].is_empty() {
            Vec::new()
        } else {
            vec![RomRef::parse(&row[5]).map_err(fail)?]
        };
        let record = MachineRecord {
            name,
            country: row[1].to_string(),
            cpu: row[2].to_string(),
            year,
            expected_lineage,
            rom_paths,
        };

        match records.iter_mut().find(|r| r.name == record.name) {
            Some(existing) if existing.same_metadata(&record) => {
                existing.rom_paths.extend(record.rom_paths);
            }
            Some(_) => {
                return Err(fail(format!(
                    "duplicate machine {:?} with conflicting metadata",
                    record.name
                )))
            }
            None => records.push(record),
        }
    }
    Ok(records)
}

/// Inverse of [`parse_catalog`]: one row per ROM revision, one bare row for
/// machines without images.
pub fn write_catalog(records: &[MachineRecord]) -> String {
    let mut writer = csv::WriterBuilder::new().from_writer(Vec::new());
    writer.write_record(CATALOG_HEADER).expect("in-memory write");
    for r in records {
        let year = r.year.to_string();
        let base = [r.name.as_str(), &r.country, &r.cpu, &year, r.expected_lineage.as_str()];
        if r.rom_paths.is_empty() {
            writer
                .write_record(base.iter().copied().chain([""]))
                .expect("in-memory write");
        }
        for rom in &r.rom_paths {
            let rendered = rom.render();
            writer
                .write_record(base.iter().copied().chain([rendered.as_str()]))
                .expect("in-memory write");
        }
    }
    String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}
