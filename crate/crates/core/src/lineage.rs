//! Entry-point extraction and lineage classification.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::{ExpectedLineage, MachineRecord};
use crate::error::{Error, Result};
use crate::pattern::{scan_all_with, MatchHit, Parallelism, SlotKind};
use crate::rom::{load_rom, RomImage};
use crate::signature::{Family, SignatureDb};

/// One detected entry point, traceable to the hit that produced it.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EntryPoint {
    #[serde(with = "crate::hex_u16")]
    pub entry_address: u16,
    pub family: Family,
    pub variant_tag: String,
    pub hit_offset: usize,
    pub weight: u8,
    /// Signature routine name (without any `.slot` suffix).
    pub routine: String,
    pub pattern_name: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoutineMap {
    pub entries: BTreeMap<String, Vec<EntryPoint>>,
}

impl RoutineMap {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// Distinct addresses for `name`, ascending.
    pub fn addresses(&self, name: &str) -> Vec<u16> {
        let mut out: Vec<u16> = self
            .entries
            .get(name)
            .map(|v| v.iter().map(|e| e.entry_address).collect())
            .unwrap_or_default();
        out.dedup();
        out
    }

    fn push(&mut self, name: String, entry: EntryPoint) {
        let list = self.entries.entry(name).or_default();
        let at = list.partition_point(|e| (e.entry_address, e.hit_offset, &e.pattern_name) <= (entry.entry_address, entry.hit_offset, &entry.pattern_name));
        list.insert(at, entry);
    }
}

/// Folds scan hits into a routine map. Each hit contributes one entry per
/// address slot (abs16/rel8), named `routine.slot` when the signature has
/// more than one; a signature without address slots contributes the match
/// address itself. Hits whose pattern is not in `db` are ignored.
pub fn fold_hits(hits: &[MatchHit], db: &SignatureDb) -> RoutineMap {
    let by_id: BTreeMap<String, &crate::signature::Signature> =
        db.signatures().iter().map(|s| (s.id(), s)).collect();
    let mut map = RoutineMap::default();
    for hit in hits {
        let Some(sig) = by_id.get(&hit.pattern_name) else {
            continue;
        };
        let entry = |addr: u16| EntryPoint {
            entry_address: addr,
            family: sig.family,
            variant_tag: sig.variant_tag.clone(),
            hit_offset: hit.offset,
            weight: sig.weight,
            routine: sig.routine.clone(),
            pattern_name: hit.pattern_name.clone(),
        };
        let address_slots: Vec<&str> = sig
            .pattern
            .slots()
            .iter()
            .filter(|s| s.kind != SlotKind::Byte)
            .map(|s| s.name.as_str())
            .collect();
        match address_slots.as_slice() {
            [] => map.push(sig.routine.clone(), entry(hit.address)),
            [only] => map.push(sig.routine.clone(), entry(hit.captures[*only])),
            many => {
                for slot in many {
                    map.push(format!("{}.{}", sig.routine, slot), entry(hit.captures[*slot]));
                }
            }
        }
    }
    map
}

pub fn extract_entry_points(rom: &RomImage, db: &SignatureDb) -> Result<RoutineMap> {
    extract_entry_points_with(rom, db, Parallelism::Sequential).map(|(map, _)| map)
}

/// Like [`extract_entry_points`], also returning the raw hits.
pub fn extract_entry_points_with(
    rom: &RomImage,
    db: &SignatureDb,
    parallelism: Parallelism,
) -> Result<(RoutineMap, Vec<MatchHit>)> {
    let usable = db.filter(Some(rom.arch()), None);
    if usable.is_empty() {
        return Err(Error::ArchMismatch(rom.arch().to_string()));
    }
    let hits = scan_all_with(rom, &usable, parallelism)?;
    Ok((fold_hits(&hits, &usable), hits))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Thresholds {
    pub t_derived: u32,
    pub t_original: u32,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            t_derived: 4,
            t_original: 1,
        }
    }
}

impl Thresholds {
    pub fn new(t_derived: u32, t_original: u32) -> Result<Self> {
        if t_derived <= t_original {
            return Err(Error::Thresholds {
                derived: t_derived,
                original: t_original,
            });
        }
        Ok(Thresholds { t_derived, t_original })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "family", rename_all = "snake_case")]
pub enum Verdict {
    DerivedFrom(Family),
    Original,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::DerivedFrom(fam) => write!(f, "derived from {fam}"),
            // absence of evidence against the db in use, nothing stronger
            Verdict::Original => f.write_str("original (no known-family match)"),
            Verdict::Inconclusive => f.write_str("inconclusive"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Confidence {
    High,
    Low,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineageVerdict {
    pub scores: BTreeMap<Family, u32>,
    pub matched_routines: BTreeMap<Family, BTreeSet<String>>,
    pub verdict: Verdict,
    pub confidence: Confidence,
    pub thresholds_used: Thresholds,
}

/// Scores each family by the summed weight of its distinct matched routines
/// and applies the derived/original thresholds. A tie at the top is never
/// resolved in favour of either family.
pub fn classify(rmap: &RoutineMap, thresholds: Thresholds) -> LineageVerdict {
    // routine -> weight; a routine seen under several variants counts once at its largest weight
    let mut per_family: BTreeMap<Family, BTreeMap<&str, u8>> = BTreeMap::new();
    for entry in rmap.entries.values().flatten() {
        let w = per_family
            .entry(entry.family)
            .or_default()
            .entry(entry.routine.as_str())
            .or_insert(0);
        *w = (*w).max(entry.weight);
    }
    let scores: BTreeMap<Family, u32> = Family::ALL
        .iter()
        .map(|f| {
            let s = per_family.get(f).map_or(0, |m| m.values().map(|&w| w as u32).sum());
            (*f, s)
        })
        .collect();
    let matched_routines = per_family
        .iter()
        .map(|(f, m)| (*f, m.keys().map(|r| r.to_string()).collect()))
        .collect();

    let mut ranked: Vec<u32> = scores.values().copied().collect();
    ranked.sort_unstable_by(|a, b| b.cmp(a));
    let (top, runner_up) = (ranked[0], ranked[1]);
    let leaders: Vec<Family> = scores.iter().filter(|(_, &s)| s == top).map(|(f, _)| *f).collect();

    let verdict = if top <= thresholds.t_original {
        Verdict::Original
    } else if top >= thresholds.t_derived && leaders.len() == 1 {
        Verdict::DerivedFrom(leaders[0])
    } else {
        Verdict::Inconclusive
    };
    let confidence = if rmap.is_empty() || top - runner_up >= 2 {
        Confidence::High
    } else {
        Confidence::Low
    };
    LineageVerdict {
        scores,
        matched_routines,
        verdict,
        confidence,
        thresholds_used: thresholds,
    }
}

/// Whether a verdict agrees with the catalog's expectation; `None` when
/// nothing is expected.
pub fn agreement(expected: ExpectedLineage, verdict: Verdict) -> Option<bool> {
    let want = match expected {
        ExpectedLineage::Microsoft => Verdict::DerivedFrom(Family::Microsoft),
        ExpectedLineage::Sinclair => Verdict::DerivedFrom(Family::Sinclair),
        ExpectedLineage::HuBasic => Verdict::DerivedFrom(Family::HuBasic),
        ExpectedLineage::Original => Verdict::Original,
        ExpectedLineage::Unknown => return None,
    };
    Some(verdict == want)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum BatchStatus {
    Classified {
        verdict: LineageVerdict,
        agreement: Option<bool>,
        content_hash: String,
    },
    Skipped {
        reason: String,
    },
    Failed {
        error: String,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchRow {
    pub machine: String,
    pub expected_lineage: ExpectedLineage,
    pub rom_path: Option<String>,
    #[serde(flatten)]
    pub status: BatchStatus,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchOutcome {
    pub rows: Vec<BatchRow>,
}

impl BatchOutcome {
    pub fn verdicts(&self) -> impl Iterator<Item = (&BatchRow, &LineageVerdict, Option<bool>)> {
        self.rows.iter().filter_map(|r| match &r.status {
            BatchStatus::Classified { verdict, agreement, .. } => Some((r, verdict, *agreement)),
            _ => None,
        })
    }

    pub fn skipped(&self) -> impl Iterator<Item = &BatchRow> {
        self.rows.iter().filter(|r| matches!(r.status, BatchStatus::Skipped { .. }))
    }

    pub fn failed(&self) -> impl Iterator<Item = &BatchRow> {
        self.rows.iter().filter(|r| matches!(r.status, BatchStatus::Failed { .. }))
    }
}

/// Classifies every ROM referenced by `catalog`. Relative ROM paths resolve
/// against `root`. Per-ROM failures become rows; output follows catalog order
/// whatever the parallelism.
pub fn batch_classify(
    catalog: &[MachineRecord],
    db: &SignatureDb,
    root: &Path,
    thresholds: Thresholds,
    parallelism: Parallelism,
) -> BatchOutcome {
    struct Job<'a> {
        record: &'a MachineRecord,
        rom: Option<&'a crate::catalog::RomRef>,
    }
    let jobs: Vec<Job> = catalog
        .iter()
        .flat_map(|record| {
            if record.rom_paths.is_empty() {
                vec![Job { record, rom: None }]
            } else {
                record.rom_paths.iter().map(|r| Job { record, rom: Some(r) }).collect()
            }
        })
        .collect();

    let run = |job: &Job| -> BatchRow {
        let row = |rom_path: Option<String>, status| BatchRow {
            machine: job.record.name.clone(),
            expected_lineage: job.record.expected_lineage,
            rom_path,
            status,
        };
        let Some(rom_ref) = job.rom else {
            return row(None, BatchStatus::Skipped { reason: "no ROM file".into() });
        };
        let shown = rom_ref.path.display().to_string();
        let Some(arch) = job.record.arch() else {
            return row(
                Some(shown),
                BatchStatus::Skipped {
                    reason: format!("CPU {} is not decodable", job.record.cpu),
                },
            );
        };
        let path = root.join(&rom_ref.path);
        let result = load_rom(path.as_path(), arch, rom_ref.base_addr)
            .and_then(|rom| extract_entry_points(&rom, db).map(|m| (rom, m)));
        match result {
            Ok((rom, map)) => {
                let verdict = classify(&map, thresholds);
                let agreement = agreement(job.record.expected_lineage, verdict.verdict);
                row(
                    Some(shown),
                    BatchStatus::Classified {
                        verdict,
                        agreement,
                        content_hash: rom.content_hash().to_hex(),
                    },
                )
            }
            Err(e) => row(Some(shown), BatchStatus::Failed { error: e.to_string() }),
        }
    };

    let rows = match parallelism {
        Parallelism::Sequential => jobs.iter().map(run).collect(),
        Parallelism::Parallel => jobs.par_iter().map(run).collect(),
    };
    BatchOutcome { rows }
}
