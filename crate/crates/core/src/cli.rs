//! Command-line front end. [`run`] does everything except own the process,
//! so tests can drive it with in-memory writers.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::catalog::load_catalog;
use crate::error::{Error, Result};
use crate::lineage::{batch_classify, classify, extract_entry_points_with, Thresholds};
use crate::pattern::{compile_pattern_with, scan_named, CompileOptions, MatchHit, Parallelism};
use crate::report::{
    batch_table, emit_defs, hits_table, routine_table, similarity_text, verdict_text, DefsFormat, Report,
    RomIdentity, SimilaritySection, Timing,
};
use crate::rom::{load_rom, select_window, Architecture, RomImage};
use crate::signature::{builtin_db, load_signatures, SignatureDb};
use crate::similarity::{compare, fingerprint_with, FingerprintParams, DEFAULT_K};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INPUT: i32 = 3;
pub const EXIT_NOTHING: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "romlineage", version, about = "Signature scanning and BASIC lineage analysis for Z80/6502 ROMs")]
struct Cli {
    /// Signature database file; replaces the built-in set.
    #[arg(long, global = true, value_name = "FILE")]
    db: Option<PathBuf>,

    /// Emit the JSON report instead of text.
    #[arg(long, global = true)]
    json: bool,

    /// Leave the timing section out of JSON output.
    #[arg(long, global = true)]
    no_timing: bool,

    /// Worker threads for scanning; omitted means single-threaded.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// List signature hits and the routine map for one ROM.
    Scan(ScanArgs),
    /// Classify one ROM, or every ROM in a catalog.
    Classify(ClassifyArgs),
    /// k-gram similarity between two ROMs.
    Compare(CompareArgs),
    /// Symbol definitions from a ROM or a saved report.
    EmitDefs(EmitArgs),
    /// Catalog utilities.
    #[command(subcommand)]
    Catalog(CatalogCommand),
}

#[derive(Debug, Args)]
struct RomArgs {
    /// CPU architecture: z80 or 6502.
    #[arg(long, default_value = "z80")]
    arch: Architecture,

    /// Load address of the first byte (of the window, if one is selected).
    #[arg(long, default_value = "0", value_parser = parse_addr)]
    base: u16,

    /// Start of the window inside the file.
    #[arg(long, value_parser = parse_usize, requires = "len")]
    offset: Option<usize>,

    /// Window length.
    #[arg(long, value_parser = parse_usize)]
    len: Option<usize>,
}

#[derive(Debug, Args)]
struct ScanArgs {
    rom: PathBuf,

    #[command(flatten)]
    rom_args: RomArgs,

    /// Ad-hoc pattern to scan for instead of the database (repeatable).
    #[arg(long = "pattern", value_name = "DSL")]
    patterns: Vec<String>,

    /// Literal floor for ad-hoc patterns.
    #[arg(long, default_value_t = 1)]
    min_literals: usize,
}

#[derive(Debug, Args)]
struct ThresholdArgs {
    #[arg(long)]
    t_derived: Option<u32>,

    #[arg(long)]
    t_original: Option<u32>,
}

impl ThresholdArgs {
    fn resolve(&self) -> Result<Thresholds> {
        let def = Thresholds::default();
        match (self.t_derived, self.t_original) {
            (None, None) => Ok(def),
            (Some(d), None) => Thresholds::new(d, def.t_original.min(d.saturating_sub(1))),
            (None, Some(o)) => Thresholds::new(def.t_derived, o),
            (Some(d), Some(o)) => Thresholds::new(d, o),
        }
    }
}

#[derive(Debug, Args)]
struct ClassifyArgs {
    #[arg(required_unless_present = "catalog", conflicts_with = "catalog")]
    rom: Option<PathBuf>,

    #[command(flatten)]
    rom_args: RomArgs,

    /// Catalog CSV; every referenced ROM is classified.
    #[arg(long, value_name = "FILE")]
    catalog: Option<PathBuf>,

    /// Directory catalog ROM paths are relative to (default: the catalog's).
    #[arg(long, value_name = "DIR")]
    root: Option<PathBuf>,

    #[command(flatten)]
    thresholds: ThresholdArgs,
}

#[derive(Debug, Args)]
struct CompareArgs {
    a: PathBuf,
    b: PathBuf,

    #[arg(long, default_value = "z80")]
    arch: Architecture,

    #[arg(long, default_value_t = DEFAULT_K)]
    k: usize,

    /// Winnowing window; omitted keeps every k-gram.
    #[arg(long, value_name = "W")]
    winnow: Option<usize>,

    /// Zero the operands of absolute calls and jumps before hashing.
    #[arg(long)]
    mask_operands: bool,
}

#[derive(Debug, Args)]
struct EmitArgs {
    #[arg(required_unless_present = "from_report", conflicts_with = "from_report")]
    rom: Option<PathBuf>,

    #[command(flatten)]
    rom_args: RomArgs,

    /// Saved `--json` report holding a routine map.
    #[arg(long, value_name = "FILE")]
    from_report: Option<PathBuf>,

    #[arg(long, default_value = "asm")]
    format: DefsFormat,

    /// Prepended to every symbol.
    #[arg(long, default_value = "")]
    prefix: String,
}

#[derive(Debug, Subcommand)]
enum CatalogCommand {
    /// Parse a catalog and report what would be analyzed.
    Validate { file: PathBuf },
}

fn parse_addr(s: &str) -> std::result::Result<u16, String> {
    crate::parse_u16(s).ok_or_else(|| format!("not a 16-bit address: {s:?}"))
}

fn parse_usize(s: &str) -> std::result::Result<usize, String> {
    let t = s.trim().to_ascii_lowercase();
    let r = match t.strip_prefix("0x").or_else(|| t.strip_prefix('$')) {
        Some(h) => usize::from_str_radix(h, 16),
        None => t.parse(),
    };
    r.map_err(|_| format!("not a size: {s:?}"))
}

/// Exit status for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NothingToEmit => EXIT_NOTHING,
        Error::DslSyntax { .. }
        | Error::WeakPattern { .. }
        | Error::DuplicateSlot(_)
        | Error::Thresholds { .. }
        | Error::TooShort { .. }
        | Error::ParamMismatch(_)
        | Error::InvalidParam(_)
        | Error::Window(_)
        | Error::ArchMismatch(_) => EXIT_USAGE,
        _ => EXIT_INPUT,
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    let result = match cli.threads {
        Some(0) => Err(Error::InvalidParam("--threads must be at least 1".into())),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(&cli, Parallelism::Parallel)),
            Err(e) => Err(Error::InvalidParam(format!("thread pool: {e}"))),
        },
        None => dispatch(&cli, Parallelism::Sequential),
    };
    match result.and_then(|text| out.write_all(text.as_bytes()).map_err(|e| Error::io("<stdout>", e))) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "romlineage: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cli: &Cli, par: Parallelism) -> Result<String> {
    let started = Instant::now();
    let finish = |mut report: Report, text: String| -> String {
        if cli.json {
            if !cli.no_timing {
                report.timing = Some(Timing {
                    elapsed_ms: started.elapsed().as_millis() as u64,
                });
            }
            report.to_json()
        } else {
            text
        }
    };
    match &cli.command {
        Command::Scan(a) => {
            let rom = open_rom(&a.rom, &a.rom_args)?;
            let mut report = Report::new("scan");
            report.rom = Some(RomIdentity::from(&rom));
            let mut text = String::new();
            if a.patterns.is_empty() {
                let db = open_db(cli)?;
                let (rmap, hits) = extract_entry_points_with(&rom, &db, par)?;
                text.push_str(&hits_table(&hits));
                text.push('\n');
                text.push_str(&routine_table(&rmap));
                report.db_version = Some(db.db_version().to_string());
                report.hits = Some(hits);
                report.routine_map = Some(rmap);
            } else {
                let hits = adhoc_scan(&rom, &a.patterns, a.min_literals)?;
                text.push_str(&hits_table(&hits));
                report.hits = Some(hits);
            }
            Ok(finish(report, text))
        }
        Command::Classify(a) => {
            let thresholds = a.thresholds.resolve()?;
            let db = open_db(cli)?;
            let mut report = Report::new("classify");
            report.db_version = Some(db.db_version().to_string());
            report.thresholds = Some(thresholds);
            if let Some(cat) = &a.catalog {
                let records = load_catalog(cat)?;
                let root = a
                    .root
                    .clone()
                    .unwrap_or_else(|| cat.parent().map(Path::to_path_buf).unwrap_or_default());
                let batch = batch_classify(&records, &db, &root, thresholds, par);
                let text = batch_table(&batch);
                report.batch = Some(batch);
                return Ok(finish(report, text));
            }
            let rom = open_rom(a.rom.as_deref().expect("clap requires a ROM"), &a.rom_args)?;
            let (rmap, _) = extract_entry_points_with(&rom, &db, par)?;
            let verdict = classify(&rmap, thresholds);
            let mut text = routine_table(&rmap);
            text.push('\n');
            text.push_str(&verdict_text(&verdict));
            report.rom = Some(RomIdentity::from(&rom));
            report.routine_map = Some(rmap);
            report.verdict = Some(verdict);
            Ok(finish(report, text))
        }
        Command::Compare(a) => {
            let params = FingerprintParams::new(a.k, a.winnow, a.mask_operands)?;
            let ra = load_rom(a.a.as_path(), a.arch, 0)?;
            let rb = load_rom(a.b.as_path(), a.arch, 0)?;
            let score = compare(&fingerprint_with(&ra, params)?, &fingerprint_with(&rb, params)?)?;
            let section = SimilaritySection::new(&ra, &rb, params, &score);
            let text = similarity_text(&section);
            let mut report = Report::new("compare");
            report.similarity = Some(section);
            Ok(finish(report, text))
        }
        Command::EmitDefs(a) => {
            let rmap = match &a.from_report {
                Some(path) => {
                    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                    Report::from_json(&text)?.routine_map.unwrap_or_default()
                }
                None => {
                    let rom = open_rom(a.rom.as_deref().expect("clap requires a ROM"), &a.rom_args)?;
                    extract_entry_points_with(&rom, &open_db(cli)?, par)?.0
                }
            };
            // definitions are the output either way; --json has no meaning here
            emit_defs(&rmap, a.format, &a.prefix)
        }
        Command::Catalog(CatalogCommand::Validate { file }) => {
            let records = load_catalog(file)?;
            let analyzable = records.iter().filter(|r| r.analyzable()).count();
            let with_roms = records.iter().filter(|r| !r.rom_paths.is_empty()).count();
            Ok(format!(
                "{}: {} records, {analyzable} with a decodable CPU, {with_roms} with ROM files\n",
                file.display(),
                records.len()
            ))
        }
    }
}

fn open_rom(path: &Path, a: &RomArgs) -> Result<RomImage> {
    let rom = match (a.offset, a.len) {
        (None, None) => load_rom(path, a.arch, a.base)?,
        (off, Some(len)) => select_window(&load_rom(path, a.arch, 0)?, off.unwrap_or(0), len, a.base)?,
        (Some(_), None) => unreachable!("clap enforces --len with --offset"),
    };
    rom.ensure_addressable()?;
    Ok(rom)
}

fn open_db(cli: &Cli) -> Result<SignatureDb> {
    match &cli.db {
        Some(path) => load_signatures(path),
        None => Ok(builtin_db()),
    }
}

fn adhoc_scan(rom: &RomImage, patterns: &[String], min_literals: usize) -> Result<Vec<MatchHit>> {
    let mut hits = Vec::new();
    for (i, text) in patterns.iter().enumerate() {
        let p = compile_pattern_with(text, CompileOptions::test_mode(min_literals))?;
        hits.extend(scan_named(rom, &p, &format!("adhoc/{}", i + 1))?);
    }
    hits.sort_by(|a, b| (a.offset, &a.pattern_name).cmp(&(b.offset, &b.pattern_name)));
    Ok(hits)
}
