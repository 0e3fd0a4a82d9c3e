use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("ROM image is empty")]
    EmptyRom,

    #[error("ROM image of {0} bytes exceeds the 1 MiB limit")]
    RomTooLarge(usize),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("window error: {0}")]
    Window(String),

    #[error("image at base {base:#06x} with {len} bytes does not fit the 16-bit address space; select a window first")]
    AddressSpace { base: u16, len: usize },

    #[error("catalog line {line}: {message}")]
    CatalogParse { line: u64, message: String },

    #[error("truncated instruction at offset {offset:#x}: need {needed} bytes, {available} available")]
    TruncatedInstruction {
        offset: usize,
        needed: usize,
        available: usize,
    },

    #[error("displacement {displacement} from {at:#06x} to {target:#06x} does not fit in a signed byte")]
    Range {
        at: u16,
        target: u16,
        displacement: i32,
    },

    #[error("{0}")]
    Unencodable(String),

    #[error("pattern syntax error at token {position} ({token:?}): {message}")]
    DslSyntax {
        token: String,
        position: usize,
        message: String,
    },

    #[error("pattern has {literals} literal bytes, at least {required} required")]
    WeakPattern { literals: usize, required: usize },

    #[error("duplicate capture slot {0:?}")]
    DuplicateSlot(String),

    #[error("pattern window of {pattern_len} bytes is longer than the {rom_len}-byte image")]
    PatternTooLong { pattern_len: usize, rom_len: usize },

    #[error("signature load error ({name}): {cause}")]
    SignatureLoad { name: String, cause: String },

    #[error("signature database has no entries for {0}")]
    ArchMismatch(String),

    #[error("invalid thresholds: t_derived ({derived}) must exceed t_original ({original})")]
    Thresholds { derived: u32, original: u32 },

    #[error("image of {len} bytes is shorter than k = {k}")]
    TooShort { len: usize, k: usize },

    #[error("fingerprint parameter mismatch: {0}")]
    ParamMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("nothing to emit: routine map is empty")]
    NothingToEmit,

    #[error("report error: {0}")]
    Report(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
