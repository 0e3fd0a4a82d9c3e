//! The signature set compiled into the binary.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use crate::rom::Architecture;
use crate::signature::{parse_signatures, DbSource, Family, SignatureDb};

pub const BUILTIN_TEXT: &str = include_str!("../data/builtin.sig");

pub fn builtin_db() -> SignatureDb {
    static DB: OnceLock<SignatureDb> = OnceLock::new();
    DB.get_or_init(|| parse_signatures(BUILTIN_TEXT, DbSource::Builtin).expect("builtin signatures are valid"))
        .clone()
}

/// Distinct routine names per (family, arch).
pub fn coverage(db: &SignatureDb) -> BTreeMap<(Family, Architecture), BTreeSet<String>> {
    let mut out: BTreeMap<_, BTreeSet<String>> = BTreeMap::new();
    for sig in db.signatures() {
        out.entry((sig.family, sig.arch)).or_default().insert(sig.routine.clone());
    }
    out
}
