//! Generators shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use romlineage::signature::DbSource;
use romlineage::{builtin_db, Architecture, Family, Pattern, PatternElement, SignatureDb};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_bytes(rng: &mut impl RngCore, len: usize) -> Vec<u8> {
    let mut v = vec![0u8; len];
    rng.fill_bytes(&mut v);
    v
}

/// Concrete bytes matching `pattern`; wildcards and slots draw from `rng`.
pub fn instantiate(pattern: &Pattern, rng: &mut impl RngCore) -> Vec<u8> {
    let mut out = Vec::with_capacity(pattern.byte_len());
    for e in pattern.elements() {
        match e {
            PatternElement::Literal(b) => out.push(*b),
            PatternElement::CaptureAbs16(_) => out.extend((rng.next_u32() as u16).to_le_bytes()),
            _ => out.push(rng.next_u32() as u8),
        }
    }
    out
}

/// One synthetic routine: eight random literals, optionally followed by an
/// abs16 slot.
pub struct SynthSig {
    pub family: Family,
    pub routine: String,
    pub weight: u8,
    pub text: String,
}

/// `per_family` routines for each of the three families, weights 1..=3.
pub fn synthetic_db(rng: &mut ChaCha8Rng, per_family: usize) -> (SignatureDb, Vec<SynthSig>) {
    let mut sigs = Vec::new();
    for family in Family::ALL {
        for i in 0..per_family {
            let mut text: Vec<String> = (0..8).map(|_| format!("{:02X}", rng.gen::<u8>())).collect();
            if rng.gen_bool(0.5) {
                text.push(format!("@r{i}:abs16"));
            }
            sigs.push(SynthSig {
                family,
                routine: format!("R{i}"),
                weight: rng.gen_range(1..=3),
                text: text.join(" "),
            });
        }
    }
    let lines: String = sigs
        .iter()
        .map(|s| format!("{}|z80|{}|synthetic|{}|{}\n", s.family.as_str(), s.routine, s.weight, s.text))
        .collect();
    let db = romlineage::signature::parse_signatures(&format!("#! db_version = synthetic\n{lines}"), DbSource::Builtin)
        .unwrap();
    (db, sigs)
}

/// Filler with every built-in signature of `family` planted at spaced
/// offsets. Deterministic for a given seed.
pub fn builtin_plant_rom(family: Family, seed: u64, len: usize) -> Vec<u8> {
    let mut r = rng(seed);
    let mut rom = random_bytes(&mut r, len);
    let mut at = 0x40;
    for sig in builtin_db().signatures() {
        if sig.family != family || sig.arch != Architecture::Z80 {
            continue;
        }
        let bytes = instantiate(&sig.pattern, &mut r);
        rom[at..at + bytes.len()].copy_from_slice(&bytes);
        at += bytes.len() + 0x30;
    }
    assert!(at < len, "ROM too small for plants");
    rom
}
