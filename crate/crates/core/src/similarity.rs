//! k-gram fingerprints and set-overlap similarity between images.
//!
//! Grams are hashed with a polynomial rolling hash over `byte + 1`, base
//! `0x100000001B3`, modulo 2^64, followed by the SplitMix64 finalizer. Both
//! steps use fixed constants, so fingerprints are comparable across runs and
//! hosts. Optional winnowing keeps the minimum hash of every window of `w`
//! consecutive grams (leftmost minimum on ties).

use std::collections::VecDeque;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::isa::{decode_bytes, TransferKind};
use crate::rom::{ContentHash, RomImage};

pub const DEFAULT_K: usize = 16;
pub const MIN_K: usize = 4;
pub const HASH_BASE: u64 = 0x0000_0100_0000_01B3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FingerprintParams {
    pub k: usize,
    pub winnow: Option<usize>,
    /// Zero the operand bytes of absolute calls/jumps before hashing.
    pub mask_operands: bool,
}

impl Default for FingerprintParams {
    fn default() -> Self {
        FingerprintParams {
            k: DEFAULT_K,
            winnow: None,
            mask_operands: false,
        }
    }
}

impl FingerprintParams {
    pub fn new(k: usize, winnow: Option<usize>, mask_operands: bool) -> Result<Self> {
        if k < MIN_K {
            return Err(Error::InvalidParam(format!("k must be at least {MIN_K}, got {k}")));
        }
        if winnow == Some(0) {
            return Err(Error::InvalidParam("winnow window must be at least 1".into()));
        }
        Ok(FingerprintParams {
            k,
            winnow,
            mask_operands,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FingerprintSet {
    pub params: FingerprintParams,
    /// Sorted, deduplicated.
    pub hashes: Vec<u64>,
    pub source_hash: ContentHash,
}

impl FingerprintSet {
    pub fn len(&self) -> usize {
        self.hashes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hashes.is_empty()
    }
}

fn finalize(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hash of every k-gram, in position order.
pub fn gram_hashes(bytes: &[u8], k: usize) -> Vec<u64> {
    if k == 0 || bytes.len() < k {
        return Vec::new();
    }
    // HASH_BASE^(k-1), the weight of the byte leaving the window
    let top = (1..k).fold(1u64, |acc, _| acc.wrapping_mul(HASH_BASE));
    let mut h = bytes[..k]
        .iter()
        .fold(0u64, |acc, &b| acc.wrapping_mul(HASH_BASE).wrapping_add(b as u64 + 1));
    let mut out = Vec::with_capacity(bytes.len() - k + 1);
    out.push(finalize(h));
    for i in k..bytes.len() {
        h = h
            .wrapping_sub((bytes[i - k] as u64 + 1).wrapping_mul(top))
            .wrapping_mul(HASH_BASE)
            .wrapping_add(bytes[i] as u64 + 1);
        out.push(finalize(h));
    }
    out
}

/// Minimum of every `w`-window (leftmost on ties). Fewer than `w` hashes
/// form a single window.
pub fn winnow(hashes: &[u64], w: usize) -> Vec<u64> {
    if hashes.is_empty() {
        return Vec::new();
    }
    let w = w.clamp(1, hashes.len());
    let mut picked = Vec::new();
    let mut window: VecDeque<usize> = VecDeque::new();
    for (i, &h) in hashes.iter().enumerate() {
        while window.back().is_some_and(|&j| hashes[j] > h) {
            window.pop_back();
        }
        window.push_back(i);
        if window.front().is_some_and(|&j| j + w <= i) {
            window.pop_front();
        }
        if i + 1 >= w {
            picked.push(hashes[*window.front().expect("window holds i")]);
        }
    }
    picked
}

/// Copy of the image with the two operand bytes after every absolute
/// call/jump opcode zeroed. Decodes forward, skipping whole instructions
/// once recognized.
pub fn mask_operands(rom: &RomImage) -> Vec<u8> {
    let src = rom.bytes();
    let mut out = src.to_vec();
    let mut i = 0;
    while i < src.len() {
        match decode_bytes(rom.arch(), &src[i..], rom.address_of(i)) {
            Ok(t) if matches!(t.kind, TransferKind::CallAbs | TransferKind::JumpAbs) && t.length == 3 => {
                out[i + 1] = 0;
                out[i + 2] = 0;
                i += 3;
            }
            _ => i += 1,
        }
    }
    out
}

pub fn fingerprint(rom: &RomImage, k: usize, winnow_w: Option<usize>) -> Result<FingerprintSet> {
    fingerprint_with(rom, FingerprintParams::new(k, winnow_w, false)?)
}

pub fn fingerprint_with(rom: &RomImage, params: FingerprintParams) -> Result<FingerprintSet> {
    if rom.len() < params.k {
        return Err(Error::TooShort {
            len: rom.len(),
            k: params.k,
        });
    }
    let masked;
    let bytes = if params.mask_operands {
        masked = mask_operands(rom);
        &masked[..]
    } else {
        rom.bytes()
    };
    let grams = gram_hashes(bytes, params.k);
    let mut hashes = match params.winnow {
        Some(w) => winnow(&grams, w),
        None => grams,
    };
    hashes.sort_unstable();
    hashes.dedup();
    Ok(FingerprintSet {
        params,
        hashes,
        source_hash: rom.content_hash(),
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimilarityScore {
    pub jaccard: Ratio<u64>,
    pub containment_a_in_b: Ratio<u64>,
    pub containment_b_in_a: Ratio<u64>,
    pub shared_grams: u64,
    pub size_a: u64,
    pub size_b: u64,
}

fn intersection_size(a: &[u64], b: &[u64]) -> u64 {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

pub fn compare(a: &FingerprintSet, b: &FingerprintSet) -> Result<SimilarityScore> {
    if a.params != b.params {
        return Err(Error::ParamMismatch(format!("{:?} vs {:?}", a.params, b.params)));
    }
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidParam("cannot compare an empty fingerprint".into()));
    }
    let shared = intersection_size(&a.hashes, &b.hashes);
    let (na, nb) = (a.len() as u64, b.len() as u64);
    Ok(SimilarityScore {
        jaccard: Ratio::new(shared, na + nb - shared),
        containment_a_in_b: Ratio::new(shared, na),
        containment_b_in_a: Ratio::new(shared, nb),
        shared_grams: shared,
        size_a: na,
        size_b: nb,
    })
}

pub fn ratio_to_f64(r: &Ratio<u64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rom::Architecture;

    fn rom(bytes: Vec<u8>) -> RomImage {
        RomImage::from_bytes(bytes, Architecture::Z80, 0, "t").unwrap()
    }

    fn lcg(seed: u64, n: usize) -> Vec<u8> {
        let mut s = seed;
        (0..n)
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (s >> 56) as u8
            })
            .collect()
    }

    #[test]
    fn one_gram() {
        let f = fingerprint(&rom(vec![0x42; 16]), 16, None).unwrap();
        assert_eq!(f.len(), 1);
    }

    #[test]
    fn constant_rom_has_single_distinct_gram() {
        let f = fingerprint(&rom(vec![7; 1000]), 8, None).unwrap();
        assert_eq!(f.len(), 1);
    }

    #[test]
    fn rolling_matches_direct() {
        let bytes = lcg(3, 300);
        let rolled = gram_hashes(&bytes, 9);
        for (i, h) in rolled.iter().enumerate() {
            let direct = bytes[i..i + 9]
                .iter()
                .fold(0u64, |acc, &b| acc.wrapping_mul(HASH_BASE).wrapping_add(b as u64 + 1));
            assert_eq!(*h, finalize(direct));
        }
    }

    #[test]
    fn deterministic_and_winnowed_subset() {
        let r = rom(lcg(11, 4096));
        let a = fingerprint(&r, 16, None).unwrap();
        assert_eq!(a, fingerprint(&r, 16, None).unwrap());
        let w = fingerprint(&r, 16, Some(8)).unwrap();
        assert!(w.len() < a.len());
        assert!(w.hashes.iter().all(|h| a.hashes.binary_search(h).is_ok()));
    }

    #[test]
    fn winnow_leftmost_minimum() {
        assert_eq!(winnow(&[5, 3, 3, 9, 1], 2), vec![3, 3, 3, 1]);
        assert_eq!(winnow(&[4, 2, 8], 10), vec![2]);
        assert_eq!(winnow(&[4, 2, 8], 1), vec![4, 2, 8]);
        // brute-force oracle
        let hs: Vec<u64> = lcg(5, 200).into_iter().map(|b| (b % 17) as u64).collect();
        for w in 1..12 {
            let expect: Vec<u64> = hs.windows(w).map(|win| *win.iter().min().unwrap()).collect();
            assert_eq!(winnow(&hs, w), expect);
        }
    }

    #[test]
    fn errors() {
        assert!(matches!(fingerprint(&rom(vec![0; 8]), 16, None), Err(Error::TooShort { len: 8, k: 16 })));
        assert!(matches!(fingerprint(&rom(vec![0; 8]), 3, None), Err(Error::InvalidParam(_))));
        assert!(matches!(fingerprint(&rom(vec![0; 8]), 4, Some(0)), Err(Error::InvalidParam(_))));
        let a = fingerprint(&rom(lcg(1, 64)), 8, None).unwrap();
        let b = fingerprint(&rom(lcg(1, 64)), 9, None).unwrap();
        assert!(matches!(compare(&a, &b), Err(Error::ParamMismatch(_))));
    }

    #[test]
    fn self_similarity() {
        let f = fingerprint(&rom(lcg(9, 512)), 8, None).unwrap();
        let s = compare(&f, &f).unwrap();
        assert_eq!(s.jaccard, Ratio::from_integer(1));
        assert_eq!(s.shared_grams, f.len() as u64);
    }

    #[test]
    fn masking_zeroes_call_operands() {
        let r = rom(vec![0x00, 0xCD, 0x34, 0x12, 0xC3, 0x00, 0x80, 0x18, 0x05, 0xCD]);
        assert_eq!(mask_operands(&r), vec![0x00, 0xCD, 0, 0, 0xC3, 0, 0, 0x18, 0x05, 0xCD]);

        // same code linked at two different addresses
        let code = |base: u16| {
            let mut v = lcg(2, 200);
            for i in (0..200).step_by(10) {
                v[i] = 0x00;
            }
            for i in (0..190).step_by(20) {
                let [lo, hi] = (base + i as u16).to_le_bytes();
                v[i] = 0xCD;
                v[i + 1] = lo;
                v[i + 2] = hi;
                v[i + 3] = 0x00;
            }
            v
        };
        let p = FingerprintParams::new(8, None, true).unwrap();
        let a = fingerprint_with(&rom(code(0x1000)), p).unwrap();
        let b = fingerprint_with(&rom(code(0x5000)), p).unwrap();
        let masked = compare(&a, &b).unwrap();
        let plain = compare(
            &fingerprint(&rom(code(0x1000)), 8, None).unwrap(),
            &fingerprint(&rom(code(0x5000)), 8, None).unwrap(),
        )
        .unwrap();
        assert!(masked.jaccard > plain.jaccard);
    }
}
