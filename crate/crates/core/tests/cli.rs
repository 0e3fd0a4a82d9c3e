mod common;

use std::path::Path;

use assert_cmd::Command;
use romlineage::Family;
use serde_json::Value;

fn bin() -> Command {
    Command::cargo_bin("romlineage").unwrap()
}

fn write(dir: &Path, name: &str, bytes: &[u8]) -> String {
    let p = dir.join(name);
    std::fs::write(&p, bytes).unwrap();
    p.display().to_string()
}

fn json(out: &[u8]) -> Value {
    serde_json::from_slice(out).unwrap()
}

#[test]
fn scan_text_lists_routines() {
    let dir = tempfile::tempdir().unwrap();
    let rom = write(dir.path(), "zx.rom", &common::builtin_plant_rom(Family::Sinclair, 1, 0x1000));
    let out = bin().args(["scan", &rom]).assert().success().get_output().stdout.clone();
    let text = String::from_utf8(out).unwrap();
    assert!(text.contains("START_NEW"), "{text}");
    assert!(text.contains("sinclair"), "{text}");
}

#[test]
fn scan_json_shape() {
    let dir = tempfile::tempdir().unwrap();
    let rom = write(dir.path(), "zx.rom", &common::builtin_plant_rom(Family::Sinclair, 1, 0x1000));
    let out = bin().args(["scan", &rom, "--json"]).assert().success().get_output().stdout.clone();
    let v = json(&out);
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["command"], "scan");
    assert_eq!(v["rom"]["name"], "zx.rom");
    assert_eq!(v["rom"]["arch"], "z80");
    assert_eq!(v["rom"]["base_addr"], "0x0000");
    assert!(v["timing"]["elapsed_ms"].is_u64());
    let hits = v["hits"].as_array().unwrap();
    assert!(hits.len() >= 8);
    assert!(hits.iter().all(|h| h["address"].as_str().unwrap().starts_with("0x")));
    assert!(v["routine_map"]["entries"]["NMI"].is_array());
}

#[test]
fn adhoc_pattern_with_capture() {
    let dir = tempfile::tempdir().unwrap();
    let rom = write(dir.path(), "t.bin", &[0x00, 0xCD, 0x34, 0x12, 0xCD, 0x78, 0x56]);
    let out = bin()
        .args(["scan", &rom, "--base", "0x8000", "--pattern", "CD @t:abs16", "--json", "--no-timing"])
        .assert()
        .success()
        .get_output()
        .stdout
        .clone();
    let v = json(&out);
    let hits = v["hits"].as_array().unwrap();
    assert_eq!(hits.len(), 2);
    assert_eq!(hits[0]["address"], "0x8001");
    assert_eq!(hits[0]["captures"]["t"], "0x1234");
    assert_eq!(hits[1]["captures"]["t"], "0x5678");
    assert_eq!(hits[0]["pattern_name"], "adhoc/1");
    assert!(v.get("timing").is_none());
}

#[test]
fn window_selection() {
    let dir = tempfile::tempdir().unwrap();
    let mut bytes = vec![0u8; 0x20000];
    bytes[0x10010..0x10013].copy_from_slice(&[0xCD, 0x00, 0x40]);
    let rom = write(dir.path(), "banked.bin", &bytes);
    // whole file does not fit 16 bits
    bin().args(["scan", &rom, "--pattern", "CD 00 40"]).assert().code(3);
    let out = bin()
        .args(["scan", &rom, "--offset", "0x10000", "--len", "0x4000", "--base", "0xC000"])
        .args(["--pattern", "CD 00 40", "--json", "--no-timing"])
        .assert()
        .success()
        .get_output()
        .stdout
        .clone();
    assert_eq!(json(&out)["hits"][0]["address"], "0xC010");
}

#[test]
fn classify_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let zx = write(dir.path(), "zx.rom", &common::builtin_plant_rom(Family::Sinclair, 2, 0x1000));
    let blank = write(dir.path(), "blank.rom", &common::random_bytes(&mut common::rng(3), 0x1000));
    let out = bin().args(["classify", &zx, "--json", "--no-timing"]).assert().success().get_output().stdout.clone();
    let v = json(&out);
    assert_eq!(v["verdict"]["verdict"]["kind"], "derived_from");
    assert_eq!(v["verdict"]["verdict"]["family"], "sinclair");
    assert_eq!(v["verdict"]["confidence"], "high");
    assert_eq!(v["thresholds"]["t_derived"], 4);

    let out = bin().args(["classify", &blank]).assert().success().get_output().stdout.clone();
    assert!(String::from_utf8(out).unwrap().contains("verdict: original"));
}

#[test]
fn threshold_flags() {
    let dir = tempfile::tempdir().unwrap();
    // one Sinclair routine: score 1, original by default
    let rom = write(dir.path(), "one.rom", &[0xF5, 0xE5, 0x2A, 0xB0, 0x5C, 0x7C, 0xB5, 0x20, 0x01, 0xE9]);
    let kind = |args: &[&str]| {
        let out = bin().args(["classify", &rom, "--json", "--no-timing"]).args(args).assert().success();
        json(&out.get_output().stdout)["verdict"]["verdict"]["kind"].as_str().unwrap().to_string()
    };
    assert_eq!(kind(&[]), "original");
    assert_eq!(kind(&["--t-derived", "1"]), "derived_from");
    assert_eq!(kind(&["--t-derived", "3", "--t-original", "0"]), "inconclusive");
    bin().args(["classify", &rom, "--t-derived", "1", "--t-original", "1"]).assert().code(2);
}

#[test]
fn batch_over_catalog() {
    let dir = tempfile::tempdir().unwrap();
    let roms = dir.path().join("roms");
    std::fs::create_dir(&roms).unwrap();
    std::fs::write(roms.join("hc85.rom"), common::builtin_plant_rom(Family::Sinclair, 4, 0x1000)).unwrap();
    std::fs::write(roms.join("galaksija.rom"), common::random_bytes(&mut common::rng(5), 0x1000)).unwrap();
    let cat = dir.path().join("cat.csv");
    std::fs::write(
        &cat,
        "name,country,cpu,year,expected_lineage,rom_path\n\
         HC 85,Romania,Z80,1985,sinclair,roms/hc85.rom\n\
         Galaksija,Yugoslavia,Z80,1983,original,roms/galaksija.rom\n\
         Primo,Hungary,U880,1984,microsoft,\n\
         PMD 85,Czechoslovakia,MHB8080A,1985,unknown,roms/pmd.rom\n",
    )
    .unwrap();
    let out = bin()
        .args(["classify", "--catalog", cat.to_str().unwrap(), "--json", "--no-timing"])
        .assert()
        .success()
        .get_output()
        .stdout
        .clone();
    let rows = json(&out)["batch"]["rows"].as_array().unwrap().clone();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0]["status"], "classified");
    assert_eq!(rows[0]["agreement"], true);
    assert_eq!(rows[1]["verdict"]["verdict"]["kind"], "original");
    assert_eq!(rows[1]["agreement"], true);
    assert_eq!(rows[2]["status"], "skipped");
    assert_eq!(rows[3]["status"], "skipped");

    let text = bin().args(["classify", "--catalog", cat.to_str().unwrap()]).assert().success();
    assert!(String::from_utf8_lossy(&text.get_output().stdout).contains("HC 85"));
}

#[test]
fn compare_identical_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    let bytes = common::random_bytes(&mut common::rng(6), 2048);
    let a = write(dir.path(), "a.bin", &bytes);
    let b = write(dir.path(), "b.bin", &bytes);
    let out = bin().args(["compare", &a, &b, "--json", "--no-timing"]).assert().success().get_output().stdout.clone();
    let v = json(&out);
    assert_eq!(v["similarity"]["jaccard"]["num"], 1);
    assert_eq!(v["similarity"]["jaccard"]["den"], 1);
    assert_eq!(v["similarity"]["params"]["k"], 16);

    bin().args(["compare", &a, &b, "--k", "3"]).assert().code(2);
    bin().args(["compare", &a, &b, "--winnow", "8", "--mask-operands"]).assert().success();
    let tiny = write(dir.path(), "tiny.bin", &[1, 2, 3]);
    bin().args(["compare", &a, &tiny]).assert().code(2);
}

#[test]
fn emit_defs_formats_and_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let rom = write(dir.path(), "zx.rom", &common::builtin_plant_rom(Family::Sinclair, 7, 0x1000));
    let asm = bin().args(["emit-defs", &rom]).assert().success().get_output().stdout.clone();
    let asm = String::from_utf8(asm).unwrap();
    assert!(asm.lines().any(|l| l.starts_with("defc START_NEW = $")), "{asm}");

    let hdr = bin()
        .args(["emit-defs", &rom, "--format", "header", "--prefix", "ZX_"])
        .assert()
        .success()
        .get_output()
        .stdout
        .clone();
    assert!(String::from_utf8(hdr).unwrap().contains("#define ZX_NMI 0x"));

    let report = bin().args(["scan", &rom, "--json"]).assert().success().get_output().stdout.clone();
    let rp = write(dir.path(), "report.json", &report);
    let again = bin().args(["emit-defs", "--from-report", &rp]).assert().success().get_output().stdout.clone();
    assert_eq!(String::from_utf8(again).unwrap(), asm);
}

#[test]
fn nothing_to_emit_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let rom = write(dir.path(), "blank.rom", &[0u8; 512]);
    bin().args(["emit-defs", &rom]).assert().code(4);
}

#[test]
fn error_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let rom = write(dir.path(), "r.bin", &[0u8; 64]);
    let empty = write(dir.path(), "e.bin", &[]);
    bin().args(["scan", "/nonexistent.rom"]).assert().code(3);
    bin().args(["scan", &empty]).assert().code(3);
    bin().args(["scan", &rom, "--pattern", "CD ?"]).assert().code(2);
    bin().args(["scan", &rom, "--pattern", "CD ?? ??", "--min-literals", "6"]).assert().code(2);
    bin().args(["scan", &rom, "--arch", "68000"]).assert().code(2);
    bin().args(["frobnicate"]).assert().code(2);
    bin().args(["scan", &rom, "--arch", "6502"]).assert().success();
    bin().args(["scan", &rom, "--threads", "0"]).assert().code(2);

    let bad_db = write(dir.path(), "bad.sig", b"sinclair|z80|X|v|1|CD ??\n");
    bin().args(["scan", &rom, "--db", &bad_db]).assert().code(3);
    // a db with no 6502 signatures cannot scan a 6502 image
    let z80_db = write(dir.path(), "z.sig", b"sinclair|z80|NMI|v|1|F5 E5 2A B0 5C 7C\n");
    bin().args(["scan", &rom, "--arch", "6502", "--db", &z80_db]).assert().code(2);
}

#[test]
fn catalog_validate() {
    let data = concat!(env!("CARGO_MANIFEST_DIR"), "/data/eastern_europe.csv");
    let out = bin().args(["catalog", "validate", data]).assert().success().get_output().stdout.clone();
    let text = String::from_utf8(out).unwrap();
    assert!(text.contains("records"), "{text}");

    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.csv", b"name,country,cpu,year,expected_lineage,rom_path\nX,Y,Z80,nineteen,original,\n");
    let err = bin().args(["catalog", "validate", &bad]).assert().code(3).get_output().stderr.clone();
    assert!(String::from_utf8(err).unwrap().contains("line 2"));
}

#[test]
fn help_and_version_succeed() {
    bin().arg("--help").assert().success();
    bin().arg("--version").assert().success();
    bin().args(["scan", "--help"]).assert().success();
}
