//! Compiles a C translation unit against the generated header.

use std::path::Path;
use std::process::Command;

const PROBE: &str = r#"
#include "pixelcode.h"
int probe(void) {
    PcModel *model = 0;
    PcCodebook *book = 0;
    size_t q = 0, k = 0, r = 0, idx = 0;
    double out[8] = {0}, level = 0, gain = 0;
    unsigned char bits[2] = {0, 1};
    char msg[64];
    PcStatus s = pc_model_synthesize(2, 4, 1, &model);
    s = pc_model_dims(model, &q, &k);
    s = pc_model_validate(model, &r);
    s = pc_port_currents(model, bits, 2, out);
    s = pc_radiation_pattern(model, bits, 2, true, out);
    s = pc_eadof(model, 0.998, &r);
    s = pc_capacity_uniform(out, 1, 1, 1.0, 1.0, &level);
    s = pc_capacity_waterfilling(out, 1, 1, 1.0, 1.0, &level);
    s = pc_waterfill(out, 2, 1.0, 1.0, out, &level);
    s = pc_model_save(model, "m.json");
    s = pc_model_load("m.json", &model);
    s = pc_codebook_load("c.json", &book);
    s = pc_codebook_len(book, &r);
    s = pc_codebook_select(book, model, out, out, 1, &idx, &gain);
    pc_last_error_message(msg, sizeof msg);
    pc_codebook_free(book);
    pc_model_free(model);
    return s == PC_STATUS_OK ? (int)pc_last_error_length() : -1;
}
"#;

#[test]
fn header_compiles_as_c() {
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    assert!(include.join("pixelcode.h").exists(), "header was not generated");
    let dir = tempfile::tempdir().unwrap();
    let source = dir.path().join("probe.c");
    std::fs::write(&source, PROBE).unwrap();
    let compiler = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let status = Command::new(&compiler)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(&include)
        .arg(&source)
        .status();
    match status {
        Ok(s) => assert!(s.success(), "C compiler rejected the header"),
        Err(e) => panic!("no C compiler available ({compiler}): {e}"),
    }
}
