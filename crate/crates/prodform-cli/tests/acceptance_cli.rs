//! Acceptance criterion 10: the full gallery suite through `run` finishes in
//! budget, reports are deterministic, and the exit-code contract holds on
//! the three reference scenarios.

use std::io::Write;
use std::path::PathBuf;
use std::process::Command;
use std::time::Instant;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_prodform"))
}

fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

#[test]
fn acceptance_10_cli_contract() {
    let started = Instant::now();

    // Full gallery sweep: one generated scenario per preset.
    let list = bin().arg("gallery").output().unwrap();
    assert!(list.status.success());
    let listing = String::from_utf8(list.stdout).unwrap();
    let presets: Vec<&str> =
        listing.lines().filter_map(|l| l.split_whitespace().next()).collect();
    assert!(presets.len() >= 20, "gallery lists {} presets", presets.len());
    let dir = std::env::temp_dir().join("prodform-acceptance");
    std::fs::create_dir_all(&dir).unwrap();
    for preset in &presets {
        let path = dir.join(format!("{preset}.scn"));
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(
            f,
            "name = sweep-{preset}\nsource {{\n  kind = gallery\n  preset = {preset}\n}}\n\
             grid {{\n  per_axis = 2\n}}\nchecks = [tensors, classify]"
        )
        .unwrap();
        let out = bin().arg("run").arg(&path).output().unwrap();
        assert_eq!(
            out.status.code(),
            Some(0),
            "{preset}: {}\n{}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        );
    }

    // Exit-code contract on the three reference scenarios.
    let ok = bin().arg("run").arg(scenario_path("diagonal-s2.scn")).output().unwrap();
    assert_eq!(ok.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&ok.stdout).contains("verdict=TotGeod_1_3 case (iii)"));
    let malformed = bin().arg("run").arg(scenario_path("bad-ambient.scn")).output().unwrap();
    assert_eq!(malformed.status.code(), Some(2));
    let strict = bin().arg("run").arg(scenario_path("strict-tolerance.scn")).output().unwrap();
    assert_eq!(strict.status.code(), Some(1));

    // Deterministic reports modulo the timing field.
    let strip = |text: &str| -> String {
        text.lines().filter(|l| !l.contains("timing_ms")).collect::<Vec<_>>().join("\n")
    };
    let r1 = dir.join("det1.json");
    let r2 = dir.join("det2.json");
    for p in [&r1, &r2] {
        let out = bin()
            .arg("run")
            .arg(scenario_path("slice-sphere.scn"))
            .arg("--out")
            .arg(p)
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0));
    }
    assert_eq!(
        strip(&std::fs::read_to_string(&r1).unwrap()),
        strip(&std::fs::read_to_string(&r2).unwrap())
    );

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 300.0, "took {elapsed:?}");
    let _ = std::fs::remove_dir_all(&dir);
    println!(
        "ACCEPTANCE 10 PASS: {} gallery scenarios, exit codes 0/2/1 honored, \
         deterministic reports, {elapsed:?}",
        presets.len()
    );
}
