//! Pinned-seed CSV regression. Set COGMASK_BLESS=1 to rewrite the fixtures.

use std::path::{Path, PathBuf};

use cogmask::harness::{run_experiment, ExperimentConfig, ExperimentKind};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

fn check(cfg: &mut ExperimentConfig, files: &[&str]) {
    let dir = tempfile::tempdir().unwrap();
    cfg.output_dir = dir.path().to_path_buf();
    let art = run_experiment(cfg).unwrap();
    assert!(art.summary.passed, "{:?}", art.summary.assertions);
    let bless = std::env::var_os("COGMASK_BLESS").is_some();
    for f in files {
        let got = std::fs::read_to_string(dir.path().join(f)).unwrap();
        if bless {
            std::fs::write(fixture(f), &got).unwrap();
            continue;
        }
        let want = std::fs::read_to_string(fixture(f)).unwrap_or_else(|_| panic!("missing fixture {f}"));
        assert_eq!(got, want, "{f} drifted from fixture");
    }
}

#[test]
fn eta_sweep_beam_fixture() {
    let mut cfg = ExperimentConfig::defaults(ExperimentKind::MaskEtaSweepBeam, 5);
    cfg.k = 6;
    cfg.eta = vec![0.0, 0.5, 1.0];
    check(&mut cfg, &["eta_sweep_beam.csv"]);
}

#[test]
fn type1_fixture() {
    let mut cfg = ExperimentConfig::defaults(ExperimentKind::Type1Bound, 5);
    cfg.k = 5;
    cfg.trials = 100;
    cfg.quantile_samples = 300;
    cfg.gamma = vec![0.1];
    check(&mut cfg, &["type1_waveform-u1.csv"]);
}
