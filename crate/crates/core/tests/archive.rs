use std::f64::consts::PI;
use std::fs;

use sphereflow::archive::{read_archive, run, write_archive};
use sphereflow::config::{preset, Perturbation, RunConfig};
use sphereflow::harmonics::{write_spectral_field, SpectralField};
use sphereflow::Error;

fn small_config() -> RunConfig {
    let mut cfg = preset("mixed", 2.0 * PI, 0.02, 12).unwrap();
    cfg.extra_points = 10;
    cfg
}

#[test]
fn archive_round_trip_preserves_the_trajectory() {
    let cfg = small_config();
    let fr = run(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let hash = write_archive(dir.path(), &fr).unwrap();
    let loaded = read_archive(dir.path()).unwrap();
    assert_eq!(loaded.manifest_hash, hash);
    assert_eq!(loaded.config, cfg);
    assert_eq!(loaded.trajectory.len(), fr.trajectory.len());
    for (a, b) in loaded.trajectory.checkpoints.iter().zip(&fr.trajectory.checkpoints) {
        assert_eq!(a.t, b.t);
        assert_eq!(a.u, b.u);
        assert_eq!(a.xi, b.xi);
        assert_eq!(a.du, b.du);
        assert_eq!(a.diagnostics, b.diagnostics);
    }
    assert!(loaded.trajectory.potentials_filled);
}

#[test]
fn emitted_files_carry_the_config_hash_and_are_reproducible() {
    let cfg = small_config();
    let hash = cfg.hash();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    write_archive(a.path(), &run(&cfg).unwrap()).unwrap();
    write_archive(b.path(), &run(&cfg).unwrap()).unwrap();
    for name in ["manifest.json", "diagnostics.csv", "initial_metric.metric.json"] {
        let text = fs::read_to_string(a.path().join(name)).unwrap();
        assert!(text.contains(&hash), "{name} lacks the config hash");
    }
    let mut names: Vec<_> = fs::read_dir(a.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    for name in names {
        let x = fs::read(a.path().join(&name)).unwrap();
        let y = fs::read(b.path().join(&name)).unwrap();
        assert!(x == y, "{name:?} differs between identical runs");
    }
}

#[test]
fn missing_and_tampered_archives_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(read_archive(dir.path()), Err(Error::Archive { .. })));

    write_archive(dir.path(), &run(&small_config()).unwrap()).unwrap();
    let cpath = dir.path().join("config.json");
    let text = fs::read_to_string(&cpath).unwrap().replace("\"seed\": 0", "\"seed\": 1");
    fs::write(&cpath, text).unwrap();
    assert!(matches!(read_archive(dir.path()), Err(Error::Archive { .. })));
}

#[test]
fn perturbation_from_coefficient_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("shape.f64");
    let mut f = SpectralField::zeros(4);
    f.set(2, 0, 0.03);
    f.set(3, -2, 0.01);
    write_spectral_field(&path, &f).unwrap();
    let mut cfg = RunConfig::new(2.0 * PI, vec![], 12);
    cfg.perturbation = Perturbation::File { path: path.clone() };
    let m = cfg.initial_metric().unwrap();
    assert!((m.volume() - 2.0 * PI).abs() < 1e-12);
    assert_eq!(m.u().get(2, 0), 0.03);
    assert_eq!(m.u().get(3, -2), 0.01);

    // Degree 3 needs L ≥ 9.
    cfg.bandlimit = 8;
    assert!(cfg.initial_metric().is_err());
}

#[test]
fn config_json_round_trip_and_unknown_fields() {
    let cfg = small_config();
    let text = serde_json::to_string(&cfg).unwrap();
    let back: RunConfig = serde_json::from_str(&text).unwrap();
    assert_eq!(back, cfg);
    assert_eq!(back.hash(), cfg.hash());
    let bad = text.replacen('{', "{\"bogus\":1,", 1);
    assert!(serde_json::from_str::<RunConfig>(&bad).is_err());
}
