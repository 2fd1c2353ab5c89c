mod common;

use std::fs;

use common::*;
use nalgebra::DMatrix;
use proptest::prelude::*;
use toepnmf::hrir::{
    load_bundle, load_csv, load_signal, preprocess, save_bundle, save_signal, to_min_phase, Direction, HrirSet,
    PreprocessFlags, PreprocessOptions, Signal, BUNDLE_DATA_FILE, MANIFEST_FILE,
};
use toepnmf::metrics::{evaluate, spectral_distortion};
use toepnmf::sparse::{sparsify_model, ResidualTransform};
use toepnmf::{ErrorKind, FactorModel};

fn set_from(x: DMatrix<f64>, dirs: Vec<Direction>) -> HrirSet {
    HrirSet::new(x, 44100, dirs, PreprocessFlags::default()).unwrap()
}

#[test]
fn bundle_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = rng(500);
    let x = random_matrix(&mut rng, 33, 7, -1.0, 1.0).map(|v| v as f32 as f64);
    let dirs: Vec<Direction> = (0..7).map(|j| Direction::new(-45.0 + 15.0 * j as f64, 5.625 * j as f64)).collect();
    let set = HrirSet::new(x, 48000, dirs, PreprocessFlags { minphase: true, delay_removed: false, normalized: false }).unwrap();
    save_bundle(&set, dir.path()).unwrap();
    let back = load_bundle(dir.path()).unwrap();
    assert_eq!(back, set);
    let bytes = fs::read(dir.path().join(BUNDLE_DATA_FILE)).unwrap();
    save_bundle(&back, dir.path().join("again")).unwrap();
    assert_eq!(fs::read(dir.path().join("again").join(BUNDLE_DATA_FILE)).unwrap(), bytes);
}

#[test]
fn bundle_layout_is_direction_major_f32le() {
    let dir = tempfile::tempdir().unwrap();
    let x = DMatrix::from_column_slice(4, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
    save_bundle(&set_from(x, vec![Direction::new(0.0, 0.0); 2]), dir.path()).unwrap();
    let bytes = fs::read(dir.path().join(BUNDLE_DATA_FILE)).unwrap();
    let values: Vec<f32> = bytes.chunks(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
    assert_eq!(values, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap()).unwrap();
    assert_eq!(manifest["num_taps"], 4);
    assert_eq!(manifest["num_directions"], 2);
    assert_eq!(manifest["dtype"], "f32le");
    assert_eq!(manifest["layout"], "direction_major");

    fs::write(dir.path().join(BUNDLE_DATA_FILE), &bytes[..28]).unwrap();
    assert_eq!(load_bundle(dir.path()).unwrap_err().kind(), ErrorKind::Data);
    let mut nan = bytes.clone();
    nan[..4].copy_from_slice(&f32::NAN.to_le_bytes());
    fs::write(dir.path().join(BUNDLE_DATA_FILE), nan).unwrap();
    assert!(load_bundle(dir.path()).is_err());
    assert!(load_bundle(dir.path().join("missing")).is_err());
}

#[test]
fn csv_ingest_reads_rows_as_directions() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("h.csv");
    let d = dir.path().join("d.csv");
    fs::write(&m, "# two directions\n1,0.5,0.25\n-1,0,2\n").unwrap();
    fs::write(&d, "0,0\n90,-10\n").unwrap();
    let set = load_csv(&m, &d, 44100).unwrap();
    assert_eq!((set.num_taps(), set.num_directions()), (3, 2));
    assert_eq!(set.column(1).unwrap().as_slice(), &[-1.0, 0.0, 2.0]);
    assert_eq!(set.directions()[1], Direction::new(90.0, -10.0));
    fs::write(&d, "0,0\n").unwrap();
    assert!(load_csv(&m, &d, 44100).is_err());
}

#[test]
fn signal_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let samples: Vec<f64> = (0..100).map(|i| ((i as f64) * 0.1).sin() as f32 as f64).collect();
    let sig = Signal::new(samples, 22050).unwrap();
    for name in ["a.wav", "a.f32"] {
        let p = dir.path().join(name);
        save_signal(&sig, &p).unwrap();
        assert_eq!(load_signal(&p, 22050).unwrap(), sig);
    }
}

#[test]
fn pcm16_wav_is_scaled() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("pcm.wav");
    let spec = hound::WavSpec { channels: 1, sample_rate: 8000, bits_per_sample: 16, sample_format: hound::SampleFormat::Int };
    let mut w = hound::WavWriter::create(&p, spec).unwrap();
    for s in [0i16, 16384, -32768] {
        w.write_sample(s).unwrap();
    }
    w.finalize().unwrap();
    let sig = load_signal(&p, 0).unwrap();
    assert_eq!(sig.samples(), &[0.0, 0.5, -1.0]);
    assert_eq!(sig.sample_rate_hz(), 8000);
}

fn hrir_like(rng: &mut rand_chacha::ChaCha8Rng, m: usize, delay: usize) -> Vec<f64> {
    let mut h = vec![0.0; m];
    for (i, v) in h.iter_mut().enumerate().skip(delay) {
        let t = (i - delay) as f64;
        *v = (-t / 5.0).exp() * (0.9 * t).cos() + 0.01 * rand::Rng::gen_range(rng, -1.0..1.0);
    }
    h
}

#[test]
fn min_phase_preserves_magnitude() {
    let mut rng = rng(510);
    for _ in 0..10 {
        let h = random_vec(&mut rng, 16, -1.0, 1.0);
        let mp = to_min_phase(&h).unwrap();
        let mags = |v: &[f64]| {
            let n = v.len();
            (0..n)
                .map(|k| {
                    let (mut re, mut im) = (0.0, 0.0);
                    for (t, &s) in v.iter().enumerate() {
                        let a = -2.0 * std::f64::consts::PI * (k * t) as f64 / n as f64;
                        re += s * a.cos();
                        im += s * a.sin();
                    }
                    re.hypot(im)
                })
                .collect::<Vec<_>>()
        };
        let pad = |v: &[f64]| {
            let mut p = v.to_vec();
            p.resize(64, 0.0);
            p
        };
        let (a, b) = (mags(&pad(&h)), mags(&pad(&mp)));
        let peak = a.iter().cloned().fold(0.0, f64::max);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-6 * x.max(1e-3 * peak));
        }
    }
}

#[test]
fn preprocessing_pipeline_is_idempotent() {
    let mut rng = rng(511);
    let cols: Vec<Vec<f64>> = (0..6).map(|j| hrir_like(&mut rng, 128, 3 + 4 * j)).collect();
    let set = HrirSet::from_columns(&cols, 44100, vec![Direction::new(0.0, 0.0); 6], PreprocessFlags::default()).unwrap();
    let once = preprocess(&set, &PreprocessOptions::default()).unwrap();
    assert!(once.flags().is_complete());
    let twice = preprocess(&once, &PreprocessOptions::default()).unwrap();
    assert!((once.data() - twice.data()).amax() < 1e-9);
    for j in 0..6 {
        assert!((once.column(j).unwrap().iter().map(|v| v.abs()).sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn model_json_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let (x, f0, g0) = synthetic_factorisable(520, 20, 5, 6);
    let dirs: Vec<Direction> = (0..5).map(|j| Direction::new(j as f64 * 0.1, -j as f64)).collect();
    let set = set_from(x, dirs.clone());
    let model = FactorModel::new(f0, g0, 20, 44100, 9, vec![0.5, 0.25, 1.0 / 3.0], dirs).unwrap();
    model.save(dir.path().join("m.json")).unwrap();
    assert_eq!(FactorModel::load(dir.path().join("m.json")).unwrap(), model);

    let sparse = sparsify_model(&model, &set, 0.05, ResidualTransform::Window { sigma: 7.0 }, 1e-4).unwrap();
    sparse.save(dir.path().join("s.json")).unwrap();
    let back = FactorModel::load(dir.path().join("s.json")).unwrap();
    assert_eq!(back, sparse);
    let raw: serde_json::Value = serde_json::from_str(&sparse.to_json()).unwrap();
    assert!(raw["G"][0]["indices"].is_array());
    assert_eq!(raw["transform"]["kind"], "window");

    fs::write(dir.path().join("bad.json"), "{\"format_version\": 1}").unwrap();
    assert_eq!(FactorModel::load(dir.path().join("bad.json")).unwrap_err().kind(), ErrorKind::Data);
}

#[test]
fn perfect_model_evaluates_to_zero() {
    let (x, f0, g0) = synthetic_factorisable(530, 32, 8, 8);
    let dirs: Vec<Direction> = (0..8).map(|j| Direction::new(if j < 4 { 0.0 } else { 45.0 }, if j % 2 == 0 { 0.0 } else { 30.0 })).collect();
    let set = set_from(x, dirs.clone());
    let model = FactorModel::new(f0, g0, 32, 44100, 0, vec![], dirs).unwrap();
    let report = evaluate(&model, &set, 0.0).unwrap();
    assert!(report.rmse_global < 1e-12);
    for r in &report.per_direction {
        assert!(r.sd_db.unwrap() < 1e-9);
        assert_eq!(r.nnze, 8);
    }
    assert_eq!(report.horizontal.count, 4);
    assert_eq!(report.median.count, 4);
}

#[test]
fn aggregates_match_per_direction_values() {
    let mut rng = rng(531);
    let x = random_matrix(&mut rng, 24, 10, -1.0, 1.0);
    let dirs: Vec<Direction> = (0..10).map(|j| Direction::new(5.0 * j as f64 - 2.0, 0.0)).collect();
    let set = set_from(x, dirs.clone());
    let model = FactorModel::new(
        random_vec(&mut rng, 19, -1.0, 1.0),
        random_matrix(&mut rng, 10, 6, 0.0, 1.0).map(|v| if v < 0.4 { 0.0 } else { v }),
        24,
        44100,
        0,
        vec![],
        dirs,
    )
    .unwrap();
    let report = evaluate(&model, &set, 1e-4).unwrap();
    let sds: Vec<f64> = report.per_direction.iter().map(|r| r.sd_db.unwrap()).collect();
    let mean_sd = sds.iter().sum::<f64>() / sds.len() as f64;
    let mean_nnze = report.per_direction.iter().map(|r| r.nnze as f64).sum::<f64>() / 10.0;
    assert!((report.aggregates.mean_sd_db.unwrap() - mean_sd).abs() <= 1e-12);
    assert!((report.aggregates.mean_nnze - mean_nnze).abs() <= 1e-12);
    let sq: f64 = report.per_direction.iter().map(|r| r.rmse * r.rmse * 24.0).sum();
    assert!((report.rmse_global.powi(2) * 240.0 - sq).abs() <= 1e-9 * sq);
    assert_eq!(report.median.count, 1);

    let mut buf = Vec::new();
    report.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().next().unwrap(), "direction_index,az_deg,el_deg,rmse,sd_db,nnze");
    assert_eq!(text.lines().count(), 11);
}

proptest! {
    #[test]
    fn sd_of_scaled_copy_is_gain_in_db(seed in any::<u64>(), m in 1usize..64, c in 1e-3f64..1e3) {
        let mut rng = rng(seed);
        let x = random_vec(&mut rng, m, -1.0, 1.0);
        let y: Vec<f64> = x.iter().map(|v| c * v).collect();
        let sd = spectral_distortion(&x, &y).unwrap();
        prop_assert!((sd - (20.0 * c.log10()).abs()).abs() <= 1e-9);
    }
}
