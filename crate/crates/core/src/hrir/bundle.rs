//! Directory bundle: `manifest.json` plus a raw little-endian `f32` payload
//! stored direction-major (all taps of direction 0, then direction 1, ...).

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{Direction, HrirSet, PreprocessFlags};
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const BUNDLE_DATA_FILE: &str = "hrir.f32";
const FORMAT_VERSION: u32 = 1;
const DTYPE: &str = "f32le";
const LAYOUT: &str = "direction_major";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub sample_rate_hz: u32,
    pub num_directions: usize,
    pub num_taps: usize,
    pub flags: PreprocessFlags,
    pub directions: Vec<Direction>,
    pub data_file: String,
    pub dtype: String,
    pub layout: String,
}

pub fn load_bundle(dir: impl AsRef<Path>) -> Result<HrirSet> {
    let dir = dir.as_ref();
    let manifest_path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|source| Error::Manifest {
        path: manifest_path.clone(),
        source,
    })?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(Error::Unsupported(format!(
            "bundle format_version {}",
            manifest.format_version
        )));
    }
    if manifest.dtype != DTYPE || manifest.layout != LAYOUT {
        return Err(Error::Unsupported(format!(
            "bundle dtype {:?} / layout {:?}",
            manifest.dtype, manifest.layout
        )));
    }
    let (m, n) = (manifest.num_taps, manifest.num_directions);
    if m == 0 || n == 0 {
        return Err(Error::Degenerate(format!("bundle declares {m} taps x {n} directions")));
    }
    if manifest.directions.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "manifest lists {} directions but num_directions = {n}",
            manifest.directions.len()
        )));
    }
    let data_path = dir.join(&manifest.data_file);
    let bytes = fs::read(&data_path).map_err(|e| Error::io(&data_path, e))?;
    let expected = m * n * 4;
    if bytes.len() != expected {
        return Err(Error::DimensionMismatch(format!(
            "payload {} holds {} bytes, manifest implies {expected} ({n} x {m} f32)",
            data_path.display(),
            bytes.len()
        )));
    }
    let values: Vec<f32> = bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    // direction-major bytes are exactly column-major order for an M x N matrix
    let data = DMatrix::from_iterator(m, n, values.into_iter().map(f64::from));
    HrirSet::new(data, manifest.sample_rate_hz, manifest.directions, manifest.flags)
}

/// Writes `set` as a bundle into `dir`, creating the directory if needed.
/// Samples are narrowed to `f32`.
pub fn save_bundle(set: &HrirSet, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    if set.num_directions() == 0 || set.num_taps() == 0 {
        return Err(Error::Degenerate("refusing to save an empty HRIR set".into()));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        sample_rate_hz: set.sample_rate_hz(),
        num_directions: set.num_directions(),
        num_taps: set.num_taps(),
        flags: set.flags(),
        directions: set.directions().to_vec(),
        data_file: BUNDLE_DATA_FILE.to_string(),
        dtype: DTYPE.to_string(),
        layout: LAYOUT.to_string(),
    };
    let mut bytes = Vec::with_capacity(set.data().len() * 4);
    for v in set.data().iter() {
        bytes.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    let data_path = dir.join(BUNDLE_DATA_FILE);
    fs::write(&data_path, bytes).map_err(|e| Error::io(&data_path, e))?;
    let manifest_path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
    fs::write(&manifest_path, text).map_err(|e| Error::io(&manifest_path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_set() -> HrirSet {
        let data = DMatrix::from_column_slice(4, 2, &[0.5, -0.25, 0.125, 1.0, 2.0, 3.0, -4.0, 0.75]);
        let dirs = vec![Direction::new(-80.0, 0.0), Direction::new(0.0, 45.0)];
        HrirSet::new(data, 44100, dirs, PreprocessFlags::default()).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let set = small_set();
        save_bundle(&set, dir.path()).unwrap();
        let back = load_bundle(dir.path()).unwrap();
        assert_eq!(back.num_taps(), 4);
        assert_eq!(back.num_directions(), 2);
        assert_eq!(back, set);
        let manifest: Manifest =
            serde_json::from_str(&fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap()).unwrap();
        assert_eq!((manifest.num_taps, manifest.num_directions), (4, 2));
        let raw = fs::read(dir.path().join(BUNDLE_DATA_FILE)).unwrap();
        // direction-major: first four values belong to direction 0
        assert_eq!(&raw[12..16], &1.0f32.to_le_bytes());
    }

    #[test]
    fn single_tap_bundle() {
        let dir = tempfile::tempdir().unwrap();
        let set = HrirSet::new(
            DMatrix::from_element(1, 1, 0.25),
            48000,
            vec![Direction::new(0.0, 0.0)],
            PreprocessFlags::default(),
        )
        .unwrap();
        save_bundle(&set, dir.path()).unwrap();
        assert_eq!(load_bundle(dir.path()).unwrap(), set);
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        save_bundle(&small_set(), dir.path()).unwrap();
        let path = dir.path().join(BUNDLE_DATA_FILE);
        let raw = fs::read(&path).unwrap();
        fs::write(&path, &raw[..28]).unwrap();
        assert!(matches!(load_bundle(dir.path()), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn missing_manifest_and_bad_samples() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_bundle(dir.path()), Err(Error::Io { .. })));
        save_bundle(&small_set(), dir.path()).unwrap();
        let path = dir.path().join(BUNDLE_DATA_FILE);
        let mut raw = fs::read(&path).unwrap();
        raw[..4].copy_from_slice(&f32::INFINITY.to_le_bytes());
        fs::write(&path, raw).unwrap();
        assert!(matches!(load_bundle(dir.path()), Err(Error::NonFinite(_))));
    }

    #[test]
    fn empty_manifest_dimensions_rejected() {
        let dir = tempfile::tempdir().unwrap();
        save_bundle(&small_set(), dir.path()).unwrap();
        let mpath = dir.path().join(MANIFEST_FILE);
        let mut manifest: Manifest = serde_json::from_str(&fs::read_to_string(&mpath).unwrap()).unwrap();
        manifest.num_directions = 0;
        manifest.directions.clear();
        fs::write(&mpath, serde_json::to_string(&manifest).unwrap()).unwrap();
        assert!(matches!(load_bundle(dir.path()), Err(Error::Degenerate(_))));
    }
}
