use std::fs;
use std::path::Path;

use super::Signal;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignalFormat {
    /// Mono 16-bit PCM or 32-bit float RIFF/WAVE.
    Wav,
    /// Headerless little-endian `f32` samples.
    RawF32,
}

impl SignalFormat {
    /// `.wav` maps to [`SignalFormat::Wav`]; anything else is treated as raw `f32le`.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("wav") => SignalFormat::Wav,
            _ => SignalFormat::RawF32,
        }
    }
}

/// Loads a mono signal. `raw_sample_rate_hz` is used for raw files, which
/// carry no header.
pub fn load_signal(path: impl AsRef<Path>, raw_sample_rate_hz: u32) -> Result<Signal> {
    let path = path.as_ref();
    match SignalFormat::from_path(path) {
        SignalFormat::Wav => load_wav(path),
        SignalFormat::RawF32 => {
            let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
            if bytes.len() % 4 != 0 {
                return Err(Error::DimensionMismatch(format!(
                    "raw f32 file {} has {} bytes, not a multiple of 4",
                    path.display(),
                    bytes.len()
                )));
            }
            let samples = bytes
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
                .collect();
            Signal::new(samples, raw_sample_rate_hz)
        }
    }
}

fn load_wav(path: &Path) -> Result<Signal> {
    let wav_err = |message: String| Error::Wav {
        path: path.to_path_buf(),
        message,
    };
    let mut reader = hound::WavReader::open(path).map_err(|e| wav_err(e.to_string()))?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::Unsupported(format!("{} channels (mono only)", spec.channels)));
    }
    let samples = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<std::result::Result<Vec<_>, _>>(),
        (hound::SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<Vec<_>, _>>(),
        (fmt, bits) => {
            return Err(Error::Unsupported(format!("{bits}-bit {fmt:?} WAV (PCM16 or float32 only)")));
        }
    }
    .map_err(|e| wav_err(e.to_string()))?;
    Signal::new(samples, spec.sample_rate)
}

/// Writes `signal` as 32-bit float WAV or raw `f32le`, chosen by extension.
pub fn save_signal(signal: &Signal, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    match SignalFormat::from_path(path) {
        SignalFormat::Wav => {
            let spec = hound::WavSpec {
                channels: 1,
                sample_rate: signal.sample_rate_hz(),
                bits_per_sample: 32,
                sample_format: hound::SampleFormat::Float,
            };
            let wav_err = |e: hound::Error| Error::Wav {
                path: path.to_path_buf(),
                message: e.to_string(),
            };
            let mut writer = hound::WavWriter::create(path, spec).map_err(wav_err)?;
            for &s in signal.samples() {
                writer.write_sample(s as f32).map_err(wav_err)?;
            }
            writer.finalize().map_err(wav_err)
        }
        SignalFormat::RawF32 => {
            let bytes: Vec<u8> = signal
                .samples()
                .iter()
                .flat_map(|&s| (s as f32).to_le_bytes())
                .collect();
            fs::write(path, bytes).map_err(|e| Error::io(path, e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_wav_and_raw_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let sig = Signal::new(vec![0.5, -0.25, 0.125, 0.0], 22050).unwrap();
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
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: 8000,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(&p, spec).unwrap();
        for v in [16384i16, -32768, 0] {
            w.write_sample(v).unwrap();
        }
        w.finalize().unwrap();
        let sig = load_signal(&p, 0).unwrap();
        assert_eq!(sig.samples(), &[0.5, -1.0, 0.0]);
        assert_eq!(sig.sample_rate_hz(), 8000);
    }

    #[test]
    fn stereo_and_odd_raw_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("st.wav");
        let spec = hound::WavSpec {
            channels: 2,
            sample_rate: 8000,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(&p, spec).unwrap();
        w.write_sample(1i16).unwrap();
        w.write_sample(1i16).unwrap();
        w.finalize().unwrap();
        assert!(matches!(load_signal(&p, 0), Err(Error::Unsupported(_))));
        let raw = dir.path().join("bad.f32");
        fs::write(&raw, [0u8; 5]).unwrap();
        assert!(load_signal(&raw, 8000).is_err());
    }
}
