//! Parameter checkpoints: little-endian f64 payload plus a JSON layout sidecar.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{Layout, ParamVector, Segment};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Sidecar {
    dim: usize,
    segments: Vec<Segment>,
}

/// `params.bin` → `params.json`.
pub fn sidecar_path(bin: &Path) -> PathBuf {
    bin.with_extension("json")
}

pub fn write_checkpoint(bin: &Path, params: &ParamVector) -> Result<()> {
    let bytes: Vec<u8> = params.as_slice().iter().flat_map(|v| v.to_le_bytes()).collect();
    std::fs::write(bin, bytes).map_err(|e| Error::io(bin, e))?;
    let sidecar = Sidecar {
        dim: params.dim(),
        segments: params.layout().segments().to_vec(),
    };
    let json = sidecar_path(bin);
    let text = serde_json::to_string_pretty(&sidecar)?;
    std::fs::write(&json, text).map_err(|e| Error::io(&json, e))
}

pub fn read_checkpoint(bin: &Path) -> Result<ParamVector> {
    let json = sidecar_path(bin);
    let text = std::fs::read_to_string(&json).map_err(|e| Error::io(&json, e))?;
    let sidecar: Sidecar = serde_json::from_str(&text)?;
    let layout = Layout::from_segments(sidecar.segments)?;
    Error::check_dim("checkpoint sidecar", sidecar.dim, layout.dim())?;
    let bytes = std::fs::read(bin).map_err(|e| Error::io(bin, e))?;
    if bytes.len() != 8 * sidecar.dim {
        return Err(Error::Dataset(format!(
            "{}: {} bytes, expected {} for {} parameters",
            bin.display(),
            bytes.len(),
            8 * sidecar.dim,
            sidecar.dim
        )));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    ParamVector::new(values, Arc::new(layout))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::SegmentKind;

    #[test]
    fn round_trip_is_bitwise() {
        let layout = Arc::new(Layout::new([
            ("w".to_string(), SegmentKind::Weight, 3),
            ("b".to_string(), SegmentKind::Bias, 1),
        ]));
        let p = ParamVector::new(vec![0.1, -2.5e-300, 1.0 / 3.0, 7.0], layout).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("params.bin");
        write_checkpoint(&path, &p).unwrap();
        let q = read_checkpoint(&path).unwrap();
        assert_eq!(p.as_slice(), q.as_slice());
        assert_eq!(p.layout().segments(), q.layout().segments());
    }
}
