use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::net::{ShallowNet, TrainConfig, TrainingLog};
use super::preprocess::Normalization;
use crate::dynamics::sha256_hex;
use crate::error::{Error, Result};

pub const NET_MAGIC: &[u8; 4] = b"NVSN";
pub const NET_FORMAT_VERSION: u32 = 1;

/// Hyperparameters and provenance stored next to the weight file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetSidecar {
    pub format_version: u32,
    pub n_inputs: usize,
    pub hidden: usize,
    pub normalization: Normalization,
    pub weights_sha256: String,
    pub train_config: Option<TrainConfig>,
    pub best_epoch: Option<usize>,
    pub dataset_hash: Option<String>,
}

/// Little-endian layout: magic, version, n_inputs, hidden, scale, then
/// W1 (column-major), b1, W2 (column-major), b2 as f64.
pub fn encode_net(net: &ShallowNet) -> Vec<u8> {
    let mut out = Vec::with_capacity(24 + 8 * net.n_parameters());
    out.extend_from_slice(NET_MAGIC);
    out.extend_from_slice(&NET_FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(net.n_inputs() as u32).to_le_bytes());
    out.extend_from_slice(&(net.hidden() as u32).to_le_bytes());
    out.extend_from_slice(&net.normalization.scale.to_le_bytes());
    for block in [net.w1.as_slice(), net.b1.as_slice(), net.w2.as_slice(), net.b2.as_slice()] {
        for v in block {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode_net(bytes: &[u8]) -> Result<ShallowNet> {
    let bad = |m: &str| Error::Format(format!("model file: {m}"));
    if bytes.len() < 24 || &bytes[..4] != NET_MAGIC {
        return Err(bad("missing magic"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let version = u32_at(4);
    if version != NET_FORMAT_VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let n = u32_at(8) as usize;
    let h = u32_at(12) as usize;
    let scale = f64::from_le_bytes(bytes[16..24].try_into().unwrap());
    let count = h * n + h + 2 * h + 2;
    if bytes.len() != 24 + 8 * count {
        return Err(bad(&format!("expected {} bytes, found {}", 24 + 8 * count, bytes.len())));
    }
    let values: Vec<f64> =
        bytes[24..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    let (w1, rest) = values.split_at(h * n);
    let (b1, rest) = rest.split_at(h);
    let (w2, b2) = rest.split_at(2 * h);
    Ok(ShallowNet {
        w1: DMatrix::from_column_slice(h, n, w1),
        b1: DVector::from_column_slice(b1),
        w2: DMatrix::from_column_slice(2, h, w2),
        b2: DVector::from_column_slice(b2),
        normalization: Normalization { scale },
    })
}

pub fn sidecar_path(model: &Path) -> PathBuf {
    model.with_extension("json")
}

pub fn sidecar_for(net: &ShallowNet) -> NetSidecar {
    NetSidecar {
        format_version: NET_FORMAT_VERSION,
        n_inputs: net.n_inputs(),
        hidden: net.hidden(),
        normalization: net.normalization,
        weights_sha256: sha256_hex(&encode_net(net)),
        train_config: None,
        best_epoch: None,
        dataset_hash: None,
    }
}

/// Writes the weight file and its JSON sidecar.
pub fn write_net(path: &Path, net: &ShallowNet, config: Option<&TrainConfig>, log: Option<&TrainingLog>, dataset_hash: Option<&str>) -> Result<NetSidecar> {
    let bytes = encode_net(net);
    let mut sidecar = sidecar_for(net);
    sidecar.train_config = config.cloned();
    sidecar.best_epoch = log.map(|l| l.best_epoch);
    sidecar.dataset_hash = dataset_hash.map(str::to_owned);
    fs::write(path, &bytes)?;
    fs::write(sidecar_path(path), serde_json::to_string_pretty(&sidecar)? + "\n")?;
    Ok(sidecar)
}

pub fn read_net(path: &Path) -> Result<ShallowNet> {
    decode_net(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let mut net = ShallowNet::random(7, 3, &mut rng);
        net.normalization.scale = 3.25;
        let back = decode_net(&encode_net(&net)).unwrap();
        assert_eq!(back, net);
        let mut truncated = encode_net(&net);
        truncated.pop();
        assert!(decode_net(&truncated).is_err());
    }
}
