//! Parameter checkpoints: a versioned JSON container with a manifest (tensor
//! names and shapes, seed, config echo) and bit-exact tensor payloads
//! (little-endian f64 bits, hex encoded), so save/load round-trips bitwise.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::nn::{GatLayer, Mat};
use crate::qnet::{QNetConfig, QNetworkParams};
use crate::selection::{SelectorConfig, SelectorParams};

const VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct TensorRecord {
    name: String,
    rows: usize,
    cols: usize,
    data_hex: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointFile {
    format: String,
    version: u32,
    seed: u64,
    config: serde_json::Value,
    tensors: Vec<TensorRecord>,
}

fn encode_mat(name: &str, mat: &Mat) -> TensorRecord {
    let mut bytes = Vec::with_capacity(mat.len() * 8);
    for v in mat.data() {
        bytes.extend_from_slice(&v.to_bits().to_le_bytes());
    }
    TensorRecord {
        name: name.to_string(),
        rows: mat.rows(),
        cols: mat.cols(),
        data_hex: hex::encode(bytes),
    }
}

fn decode_mat(rec: &TensorRecord) -> Result<Mat, Error> {
    let bytes = hex::decode(&rec.data_hex).map_err(|e| Error::BadCheckpoint {
        reason: format!("tensor {}: {e}", rec.name),
    })?;
    if bytes.len() != rec.rows * rec.cols * 8 {
        return Err(Error::BadCheckpoint {
            reason: format!(
                "tensor {}: payload holds {} bytes for a {}x{} shape",
                rec.name,
                bytes.len(),
                rec.rows,
                rec.cols
            ),
        });
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_bits(u64::from_le_bytes(c.try_into().unwrap())))
        .collect();
    Ok(Mat::from_vec(rec.rows, rec.cols, data))
}

fn write_file(path: &Path, file: &CheckpointFile) -> Result<(), Error> {
    let mut text = serde_json::to_string_pretty(file).expect("checkpoint serialization");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::Io {
        context: format!("writing {}", path.display()),
        source: e,
    })
}

fn read_file(path: &Path, expect_format: &str) -> Result<CheckpointFile, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        context: format!("reading {}", path.display()),
        source: e,
    })?;
    let file: CheckpointFile = serde_json::from_str(&text).map_err(|e| Error::BadCheckpoint {
        reason: e.to_string(),
    })?;
    if file.format != expect_format {
        return Err(Error::BadCheckpoint {
            reason: format!("format {} where {} was expected", file.format, expect_format),
        });
    }
    if file.version != VERSION {
        return Err(Error::BadCheckpoint {
            reason: format!("unsupported version {}", file.version),
        });
    }
    Ok(file)
}

/// Group flat tensor records back into attention layers; records must follow
/// the `tensors()` emission order.
fn take_layers(records: &[TensorRecord], prefix: &str) -> Result<Vec<GatLayer>, Error> {
    let mut layers = Vec::new();
    let mut idx = 0;
    while idx + 3 < records.len() && records[idx].name.starts_with(prefix) {
        let expect = [
            format!("{prefix}{}.theta_self", layers.len()),
            format!("{prefix}{}.theta_msg", layers.len()),
            format!("{prefix}{}.theta_edge", layers.len()),
            format!("{prefix}{}.attention", layers.len()),
        ];
        for (off, name) in expect.iter().enumerate() {
            if &records[idx + off].name != name {
                return Err(Error::BadCheckpoint {
                    reason: format!(
                        "tensor {} where {} was expected",
                        records[idx + off].name, name
                    ),
                });
            }
        }
        layers.push(GatLayer {
            theta_self: decode_mat(&records[idx])?,
            theta_msg: decode_mat(&records[idx + 1])?,
            theta_edge: decode_mat(&records[idx + 2])?,
            attention: decode_mat(&records[idx + 3])?,
        });
        idx += 4;
    }
    if layers.is_empty() {
        return Err(Error::BadCheckpoint {
            reason: format!("no {prefix}* tensors found"),
        });
    }
    Ok(layers)
}

fn expect_named(records: &[TensorRecord], idx: usize, name: &str) -> Result<Mat, Error> {
    let rec = records.get(idx).ok_or_else(|| Error::BadCheckpoint {
        reason: format!("missing tensor {name}"),
    })?;
    if rec.name != name {
        return Err(Error::BadCheckpoint {
            reason: format!("tensor {} where {name} was expected", rec.name),
        });
    }
    decode_mat(rec)
}

pub fn save_qnet(path: &Path, params: &QNetworkParams, seed: u64) -> Result<(), Error> {
    let file = CheckpointFile {
        format: "qnet".to_string(),
        version: VERSION,
        seed,
        config: serde_json::to_value(params.config()).unwrap(),
        tensors: params
            .tensors()
            .into_iter()
            .map(|(name, m)| encode_mat(&name, m))
            .collect(),
    };
    write_file(path, &file)
}

pub fn load_qnet(path: &Path) -> Result<(QNetworkParams, u64), Error> {
    let file = read_file(path, "qnet")?;
    let layers = take_layers(&file.tensors, "layer")?;
    let base = layers.len() * 4;
    let head_weight = expect_named(&file.tensors, base, "head.weight")?;
    let head_bias = expect_named(&file.tensors, base + 1, "head.bias")?;
    let params = QNetworkParams {
        layers,
        head_weight,
        head_bias,
    };
    let config: QNetConfig =
        serde_json::from_value(file.config).map_err(|e| Error::BadCheckpoint {
            reason: format!("config echo: {e}"),
        })?;
    if params.config() != config {
        return Err(Error::BadCheckpoint {
            reason: "config echo disagrees with tensor shapes".to_string(),
        });
    }
    Ok((params, file.seed))
}

pub fn save_selector(path: &Path, params: &SelectorParams, seed: u64) -> Result<(), Error> {
    let file = CheckpointFile {
        format: "selector".to_string(),
        version: VERSION,
        seed,
        config: serde_json::to_value(params.config()).unwrap(),
        tensors: params
            .tensors()
            .into_iter()
            .map(|(name, m)| encode_mat(&name, m))
            .collect(),
    };
    write_file(path, &file)
}

pub fn load_selector(path: &Path) -> Result<(SelectorParams, u64), Error> {
    let file = read_file(path, "selector")?;
    let encoder = take_layers(&file.tensors, "encoder")?;
    let base = encoder.len() * 4;
    let params = SelectorParams {
        encoder,
        mlp_hidden_weight: expect_named(&file.tensors, base, "mlp.hidden_weight")?,
        mlp_hidden_bias: expect_named(&file.tensors, base + 1, "mlp.hidden_bias")?,
        mlp_out_weight: expect_named(&file.tensors, base + 2, "mlp.out_weight")?,
        mlp_out_bias: expect_named(&file.tensors, base + 3, "mlp.out_bias")?,
    };
    let config: SelectorConfig =
        serde_json::from_value(file.config).map_err(|e| Error::BadCheckpoint {
            reason: format!("config echo: {e}"),
        })?;
    if params.config() != config {
        return Err(Error::BadCheckpoint {
            reason: "config echo disagrees with tensor shapes".to_string(),
        });
    }
    Ok((params, file.seed))
}
