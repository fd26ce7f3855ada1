//! Binary tensor container: magic `FUNSSL01`, u64 little-endian header
//! length, JSON header, then the little-endian f32 payload.

use std::io::{Read, Write};
use std::path::Path;

use funssl_autograd::Tensor;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{Model, ModelConfig, ParamStore};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"FUNSSL01";

#[derive(Serialize, Deserialize)]
struct Entry {
    name: String,
    shape: Vec<usize>,
    /// Offset into the payload, in f32 elements.
    offset: usize,
}

/// Writes `tensors` with `meta` merged into the header. The file is written
/// to a sibling temporary and renamed into place.
pub fn write_container(path: &Path, meta: Value, tensors: &[(&str, &Tensor<f32>)]) -> Result<()> {
    let mut offset = 0;
    let entries: Vec<Entry> = tensors
        .iter()
        .map(|(n, t)| {
            let e = Entry {
                name: n.to_string(),
                shape: t.shape().to_vec(),
                offset,
            };
            offset += t.numel();
            e
        })
        .collect();
    let mut header = match meta {
        Value::Object(m) => m,
        Value::Null => Default::default(),
        other => {
            return Err(Error::Input(format!("container metadata must be an object, got {other}")))
        }
    };
    header.insert("params".into(), serde_json::to_value(&entries).expect("entries"));
    let header = serde_json::to_vec(&Value::Object(header)).expect("header");
    let tmp = path.with_extension("tmp");
    let write = || -> std::io::Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(&tmp)?);
        f.write_all(CHECKPOINT_MAGIC)?;
        f.write_all(&(header.len() as u64).to_le_bytes())?;
        f.write_all(&header)?;
        for (_, t) in tensors {
            for v in t.data() {
                f.write_all(&v.to_le_bytes())?;
            }
        }
        f.into_inner().map_err(|e| e.into_error())?.sync_all()?;
        std::fs::rename(&tmp, path)
    };
    write().map_err(|e| Error::io(path, e))
}

pub fn read_container(path: &Path) -> Result<(Value, Vec<(String, Tensor<f32>)>)> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    if bytes.len() < 16 || &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(Error::format(path, "not a FUNSSL01 container"));
    }
    let hlen = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let body = 16usize
        .checked_add(hlen)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| Error::format(path, "truncated header"))?;
    let header: Value =
        serde_json::from_slice(&bytes[16..body]).map_err(|e| Error::format(path, e))?;
    let entries: Vec<Entry> = serde_json::from_value(header.get("params").cloned().unwrap_or(Value::Null))
        .map_err(|e| Error::format(path, format!("parameter registry: {e}")))?;
    let payload = &bytes[body..];
    let total: usize = entries.iter().map(|e| e.shape.iter().product::<usize>()).sum();
    if payload.len() != total * 4 {
        return Err(Error::format(
            path,
            format!("payload holds {} bytes, registry needs {}", payload.len(), total * 4),
        ));
    }
    let mut out = Vec::with_capacity(entries.len());
    for e in entries {
        let n: usize = e.shape.iter().product();
        if e.offset + n > total {
            return Err(Error::format(path, format!("{}: offset out of range", e.name)));
        }
        let data = payload[e.offset * 4..(e.offset + n) * 4]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        out.push((e.name, Tensor::new(&e.shape, data).expect("registry shape")));
    }
    Ok((header, out))
}

/// Model checkpoints.
pub struct Checkpoint;

impl Checkpoint {
    pub fn save(model: &Model, path: &Path, extra: Value) -> Result<()> {
        let meta = serde_json::json!({
            "format": "funssl-model",
            "config": model.config,
            "extra": extra,
        });
        let tensors: Vec<(&str, &Tensor<f32>)> = model
            .params
            .names
            .iter()
            .map(String::as_str)
            .zip(&model.params.tensors)
            .collect();
        write_container(path, meta, &tensors)
    }

    /// Loads a model, validating parameter names and shapes against its config.
    pub fn load(path: &Path) -> Result<(Model, Value)> {
        let (header, tensors) = read_container(path)?;
        if header.get("format").and_then(Value::as_str) != Some("funssl-model") {
            return Err(Error::format(path, "container does not hold a model"));
        }
        let config: ModelConfig = serde_json::from_value(header["config"].clone())
            .map_err(|e| Error::format(path, format!("config: {e}")))?;
        let (names, tensors): (Vec<_>, Vec<_>) = tensors.into_iter().unzip();
        let params = ParamStore::from_parts(names, tensors)?;
        let model = Model::from_params(config, params)?;
        Ok((model, header.get("extra").cloned().unwrap_or(Value::Null)))
    }
}
