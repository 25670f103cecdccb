//! Binary checkpoints holding weights, batch-norm statistics and optimizer state.
//!
//! Layout (little-endian): magic `CGIDLNET`, `u32` format version, `u32`
//! header length, JSON header, the `f32` tensors in header order, and a
//! trailing CRC-32 of everything before it.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::network::{Arch, Network};
use super::optim::{NetworkParams, SgdmState, TrainConfig};
use crate::{Error, Result};

pub const MAGIC: &[u8; 8] = b"CGIDLNET";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    arch: Arch,
    train: TrainConfig,
    epoch: usize,
    iteration: u64,
    tensors: Vec<TensorEntry>,
}

/// A restored training state together with the configuration it was trained with.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: NetworkParams<f32>,
    pub train: TrainConfig,
}

fn tensors(params: &NetworkParams<f32>) -> Vec<(String, &Vec<f32>)> {
    let net = &params.network;
    let names = Network::<f32>::param_names(net.blocks.len());
    let mut out: Vec<(String, &Vec<f32>)> = names.iter().cloned().zip(net.params()).collect();
    out.extend(
        names
            .iter()
            .map(|n| format!("optim.{n}"))
            .zip(params.optimizer.velocity.iter()),
    );
    out.extend(net.buffers());
    out
}

pub fn to_bytes(params: &NetworkParams<f32>, train: &TrainConfig) -> Result<Vec<u8>> {
    let list = tensors(params);
    let header = Header {
        arch: params.network.arch.clone(),
        train: train.clone(),
        epoch: params.epoch,
        iteration: params.optimizer.iteration,
        tensors: list
            .iter()
            .map(|(name, t)| TensorEntry {
                name: name.clone(),
                len: t.len(),
            })
            .collect(),
    };
    let json = serde_json::to_vec(&header)?;
    let data_len: usize = list.iter().map(|(_, t)| t.len() * 4).sum();
    let mut out = Vec::with_capacity(20 + json.len() + data_len);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for (_, t) in &list {
        for v in t.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::Corrupt(msg.into())
}

pub fn from_bytes(bytes: &[u8]) -> Result<Checkpoint> {
    if bytes.len() < 20 || &bytes[..8] != MAGIC {
        return Err(corrupt("not a network checkpoint"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(Error::Version {
            what: "checkpoint".into(),
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().unwrap());
    if crc32fast::hash(body) != stored {
        return Err(corrupt("checksum mismatch (truncated or damaged file)"));
    }
    let hlen = u32::from_le_bytes(body[12..16].try_into().unwrap()) as usize;
    let json = body
        .get(16..16 + hlen)
        .ok_or_else(|| corrupt("header extends past end of file"))?;
    let header: Header =
        serde_json::from_slice(json).map_err(|e| corrupt(format!("header: {e}")))?;
    header.arch.validate()?;
    let mut data = &body[16 + hlen..];
    let mut params = NetworkParams {
        network: Network::new(header.arch.clone(), 0)?,
        optimizer: SgdmState {
            velocity: Vec::new(),
            iteration: header.iteration,
        },
        epoch: header.epoch,
    };
    params.optimizer = SgdmState {
        iteration: header.iteration,
        ..SgdmState::new(&params.network)
    };
    let expected: Vec<(String, usize)> = tensors(&params)
        .into_iter()
        .map(|(n, t)| (n, t.len()))
        .collect();
    if expected.len() != header.tensors.len() {
        return Err(corrupt(format!(
            "{} tensors stored, architecture needs {}",
            header.tensors.len(),
            expected.len()
        )));
    }
    for ((name, len), e) in expected.iter().zip(&header.tensors) {
        if name != &e.name || *len != e.len {
            return Err(corrupt(format!(
                "tensor {} ({} values) where {name} ({len} values) was expected",
                e.name, e.len
            )));
        }
    }
    let mut read = |dst: &mut Vec<f32>| -> Result<()> {
        let n = dst.len() * 4;
        if data.len() < n {
            return Err(corrupt("tensor data truncated"));
        }
        for (d, c) in dst.iter_mut().zip(data[..n].chunks_exact(4)) {
            *d = f32::from_le_bytes(c.try_into().unwrap());
        }
        data = &data[n..];
        Ok(())
    };
    for t in params.network.params_mut() {
        read(t)?;
    }
    for t in params.optimizer.velocity.iter_mut() {
        read(t)?;
    }
    for t in params.network.buffers_mut() {
        read(t)?;
    }
    if !data.is_empty() {
        return Err(corrupt(format!("{} trailing bytes after tensors", data.len())));
    }
    Ok(Checkpoint {
        params,
        train: header.train,
    })
}

/// Write through a temporary file so an interrupted save never leaves a
/// half-written checkpoint under the final name.
pub fn save(path: &Path, params: &NetworkParams<f32>, train: &TrainConfig) -> Result<()> {
    let bytes = to_bytes(params, train)?;
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension("ckpt.tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Checkpoint> {
    from_bytes(&fs::read(path)?)
}
