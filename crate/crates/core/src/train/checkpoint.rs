use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{ModelConfig, ShlModel};
use super::trainer::EpochMetrics;
use crate::butterfly::Permutation;
use crate::tensor::{Rng, Scalar};
use crate::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &str = "sparsefly-checkpoint";

/// Training state stored next to the parameters.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub seed: u64,
    pub epoch: usize,
    pub history: Vec<EpochMetrics>,
}

/// Text header followed by the raw little-endian parameter payloads in
/// header order.
///
/// ```text
/// sparsefly-checkpoint 1
/// dtype f32
/// seed 7
/// epoch 3
/// config {...}
/// history [...]
/// perm layer1 <n> <i0> <i1> ...
/// tensor layer1.0 <len>
/// ...
/// end
/// ```
pub fn save_checkpoint<T: Scalar>(path: &Path, model: &ShlModel<T>, meta: &CheckpointMeta) -> Result<()> {
    let mut header = String::new();
    let _ = writeln!(header, "{MAGIC} {CHECKPOINT_VERSION}");
    let _ = writeln!(header, "dtype {}", T::NAME);
    let _ = writeln!(header, "seed {}", meta.seed);
    let _ = writeln!(header, "epoch {}", meta.epoch);
    let _ = writeln!(header, "config {}", json(model.config())?);
    let _ = writeln!(header, "history {}", json(meta.history.as_slice())?);
    if let Some(p) = model.layer1().permutation() {
        let idx: Vec<String> = p.map().iter().map(usize::to_string).collect();
        let _ = writeln!(header, "perm layer1 {} {}", p.len(), idx.join(" "));
    }
    let params = model.params();
    for (name, p) in model.param_names().iter().zip(&params) {
        let _ = writeln!(header, "tensor {name} {}", p.len());
    }
    header.push_str("end\n");

    let mut bytes = header.into_bytes();
    for p in &params {
        for &v in p.iter() {
            v.write_le(&mut bytes);
        }
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn json<S: Serialize + ?Sized>(v: &S) -> Result<String> {
    serde_json::to_string(v).map_err(|e| Error::Format(e.to_string()))
}

fn field<'a>(line: Option<&'a str>, key: &str) -> Result<&'a str> {
    let line = line.ok_or_else(|| Error::Format(format!("header ends before '{key}'")))?;
    line.strip_prefix(key)
        .and_then(|rest| rest.strip_prefix(' '))
        .ok_or_else(|| Error::Format(format!("expected '{key}', found '{line}'")))
}

fn parse<V: std::str::FromStr>(s: &str, what: &str) -> Result<V> {
    s.parse().map_err(|_| Error::Format(format!("bad {what}: '{s}'")))
}

/// Inverse of [`save_checkpoint`]. Rejects unknown versions, a different
/// dtype, mismatched tensor lists and truncated or oversized payloads.
pub fn load_checkpoint<T: Scalar>(path: &Path) -> Result<(ShlModel<T>, CheckpointMeta)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let end = bytes
        .windows(5)
        .position(|w| w == b"\nend\n")
        .ok_or_else(|| Error::Format("checkpoint header is not terminated".into()))?;
    let header =
        std::str::from_utf8(&bytes[..end]).map_err(|_| Error::Format("checkpoint header is not UTF-8".into()))?;
    let payload = &bytes[end + 5..];
    let mut lines = header.lines();

    let version: u32 = parse(field(lines.next(), MAGIC)?, "version")?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Version {
            found: version,
            expected: CHECKPOINT_VERSION,
        });
    }
    let dtype = field(lines.next(), "dtype")?;
    if dtype != T::NAME {
        return Err(Error::Format(format!(
            "checkpoint holds {dtype}, requested {}",
            T::NAME
        )));
    }
    let seed: u64 = parse(field(lines.next(), "seed")?, "seed")?;
    let epoch: usize = parse(field(lines.next(), "epoch")?, "epoch")?;
    let config: ModelConfig =
        serde_json::from_str(field(lines.next(), "config")?).map_err(|e| Error::Format(e.to_string()))?;
    let history: Vec<EpochMetrics> =
        serde_json::from_str(field(lines.next(), "history")?).map_err(|e| Error::Format(e.to_string()))?;

    let mut model = ShlModel::<T>::new(&config, &mut Rng::seed_from_u64(seed))?;
    let names = model.param_names();
    let mut tensors = Vec::with_capacity(names.len());
    for line in lines {
        if let Some(rest) = line.strip_prefix("perm layer1 ") {
            let mut it = rest.split(' ');
            let n: usize = parse(it.next().unwrap_or(""), "permutation length")?;
            let map: Vec<usize> = it.map(|s| parse(s, "permutation entry")).collect::<Result<_>>()?;
            if map.len() != n {
                return Err(Error::Format(format!(
                    "permutation declares {n} entries, lists {}",
                    map.len()
                )));
            }
            model.layer1_mut().set_permutation(Permutation::from_map(map)?)?;
        } else if let Some(rest) = line.strip_prefix("tensor ") {
            let (name, len) = rest
                .rsplit_once(' ')
                .ok_or_else(|| Error::Format(format!("bad tensor line '{line}'")))?;
            tensors.push((name.to_string(), parse::<usize>(len, "tensor length")?));
        } else {
            return Err(Error::Format(format!("unexpected header line '{line}'")));
        }
    }

    let mut params = model.params_mut();
    if tensors.len() != params.len() {
        return Err(Error::Format(format!(
            "checkpoint lists {} tensors, model has {}",
            tensors.len(),
            params.len()
        )));
    }
    let needed: usize = tensors.iter().map(|t| t.1).sum::<usize>() * T::BYTES;
    if payload.len() != needed {
        return Err(Error::Format(format!(
            "payload is {} bytes, header describes {needed}",
            payload.len()
        )));
    }
    let mut offset = 0;
    for ((name, len), (expected, dst)) in tensors.iter().zip(names.iter().zip(params.iter_mut())) {
        if name != expected || *len != dst.len() {
            return Err(Error::Format(format!(
                "tensor {name} ({len}) does not match model tensor {expected} ({})",
                dst.len()
            )));
        }
        for v in dst.iter_mut() {
            *v = T::read_le(&payload[offset..offset + T::BYTES]);
            offset += T::BYTES;
        }
    }
    Ok((model, CheckpointMeta { seed, epoch, history }))
}
