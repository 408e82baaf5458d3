//! Binary checkpoint: `"OHAG"`, u32 version, connection and partition tags,
//! seed and epoch, named little-endian f64 sections each prefixed by its
//! length, and a trailing CRC32 over everything before it.

use std::path::Path;

use super::model::{GcnModel, ModelConfig};
use super::optim::Sgd;
use super::tensor::Matrix;
use crate::error::{Error, Result};
use crate::graph::{ConnectionStrategy, PartitionStrategy, PartitionedAdjacency};

pub const MAGIC: &[u8; 4] = b"OHAG";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: GcnModel,
    pub optimizer: Option<Sgd>,
    pub seed: u64,
    pub epoch: u32,
}

fn section(buf: &mut Vec<u8>, name: &str, values: &[f64]) {
    buf.extend_from_slice(&(name.len() as u16).to_le_bytes());
    buf.extend_from_slice(name.as_bytes());
    buf.extend_from_slice(&(values.len() as u64).to_le_bytes());
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let m = &self.model;
        let cfg = &m.config;
        let mut sections: Vec<(String, Vec<f64>)> = Vec::new();
        let mut config = vec![cfg.in_channels as f64, cfg.kernel_t as f64, cfg.num_classes as f64, cfg.channels.len() as f64];
        config.extend(cfg.channels.iter().map(|&c| c as f64));
        config.extend(cfg.strides.iter().map(|&s| s as f64));
        sections.push(("config".into(), config));
        sections.push(("adjacency.alpha".into(), vec![m.adjacency.alpha.unwrap_or(f64::NAN)]));
        for (j, a) in m.adjacency.subsets.iter().enumerate() {
            sections.push((format!("adjacency.{j}"), a.as_slice().to_vec()));
        }
        for (k, blob) in m.blobs().iter().enumerate() {
            sections.push((format!("weights.{k}"), blob.to_vec()));
        }
        if let Some(opt) = &self.optimizer {
            sections.push(("optimizer".into(), vec![opt.lr, opt.momentum]));
            for (k, v) in opt.velocity.iter().enumerate() {
                sections.push((format!("velocity.{k}"), v.clone()));
            }
        }

        let mut buf = Vec::new();
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&VERSION.to_le_bytes());
        buf.push(cfg.connection.tag());
        buf.push(cfg.partition.tag());
        buf.extend_from_slice(&0u16.to_le_bytes());
        buf.extend_from_slice(&self.seed.to_le_bytes());
        buf.extend_from_slice(&self.epoch.to_le_bytes());
        buf.extend_from_slice(&(sections.len() as u32).to_le_bytes());
        for (name, values) in &sections {
            section(&mut buf, name, values);
        }
        let crc = crc32fast::hash(&buf);
        buf.extend_from_slice(&crc.to_le_bytes());
        buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let corrupt = |m: &str| Error::Corruption(m.to_string());
        if bytes.len() < 8 || &bytes[..4] != MAGIC {
            return Err(corrupt("bad magic"));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != VERSION {
            return Err(Error::Version { found: version, expected: VERSION });
        }
        if bytes.len() < 32 {
            return Err(corrupt("truncated header"));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        if crc32fast::hash(body) != u32::from_le_bytes(tail.try_into().unwrap()) {
            return Err(corrupt("checksum mismatch"));
        }
        let mut r = Reader { buf: body, pos: 8 };
        let connection = ConnectionStrategy::from_tag(r.u8()?).ok_or_else(|| corrupt("unknown connection tag"))?;
        let partition = PartitionStrategy::from_tag(r.u8()?).ok_or_else(|| corrupt("unknown partition tag"))?;
        r.take(2)?;
        let seed = r.u64()?;
        let epoch = r.u32()?;
        let count = r.u32()? as usize;
        let mut sections = std::collections::BTreeMap::new();
        for _ in 0..count {
            let name_len = r.u16()? as usize;
            let name = std::str::from_utf8(r.take(name_len)?).map_err(|_| corrupt("section name"))?.to_string();
            let len = r.u64()? as usize;
            let raw = r.take(len.checked_mul(8).ok_or_else(|| corrupt("section length"))?)?;
            let values: Vec<f64> = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
            sections.insert(name, values);
        }
        if r.pos != body.len() {
            return Err(corrupt("trailing bytes"));
        }
        let mut get = |name: &str| sections.remove(name).ok_or_else(|| Error::Corruption(format!("missing section {name}")));

        let cfg = get("config")?;
        let as_usize = |v: f64| v as usize;
        if cfg.len() < 4 {
            return Err(corrupt("config section"));
        }
        let layers = as_usize(cfg[3]);
        if cfg.len() != 4 + 2 * layers {
            return Err(corrupt("config section"));
        }
        let config = ModelConfig {
            in_channels: as_usize(cfg[0]),
            kernel_t: as_usize(cfg[1]),
            num_classes: as_usize(cfg[2]),
            channels: cfg[4..4 + layers].iter().map(|&v| as_usize(v)).collect(),
            strides: cfg[4 + layers..].iter().map(|&v| as_usize(v)).collect(),
            connection,
            partition,
        };
        config.validate().map_err(|e| Error::Corruption(e.to_string()))?;
        let alpha = get("adjacency.alpha")?.first().copied().filter(|a| !a.is_nan());
        let subsets = (0..partition.num_subsets())
            .map(|j| {
                let values = get(&format!("adjacency.{j}"))?;
                let nodes = (values.len() as f64).sqrt().round() as usize;
                Matrix::from_vec(nodes, nodes, values).ok_or_else(|| corrupt("adjacency size"))
            })
            .collect::<Result<Vec<_>>>()?;
        let adjacency = PartitionedAdjacency { subsets, alpha };
        let mut model = GcnModel::new(config, adjacency, 0).map_err(|e| Error::Corruption(e.to_string()))?;
        let blob_count = model.blobs().len();
        for (k, blob) in model.blobs_mut().into_iter().enumerate() {
            let v = get(&format!("weights.{k}"))?;
            if v.len() != blob.len() {
                return Err(corrupt("weight size"));
            }
            blob.copy_from_slice(&v);
        }
        let optimizer = match get("optimizer") {
            Ok(o) if o.len() == 2 => {
                let mut opt = Sgd::new(&model, o[0], o[1]).map_err(|e| Error::Corruption(e.to_string()))?;
                for k in 0..blob_count {
                    let v = get(&format!("velocity.{k}"))?;
                    if v.len() != opt.velocity[k].len() {
                        return Err(corrupt("velocity size"));
                    }
                    opt.velocity[k] = v;
                }
                Some(opt)
            }
            Ok(_) => return Err(corrupt("optimizer section")),
            Err(_) => None,
        };
        Ok(Self { model, optimizer, seed, epoch })
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Corruption("unexpected end of data".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn save_checkpoint(checkpoint: &Checkpoint, path: &Path) -> Result<()> {
    std::fs::write(path, checkpoint.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gcn::Tensor3;
    use crate::graph::{normalize, partition_distance, GraphSpec};

    fn small_checkpoint() -> Checkpoint {
        let spec = GraphSpec::custom(4, vec![(0, 1), (1, 2), (2, 3)]).unwrap();
        let adj = normalize(&partition_distance(&spec), 0.001).unwrap();
        let config = ModelConfig {
            in_channels: 3,
            channels: vec![4, 6],
            strides: vec![1, 2],
            kernel_t: 3,
            num_classes: 3,
            connection: ConnectionStrategy::HumanOnly,
            partition: PartitionStrategy::Distance,
        };
        let model = GcnModel::new(config, adj, 7).unwrap();
        let mut opt = Sgd::new(&model, 0.01, 0.9).unwrap();
        opt.velocity[0][0] = 0.25;
        Checkpoint { model, optimizer: Some(opt), seed: 7, epoch: 3 }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let ck = small_checkpoint();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        save_checkpoint(&ck, &path).unwrap();
        let back = load_checkpoint(&path).unwrap();
        assert_eq!(back, ck);
        let probe = Tensor3::from_vec(3, 5, 4, (0..60).map(|i| (i as f64 * 0.37).sin()).collect()).unwrap();
        let a = ck.model.forward(&probe).unwrap().logits;
        let b = back.model.forward(&probe).unwrap().logits;
        assert_eq!(a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }

    #[test]
    fn truncation_and_version() {
        let bytes = small_checkpoint().to_bytes();
        assert!(matches!(Checkpoint::from_bytes(&bytes[..bytes.len() - 9]), Err(Error::Corruption(_))));
        assert!(matches!(Checkpoint::from_bytes(&bytes[..20]), Err(Error::Corruption(_))));
        let mut flipped = bytes.clone();
        flipped[40] ^= 1;
        assert!(matches!(Checkpoint::from_bytes(&flipped), Err(Error::Corruption(_))));

        let mut bumped = bytes[..bytes.len() - 4].to_vec();
        bumped[4..8].copy_from_slice(&(VERSION + 1).to_le_bytes());
        let crc = crc32fast::hash(&bumped);
        bumped.extend_from_slice(&crc.to_le_bytes());
        assert!(matches!(Checkpoint::from_bytes(&bumped), Err(Error::Version { found: 2, .. })));
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(load_checkpoint(Path::new("/nonexistent/x.ckpt")), Err(Error::Io { .. })));
    }
}
