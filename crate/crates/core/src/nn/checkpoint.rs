//! Binary parameter checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! | field        | size            |
//! |--------------|-----------------|
//! | magic        | 8 bytes         |
//! | version      | u32             |
//! | columns `d`  | u64             |
//! | config len   | u64             |
//! | config JSON  | config len      |
//! | param count  | u64             |
//! | parameters   | count × f64     |

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::config::ModelConfig;
use super::model::{Architecture, ModelParameters};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"PMAECKPT";
pub const VERSION: u32 = 1;

pub fn write_checkpoint<W: Write>(mut out: W, params: &ModelParameters) -> Result<()> {
    let config = serde_json::to_vec(&params.arch.config).map_err(|e| Error::Checkpoint(e.to_string()))?;
    let io = |e| Error::io("checkpoint", e);
    out.write_all(MAGIC).map_err(io)?;
    out.write_all(&VERSION.to_le_bytes()).map_err(io)?;
    out.write_all(&(params.arch.d as u64).to_le_bytes()).map_err(io)?;
    out.write_all(&(config.len() as u64).to_le_bytes()).map_err(io)?;
    out.write_all(&config).map_err(io)?;
    out.write_all(&(params.values.len() as u64).to_le_bytes()).map_err(io)?;
    for v in &params.values {
        out.write_all(&v.to_le_bytes()).map_err(io)?;
    }
    out.flush().map_err(io)
}

fn read_exact<const N: usize, R: Read>(input: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    input
        .read_exact(&mut buf)
        .map_err(|e| Error::Checkpoint(format!("truncated checkpoint: {e}")))?;
    Ok(buf)
}

fn read_u64<R: Read>(input: &mut R) -> Result<u64> {
    Ok(u64::from_le_bytes(read_exact::<8, _>(input)?))
}

pub fn read_checkpoint<R: Read>(mut input: R) -> Result<ModelParameters> {
    if &read_exact::<8, _>(&mut input)? != MAGIC {
        return Err(Error::Checkpoint("bad magic bytes".into()));
    }
    let version = u32::from_le_bytes(read_exact::<4, _>(&mut input)?);
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let d = read_u64(&mut input)? as usize;
    let config_len = read_u64(&mut input)? as usize;
    if config_len > 1 << 20 {
        return Err(Error::Checkpoint(format!("config block of {config_len} bytes")));
    }
    let mut config = vec![0u8; config_len];
    input
        .read_exact(&mut config)
        .map_err(|e| Error::Checkpoint(format!("truncated config: {e}")))?;
    let config: ModelConfig = serde_json::from_slice(&config).map_err(|e| Error::Checkpoint(e.to_string()))?;
    let arch = Architecture::new(d, config)?;
    let count = read_u64(&mut input)? as usize;
    if count != arch.n_params() {
        return Err(Error::Checkpoint(format!(
            "parameter count {count} does not match architecture ({})",
            arch.n_params()
        )));
    }
    let mut values = Vec::with_capacity(count);
    for _ in 0..count {
        values.push(f64::from_le_bytes(read_exact::<8, _>(&mut input)?));
    }
    let mut rest = [0u8; 1];
    if input.read(&mut rest).map_err(|e| Error::io("checkpoint", e))? != 0 {
        return Err(Error::Checkpoint("trailing bytes".into()));
    }
    Ok(ModelParameters { arch, values })
}

pub fn save_checkpoint(path: impl AsRef<Path>, params: &ModelParameters) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_checkpoint(BufWriter::new(file), params)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<ModelParameters> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::config::BlockKind;
    use crate::rng::rng_from_seed;

    fn small() -> ModelParameters {
        let cfg = ModelConfig {
            width: 8,
            encoder_depth: 1,
            decoder_depth: 1,
            heads: 2,
            ..ModelConfig::default()
        };
        ModelParameters::init(3, cfg.with_block_kind(BlockKind::Transformer), &mut rng_from_seed(4)).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let params = small();
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &params).unwrap();
        let back = read_checkpoint(buf.as_slice()).unwrap();
        assert_eq!(back, params);
    }

    #[test]
    fn rejects_corruption() {
        let params = small();
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &params).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_checkpoint(bad.as_slice()).is_err());
        assert!(read_checkpoint(&buf[..buf.len() - 3]).is_err());
        let mut long = buf.clone();
        long.push(0);
        assert!(read_checkpoint(long.as_slice()).is_err());
    }
}
