//! Bit-exact binary checkpoints.
//!
//! Layout: the magic bytes `MMN1`, a little-endian u32 length followed by
//! the UTF-8 JSON configuration document, then each named tensor as
//! (u32 name length, name bytes, u32 rank, u32 extents…, row-major f32
//! little-endian values) in sorted name order until end of file. Loading
//! validates every tensor shape against what the configuration implies.

use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::numerics::Tensor;

use super::config::ModelConfig;
use super::params::{expected_shapes, Parameters};
use super::ModelError;

pub const MAGIC: &[u8; 4] = b"MMN1";

pub fn save(path: &Path, config: &ModelConfig, params: &Parameters<f32>) -> Result<(), ModelError> {
    let mut file = BufWriter::new(std::fs::File::create(path)?);
    file.write_all(MAGIC)?;
    let config_json = serde_json::to_vec(config)
        .map_err(|e| ModelError::Malformed { what: format!("config serialization: {}", e) })?;
    file.write_all(&(config_json.len() as u32).to_le_bytes())?;
    file.write_all(&config_json)?;
    for (name, tensor) in params.iter() {
        let name_bytes = name.as_bytes();
        file.write_all(&(name_bytes.len() as u32).to_le_bytes())?;
        file.write_all(name_bytes)?;
        file.write_all(&(tensor.shape().len() as u32).to_le_bytes())?;
        for &extent in tensor.shape() {
            file.write_all(&(extent as u32).to_le_bytes())?;
        }
        for &value in tensor.data() {
            file.write_all(&value.to_le_bytes())?;
        }
    }
    file.flush()?;
    Ok(())
}

pub fn load(path: &Path) -> Result<(ModelConfig, Parameters<f32>), ModelError> {
    let mut file = BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 4];
    file.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(ModelError::BadMagic { found: magic });
    }
    let config_len = read_u32(&mut file)? as usize;
    let mut config_bytes = vec![0u8; config_len];
    file.read_exact(&mut config_bytes)?;
    let config: ModelConfig = serde_json::from_slice(&config_bytes)
        .map_err(|e| ModelError::Malformed { what: format!("config document: {}", e) })?;
    config.validate().map_err(|e| ModelError::Malformed { what: e })?;

    let mut expected = expected_shapes(&config);
    let mut params = Parameters::init(&config, 0);
    loop {
        let name_len = match read_u32(&mut file) {
            Ok(n) => n as usize,
            Err(ModelError::Io(e)) if e.kind() == std::io::ErrorKind::UnexpectedEof => break,
            Err(e) => return Err(e),
        };
        let mut name_bytes = vec![0u8; name_len];
        file.read_exact(&mut name_bytes)?;
        let name = String::from_utf8(name_bytes)
            .map_err(|_| ModelError::Malformed { what: "tensor name is not UTF-8".to_string() })?;
        let rank = read_u32(&mut file)? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(read_u32(&mut file)? as usize);
        }
        let expected_shape = expected.remove(&name).ok_or_else(|| ModelError::Malformed {
            what: format!("unexpected tensor {:?} in checkpoint", name),
        })?;
        if shape != expected_shape {
            return Err(ModelError::ShapeMismatch { name, expected: expected_shape, found: shape });
        }
        let numel: usize = shape.iter().product();
        let mut bytes = vec![0u8; numel * 4];
        file.read_exact(&mut bytes)?;
        let data: Vec<f32> = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        let tensor = if params.get(&name).requires_grad() {
            Tensor::from_vec(shape, data).with_grad()
        } else {
            Tensor::from_vec(shape, data)
        };
        params.insert(name, tensor);
    }
    if let Some(missing) = expected.keys().next() {
        return Err(ModelError::Malformed {
            what: format!("checkpoint is missing tensor {:?}", missing),
        });
    }
    Ok((config, params))
}

fn read_u32<R: Read>(reader: &mut R) -> Result<u32, ModelError> {
    let mut buf = [0u8; 4];
    reader.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_config() -> ModelConfig {
        ModelConfig {
            vocab_size: 10,
            d_emb: 4,
            kernel_size: 3,
            encoder_layers: 2,
            decoder_layers: 1,
            memory_layers: vec![2],
            eps_smooth: 0.1,
            output_bias: true,
            freeze_embeddings: false,
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let cfg = toy_config();
        let params = Parameters::<f32>::init(&cfg, 99);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.mmn");
        save(&path, &cfg, &params).unwrap();
        let (loaded_cfg, loaded) = load(&path).unwrap();
        assert_eq!(loaded_cfg, cfg);
        for (name, tensor) in params.iter() {
            let other = loaded.get(name);
            assert_eq!(tensor.shape(), other.shape(), "{}", name);
            assert_eq!(tensor.data(), other.data(), "{}", name);
        }
    }

    #[test]
    fn save_is_deterministic() {
        let cfg = toy_config();
        let params = Parameters::<f32>::init(&cfg, 7);
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.mmn");
        let b = dir.path().join("b.mmn");
        save(&a, &cfg, &params).unwrap();
        save(&b, &cfg, &params).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }

    #[test]
    fn wrong_magic_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bogus.mmn");
        std::fs::write(&path, b"NOPE rest of file").unwrap();
        assert!(matches!(load(&path), Err(ModelError::BadMagic { .. })));
    }

    #[test]
    fn truncated_file_is_malformed() {
        let cfg = toy_config();
        let params = Parameters::<f32>::init(&cfg, 7);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.mmn");
        save(&path, &cfg, &params).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 5]).unwrap();
        assert!(load(&path).is_err());
    }
}
