use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{ModelConfig, NeuralError, VisionTapas, Vocab};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"CQAT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    vocab: Vocab,
    tensors: Vec<TensorInfo>,
}

#[derive(Serialize, Deserialize)]
struct TensorInfo {
    name: String,
    shape: [usize; 2],
}

/// Layout: magic, u32 version, u64 header length, JSON header (config,
/// vocabulary, tensor names and shapes), then every tensor as little-endian
/// f64 in declaration order.
pub fn write_checkpoint<W: Write>(model: &VisionTapas, vocab: &Vocab, mut w: W) -> Result<(), NeuralError> {
    let p = model.params();
    let header = Header {
        config: model.config().clone(),
        vocab: vocab.clone(),
        tensors: (0..p.len())
            .map(|i| TensorInfo {
                name: p.name(i).to_string(),
                shape: [p.get(i).nrows(), p.get(i).ncols()],
            })
            .collect(),
    };
    let json = serde_json::to_vec(&header).map_err(|e| NeuralError::Checkpoint(e.to_string()))?;
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    w.write_all(&(json.len() as u64).to_le_bytes())?;
    w.write_all(&json)?;
    let mut buf = Vec::with_capacity(p.num_scalars() * 8);
    for t in p.tensors() {
        for v in t.iter() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    w.write_all(&buf)?;
    w.flush()?;
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<(VisionTapas, Vocab), NeuralError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(NeuralError::Checkpoint("missing magic".into()));
    }
    let mut word = [0u8; 4];
    r.read_exact(&mut word)?;
    let version = u32::from_le_bytes(word);
    if version != CHECKPOINT_VERSION {
        return Err(NeuralError::Checkpoint(format!("unsupported version {version}")));
    }
    let mut len = [0u8; 8];
    r.read_exact(&mut len)?;
    let mut json = vec![0u8; u64::from_le_bytes(len) as usize];
    r.read_exact(&mut json)?;
    let header: Header = serde_json::from_slice(&json).map_err(|e| NeuralError::Checkpoint(e.to_string()))?;
    if header.vocab.len() != header.config.vocab_size {
        return Err(NeuralError::Checkpoint("vocabulary size disagrees with config".into()));
    }
    let mut model = VisionTapas::new(header.config)?;
    let mut params = model.params().clone();
    if header.tensors.len() != params.len() {
        return Err(NeuralError::Checkpoint(format!(
            "{} tensors, config declares {}",
            header.tensors.len(),
            params.len()
        )));
    }
    for (i, info) in header.tensors.iter().enumerate() {
        let expected = params.get(i).dim();
        if info.name != params.name(i) || (info.shape[0], info.shape[1]) != expected {
            return Err(NeuralError::Checkpoint(format!(
                "tensor {i} is {} {:?}, expected {} {:?}",
                info.name,
                info.shape,
                params.name(i),
                expected
            )));
        }
        let mut bytes = vec![0u8; expected.0 * expected.1 * 8];
        r.read_exact(&mut bytes)?;
        let values: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        *params.get_mut(i) = Array2::from_shape_vec(expected, values).expect("length checked");
    }
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(NeuralError::Checkpoint(format!("{} trailing bytes", rest.len())));
    }
    model.set_params(params)?;
    Ok((model, header.vocab))
}

pub fn save_checkpoint(model: &VisionTapas, vocab: &Vocab, path: &Path) -> Result<(), NeuralError> {
    let file = std::fs::File::create(path)?;
    write_checkpoint(model, vocab, std::io::BufWriter::new(file))
}

pub fn load_checkpoint(path: &Path) -> Result<(VisionTapas, Vocab), NeuralError> {
    let file = std::fs::File::open(path)?;
    read_checkpoint(std::io::BufReader::new(file))
}
