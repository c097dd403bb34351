//! Binary model checkpoints.
//!
//! ```text
//! "TFN1"
//! u32 header length, JSON header {mode, backbone, n_classes, family, channels, standardize_input}
//! u32 block count
//! per block: u16 tag length, tag, u32 value count, values as f64 LE
//! ```
//!
//! Blocks follow the model's parameter visit order; loading rebuilds the
//! architecture from the header and checks every tag and length.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{assemble_model, Backbone, Model, ModelMode, TfConvConfig};
use crate::error::{Error, Result};
use crate::kernels::KernelFamily;

const MAGIC: &[u8; 4] = b"TFN1";

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    mode: String,
    backbone: String,
    n_classes: usize,
    family: Option<KernelFamily>,
    channels: Option<usize>,
    standardize_input: bool,
}

pub fn encode_checkpoint(model: &mut Model) -> Result<Vec<u8>> {
    let header = Header {
        mode: model.mode.name().into(),
        backbone: model.backbone.name().into(),
        n_classes: model.n_classes,
        family: model.tfconv.map(|t| t.family),
        channels: model.tfconv.map(|t| t.channels),
        standardize_input: model.standardize_input,
    };
    let json = serde_json::to_vec(&header)?;
    let mut out = MAGIC.to_vec();
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    let mut blocks: Vec<(&'static str, Vec<f64>)> = Vec::new();
    for layer in &mut model.layers {
        layer.visit_state(&mut |tag, v| blocks.push((tag, v.clone())));
    }
    out.extend_from_slice(&(blocks.len() as u32).to_le_bytes());
    for (tag, values) in blocks {
        out.extend_from_slice(&(tag.len() as u16).to_le_bytes());
        out.extend_from_slice(tag.as_bytes());
        out.extend_from_slice(&(values.len() as u32).to_le_bytes());
        for v in values {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    source: &'a str,
}

impl<'a> Reader<'a> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse { source_name: self.source.into(), location: format!("byte offset {}", self.pos), message: message.into() }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(self.err(format!("unexpected end of file (wanted {n} more bytes)")));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn decode_checkpoint(bytes: &[u8], source: &str) -> Result<Model> {
    let mut r = Reader { bytes, pos: 0, source };
    if r.take(4)? != MAGIC {
        r.pos = 0;
        return Err(r.err("not a TFN1 checkpoint"));
    }
    let n = r.u32()? as usize;
    let header: Header = serde_json::from_slice(r.take(n)?).map_err(|e| r.err(format!("header: {e}")))?;
    let mode: ModelMode = header.mode.parse().map_err(|e: Error| r.err(e.to_string()))?;
    let backbone: Backbone = header.backbone.parse().map_err(|e: Error| r.err(e.to_string()))?;
    let tf = TfConvConfig {
        family: header.family.unwrap_or(KernelFamily::Sttf),
        channels: header.channels.unwrap_or(8),
    };
    let mut model = assemble_model(mode, backbone, tf, header.n_classes, 0).map_err(|e| r.err(e.to_string()))?;
    model.standardize_input = header.standardize_input;
    let count = r.u32()? as usize;
    let mut blocks = Vec::with_capacity(count);
    for _ in 0..count {
        let tl = r.u16()? as usize;
        let tag = String::from_utf8(r.take(tl)?.to_vec()).map_err(|_| r.err("tag is not UTF-8"))?;
        let len = r.u32()? as usize;
        let raw = r.take(len.checked_mul(8).ok_or_else(|| r.err("block too large"))?)?;
        let values: Vec<f64> = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        blocks.push((tag, values, r.pos));
    }
    if r.pos != bytes.len() {
        return Err(r.err("trailing bytes after the last block"));
    }
    let mut next = blocks.into_iter();
    let mut failure = None;
    for layer in &mut model.layers {
        layer.visit_state(&mut |tag, v| {
            if failure.is_some() {
                return;
            }
            match next.next() {
                Some((t, values, _)) if t == tag && values.len() == v.len() => *v = values,
                Some((t, values, at)) => {
                    failure = Some(Error::Parse {
                        source_name: source.into(),
                        location: format!("byte offset {at}"),
                        message: format!("block `{t}` ({} values) where `{tag}` ({} values) was expected", values.len(), v.len()),
                    })
                }
                None => failure = Some(Error::Parse {
                    source_name: source.into(),
                    location: "end of file".into(),
                    message: format!("missing block `{tag}`"),
                }),
            }
        });
    }
    if let Some(e) = failure {
        return Err(e);
    }
    if next.next().is_some() {
        return Err(Error::Parse { source_name: source.into(), location: "end of file".into(), message: "extra parameter blocks".into() });
    }
    if let Some(tf) = model.tfconv_layer() {
        if !tf.params.violations().is_empty() {
            return Err(Error::ConstraintViolation(format!("{source}: kernel parameters outside their limits")));
        }
    }
    Ok(model)
}

pub fn save_checkpoint(model: &mut Model, path: &Path) -> Result<()> {
    fs::write(path, encode_checkpoint(model)?)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Model> {
    decode_checkpoint(&fs::read(path)?, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Tensor;

    #[test]
    fn roundtrip_preserves_outputs() {
        for mode in ModelMode::ALL {
            let mut m = assemble_model(mode, Backbone::Resnet1d, TfConvConfig { family: KernelFamily::Chirplet, channels: 4 }, 3, 11).unwrap();
            // perturb running stats so they are part of the comparison
            let x = Tensor::from_vec(4, 1, 96, (0..384).map(|i| (i as f64 * 0.37).sin()).collect()).unwrap();
            m.forward(&x, true).unwrap();
            let bytes = encode_checkpoint(&mut m).unwrap();
            let mut back = decode_checkpoint(&bytes, "mem").unwrap();
            assert_eq!(back.mode, mode);
            assert_eq!(m.forward(&x, false).unwrap(), back.forward(&x, false).unwrap());
        }
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let mut m = assemble_model(ModelMode::TfnAdd, Backbone::Lenet1d, TfConvConfig::default(), 5, 0).unwrap();
        let bytes = encode_checkpoint(&mut m).unwrap();
        assert!(decode_checkpoint(&bytes[..bytes.len() - 3], "mem").is_err());
        assert!(decode_checkpoint(b"XXXX", "mem").is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(decode_checkpoint(&extra, "mem").is_err());
    }
}
