//! Self-describing binary checkpoints: a text header followed by raw
//! little-endian `f64` tensors.

use std::collections::BTreeMap;
use std::path::Path;

use super::{Arch, EncoderConfig, HeadConfig, ModelParams, PostprocessorKind};
use crate::autodiff::ActivationKind;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

const MAGIC: &str = "clnr-ckpt v1";

/// Everything needed to rebuild a trained model.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub encoder: EncoderConfig,
    pub kind: PostprocessorKind,
    pub in_dim: usize,
    pub seed: u64,
    pub params: ModelParams,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    let mut head = String::new();
    let mut kv = |k: &str, v: String| head.push_str(&format!("{k} = {v}\n"));
    kv("arch", ckpt.encoder.arch.as_str().to_string());
    kv("layers", ckpt.encoder.n_layers.to_string());
    kv("in_dim", ckpt.in_dim.to_string());
    kv("hidden_dim", ckpt.encoder.hidden_dim.to_string());
    kv("out_dim", ckpt.encoder.out_dim.to_string());
    kv("activation", ckpt.encoder.activation.as_str().to_string());
    kv("postproc", ckpt.kind.tag().to_string());
    match ckpt.kind {
        PostprocessorKind::Dbn { iters } => kv("dbn_iters", iters.to_string()),
        PostprocessorKind::Mlp(h) | PostprocessorKind::MlpBn(h) => {
            kv("head_hidden", h.hidden_dim.to_string());
            kv("head_activation", h.activation.as_str().to_string());
        }
        _ => {}
    }
    kv("bn_eps", format!("{:e}", ckpt.params.bn_eps));
    kv("seed", ckpt.seed.to_string());
    let named = ckpt.params.named();
    kv("tensors", named.len().to_string());

    let mut bytes = format!("{MAGIC}\n{head}").into_bytes();
    for (name, t) in named {
        bytes.extend_from_slice(format!("tensor {name} {} {}\n", t.rows(), t.cols()).as_bytes());
        for v in t.data() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    std::fs::write(path, bytes)?;
    Ok(())
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn line(&mut self) -> Result<&'a str> {
        let rest = &self.buf[self.pos..];
        let end = rest.iter().position(|&b| b == b'\n').ok_or_else(|| bad("truncated header"))?;
        self.pos += end + 1;
        std::str::from_utf8(&rest[..end]).map_err(|_| bad("header is not UTF-8"))
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(bad("truncated tensor data"));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }
}

fn field<T: std::str::FromStr>(meta: &BTreeMap<String, String>, key: &str) -> Result<T> {
    let raw = meta.get(key).ok_or_else(|| bad(format!("missing '{key}'")))?;
    raw.parse().map_err(|_| bad(format!("bad value for '{key}': {raw}")))
}

fn activation(meta: &BTreeMap<String, String>, key: &str) -> Result<ActivationKind> {
    let raw: String = field(meta, key)?;
    raw.parse().map_err(|_| bad(format!("bad activation '{raw}'")))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let buf = std::fs::read(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
    let mut cur = Cursor { buf: &buf, pos: 0 };
    if cur.line()? != MAGIC {
        return Err(bad(format!("{} is not a checkpoint", path.display())));
    }
    let mut meta = BTreeMap::new();
    loop {
        let line = cur.line()?;
        let (k, v) = line.split_once(" = ").ok_or_else(|| bad(format!("malformed header line '{line}'")))?;
        meta.insert(k.to_string(), v.to_string());
        if k == "tensors" {
            break;
        }
    }
    let n_tensors: usize = field(&meta, "tensors")?;
    let mut tensors = BTreeMap::new();
    for _ in 0..n_tensors {
        let line = cur.line()?;
        let parts: Vec<&str> = line.split(' ').collect();
        let [tag, name, r, c] = parts[..] else {
            return Err(bad(format!("malformed tensor line '{line}'")));
        };
        let (rows, cols) = match (tag, r.parse::<usize>(), c.parse::<usize>()) {
            ("tensor", Ok(r), Ok(c)) => (r, c),
            _ => return Err(bad(format!("malformed tensor line '{line}'"))),
        };
        let raw = cur.take(rows * cols * 8)?;
        let data = raw.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect();
        tensors.insert(name.to_string(), Tensor::new(rows, cols, data)?);
    }
    if cur.pos != buf.len() {
        return Err(bad("trailing bytes after last tensor"));
    }

    let encoder = EncoderConfig {
        arch: field::<String>(&meta, "arch")?.parse::<Arch>()?,
        n_layers: field(&meta, "layers")?,
        hidden_dim: field(&meta, "hidden_dim")?,
        out_dim: field(&meta, "out_dim")?,
        activation: activation(&meta, "activation")?,
    };
    encoder.validate()?;
    let head = || -> Result<HeadConfig> {
        Ok(HeadConfig { hidden_dim: field(&meta, "head_hidden")?, activation: activation(&meta, "head_activation")? })
    };
    let kind = match field::<String>(&meta, "postproc")?.as_str() {
        "dbn" => PostprocessorKind::Dbn { iters: field(&meta, "dbn_iters")? },
        "mlp" => PostprocessorKind::Mlp(head()?),
        "mlp_bn" => PostprocessorKind::MlpBn(head()?),
        other => other.parse()?,
    };

    let mut take = |name: String| tensors.remove(&name).ok_or_else(|| bad(format!("missing tensor {name}")));
    let enc: Vec<Tensor> = (0..encoder.n_layers).map(|i| take(format!("encoder.{i}"))).collect::<Result<_>>()?;
    let encoder_slopes = if encoder.activation == ActivationKind::Prelu {
        (0..encoder.n_layers).map(|i| take(format!("encoder_slope.{i}"))).collect::<Result<_>>()?
    } else {
        Vec::new()
    };
    let (head_w, head_slope) = match kind.head() {
        Some(h) => {
            let w = vec![take("head.0".into())?, take("head.1".into())?];
            let s = if h.activation == ActivationKind::Prelu { Some(take("head_slope".into())?) } else { None };
            (w, s)
        }
        None => (Vec::new(), None),
    };
    if let Some(extra) = tensors.keys().next() {
        return Err(bad(format!("unexpected tensor {extra}")));
    }
    let in_dim: usize = field(&meta, "in_dim")?;
    if enc[0].rows() != in_dim || enc[encoder.n_layers - 1].cols() != encoder.out_dim {
        return Err(bad("encoder tensor shapes disagree with header"));
    }
    let params = ModelParams { encoder: enc, encoder_slopes, head: head_w, head_slope, bn_eps: field(&meta, "bn_eps")? };
    Ok(Checkpoint { encoder, kind, in_dim, seed: field(&meta, "seed")?, params })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::init_params;

    fn roundtrip(ckpt: &Checkpoint) -> Checkpoint {
        let dir = tempdir();
        let path = dir.join("model.ckpt");
        save_checkpoint(ckpt, &path).unwrap();
        let back = load_checkpoint(&path).unwrap();
        std::fs::remove_dir_all(dir).ok();
        back
    }

    fn tempdir() -> std::path::PathBuf {
        use std::sync::atomic::{AtomicUsize, Ordering};
        static N: AtomicUsize = AtomicUsize::new(0);
        let d = std::env::temp_dir().join(format!("clnr-ckpt-{}-{}", std::process::id(), N.fetch_add(1, Ordering::Relaxed)));
        std::fs::create_dir_all(&d).unwrap();
        d
    }

    #[test]
    fn roundtrip_every_kind_is_bit_exact() {
        for act in [ActivationKind::Relu, ActivationKind::Prelu] {
            for kind in ["none", "bn", "dbn", "mlp", "mlp_bn"] {
                let mut kind: PostprocessorKind = kind.parse().unwrap();
                if let PostprocessorKind::Mlp(h) | PostprocessorKind::MlpBn(h) = &mut kind {
                    h.activation = act;
                }
                let encoder = EncoderConfig { activation: act, ..EncoderConfig::gcn(2, 6) };
                let params = init_params(&encoder, &kind, 9, 4);
                let ckpt = Checkpoint { encoder, kind, in_dim: 9, seed: 4, params };
                assert_eq!(roundtrip(&ckpt), ckpt);
            }
        }
    }

    #[test]
    fn rejects_garbage_and_truncation() {
        let dir = tempdir();
        let path = dir.join("x.ckpt");
        std::fs::write(&path, b"hello\n").unwrap();
        assert!(matches!(load_checkpoint(&path), Err(Error::Checkpoint(_))));

        let encoder = EncoderConfig::gcn(1, 3);
        let kind = PostprocessorKind::Bn;
        let ckpt = Checkpoint { encoder, kind, in_dim: 2, seed: 0, params: init_params(&encoder, &kind, 2, 0) };
        save_checkpoint(&ckpt, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 3);
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(load_checkpoint(&path), Err(Error::Checkpoint(_))));
        assert!(matches!(load_checkpoint(&dir.join("missing")), Err(Error::Checkpoint(_))));
        std::fs::remove_dir_all(dir).ok();
    }
}
