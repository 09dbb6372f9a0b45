//! Flat-text parameter checkpoints.
//!
//! ```text
//! bngp-mlp 1
//! config <json MlpConfig>
//! <name> <len>
//! <len whitespace-separated values>
//! ...
//! ```
//! Values are written with Rust's shortest round-trip formatting, so loading
//! reproduces every parameter bit for bit. Batch-norm running moments are
//! stored as `layerN.bn_mean` / `layerN.bn_var`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::mlp::{Mlp, MlpConfig};
use crate::error::{Error, Result};

const MAGIC: &str = "bngp-mlp 1";

fn bad(row: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        row,
        column: 0,
        message: message.into(),
    }
}

fn all_tensors(net: &Mlp) -> Vec<(String, Vec<f64>)> {
    let mut out: Vec<(String, Vec<f64>)> = net.parameters().into_iter().map(|(n, v)| (n, v.to_vec())).collect();
    for (l, bn) in net.norms().iter().enumerate() {
        if let Some(bn) = bn {
            out.push((format!("layer{l}.bn_mean"), bn.running_mean.to_vec()));
            out.push((format!("layer{l}.bn_var"), bn.running_var.to_vec()));
        }
    }
    out
}

pub fn checkpoint_to_string(net: &Mlp) -> Result<String> {
    let config = serde_json::to_string(net.config()).map_err(|e| Error::Numeric(e.to_string()))?;
    let mut s = format!("{MAGIC}\nconfig {config}\n");
    for (name, values) in all_tensors(net) {
        writeln!(s, "{name} {}", values.len()).unwrap();
        let line: Vec<String> = values.iter().map(|v| format!("{v}")).collect();
        writeln!(s, "{}", line.join(" ")).unwrap();
    }
    Ok(s)
}

pub fn checkpoint_from_str(text: &str) -> Result<Mlp> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, MAGIC)) => {}
        _ => return Err(bad(1, format!("expected header {MAGIC:?}"))),
    }
    let (row, cfg_line) = lines.next().ok_or_else(|| bad(2, "missing config line"))?;
    let json = cfg_line.strip_prefix("config ").ok_or_else(|| bad(row, "missing config line"))?;
    let config: MlpConfig = serde_json::from_str(json).map_err(|e| bad(row, e.to_string()))?;
    let mut net = Mlp::zeros(config)?;
    let expected: Vec<(String, usize)> = all_tensors(&net).into_iter().map(|(n, v)| (n, v.len())).collect();
    let mut loaded = Vec::with_capacity(expected.len());
    for (name, len) in &expected {
        let (row, head) = lines.next().ok_or_else(|| bad(0, format!("missing tensor {name}")))?;
        if head != format!("{name} {len}") {
            return Err(bad(row, format!("expected tensor header `{name} {len}`, found `{head}`")));
        }
        let (row, body) = lines.next().ok_or_else(|| bad(row + 1, format!("missing values of {name}")))?;
        let values: Vec<f64> = body
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|e| bad(row, format!("{t:?}: {e}"))))
            .collect::<Result<_>>()?;
        if values.len() != *len || values.iter().any(|v| !v.is_finite()) {
            return Err(bad(row, format!("{name} needs {len} finite values")));
        }
        loaded.push(values);
    }
    let n_params = net.parameters().len();
    for ((_, dst), src) in net.parameters_mut().into_iter().zip(&loaded) {
        dst.copy_from_slice(src);
    }
    let mut moments = loaded[n_params..].iter();
    for bn in net.norms.iter_mut().flatten() {
        bn.running_mean.as_slice_mut().unwrap().copy_from_slice(moments.next().unwrap());
        bn.running_var.as_slice_mut().unwrap().copy_from_slice(moments.next().unwrap());
    }
    Ok(net)
}

pub fn save_checkpoint(net: &Mlp, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, checkpoint_to_string(net)?)?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Mlp> {
    checkpoint_from_str(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::mlp::{HiddenActivation, Mode, OutputActivation};
    use ndarray::Array2;

    #[test]
    fn round_trip_is_bit_exact() {
        let cfg = MlpConfig::new(vec![3, 7, 5, 2], HiddenActivation::leaky(), OutputActivation::ScaledSigmoid)
            .with_batch_norm(true)
            .with_seed(42);
        let mut net = Mlp::new(cfg).unwrap();
        let x = Array2::from_shape_fn((9, 3), |(r, c)| (r as f64 * 0.37 - c as f64).sin());
        net.forward(&x, Mode::Train).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.ckpt");
        save_checkpoint(&net, &path).unwrap();
        let back = load_checkpoint(&path).unwrap();
        assert_eq!(back.config(), net.config());
        assert_eq!(back.weights(), net.weights());
        assert_eq!(back.biases(), net.biases());
        assert_eq!(back.norms(), net.norms());
        assert_eq!(back.predict(&x).unwrap(), net.predict(&x).unwrap());
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let cfg = MlpConfig::new(vec![1, 2, 1], HiddenActivation::Relu, OutputActivation::Sigmoid);
        let text = checkpoint_to_string(&Mlp::new(cfg).unwrap()).unwrap();
        assert!(checkpoint_from_str("nope").is_err());
        assert!(checkpoint_from_str(&text.replace("layer0.bias 2", "layer0.bias 3")).is_err());
        let truncated: String = text.lines().take(4).collect::<Vec<_>>().join("\n");
        assert!(checkpoint_from_str(&truncated).is_err());
    }
}
