//! Textual parameter checkpoint format.
//!
//! Layout (`lifted-checkpoint v1`, UTF-8, line-oriented):
//!
//! ```text
//! lifted-checkpoint v1
//! widths <w0> <w1> ... <wn>
//! activations <a1> ... <an>
//! init_seed <u64>
//! init_scale <f64 | default>
//! layer <idx> weight <rows> <cols>
//! <rows lines of cols space-separated f64 values, row-major>
//! layer <idx> bias <len>
//! <one line of len values>
//! ```
//!
//! Floats are written in Rust's shortest round-trip decimal form, so a
//! save/load cycle reproduces parameters bit for bit and identical models
//! produce byte-identical files.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::model::{Activation, Mlp, MlpSpec};

const MAGIC: &str = "lifted-checkpoint v1";

impl Mlp {
    pub fn to_checkpoint_string(&self) -> String {
        let spec = self.spec();
        let mut out = String::new();
        writeln!(out, "{MAGIC}").unwrap();
        writeln!(
            out,
            "widths {}",
            spec.layer_widths
                .iter()
                .map(|w| w.to_string())
                .collect::<Vec<_>>()
                .join(" ")
        )
        .unwrap();
        writeln!(
            out,
            "activations {}",
            spec.activations
                .iter()
                .map(|a| a.as_str())
                .collect::<Vec<_>>()
                .join(" ")
        )
        .unwrap();
        writeln!(out, "init_seed {}", spec.init_seed).unwrap();
        match spec.init_scale {
            Some(s) => writeln!(out, "init_scale {s}").unwrap(),
            None => writeln!(out, "init_scale default").unwrap(),
        }
        for (idx, layer) in self.layers.iter().enumerate() {
            let (rows, cols) = layer.weight.dim();
            writeln!(out, "layer {idx} weight {rows} {cols}").unwrap();
            for r in layer.weight.rows() {
                let line = r
                    .iter()
                    .map(|v| v.to_string())
                    .collect::<Vec<_>>()
                    .join(" ");
                writeln!(out, "{line}").unwrap();
            }
            writeln!(out, "layer {idx} bias {}", layer.bias.len()).unwrap();
            let line = layer
                .bias
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(" ");
            writeln!(out, "{line}").unwrap();
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_checkpoint_string())?;
        Ok(())
    }

    pub fn from_checkpoint_str(text: &str) -> Result<Self> {
        let bad = |msg: String| Error::Checkpoint(msg);
        let mut lines = text.lines();
        let magic = lines.next().ok_or_else(|| bad("empty checkpoint".into()))?;
        if magic != MAGIC {
            return Err(bad(format!("unrecognized header `{magic}`")));
        }
        let field = |line: Option<&str>, key: &str| -> Result<String> {
            let line = line.ok_or_else(|| bad(format!("missing `{key}` line")))?;
            line.strip_prefix(key)
                .map(|rest| rest.trim().to_string())
                .ok_or_else(|| bad(format!("expected `{key}` line, got `{line}`")))
        };
        let widths: Vec<usize> = field(lines.next(), "widths")?
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| bad(format!("bad width `{t}`"))))
            .collect::<Result<_>>()?;
        let activations: Vec<Activation> = field(lines.next(), "activations")?
            .split_whitespace()
            .map(|t| t.parse())
            .collect::<Result<_>>()?;
        let init_seed: u64 = field(lines.next(), "init_seed")?
            .parse()
            .map_err(|_| bad("bad init_seed".into()))?;
        let scale_text = field(lines.next(), "init_scale")?;
        let init_scale = if scale_text == "default" {
            None
        } else {
            Some(
                scale_text
                    .parse()
                    .map_err(|_| bad(format!("bad init_scale `{scale_text}`")))?,
            )
        };
        let spec = MlpSpec {
            layer_widths: widths.clone(),
            activations,
            init_seed,
            init_scale,
        };
        spec.validate().map_err(|e| bad(e.to_string()))?;

        let parse_row = |line: Option<&str>, expect: usize| -> Result<Vec<f64>> {
            let line = line.ok_or_else(|| bad("truncated parameter block".into()))?;
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| bad(format!("bad float `{t}`"))))
                .collect::<Result<_>>()?;
            if vals.len() != expect {
                return Err(bad(format!(
                    "expected {expect} values per row, got {}",
                    vals.len()
                )));
            }
            Ok(vals)
        };

        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for idx in 0..widths.len() - 1 {
            let (rows, cols) = (widths[idx + 1], widths[idx]);
            let header = field(lines.next(), &format!("layer {idx} weight"))?;
            if header != format!("{rows} {cols}") {
                return Err(bad(format!(
                    "layer {idx} weight shape `{header}` does not match widths"
                )));
            }
            let mut w = Array2::zeros((rows, cols));
            for r in 0..rows {
                for (c, v) in parse_row(lines.next(), cols)?.into_iter().enumerate() {
                    w[[r, c]] = v;
                }
            }
            weights.push(w);
            let header = field(lines.next(), &format!("layer {idx} bias"))?;
            if header != rows.to_string() {
                return Err(bad(format!("layer {idx} bias length mismatch")));
            }
            biases.push(Array1::from_vec(parse_row(lines.next(), rows)?));
        }
        Mlp::from_parts(spec, weights, biases)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_checkpoint_str(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let mlp = Mlp::init(MlpSpec::relu_net(vec![4, 7, 3], 123)).unwrap();
        let text = mlp.to_checkpoint_string();
        let loaded = Mlp::from_checkpoint_str(&text).unwrap();
        for idx in 0..mlp.num_layers() {
            assert_eq!(mlp.weight(idx), loaded.weight(idx));
            assert_eq!(mlp.bias(idx), loaded.bias(idx));
        }
        // Re-serialization is byte-identical.
        assert_eq!(text, loaded.to_checkpoint_string());
    }

    #[test]
    fn rejects_garbage() {
        assert!(Mlp::from_checkpoint_str("not a checkpoint").is_err());
        assert!(Mlp::from_checkpoint_str("").is_err());
    }

    #[test]
    fn rejects_truncated_block() {
        let mlp = Mlp::init(MlpSpec::relu_net(vec![2, 2], 1)).unwrap();
        let text = mlp.to_checkpoint_string();
        let truncated: String = text.lines().take(6).collect::<Vec<_>>().join("\n");
        assert!(Mlp::from_checkpoint_str(&truncated).is_err());
    }
}
