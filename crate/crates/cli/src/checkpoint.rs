//! Versioned text checkpoint of an [`MlpModel`].
//!
//! ```text
//! spherical-checkpoint 1
//! kind s3
//! activation sexp
//! tensor trunk.0.weight 64 24
//! <64·24 values, row-major, space-separated>
//! tensor trunk.0.bias 64
//! <64 values>
//! …
//! tensor reg_head.weight 4 32
//! …
//! tensor sign_head.bias 8
//! <8 values>
//! end
//! ```
//!
//! `activation` is `softmax`, `sflat`, `sexp` or `none`. Weights come before
//! biases for every layer, trunk layers in order, then the regression head,
//! then the sign head. Values use Rust's shortest round-trip representation,
//! so loading a checkpoint reproduces the model bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, ensure, Context, Result};
use spherical_core::activations::ActivationKind;
use spherical_core::heads::SphereKind;
use spherical_core::network::{DenseLayer, MlpModel};
use spherical_core::DenseMatrix;

pub const MAGIC: &str = "spherical-checkpoint";
pub const VERSION: u32 = 1;

fn activation_name(a: Option<ActivationKind>) -> &'static str {
    a.map_or("none", ActivationKind::name)
}

fn push_tensor(out: &mut String, name: &str, shape: &[usize], values: &[f64]) {
    let dims: Vec<String> = shape.iter().map(usize::to_string).collect();
    let _ = writeln!(out, "tensor {name} {}", dims.join(" "));
    let vals: Vec<String> = values.iter().map(f64::to_string).collect();
    let _ = writeln!(out, "{}", vals.join(" "));
}

pub fn to_string(model: &MlpModel) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC} {VERSION}");
    let _ = writeln!(out, "kind {}", model.kind().name());
    let _ = writeln!(out, "activation {}", activation_name(model.activation()));
    for (name, layer) in model.layer_names().iter().zip(model.layers()) {
        let w = layer.weight();
        push_tensor(&mut out, &format!("{name}.weight"), &[w.rows(), w.cols()], w.as_slice());
        push_tensor(&mut out, &format!("{name}.bias"), &[layer.outputs()], layer.bias());
    }
    out.push_str("end\n");
    out
}

pub fn save(model: &MlpModel, path: &Path) -> Result<()> {
    fs::write(path, to_string(model)).with_context(|| format!("writing {}", path.display()))
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next(&mut self, what: &str) -> Result<(usize, &'a str)> {
        self.inner
            .next()
            .map(|(i, l)| (i + 1, l))
            .ok_or_else(|| anyhow!("unexpected end of checkpoint, expected {what}"))
    }

    fn keyword(&mut self, key: &str) -> Result<(usize, &'a str)> {
        let (n, line) = self.next(key)?;
        let rest = line
            .strip_prefix(key)
            .and_then(|r| r.strip_prefix(' '))
            .ok_or_else(|| anyhow!("line {n}: expected `{key} …`, found `{line}`"))?;
        Ok((n, rest))
    }
}

fn read_tensor(lines: &mut Lines<'_>, name: &str, shape: &[usize]) -> Result<Vec<f64>> {
    let (n, header) = lines.keyword("tensor")?;
    let mut parts = header.split(' ');
    let found = parts.next().unwrap_or_default();
    ensure!(found == name, "line {n}: expected tensor `{name}`, found `{found}`");
    let dims = parts
        .map(str::parse::<usize>)
        .collect::<Result<Vec<_>, _>>()
        .with_context(|| format!("line {n}: bad shape"))?;
    ensure!(dims == shape, "line {n}: tensor `{name}` has shape {dims:?}, expected {shape:?}");
    let (n, body) = lines.next("tensor values")?;
    let values = body
        .split(' ')
        .filter(|t| !t.is_empty())
        .map(str::parse::<f64>)
        .collect::<Result<Vec<_>, _>>()
        .with_context(|| format!("line {n}: bad value"))?;
    let expected: usize = shape.iter().product();
    ensure!(values.len() == expected, "line {n}: `{name}` has {} values, expected {expected}", values.len());
    Ok(values)
}

fn read_layer(lines: &mut Lines<'_>, name: &str) -> Result<DenseLayer> {
    // The weight header carries the shape; peek it by parsing generously.
    let (n, header) = lines.keyword("tensor")?;
    let mut parts = header.split(' ');
    let found = parts.next().unwrap_or_default();
    let wname = format!("{name}.weight");
    ensure!(found == wname, "line {n}: expected tensor `{wname}`, found `{found}`");
    let dims = parts
        .map(str::parse::<usize>)
        .collect::<Result<Vec<_>, _>>()
        .with_context(|| format!("line {n}: bad shape"))?;
    let [rows, cols] = dims[..] else {
        bail!("line {n}: `{wname}` must be two-dimensional");
    };
    let (n, body) = lines.next("tensor values")?;
    let w = body
        .split(' ')
        .filter(|t| !t.is_empty())
        .map(str::parse::<f64>)
        .collect::<Result<Vec<_>, _>>()
        .with_context(|| format!("line {n}: bad value"))?;
    let weight = DenseMatrix::new(rows, cols, w).map_err(|e| anyhow!("line {n}: {e}"))?;
    let bias = read_tensor(lines, &format!("{name}.bias"), &[rows])?;
    DenseLayer::new(weight, bias).map_err(|e| anyhow!("{name}: {e}"))
}

pub fn from_str(text: &str) -> Result<MlpModel> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
    };
    let (_, version) = lines.keyword(MAGIC).context("not a spherical checkpoint")?;
    let version: u32 = version.parse().context("bad checkpoint version")?;
    ensure!(version == VERSION, "unsupported checkpoint version {version} (expected {VERSION})");
    let (n, kind) = lines.keyword("kind")?;
    let kind = SphereKind::ALL
        .into_iter()
        .find(|k| k.name() == kind)
        .ok_or_else(|| anyhow!("line {n}: unknown kind `{kind}`"))?;
    let (n, act) = lines.keyword("activation")?;
    let activation = match act {
        "none" => None,
        _ => Some(
            ActivationKind::ALL
                .into_iter()
                .find(|a| a.name() == act)
                .ok_or_else(|| anyhow!("line {n}: unknown activation `{act}`"))?,
        ),
    };

    let mut trunk = Vec::new();
    loop {
        // Trunk layers until the regression head appears.
        let rest: String = lines.inner.clone().next().map(|(_, l)| l.to_string()).unwrap_or_default();
        if rest.starts_with("tensor reg_head.") {
            break;
        }
        trunk.push(read_layer(&mut lines, &format!("trunk.{}", trunk.len()))?);
    }
    let reg_head = read_layer(&mut lines, "reg_head")?;
    let sign_head = read_layer(&mut lines, "sign_head")?;
    let (n, end) = lines.next("end")?;
    ensure!(end == "end", "line {n}: expected `end`, found `{end}`");
    MlpModel::from_layers(trunk, reg_head, sign_head, kind, activation).map_err(|e| anyhow!("{e}"))
}

pub fn load(path: &Path) -> Result<MlpModel> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use spherical_core::Rng;

    fn model(activation: Option<ActivationKind>) -> MlpModel {
        MlpModel::new(5, &[6, 4], SphereKind::S2, activation, &mut Rng::new(3)).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        for act in [None, Some(ActivationKind::SphericalExp), Some(ActivationKind::SphericalFlat)] {
            let m = model(act);
            let back = from_str(&to_string(&m)).unwrap();
            assert_eq!(back, m);
        }
    }

    #[test]
    fn layout_is_documented_order() {
        let text = to_string(&model(Some(ActivationKind::SphericalExp)));
        let headers: Vec<&str> = text.lines().filter(|l| l.starts_with("tensor ")).collect();
        assert_eq!(
            headers,
            [
                "tensor trunk.0.weight 6 5",
                "tensor trunk.0.bias 6",
                "tensor trunk.1.weight 4 6",
                "tensor trunk.1.bias 4",
                "tensor reg_head.weight 3 4",
                "tensor reg_head.bias 3",
                "tensor sign_head.weight 4 4",
                "tensor sign_head.bias 4",
            ]
        );
        assert!(text.starts_with("spherical-checkpoint 1\nkind s2\nactivation sexp\n"));
        assert!(text.ends_with("end\n"));
    }

    #[test]
    fn corrupt_checkpoints_are_rejected() {
        let text = to_string(&model(None));
        assert!(from_str(&text.replace("spherical-checkpoint 1", "spherical-checkpoint 9")).is_err());
        assert!(from_str(&text.replace("kind s2", "kind s7")).is_err());
        assert!(from_str(&text.replace("tensor reg_head.bias 3", "tensor reg_head.bias 4")).is_err());
        assert!(from_str(text.trim_end_matches("end\n")).is_err());
        let truncated: String = text.lines().take(5).map(|l| format!("{l}\n")).collect();
        assert!(from_str(&truncated).is_err());
    }
}
