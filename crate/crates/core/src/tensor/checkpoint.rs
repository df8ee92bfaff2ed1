//! Text serialization of parameter sets.
//!
//! ```text
//! paramset v1
//! version_tag mlp-v1
//! config 4,64,64,5 tanh softmax
//! entries 6
//! entry l0.weight 4,64
//! ...
//! data
//! l0.weight -0.12 0.0071 ...
//! ```
//!
//! Values use Rust's shortest round-trip float formatting, so a write/read
//! cycle reproduces every entry exactly.

use std::fmt::Write as _;

use super::{Activation, MlpConfig, OutputActivation, ParamSet, RealArray, TensorError};

const MAGIC: &str = "paramset v1";

fn fmt_shape(shape: &[usize]) -> String {
    shape.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(",")
}

fn parse_shape(s: &str, line: usize) -> Result<Vec<usize>, TensorError> {
    s.split(',')
        .map(|d| d.parse::<usize>().map_err(|_| format_err(line, format!("bad dimension `{d}`"))))
        .collect()
}

fn format_err(line: usize, msg: impl Into<String>) -> TensorError {
    TensorError::Format {
        line,
        msg: msg.into(),
    }
}

/// Renders `params` (and optionally the config that owns them).
pub fn write_params(params: &ParamSet, config: Option<&MlpConfig>) -> String {
    let mut out = String::new();
    writeln!(out, "{MAGIC}").unwrap();
    writeln!(out, "version_tag {}", params.version_tag).unwrap();
    if let Some(c) = config {
        let act = match c.activation {
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
        };
        let out_act = match c.output_activation {
            OutputActivation::Identity => "identity",
            OutputActivation::Softmax => "softmax",
        };
        writeln!(out, "config {} {act} {out_act}", fmt_shape(c.layer_sizes())).unwrap();
    }
    writeln!(out, "entries {}", params.len()).unwrap();
    for (name, a) in params.entries() {
        writeln!(out, "entry {name} {}", fmt_shape(a.shape())).unwrap();
    }
    writeln!(out, "data").unwrap();
    for (name, a) in params.entries() {
        out.push_str(name);
        for v in a.data() {
            write!(out, " {v:?}").unwrap();
        }
        out.push('\n');
    }
    out
}

/// Parses the format written by [`write_params`]. Returns the parameter set,
/// the embedded config if present, and the number of lines consumed.
pub fn read_params(text: &str) -> Result<(ParamSet, Option<MlpConfig>, usize), TensorError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let mut next = |what: &str| {
        lines
            .next()
            .ok_or_else(|| format_err(0, format!("unexpected end of input, expected {what}")))
    };

    let (ln, magic) = next("header")?;
    if magic.trim() != MAGIC {
        return Err(format_err(ln, format!("expected `{MAGIC}`, found `{magic}`")));
    }
    let (ln, tag_line) = next("version_tag")?;
    let tag = tag_line
        .strip_prefix("version_tag ")
        .ok_or_else(|| format_err(ln, "expected version_tag"))?;

    let (mut ln, mut line) = next("entries")?;
    let mut config = None;
    if let Some(rest) = line.strip_prefix("config ") {
        let parts: Vec<_> = rest.split_whitespace().collect();
        if parts.len() != 3 {
            return Err(format_err(ln, "config needs sizes, activation and output activation"));
        }
        let act = match parts[1] {
            "tanh" => Activation::Tanh,
            "relu" => Activation::Relu,
            other => return Err(format_err(ln, format!("unknown activation `{other}`"))),
        };
        let out_act = match parts[2] {
            "identity" => OutputActivation::Identity,
            "softmax" => OutputActivation::Softmax,
            other => return Err(format_err(ln, format!("unknown output activation `{other}`"))),
        };
        config = Some(MlpConfig::new(parse_shape(parts[0], ln)?, act, out_act)?);
        (ln, line) = next("entries")?;
    }
    let count: usize = line
        .strip_prefix("entries ")
        .and_then(|n| n.trim().parse().ok())
        .ok_or_else(|| format_err(ln, "expected `entries <n>`"))?;

    let mut headers = Vec::with_capacity(count);
    for _ in 0..count {
        let (ln, l) = next("entry")?;
        let parts: Vec<_> = l.split_whitespace().collect();
        if parts.len() != 3 || parts[0] != "entry" {
            return Err(format_err(ln, "expected `entry <name> <shape>`"));
        }
        headers.push((parts[1].to_string(), parse_shape(parts[2], ln)?));
    }
    let (ln, l) = next("data")?;
    if l.trim() != "data" {
        return Err(format_err(ln, "expected `data`"));
    }

    let mut params = ParamSet::new(tag);
    let mut last = ln;
    for (name, shape) in headers {
        let (ln, l) = next("array data")?;
        last = ln;
        let mut parts = l.split_whitespace();
        if parts.next() != Some(name.as_str()) {
            return Err(format_err(ln, format!("expected data for `{name}`")));
        }
        let data = parts
            .map(|v| v.parse::<f64>().map_err(|_| format_err(ln, format!("bad number `{v}`"))))
            .collect::<Result<Vec<_>, _>>()?;
        let array = RealArray::new(shape, data).map_err(|e| format_err(ln, e.to_string()))?;
        params.push(name, array)?;
    }
    if let Some(c) = &config {
        c.validate_params(&params)?;
    }
    Ok((params, config, last))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::mlp_init;
    use proptest::prelude::*;

    #[test]
    fn round_trip_with_config() {
        let c = MlpConfig::new(vec![3, 8, 2], Activation::Relu, OutputActivation::Softmax).unwrap();
        let p = mlp_init(&c, 42);
        let text = write_params(&p, Some(&c));
        let (q, qc, _) = read_params(&text).unwrap();
        assert_eq!(p, q);
        assert_eq!(qc, Some(c));
    }

    #[test]
    fn corrupt_input_reports_line() {
        let c = MlpConfig::new(vec![2, 2], Activation::Tanh, OutputActivation::Identity).unwrap();
        let text = write_params(&mlp_init(&c, 0), Some(&c)).replace("l0.bias 0.0 0.0", "l0.bias 0.0 zz");
        match read_params(&text) {
            Err(TensorError::Format { line, .. }) => assert_eq!(line, 9),
            other => panic!("unexpected {other:?}"),
        }
        assert!(read_params("paramset v9\n").is_err());
    }

    proptest! {
        #[test]
        fn arbitrary_values_round_trip(values in prop::collection::vec(-1e300f64..1e300, 1..40)) {
            let mut p = ParamSet::new("t");
            p.push("x", RealArray::from_vec(values).unwrap()).unwrap();
            let (q, _, _) = read_params(&write_params(&p, None)).unwrap();
            prop_assert_eq!(p, q);
        }
    }
}
