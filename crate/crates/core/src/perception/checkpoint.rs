//! Model checkpoints: a one-line header followed by the flat weight array.
//!
//! ```text
//! EMBAL-SEGMODEL 1 width <W> appearance_dim <D> context <c> classes <K> seed <s>
//! <w_0> <w_1> ...
//! ```

use std::io::{BufRead, Write};

use super::{ModelShape, SegModel};
use crate::error::{Error, Result};

const MAGIC: &str = "EMBAL-SEGMODEL";

pub fn write_model<W: Write>(model: &SegModel, mut out: W) -> Result<()> {
    let s = &model.shape;
    writeln!(
        out,
        "{MAGIC} 1 width {} appearance_dim {} context {} classes {} seed {}",
        s.width, s.appearance_dim, s.context, s.classes, model.init_seed
    )?;
    let line: Vec<String> = model.weights.iter().map(|w| w.to_string()).collect();
    writeln!(out, "{}", line.join(" "))?;
    Ok(())
}

pub fn read_model<R: BufRead>(input: R) -> Result<SegModel> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::format("model checkpoint", "empty"))??;
    let t: Vec<&str> = header.split_whitespace().collect();
    if t.len() != 12 || t[0] != MAGIC || t[1] != "1" {
        return Err(Error::format(
            "model checkpoint",
            format!("bad header `{header}`"),
        ));
    }
    let num = |i: usize| -> Result<u64> {
        t[i].parse()
            .map_err(|_| Error::format("model checkpoint", format!("bad field `{}`", t[i])))
    };
    let shape = ModelShape {
        width: num(3)? as usize,
        appearance_dim: num(5)? as usize,
        context: num(7)? as usize,
        classes: num(9)? as usize,
    };
    let seed = num(11)?;
    let body = lines
        .next()
        .ok_or_else(|| Error::format("model checkpoint", "missing weights"))??;
    let weights: Vec<f64> = body
        .split_whitespace()
        .map(|s| s.parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::format("model checkpoint", e.to_string()))?;
    SegModel::from_weights(shape, seed, weights)
}
