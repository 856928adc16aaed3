//! Flat text world dump.
//!
//! ```text
//! EMBAL-WORLD 1
//! seed <u64> cell_size <f64> classes <K> dims <W> <H> appearance_dim <D>
//! embedding <k> <v_1> ... <v_D>          (K lines)
//! texture_direction <v_1> ... <v_D>
//! cells
//! <occ> <class|-> <texture>              (W*H lines, row-major from y = 0)
//! ```
//!
//! `occ` is `0` for free and `1` for wall. Floats are written in Rust's
//! shortest round-trip form, so reading back reproduces the world exactly.

use std::io::{BufRead, Write};

use super::{Cell, GridWorld, NO_CLASS};
use crate::error::{Error, Result};

const MAGIC: &str = "EMBAL-WORLD";
const VERSION: u32 = 1;

pub fn write_world<W: Write>(world: &GridWorld, mut out: W) -> Result<()> {
    writeln!(out, "{MAGIC} {VERSION}")?;
    writeln!(
        out,
        "seed {} cell_size {} classes {} dims {} {} appearance_dim {}",
        world.seed,
        world.cell_size,
        world.class_count,
        world.width,
        world.height,
        world.appearance_dim()
    )?;
    for (k, e) in world.class_embeddings.iter().enumerate() {
        write!(out, "embedding {k}")?;
        for v in e {
            write!(out, " {v}")?;
        }
        writeln!(out)?;
    }
    write!(out, "texture_direction")?;
    for v in &world.texture_direction {
        write!(out, " {v}")?;
    }
    writeln!(out)?;
    writeln!(out, "cells")?;
    for i in 0..world.occupancy.len() {
        let occ = match world.occupancy[i] {
            Cell::Free => 0,
            Cell::Wall => 1,
        };
        match world.surface_class[i] {
            NO_CLASS => writeln!(out, "{occ} - {}", world.texture[i])?,
            k => writeln!(out, "{occ} {k} {}", world.texture[i])?,
        }
    }
    Ok(())
}

pub fn read_world<R: BufRead>(input: R) -> Result<GridWorld> {
    let bad = |d: String| Error::format("world file", d);
    let mut lines = input.lines();
    let mut next = move || -> Result<String> {
        lines
            .next()
            .ok_or_else(|| Error::format("world file", "unexpected end of file"))?
            .map_err(Error::from)
    };

    let header = next()?;
    let mut h = header.split_whitespace();
    if h.next() != Some(MAGIC) {
        return Err(bad("missing magic".into()));
    }
    let version: u32 = h
        .next()
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| bad("missing version".into()))?;
    if version != VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }

    let meta = next()?;
    let t: Vec<&str> = meta.split_whitespace().collect();
    if t.len() != 11
        || t[0] != "seed"
        || t[2] != "cell_size"
        || t[4] != "classes"
        || t[6] != "dims"
        || t[9] != "appearance_dim"
    {
        return Err(bad(format!("malformed metadata line `{meta}`")));
    }
    let parse_err = |what: &str| bad(format!("bad {what}"));
    let seed: u64 = t[1].parse().map_err(|_| parse_err("seed"))?;
    let cell_size: f64 = t[3].parse().map_err(|_| parse_err("cell_size"))?;
    let class_count: usize = t[5].parse().map_err(|_| parse_err("classes"))?;
    let width: usize = t[7].parse().map_err(|_| parse_err("width"))?;
    let height: usize = t[8].parse().map_err(|_| parse_err("height"))?;
    let dim: usize = t[10].parse().map_err(|_| parse_err("appearance_dim"))?;

    let floats = |line: &str, tag: &str, skip: usize| -> Result<Vec<f64>> {
        let mut it = line.split_whitespace();
        if it.next() != Some(tag) {
            return Err(bad(format!("expected `{tag}`")));
        }
        let v: Vec<f64> = it
            .skip(skip)
            .map(|s| s.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| parse_err(tag))?;
        if v.len() != dim {
            return Err(bad(format!(
                "`{tag}` has {} values, expected {dim}",
                v.len()
            )));
        }
        Ok(v)
    };
    let mut class_embeddings = Vec::with_capacity(class_count);
    for _ in 0..class_count {
        class_embeddings.push(floats(&next()?, "embedding", 1)?);
    }
    let texture_direction = floats(&next()?, "texture_direction", 0)?;
    if next()?.trim() != "cells" {
        return Err(bad("expected `cells`".into()));
    }

    let n = width * height;
    let mut occupancy = Vec::with_capacity(n);
    let mut surface_class = Vec::with_capacity(n);
    let mut texture = Vec::with_capacity(n);
    for i in 0..n {
        let line = next()?;
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 3 {
            return Err(bad(format!("cell record {i} malformed")));
        }
        occupancy.push(match f[0] {
            "0" => Cell::Free,
            "1" => Cell::Wall,
            o => return Err(bad(format!("cell {i}: bad occupancy `{o}`"))),
        });
        surface_class.push(match f[1] {
            "-" => NO_CLASS,
            k => k.parse().map_err(|_| parse_err("class"))?,
        });
        texture.push(f[2].parse().map_err(|_| parse_err("texture"))?);
    }
    let world = GridWorld {
        seed,
        cell_size,
        width,
        height,
        class_count,
        occupancy,
        surface_class,
        texture,
        class_embeddings,
        texture_direction,
    };
    world.validate().map_err(bad)?;
    Ok(world)
}
