//! Text serialization of `H`: a header line `n d k seed` followed by one
//! line `u v cycle_index` per edge. `L` is rebuilt on load.

use std::io::{BufRead, Write};

use super::{lattice_radius, GraphError, HEdge, HMultigraph};

pub fn write_graph<W: Write>(g: &HMultigraph, mut out: W) -> Result<(), GraphError> {
    writeln!(out, "{} {} {} {}", g.n(), g.d(), lattice_radius(g.d()), g.seed())?;
    for e in g.edges() {
        writeln!(out, "{} {} {}", e.u, e.v, e.cycle)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_graph<R: BufRead>(input: R) -> Result<HMultigraph, GraphError> {
    let mut lines = input.lines().enumerate();
    let (_, header) = lines.next().ok_or(GraphError::Parse {
        line: 1,
        msg: "empty file".into(),
    })?;
    let header = header?;
    let fields = parse_fields::<u64>(&header, 4, 1)?;
    let (n, d, k, seed) = (fields[0] as usize, fields[1] as usize, fields[2] as usize, fields[3]);
    if k != lattice_radius(d) {
        return Err(GraphError::Parse {
            line: 1,
            msg: format!("k = {k} does not match ceil(d/3) = {}", lattice_radius(d)),
        });
    }
    let mut edges = Vec::with_capacity(n * d / 2);
    for (i, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let f = parse_fields::<u64>(&line, 3, i + 1)?;
        edges.push(HEdge {
            u: f[0] as u32,
            v: f[1] as u32,
            cycle: f[2] as u16,
        });
    }
    let g = HMultigraph::from_edges(n, d, seed, edges)?;
    g.validate()?;
    Ok(g)
}

fn parse_fields<T: std::str::FromStr>(line: &str, expected: usize, line_no: usize) -> Result<Vec<T>, GraphError> {
    let parts: Vec<&str> = line.split_whitespace().collect();
    if parts.len() != expected {
        return Err(GraphError::Parse {
            line: line_no,
            msg: format!("expected {expected} fields, found {}", parts.len()),
        });
    }
    parts
        .iter()
        .map(|p| {
            p.parse::<T>().map_err(|_| GraphError::Parse {
                line: line_no,
                msg: format!("not a number: {p:?}"),
            })
        })
        .collect()
}
