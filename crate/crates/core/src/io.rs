//! Plain-text formats for graphs, bipartite matrices and seed lists, and the
//! preprocessing filters used before matching real data.
//!
//! Graph files are tab-separated. A `# n=<count>` header fixes the vertex
//! count, then each line is `i<TAB>j<TAB>weight` with `i < j`, zero-based:
//!
//! ```text
//! # n=4
//! 0	1	1
//! 1	2	0.5
//! ```
//!
//! Bipartite files are comma-separated, one row per vertex, preceded by a
//! `# family=ising` or `# family=gaussian` line. Seed files hold
//! `a_vertex<TAB>b_vertex` pairs. Blank lines and other `#` lines are ignored.

use std::fs;
use std::path::Path;

use crate::graphs::{SeedSet, UnipartiteGraph};
use crate::models::{BipartiteData, ModelFamily};
use crate::{Error, Matrix, Result};

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Splits off a `# key=value` header line.
fn header_value<'a>(line: &'a str, key: &str) -> Option<&'a str> {
    let rest = line.strip_prefix('#')?.trim();
    let (k, v) = rest.split_once('=')?;
    (k.trim() == key).then(|| v.trim())
}

fn field<T: std::str::FromStr>(s: Option<&str>, line: usize, what: &str) -> Result<T> {
    let s = s.ok_or_else(|| parse_err(line, format!("missing {what}")))?;
    s.trim().parse().map_err(|_| parse_err(line, format!("bad {what} {s:?}")))
}

pub fn parse_graph(text: &str) -> Result<UnipartiteGraph> {
    let mut n: Option<usize> = None;
    let mut adj: Option<Matrix> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('#') {
            if let Some(v) = header_value(line, "n") {
                if n.is_some() {
                    return Err(parse_err(line_no, "duplicate vertex count header"));
                }
                let count: usize = v.parse().map_err(|_| parse_err(line_no, format!("bad vertex count {v:?}")))?;
                n = Some(count);
                adj = Some(Matrix::zeros(count, count));
            }
            continue;
        }
        let (count, m) = match (n, adj.as_mut()) {
            (Some(c), Some(m)) => (c, m),
            _ => return Err(parse_err(line_no, "edge before the `# n=` header")),
        };
        let mut parts = line.split('\t');
        let i: usize = field(parts.next(), line_no, "source vertex")?;
        let j: usize = field(parts.next(), line_no, "target vertex")?;
        let w: f64 = match parts.next() {
            Some(s) => field(Some(s), line_no, "weight")?,
            None => 1.0,
        };
        if parts.next().is_some() {
            return Err(parse_err(line_no, "too many fields"));
        }
        if i >= count || j >= count {
            return Err(parse_err(line_no, format!("vertex out of range for n = {count}")));
        }
        if i == j {
            return Err(parse_err(line_no, "self-loop"));
        }
        if !(w > 0.0 && w <= 1.0) {
            return Err(parse_err(line_no, format!("weight {w} outside (0, 1]")));
        }
        if m[(i, j)] != 0.0 {
            return Err(parse_err(line_no, format!("duplicate edge ({i}, {j})")));
        }
        m[(i, j)] = w;
        m[(j, i)] = w;
    }
    let adj = adj.ok_or_else(|| parse_err(0, "missing `# n=` header"))?;
    UnipartiteGraph::new(adj)
}

pub fn format_graph(a: &UnipartiteGraph) -> String {
    let mut out = format!("# n={}\n", a.n());
    let adj = a.adj();
    for i in 0..a.n() {
        for j in (i + 1)..a.n() {
            if adj[(i, j)] != 0.0 {
                out.push_str(&format!("{i}\t{j}\t{}\n", adj[(i, j)]));
            }
        }
    }
    out
}

pub fn read_graph(path: &Path) -> Result<UnipartiteGraph> {
    parse_graph(&read(path)?)
}

pub fn write_graph(path: &Path, a: &UnipartiteGraph) -> Result<()> {
    write(path, &format_graph(a))
}

pub fn parse_bipartite(text: &str) -> Result<BipartiteData> {
    let mut family: Option<ModelFamily> = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('#') {
            if let Some(v) = header_value(line, "family") {
                family = Some(match v {
                    "ising" => ModelFamily::Ising,
                    "gaussian" => ModelFamily::Gaussian,
                    other => return Err(parse_err(line_no, format!("unknown family {other:?}"))),
                });
            }
            continue;
        }
        let row = line
            .split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|_| parse_err(line_no, format!("bad value {s:?}"))))
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(parse_err(line_no, format!("expected {} values, found {}", first.len(), row.len())));
            }
        }
        if family == Some(ModelFamily::Ising) && row.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(parse_err(line_no, "binary data expected"));
        }
        rows.push(row);
    }
    let family = family.ok_or_else(|| parse_err(0, "missing `# family=` header"))?;
    if rows.is_empty() {
        return Err(parse_err(0, "no data rows"));
    }
    let (n, m) = (rows.len(), rows[0].len());
    let b = Matrix::from_fn(n, m, |i, k| rows[i][k]);
    BipartiteData::new(b, family)
}

pub fn format_bipartite(data: &BipartiteData) -> String {
    let family = match data.family() {
        ModelFamily::Ising => "ising",
        ModelFamily::Gaussian => "gaussian",
    };
    let mut out = format!("# family={family}\n");
    for row in data.matrix().row_iter() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn read_bipartite(path: &Path) -> Result<BipartiteData> {
    parse_bipartite(&read(path)?)
}

pub fn write_bipartite(path: &Path, data: &BipartiteData) -> Result<()> {
    write(path, &format_bipartite(data))
}

pub fn parse_seeds(text: &str) -> Result<SeedSet> {
    let mut pairs = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split('\t');
        let a: usize = field(parts.next(), line_no, "A vertex")?;
        let b: usize = field(parts.next(), line_no, "B vertex")?;
        if parts.next().is_some() {
            return Err(parse_err(line_no, "too many fields"));
        }
        pairs.push((a, b));
    }
    SeedSet::new(pairs)
}

pub fn format_seeds(seeds: &SeedSet) -> String {
    seeds.pairs().iter().map(|(a, b)| format!("{a}\t{b}\n")).collect()
}

pub fn read_seeds(path: &Path) -> Result<SeedSet> {
    parse_seeds(&read(path)?)
}

/// Vertices whose weighted degree lies in `[min, max]`.
pub fn degree_band(a: &UnipartiteGraph, min: f64, max: f64) -> Vec<usize> {
    (0..a.n())
        .filter(|&i| {
            let d = a.adj().row(i).sum();
            d >= min && d <= max
        })
        .collect()
}

/// Vertices of the largest connected component; on ties the component whose
/// smallest vertex comes first.
pub fn largest_component(a: &UnipartiteGraph) -> Vec<usize> {
    let n = a.n();
    let mut label = vec![usize::MAX; n];
    let mut best: Vec<usize> = Vec::new();
    for start in 0..n {
        if label[start] != usize::MAX {
            continue;
        }
        let mut comp = vec![start];
        label[start] = start;
        let mut k = 0;
        while k < comp.len() {
            let v = comp[k];
            k += 1;
            for u in a.neighbors(v) {
                if label[u] == usize::MAX {
                    label[u] = start;
                    comp.push(u);
                }
            }
        }
        if comp.len() > best.len() {
            comp.sort_unstable();
            best = comp;
        }
    }
    best
}

/// Drops constant rows and rows that are an exact affine copy of an earlier
/// kept row (absolute correlation one up to `1e-10`).
pub fn independent_rows(data: &BipartiteData) -> Vec<usize> {
    let b = data.matrix();
    let m = data.m() as f64;
    let centered: Vec<Vec<f64>> = b
        .row_iter()
        .map(|row| {
            let mean = row.sum() / m;
            row.iter().map(|v| v - mean).collect()
        })
        .collect();
    let norms: Vec<f64> = centered.iter().map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
    let mut keep: Vec<usize> = Vec::new();
    for i in 0..data.n() {
        if norms[i] == 0.0 {
            continue;
        }
        let collinear = keep.iter().any(|&j| {
            let dot: f64 = centered[i].iter().zip(&centered[j]).map(|(x, y)| x * y).sum();
            (dot.abs() / (norms[i] * norms[j]) - 1.0).abs() < 1e-10
        });
        if !collinear {
            keep.push(i);
        }
    }
    keep
}

/// Filters for externally supplied data, applied in the order degree band,
/// largest component, independent rows.
#[derive(Debug, Clone, Copy, Default, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Preprocess {
    pub min_degree: Option<f64>,
    pub max_degree: Option<f64>,
    pub largest_component: bool,
    pub drop_collinear_rows: bool,
}

/// Reads a graph and a bipartite matrix whose rows share the graph's vertex
/// indices, then applies `prep` to both.
pub fn load_external(graph_path: &Path, bipartite_path: &Path, prep: &Preprocess) -> Result<(UnipartiteGraph, BipartiteData)> {
    let a = read_graph(graph_path)?;
    let data = read_bipartite(bipartite_path)?;
    if data.n() != a.n() {
        return Err(Error::Dimension {
            expected: a.n(),
            got: data.n(),
        });
    }
    apply_preprocess(a, data, prep)
}

pub fn apply_preprocess(mut a: UnipartiteGraph, mut data: BipartiteData, prep: &Preprocess) -> Result<(UnipartiteGraph, BipartiteData)> {
    if prep.min_degree.is_some() || prep.max_degree.is_some() {
        let keep = degree_band(
            &a,
            prep.min_degree.unwrap_or(f64::NEG_INFINITY),
            prep.max_degree.unwrap_or(f64::INFINITY),
        );
        a = a.induced(&keep);
        data = data.select_rows(&keep);
    }
    if prep.largest_component {
        let keep = largest_component(&a);
        a = a.induced(&keep);
        data = data.select_rows(&keep);
    }
    if prep.drop_collinear_rows {
        let keep = independent_rows(&data);
        a = a.induced(&keep);
        data = data.select_rows(&keep);
    }
    if a.n() < 2 {
        return Err(Error::InsufficientData(format!("{} vertices left after preprocessing", a.n())));
    }
    Ok((a, data))
}
