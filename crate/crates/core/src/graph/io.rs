use std::collections::HashMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{Community, Features, Graph};
use crate::error::{Error, Result};

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn is_skipped(line: &str) -> bool {
    let t = line.trim();
    t.is_empty() || t.starts_with('#')
}

fn parse_id(path: &Path, line: usize, tok: &str) -> Result<u64> {
    tok.parse().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: format!("expected an integer node id, got {tok:?}"),
    })
}

/// Reads a whitespace-separated edge list. Original ids are mapped to
/// contiguous internal ids in ascending original-id order.
pub fn load_edge_list(path: impl AsRef<Path>) -> Result<Graph> {
    let path = path.as_ref();
    let text = read(path)?;
    let mut raw = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if is_skipped(line) {
            continue;
        }
        let mut toks = line.split_whitespace();
        let (Some(a), Some(b)) = (toks.next(), toks.next()) else {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                msg: "expected two node ids".into(),
            });
        };
        raw.push((parse_id(path, i + 1, a)?, parse_id(path, i + 1, b)?));
    }
    let mut ids: Vec<u64> = raw.iter().flat_map(|&(a, b)| [a, b]).collect();
    ids.sort_unstable();
    ids.dedup();
    if ids.is_empty() {
        return Err(Error::EmptyGraph);
    }
    let lookup: HashMap<u64, usize> = ids.iter().enumerate().map(|(i, &o)| (o, i)).collect();
    let edges = raw.iter().map(|(a, b)| (lookup[a], lookup[b]));
    Graph::build(ids.len(), edges, ids, None)
}

/// Reads one community per line as original ids, without remapping.
pub fn load_raw_communities(path: impl AsRef<Path>) -> Result<Vec<Vec<u64>>> {
    let path = path.as_ref();
    let text = read(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if is_skipped(line) {
            continue;
        }
        let ids = line
            .split_whitespace()
            .map(|t| parse_id(path, i + 1, t))
            .collect::<Result<Vec<_>>>()?;
        out.push(ids);
    }
    Ok(out)
}

/// Reads a community file and remaps ids through the graph's id map.
/// Unknown nodes are dropped, then empty communities are removed.
pub fn load_communities(path: impl AsRef<Path>, graph: &Graph) -> Result<Vec<Community>> {
    let path = path.as_ref();
    let lookup = graph.id_lookup();
    let comms: Vec<Community> = load_raw_communities(path)?
        .into_iter()
        .filter_map(|ids| {
            let members: Vec<usize> = ids.iter().filter_map(|o| lookup.get(o).copied()).collect();
            Community::new(members).ok()
        })
        .collect();
    if comms.is_empty() {
        return Err(Error::NoCommunities(format!(
            "{} holds no community with known nodes",
            path.display()
        )));
    }
    Ok(comms)
}

/// Reads `id f1 ... ff` rows and attaches them to the graph. Nodes absent
/// from the file get an all-zero row.
pub fn load_features(path: impl AsRef<Path>, graph: Graph) -> Result<Graph> {
    let path = path.as_ref();
    let text = read(path)?;
    let lookup = graph.id_lookup();
    let mut rows: Vec<(usize, Vec<f64>)> = Vec::new();
    let mut width = None;
    for (i, line) in text.lines().enumerate() {
        if is_skipped(line) {
            continue;
        }
        let mut toks = line.split_whitespace();
        let id = parse_id(path, i + 1, toks.next().unwrap_or_default())?;
        let vals = toks
            .map(|t| {
                t.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    msg: format!("bad feature value {t:?}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if *width.get_or_insert(vals.len()) != vals.len() || vals.is_empty() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                msg: "inconsistent feature width".into(),
            });
        }
        if let Some(&u) = lookup.get(&id) {
            rows.push((u, vals));
        }
    }
    let cols = width.ok_or_else(|| Error::Parse {
        path: path.to_path_buf(),
        line: 0,
        msg: "empty feature file".into(),
    })?;
    let mut values = vec![0.0; graph.node_count() * cols];
    for (u, vals) in rows {
        values[u * cols..(u + 1) * cols].copy_from_slice(&vals);
    }
    let features = Features {
        rows: graph.node_count(),
        cols,
        values,
    };
    graph.with_features(features)
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn finish(path: &Path, w: BufWriter<fs::File>) -> Result<()> {
    w.into_inner()
        .map_err(|e| Error::io(path, e.into_error()))?
        .sync_all()
        .map_err(|e| Error::io(path, e))
}

/// Writes the graph's edges in original ids.
pub fn write_edge_list(path: impl AsRef<Path>, graph: &Graph) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    for (u, v) in graph.edges() {
        writeln!(w, "{}\t{}", graph.original_id(u), graph.original_id(v))
            .map_err(|e| Error::io(path, e))?;
    }
    finish(path, w)
}

/// Writes communities in original ids, one per line.
pub fn write_communities(path: impl AsRef<Path>, graph: &Graph, comms: &[Community]) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    for c in comms {
        let line: Vec<String> = c
            .members()
            .iter()
            .map(|&u| graph.original_id(u).to_string())
            .collect();
        writeln!(w, "{}", line.join(" ")).map_err(|e| Error::io(path, e))?;
    }
    finish(path, w)
}

/// Two-column `internal<TAB>original` map.
pub fn write_id_map(path: impl AsRef<Path>, graph: &Graph) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    for (i, o) in graph.original_ids().iter().enumerate() {
        writeln!(w, "{i}\t{o}").map_err(|e| Error::io(path, e))?;
    }
    finish(path, w)
}

pub fn load_id_map(path: impl AsRef<Path>) -> Result<Vec<u64>> {
    let path = path.as_ref();
    let text = read(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if is_skipped(line) {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 2 || parse_id(path, i + 1, toks[0])? != out.len() as u64 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                msg: "expected `internal original` with consecutive internal ids".into(),
            });
        }
        out.push(parse_id(path, i + 1, toks[1])?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn file(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn edge_list_basic() {
        let d = tempfile::tempdir().unwrap();
        let g = load_edge_list(file(&d, "e", "0 1\n1 2")).unwrap();
        assert_eq!((g.node_count(), g.edge_count()), (3, 2));
    }

    #[test]
    fn edge_list_dedup_and_self_loop() {
        let d = tempfile::tempdir().unwrap();
        let g = load_edge_list(file(&d, "e", "0 1\n1 0\n1 1")).unwrap();
        assert_eq!((g.node_count(), g.edge_count()), (2, 1));
    }

    #[test]
    fn edge_list_parse_error_has_line() {
        let d = tempfile::tempdir().unwrap();
        match load_edge_list(file(&d, "e", "a b")) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("unexpected {other:?}"),
        }
        match load_edge_list(file(&d, "e2", "# header\n1 2\n3\n")) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn edge_list_empty_and_comments() {
        let d = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_edge_list(file(&d, "e", "# only comments\n\n")),
            Err(Error::EmptyGraph)
        ));
        let g = load_edge_list(file(&d, "e2", "# c\n10 20\n20\t30\n")).unwrap();
        assert_eq!(g.original_ids(), &[10, 20, 30]);
    }

    #[test]
    fn communities_remap_and_drop() {
        let d = tempfile::tempdir().unwrap();
        let g = load_edge_list(file(&d, "e", "1 2\n2 3\n4 5\n")).unwrap();
        let c = load_communities(file(&d, "c", "1 2 3\n4 5"), &g).unwrap();
        assert_eq!(c.len(), 2);
        let c = load_communities(file(&d, "c2", "1 2 999\n"), &g).unwrap();
        // originals 1,2 are internal 0,1
        assert_eq!(c[0].members(), &[0, 1]);
        assert!(matches!(
            load_communities(file(&d, "c3", ""), &g),
            Err(Error::NoCommunities(_))
        ));
        assert!(matches!(
            load_communities(d.path().join("missing"), &g),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn id_map_round_trip() {
        let d = tempfile::tempdir().unwrap();
        let g = load_edge_list(file(&d, "e", "7 3\n3 11\n")).unwrap();
        let p = d.path().join("map.tsv");
        write_id_map(&p, &g).unwrap();
        assert_eq!(load_id_map(&p).unwrap(), g.original_ids());
    }

    #[test]
    fn features_attach() {
        let d = tempfile::tempdir().unwrap();
        let g = load_edge_list(file(&d, "e", "5 6\n")).unwrap();
        let g = load_features(file(&d, "f", "6 0.5 1\n5 2 3\n"), g).unwrap();
        assert_eq!(g.feature_dim(), 7);
        assert_eq!(&g.augmented_features().row(0)[..3], &[2.0, 3.0, 1.0]);
        assert_eq!(&g.augmented_features().row(1)[..3], &[0.5, 1.0, 1.0]);
    }
}
