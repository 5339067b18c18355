//! Text formats for graphs: edge lists ("u v" per line, `#` comments),
//! label files (one integer per line), and feature CSVs (no header).

use std::io::{BufRead, BufReader, Read, Write};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::graph::Graph;

pub fn read_edge_list<R: Read>(reader: R) -> Result<Vec<(usize, usize)>> {
    let mut edges = Vec::new();
    for (lineno, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let parse = |tok: Option<&str>| -> Result<usize> {
            tok.ok_or_else(|| Error::Parse {
                line: lineno + 1,
                reason: "expected two node ids".into(),
            })?
            .parse::<usize>()
            .map_err(|e| Error::Parse {
                line: lineno + 1,
                reason: format!("invalid node id: {e}"),
            })
        };
        let u = parse(parts.next())?;
        let v = parse(parts.next())?;
        if parts.next().is_some() {
            return Err(Error::Parse {
                line: lineno + 1,
                reason: "expected exactly two node ids".into(),
            });
        }
        edges.push((u, v));
    }
    Ok(edges)
}

pub fn read_labels<R: Read>(reader: R) -> Result<Vec<usize>> {
    let mut labels = Vec::new();
    for (lineno, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let y = line.parse::<usize>().map_err(|e| Error::Parse {
            line: lineno + 1,
            reason: format!("invalid label: {e}"),
        })?;
        labels.push(y);
    }
    Ok(labels)
}

pub fn read_features_csv<R: Read>(reader: R) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|tok| {
                tok.trim().parse::<f64>().map_err(|e| Error::Parse {
                    line: lineno + 1,
                    reason: format!("invalid number: {e}"),
                })
            })
            .collect::<Result<_>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::Parse {
                    line: lineno + 1,
                    reason: format!("expected {} columns, got {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    let nrows = rows.len();
    let ncols = rows.first().map(|r| r.len()).unwrap_or(0);
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

pub fn write_edge_list<W: Write>(mut writer: W, g: &Graph) -> Result<()> {
    for (u, v) in g.edge_list() {
        writeln!(writer, "{u} {v}")?;
    }
    Ok(())
}

pub fn write_labels<W: Write>(mut writer: W, labels: &[usize]) -> Result<()> {
    for y in labels {
        writeln!(writer, "{y}")?;
    }
    Ok(())
}

pub fn write_features_csv<W: Write>(mut writer: W, x: &DMatrix<f64>) -> Result<()> {
    for i in 0..x.nrows() {
        let row: Vec<String> = (0..x.ncols()).map(|j| format!("{}", x[(i, j)])).collect();
        writeln!(writer, "{}", row.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_graph;

    #[test]
    fn edge_list_round_trip() {
        let g = build_graph(&[(0, 1), (1, 2)], &[0, 1, 0], None).unwrap();
        let mut buf = Vec::new();
        write_edge_list(&mut buf, &g).unwrap();
        let edges = read_edge_list(buf.as_slice()).unwrap();
        assert_eq!(edges, vec![(0, 1), (1, 2)]);
    }

    #[test]
    fn comments_and_blanks_ignored() {
        let text = "# header\n0 1\n\n2 3 # trailing\n";
        let edges = read_edge_list(text.as_bytes()).unwrap();
        assert_eq!(edges, vec![(0, 1), (2, 3)]);
    }

    #[test]
    fn malformed_edge_reports_line() {
        let text = "0 1\nnope\n";
        match read_edge_list(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn features_csv_round_trip() {
        let x = DMatrix::from_row_slice(2, 3, &[1.0, 2.5, -3.0, 0.0, 1e-9, 4.0]);
        let mut buf = Vec::new();
        write_features_csv(&mut buf, &x).unwrap();
        let back = read_features_csv(buf.as_slice()).unwrap();
        assert_eq!(back, x);
    }

    #[test]
    fn ragged_csv_rejected() {
        let text = "1,2\n3\n";
        assert!(matches!(
            read_features_csv(text.as_bytes()),
            Err(Error::Parse { line: 2, .. })
        ));
    }
}
