//! Matrix Market text I/O for the supported subset of the NIST format:
//! `matrix` objects, `coordinate` or `array` format, `real` field,
//! `general` or `symmetric` symmetry.

use nalgebra::{DMatrix, DVector};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::SymMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MmFormat {
    Coordinate,
    Array,
}

/// A parsed Matrix Market file with symmetric storage already expanded and
/// indices converted to 0-based.
#[derive(Debug, Clone)]
pub struct MmMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub format: MmFormat,
    /// Header said `symmetric`; entries below are the expanded full pattern.
    pub symmetric: bool,
    pub entries: Vec<(usize, usize, f64)>,
}

impl MmMatrix {
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for &(i, j, v) in &self.entries {
            m[(i, j)] += v;
        }
        m
    }

    /// Interpret an `n x 1` (or `1 x n`) matrix as a vector.
    pub fn to_vector(&self) -> Result<DVector<f64>> {
        if self.ncols != 1 && self.nrows != 1 {
            return Err(Error::Validation(format!(
                "expected a vector-shaped matrix, got {}x{}",
                self.nrows, self.ncols
            )));
        }
        let n = self.nrows.max(self.ncols);
        let mut v = DVector::zeros(n);
        for &(i, j, x) in &self.entries {
            v[i.max(j)] += x;
        }
        Ok(v)
    }

    /// Square-matrix storage honoring the sparse threshold.
    pub fn to_sym_matrix(&self, sparse_threshold: usize) -> Result<SymMatrix> {
        if self.nrows != self.ncols {
            return Err(Error::Validation(format!(
                "expected a square matrix, got {}x{}",
                self.nrows, self.ncols
            )));
        }
        SymMatrix::from_triplets_auto(self.nrows, &self.entries, sparse_threshold)
    }
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

/// Read a Matrix Market file. Symmetric files must store the lower triangle
/// only, as the NIST specification requires; the mirrored entries are added
/// to the result.
pub fn read_matrix_market(path: impl AsRef<Path>) -> Result<MmMatrix> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate().map(|(k, l)| (k + 1, l));

    let (lno, header) = lines
        .next()
        .ok_or_else(|| parse_err(path, 1, "empty file"))?;
    let fields: Vec<String> = header.split_whitespace().map(|t| t.to_string()).collect();
    if fields.len() < 4 || fields[0] != "%%MatrixMarket" {
        return Err(parse_err(
            path,
            lno,
            "header must start with '%%MatrixMarket matrix <format> <field> <symmetry>'",
        ));
    }
    let lower: Vec<String> = fields.iter().map(|f| f.to_ascii_lowercase()).collect();
    if lower[1] != "matrix" {
        return Err(parse_err(path, lno, format!("unsupported object '{}'", fields[1])));
    }
    let format = match lower[2].as_str() {
        "coordinate" => MmFormat::Coordinate,
        "array" => MmFormat::Array,
        other => return Err(parse_err(path, lno, format!("unsupported format '{other}'"))),
    };
    if lower.len() < 5 && format == MmFormat::Coordinate {
        // header is exactly 5 tokens for matrices
    }
    let field = lower.get(3).map(String::as_str).unwrap_or("");
    if field != "real" {
        return Err(parse_err(path, lno, format!("unsupported field '{field}' (only 'real')")));
    }
    let symmetric = match lower.get(4).map(String::as_str) {
        Some("general") => false,
        Some("symmetric") => true,
        Some(other) => {
            return Err(parse_err(path, lno, format!("unsupported symmetry '{other}'")))
        }
        None => return Err(parse_err(path, lno, "missing symmetry qualifier")),
    };

    // Skip comments / blank lines up to the size line.
    let mut size_line = None;
    for (k, l) in lines.by_ref() {
        let t = l.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        size_line = Some((k, t.to_string()));
        break;
    }
    let (size_lno, size_text) =
        size_line.ok_or_else(|| parse_err(path, 1, "missing size line"))?;
    let dims: Vec<&str> = size_text.split_whitespace().collect();

    let parse_usize = |tok: &str, what: &str, k: usize| -> Result<usize> {
        tok.parse::<usize>()
            .map_err(|_| parse_err(path, k, format!("cannot parse {what} '{tok}'")))
    };

    match format {
        MmFormat::Coordinate => {
            if dims.len() != 3 {
                return Err(parse_err(path, size_lno, "size line must be 'rows cols nnz'"));
            }
            let nrows = parse_usize(dims[0], "row count", size_lno)?;
            let ncols = parse_usize(dims[1], "column count", size_lno)?;
            let nnz = parse_usize(dims[2], "nonzero count", size_lno)?;
            if nrows == 0 || ncols == 0 {
                return Err(parse_err(path, size_lno, "zero matrix dimension"));
            }
            let mut entries = Vec::with_capacity(if symmetric { 2 * nnz } else { nnz });
            let mut seen = 0usize;
            for (k, l) in lines {
                let t = l.trim();
                if t.is_empty() || t.starts_with('%') {
                    continue;
                }
                if seen == nnz {
                    return Err(parse_err(path, k, "more entries than declared"));
                }
                let toks: Vec<&str> = t.split_whitespace().collect();
                if toks.len() != 3 {
                    return Err(parse_err(path, k, "entry line must be 'i j value'"));
                }
                let i = parse_usize(toks[0], "row index", k)?;
                let j = parse_usize(toks[1], "column index", k)?;
                let v: f64 = toks[2]
                    .parse()
                    .map_err(|_| parse_err(path, k, format!("cannot parse value '{}'", toks[2])))?;
                if i < 1 || i > nrows || j < 1 || j > ncols {
                    return Err(parse_err(
                        path,
                        k,
                        format!("index ({i}, {j}) out of bounds for {nrows}x{ncols}"),
                    ));
                }
                let (i, j) = (i - 1, j - 1);
                if symmetric {
                    if j > i {
                        return Err(parse_err(
                            path,
                            k,
                            "symmetric files must store only the lower triangle",
                        ));
                    }
                    entries.push((i, j, v));
                    if i != j {
                        entries.push((j, i, v));
                    }
                } else {
                    entries.push((i, j, v));
                }
                seen += 1;
            }
            if seen != nnz {
                return Err(parse_err(
                    path,
                    size_lno,
                    format!("declared {nnz} entries but found {seen}"),
                ));
            }
            Ok(MmMatrix {
                nrows,
                ncols,
                format,
                symmetric,
                entries,
            })
        }
        MmFormat::Array => {
            if dims.len() != 2 {
                return Err(parse_err(path, size_lno, "size line must be 'rows cols'"));
            }
            let nrows = parse_usize(dims[0], "row count", size_lno)?;
            let ncols = parse_usize(dims[1], "column count", size_lno)?;
            if nrows == 0 || ncols == 0 {
                return Err(parse_err(path, size_lno, "zero matrix dimension"));
            }
            if symmetric && nrows != ncols {
                return Err(parse_err(path, size_lno, "symmetric array matrix must be square"));
            }
            // Column-major dense values; symmetric stores the lower triangle
            // of each column only.
            let expected = if symmetric {
                nrows * (nrows + 1) / 2
            } else {
                nrows * ncols
            };
            let mut values = Vec::with_capacity(expected);
            for (k, l) in lines {
                let t = l.trim();
                if t.is_empty() || t.starts_with('%') {
                    continue;
                }
                for tok in t.split_whitespace() {
                    if values.len() == expected {
                        return Err(parse_err(path, k, "more values than declared"));
                    }
                    let v: f64 = tok
                        .parse()
                        .map_err(|_| parse_err(path, k, format!("cannot parse value '{tok}'")))?;
                    values.push(v);
                }
            }
            if values.len() != expected {
                return Err(parse_err(
                    path,
                    size_lno,
                    format!("declared {expected} values but found {}", values.len()),
                ));
            }
            let mut entries = Vec::with_capacity(nrows * ncols);
            let mut it = values.into_iter();
            if symmetric {
                for j in 0..ncols {
                    for i in j..nrows {
                        let v = it.next().unwrap();
                        entries.push((i, j, v));
                        if i != j {
                            entries.push((j, i, v));
                        }
                    }
                }
            } else {
                for j in 0..ncols {
                    for i in 0..nrows {
                        entries.push((i, j, it.next().unwrap()));
                    }
                }
            }
            Ok(MmMatrix {
                nrows,
                ncols,
                format,
                symmetric,
                entries,
            })
        }
    }
}

/// 17 significant digits: enough to reproduce any f64 exactly.
fn fmt_value(v: f64) -> String {
    format!("{v:.16e}")
}

/// Write a square matrix in coordinate format. With `symmetric` set, only the
/// lower triangle is stored and the header says so.
pub fn write_matrix_market(path: impl AsRef<Path>, m: &SymMatrix, symmetric: bool) -> Result<()> {
    let d = m.dim();
    let mut entries: Vec<(usize, usize, f64)> = m
        .iter_nonzero()
        .into_iter()
        .filter(|&(i, j, _)| !symmetric || j <= i)
        .collect();
    entries.sort_unstable_by_key(|&(i, j, _)| (i, j));

    let mut out = String::new();
    let sym = if symmetric { "symmetric" } else { "general" };
    writeln!(out, "%%MatrixMarket matrix coordinate real {sym}").unwrap();
    writeln!(out, "{d} {d} {}", entries.len()).unwrap();
    for (i, j, v) in entries {
        writeln!(out, "{} {} {}", i + 1, j + 1, fmt_value(v)).unwrap();
    }
    fs::write(path, out)?;
    Ok(())
}

/// Write a vector as an `n x 1` array-format matrix.
pub fn write_matrix_market_vector(path: impl AsRef<Path>, v: &DVector<f64>) -> Result<()> {
    let mut out = String::new();
    writeln!(out, "%%MatrixMarket matrix array real general").unwrap();
    writeln!(out, "{} 1", v.len()).unwrap();
    for x in v.iter() {
        writeln!(out, "{}", fmt_value(*x)).unwrap();
    }
    fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        use std::io::Write;
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn reads_coordinate_symmetric_identity() {
        let f = write_tmp(
            "%%MatrixMarket matrix coordinate real symmetric\n% identity\n2 2 2\n1 1 1.0\n2 2 1.0\n",
        );
        let mm = read_matrix_market(f.path()).unwrap();
        assert!(mm.symmetric);
        assert_relative_eq!(mm.to_dense(), DMatrix::<f64>::identity(2, 2), epsilon = 0.0);
    }

    #[test]
    fn expands_symmetric_off_diagonals() {
        let f = write_tmp("%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n1 1 2.0\n2 1 -1.0\n");
        let mm = read_matrix_market(f.path()).unwrap();
        let d = mm.to_dense();
        assert_eq!(d[(0, 1)], -1.0);
        assert_eq!(d[(1, 0)], -1.0);
        assert_eq!(d[(0, 0)], 2.0);
    }

    #[test]
    fn rejects_complex_field_with_line_number() {
        let f = write_tmp("%%MatrixMarket matrix coordinate complex general\n1 1 1\n1 1 1.0 0.0\n");
        let err = read_matrix_market(f.path()).unwrap_err();
        match err {
            Error::Parse { line, ref message, .. } => {
                assert_eq!(line, 1);
                assert!(message.contains("complex"), "{message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_out_of_bounds_index_with_line_number() {
        let f = write_tmp("%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n");
        match read_matrix_market(f.path()).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_malformed_header() {
        let f = write_tmp("%%NotMatrixMarket\n1 1 1\n1 1 1.0\n");
        assert!(matches!(
            read_matrix_market(f.path()),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn round_trip_random_spd_is_lossless() {
        let mut rng = StdRng::seed_from_u64(99);
        let b = DMatrix::from_fn(5, 5, |_, _| rng.gen_range(-1.0..1.0));
        let spd = &b * b.transpose() + DMatrix::identity(5, 5) * 5.0;
        let dir = tempfile::tempdir().unwrap();

        // General round trip is bit exact at 17 significant digits.
        let p_gen = dir.path().join("m_general.mtx");
        write_matrix_market(&p_gen, &SymMatrix::Dense(spd.clone()), false).unwrap();
        let back = read_matrix_market(&p_gen).unwrap().to_dense();
        assert_eq!(back, spd);

        // Symmetric storage round trip.
        let p_sym = dir.path().join("m_symmetric.mtx");
        write_matrix_market(&p_sym, &SymMatrix::Dense(spd.clone()), true).unwrap();
        let back = read_matrix_market(&p_sym).unwrap().to_dense();
        assert_eq!(back, spd);
    }

    #[test]
    fn array_format_and_vectors() {
        let f = write_tmp("%%MatrixMarket matrix array real general\n2 2\n1.0\n3.0\n2.0\n4.0\n");
        let mm = read_matrix_market(f.path()).unwrap();
        // Column-major: first column (1, 3), second (2, 4).
        let want = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(mm.to_dense(), want);

        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("v.mtx");
        let v = DVector::from_vec(vec![1.5, -2.25, 1.0 / 3.0]);
        write_matrix_market_vector(&p, &v).unwrap();
        let back = read_matrix_market(&p).unwrap().to_vector().unwrap();
        assert_eq!(back, v);
    }

    #[test]
    fn zero_matrix_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("zero.mtx");
        write_matrix_market(&p, &SymMatrix::zeros(3), true).unwrap();
        let mm = read_matrix_market(&p).unwrap();
        assert_eq!(mm.entries.len(), 0);
        assert_eq!(mm.to_dense(), DMatrix::<f64>::zeros(3, 3));
    }
}
