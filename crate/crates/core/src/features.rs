//! Feature datasets: loading, validation, normalization into `[-1, 1]` and
//! seeded epoch planning.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{check_len, Error, Result};
use crate::scalar::Scalar;

/// Magic prefix of the packed binary feature format.
pub const PACKED_MAGIC: &[u8; 4] = b"HDH1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureFormat {
    Csv,
    Packed,
}

impl FromStr for FeatureFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(FeatureFormat::Csv),
            "packed" | "packed-binary" | "bin" => Ok(FeatureFormat::Packed),
            other => Err(Error::Config(format!("unknown feature format `{other}`"))),
        }
    }
}

impl FeatureFormat {
    /// Picks a format from the file extension; anything but `.csv`/`.txt` is packed.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") | Some("txt") => FeatureFormat::Csv,
            _ => FeatureFormat::Packed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormMode {
    /// Affine map of each column's `[min, max]` onto `[-1, 1]`.
    MinMaxSymmetric,
    /// `(x - mean) / (3 sd)`, clamped into `[-1, 1]`.
    ZScoreClamped,
}

impl NormMode {
    pub fn as_str(self) -> &'static str {
        match self {
            NormMode::MinMaxSymmetric => "minmax_symmetric",
            NormMode::ZScoreClamped => "zscore_clamped",
        }
    }
}

impl FromStr for NormMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "minmax_symmetric" => Ok(NormMode::MinMaxSymmetric),
            "zscore_clamped" => Ok(NormMode::ZScoreClamped),
            other => Err(Error::Config(format!("unknown normalization mode `{other}`"))),
        }
    }
}

/// Per-dimension affine transform recorded at training time so that queries
/// are normalized identically. A zero `scale` marks a constant dimension,
/// which always maps to 0.
#[derive(Debug, Clone, PartialEq)]
pub struct NormStats<T> {
    pub mode: NormMode,
    pub shift: Vec<T>,
    pub scale: Vec<T>,
}

impl<T: Scalar> NormStats<T> {
    /// Fits statistics on the columns of `values`.
    pub fn fit(values: &Array2<T>, mode: NormMode) -> Result<Self> {
        if values.nrows() == 0 {
            return Err(Error::Input("cannot normalize an empty matrix".into()));
        }
        let n = T::of(values.nrows() as f64);
        let mut shift = Vec::with_capacity(values.ncols());
        let mut scale = Vec::with_capacity(values.ncols());
        for col in values.axis_iter(Axis(1)) {
            let (s, c) = match mode {
                NormMode::MinMaxSymmetric => {
                    let lo = col.iter().copied().fold(T::infinity(), T::min);
                    let hi = col.iter().copied().fold(T::neg_infinity(), T::max);
                    let two = T::of(2.0);
                    (lo / two + hi / two, hi / two - lo / two)
                }
                NormMode::ZScoreClamped => {
                    let mean = col.iter().copied().sum::<T>() / n;
                    let var = col.iter().map(|&x| (x - mean) * (x - mean)).sum::<T>() / n;
                    (mean, T::of(3.0) * var.sqrt())
                }
            };
            shift.push(s);
            scale.push(c);
        }
        Ok(NormStats { mode, shift, scale })
    }

    pub fn dim(&self) -> usize {
        self.shift.len()
    }

    /// Normalizes a single raw row.
    pub fn apply(&self, row: ArrayView1<'_, T>) -> Result<Array1<T>> {
        check_len("normalized row", self.dim(), row.len())?;
        Ok(row
            .iter()
            .zip(self.shift.iter().zip(&self.scale))
            .map(|(&x, (&s, &c))| self.apply_one(x, s, c))
            .collect())
    }

    fn apply_one(&self, x: T, shift: T, scale: T) -> T {
        if scale <= T::zero() {
            return T::zero();
        }
        let y = (x - shift) / scale;
        // minmax lands in range analytically; clamp absorbs rounding and
        // out-of-range queries for both modes
        y.max(-T::one()).min(T::one())
    }

    pub fn apply_matrix(&self, values: &Array2<T>) -> Result<Array2<T>> {
        check_len("normalized matrix width", self.dim(), values.ncols())?;
        let mut out = values.clone();
        for mut row in out.axis_iter_mut(Axis(0)) {
            for (j, x) in row.iter_mut().enumerate() {
                *x = self.apply_one(*x, self.shift[j], self.scale[j]);
            }
        }
        Ok(out)
    }
}

/// `N x d` matrix of finite feature rows with optional class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix<T> {
    values: Array2<T>,
    labels: Option<Vec<i32>>,
    norm_stats: Option<NormStats<T>>,
}

impl<T: Scalar> FeatureMatrix<T> {
    pub fn new(values: Array2<T>, labels: Option<Vec<i32>>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::Format(format!(
                "feature matrix must be non-empty, got {}x{}",
                values.nrows(),
                values.ncols()
            )));
        }
        if let Some((idx, _)) = values.iter().enumerate().find(|(_, x)| !x.is_finite()) {
            let (r, c) = (idx / values.ncols(), idx % values.ncols());
            return Err(Error::Parse {
                row: r + 1,
                column: c + 1,
                message: "non-finite value".into(),
            });
        }
        if let Some(l) = &labels {
            check_len("label count", values.nrows(), l.len())?;
        }
        Ok(FeatureMatrix {
            values,
            labels,
            norm_stats: None,
        })
    }

    pub fn from_rows(rows: &[Vec<T>], labels: Option<Vec<i32>>) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        let mut flat = Vec::with_capacity(rows.len() * d);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != d {
                return Err(Error::Format(format!(
                    "ragged rows: row {} has {} values, expected {d}",
                    i + 1,
                    r.len()
                )));
            }
            flat.extend_from_slice(r);
        }
        let values = Array2::from_shape_vec((rows.len(), d), flat)
            .map_err(|e| Error::Format(e.to_string()))?;
        Self::new(values, labels)
    }

    pub fn rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &Array2<T> {
        &self.values
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, T> {
        self.values.row(i)
    }

    pub fn labels(&self) -> Option<&[i32]> {
        self.labels.as_deref()
    }

    pub fn norm_stats(&self) -> Option<&NormStats<T>> {
        self.norm_stats.as_ref()
    }

    pub fn is_normalized(&self) -> bool {
        self.norm_stats.is_some()
    }

    /// Gathers the given rows into a new `len x d` matrix.
    pub fn select_rows(&self, idx: &[usize]) -> Array2<T> {
        self.values.select(Axis(0), idx)
    }

    /// Splits off the rows `[at, N)` into a second matrix, keeping labels aligned.
    pub fn split_at(&self, at: usize) -> Result<(Self, Self)> {
        if at == 0 || at >= self.rows() {
            return Err(Error::Input(format!(
                "split point {at} outside 1..{}",
                self.rows()
            )));
        }
        let head = self.values.slice(ndarray::s![..at, ..]).to_owned();
        let tail = self.values.slice(ndarray::s![at.., ..]).to_owned();
        let (lh, lt) = match &self.labels {
            Some(l) => (Some(l[..at].to_vec()), Some(l[at..].to_vec())),
            None => (None, None),
        };
        let mut a = Self::new(head, lh)?;
        let mut b = Self::new(tail, lt)?;
        a.norm_stats = self.norm_stats.clone();
        b.norm_stats = self.norm_stats.clone();
        Ok((a, b))
    }

    /// Applies previously fitted statistics (e.g. from a trained model) to raw rows.
    pub fn normalized_with(&self, stats: &NormStats<T>) -> Result<Self> {
        Ok(FeatureMatrix {
            values: stats.apply_matrix(&self.values)?,
            labels: self.labels.clone(),
            norm_stats: Some(stats.clone()),
        })
    }
}

/// Scales every column into `[-1, 1]` and records the statistics.
///
/// A matrix that already carries statistics is returned unchanged, so
/// normalization is idempotent and the recorded statistics always describe
/// the transform from raw input.
pub fn normalize<T: Scalar>(m: &FeatureMatrix<T>, mode: NormMode) -> Result<FeatureMatrix<T>> {
    if m.is_normalized() {
        return Ok(m.clone());
    }
    let stats = NormStats::fit(&m.values, mode)?;
    m.normalized_with(&stats)
}

pub fn load_features<T: Scalar>(
    path: &Path,
    format: FeatureFormat,
    label_last: bool,
) -> Result<FeatureMatrix<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    match format {
        FeatureFormat::Csv => read_csv(reader, label_last),
        FeatureFormat::Packed => read_packed(reader),
    }
}

/// Parses comma-separated rows; with `label_last` the final column is an
/// integer class id. Row and column numbers in errors are 1-based.
pub fn read_csv<T: Scalar, R: Read>(reader: R, label_last: bool) -> Result<FeatureMatrix<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut flat: Vec<T> = Vec::new();
    let mut labels = Vec::new();
    let mut width: Option<usize> = None;
    let mut rows = 0usize;
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::Format(format!("row {row}: {e}")))?;
        if rec.len() == 1 && rec.get(0).is_some_and(str::is_empty) {
            continue;
        }
        match width {
            None => width = Some(rec.len()),
            Some(w) if w != rec.len() => {
                return Err(Error::Format(format!(
                    "ragged rows: row {row} has {} columns, expected {w}",
                    rec.len()
                )))
            }
            _ => {}
        }
        let n_feat = if label_last { rec.len() - 1 } else { rec.len() };
        for (j, cell) in rec.iter().enumerate() {
            let column = j + 1;
            if j < n_feat {
                let x: f64 = cell.parse().map_err(|_| Error::Parse {
                    row,
                    column,
                    message: format!("`{cell}` is not a number"),
                })?;
                flat.push(T::of(x));
            } else {
                let l: i32 = cell.parse().map_err(|_| Error::Parse {
                    row,
                    column,
                    message: format!("`{cell}` is not an integer label"),
                })?;
                labels.push(l);
            }
        }
        rows += 1;
    }
    let width = width.ok_or_else(|| Error::Format("no rows in input".into()))?;
    let d = if label_last { width - 1 } else { width };
    if d == 0 {
        return Err(Error::Format("rows have no feature columns".into()));
    }
    let values =
        Array2::from_shape_vec((rows, d), flat).map_err(|e| Error::Format(e.to_string()))?;
    FeatureMatrix::new(values, label_last.then_some(labels))
}

fn read_exact_or_truncated<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf)
        .map_err(|_| Error::Truncated(format!("feature file ended inside {what}")))
}

pub fn read_packed<T: Scalar, R: Read>(mut r: R) -> Result<FeatureMatrix<T>> {
    let mut magic = [0u8; 4];
    read_exact_or_truncated(&mut r, &mut magic, "magic")?;
    if &magic != PACKED_MAGIC {
        return Err(Error::Format("bad magic, expected HDH1".into()));
    }
    let mut word = [0u8; 4];
    read_exact_or_truncated(&mut r, &mut word, "header")?;
    let n = u32::from_le_bytes(word) as usize;
    read_exact_or_truncated(&mut r, &mut word, "header")?;
    let d = u32::from_le_bytes(word) as usize;
    let mut flag = [0u8; 1];
    read_exact_or_truncated(&mut r, &mut flag, "header")?;
    let has_labels = match flag[0] {
        0 => false,
        1 => true,
        x => return Err(Error::Format(format!("has_labels byte must be 0 or 1, got {x}"))),
    };
    if n == 0 || d == 0 {
        return Err(Error::Format(format!("empty packed matrix {n}x{d}")));
    }

    let mut body = vec![0u8; n * d * 4];
    read_exact_or_truncated(&mut r, &mut body, "values")?;
    let flat: Vec<T> = body
        .chunks_exact(4)
        .map(|c| T::of(f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64))
        .collect();

    let labels = if has_labels {
        let mut lb = vec![0u8; n * 4];
        read_exact_or_truncated(&mut r, &mut lb, "labels")?;
        Some(
            lb.chunks_exact(4)
                .map(|c| i32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect(),
        )
    } else {
        None
    };
    let values = Array2::from_shape_vec((n, d), flat).map_err(|e| Error::Format(e.to_string()))?;
    FeatureMatrix::new(values, labels)
}

/// Writes the raw values (not normalized) in the packed binary format.
pub fn write_packed<T: Scalar, W: Write>(m: &FeatureMatrix<T>, mut w: W) -> Result<()> {
    let io = |e| Error::io("<packed features>", e);
    w.write_all(PACKED_MAGIC).map_err(io)?;
    w.write_all(&(m.rows() as u32).to_le_bytes()).map_err(io)?;
    w.write_all(&(m.dim() as u32).to_le_bytes()).map_err(io)?;
    w.write_all(&[u8::from(m.labels.is_some())]).map_err(io)?;
    for &x in m.values.iter() {
        w.write_all(&(x.as_f64() as f32).to_le_bytes()).map_err(io)?;
    }
    if let Some(labels) = &m.labels {
        for l in labels {
            w.write_all(&l.to_le_bytes()).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

pub fn save_features<T: Scalar>(m: &FeatureMatrix<T>, path: &Path, format: FeatureFormat) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    match format {
        FeatureFormat::Packed => write_packed(m, w),
        FeatureFormat::Csv => {
            for (i, row) in m.values.axis_iter(Axis(0)).enumerate() {
                let mut line: Vec<String> = row.iter().map(|x| format!("{}", x.as_f64())).collect();
                if let Some(l) = &m.labels {
                    line.push(l[i].to_string());
                }
                writeln!(w, "{}", line.join(",")).map_err(|e| Error::io(path, e))?;
            }
            w.flush().map_err(|e| Error::io(path, e))
        }
    }
}

/// Seeded assignment of rows to `epoch_count` disjoint batches of `batch_size`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EpochPlan {
    pub epoch_count: usize,
    pub batch_size: usize,
    pub order: Vec<usize>,
    pub seed: u64,
}

impl EpochPlan {
    pub fn batches(&self) -> impl Iterator<Item = &[usize]> {
        self.order.chunks_exact(self.batch_size)
    }
}

/// Rows beyond `epochs * batch_size` are left out of this plan.
pub fn plan_epochs(rows: usize, epochs: usize, batch_size: usize, seed: u64) -> Result<EpochPlan> {
    if epochs == 0 || batch_size == 0 {
        return Err(Error::Config(format!(
            "epochs ({epochs}) and batch_size ({batch_size}) must be positive"
        )));
    }
    let needed = epochs
        .checked_mul(batch_size)
        .ok_or_else(|| Error::Capacity("epochs * batch_size overflows".into()))?;
    if needed > rows {
        return Err(Error::Capacity(format!(
            "{epochs} epochs x {batch_size} rows = {needed} exceeds {rows} available rows"
        )));
    }
    let mut order: Vec<usize> = (0..rows).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    order.truncate(needed);
    Ok(EpochPlan {
        epoch_count: epochs,
        batch_size,
        order,
        seed,
    })
}
