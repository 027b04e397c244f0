//! Exact Hamming-space retrieval and precision-recall evaluation.
//!
//! Every search is a linear popcount scan; results are sorted by
//! `(distance, id)` so ties resolve deterministically.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use crate::code::{hamming_words, word_count, HashCode};
use crate::error::{check_len, Error, Result};
use crate::features::FeatureMatrix;
use crate::scalar::Scalar;

pub const CODES_MAGIC: &[u8; 4] = b"HDHC";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Neighbor {
    pub distance: u32,
    pub id: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HammingIndex {
    codes: Vec<HashCode>,
    ids: Vec<u64>,
    labels: Option<Vec<i32>>,
    bits: usize,
}

impl HammingIndex {
    pub fn new(codes: Vec<HashCode>, ids: Vec<u64>, labels: Option<Vec<i32>>) -> Result<Self> {
        check_len("index ids", codes.len(), ids.len())?;
        if let Some(l) = &labels {
            check_len("index labels", codes.len(), l.len())?;
        }
        let bits = codes.first().map_or(0, HashCode::len);
        if let Some(c) = codes.iter().find(|c| c.len() != bits) {
            return Err(Error::shape("index code length", bits, c.len()));
        }
        Ok(HammingIndex {
            codes,
            ids,
            labels,
            bits,
        })
    }

    /// Index whose ids are the positions `0..n`.
    pub fn from_codes(codes: Vec<HashCode>) -> Result<Self> {
        let ids = (0..codes.len() as u64).collect();
        Self::new(codes, ids, None)
    }

    pub fn with_labels(mut self, labels: Vec<i32>) -> Result<Self> {
        check_len("index labels", self.codes.len(), labels.len())?;
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    pub fn codes(&self) -> &[HashCode] {
        &self.codes
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn labels(&self) -> Option<&[i32]> {
        self.labels.as_deref()
    }

    fn check_query(&self, query: &HashCode) -> Result<()> {
        if self.is_empty() {
            return Ok(());
        }
        check_len("query code length", self.bits, query.len())
    }

    /// Distance from `query` to every indexed code, in index order.
    pub fn distances(&self, query: &HashCode) -> Result<Vec<u32>> {
        self.check_query(query)?;
        Ok(self.codes.iter().map(|c| hamming_words(c.words(), query.words())).collect())
    }

    fn scan(&self, query: &HashCode) -> Result<Vec<Neighbor>> {
        Ok(self
            .distances(query)?
            .into_iter()
            .zip(&self.ids)
            .map(|(distance, &id)| Neighbor { distance, id })
            .collect())
    }

    /// The `k_results` nearest codes, sorted by `(distance, id)`.
    pub fn topk(&self, query: &HashCode, k_results: usize) -> Result<Vec<Neighbor>> {
        if k_results == 0 {
            return Err(Error::Input("k_results must be at least 1".into()));
        }
        let mut all = self.scan(query)?;
        if k_results < all.len() {
            all.select_nth_unstable(k_results - 1);
            all.truncate(k_results);
        }
        all.sort_unstable();
        Ok(all)
    }

    /// Every code within `radius`, sorted by `(distance, id)`.
    pub fn radius_search(&self, query: &HashCode, radius: u32) -> Result<Vec<Neighbor>> {
        if !self.is_empty() && radius as usize > self.bits {
            return Err(Error::Input(format!("radius {radius} exceeds code length {}", self.bits)));
        }
        let mut hits: Vec<Neighbor> = self.scan(query)?.into_iter().filter(|n| n.distance <= radius).collect();
        hits.sort_unstable();
        Ok(hits)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroundTruthMode {
    /// Relevant items share the query's class label.
    Label,
    /// Relevant items are the `n_gt` nearest rows in feature space.
    EuclideanTopN,
}

impl FromStr for GroundTruthMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "label" => Ok(GroundTruthMode::Label),
            "euclidean" | "euclidean-topN" | "euclidean-topn" => Ok(GroundTruthMode::EuclideanTopN),
            other => Err(Error::Config(format!("unknown ground-truth mode `{other}`"))),
        }
    }
}

impl GroundTruthMode {
    pub fn as_str(self) -> &'static str {
        match self {
            GroundTruthMode::Label => "label",
            GroundTruthMode::EuclideanTopN => "euclidean",
        }
    }
}

/// Relevant database ids for one query. `exclude` removes the query's own
/// entry from retrieval when the query is itself indexed.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Relevance {
    pub relevant: BTreeSet<u64>,
    pub exclude: Option<u64>,
}

fn sq_dist<T: Scalar>(a: ndarray::ArrayView1<'_, T>, b: ndarray::ArrayView1<'_, T>) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| (x - y).as_f64().powi(2)).sum()
}

fn relevance_for<T: Scalar>(
    db: &FeatureMatrix<T>,
    query: ndarray::ArrayView1<'_, T>,
    query_label: Option<i32>,
    exclude: Option<usize>,
    mode: GroundTruthMode,
    n_gt: usize,
) -> Relevance {
    let candidates = (0..db.rows()).filter(|&i| Some(i) != exclude);
    let relevant = match mode {
        GroundTruthMode::Label => {
            let labels = db.labels().expect("checked by caller");
            let q = query_label.expect("checked by caller");
            candidates.filter(|&i| labels[i] == q).map(|i| i as u64).collect()
        }
        GroundTruthMode::EuclideanTopN => {
            let mut d: Vec<(f64, usize)> = candidates.map(|i| (sq_dist(query, db.row(i)), i)).collect();
            d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            d.into_iter().take(n_gt).map(|(_, i)| i as u64).collect()
        }
    };
    Relevance {
        relevant,
        exclude: exclude.map(|i| i as u64),
    }
}

fn check_gt_inputs<T: Scalar>(db: &FeatureMatrix<T>, mode: GroundTruthMode, n_gt: usize) -> Result<()> {
    match mode {
        GroundTruthMode::Label if db.labels().is_none() => {
            Err(Error::Config("label ground truth requires labelled features".into()))
        }
        GroundTruthMode::EuclideanTopN if n_gt == 0 => Err(Error::Config("gt-n must be at least 1".into())),
        _ => Ok(()),
    }
}

/// Relevance sets for rows of `data` queried against the rest of `data`
/// (database ids are row indices; each query excludes itself).
pub fn ground_truth<T: Scalar>(
    data: &FeatureMatrix<T>,
    query_rows: &[usize],
    mode: GroundTruthMode,
    n_gt: usize,
) -> Result<Vec<Relevance>> {
    check_gt_inputs(data, mode, n_gt)?;
    query_rows
        .iter()
        .map(|&q| {
            if q >= data.rows() {
                return Err(Error::Input(format!("query row {q} out of range")));
            }
            let label = data.labels().map(|l| l[q]);
            Ok(relevance_for(data, data.row(q), label, Some(q), mode, n_gt))
        })
        .collect()
}

/// Relevance sets for a separate query matrix against the database `db`.
pub fn ground_truth_between<T: Scalar>(
    db: &FeatureMatrix<T>,
    queries: &FeatureMatrix<T>,
    mode: GroundTruthMode,
    n_gt: usize,
) -> Result<Vec<Relevance>> {
    check_gt_inputs(db, mode, n_gt)?;
    check_len("query feature dimension", db.dim(), queries.dim())?;
    if mode == GroundTruthMode::Label && queries.labels().is_none() {
        return Err(Error::Config("label ground truth requires labelled queries".into()));
    }
    Ok((0..queries.rows())
        .map(|q| relevance_for(db, queries.row(q), queries.labels().map(|l| l[q]), None, mode, n_gt))
        .collect())
}

/// Mean statistics at one Hamming radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadiusPoint {
    pub radius: u32,
    pub recall: f64,
    pub precision: f64,
    pub mean_retrieved: f64,
}

/// `(recall, precision)` pairs with strictly increasing recall.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PrCurve {
    pub points: Vec<(f64, f64)>,
}

impl PrCurve {
    /// Keeps the first (smallest-radius) point for each recall value.
    pub fn from_sweep(sweep: &[RadiusPoint]) -> Self {
        let mut points: Vec<(f64, f64)> = Vec::new();
        for p in sweep {
            match points.last() {
                Some(&(r, _)) if p.recall <= r => {}
                _ => points.push((p.recall, p.precision)),
            }
        }
        PrCurve { points }
    }

    /// Trapezoidal area, with the first point's precision held from recall 0.
    pub fn auc(&self) -> f64 {
        let Some(&(r0, p0)) = self.points.first() else {
            return 0.0;
        };
        let head = r0 * p0;
        head + self
            .points
            .windows(2)
            .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
            .sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrReport {
    /// One entry per radius `0..=k`.
    pub sweep: Vec<RadiusPoint>,
    pub curve: PrCurve,
}

impl PrReport {
    pub fn auc(&self) -> f64 {
        self.curve.auc()
    }

    /// CSV with header `radius,recall,precision,mean_retrieved`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "radius,recall,precision,mean_retrieved")?;
        for p in &self.sweep {
            writeln!(w, "{},{},{},{}", p.radius, p.recall, p.precision, p.mean_retrieved)?;
        }
        w.flush()
    }
}

/// Per-radius `(precision, recall, retrieved)` for one query from distance histograms.
fn query_sweep(index: &HammingIndex, query: &HashCode, truth: &Relevance) -> Result<Vec<(f64, f64, f64)>> {
    let k = index.bits();
    let mut all = vec![0usize; k + 1];
    let mut hit = vec![0usize; k + 1];
    for (d, id) in index.distances(query)?.into_iter().zip(index.ids()) {
        if Some(*id) == truth.exclude {
            continue;
        }
        all[d as usize] += 1;
        if truth.relevant.contains(id) {
            hit[d as usize] += 1;
        }
    }
    let n_rel = truth.relevant.len() as f64;
    let (mut cum_all, mut cum_hit) = (0usize, 0usize);
    Ok((0..=k)
        .map(|r| {
            cum_all += all[r];
            cum_hit += hit[r];
            // nothing retrieved counts as vacuously precise
            let precision = if cum_all == 0 { 1.0 } else { cum_hit as f64 / cum_all as f64 };
            (precision, cum_hit as f64 / n_rel, cum_all as f64)
        })
        .collect())
}

fn check_pr_inputs(index: &HammingIndex, queries: &[HashCode], truth: &[Relevance]) -> Result<()> {
    check_len("relevance sets", queries.len(), truth.len())?;
    if queries.is_empty() {
        return Err(Error::Input("no queries".into()));
    }
    if index.is_empty() {
        return Err(Error::Input("empty index".into()));
    }
    if let Some(q) = truth.iter().position(|t| t.relevant.is_empty()) {
        return Err(Error::Input(format!("query {q} has an empty relevance set")));
    }
    Ok(())
}

fn reduce_sweeps(bits: usize, per_query: &[Vec<(f64, f64, f64)>]) -> PrReport {
    let nq = per_query.len() as f64;
    let sweep: Vec<RadiusPoint> = (0..=bits)
        .map(|r| {
            let (mut p, mut rc, mut n) = (0.0, 0.0, 0.0);
            for q in per_query {
                p += q[r].0;
                rc += q[r].1;
                n += q[r].2;
            }
            RadiusPoint {
                radius: r as u32,
                recall: rc / nq,
                precision: p / nq,
                mean_retrieved: n / nq,
            }
        })
        .collect();
    let curve = PrCurve::from_sweep(&sweep);
    PrReport { sweep, curve }
}

/// Mean precision and recall over queries at every radius `0..=k`.
pub fn precision_recall(index: &HammingIndex, queries: &[HashCode], truth: &[Relevance]) -> Result<PrReport> {
    precision_recall_threaded(index, queries, truth, 1)
}

/// [`precision_recall`] with queries split across up to `threads` workers.
/// The reduction runs in query order, so the result does not depend on `threads`.
pub fn precision_recall_threaded(
    index: &HammingIndex,
    queries: &[HashCode],
    truth: &[Relevance],
    threads: usize,
) -> Result<PrReport> {
    check_pr_inputs(index, queries, truth)?;
    let threads = threads.clamp(1, queries.len());
    let per_query: Vec<Vec<(f64, f64, f64)>> = if threads == 1 {
        queries
            .iter()
            .zip(truth)
            .map(|(q, t)| query_sweep(index, q, t))
            .collect::<Result<_>>()?
    } else {
        let chunk = queries.len().div_ceil(threads);
        std::thread::scope(|s| {
            let handles: Vec<_> = queries
                .chunks(chunk)
                .zip(truth.chunks(chunk))
                .map(|(qs, ts)| {
                    s.spawn(move || {
                        qs.iter()
                            .zip(ts)
                            .map(|(q, t)| query_sweep(index, q, t))
                            .collect::<Result<Vec<_>>>()
                    })
                })
                .collect();
            let mut out = Vec::with_capacity(queries.len());
            for h in handles {
                out.extend(h.join().expect("evaluation worker panicked")?);
            }
            Ok::<_, Error>(out)
        })?
    };
    Ok(reduce_sweeps(index.bits(), &per_query))
}

/// Mean fraction of relevant items among the `k` nearest neighbours.
pub fn precision_at_k(index: &HammingIndex, queries: &[HashCode], truth: &[Relevance], k: usize) -> Result<f64> {
    check_pr_inputs(index, queries, truth)?;
    let mut total = 0.0;
    for (q, t) in queries.iter().zip(truth) {
        let hits: Vec<Neighbor> = index
            .topk(q, k + usize::from(t.exclude.is_some()))?
            .into_iter()
            .filter(|n| Some(n.id) != t.exclude)
            .take(k)
            .collect();
        let rel = hits.iter().filter(|n| t.relevant.contains(&n.id)).count();
        total += rel as f64 / hits.len().max(1) as f64;
    }
    Ok(total / queries.len() as f64)
}

pub fn write_codes<W: Write>(codes: &[HashCode], mut w: W) -> Result<()> {
    let bits = codes.first().map_or(0, HashCode::len);
    if let Some(c) = codes.iter().find(|c| c.len() != bits) {
        return Err(Error::shape("code length", bits, c.len()));
    }
    let io = |e| Error::io("<codes>", e);
    w.write_all(CODES_MAGIC).map_err(io)?;
    w.write_all(&(codes.len() as u32).to_le_bytes()).map_err(io)?;
    w.write_all(&(bits as u32).to_le_bytes()).map_err(io)?;
    for c in codes {
        for word in c.words() {
            w.write_all(&word.to_le_bytes()).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

pub fn read_codes<R: Read>(mut r: R) -> Result<Vec<HashCode>> {
    let mut header = [0u8; 12];
    r.read_exact(&mut header)
        .map_err(|_| Error::Truncated("codes header".into()))?;
    if &header[..4] != CODES_MAGIC {
        return Err(Error::Format("bad magic, expected HDHC".into()));
    }
    let count = u32::from_le_bytes(header[4..8].try_into().expect("4 bytes")) as usize;
    let bits = u32::from_le_bytes(header[8..12].try_into().expect("4 bytes")) as usize;
    let words = word_count(bits);
    let mut buf = [0u8; 8];
    let mut codes = Vec::with_capacity(count);
    for i in 0..count {
        let mut ws = Vec::with_capacity(words);
        for _ in 0..words {
            r.read_exact(&mut buf)
                .map_err(|_| Error::Truncated(format!("codes file ends inside code {i} of {count}")))?;
            ws.push(u64::from_le_bytes(buf));
        }
        codes.push(HashCode::from_words(ws, bits)?);
    }
    Ok(codes)
}

pub fn save_codes(codes: &[HashCode], path: &Path) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    write_codes(codes, BufWriter::new(f))
}

pub fn load_codes(path: &Path) -> Result<Vec<HashCode>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_codes(BufReader::new(f))
}

/// One decimal id per line.
pub fn load_ids(path: &Path) -> Result<Vec<u64>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    BufReader::new(f)
        .lines()
        .enumerate()
        .filter(|(_, l)| l.as_ref().map_or(true, |s| !s.trim().is_empty()))
        .map(|(i, l)| {
            let l = l.map_err(|e| Error::io(path, e))?;
            l.trim().parse().map_err(|_| Error::Parse {
                row: i + 1,
                column: 1,
                message: format!("`{l}` is not an id"),
            })
        })
        .collect()
}

pub fn save_ids(ids: &[u64], path: &Path) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    for id in ids {
        writeln!(w, "{id}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
