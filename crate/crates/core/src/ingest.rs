//! Real-data loaders (GloVe text, MNIST IDX3) and the preprocessing that
//! turns a raw dataset into latent instances: sample, rank-k approximate,
//! select gap-satisfying queries, rescale, shuffle.

use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use rand::seq::{index, SliceRandom};

use crate::error::{Error, Result};
use crate::linalg::{self, DataMatrix, Vector};
use crate::model::{LatentInstance, MAX_GENERATION_ATTEMPTS};
use crate::par;
use crate::rng::{rng_from_seed, sub_seed};

pub const MNIST_IMAGE_MAGIC: u32 = 0x0000_0803;

#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    pub name: String,
    /// `d x m`, one vector per column.
    pub vectors: DataMatrix,
    pub labels: Option<Vec<String>>,
}

impl RawDataset {
    pub fn dim(&self) -> usize {
        self.vectors.rows()
    }

    pub fn len(&self) -> usize {
        self.vectors.cols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn load_glove(path: impl AsRef<Path>) -> Result<RawDataset> {
    let path = path.as_ref();
    parse_glove(BufReader::new(File::open(path).map_err(Error::io_at(path))?), path)
}

/// Parses `token v₁ … v_d` lines. `d` is fixed by the first line; blank
/// lines are skipped. `source` is used in error messages.
pub fn parse_glove<R: BufRead>(reader: R, source: &Path) -> Result<RawDataset> {
    let err = |line: usize, reason: String| Error::FormatAt {
        path: source.to_path_buf(),
        line,
        reason,
    };
    let mut dim = None;
    let mut data = Vec::new();
    let mut tokens = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        let mut fields = line.split_whitespace();
        let Some(token) = fields.next() else { continue };
        let start = data.len();
        for f in fields {
            let v: f64 = f.parse().map_err(|_| err(lineno, format!("cannot parse `{f}` as a number")))?;
            if !v.is_finite() {
                return Err(err(lineno, format!("non-finite value `{f}`")));
            }
            data.push(v);
        }
        let got = data.len() - start;
        match dim {
            None if got == 0 => return Err(err(lineno, "no vector components".into())),
            None => dim = Some(got),
            Some(d) if d != got => {
                return Err(err(lineno, format!("expected {d} components, found {got}")));
            }
            Some(_) => {}
        }
        tokens.push(token.to_string());
    }
    let d = dim.ok_or_else(|| Error::Format(format!("{}: no vectors", source.display())))?;
    Ok(RawDataset {
        name: source.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
        vectors: DataMatrix::from_column_slice(d, tokens.len(), &data)?,
        labels: Some(tokens),
    })
}

pub fn load_mnist_idx(path: impl AsRef<Path>, limit: Option<usize>) -> Result<RawDataset> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    File::open(path).map_err(Error::io_at(path))?.read_to_end(&mut bytes)?;
    let mut ds = parse_mnist_idx(&bytes, limit)?;
    ds.name = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    Ok(ds)
}

/// Parses an IDX3 image file: big-endian magic `0x00000803`, count, rows,
/// cols, then `count·rows·cols` bytes. Pixels are scaled to `[0, 1]`.
pub fn parse_mnist_idx(bytes: &[u8], limit: Option<usize>) -> Result<RawDataset> {
    let header = |i: usize| -> Result<u32> {
        bytes
            .get(4 * i..4 * i + 4)
            .map(|b| u32::from_be_bytes(b.try_into().expect("4 bytes")))
            .ok_or_else(|| Error::Format("IDX header truncated".into()))
    };
    let magic = header(0)?;
    if magic != MNIST_IMAGE_MAGIC {
        return Err(Error::Format(format!(
            "IDX magic {magic:#010x} is not an image file ({MNIST_IMAGE_MAGIC:#010x})"
        )));
    }
    let count = header(1)? as usize;
    let (rows, cols) = (header(2)? as usize, header(3)? as usize);
    let d = rows * cols;
    if d == 0 {
        return Err(Error::Format("IDX images have zero size".into()));
    }
    let pixels = &bytes[16..];
    if pixels.len() < count * d {
        return Err(Error::Format(format!(
            "IDX file truncated: {count} images of {d} bytes need {} bytes, found {}",
            count * d,
            pixels.len()
        )));
    }
    let take = limit.map_or(count, |l| l.min(count));
    if take == 0 {
        return Err(Error::Format("IDX file holds no images".into()));
    }
    let data: Vec<f64> = pixels[..take * d].iter().map(|&p| p as f64 / 255.0).collect();
    Ok(RawDataset {
        name: "mnist".into(),
        vectors: DataMatrix::from_column_slice(d, take, &data)?,
        labels: None,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessParams {
    pub n: usize,
    pub k: usize,
    pub epsilon: f64,
    pub query_count: usize,
    /// Accepted second-to-first distance ratios are
    /// `[1+ε, (1+ε)(1+selection_slack)]`.
    pub selection_slack: f64,
}

impl PreprocessParams {
    pub fn new(n: usize, k: usize, epsilon: f64, query_count: usize) -> Self {
        Self {
            n,
            k,
            epsilon,
            query_count,
            selection_slack: 0.05,
        }
    }

    fn validate(&self, d: usize) -> Result<()> {
        if self.n < 4 || self.n % 2 != 0 {
            return Err(Error::param("n", format!("must be even and at least 4, got {}", self.n)));
        }
        let max_k = d.min(self.n / 2);
        if self.k == 0 || self.k > max_k {
            return Err(Error::param("k", format!("must be in 1..={max_k}, got {}", self.k)));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::param("eps", "must be positive"));
        }
        if self.query_count == 0 {
            return Err(Error::param("queries", "must be at least 1"));
        }
        if !(self.selection_slack >= 0.0) {
            return Err(Error::param("selection_slack", "must be nonnegative"));
        }
        Ok(())
    }
}

/// Preprocesses with queries drawn from the vectors not sampled as data.
pub fn preprocess(raw: &RawDataset, params: &PreprocessParams, seed: u64) -> Result<Vec<LatentInstance>> {
    preprocess_inner(raw, None, params, seed)
}

/// Preprocesses with queries drawn from a separate pool (e.g. a test split).
pub fn preprocess_with_queries(
    raw: &RawDataset,
    queries: &RawDataset,
    params: &PreprocessParams,
    seed: u64,
) -> Result<Vec<LatentInstance>> {
    if queries.dim() != raw.dim() {
        return Err(Error::param("queries", "query pool dimension differs from the data"));
    }
    preprocess_inner(raw, Some(queries), params, seed)
}

const CANDIDATE_BATCH: usize = 256;

fn preprocess_inner(
    raw: &RawDataset,
    external: Option<&RawDataset>,
    params: &PreprocessParams,
    seed: u64,
) -> Result<Vec<LatentInstance>> {
    params.validate(raw.dim())?;
    let m = raw.len();
    let n = params.n;
    if m < n + usize::from(external.is_none()) {
        return Err(Error::Ingestion(format!("dataset has {m} vectors, need more than {n}")));
    }

    let mut rng = rng_from_seed(sub_seed(seed, 0));
    let sampled = index::sample(&mut rng, m, n).into_vec();
    let data = raw.vectors.select_columns(&sampled);
    let approx = linalg::rank_k_approximation(&data, params.k)?;
    let basis = linalg::top_k_left_singular_subspace(&data, params.k)?;

    let (pool, mut candidates) = match external {
        Some(q) => (&q.vectors, (0..q.len()).collect::<Vec<_>>()),
        None => {
            let mut taken = vec![false; m];
            sampled.iter().for_each(|&i| taken[i] = true);
            (&raw.vectors, (0..m).filter(|&i| !taken[i]).collect())
        }
    };
    candidates.shuffle(&mut rng);

    let lo = 1.0 + params.epsilon;
    let hi = lo * (1.0 + params.selection_slack);
    let points = approx.as_matrix();
    let mut chosen: Vec<(Vector, f64)> = Vec::with_capacity(params.query_count);
    for batch in candidates.chunks(CANDIDATE_BATCH) {
        let results = par::map_range(batch.len(), |i| {
            let q = basis.project(&pool.column(batch[i])).expect("dimension checked");
            let (mut d1, mut d2) = (f64::INFINITY, f64::INFINITY);
            for p in points.column_iter() {
                let dist = (p - &q).norm();
                if dist < d1 {
                    d2 = d1;
                    d1 = dist;
                } else if dist < d2 {
                    d2 = dist;
                }
            }
            let ratio = d2 / d1;
            (d1 > 0.0 && ratio >= lo && ratio <= hi).then_some((q, d1))
        });
        chosen.extend(results.into_iter().flatten().take(params.query_count - chosen.len()));
        if chosen.len() == params.query_count {
            break;
        }
    }
    if chosen.len() < params.query_count {
        return Err(Error::Ingestion(format!(
            "found {} of {} queries with neighbor-distance ratio in [{lo}, {hi}]",
            chosen.len(),
            params.query_count
        )));
    }

    chosen
        .into_iter()
        .enumerate()
        .map(|(i, (q, d1))| {
            let mut cols: Vec<Vector> = points.column_iter().map(|c| c.into_owned()).collect();
            cols.push(q);
            let scaled = DataMatrix::from_columns(&cols)?.scaled(1.0 / d1)?;
            let dist = crate::model::query_distances(scaled.as_matrix());
            let nn = (0..n).min_by(|&a, &b| dist[a].total_cmp(&dist[b])).expect("n > 0");
            let inst = LatentInstance::new(scaled, params.k, params.epsilon, nn)?;
            shuffle_until_full_rank(&inst, sub_seed(seed, 1 + i as u64))
        })
        .collect()
}

fn shuffle_until_full_rank(inst: &LatentInstance, seed: u64) -> Result<LatentInstance> {
    let mut rng = rng_from_seed(seed);
    for _ in 0..MAX_GENERATION_ATTEMPTS {
        let mut perm: Vec<usize> = (0..inst.n()).collect();
        perm.shuffle(&mut rng);
        let shuffled = inst.permuted(&perm)?;
        if shuffled.halves_have_full_rank() {
            return Ok(shuffled);
        }
    }
    Err(Error::Ingestion(format!(
        "no shuffle with rank-{} halves after {MAX_GENERATION_ATTEMPTS} attempts",
        inst.k()
    )))
}
