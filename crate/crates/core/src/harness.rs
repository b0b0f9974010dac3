//! Experiment driver: success probabilities under noise, σ sweeps, the 90%
//! noise threshold, the `s_k` dependence study, and CSV/SVG emission.
//!
//! Trial `t` of every grid point perturbs with `sub_seed(seed, t)`, so all
//! σ values and algorithms see the same underlying Gaussian draws.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::algorithms::Algorithm;
use crate::container;
use crate::error::{Error, Result};
use crate::model::{generate_synthetic, perturb, LatentInstance, SyntheticParams};
use crate::par;
use crate::rng::sub_seed;
use crate::thresholds::half_min_singular_value;

pub const DEFAULT_TRIALS: u64 = 100;
/// A grid point "fails" once its success rate drops below this level.
pub const SUCCESS_LEVEL: f64 = 0.9;

pub const CSV_HEADER: &str = "algorithm,sigma,successes,trials,success_rate,n,d,k,epsilon,s_k,seed,approx_successes";

/// Where each trial's latent instance comes from.
#[derive(Debug, Clone)]
pub enum InstanceSource {
    /// One latent instance; each trial redraws the noise.
    Fixed(LatentInstance),
    /// Trial `t` uses instance `t mod len` (e.g. one per real-data query).
    PerTrial(Vec<LatentInstance>),
}

impl InstanceSource {
    fn instances(&self) -> &[LatentInstance] {
        match self {
            InstanceSource::Fixed(inst) => std::slice::from_ref(inst),
            InstanceSource::PerTrial(v) => v,
        }
    }

    fn instance(&self, trial: u64) -> &LatentInstance {
        let all = self.instances();
        &all[(trial % all.len() as u64) as usize]
    }

    /// Shared record parameters. `s_k` is the minimum over instances.
    pub fn params(&self) -> Result<RecordParams> {
        let all = self.instances();
        let first = all.first().ok_or_else(|| Error::param("instances", "no instances given"))?;
        let mut s_k = f64::INFINITY;
        for inst in all {
            if (inst.n(), inst.d(), inst.k()) != (first.n(), first.d(), first.k()) || inst.epsilon() != first.epsilon() {
                return Err(Error::param("instances", "instances differ in n, d, k or eps"));
            }
            s_k = s_k.min(half_min_singular_value(inst)?);
        }
        Ok(RecordParams {
            n: first.n(),
            d: first.d(),
            k: first.k(),
            epsilon: first.epsilon(),
            s_k,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub algorithms: Vec<Algorithm>,
    pub sigma_grid: Vec<f64>,
    pub trials: u64,
    pub seed: u64,
}

impl SweepConfig {
    pub fn new(algorithms: Vec<Algorithm>, sigma_grid: Vec<f64>, trials: u64, seed: u64) -> Result<Self> {
        let cfg = SweepConfig {
            algorithms,
            sigma_grid,
            trials,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.algorithms.is_empty() {
            return Err(Error::param("algo", "at least one algorithm is required"));
        }
        if self.sigma_grid.is_empty() {
            return Err(Error::param("sigma-grid", "grid is empty"));
        }
        if self.sigma_grid.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::param("sigma-grid", "values must be finite and nonnegative"));
        }
        if self.sigma_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::param("sigma-grid", "values must be strictly ascending"));
        }
        if self.trials == 0 {
            return Err(Error::param("trials", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecordParams {
    pub n: usize,
    pub d: usize,
    pub k: usize,
    pub epsilon: f64,
    pub s_k: f64,
}

/// One measured grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    pub algorithm: Algorithm,
    pub sigma: f64,
    /// Trials returning exactly the latent nearest neighbor.
    pub successes: u64,
    pub trials: u64,
    pub success_rate: f64,
    pub params: RecordParams,
    pub seed: u64,
    /// Trials returning a `(1+ε)`-approximate nearest neighbor.
    pub approx_successes: u64,
}

impl ExperimentRecord {
    /// Binomial standard error of `success_rate`.
    pub fn stderr(&self) -> f64 {
        let p = self.success_rate;
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }

    pub fn approx_rate(&self) -> f64 {
        self.approx_successes as f64 / self.trials as f64
    }

    pub fn to_csv_row(&self) -> String {
        let p = &self.params;
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.algorithm.name(),
            self.sigma,
            self.successes,
            self.trials,
            self.success_rate,
            p.n,
            p.d,
            p.k,
            p.epsilon,
            p.s_k,
            self.seed,
            self.approx_successes
        )
    }
}

fn success_probability_with(
    algorithm: Algorithm,
    source: &InstanceSource,
    params: RecordParams,
    sigma: f64,
    trials: u64,
    seed: u64,
) -> Result<ExperimentRecord> {
    if trials == 0 {
        return Err(Error::param("trials", "must be at least 1"));
    }
    let outcomes = par::map_range(trials as usize, |t| -> Result<(bool, bool)> {
        let inst = source.instance(t as u64);
        let noisy = perturb(inst, sigma, sub_seed(seed, t as u64))?;
        let answer = algorithm.solve(noisy.a(), inst.k())?;
        let dist = inst.distances();
        let best = dist[inst.nn_index()];
        Ok((
            answer.index == inst.nn_index(),
            dist[answer.index] <= (1.0 + inst.epsilon()) * best,
        ))
    });
    let (mut successes, mut approx_successes) = (0, 0);
    for o in outcomes {
        let (exact, approx) = o?;
        successes += u64::from(exact);
        approx_successes += u64::from(approx);
    }
    Ok(ExperimentRecord {
        algorithm,
        sigma,
        successes,
        trials,
        success_rate: successes as f64 / trials as f64,
        params,
        seed,
        approx_successes,
    })
}

/// Runs `trials` noisy queries at one σ. Success means the returned index is
/// the latent nearest neighbor.
pub fn success_probability(
    algorithm: Algorithm,
    source: &InstanceSource,
    sigma: f64,
    trials: u64,
    seed: u64,
) -> Result<ExperimentRecord> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::param("sigma", "must be finite and nonnegative"));
    }
    success_probability_with(algorithm, source, source.params()?, sigma, trials, seed)
}

/// Every algorithm at every grid point, algorithm-major.
pub fn sweep(config: &SweepConfig, source: &InstanceSource) -> Result<Vec<ExperimentRecord>> {
    config.validate()?;
    let params = source.params()?;
    let mut out = Vec::with_capacity(config.algorithms.len() * config.sigma_grid.len());
    for &alg in &config.algorithms {
        for &sigma in &config.sigma_grid {
            out.push(success_probability_with(alg, source, params, sigma, config.trials, config.seed)?);
        }
    }
    Ok(out)
}

/// Smallest σ among records (one algorithm, ascending σ) whose success rate
/// is below [`SUCCESS_LEVEL`].
pub fn threshold_from_records(records: &[ExperimentRecord]) -> Result<f64> {
    let (first, last) = match (records.first(), records.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(Error::Sweep("no records".into())),
    };
    if first.success_rate < SUCCESS_LEVEL {
        return Err(Error::Sweep(format!(
            "success rate {} at the smallest σ = {} is already below {SUCCESS_LEVEL}; widen the grid downward",
            first.success_rate, first.sigma
        )));
    }
    if last.success_rate >= SUCCESS_LEVEL {
        return Err(Error::Sweep(format!(
            "success rate {} at the largest σ = {} is still at least {SUCCESS_LEVEL}; widen the grid upward",
            last.success_rate, last.sigma
        )));
    }
    Ok(records
        .iter()
        .find(|r| r.success_rate < SUCCESS_LEVEL)
        .expect("last record is below the level")
        .sigma)
}

/// The 90% noise threshold of one algorithm. Both grid ends are measured
/// first to confirm the transition is bracketed; the scan then stops at the
/// first failing point.
pub fn noise_threshold(config: &SweepConfig, algorithm: Algorithm, source: &InstanceSource) -> Result<f64> {
    config.validate()?;
    let params = source.params()?;
    let run = |sigma| success_probability_with(algorithm, source, params, sigma, config.trials, config.seed);
    let grid = &config.sigma_grid;
    let first = run(grid[0])?;
    let last = if grid.len() > 1 { run(grid[grid.len() - 1])? } else { first.clone() };
    threshold_from_records(&[first.clone(), last])?;
    if first.success_rate < SUCCESS_LEVEL {
        return Ok(first.sigma);
    }
    for &sigma in &grid[1..] {
        if run(sigma)?.success_rate < SUCCESS_LEVEL {
            return Ok(sigma);
        }
    }
    unreachable!("last grid point is below the level")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LinearFit {
    Fit { slope: f64, intercept: f64, pearson_r: f64 },
    /// One of the coordinates has zero variance, so `r` is undefined.
    Degenerate,
}

/// Least-squares line through `(x, y)` and the Pearson correlation.
pub fn linear_fit(points: &[(f64, f64)]) -> LinearFit {
    let m = points.len() as f64;
    if points.len() < 2 {
        return LinearFit::Degenerate;
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / m;
    let my = points.iter().map(|p| p.1).sum::<f64>() / m;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for &(x, y) in points {
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
        sxy += (x - mx) * (y - my);
    }
    let scale = mx.abs().max(my.abs()).max(f64::MIN_POSITIVE);
    if sxx <= 1e-24 * scale * scale * m || syy <= 1e-24 * scale * scale * m {
        return LinearFit::Degenerate;
    }
    let slope = sxy / sxx;
    LinearFit::Fit {
        slope,
        intercept: my - slope * mx,
        pearson_r: sxy / (sxx * syy).sqrt(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkStudy {
    /// `(s_k, threshold)` per multiplier, in input order.
    pub points: Vec<(f64, f64)>,
    pub fit: LinearFit,
}

/// Scales the base spectrum by each multiplier, regenerates the instance
/// from `instance_seed`, measures its noise threshold and fits threshold
/// against the measured `s_k`.
pub fn sk_dependence_study(
    base: &SyntheticParams,
    multipliers: &[f64],
    algorithm: Algorithm,
    config: &SweepConfig,
    instance_seed: u64,
) -> Result<SkStudy> {
    if multipliers.len() < 4 {
        return Err(Error::param("multipliers", format!("need at least 4, got {}", multipliers.len())));
    }
    if multipliers.iter().any(|m| !(m.is_finite() && *m > 0.0)) {
        return Err(Error::param("multipliers", "must be positive"));
    }
    let mut points = Vec::with_capacity(multipliers.len());
    for &m in multipliers {
        let inst = generate_synthetic(&base.with_spectrum_scaled(m), instance_seed)?;
        let s_k = half_min_singular_value(&inst)?;
        let threshold = noise_threshold(config, algorithm, &InstanceSource::Fixed(inst))?;
        points.push((s_k, threshold));
    }
    let fit = linear_fit(&points);
    Ok(SkStudy { points, fit })
}

pub fn render_csv(records: &[ExperimentRecord]) -> String {
    let mut s = String::with_capacity(64 * (records.len() + 1));
    s.push_str(CSV_HEADER);
    s.push('\n');
    for r in records {
        s.push_str(&r.to_csv_row());
        s.push('\n');
    }
    s
}

pub fn emit_csv(records: &[ExperimentRecord], path: impl AsRef<Path>) -> Result<()> {
    if records.is_empty() {
        return Err(Error::param("records", "nothing to write"));
    }
    let path = path.as_ref();
    fs::write(path, render_csv(records)).map_err(Error::io_at(path))?;
    Ok(())
}

pub fn parse_csv(text: &str) -> Result<Vec<ExperimentRecord>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end() == CSV_HEADER => {}
        _ => return Err(Error::Format(format!("line 1: expected header `{CSV_HEADER}`"))),
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_row(line).map_err(|e| Error::Format(format!("line {}: {e}", i + 1)))?);
    }
    Ok(out)
}

fn parse_row(line: &str) -> std::result::Result<ExperimentRecord, String> {
    let f: Vec<&str> = line.split(',').collect();
    if f.len() != 12 {
        return Err(format!("expected 12 fields, found {}", f.len()));
    }
    fn num<T: std::str::FromStr>(s: &str, name: &str) -> std::result::Result<T, String> {
        s.parse().map_err(|_| format!("bad {name} `{s}`"))
    }
    let rec = ExperimentRecord {
        algorithm: f[0].parse().map_err(|e: Error| e.to_string())?,
        sigma: num(f[1], "sigma")?,
        successes: num(f[2], "successes")?,
        trials: num(f[3], "trials")?,
        success_rate: num(f[4], "success_rate")?,
        params: RecordParams {
            n: num(f[5], "n")?,
            d: num(f[6], "d")?,
            k: num(f[7], "k")?,
            epsilon: num(f[8], "epsilon")?,
            s_k: num(f[9], "s_k")?,
        },
        seed: num(f[10], "seed")?,
        approx_successes: num(f[11], "approx_successes")?,
    };
    if rec.trials == 0 || rec.successes > rec.trials || rec.approx_successes > rec.trials {
        return Err("counts inconsistent with trials".into());
    }
    if rec.success_rate != rec.successes as f64 / rec.trials as f64 {
        return Err("success_rate differs from successes/trials".into());
    }
    Ok(rec)
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<ExperimentRecord>> {
    let path = path.as_ref();
    parse_csv(&fs::read_to_string(path).map_err(Error::io_at(path))?)
}

const PALETTE: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

/// Success rate against σ, one polyline per algorithm, with a dashed line
/// at [`SUCCESS_LEVEL`]. σ is on a log axis when all values are positive.
pub fn render_svg(records: &[ExperimentRecord]) -> Result<String> {
    if records.is_empty() {
        return Err(Error::param("records", "nothing to plot"));
    }
    let (w, h, margin) = (640.0, 400.0, 60.0);
    let lo = records.iter().map(|r| r.sigma).fold(f64::INFINITY, f64::min);
    let hi = records.iter().map(|r| r.sigma).fold(f64::NEG_INFINITY, f64::max);
    let log = lo > 0.0;
    let tx = |s: f64| if log { s.ln() } else { s };
    let (a, b) = (tx(lo), tx(hi));
    let span = if b > a { b - a } else { 1.0 };
    let px = |s: f64| margin + (tx(s) - a) / span * (w - 2.0 * margin);
    let py = |r: f64| h - margin - r * (h - 2.0 * margin);

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(svg, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<path d="M{m} {t} V{bt} H{r}" fill="none" stroke="black"/>"#,
        m = margin,
        t = margin,
        bt = h - margin,
        r = w - margin
    );
    for tick in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let _ = writeln!(
            svg,
            r#"<text x="{x}" y="{y:.1}" font-size="11" text-anchor="end">{tick}</text>"#,
            x = margin - 6.0,
            y = py(tick) + 4.0
        );
    }
    for s in [lo, hi] {
        let _ = writeln!(
            svg,
            r#"<text x="{x:.1}" y="{y}" font-size="11" text-anchor="middle">{s:.4}</text>"#,
            x = px(s),
            y = h - margin + 16.0
        );
    }
    let axis = if log { "σ (log scale)" } else { "σ" };
    let _ = writeln!(svg, r#"<text x="{x}" y="{y}" font-size="12" text-anchor="middle">{axis}</text>"#, x = w / 2.0, y = h - 16.0);
    let _ = writeln!(svg, r#"<text x="16" y="{y}" font-size="12" transform="rotate(-90 16 {y})" text-anchor="middle">success rate</text>"#, y = h / 2.0);
    let _ = writeln!(
        svg,
        r#"<line class="reference" x1="{m}" y1="{y:.1}" x2="{r}" y2="{y:.1}" stroke="gray" stroke-dasharray="6 4"/>"#,
        m = margin,
        r = w - margin,
        y = py(SUCCESS_LEVEL)
    );

    let mut algorithms: Vec<Algorithm> = Vec::new();
    for r in records {
        if !algorithms.contains(&r.algorithm) {
            algorithms.push(r.algorithm);
        }
    }
    for (i, alg) in algorithms.iter().enumerate() {
        let mut pts: Vec<&ExperimentRecord> = records.iter().filter(|r| r.algorithm == *alg).collect();
        pts.sort_by(|x, y| x.sigma.total_cmp(&y.sigma));
        let coords: Vec<String> = pts.iter().map(|r| format!("{:.1},{:.1}", px(r.sigma), py(r.success_rate))).collect();
        let color = PALETTE[i % PALETTE.len()];
        let _ = writeln!(
            svg,
            r#"<polyline data-algorithm="{alg}" points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            coords.join(" ")
        );
        let _ = writeln!(
            svg,
            r#"<text x="{x}" y="{y}" font-size="12" fill="{color}">{alg}</text>"#,
            x = w - margin - 90.0,
            y = margin + 16.0 * (i as f64 + 1.0)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn emit_plot(records: &[ExperimentRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, render_svg(records)?).map_err(Error::io_at(path))?;
    Ok(())
}

/// `lo:hi:geometric:count`, `lo:hi:linear:count`, or a comma-separated list.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let bad = |reason: String| Error::param("sigma-grid", reason);
    let parts: Vec<&str> = text.split(':').map(str::trim).collect();
    let grid = if parts.len() == 4 {
        let lo: f64 = parts[0].parse().map_err(|_| bad(format!("bad lower end `{}`", parts[0])))?;
        let hi: f64 = parts[1].parse().map_err(|_| bad(format!("bad upper end `{}`", parts[1])))?;
        let count: usize = parts[3].parse().map_err(|_| bad(format!("bad count `{}`", parts[3])))?;
        match parts[2] {
            "geometric" | "geom" | "log" => geometric_grid(lo, hi, count)?,
            "linear" | "lin" => linear_grid(lo, hi, count)?,
            other => return Err(bad(format!("unknown spacing `{other}`"))),
        }
    } else if parts.len() == 1 {
        text.split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|_| bad(format!("bad value `{}`", s.trim()))))
            .collect::<Result<_>>()?
    } else {
        return Err(bad(format!("expected lo:hi:geometric:count or a list, got `{text}`")));
    };
    SweepConfig {
        algorithms: vec![Algorithm::SvdSplit],
        sigma_grid: grid.clone(),
        trials: 1,
        seed: 0,
    }
    .validate()?;
    Ok(grid)
}

pub fn geometric_grid(lo: f64, hi: f64, count: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo && hi.is_finite()) || count < 2 {
        return Err(Error::param("sigma-grid", "geometric grid needs 0 < lo < hi and count ≥ 2"));
    }
    let ratio = (hi / lo).ln() / (count - 1) as f64;
    let mut g: Vec<f64> = (0..count).map(|i| lo * (ratio * i as f64).exp()).collect();
    g[count - 1] = hi;
    Ok(g)
}

pub fn linear_grid(lo: f64, hi: f64, count: usize) -> Result<Vec<f64>> {
    if !(lo >= 0.0 && hi > lo && hi.is_finite()) || count < 2 {
        return Err(Error::param("sigma-grid", "linear grid needs 0 ≤ lo < hi and count ≥ 2"));
    }
    let step = (hi - lo) / (count - 1) as f64;
    let mut g: Vec<f64> = (0..count).map(|i| lo + step * i as f64).collect();
    g[count - 1] = hi;
    Ok(g)
}

/// How a sweep file names its instances.
#[derive(Debug, Clone, PartialEq)]
pub enum SourceSpec {
    Synthetic { params: SyntheticParams, seed: u64 },
    Files(Vec<PathBuf>),
}

impl SourceSpec {
    /// Relative file paths resolve against `base_dir`.
    pub fn load(&self, base_dir: &Path) -> Result<InstanceSource> {
        match self {
            SourceSpec::Synthetic { params, seed } => Ok(InstanceSource::Fixed(generate_synthetic(params, *seed)?)),
            SourceSpec::Files(paths) => {
                let mut insts = paths
                    .iter()
                    .map(|p| container::load(base_dir.join(p)).map(|f| f.latent))
                    .collect::<Result<Vec<_>>>()?;
                if insts.len() == 1 {
                    Ok(InstanceSource::Fixed(insts.pop().expect("one instance")))
                } else {
                    Ok(InstanceSource::PerTrial(insts))
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepFile {
    pub config: SweepConfig,
    pub source: SourceSpec,
}

/// Parses a flat `key = value` sweep description. `#` starts a comment.
///
/// ```text
/// algorithms = svd, naive
/// sigma_grid = 0.005:0.1:geometric:16
/// trials = 100
/// seed = 7
/// # either instance files ...
/// instances = a.snns, b.snns
/// # ... or synthetic parameters
/// n = 200
/// d = 100
/// k = 10
/// eps = 0.05
/// spectrum = 1.0          # flat value, or k comma-separated values
/// instance_seed = 1
/// ```
pub fn parse_sweep_file(text: &str) -> Result<SweepFile> {
    let mut algorithms = Vec::new();
    let mut grid = None;
    let mut trials = DEFAULT_TRIALS;
    let mut seed = 0u64;
    let mut files = Vec::new();
    let (mut n, mut d, mut k, mut eps) = (None, None, None, None);
    let mut spectrum: Option<Vec<f64>> = None;
    let mut instance_seed = None;

    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("line {lineno}: expected key = value")))?;
        let (key, value) = (key.trim(), value.trim());
        let wrap = |e: Error| Error::Format(format!("line {lineno}: {e}"));
        fn int<T: std::str::FromStr>(v: &str, key: &'static str) -> Result<T> {
            v.parse().map_err(|_| Error::param(key, format!("cannot parse `{v}`")))
        }
        match key {
            "algorithm" | "algorithms" | "algo" => {
                for a in value.split(',') {
                    algorithms.push(a.trim().parse::<Algorithm>().map_err(wrap)?);
                }
            }
            "sigma_grid" | "sigma-grid" => grid = Some(parse_grid(value).map_err(wrap)?),
            "trials" => trials = int(value, "trials").map_err(wrap)?,
            "seed" => seed = int(value, "seed").map_err(wrap)?,
            "instance" | "instances" => files.extend(value.split(',').map(|p| PathBuf::from(p.trim()))),
            "n" => n = Some(int(value, "n").map_err(wrap)?),
            "d" => d = Some(int(value, "d").map_err(wrap)?),
            "k" => k = Some(int(value, "k").map_err(wrap)?),
            "eps" | "epsilon" => eps = Some(int::<f64>(value, "eps").map_err(wrap)?),
            "instance_seed" | "instance-seed" => instance_seed = Some(int(value, "instance_seed").map_err(wrap)?),
            "spectrum" => {
                spectrum = Some(
                    value
                        .split(',')
                        .map(|s| int::<f64>(s.trim(), "spectrum"))
                        .collect::<Result<_>>()
                        .map_err(wrap)?,
                )
            }
            other => return Err(Error::Format(format!("line {lineno}: unknown key `{other}`"))),
        }
    }

    let synthetic = n.is_some() || d.is_some() || k.is_some();
    let source = match (synthetic, files.is_empty()) {
        (true, false) => return Err(Error::Format("give either instance files or synthetic parameters, not both".into())),
        (false, true) => return Err(Error::Format("no instance source: set `instances` or n/d/k".into())),
        (false, false) => SourceSpec::Files(files),
        (true, true) => {
            let need = |v: Option<usize>, name: &str| v.ok_or_else(|| Error::Format(format!("missing `{name}`")));
            let (n, d, k) = (need(n, "n")?, need(d, "d")?, need(k, "k")?);
            let eps = eps.ok_or_else(|| Error::Format("missing `eps`".into()))?;
            let spectrum = match spectrum {
                None => vec![1.0; k],
                Some(s) if s.len() == 1 => vec![s[0]; k],
                Some(s) => s,
            };
            let params = SyntheticParams {
                n,
                d,
                k,
                spectrum,
                epsilon: eps,
            };
            params.validate()?;
            SourceSpec::Synthetic {
                params,
                seed: instance_seed.unwrap_or(seed),
            }
        }
    };
    if algorithms.is_empty() {
        algorithms.push(Algorithm::SvdSplit);
    }
    let grid = grid.ok_or_else(|| Error::Format("missing `sigma_grid`".into()))?;
    Ok(SweepFile {
        config: SweepConfig::new(algorithms, grid, trials, seed)?,
        source,
    })
}
