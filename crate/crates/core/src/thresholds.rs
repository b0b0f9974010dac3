//! Noise-tolerance calculators: the three-term σ cap under which the
//! split-SVD solver is guaranteed to return a `(1+ε)`-approximate nearest
//! neighbor with probability at least `1 − 1/n`, the per-distance interval
//! check, and an informational noise-regime classifier.

use std::fmt;

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::LatentInstance;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BindingTerm {
    KTerm,
    SpectralTerm,
    GapTerm,
}

impl BindingTerm {
    pub fn name(self) -> &'static str {
        match self {
            BindingTerm::KTerm => "K_TERM",
            BindingTerm::SpectralTerm => "SPECTRAL_TERM",
            BindingTerm::GapTerm => "GAP_TERM",
        }
    }
}

impl fmt::Display for BindingTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdReport {
    /// `√(ε/240)·minDist / (k·ln n)^{1/4}`
    pub term_k: f64,
    /// `ε·min(s_k(B⁽¹⁾), s_k(B⁽²⁾)) / (75·√n)`
    pub term_spectral: f64,
    /// `ε·minDist / (36·√(ln n))`
    pub term_gap: f64,
    pub sigma_cap: f64,
    pub binding_term: BindingTerm,
}

impl ThresholdReport {
    /// Evaluates the three terms from their inputs. `s_k` is the smaller of
    /// the two halves' k-th singular values.
    pub fn from_terms(min_dist: f64, s_k: f64, k: usize, n: usize, epsilon: f64) -> ThresholdReport {
        let ln_n = (n as f64).ln();
        let term_k = (epsilon / 240.0).sqrt() * min_dist / (k as f64 * ln_n).powf(0.25);
        let term_spectral = epsilon * s_k / (75.0 * (n as f64).sqrt());
        let term_gap = epsilon * min_dist / (36.0 * ln_n.sqrt());
        let (sigma_cap, binding_term) = [
            (term_k, BindingTerm::KTerm),
            (term_spectral, BindingTerm::SpectralTerm),
            (term_gap, BindingTerm::GapTerm),
        ]
        .into_iter()
        .fold((f64::INFINITY, BindingTerm::KTerm), |best, cur| if cur.0 < best.0 { cur } else { best });
        ThresholdReport {
            term_k,
            term_spectral,
            term_gap,
            sigma_cap,
            binding_term,
        }
    }

    pub const CSV_HEADER: &'static str = "term_k,term_spectral,term_gap,sigma_cap,binding_term";

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.term_k, self.term_spectral, self.term_gap, self.sigma_cap, self.binding_term
        )
    }

    pub fn to_json(&self) -> String {
        format!(
            "{{\"term_k\":{},\"term_spectral\":{},\"term_gap\":{},\"sigma_cap\":{},\"binding_term\":\"{}\"}}",
            self.term_k, self.term_spectral, self.term_gap, self.sigma_cap, self.binding_term
        )
    }
}

/// Smaller of the two halves' k-th singular values, each half taken with the
/// query column.
pub fn half_min_singular_value(inst: &LatentInstance) -> Result<f64> {
    let s1 = linalg::singular_value(&inst.half_with_query(0), inst.k())?;
    let s2 = linalg::singular_value(&inst.half_with_query(1), inst.k())?;
    Ok(s1.min(s2))
}

/// Guaranteed σ cap for a latent instance. `minDist` is the smallest
/// query distance over both halves.
pub fn theorem_sigma_cap(inst: &LatentInstance) -> Result<ThresholdReport> {
    let s_k = half_min_singular_value(inst)?;
    if s_k == 0.0 {
        return Err(Error::Precondition(format!(
            "a half of B has rank below k = {}",
            inst.k()
        )));
    }
    let min_dist = inst.distances().into_iter().fold(f64::INFINITY, f64::min);
    Ok(ThresholdReport::from_terms(min_dist, s_k, inst.k(), inst.n(), inst.epsilon()))
}

/// Whether `est_sq` lies in `[(1 − ε/3)·true_sq, (1 + ε/3)·true_sq]`.
pub fn corollary_interval_holds(true_sq: f64, est_sq: f64, epsilon: f64) -> bool {
    let lo = (1.0 - epsilon / 3.0) * true_sq;
    let hi = (1.0 + epsilon / 3.0) * true_sq;
    lo <= est_sq && est_sq <= hi
}

/// Noise regimes in increasing σ. Boundaries use constant 1 and belong to
/// the lower bucket; the labels are descriptive, not guarantees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Regime {
    /// `σ ≤ 1/√d`: noise below the ambient scale.
    SubAmbient,
    /// `σ ≤ 1/d^{1/4}`: the noisy nearest neighbor is typically unchanged.
    PriorWorkOk,
    /// `σ ≤ 1/k^{1/4}`: SVD denoising recovers the latent nearest neighbor.
    SvdOk,
    /// Beyond `1/k^{1/4}` the latent nearest neighbor is not identifiable.
    Impossible,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::SubAmbient => "SUB_AMBIENT",
            Regime::PriorWorkOk => "PRIOR_WORK_OK",
            Regime::SvdOk => "SVD_OK",
            Regime::Impossible => "IMPOSSIBLE",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub fn classify_regime(sigma: f64, d: usize, k: usize) -> Regime {
    let d = d as f64;
    if sigma <= 1.0 / d.sqrt() {
        Regime::SubAmbient
    } else if sigma <= 1.0 / d.powf(0.25) {
        Regime::PriorWorkOk
    } else if sigma <= 1.0 / (k as f64).powf(0.25) {
        Regime::SvdOk
    } else {
        Regime::Impossible
    }
}
