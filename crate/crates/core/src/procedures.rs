//! Decision procedures: the AS/TDC threshold, FDP bounds at a threshold, FDP
//! control, and label assignment with several decoys per hypothesis.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::bands::{dmax_for_fdp, dmax_for_fdr, Band, BandKind, BandParams, CompetitionSequence, FdpBounds, Label};
use crate::error::{Error, Result};
use crate::mcquant::{TableSet, UbMode};

/// AS condition at index `k`: `(D_k + 1) / T_k * B <= alpha`, false when `T_k = 0`.
pub fn as_condition(seq: &CompetitionSequence, params: &BandParams, k: usize) -> bool {
    let t = seq.t_at(k);
    if t == 0 {
        return false;
    }
    (seq.d_at(k) + 1) as f64 / t as f64 * params.b() <= params.alpha
}

/// `k_AS = max { k : (D_k + 1) / T_k * B <= alpha }`, or 0.
pub fn as_threshold(seq: &CompetitionSequence, params: &BandParams) -> usize {
    (1..=seq.len()).rev().find(|&k| as_condition(seq, params, k)).unwrap_or(0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionReport {
    pub k_threshold: usize,
    pub n_discoveries: u64,
    /// Interpolated bound at the threshold.
    pub q_bound: f64,
    pub q_bound_raw: f64,
    pub band_kind: BandKind,
    /// Parameters with the `d_max` actually used.
    pub params: BandParams,
}

fn report(seq: &CompetitionSequence, k: usize, bounds: Option<&FdpBounds>, kind: BandKind, params: BandParams) -> DecisionReport {
    let n = seq.t_at(k);
    let (q, q_raw) = match bounds {
        Some(b) if n > 0 => (b.q_at(k), b.q_raw_at(k)),
        _ => (0.0, 0.0),
    };
    DecisionReport {
        k_threshold: k,
        n_discoveries: n,
        q_bound: q,
        q_bound_raw: q_raw,
        band_kind: kind,
        params,
    }
}

/// Full FDP band for a TDC/AS list, with `d_max = d_c`.
pub fn tdc_bounds<G: Rng + ?Sized>(
    seq: &CompetitionSequence,
    params: &BandParams,
    kind: BandKind,
    tables: &TableSet,
    mode: UbMode,
    rng: &mut G,
) -> Result<(FdpBounds, BandParams)> {
    let params = params.with_d_max(dmax_for_fdr(params));
    let band = Band::build(&params, kind, tables, mode, rng)?;
    Ok((band.bounds(seq), params))
}

/// `1 - gamma` upper prediction bound on the FDP among the target wins in the
/// top `tau` (normally `tau = k_AS`).
pub fn tdc_bound<G: Rng + ?Sized>(
    seq: &CompetitionSequence,
    tau: usize,
    params: &BandParams,
    kind: BandKind,
    tables: &TableSet,
    mode: UbMode,
    rng: &mut G,
) -> Result<DecisionReport> {
    if tau > seq.len() {
        return Err(Error::param(format!("tau={tau} exceeds the list length {}", seq.len())));
    }
    if tau == 0 || seq.t_at(tau) == 0 {
        let params = params.with_d_max(dmax_for_fdr(params));
        return Ok(report(seq, tau, None, kind, params));
    }
    let (bounds, used) = tdc_bounds(seq, params, kind, tables, mode, rng)?;
    Ok(report(seq, tau, Some(&bounds), kind, used))
}

/// `k0 = max { i : L_i = 1, Q_i <= alpha }` from the interpolated band with
/// `d_max = d_inf`; the report counts the target wins in the top `k0`.
pub fn fdp_control_threshold<G: Rng + ?Sized>(
    seq: &CompetitionSequence,
    params: &BandParams,
    kind: BandKind,
    tables: &TableSet,
    mode: UbMode,
    rng: &mut G,
) -> Result<DecisionReport> {
    let params = params.with_d_max(dmax_for_fdp(params, kind, tables)?);
    let bounds = Band::build(&params, kind, tables, mode, rng)?.bounds(seq);
    let k0 = seq
        .labels()
        .iter()
        .zip(&bounds.qbar)
        .rposition(|(l, &q)| *l == Label::Target && q <= params.alpha)
        .map_or(0, |i| i + 1);
    Ok(report(seq, k0, Some(&bounds), kind, params))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Winning score is the maximum over the target and all decoys.
    Max,
    /// Single decoy only.
    Mirror,
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max" => Ok(Method::Max),
            "mirror" => Ok(Method::Mirror),
            other => Err(Error::param(format!("unknown method `{other}`"))),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Max => "max",
            Method::Mirror => "mirror",
        })
    }
}

impl Method {
    /// `(c, lambda)` for `d` decoys.
    pub fn cutoffs(self, d: usize) -> Result<(f64, f64)> {
        match (self, d) {
            (_, 0) => Err(Error::param("at least one decoy is required")),
            (Method::Mirror, d) if d != 1 => Err(Error::param(format!(
                "mirror method supports a single decoy only, got {d}"
            ))),
            _ => {
                let c = 1.0 / (d as f64 + 1.0);
                Ok((c, c))
            }
        }
    }

    pub fn params(self, d: usize, m: u64, alpha: f64, gamma: f64) -> Result<BandParams> {
        let (c, lambda) = self.cutoffs(d)?;
        BandParams::new(c, lambda, m, alpha, gamma)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TiePolicy {
    /// Target rank uniform among the decoys it ties with.
    #[default]
    Random,
    /// Any tie with a decoy drops the hypothesis (label 0).
    Discard,
}

impl FromStr for TiePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(TiePolicy::Random),
            "discard" => Ok(TiePolicy::Discard),
            other => Err(Error::param(format!("unknown tie policy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiDecoyInput {
    pub target_score: f64,
    pub decoy_scores: Vec<f64>,
    pub method: Method,
    pub tie_policy: TiePolicy,
}

/// Rank of the target among itself and its decoys (1 = best), before tie handling:
/// `(strictly better decoys, tied decoys)`.
fn rank_counts(target: f64, decoys: &[f64]) -> (usize, usize) {
    decoys.iter().fold((0, 0), |(g, e), &x| {
        if x > target {
            (g + 1, e)
        } else if x == target {
            (g, e + 1)
        } else {
            (g, e)
        }
    })
}

/// Winning score and label from the rank p-value `p = rank / (d + 1)`.
///
/// Both methods have `c = lambda = 1 / (d + 1)`, so the target wins exactly
/// when it ranks first and no hypothesis falls strictly between the cutoffs.
pub fn assign_label_multi<G: Rng + ?Sized>(input: &MultiDecoyInput, rng: &mut G) -> Result<(f64, Label)> {
    let d = input.decoy_scores.len();
    input.method.cutoffs(d)?;
    if input.target_score.is_nan() || input.decoy_scores.iter().any(|x| x.is_nan()) {
        return Err(Error::param("scores must not be NaN"));
    }
    let w = input
        .decoy_scores
        .iter()
        .fold(input.target_score, |acc, &x| acc.max(x));
    let (greater, equal) = rank_counts(input.target_score, &input.decoy_scores);
    let rank = match input.tie_policy {
        TiePolicy::Discard if equal > 0 => return Ok((w, Label::Discarded)),
        TiePolicy::Random if equal > 0 => 1 + greater + rng.random_range(0..=equal),
        _ => 1 + greater,
    };
    let label = if rank == 1 { Label::Target } else { Label::Decoy };
    Ok((w, label))
}

/// Label every hypothesis and sort into a competition sequence. Each record is
/// `(target, decoys)`.
pub fn compete<G: Rng + ?Sized>(
    records: &[(f64, Vec<f64>)],
    method: Method,
    tie_policy: TiePolicy,
    rng: &mut G,
) -> Result<CompetitionSequence> {
    let items = label_all(records, method, tie_policy, rng)?;
    CompetitionSequence::from_scored(items, rng)
}

pub(crate) fn label_all<G: Rng + ?Sized>(
    records: &[(f64, Vec<f64>)],
    method: Method,
    tie_policy: TiePolicy,
    rng: &mut G,
) -> Result<Vec<(f64, Label)>> {
    records
        .iter()
        .map(|(t, ds)| {
            let input = MultiDecoyInput {
                target_score: *t,
                decoy_scores: ds.clone(),
                method,
                tie_policy,
            };
            assign_label_multi(&input, rng)
        })
        .collect()
}
