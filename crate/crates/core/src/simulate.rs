//! Normal-mixture competitions and a replicated experiment harness.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Exp, Exp1, StandardNormal};
use rand_pcg::Pcg64Mcg;
use rayon::prelude::*;

use crate::bands::{dmax_for_fdr, BandKind, BandParams, CompetitionSequence, Label, XiBand};
use crate::error::{Error, Result};
use crate::mcquant::{TableSet, UbMode};
use crate::procedures::{as_threshold, label_all, tdc_bounds, Method, TiePolicy};

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureConfig {
    pub m: usize,
    pub pi0: f64,
    pub calibrated: bool,
    /// Separation of false-null targets when calibrated.
    pub rho: f64,
    /// Rate of the exponential part of the separation when uncalibrated.
    pub nu: f64,
    pub n_decoys: usize,
    pub seed: u64,
}

impl MixtureConfig {
    pub fn new(m: usize, pi0: f64, seed: u64) -> Self {
        MixtureConfig {
            m,
            pi0,
            calibrated: true,
            rho: 3.0,
            nu: 0.075,
            n_decoys: 1,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::param("m must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.pi0) {
            return Err(Error::param(format!("pi0 must lie in [0, 1], got {}", self.pi0)));
        }
        if !self.rho.is_finite() {
            return Err(Error::param(format!("rho must be finite, got {}", self.rho)));
        }
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return Err(Error::param(format!("nu must be positive, got {}", self.nu)));
        }
        if self.n_decoys == 0 {
            return Err(Error::param("at least one decoy is required"));
        }
        Ok(())
    }

    /// `floor(pi0 m)`.
    pub fn n_nulls(&self) -> usize {
        ((self.pi0 * self.m as f64 + 1e-9).floor() as usize).min(self.m)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub target: f64,
    pub decoys: Vec<f64>,
    pub is_null: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub hypotheses: Vec<Hypothesis>,
}

impl Dataset {
    pub fn records(&self) -> Vec<(f64, Vec<f64>)> {
        self.hypotheses.iter().map(|h| (h.target, h.decoys.clone())).collect()
    }

    pub fn n_nulls(&self) -> usize {
        self.hypotheses.iter().filter(|h| h.is_null).count()
    }

    /// CSV with a `target,decoy1..decoyd` header.
    pub fn to_csv(&self) -> String {
        let d = self.hypotheses.first().map_or(1, |h| h.decoys.len());
        let mut out = String::from("target");
        for j in 1..=d {
            write!(out, ",decoy{j}").unwrap();
        }
        out.push('\n');
        for h in &self.hypotheses {
            write!(out, "{:e}", h.target).unwrap();
            for x in &h.decoys {
                write!(out, ",{x:e}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// The first `floor(pi0 m)` hypotheses are true nulls.
pub fn gen_dataset(cfg: &MixtureConfig) -> Result<Dataset> {
    cfg.validate()?;
    let mut rng = Pcg64Mcg::seed_from_u64(cfg.seed);
    let shift = Exp::new(cfg.nu).map_err(|e| Error::param(e.to_string()))?;
    let n_nulls = cfg.n_nulls();
    let hypotheses = (0..cfg.m)
        .map(|i| {
            let (mu, sigma, rho) = if cfg.calibrated {
                (0.0, 1.0, cfg.rho)
            } else {
                let mu: f64 = StandardNormal.sample(&mut rng);
                let e: f64 = Exp1.sample(&mut rng);
                let rho = 1.0 + shift.sample(&mut rng);
                (mu, 1.0 + e, rho)
            };
            let mut draw = |mean: f64| {
                let z: f64 = StandardNormal.sample(&mut rng);
                mean + sigma * z
            };
            let is_null = i < n_nulls;
            let target = if is_null { draw(mu) } else { draw(mu + rho) };
            let decoys = (0..cfg.n_decoys).map(|_| draw(mu)).collect();
            Hypothesis {
                target,
                decoys,
                is_null,
            }
        })
        .collect();
    Ok(Dataset { hypotheses })
}

/// Sorted competition with the ground truth carried along.
#[derive(Debug, Clone, PartialEq)]
pub struct Competition {
    pub seq: CompetitionSequence,
    /// Null flags in sorted order.
    pub is_null: Vec<bool>,
}

impl Competition {
    pub fn new<G: Rng + ?Sized>(data: &Dataset, method: Method, ties: TiePolicy, rng: &mut G) -> Result<Self> {
        let labelled = label_all(&data.records(), method, ties, rng)?;
        let items = labelled
            .into_iter()
            .zip(&data.hypotheses)
            .map(|((w, l), h)| (w, l, h.is_null))
            .collect();
        let (seq, is_null) = CompetitionSequence::from_scored_with(items, rng)?;
        Ok(Competition { seq, is_null })
    }

    /// `(false, true)` target discoveries among the top `k`.
    pub fn discoveries(&self, k: usize) -> (u64, u64) {
        self.seq.labels()[..k]
            .iter()
            .zip(&self.is_null)
            .filter(|(l, _)| **l == Label::Target)
            .fold((0, 0), |(v, s), (_, &null)| if null { (v + 1, s) } else { (v, s + 1) })
    }

    pub fn fdp(&self, k: usize) -> f64 {
        let (v, s) = self.discoveries(k);
        v as f64 / ((v + s).max(1)) as f64
    }

    /// `N_1..N_{d_max}`: true-null target wins before each decoy win. When the
    /// list runs out of decoy wins, the remaining entries hold the final count.
    pub fn null_target_counts(&self, d_max: u64) -> Vec<u64> {
        let mut out = Vec::with_capacity(d_max as usize);
        let mut n = 0;
        for (l, &null) in self.seq.labels().iter().zip(&self.is_null) {
            if out.len() as u64 == d_max {
                break;
            }
            match l {
                Label::Target if null => n += 1,
                Label::Decoy => out.push(n),
                _ => {}
            }
        }
        out.resize(d_max as usize, n);
        out
    }
}

/// True when some `N_d` exceeds `xi_d`.
pub fn band_violated(counts: &[u64], band: &XiBand) -> bool {
    counts
        .iter()
        .zip(1..=band.d_max())
        .any(|(&n, d)| n > band.xi(d))
}

/// Independent per-replicate seed.
pub fn rep_seed(seed: u64, rep: u64) -> u64 {
    let mut z = seed ^ rep.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub mixture: MixtureConfig,
    pub alphas: Vec<f64>,
    pub gamma: f64,
    pub kinds: Vec<BandKind>,
    pub n_reps: usize,
    pub method: Method,
    pub ties: TiePolicy,
    pub mode: UbMode,
}

impl ExperimentConfig {
    pub fn new(mixture: MixtureConfig, alphas: Vec<f64>, gamma: f64, kinds: Vec<BandKind>, n_reps: usize) -> Self {
        ExperimentConfig {
            mixture,
            alphas,
            gamma,
            kinds,
            n_reps,
            method: Method::Max,
            ties: TiePolicy::Random,
            mode: UbMode::Deterministic,
        }
    }

    pub fn params(&self, alpha: f64) -> Result<BandParams> {
        self.method
            .params(self.mixture.n_decoys, self.mixture.m as u64, alpha, self.gamma)
    }

    /// Competition for replicate `rep`, identical to what the harness evaluates.
    pub fn competition(&self, rep: u64) -> Result<Competition> {
        let seed = rep_seed(self.mixture.seed, rep);
        let data = gen_dataset(&MixtureConfig {
            seed,
            ..self.mixture.clone()
        })?;
        let mut rng = Pcg64Mcg::seed_from_u64(seed ^ 0x5bd1_e995);
        Competition::new(&data, self.method, self.ties, &mut rng)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KindRecord {
    pub kind: BandKind,
    pub q: f64,
    pub q_raw: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepRecord {
    pub rep: u64,
    pub alpha: f64,
    pub k_as: usize,
    pub discoveries: u64,
    pub false_discoveries: u64,
    pub fdp: f64,
    pub power: f64,
    /// `D_{k_AS}`.
    pub decoys_at_k: u64,
    pub d_c: u64,
    pub bounds: Vec<KindRecord>,
}

fn run_rep(cfg: &ExperimentConfig, tables: &TableSet, rep: u64) -> Result<Vec<RepRecord>> {
    let comp = cfg.competition(rep)?;
    let n_false_nulls = comp.is_null.iter().filter(|n| !**n).count();
    let mut rng = Pcg64Mcg::seed_from_u64(rep_seed(cfg.mixture.seed, rep) ^ 0x2545_f491);
    cfg.alphas
        .iter()
        .map(|&alpha| {
            let params = cfg.params(alpha)?;
            let k = as_threshold(&comp.seq, &params);
            let (v, s) = comp.discoveries(k);
            let mut bounds = Vec::with_capacity(cfg.kinds.len());
            for &kind in &cfg.kinds {
                let (q, q_raw) = if comp.seq.t_at(k) == 0 {
                    (0.0, 0.0)
                } else {
                    let (b, _) = tdc_bounds(&comp.seq, &params, kind, tables, cfg.mode, &mut rng)?;
                    (b.q_at(k), b.q_raw_at(k))
                };
                bounds.push(KindRecord { kind, q, q_raw });
            }
            Ok(RepRecord {
                rep,
                alpha,
                k_as: k,
                discoveries: v + s,
                false_discoveries: v,
                fdp: comp.fdp(k),
                power: if n_false_nulls == 0 {
                    0.0
                } else {
                    s as f64 / n_false_nulls as f64
                },
                decoys_at_k: comp.seq.d_at(k),
                d_c: dmax_for_fdr(&params),
                bounds,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub config: ExperimentConfig,
    /// Ordered by replicate, then by alpha.
    pub records: Vec<RepRecord>,
}

/// Replicates run in parallel; results are ordered by replicate index.
pub fn run_experiment(cfg: &ExperimentConfig, tables: &TableSet) -> Result<Experiment> {
    cfg.mixture.validate()?;
    if cfg.n_reps == 0 {
        return Err(Error::param("at least one replicate is required"));
    }
    for &alpha in &cfg.alphas {
        cfg.params(alpha)?;
    }
    let per_rep: Vec<Vec<RepRecord>> = (0..cfg.n_reps as u64)
        .into_par_iter()
        .map(|rep| run_rep(cfg, tables, rep))
        .collect::<Result<_>>()?;
    Ok(Experiment {
        config: cfg.clone(),
        records: per_rep.into_iter().flatten().collect(),
    })
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, (var / n).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub alpha: f64,
    /// `None` for statistics that do not depend on the band.
    pub kind: Option<BandKind>,
    pub statistic: &'static str,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSummary {
    pub rows: Vec<SummaryRow>,
}

impl ExperimentSummary {
    pub fn get(&self, alpha: f64, kind: Option<BandKind>, statistic: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.alpha == alpha && r.kind == kind && r.statistic == statistic)
            .map(|r| r.value)
    }

    /// `alpha,kind,statistic,value`, floats at 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("alpha,kind,statistic,value\n");
        for r in &self.rows {
            let kind = r.kind.map_or("all", BandKind::name);
            writeln!(out, "{:.16e},{kind},{},{:.16e}", r.alpha, r.statistic, r.value).unwrap();
        }
        out
    }
}

impl Experiment {
    pub fn for_alpha(&self, alpha: f64) -> impl Iterator<Item = &RepRecord> {
        self.records.iter().filter(move |r| r.alpha == alpha)
    }

    /// Per-rep values of a band-level quantity at `alpha`.
    pub fn kind_values(&self, alpha: f64, kind: BandKind, f: impl Fn(&RepRecord, &KindRecord) -> f64) -> Vec<f64> {
        self.for_alpha(alpha)
            .filter_map(|r| r.bounds.iter().find(|b| b.kind == kind).map(|b| f(r, b)))
            .collect()
    }

    pub fn summary(&self) -> ExperimentSummary {
        let mut rows = Vec::new();
        for &alpha in &self.config.alphas {
            let recs: Vec<&RepRecord> = self.for_alpha(alpha).collect();
            let col = |f: &dyn Fn(&RepRecord) -> f64| recs.iter().map(|r| f(r)).collect::<Vec<f64>>();
            let fdp = col(&|r| r.fdp);
            let (fdr, fdr_se) = mean_se(&fdp);
            let mut push = |kind, statistic, value| {
                rows.push(SummaryRow {
                    alpha,
                    kind,
                    statistic,
                    value,
                })
            };
            push(None, "fdr", fdr);
            push(None, "fdr_se", fdr_se);
            push(None, "median_fdp", median(&fdp));
            push(None, "median_discoveries", median(&col(&|r| r.discoveries as f64)));
            push(None, "median_power", median(&col(&|r| r.power)));
            let short = recs
                .iter()
                .filter(|r| r.k_as > 0 && r.decoys_at_k + 1 > r.d_c)
                .count();
            push(None, "dmax_shortfalls", short as f64);
            for &kind in &self.config.kinds {
                let q = self.kind_values(alpha, kind, |_, b| b.q);
                let q_raw = self.kind_values(alpha, kind, |_, b| b.q_raw);
                let gain = self.kind_values(alpha, kind, |_, b| b.q_raw - b.q);
                let viol = self.kind_values(alpha, kind, |r, b| (r.fdp > b.q) as u8 as f64);
                push(Some(kind), "median_q", median(&q));
                push(Some(kind), "median_q_raw", median(&q_raw));
                push(Some(kind), "median_gain", median(&gain));
                push(Some(kind), "violation_rate", viol.iter().sum::<f64>() / viol.len() as f64);
            }
        }
        ExperimentSummary { rows }
    }
}
