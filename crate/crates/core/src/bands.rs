//! Upper prediction bands on the number of true-null target wins.
//!
//! A band `xi_d` bounds `N_d`, the number of true-null target wins preceding
//! the `d`-th decoy win, simultaneously for `d = 1..=d_max`. It is turned into
//! a band on `V_i` (false target discoveries among the top `i`) and then on the
//! FDP, optionally tightened by interpolation.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::dist::NegBin;
use crate::error::{Error, Result};
use crate::mcquant::{TableKind, TableSet, UbMode};

// absorbs rounding in expressions that are integers in exact arithmetic
const FLOOR_SLACK: f64 = 1e-9;

fn floor_u64(x: f64) -> u64 {
    (x + FLOOR_SLACK).floor().max(0.0) as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Target,
    Decoy,
    Discarded,
}

impl Label {
    pub fn as_i8(self) -> i8 {
        match self {
            Label::Target => 1,
            Label::Decoy => -1,
            Label::Discarded => 0,
        }
    }
}

impl TryFrom<i64> for Label {
    type Error = Error;

    fn try_from(v: i64) -> Result<Self> {
        match v {
            1 => Ok(Label::Target),
            -1 => Ok(Label::Decoy),
            0 => Ok(Label::Discarded),
            other => Err(Error::param(format!("label must be 1, -1 or 0, got {other}"))),
        }
    }
}

/// Ordered competition outcomes with running tallies.
#[derive(Debug, Clone, PartialEq)]
pub struct CompetitionSequence {
    labels: Vec<Label>,
    scores: Option<Vec<f64>>,
    targets: Vec<u64>,
    decoys: Vec<u64>,
}

impl CompetitionSequence {
    /// Labels taken in the given order.
    pub fn from_labels(labels: Vec<Label>) -> Self {
        let mut targets = Vec::with_capacity(labels.len());
        let mut decoys = Vec::with_capacity(labels.len());
        let (mut t, mut d) = (0, 0);
        for l in &labels {
            match l {
                Label::Target => t += 1,
                Label::Decoy => d += 1,
                Label::Discarded => {}
            }
            targets.push(t);
            decoys.push(d);
        }
        CompetitionSequence {
            labels,
            scores: None,
            targets,
            decoys,
        }
    }

    /// Sort by nonincreasing winning score; runs of equal scores are permuted
    /// uniformly at random.
    pub fn from_scored<G: Rng + ?Sized>(items: Vec<(f64, Label)>, rng: &mut G) -> Result<Self> {
        let items = items.into_iter().map(|(w, l)| (w, l, ())).collect();
        Ok(Self::from_scored_with(items, rng)?.0)
    }

    /// As [`from_scored`](Self::from_scored), carrying a payload per entry that
    /// is returned in the sorted order.
    pub fn from_scored_with<T, G: Rng + ?Sized>(mut items: Vec<(f64, Label, T)>, rng: &mut G) -> Result<(Self, Vec<T>)> {
        if let Some((w, _, _)) = items.iter().find(|(w, _, _)| w.is_nan()) {
            return Err(Error::param(format!("winning score {w} is not a number")));
        }
        items.shuffle(rng);
        items.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut scores = Vec::with_capacity(items.len());
        let mut labels = Vec::with_capacity(items.len());
        let mut payload = Vec::with_capacity(items.len());
        for (w, l, t) in items {
            scores.push(w);
            labels.push(l);
            payload.push(t);
        }
        let mut seq = Self::from_labels(labels);
        seq.scores = Some(scores);
        Ok((seq, payload))
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn scores(&self) -> Option<&[f64]> {
        self.scores.as_deref()
    }

    /// `T_1..T_m` (0-based slice: element `i` is `T_{i+1}`).
    pub fn targets(&self) -> &[u64] {
        &self.targets
    }

    /// `D_1..D_m`.
    pub fn decoys(&self) -> &[u64] {
        &self.decoys
    }

    /// `T_k` with `T_0 = 0`.
    pub fn t_at(&self, k: usize) -> u64 {
        if k == 0 {
            0
        } else {
            self.targets[k - 1]
        }
    }

    pub fn d_at(&self, k: usize) -> u64 {
        if k == 0 {
            0
        } else {
            self.decoys[k - 1]
        }
    }
}

/// Competition and confidence parameters shared by all band computations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandParams {
    pub c: f64,
    pub lambda: f64,
    pub m: u64,
    pub alpha: f64,
    pub gamma: f64,
    pub d_max: u64,
}

impl BandParams {
    pub fn new(c: f64, lambda: f64, m: u64, alpha: f64, gamma: f64) -> Result<Self> {
        if !(c > 0.0 && c <= lambda && lambda < 1.0) {
            return Err(Error::param(format!("need 0 < c <= lambda < 1, got c={c}, lambda={lambda}")));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::param(format!("alpha must lie in (0, 1), got {alpha}")));
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::param(format!("gamma must lie in (0, 1), got {gamma}")));
        }
        Ok(BandParams {
            c,
            lambda,
            m,
            alpha,
            gamma,
            d_max: 0,
        })
    }

    /// Single-decoy TDC: `c = lambda = 1/2`.
    pub fn tdc(m: u64, alpha: f64, gamma: f64) -> Result<Self> {
        Self::new(0.5, 0.5, m, alpha, gamma)
    }

    pub fn with_d_max(mut self, d_max: u64) -> Self {
        self.d_max = d_max.min(self.m);
        self
    }

    /// `B = c / (1 - lambda)`.
    pub fn b(&self) -> f64 {
        self.c / (1.0 - self.lambda)
    }

    /// `R = (1 - lambda) / (c + 1 - lambda)`, the decoy-win probability of a true null.
    pub fn r(&self) -> f64 {
        (1.0 - self.lambda) / (self.c + 1.0 - self.lambda)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BandKind {
    Sb,
    Ub,
    Kr,
}

impl BandKind {
    pub const ALL: [BandKind; 3] = [BandKind::Sb, BandKind::Ub, BandKind::Kr];

    pub fn table_kind(self) -> Option<TableKind> {
        match self {
            BandKind::Sb => Some(TableKind::Sb),
            BandKind::Ub => Some(TableKind::Ub),
            BandKind::Kr => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BandKind::Sb => "sb",
            BandKind::Ub => "ub",
            BandKind::Kr => "kr",
        }
    }
}

impl fmt::Display for BandKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BandKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sb" => Ok(BandKind::Sb),
            "ub" => Ok(BandKind::Ub),
            "kr" => Ok(BandKind::Kr),
            other => Err(Error::param(format!("unknown band kind `{other}`"))),
        }
    }
}

/// Integer band `xi_0..=xi_{d_max}` on `N_d`. `xi_0` is 0 for SB and UB.
#[derive(Debug, Clone, PartialEq)]
pub struct XiBand {
    pub kind: BandKind,
    xi: Vec<u64>,
    pub params: BandParams,
}

impl XiBand {
    pub fn d_max(&self) -> u64 {
        self.xi.len() as u64 - 1
    }

    /// `xi_d` for `d <= d_max`.
    pub fn xi(&self, d: u64) -> u64 {
        self.xi[d as usize]
    }

    pub fn values(&self) -> &[u64] {
        &self.xi
    }
}

/// `C = -log(gamma) / log(1 + (1 - gamma^B) / B)`.
pub fn kr_constant(gamma: f64, b: f64) -> f64 {
    -gamma.ln() / (1.0 + (1.0 - gamma.powf(b)) / b).ln()
}

/// `floor(C (1 + B d))`.
pub fn kr_value(constant: f64, b: f64, d: u64) -> u64 {
    floor_u64(constant * (1.0 + b * d as f64))
}

pub fn xi_kr(params: &BandParams) -> XiBand {
    let b = params.b();
    let constant = kr_constant(params.gamma, b);
    XiBand {
        kind: BandKind::Kr,
        xi: (0..=params.d_max).map(|d| kr_value(constant, b, d)).collect(),
        params: *params,
    }
}

fn sb_value(z: f64, b: f64, d: u64) -> u64 {
    let d = d as f64;
    floor_u64(z * (b * (1.0 + b) * d).sqrt() + b * d)
}

/// `floor(z sqrt(B (1 + B) d) + B d)` for `d = 1..=d_max`.
pub fn xi_sb(params: &BandParams, z: f64) -> XiBand {
    let b = params.b();
    let xi = std::iter::once(0)
        .chain((1..=params.d_max).map(|d| sb_value(z, b, d)))
        .collect();
    XiBand {
        kind: BandKind::Sb,
        xi,
        params: *params,
    }
}

fn ub_value(u: f64, r: f64, d: u64) -> Result<u64> {
    Ok(NegBin::new(d, r)?.shared_table()?.upper_quantile(u))
}

/// `1 - u` quantiles of `NB(d, R)` for `d = 1..=d_max`.
pub fn xi_ub(params: &BandParams, u: f64) -> Result<XiBand> {
    if !(0.0..1.0).contains(&u) {
        return Err(Error::param(format!("uniform-band level must lie in [0, 1), got {u}")));
    }
    let r = params.r();
    let mut xi = Vec::with_capacity(params.d_max as usize + 1);
    xi.push(0);
    for d in 1..=params.d_max {
        xi.push(ub_value(u, r, d)?);
    }
    Ok(XiBand {
        kind: BandKind::Ub,
        xi,
        params: *params,
    })
}

/// Convert a band on `N_d` into a band on `V_i`.
///
/// Decoy wins use `xi_{D_i}`, target wins (and discarded entries, which sit
/// before the same next decoy win) use `xi_{D_i + 1}`; past `d_max` the trivial
/// bound `T_i` applies.
pub fn vbar_from_xi(seq: &CompetitionSequence, band: &XiBand) -> Vec<u64> {
    let d_max = band.d_max();
    seq.labels()
        .iter()
        .zip(seq.targets().iter().zip(seq.decoys()))
        .map(|(label, (&t, &d))| match label {
            Label::Decoy if d <= d_max => band.xi(d),
            Label::Target | Label::Discarded if d < d_max => band.xi(d + 1),
            _ => t,
        })
        .collect()
}

/// KR band on `V_i`: `floor(C (1 + B D_i))` at every index.
pub fn vbar_kr(seq: &CompetitionSequence, params: &BandParams) -> Vec<u64> {
    let b = params.b();
    let constant = kr_constant(params.gamma, b);
    seq.decoys().iter().map(|&d| kr_value(constant, b, d)).collect()
}

/// Per-index bounds; all vectors are 0-based (element `i` refers to index `i + 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct FdpBounds {
    pub vbar: Vec<u64>,
    pub gbar: Vec<u64>,
    pub qbar_raw: Vec<f64>,
    pub qbar: Vec<f64>,
}

impl FdpBounds {
    /// Interpolated bound at index `k` (`0` for `k = 0`).
    pub fn q_at(&self, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            self.qbar[k - 1]
        }
    }

    pub fn q_raw_at(&self, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            self.qbar_raw[k - 1]
        }
    }
}

/// Raw FDP band `V_i / (T_i v 1) ^ 1` and its interpolated version
/// `(T_k - G_k) / (T_k v 1) ^ 1` with `G_k = max_{i <= k} (T_i - V_i) v 0`.
pub fn interpolate(seq: &CompetitionSequence, vbar: Vec<u64>) -> FdpBounds {
    assert_eq!(vbar.len(), seq.len(), "band length must match the sequence");
    let mut gbar = Vec::with_capacity(vbar.len());
    let mut qbar_raw = Vec::with_capacity(vbar.len());
    let mut qbar = Vec::with_capacity(vbar.len());
    let mut best = 0i64;
    for (&t, &v) in seq.targets().iter().zip(&vbar) {
        best = best.max(t as i64 - v.min(i64::MAX as u64) as i64);
        let g = best as u64;
        let denom = t.max(1) as f64;
        gbar.push(g);
        qbar_raw.push((v as f64 / denom).min(1.0));
        qbar.push(((t - g) as f64 / denom).min(1.0));
    }
    FdpBounds {
        vbar,
        gbar,
        qbar_raw,
        qbar,
    }
}

/// `d_c = floor(alpha (m + 1) / (alpha + B))`: large enough that
/// `D_{k_AS} + 1 <= d_c` whenever AS makes a discovery.
pub fn dmax_for_fdr(params: &BandParams) -> u64 {
    let x = params.alpha * (params.m as f64 + 1.0) / (params.alpha + params.b());
    let n = x.round();
    let d = if (x - n).abs() < FLOOR_SLACK { n } else { x.floor() };
    (d.max(0.0) as u64).min(params.m)
}

/// Evaluate `xi_{d0}` of the band built with `d_max = d0`.
fn self_referential_xi(params: &BandParams, kind: BandKind, tables: &TableSet, d0: u64) -> Result<u64> {
    let b = params.b();
    let r = params.r();
    match kind {
        BandKind::Kr => Ok(kr_value(kr_constant(params.gamma, b), b, d0)),
        BandKind::Sb => {
            let z = tables.require(TableKind::Sb, params.gamma, r)?.sb_z(params.gamma, d0, r)?;
            Ok(sb_value(z, b, d0))
        }
        BandKind::Ub => {
            let row = tables.require(TableKind::Ub, params.gamma, r)?.ub_row(params.gamma, d0, r)?;
            ub_value(row.rho, r, d0)
        }
    }
}

/// `d_inf = max { d0 <= m : xi^{d0}_{d0} / (m - d0 + 1) <= alpha }` with
/// `xi^0_0 = 0`, scanned literally over every candidate. Uniform bands use the
/// deterministic level here.
pub fn dmax_for_fdp(params: &BandParams, kind: BandKind, tables: &TableSet) -> Result<u64> {
    let m = params.m;
    let ceiling = match kind.table_kind() {
        None => m,
        Some(tk) => tables.require(tk, params.gamma, params.r())?.d_ceiling(params.gamma),
    };
    if ceiling == 0 && m > 0 {
        return Err(Error::Coverage {
            kind: kind.table_kind().unwrap_or(TableKind::Sb),
            gamma: params.gamma,
            d_max: 1,
            r: params.r(),
        });
    }
    let top = m.min(ceiling);
    let holds = |d0: u64| -> Result<bool> {
        let xi = self_referential_xi(params, kind, tables, d0)?;
        Ok(xi as f64 / (m - d0 + 1) as f64 <= params.alpha)
    };
    for d0 in (1..=top).rev() {
        if holds(d0)? {
            if d0 == ceiling && m > ceiling {
                return Err(Error::Coverage {
                    kind: kind.table_kind().unwrap_or(TableKind::Sb),
                    gamma: params.gamma,
                    d_max: ceiling + 1,
                    r: params.r(),
                });
            }
            return Ok(d0);
        }
    }
    Ok(0)
}

/// A band ready to be applied to a sequence.
#[derive(Debug, Clone, PartialEq)]
pub enum Band {
    Kr(BandParams),
    Xi(XiBand),
}

impl Band {
    /// Build the band of `kind` for `params.d_max`, reading calibrated
    /// quantiles from `tables` for SB and UB.
    pub fn build<G: Rng + ?Sized>(
        params: &BandParams,
        kind: BandKind,
        tables: &TableSet,
        mode: UbMode,
        rng: &mut G,
    ) -> Result<Band> {
        let r = params.r();
        if kind == BandKind::Kr {
            return Ok(Band::Kr(*params));
        }
        if params.d_max == 0 {
            let empty = XiBand {
                kind,
                xi: vec![0],
                params: *params,
            };
            return Ok(Band::Xi(empty));
        }
        let band = match kind {
            BandKind::Sb => {
                let z = tables.require(TableKind::Sb, params.gamma, r)?.sb_z(params.gamma, params.d_max, r)?;
                xi_sb(params, z)
            }
            BandKind::Ub => {
                let u = tables
                    .require(TableKind::Ub, params.gamma, r)?
                    .ub_u(params.gamma, params.d_max, r, mode, rng)?;
                xi_ub(params, u)?
            }
            BandKind::Kr => unreachable!(),
        };
        Ok(Band::Xi(band))
    }

    pub fn kind(&self) -> BandKind {
        match self {
            Band::Kr(_) => BandKind::Kr,
            Band::Xi(x) => x.kind,
        }
    }

    pub fn vbar(&self, seq: &CompetitionSequence) -> Vec<u64> {
        match self {
            Band::Kr(p) => vbar_kr(seq, p),
            Band::Xi(x) => vbar_from_xi(seq, x),
        }
    }

    pub fn bounds(&self, seq: &CompetitionSequence) -> FdpBounds {
        interpolate(seq, self.vbar(seq))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mcquant::{QuantileTable, Row, UbRow};

    fn labels(v: &[i64]) -> CompetitionSequence {
        CompetitionSequence::from_labels(v.iter().map(|&l| Label::try_from(l).unwrap()).collect())
    }

    fn params(alpha: f64, m: u64) -> BandParams {
        BandParams::tdc(m, alpha, 0.05).unwrap()
    }

    #[test]
    fn kr_examples() {
        let c = kr_constant(0.05, 1.0);
        let direct = -(0.05f64.ln()) / 1.95f64.ln();
        assert!((c - 4.48577).abs() < 1e-5);
        assert_eq!(c, direct);
        let band = xi_kr(&params(0.05, 200).with_d_max(100));
        assert_eq!(band.xi(0), 4);
        assert_eq!(band.xi(10), 49);
        assert!(band.values().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn sb_examples() {
        let p = params(0.05, 100).with_d_max(9);
        assert_eq!(xi_sb(&p, 3.0).xi(9), 21);
        assert_eq!(xi_sb(&p.with_d_max(5), 0.0).xi(5), 5);
        // B = 1/3 (max method, three decoys): B (1 + B) 9 = 4
        let third = BandParams::new(0.25, 0.25, 100, 0.05, 0.05).unwrap().with_d_max(9);
        assert_eq!(xi_sb(&third, 3.0).xi(9), 9);
    }

    #[test]
    fn ub_examples() {
        let p = params(0.05, 100).with_d_max(2);
        let band = xi_ub(&p, 0.05).unwrap();
        assert_eq!(band.xi(1), 4);
        assert_eq!(band.xi(2), 6);
        let near_one = xi_ub(&p, 1.0 - 1e-12).unwrap();
        assert_eq!(near_one.xi(1), 0);
        assert!(xi_ub(&p, 1.0).is_err());
    }

    #[test]
    fn vbar_examples() {
        let seq = labels(&[1, -1, 1]);
        let band = XiBand {
            kind: BandKind::Sb,
            xi: vec![0, 2, 3],
            params: params(0.05, 3).with_d_max(2),
        };
        assert_eq!(vbar_from_xi(&seq, &band), vec![2, 2, 3]);

        let decoys = labels(&[-1, -1, -1]);
        let band3 = XiBand {
            kind: BandKind::Ub,
            xi: vec![0, 5, 6, 7],
            params: params(0.05, 3).with_d_max(3),
        };
        assert_eq!(vbar_from_xi(&decoys, &band3), vec![5, 6, 7]);

        let targets = labels(&[1, 1, -1, 1]);
        let empty = XiBand {
            kind: BandKind::Sb,
            xi: vec![0],
            params: params(0.05, 4),
        };
        assert_eq!(vbar_from_xi(&targets, &empty), vec![1, 2, 2, 3]);
    }

    #[test]
    fn discarded_entries_use_next_decoy_index() {
        let seq = labels(&[1, 0, -1, 0]);
        let band = XiBand {
            kind: BandKind::Sb,
            xi: vec![0, 2, 3],
            params: params(0.05, 4).with_d_max(2),
        };
        assert_eq!(vbar_from_xi(&seq, &band), vec![2, 2, 2, 3]);
        assert_eq!(seq.targets(), &[1, 1, 1, 1]);
        assert_eq!(seq.decoys(), &[0, 0, 1, 1]);
    }

    #[test]
    fn interpolation_examples() {
        let seq = labels(&[1, -1, 1]);
        let b = interpolate(&seq, vec![2, 2, 1]);
        assert_eq!(b.gbar, vec![0, 0, 1]);
        assert_eq!(b.qbar, vec![1.0, 1.0, 0.5]);

        let seq = labels(&[1, 1, 1]);
        let b = interpolate(&seq, vec![0, 5, 5]);
        assert_eq!(b.gbar, vec![1, 1, 1]);
        assert_eq!(b.qbar[0], 0.0);
        assert_eq!(b.qbar[1], 0.5);
        assert!((b.qbar[2] - 2.0 / 3.0).abs() < 1e-15);

        // bands at or above T everywhere: interpolation is inert
        let seq = labels(&[1, -1, 1, 1]);
        let b = interpolate(&seq, vec![3, 3, 4, 9]);
        assert!(b.gbar.iter().all(|&g| g == 0));
        assert_eq!(b.qbar, b.qbar_raw);
    }

    #[test]
    fn dmax_fdr_examples() {
        assert_eq!(dmax_for_fdr(&params(0.05, 2000)), 95);
        assert_eq!(dmax_for_fdr(&params(0.1, 500)), 45);
        assert_eq!(dmax_for_fdr(&params(0.01, 50)), 0);
    }

    #[test]
    fn dmax_fdp_kr_example() {
        let p = BandParams::tdc(20, 0.25, 0.05).unwrap();
        assert_eq!(dmax_for_fdp(&p, BandKind::Kr, &TableSet::default()).unwrap(), 0);
    }

    fn brute_dinf(p: &BandParams, xi_of: impl Fn(u64) -> u64) -> u64 {
        (0..=p.m)
            .filter(|&d0| {
                let xi = if d0 == 0 { 0 } else { xi_of(d0) };
                xi as f64 / (p.m - d0 + 1) as f64 <= p.alpha
            })
            .max()
            .unwrap()
    }

    fn tiny_tables() -> TableSet {
        let mut sb = QuantileTable::new(TableKind::Sb, 0.5, 0, 100);
        let mut ub = QuantileTable::new(TableKind::Ub, 0.5, 0, 100);
        for d in 1..=30u64 {
            sb.insert(0.05, d, Row::Sb { z: 1.5 + 0.02 * d as f64 }).unwrap();
            let rho = 0.03 / (1.0 + 0.1 * d as f64);
            let row = UbRow {
                rho,
                sigma: rho * 1.2,
                r: 0.045,
                s: 0.055,
            };
            ub.insert(0.05, d, Row::Ub(row)).unwrap();
        }
        TableSet::new(sb, ub)
    }

    #[test]
    fn dmax_fdp_matches_bruteforce() {
        let tables = tiny_tables();
        for m in [10u64, 25, 30] {
            for alpha in [0.2, 0.3, 0.5, 0.9] {
                let p = BandParams::tdc(m, alpha, 0.05).unwrap();
                let got = dmax_for_fdp(&p, BandKind::Ub, &tables).unwrap();
                let want = brute_dinf(&p, |d0| {
                    let u = tables.ub.as_ref().unwrap().ub_row(0.05, d0, 0.5).unwrap().rho;
                    NegBin::new(d0, 0.5).unwrap().table().unwrap().quantile(1.0 - u).unwrap()
                });
                assert_eq!(got, want, "UB m={m} alpha={alpha}");

                let got = dmax_for_fdp(&p, BandKind::Sb, &tables).unwrap();
                let want = brute_dinf(&p, |d0| {
                    let z = 1.5 + 0.02 * d0 as f64;
                    let d = d0 as f64;
                    (z * (2.0 * d).sqrt() + d).floor() as u64
                });
                assert_eq!(got, want, "SB m={m} alpha={alpha}");

                let got = dmax_for_fdp(&p, BandKind::Kr, &tables).unwrap();
                let c = kr_constant(0.05, 1.0);
                let want = brute_dinf(&p, |d0| (c * (1.0 + d0 as f64)).floor() as u64);
                assert_eq!(got, want, "KR m={m} alpha={alpha}");
            }
        }
    }

    #[test]
    fn dmax_fdp_nondecreasing_in_alpha() {
        let tables = tiny_tables();
        for kind in BandKind::ALL {
            let mut last = 0;
            for i in 1..100 {
                let p = BandParams::tdc(30, i as f64 / 100.0, 0.05).unwrap();
                let d = dmax_for_fdp(&p, kind, &tables).unwrap();
                assert!(d >= last, "{kind} alpha={}", p.alpha);
                last = d;
            }
        }
    }

    #[test]
    fn dmax_fdp_coverage_error_past_ceiling() {
        let tables = tiny_tables();
        // condition still holds at the table ceiling of 30 while m is larger
        let p = BandParams::tdc(10_000, 0.5, 0.05).unwrap();
        assert!(matches!(dmax_for_fdp(&p, BandKind::Sb, &tables), Err(Error::Coverage { .. })));
        assert!(matches!(dmax_for_fdp(&p, BandKind::Ub, &TableSet::default()), Err(Error::Coverage { .. })));
    }

    #[test]
    fn band_build_needs_tables() {
        let mut rng = rand::rng();
        let p = params(0.05, 2000).with_d_max(95);
        assert!(Band::build(&p, BandKind::Sb, &TableSet::default(), UbMode::Deterministic, &mut rng)
            .unwrap_err()
            .is_coverage());
        assert!(Band::build(&p, BandKind::Kr, &TableSet::default(), UbMode::Deterministic, &mut rng).is_ok());
        let zero = Band::build(&p.with_d_max(0), BandKind::Ub, &TableSet::default(), UbMode::Deterministic, &mut rng)
            .unwrap();
        let seq = labels(&[1, 1, -1]);
        assert_eq!(zero.vbar(&seq), vec![1, 2, 2]);
    }

    #[test]
    fn scored_sequences_sort_descending() {
        use rand::SeedableRng;
        let mut rng = rand_pcg::Pcg64Mcg::seed_from_u64(1);
        let items = vec![(1.0, Label::Decoy), (3.0, Label::Target), (2.0, Label::Target)];
        let seq = CompetitionSequence::from_scored(items, &mut rng).unwrap();
        assert_eq!(seq.scores().unwrap(), &[3.0, 2.0, 1.0]);
        assert_eq!(seq.labels(), &[Label::Target, Label::Target, Label::Decoy]);
        assert!(CompetitionSequence::from_scored(vec![(f64::NAN, Label::Target)], &mut rng).is_err());
    }

    #[test]
    fn tied_scores_are_permuted() {
        use rand::SeedableRng;
        let mut rng = rand_pcg::Pcg64Mcg::seed_from_u64(2);
        let items: Vec<_> = (0..10).map(|i| (1.0, if i < 5 { Label::Target } else { Label::Decoy })).collect();
        let orders: std::collections::HashSet<Vec<Label>> = (0..20)
            .map(|_| CompetitionSequence::from_scored(items.clone(), &mut rng).unwrap().labels().to_vec())
            .collect();
        assert!(orders.len() > 1);
    }

    proptest::proptest! {
        #[test]
        fn interpolation_never_hurts(raw in proptest::collection::vec((-1i64..=1, 0u64..12), 0..60)) {
            let seq = CompetitionSequence::from_labels(raw.iter().map(|(l, _)| Label::try_from(*l).unwrap()).collect());
            let b = interpolate(&seq, raw.iter().map(|(_, v)| *v).collect());
            for i in 0..seq.len() {
                proptest::prop_assert!(b.qbar[i] <= b.qbar_raw[i]);
                proptest::prop_assert!((0.0..=1.0).contains(&b.qbar[i]));
                if i > 0 {
                    proptest::prop_assert!(b.gbar[i] >= b.gbar[i - 1]);
                }
            }
        }

        #[test]
        fn tallies_consistent(raw in proptest::collection::vec(-1i64..=1, 0..80)) {
            let seq = CompetitionSequence::from_labels(raw.iter().map(|&l| Label::try_from(l).unwrap()).collect());
            let mut zeros = 0;
            for (i, l) in raw.iter().enumerate() {
                if *l == 0 { zeros += 1; }
                proptest::prop_assert_eq!(seq.targets()[i] + seq.decoys()[i] + zeros, i as u64 + 1);
            }
        }
    }
}
