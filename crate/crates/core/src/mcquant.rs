//! Monte-Carlo calibration of the band quantiles.
//!
//! One pass over `n_paths` simulated NB paths yields, for every `d_max` up to
//! the ceiling and every requested `gamma`:
//!
//! * SB: the `1 - gamma` quantile of `max_{d <= d_max} (U_d - B d) / sqrt(B (1 + B) d)`;
//! * UB: the straddling pair `(rho, sigma)` around the `gamma` quantile of
//!   `min_{d <= d_max} G_d(U_d)` together with their empirical masses.
//!
//! Paths are advanced one decoy win at a time for all paths together, so only
//! `O(n_paths)` state is live and each `d` needs one NB table.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Geometric};
use rand_pcg::Pcg64;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::dist::NegBin;
use crate::error::{Error, Result};

pub const DESK_PATHS: u64 = 100_000;
pub const DESK_CEILING: u64 = 1_000;
pub const PRODUCTION_PATHS: u64 = 2_000_000;
pub const PRODUCTION_CEILING: u64 = 50_000;

const FORMAT_TAG: &str = "fdp-bands-table";
const FORMAT_VERSION: &str = "v1";
const HEADER: &str = "kind,R,gamma,dmax,v1,v2,v3,v4";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TableKind {
    Sb,
    Ub,
}

impl fmt::Display for TableKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TableKind::Sb => "SB",
            TableKind::Ub => "UB",
        })
    }
}

/// How the uniform-band level is read from a calibrated row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UbMode {
    /// Always `rho`.
    #[default]
    Deterministic,
    /// `rho` or `sigma` by a coin flip whose mixture has exceedance mass `gamma`.
    Randomized,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n_paths: u64,
    pub d_ceiling: u64,
    pub r: f64,
    pub gammas: Vec<f64>,
    pub seed: u64,
}

impl SimConfig {
    pub fn desk(r: f64, gammas: Vec<f64>, seed: u64) -> Self {
        SimConfig {
            n_paths: DESK_PATHS,
            d_ceiling: DESK_CEILING,
            r,
            gammas,
            seed,
        }
    }

    pub fn production(r: f64, gammas: Vec<f64>, seed: u64) -> Self {
        SimConfig {
            n_paths: PRODUCTION_PATHS,
            d_ceiling: PRODUCTION_CEILING,
            r,
            gammas,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_paths < 1 {
            return Err(Error::param("n_paths must be at least 1"));
        }
        if self.d_ceiling < 1 {
            return Err(Error::param("d_ceiling must be at least 1"));
        }
        if !(self.r > 0.0 && self.r < 1.0) {
            return Err(Error::param(format!("R must lie in (0, 1), got {}", self.r)));
        }
        if self.gammas.is_empty() {
            return Err(Error::param("at least one gamma is required"));
        }
        if let Some(g) = self.gammas.iter().find(|g| !(**g > 0.0 && **g < 1.0)) {
            return Err(Error::param(format!("gamma must lie in (0, 1), got {g}")));
        }
        Ok(())
    }
}

/// Calibrated uniform-band row: `rho < sigma` are adjacent observed values of
/// the cumulative minimum with empirical masses `r <= gamma < s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UbRow {
    pub rho: f64,
    pub sigma: f64,
    pub r: f64,
    pub s: f64,
}

impl UbRow {
    /// No observed value had mass `<= gamma`; `rho` fell back to zero.
    pub fn is_degenerate(&self) -> bool {
        self.r == 0.0
    }

    /// Probability of choosing `rho` in randomized mode, `(s - gamma) / (s - r)`.
    pub fn rho_weight(&self, gamma: f64) -> f64 {
        ((self.s - gamma) / (self.s - self.r)).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Row {
    Sb { z: f64 },
    Ub(UbRow),
}

/// Calibrated quantiles keyed by `(gamma, d_max)` for one band kind and one `R`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileTable {
    kind: TableKind,
    r: f64,
    seed: u64,
    n_paths: u64,
    rows: BTreeMap<(u64, u64), Row>,
}

impl QuantileTable {
    pub fn new(kind: TableKind, r: f64, seed: u64, n_paths: u64) -> Self {
        QuantileTable {
            kind,
            r,
            seed,
            n_paths,
            rows: BTreeMap::new(),
        }
    }

    pub fn kind(&self) -> TableKind {
        self.kind
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn n_paths(&self) -> u64 {
        self.n_paths
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn insert(&mut self, gamma: f64, d_max: u64, row: Row) -> Result<()> {
        match (self.kind, &row) {
            (TableKind::Sb, Row::Sb { z }) if z.is_finite() => {}
            (TableKind::Ub, Row::Ub(ub))
                if ub.rho < ub.sigma && ub.r <= gamma && gamma < ub.s && (0.0..=1.0).contains(&ub.r) && ub.s <= 1.0 => {}
            _ => {
                return Err(Error::param(format!(
                    "row {row:?} is not a valid {} row for gamma={gamma}",
                    self.kind
                )))
            }
        }
        self.rows.insert((gamma.to_bits(), d_max), row);
        Ok(())
    }

    /// Rows in `(gamma, d_max)` order.
    pub fn rows(&self) -> impl Iterator<Item = (f64, u64, &Row)> {
        self.rows.iter().map(|(&(g, d), row)| (f64::from_bits(g), d, row))
    }

    pub fn gammas(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.rows.keys().map(|&(g, _)| f64::from_bits(g)).collect();
        out.dedup();
        out
    }

    /// Largest calibrated `d_max` for this `gamma`, 0 if there is none.
    pub fn d_ceiling(&self, gamma: f64) -> u64 {
        match self.gamma_key(gamma) {
            Some(g) => self.rows.range((g, 0)..=(g, u64::MAX)).next_back().map_or(0, |(&(_, d), _)| d),
            None => 0,
        }
    }

    fn gamma_key(&self, gamma: f64) -> Option<u64> {
        let bits = gamma.to_bits();
        if self.rows.range((bits, 0)..=(bits, u64::MAX)).next().is_some() {
            return Some(bits);
        }
        self.gammas()
            .into_iter()
            .find(|g| (g - gamma).abs() <= 1e-12)
            .map(f64::to_bits)
    }

    fn row(&self, gamma: f64, d_max: u64, r: f64) -> Result<&Row> {
        if (self.r - r).abs() > 1e-9 * r.max(1.0) {
            return Err(Error::RMismatch {
                kind: self.kind,
                table: self.r,
                wanted: r,
            });
        }
        self.gamma_key(gamma)
            .and_then(|g| self.rows.get(&(g, d_max)))
            .ok_or(Error::Coverage {
                kind: self.kind,
                gamma,
                d_max,
                r,
            })
    }

    /// Stored `z` for the standardized band; a missing row is a coverage error.
    pub fn sb_z(&self, gamma: f64, d_max: u64, r: f64) -> Result<f64> {
        match self.row(gamma, d_max, r)? {
            Row::Sb { z } => Ok(*z),
            Row::Ub(_) => Err(self.coverage(gamma, d_max, r)),
        }
    }

    pub fn ub_row(&self, gamma: f64, d_max: u64, r: f64) -> Result<UbRow> {
        match self.row(gamma, d_max, r)? {
            Row::Ub(row) => Ok(*row),
            Row::Sb { .. } => Err(self.coverage(gamma, d_max, r)),
        }
    }

    /// Uniform-band level `u` for `(gamma, d_max)`.
    pub fn ub_u<G: Rng + ?Sized>(&self, gamma: f64, d_max: u64, r: f64, mode: UbMode, rng: &mut G) -> Result<f64> {
        let row = self.ub_row(gamma, d_max, r)?;
        Ok(match mode {
            UbMode::Deterministic => row.rho,
            UbMode::Randomized => {
                if rng.random::<f64>() < row.rho_weight(gamma) {
                    row.rho
                } else {
                    row.sigma
                }
            }
        })
    }

    fn coverage(&self, gamma: f64, d_max: u64, r: f64) -> Error {
        Error::Coverage {
            kind: self.kind,
            gamma,
            d_max,
            r,
        }
    }
}

/// SB and UB tables loaded together; either may be absent.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TableSet {
    pub sb: Option<QuantileTable>,
    pub ub: Option<QuantileTable>,
}

impl TableSet {
    pub fn new(sb: QuantileTable, ub: QuantileTable) -> Self {
        TableSet {
            sb: Some(sb),
            ub: Some(ub),
        }
    }

    pub fn get(&self, kind: TableKind) -> Option<&QuantileTable> {
        match kind {
            TableKind::Sb => self.sb.as_ref(),
            TableKind::Ub => self.ub.as_ref(),
        }
    }

    pub fn require(&self, kind: TableKind, gamma: f64, r: f64) -> Result<&QuantileTable> {
        self.get(kind).ok_or(Error::Coverage {
            kind,
            gamma,
            d_max: 0,
            r,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let tables: Vec<&QuantileTable> = self.sb.iter().chain(self.ub.iter()).collect();
        fs::write(path, render(&tables)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut set = TableSet::default();
        for t in parse(&text)? {
            match t.kind {
                TableKind::Sb => set.sb = Some(t),
                TableKind::Ub => set.ub = Some(t),
            }
        }
        Ok(set)
    }
}

pub fn save_table(table: &QuantileTable, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, render(&[table])?)?;
    Ok(())
}

/// Load a single-kind table file.
pub fn load_table(path: impl AsRef<Path>) -> Result<QuantileTable> {
    let text = fs::read_to_string(path)?;
    let mut tables = parse(&text)?;
    match tables.len() {
        1 => Ok(tables.remove(0)),
        0 => Err(Error::parse(1, "table file holds no rows")),
        _ => Err(Error::param("table file holds several kinds; use TableSet::load")),
    }
}

fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Serialize tables sharing one provenance line.
pub fn render(tables: &[&QuantileTable]) -> Result<String> {
    let first = tables.first().ok_or_else(|| Error::param("nothing to save"))?;
    if tables.iter().any(|t| t.seed != first.seed || t.n_paths != first.n_paths) {
        return Err(Error::param("tables in one file must share seed and path count"));
    }
    let mut out = format!(
        "# {FORMAT_TAG} {FORMAT_VERSION} seed={} npaths={}\n{HEADER}\n",
        first.seed, first.n_paths
    );
    for t in tables {
        for (gamma, d, row) in t.rows() {
            let values = match row {
                Row::Sb { z } => format!("{},,,", fmt17(*z)),
                Row::Ub(u) => format!("{},{},{},{}", fmt17(u.rho), fmt17(u.sigma), fmt17(u.r), fmt17(u.s)),
            };
            out.push_str(&format!("{},{},{},{d},{values}\n", t.kind, fmt17(t.r), fmt17(gamma)));
        }
    }
    let digest = hex::encode(Sha256::digest(out.as_bytes()));
    out.push_str(&format!("# sha256={digest}\n"));
    Ok(out)
}

pub fn parse(text: &str) -> Result<Vec<QuantileTable>> {
    let mut lines = text.lines().enumerate();
    let (_, first) = lines.next().ok_or_else(|| Error::parse(1, "empty table file"))?;
    let mut words = first.split_whitespace();
    if words.next() != Some("#") || words.next() != Some(FORMAT_TAG) {
        return Err(Error::parse(1, "missing table provenance line"));
    }
    match words.next() {
        Some(FORMAT_VERSION) => {}
        other => return Err(Error::Version(other.unwrap_or("").to_string())),
    }
    let mut seed = None;
    let mut n_paths = None;
    for w in words {
        if let Some(v) = w.strip_prefix("seed=") {
            seed = v.parse::<u64>().ok();
        } else if let Some(v) = w.strip_prefix("npaths=") {
            n_paths = v.parse::<u64>().ok();
        }
    }
    let (seed, n_paths) = match (seed, n_paths) {
        (Some(s), Some(n)) => (s, n),
        _ => return Err(Error::parse(1, "provenance line needs seed= and npaths=")),
    };
    match lines.next() {
        Some((_, h)) if h.trim() == HEADER => {}
        _ => return Err(Error::parse(2, format!("expected header `{HEADER}`"))),
    }

    let mut sb: Option<QuantileTable> = None;
    let mut ub: Option<QuantileTable> = None;
    let mut offset = first.len() + 1 + HEADER.len() + 1;
    let mut checksum_seen = false;
    for (idx, line) in lines {
        let lineno = idx + 1;
        if let Some(rest) = line.strip_prefix("# sha256=") {
            let found = hex::encode(Sha256::digest(&text.as_bytes()[..offset]));
            if rest.trim() != found {
                return Err(Error::Checksum {
                    expected: rest.trim().to_string(),
                    found,
                });
            }
            checksum_seen = true;
            offset += line.len() + 1;
            continue;
        }
        if checksum_seen {
            return Err(Error::parse(lineno, "content after checksum line"));
        }
        offset += line.len() + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 8 {
            return Err(Error::parse(lineno, format!("expected 8 columns, found {}", cols.len())));
        }
        let num = |i: usize| -> Result<f64> {
            cols[i]
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::parse(lineno, format!("bad number `{}` in column {}", cols[i], i + 1)))
        };
        let r = num(1)?;
        let gamma = num(2)?;
        let d_max = cols[3]
            .trim()
            .parse::<u64>()
            .map_err(|_| Error::parse(lineno, format!("bad dmax `{}`", cols[3])))?;
        let (slot, kind, row) = match cols[0].trim() {
            "SB" => (&mut sb, TableKind::Sb, Row::Sb { z: num(4)? }),
            "UB" => (
                &mut ub,
                TableKind::Ub,
                Row::Ub(UbRow {
                    rho: num(4)?,
                    sigma: num(5)?,
                    r: num(6)?,
                    s: num(7)?,
                }),
            ),
            other => return Err(Error::parse(lineno, format!("unknown table kind `{other}`"))),
        };
        let table = slot.get_or_insert_with(|| QuantileTable::new(kind, r, seed, n_paths));
        if table.r.to_bits() != r.to_bits() {
            return Err(Error::parse(lineno, "mixed R values within one table kind"));
        }
        table
            .insert(gamma, d_max, row)
            .map_err(|e| Error::parse(lineno, e.to_string()))?;
    }
    if !checksum_seen {
        return Err(Error::parse(text.lines().count(), "missing checksum line (truncated file?)"));
    }
    Ok(sb.into_iter().chain(ub).collect())
}

/// `(U - B d) / sqrt(B (1 + B) d)`.
pub fn standardize(u: u64, d: u64, b: f64) -> f64 {
    let d = d as f64;
    (u as f64 - b * d) / (b * (1.0 + b) * d).sqrt()
}

/// U-path from explicit Bernoulli draws (`true` = target win, `false` = decoy
/// win): `U_d` is the number of target wins before the `d`-th decoy win.
/// Returns `None` if the draws run out before `d_max` decoy wins.
pub fn u_path_from_draws(draws: &[bool], d_max: u64) -> Option<Vec<u64>> {
    let mut path = Vec::with_capacity(d_max as usize);
    let mut wins = 0;
    for &t in draws {
        if path.len() as u64 == d_max {
            break;
        }
        if t {
            wins += 1;
        } else {
            path.push(wins);
        }
    }
    (path.len() as u64 == d_max).then_some(path)
}

fn path_rng(seed: u64, index: u64) -> Pcg64 {
    let state = ((seed as u128) << 64) | (seed ^ 0x9e37_79b9_7f4a_7c15) as u128;
    Pcg64::new(state, index as u128)
}

/// The `index`-th calibration path for `seed`, `U_1..U_{d_max}`.
pub fn sample_u_path(r: f64, d_max: u64, seed: u64, index: u64) -> Result<Vec<u64>> {
    let geo = Geometric::new(r).map_err(|e| Error::param(e.to_string()))?;
    let mut rng = path_rng(seed, index);
    let mut u = 0;
    Ok((0..d_max)
        .map(|_| {
            u += geo.sample(&mut rng);
            u
        })
        .collect())
}

struct PathState {
    rng: Pcg64,
    u: u64,
    max_hat: f64,
    min_tilde: f64,
}

/// ⌈x⌉ with `x` snapped to the nearest integer when within rounding noise.
fn ceil_snap(x: f64) -> usize {
    let n = x.round();
    if (x - n).abs() < 1e-9 {
        n as usize
    } else {
        x.ceil() as usize
    }
}

fn floor_snap(x: f64) -> usize {
    let n = x.round();
    if (x - n).abs() < 1e-9 {
        n as usize
    } else {
        x.floor() as usize
    }
}

/// Order statistic of the running maxima used for SB: rank ⌈(1 - gamma) N⌉.
fn sb_quantile(scratch: &mut [f64], gamma: f64) -> f64 {
    let n = scratch.len();
    let rank = ceil_snap((1.0 - gamma) * n as f64).clamp(1, n);
    *scratch.select_nth_unstable_by(rank - 1, f64::total_cmp).1
}

/// Straddling pair around the `gamma`-quantile of the running minima.
fn ub_quantile(scratch: &mut [f64], gamma: f64) -> UbRow {
    let n = scratch.len();
    let k = floor_snap(gamma * n as f64).min(n - 1);
    let (left, &mut sigma, right) = scratch.select_nth_unstable_by(k, f64::total_cmp);
    let below = left.iter().filter(|&&v| v < sigma);
    let (count_below, rho) = below.fold((0usize, f64::NEG_INFINITY), |(c, m), &v| (c + 1, m.max(v)));
    let at_or_below = k + 1 + right.iter().filter(|&&v| v <= sigma).count();
    let nf = n as f64;
    let s = at_or_below as f64 / nf;
    if count_below == 0 {
        UbRow {
            rho: 0.0,
            sigma,
            r: 0.0,
            s,
        }
    } else {
        UbRow {
            rho,
            sigma,
            r: count_below as f64 / nf,
            s,
        }
    }
}

/// Simulate the calibration paths and fill SB and UB tables for every
/// `d_max <= d_ceiling` and every requested `gamma`.
pub fn build_tables(cfg: &SimConfig) -> Result<(QuantileTable, QuantileTable)> {
    cfg.validate()?;
    let b = (1.0 - cfg.r) / cfg.r;
    let geo = Geometric::new(cfg.r).map_err(|e| Error::param(e.to_string()))?;
    let mut states: Vec<PathState> = (0..cfg.n_paths)
        .map(|j| PathState {
            rng: path_rng(cfg.seed, j),
            u: 0,
            max_hat: f64::NEG_INFINITY,
            min_tilde: 1.0,
        })
        .collect();
    let mut sb = QuantileTable::new(TableKind::Sb, cfg.r, cfg.seed, cfg.n_paths);
    let mut ub = QuantileTable::new(TableKind::Ub, cfg.r, cfg.seed, cfg.n_paths);
    let mut scratch = vec![0.0f64; states.len()];

    for d in 1..=cfg.d_ceiling {
        let nb = NegBin::new(d, cfg.r)?.table()?;
        let scale = (b * (1.0 + b) * d as f64).sqrt();
        let mean = b * d as f64;
        states.par_iter_mut().with_min_len(1024).for_each(|p| {
            p.u += geo.sample(&mut p.rng);
            p.max_hat = p.max_hat.max((p.u as f64 - mean) / scale);
            p.min_tilde = p.min_tilde.min(nb.survival(p.u));
        });

        scratch.par_iter_mut().zip(states.par_iter()).for_each(|(s, p)| *s = p.max_hat);
        for &gamma in &cfg.gammas {
            sb.insert(gamma, d, Row::Sb { z: sb_quantile(&mut scratch, gamma) })?;
        }
        scratch.par_iter_mut().zip(states.par_iter()).for_each(|(s, p)| *s = p.min_tilde);
        for &gamma in &cfg.gammas {
            ub.insert(gamma, d, Row::Ub(ub_quantile(&mut scratch, gamma)))?;
        }
    }
    Ok((sb, ub))
}
