//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on failure.

use std::error::Error;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_pcg::Pcg64Mcg;
use rayon::prelude::*;

use fdp_bands::bands::{dmax_for_fdr, kr_constant, vbar_kr, xi_sb, xi_ub, BandKind, BandParams};
use fdp_bands::cli;
use fdp_bands::dist::NegBin;
use fdp_bands::mcquant::{build_tables, SimConfig, TableSet};
use fdp_bands::procedures::{compete, Method, TiePolicy};
use fdp_bands::simulate::{band_violated, gen_dataset, median, run_experiment, Competition, Experiment, ExperimentConfig, MixtureConfig};

type Res<T> = Result<T, Box<dyn Error>>;

struct Check {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: String) -> Res<Check> {
    Ok(Check { pass, detail })
}

fn three_se(p: f64, n: usize) -> f64 {
    3.0 * (p * (1.0 - p) / n as f64).sqrt()
}

struct Fixtures {
    tables_half: TableSet,
    tables_by_decoys: Vec<(usize, TableSet)>,
    table_path: tempfile::TempPath,
    fdr_runs: Experiment,
    tight_run: Experiment,
}

fn tables(r: f64, ceiling: u64, seed: u64) -> Res<TableSet> {
    let mut cfg = SimConfig::desk(r, vec![0.05], seed);
    cfg.n_paths = 100_000;
    cfg.d_ceiling = ceiling;
    let (sb, ub) = build_tables(&cfg)?;
    Ok(TableSet::new(sb, ub))
}

const ALPHAS: [f64; 3] = [0.01, 0.05, 0.1];
const REPS: usize = 10_000;

fn fdr_experiment(n_decoys: usize, tables: &TableSet, seed: u64) -> Res<Experiment> {
    let mut mixture = MixtureConfig::new(500, 0.5, seed);
    mixture.n_decoys = n_decoys;
    let cfg = ExperimentConfig::new(mixture, ALPHAS.to_vec(), 0.05, BandKind::ALL.to_vec(), REPS);
    Ok(run_experiment(&cfg, tables)?)
}

fn fixtures() -> Res<Fixtures> {
    let tables_half = tables(0.5, 200, 20_240_601)?;
    let tables_by_decoys = vec![(3, tables(0.75, 250, 20_240_603)?), (7, tables(0.875, 250, 20_240_607)?)];
    let file = tempfile::NamedTempFile::new()?;
    tables_half.save(file.path())?;
    let fdr_runs = fdr_experiment(1, &tables_half, 6)?;
    let tight = ExperimentConfig::new(MixtureConfig::new(2000, 0.5, 9), vec![0.05], 0.05, BandKind::ALL.to_vec(), 500);
    let tight_run = run_experiment(&tight, &tables_half)?;
    Ok(Fixtures {
        tables_half,
        tables_by_decoys,
        table_path: file.into_temp_path(),
        fdr_runs,
        tight_run,
    })
}

fn c1_kr_constant() -> Res<Check> {
    let c = kr_constant(0.05, 1.0);
    let direct = -(0.05f64).ln() / (1.0 + (1.0 - 0.05f64.powf(1.0)) / 1.0).ln();
    let params = BandParams::tdc(10, 0.1, 0.05)?;
    let seq = fdp_bands::bands::CompetitionSequence::from_labels(vec![fdp_bands::bands::Label::Decoy; 3]);
    let vbar = vbar_kr(&seq, &params);
    let want: Vec<u64> = (1..=3).map(|d| (direct * (1.0 + d as f64)).floor() as u64).collect();
    check(
        (c - 4.48577).abs() <= 1e-5 && (c - direct).abs() <= 1e-12 && vbar == want,
        format!("C={c:.7}, V on three decoys {vbar:?}"),
    )
}

fn binomial_pmf(d: u64, r: f64, k: u64) -> f64 {
    let mut c = 1.0f64;
    for j in 1..=k {
        c *= (d + j - 1) as f64 / j as f64;
    }
    c * r.powi(d as i32) * (1.0 - r).powi(k as i32)
}

fn c2_negative_binomial() -> Res<Check> {
    let mut worst = 0.0f64;
    for r in [0.125, 0.25, 0.5] {
        for d in 1..=50u64 {
            let nb = NegBin::new(d, r)?;
            let mut acc = 0.0;
            for k in 0..=500u64 {
                acc += binomial_pmf(d, r, k);
                worst = worst.max((nb.cdf(k as i64)? - acc).abs());
            }
        }
    }
    let mut lemma_failures = 0usize;
    let mut cases = 0usize;
    for r in [0.125, 0.25, 0.5, 0.75] {
        for d in 1..=20u64 {
            let t = NegBin::new(d, r)?.table()?;
            // band levels live in (0, 1); survival values that round to 1 are excluded
            let mut us: Vec<f64> = (1..=200u64).map(|k| t.survival(k)).filter(|g| *g > 0.0 && *g < 1.0).collect();
            us.extend((1..1000).map(|i| i as f64 / 1000.0));
            for u in us {
                let xi = t.upper_quantile(u);
                for k in 0..=200u64 {
                    cases += 1;
                    if (t.survival(k) <= u) != (k > xi) {
                        lemma_failures += 1;
                    }
                }
            }
        }
    }
    check(
        worst <= 1e-12 && lemma_failures == 0,
        format!("max |cdf - pmf sum| = {worst:.2e}; survival/quantile equivalence failed {lemma_failures} of {cases}"),
    )
}

fn c3_dmax(f: &Fixtures) -> Res<Check> {
    let dc1 = dmax_for_fdr(&BandParams::tdc(2000, 0.05, 0.05)?);
    let dc2 = dmax_for_fdr(&BandParams::tdc(500, 0.1, 0.05)?);
    let runs: Vec<_> = f.fdr_runs.records.iter().filter(|r| r.k_as > 0).collect();
    let bad = runs.iter().filter(|r| r.decoys_at_k + 1 > r.d_c).count();
    check(
        dc1 == 95 && dc2 == 45 && bad == 0 && f.fdr_runs.records.len() >= REPS,
        format!("d_c = {dc1}, {dc2}; D+1 > d_c in {bad} of {} runs with discoveries", runs.len()),
    )
}

fn c4_coverage(f: &Fixtures) -> Res<Check> {
    let n = 10_000usize;
    let d_max = 100;
    let params = BandParams::tdc(400, 0.1, 0.05)?.with_d_max(d_max);
    let sb_table = f.tables_half.sb.as_ref().ok_or("missing SB table")?;
    let ub_table = f.tables_half.ub.as_ref().ok_or("missing UB table")?;
    let sb = xi_sb(&params, sb_table.sb_z(0.05, d_max, 0.5)?);
    let ub = xi_ub(&params, ub_table.ub_row(0.05, d_max, 0.5)?.rho)?;
    let hits: Vec<[bool; 3]> = (0..n as u64)
        .into_par_iter()
        .map(|rep| {
            let data = gen_dataset(&MixtureConfig::new(400, 1.0, 7_000_000 + rep)).unwrap();
            let mut rng = Pcg64Mcg::seed_from_u64(rep);
            let comp = Competition::new(&data, Method::Max, TiePolicy::Random, &mut rng).unwrap();
            let counts = comp.null_target_counts(d_max);
            let kr = vbar_kr(&comp.seq, &params);
            let kr_hit = (1..=comp.seq.len()).any(|i| comp.discoveries(i).0 > kr[i - 1]);
            [band_violated(&counts, &sb), band_violated(&counts, &ub), kr_hit]
        })
        .collect();
    let limit = 0.05 + three_se(0.05, n);
    let freq: Vec<f64> = (0..3).map(|j| hits.iter().filter(|h| h[j]).count() as f64 / n as f64).collect();
    check(
        freq.iter().all(|&x| x <= limit),
        format!("violation frequency SB {:.4}, UB {:.4}, KR {:.4} (limit {limit:.4})", freq[0], freq[1], freq[2]),
    )
}

fn c5_ordering(f: &Fixtures) -> Res<Check> {
    let path = f.table_path.to_str().ok_or("table path")?;
    let mut out = Vec::new();
    cli::run(
        ["fdp-bands", "compare", "--dmax", "100", "--gamma", "0.05", "--c", "0.5", "--lambda", "0.5", "--table", path, "--seed", "1"],
        &mut out,
    )
    .map_err(|e| format!("{e:?}"))?;
    let text = String::from_utf8(out)?;
    let mut bad = Vec::new();
    let mut rows = 0;
    for line in text.lines().skip(1) {
        let v: Vec<u64> = line.split(',').map(str::parse).collect::<Result<_, _>>()?;
        rows += 1;
        if v[0] >= 5 && (v[1] > v[3] || v[2] > v[3]) {
            bad.push(v[0]);
        }
    }
    check(rows == 100 && bad.is_empty(), format!("{rows} rows; d in [5, 100] with SB or UB above KR: {bad:?}"))
}

fn fdr_check(exp: &Experiment) -> (bool, String) {
    let mut ok = true;
    let mut parts = Vec::new();
    for &alpha in &ALPHAS {
        let fdp: Vec<f64> = exp.for_alpha(alpha).map(|r| r.fdp).collect();
        let n = fdp.len() as f64;
        let mean = fdp.iter().sum::<f64>() / n;
        let se = (fdp.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
        ok &= mean <= alpha + 3.0 * se;
        parts.push(format!("alpha {alpha}: {mean:.4} (+3se {:.4})", alpha + 3.0 * se));
    }
    (ok, parts.join("; "))
}

fn validity_check(exp: &Experiment) -> (bool, String) {
    let mut ok = true;
    let mut worst = (0.0, BandKind::Kr, 0.0);
    for &alpha in &ALPHAS {
        for kind in BandKind::ALL {
            let v = exp.kind_values(alpha, kind, |r, b| (r.fdp > b.q) as u8 as f64);
            let f = v.iter().sum::<f64>() / v.len() as f64;
            ok &= f <= 0.05 + three_se(0.05, v.len());
            if f > worst.0 {
                worst = (f, kind, alpha);
            }
        }
    }
    let limit = 0.05 + three_se(0.05, REPS);
    (ok, format!("largest P(FDP > bound) = {:.4} ({} at alpha {}), limit {limit:.4}", worst.0, worst.1, worst.2))
}

fn interpolation_never_hurts(exp: &Experiment) -> usize {
    exp.records
        .iter()
        .flat_map(|r| r.bounds.iter())
        .filter(|b| b.q > b.q_raw)
        .count()
}

fn c6_fdr(f: &Fixtures) -> Res<Check> {
    let (ok, detail) = fdr_check(&f.fdr_runs);
    check(ok, format!("empirical FDR {detail}"))
}

fn c7_validity(f: &Fixtures) -> Res<Check> {
    let (ok, detail) = validity_check(&f.fdr_runs);
    check(ok, detail)
}

fn med(exp: &Experiment, kind: BandKind, g: impl Fn(f64, f64) -> f64) -> f64 {
    median(&exp.kind_values(0.05, kind, |_, b| g(b.q, b.q_raw)))
}

fn c8_interpolation(f: &Fixtures) -> Res<Check> {
    let worse = interpolation_never_hurts(&f.tight_run) + interpolation_never_hurts(&f.fdr_runs);
    let gain = |k| med(&f.tight_run, k, |q, raw| raw - q);
    let (sb, ub, kr) = (gain(BandKind::Sb), gain(BandKind::Ub), gain(BandKind::Kr));
    check(
        worse == 0 && sb < 0.01 && ub < 0.01 && kr > ub,
        format!("interpolated above raw {worse} times; median gain SB {sb:.5}, UB {ub:.5}, KR {kr:.5}"),
    )
}

fn c9_tightness(f: &Fixtures) -> Res<Check> {
    let q = |k| med(&f.tight_run, k, |q, _| q);
    let (sb, ub, kr) = (q(BandKind::Sb), q(BandKind::Ub), q(BandKind::Kr));
    check(ub < kr && sb < kr, format!("median bound SB {sb:.4}, UB {ub:.4}, KR {kr:.4}"))
}

fn c10_multi_decoy(f: &Fixtures) -> Res<Check> {
    let mut ok = true;
    let mut parts = Vec::new();
    for (d, tables) in &f.tables_by_decoys {
        let m = 200_000;
        let mut cfg = MixtureConfig::new(m, 1.0, 31 + *d as u64);
        cfg.n_decoys = *d;
        let data = gen_dataset(&cfg)?;
        let seq = compete(&data.records(), Method::Max, TiePolicy::Random, &mut Pcg64Mcg::seed_from_u64(5))?;
        let p = 1.0 / (*d as f64 + 1.0);
        let freq = seq.t_at(seq.len()) as f64 / m as f64;
        let sym = (freq - p).abs() <= three_se(p, m);

        let exp = fdr_experiment(*d, tables, 100 + *d as u64)?;
        let b = exp.config.params(0.05)?.b();
        let (fdr_ok, fdr) = fdr_check(&exp);
        let (val_ok, val) = validity_check(&exp);
        ok &= sym && fdr_ok && val_ok && (b - 1.0 / *d as f64).abs() < 1e-12;
        parts.push(format!("d={d}: target-win rate {freq:.4} vs {p:.4}; FDR {fdr}; {val}"));
    }
    check(ok, parts.join(" | "))
}

fn main() -> ExitCode {
    let start = Instant::now();
    let fx = match fixtures() {
        Ok(f) => f,
        Err(e) => {
            println!("FAIL fixtures: {e}");
            return ExitCode::FAILURE;
        }
    };
    println!("fixtures built in {:.1?}", start.elapsed());

    type Crit<'a> = (u32, &'static str, Duration, Box<dyn Fn() -> Res<Check> + 'a>);
    let criteria: Vec<Crit> = vec![
        (1, "KR constant", Duration::from_secs(1), Box::new(c1_kr_constant)),
        (2, "negative binomial machinery", Duration::from_secs(10), Box::new(c2_negative_binomial)),
        (3, "d_max formulas and sufficiency", Duration::from_secs(60), Box::new(|| c3_dmax(&fx))),
        (4, "band coverage on pure nulls", Duration::from_secs(300), Box::new(|| c4_coverage(&fx))),
        (5, "band ordering against KR", Duration::from_secs(1), Box::new(|| c5_ordering(&fx))),
        (6, "FDR control", Duration::from_secs(300), Box::new(|| c6_fdr(&fx))),
        (7, "FDP bound validity", Duration::from_secs(600), Box::new(|| c7_validity(&fx))),
        (8, "interpolation", Duration::from_secs(60), Box::new(|| c8_interpolation(&fx))),
        (9, "relative tightness", Duration::from_secs(60), Box::new(|| c9_tightness(&fx))),
        (10, "multi-decoy max method", Duration::from_secs(600), Box::new(|| c10_multi_decoy(&fx))),
    ];
    let mut failed = 0;
    for (id, name, budget, run) in &criteria {
        let t = Instant::now();
        let (pass, detail) = match run() {
            Ok(c) => (c.pass, c.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let took = t.elapsed();
        failed += !pass as u32;
        let status = if pass { "PASS" } else { "FAIL" };
        println!("{status} criterion {id:>2} ({name}): {detail} [{took:.1?}, budget {budget:?}]");
    }
    println!("shared simulation fixtures took {:.1?} in total", start.elapsed());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
