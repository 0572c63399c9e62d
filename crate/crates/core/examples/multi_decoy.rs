//! Several decoys per hypothesis with the max method.

use rand::SeedableRng;
use rand_pcg::Pcg64Mcg;

use fdp_bands::bands::BandKind;
use fdp_bands::mcquant::{build_tables, SimConfig, TableSet, UbMode};
use fdp_bands::procedures::{as_threshold, assign_label_multi, tdc_bound, Method, MultiDecoyInput, TiePolicy};
use fdp_bands::simulate::{ExperimentConfig, MixtureConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = Pcg64Mcg::seed_from_u64(1);
    let input = MultiDecoyInput {
        target_score: 10.0,
        decoy_scores: vec![7.0, 9.0, 12.0],
        method: Method::Max,
        tie_policy: TiePolicy::Random,
    };
    let (w, label) = assign_label_multi(&input, &mut rng)?;
    println!("target 10 vs decoys [7, 9, 12]: W={w}, label={}", label.as_i8());

    let (alpha, gamma, m, d) = (0.05, 0.05, 2000, 3);
    let mut mixture = MixtureConfig::new(m, 0.5, 21);
    mixture.n_decoys = d;
    let exp = ExperimentConfig::new(mixture, vec![alpha], gamma, vec![], 1);
    let params = exp.params(alpha)?;
    println!("{d} decoys: c = lambda = {}, B = {:.4}, R = {}", params.c, params.b(), params.r());

    let comp = exp.competition(0)?;
    let k = as_threshold(&comp.seq, &params);
    println!("k_AS={k} discoveries={} true FDP={:.4}", comp.seq.t_at(k), comp.fdp(k));

    let mut cfg = SimConfig::desk(params.r(), vec![gamma], 2);
    cfg.d_ceiling = 300;
    let (sb, ub) = build_tables(&cfg)?;
    let tables = TableSet::new(sb, ub);
    for kind in BandKind::ALL {
        let r = tdc_bound(&comp.seq, k, &params, kind, &tables, UbMode::Deterministic, &mut rng)?;
        println!("{kind}: bound={:.4} (d_max={})", r.q_bound, r.params.d_max);
    }
    Ok(())
}
