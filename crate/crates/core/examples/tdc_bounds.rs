//! Run TDC on one simulated competition and bound the FDP of its discoveries.

use rand::SeedableRng;
use rand_pcg::Pcg64Mcg;

use fdp_bands::bands::{BandKind, BandParams};
use fdp_bands::mcquant::{build_tables, SimConfig, TableSet, UbMode};
use fdp_bands::procedures::{as_threshold, tdc_bound};
use fdp_bands::simulate::{ExperimentConfig, MixtureConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (alpha, gamma, m) = (0.05, 0.05, 2000);
    let exp = ExperimentConfig::new(MixtureConfig::new(m, 0.5, 42), vec![alpha], gamma, vec![], 1);
    let comp = exp.competition(0)?;
    let params = BandParams::tdc(m as u64, alpha, gamma)?;

    let k = as_threshold(&comp.seq, &params);
    let (false_disc, true_disc) = comp.discoveries(k);
    println!(
        "k_AS={k}  discoveries={}  true FDP={:.4}",
        false_disc + true_disc,
        comp.fdp(k)
    );

    let mut cfg = SimConfig::desk(params.r(), vec![gamma], 1);
    cfg.d_ceiling = 120;
    let (sb, ub) = build_tables(&cfg)?;
    let tables = TableSet::new(sb, ub);
    let mut rng = Pcg64Mcg::seed_from_u64(3);
    for kind in BandKind::ALL {
        let r = tdc_bound(&comp.seq, k, &params, kind, &tables, UbMode::Deterministic, &mut rng)?;
        println!(
            "{kind}: 95% bound on FDP = {:.4} (raw {:.4}, d_max={})",
            r.q_bound, r.q_bound_raw, r.params.d_max
        );
    }
    Ok(())
}
