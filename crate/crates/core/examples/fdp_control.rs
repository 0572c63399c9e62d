//! Report the largest list whose FDP is at most alpha with probability 1 - gamma.

use rand::SeedableRng;
use rand_pcg::Pcg64Mcg;

use fdp_bands::bands::{dmax_for_fdp, BandKind, BandParams};
use fdp_bands::mcquant::{build_tables, SimConfig, TableSet, UbMode};
use fdp_bands::procedures::{as_threshold, fdp_control_threshold};
use fdp_bands::simulate::{ExperimentConfig, MixtureConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (alpha, gamma, m) = (0.1, 0.05, 2000);
    let exp = ExperimentConfig::new(MixtureConfig::new(m, 0.5, 8), vec![alpha], gamma, vec![], 1);
    let comp = exp.competition(0)?;
    let params = BandParams::tdc(m as u64, alpha, gamma)?;

    let mut cfg = SimConfig::desk(params.r(), vec![gamma], 5);
    cfg.d_ceiling = 300;
    let (sb, ub) = build_tables(&cfg)?;
    let tables = TableSet::new(sb, ub);

    let k_as = as_threshold(&comp.seq, &params);
    println!("FDR control (TDC): {} discoveries, FDP {:.4}", comp.seq.t_at(k_as), comp.fdp(k_as));
    let mut rng = Pcg64Mcg::seed_from_u64(0);
    for kind in BandKind::ALL {
        let d_inf = dmax_for_fdp(&params, kind, &tables)?;
        let r = fdp_control_threshold(&comp.seq, &params, kind, &tables, UbMode::Deterministic, &mut rng)?;
        println!(
            "FDP control ({kind}, d_max={d_inf}): k0={} discoveries={} bound={:.4} true FDP={:.4}",
            r.k_threshold,
            r.n_discoveries,
            r.q_bound,
            comp.fdp(r.k_threshold)
        );
    }
    Ok(())
}
