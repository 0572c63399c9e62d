//! Replicated normal-mixture experiment: FDR, bound validity and tightness.
//!
//! cargo run --release --example mixture_simulation -- [REPS]

use fdp_bands::bands::BandKind;
use fdp_bands::mcquant::{build_tables, SimConfig, TableSet};
use fdp_bands::simulate::{run_experiment, ExperimentConfig, MixtureConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let reps: usize = std::env::args().nth(1).map_or(Ok(200), |s| s.parse())?;
    let alphas = vec![0.01, 0.05, 0.1];
    let gamma = 0.05;

    let mut tcfg = SimConfig::desk(0.5, vec![gamma], 11);
    tcfg.d_ceiling = 200;
    let (sb, ub) = build_tables(&tcfg)?;
    let tables = TableSet::new(sb, ub);

    let cfg = ExperimentConfig::new(MixtureConfig::new(2000, 0.5, 99), alphas.clone(), gamma, BandKind::ALL.to_vec(), reps);
    let summary = run_experiment(&cfg, &tables)?.summary();
    for alpha in alphas {
        let get = |kind, stat| summary.get(alpha, kind, stat).unwrap();
        println!(
            "alpha={alpha}: FDR={:.4} (se {:.4})  median discoveries={}  median power={:.3}",
            get(None, "fdr"),
            get(None, "fdr_se"),
            get(None, "median_discoveries"),
            get(None, "median_power")
        );
        for kind in BandKind::ALL {
            println!(
                "  {kind}: median bound={:.4}  median interpolation gain={:.4}  P(FDP > bound)={:.3}",
                get(Some(kind), "median_q"),
                get(Some(kind), "median_gain"),
                get(Some(kind), "violation_rate")
            );
        }
    }
    Ok(())
}
