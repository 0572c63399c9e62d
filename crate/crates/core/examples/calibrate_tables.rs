//! Calibrate SB and UB quantile tables and write them to disk.
//!
//! cargo run --release --example calibrate_tables -- [OUT] [R] [D_CEILING]

use std::time::Instant;

use fdp_bands::mcquant::{build_tables, SimConfig, TableSet};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let out = args.next().unwrap_or_else(|| "tables.csv".into());
    let r: f64 = args.next().map_or(Ok(0.5), |s| s.parse())?;
    let ceiling: u64 = args.next().map_or(Ok(200), |s| s.parse())?;

    let mut cfg = SimConfig::desk(r, vec![0.01, 0.05, 0.1], 2024);
    cfg.d_ceiling = ceiling;
    let start = Instant::now();
    let (sb, ub) = build_tables(&cfg)?;
    println!("{} paths, d_max up to {ceiling}, R = {r}: {:.2?}", cfg.n_paths, start.elapsed());

    for d in [1, 10, 50, ceiling] {
        let z = sb.sb_z(0.05, d, r)?;
        let row = ub.ub_row(0.05, d, r)?;
        println!("gamma=0.05 d_max={d:>4}  z={z:.4}  rho={:.5}  sigma={:.5}", row.rho, row.sigma);
    }
    TableSet::new(sb, ub).save(&out)?;
    println!("saved to {out}");
    Ok(())
}
