//! The three integer bands on N_d side by side.
//!
//! cargo run --release --example compare_bands -- [B]

use fdp_bands::bands::{xi_kr, xi_sb, xi_ub, BandParams};
use fdp_bands::mcquant::{build_tables, SimConfig, UbMode};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let b: f64 = std::env::args().nth(1).map_or(Ok(1.0), |s| s.parse())?;
    // c = lambda with c / (1 - lambda) = B
    let c = b / (1.0 + b);
    let gamma = 0.05;
    let d_max = 100;
    let params = BandParams::new(c, c, d_max, 0.5, gamma)?.with_d_max(d_max);

    let mut cfg = SimConfig::desk(params.r(), vec![gamma], 7);
    cfg.d_ceiling = d_max;
    let (sb_table, ub_table) = build_tables(&cfg)?;
    let z = sb_table.sb_z(gamma, d_max, params.r())?;
    let u = ub_table.ub_u(gamma, d_max, params.r(), UbMode::Deterministic, &mut rand::rng())?;

    let sb = xi_sb(&params, z);
    let ub = xi_ub(&params, u)?;
    let kr = xi_kr(&params);
    println!("B={b} gamma={gamma} d_max={d_max}  z={z:.4} u={u:.5}");
    println!("{:>4} {:>6} {:>6} {:>6}", "d", "SB", "UB", "KR");
    for d in [1, 2, 3, 5, 10, 20, 40, 60, 80, 100] {
        println!("{d:>4} {:>6} {:>6} {:>6}", sb.xi(d), ub.xi(d), kr.xi(d));
    }
    Ok(())
}
