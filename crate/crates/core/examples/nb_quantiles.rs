//! Negative binomial CDF and quantiles underlying the uniform band.

use fdp_bands::dist::NegBin;

fn main() -> Result<(), fdp_bands::error::Error> {
    for r in [0.5, 0.75] {
        println!("R = {r}");
        for d in [1, 2, 5, 20, 100] {
            let nb = NegBin::new(d, r)?;
            let q: Vec<u64> = [0.5, 0.9, 0.95, 0.99]
                .iter()
                .map(|&p| nb.quantile(p))
                .collect::<Result<_, _>>()?;
            println!(
                "  d={d:>3}  mean={:>7.2}  sd={:>6.2}  q50/q90/q95/q99 = {:?}  F(mean)={:.4}",
                nb.mean(),
                nb.variance().sqrt(),
                q,
                nb.cdf(nb.mean().floor() as i64)?
            );
        }
    }

    // the band inverts the survival function: G_d(k) <= u exactly when k > xi_d(u)
    let table = NegBin::new(2, 0.5)?.table()?;
    let u = 0.05;
    let xi = table.upper_quantile(u);
    println!("d=2, u={u}: xi={xi}, G(xi)={:.4}, G(xi+1)={:.4}", table.survival(xi), table.survival(xi + 1));
    Ok(())
}
