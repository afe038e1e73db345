//! Marginal density of the compound Poisson process: grid evaluation, the
//! Laplace expansion, and the estimates in terms of g.

use levybridge::asymptotic::{AsymptoticMarginal, LogMarginal};
use levybridge::marginal::{density_solver, theorem_density_bounds, MarginalDensity, MarginalOptions};
use levybridge::RVFunction;

fn main() -> levybridge::Result<()> {
    let fun = RVFunction::power(2.0)?;
    let t = 4.0;
    let md = MarginalDensity::build(&fun, 1, t, 70.0, MarginalOptions::default())?;
    let laplace = AsymptoticMarginal::new(&fun, 1)?;
    let sol = density_solver(&fun, 1)?;
    println!("t = {t}, mixture truncated at m = {}, total mass {:.12}", md.m_cap(), md.total_mass() + md.log_atom().exp());
    println!("{:>5} {:>12} {:>12} {:>12} {:>12} {:>6} {:>8}", "r", "ln μ grid", "laplace", "lower", "upper", "m*", "r/g");
    for r in [10.0, 20.0, 30.0, 40.0, 50.0, 60.0] {
        let v = md.eval(r)?;
        let (lo, hi) = theorem_density_bounds(&sol, r, t, 0.5)?;
        let g = sol.solve((r / t).ln())?;
        println!(
            "{r:>5} {:>12.5} {:>12.5} {lo:>12.5} {hi:>12.5} {:>6} {:>8.2}",
            v.log_density,
            laplace.log_density(t, r)?.total(),
            v.dominant_m,
            r / g
        );
    }
    let tail = md.tail_estimate(&sol, 40.0, 0.5)?;
    println!("\nln P(|L_t| > 40) = {:.5}, stated envelope [{:.3}, {:.3}]", tail.log_tail, tail.lower, tail.upper);
    Ok(())
}
