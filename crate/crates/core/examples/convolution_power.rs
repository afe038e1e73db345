//! Convolution powers of the jump measure: the Gaussian closed form and the
//! two-sided saddle-point envelope.

use levybridge::convdens::{laplace_log_density, proposition_bounds, sandwich_onset, ConvolutionTable};
use levybridge::RVFunction;
use std::f64::consts::PI;

fn main() -> levybridge::Result<()> {
    // for f(x) = x² every power is Gaussian
    let gauss = ConvolutionTable::build(&RVFunction::power(2.0)?, 1, 8, 12.0, 256)?;
    let mut worst = 0.0f64;
    for m in 1..=8 {
        let mf = m as f64;
        for i in 0..=120 {
            let r = 0.1 * i as f64;
            let exact = 0.5 * (mf - 1.0) * PI.ln() - 0.5 * mf.ln() - r * r / mf;
            worst = worst.max((gauss.log_density(m, r) - exact).abs());
        }
    }
    println!("α = 2: largest deviation from the Gaussian closed form {worst:.2e}");

    let delta = 0.2;
    for alpha in [1.5, 3.0] {
        let fun = RVFunction::power(alpha)?;
        let table = ConvolutionTable::build(&fun, 1, 8, 40.0, 256)?;
        println!("\nα = {alpha}, δ = {delta}");
        println!("{:>3} {:>8} {:>12} {:>12} {:>12} {:>12}", "m", "onset", "ln ν*m(30)", "lower", "upper", "laplace");
        for m in 2..=8 {
            let env = proposition_bounds(&fun, 1, m, 30.0, delta)?;
            println!(
                "{m:>3} {:>8.3} {:>12.4} {:>12.4} {:>12.4} {:>12.4}",
                sandwich_onset(&table, m, delta).unwrap_or(f64::NAN),
                table.log_density(m, 30.0),
                env.lower,
                env.upper,
                laplace_log_density(&fun, 1, m, 30.0).unwrap_or(f64::NAN)
            );
        }
    }
    Ok(())
}
