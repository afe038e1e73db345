//! Solves the functional equation for g across several orders of ln Λ and
//! compares the variants.

use levybridge::gsolver::{asymptotic_g_limit, FunctionalEquationSpec, GSolution, LimitDiagnostics, Variant};
use levybridge::RVFunction;

fn main() -> levybridge::Result<()> {
    let alpha = 2.0;
    let fun = RVFunction::power(alpha)?;
    let general = GSolution::new(FunctionalEquationSpec::new(fun, 1, Variant::General))?;
    let simplified = GSolution::new(FunctionalEquationSpec::new(fun, 1, Variant::Simplified))?;
    let g_zero = GSolution::new(FunctionalEquationSpec::new(fun, 1, Variant::GZero))?;
    println!("solvable for ln Λ ≥ {:.4}", general.log_lambda_floor());
    println!("{:>10} {:>14} {:>14} {:>14} {:>12}", "ln Λ", "general", "simplified", "g-zero", "residual");
    for log_lambda in [10.0, 100.0, 1e3, 1e4, 1e6] {
        let g = general.solve(log_lambda)?;
        println!(
            "{log_lambda:>10} {g:>14.9} {:>14.9} {:>14.9} {:>12.2e}",
            simplified.solve(log_lambda)?,
            g_zero.solve(log_lambda)?,
            general.residual(log_lambda, g)
        );
    }

    let limit = asymptotic_g_limit(alpha);
    let targets = LimitDiagnostics::targets(alpha).as_array();
    println!("\nlimit ratios (targets {targets:?})");
    for log_lambda in [1e2, 1e4, 1e6] {
        let d = general.limit_diagnostics(log_lambda)?.as_array();
        let growth = general.solve(log_lambda)? / log_lambda.powf(1.0 / alpha) / limit;
        println!("ln Λ = {log_lambda:>8}: {d:.5?}  g/((ln Λ)^(1/α)(α-1)^(-1/α)) = {growth:.5}");
    }

    println!("\ng(L)[f'(g(yL)) - f'(g(L))] - ln y");
    for log_lambda in [1e2, 1e3, 1e4] {
        let mut line = format!("ln Λ = {log_lambda:>6}:");
        for y in [0.5, 2.0, 5.0] {
            line += &format!("  y = {y}: {:+.3e}", general.cancellation_defect(log_lambda, y, 1.0)?);
        }
        println!("{line}");
    }
    Ok(())
}
