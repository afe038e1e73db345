//! Exact sampling of the compound Poisson bridge and comparison with the
//! analytic count law and bridge marginal.

use levybridge::bridge::{BridgeConfig, BridgeModel, BridgeOptions, TimeScale};
use levybridge::RVFunction;

fn main() -> levybridge::Result<()> {
    let cfg = BridgeConfig::new(RVFunction::power(2.0)?, 1, 0.05f64.ln(), TimeScale::Rho(0.0), 1.0, vec![1.0], 2024)?;
    println!("Λ = |x|/ε = {}, r_ε T = {}", cfg.lambda(), cfg.total_time());
    let model = BridgeModel::new(cfg, BridgeOptions::default())?;
    let paths = model.sample_many(0, 20_000)?;

    let pmf = model.count_log_pmf()?;
    let mut freq = vec![0usize; pmf.len()];
    for p in &paths {
        freq[p.count - 1] += 1;
    }
    println!("\n{:>3} {:>10} {:>10}", "m", "exact", "sampled");
    for (i, lp) in pmf.iter().enumerate().filter(|(_, lp)| lp.exp() > 1e-3) {
        println!("{:>3} {:>10.5} {:>10.5}", i + 1, lp.exp(), freq[i] as f64 / paths.len() as f64);
    }

    let worst = paths.iter().map(|p| (p.jump_sum()[0] - 20.0).abs()).fold(0.0, f64::max);
    println!("\nlargest endpoint residual {worst:.2e}");

    // bridge marginal at t = 1/2 against a histogram of the sampled positions
    let eps = model.config().epsilon();
    let positions: Vec<f64> = paths.iter().map(|p| p.position(0.5, eps)[0]).collect();
    let (lo_atom, hi_atom) = model.endpoint_atoms(0.5)?;
    println!("atoms at t = 1/2: P(Y = 0) = {:.3e}, P(Y = x) = {:.3e}", lo_atom.exp(), hi_atom.exp());
    println!("{:>6} {:>10} {:>10}", "y", "density", "histogram");
    let width = 0.1;
    for k in 1..10 {
        let y = k as f64 * width;
        let hits = positions.iter().filter(|&&v| (v - y).abs() < width / 2.0).count();
        println!(
            "{y:>6.2} {:>10.4} {:>10.4}",
            model.bridge_marginal_logdensity(0.5, &[y])?.exp(),
            hits as f64 / paths.len() as f64 / width
        );
    }
    println!("\nfirst path: {}", serde_json::to_string(&paths[0]).expect("serializable"));
    Ok(())
}
