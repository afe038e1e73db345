//! Standardized jump count and jump size of sampled bridges against their
//! normal limits.

use levybridge::bridge::{BridgeConfig, BridgeModel, BridgeOptions, TimeScale};
use levybridge::ldp::{exact_count_moments, jump_statistics};
use levybridge::RVFunction;

fn main() -> levybridge::Result<()> {
    let cfg = BridgeConfig::new(RVFunction::power(2.0)?, 1, 0.02f64.ln(), TimeScale::Rho(0.0), 1.0, vec![1.0], 1)?;
    let model = BridgeModel::new(cfg.clone(), BridgeOptions::default())?;
    let paths = model.sample_many(0, 20_000)?;
    let stats = jump_statistics(&cfg, &paths)?;
    let s = &stats.summary;
    println!("g = {:.6}, m_center = {:.4}, k = {:.5} (without |ln ε|: {:.5}), S(ε) = {:.5}",
        stats.typical_jump, stats.m_center, stats.k_scale, stats.k_scale_short, stats.speed);
    println!("N: mean {:.4}, variance {:.4}", s.counts.mean, s.counts.variance);
    let c = &s.standardized_counts;
    println!("standardized N: mean {:+.4} ± {:.4}, variance {:.4}", c.mean, c.stderr, c.variance);
    let (mean, var) = exact_count_moments(&model)?;
    println!("  exact under the bridge law: mean {mean:+.4}, variance {var:.4}");
    for (i, w) in s.standardized_increments.iter().enumerate() {
        println!("standardized W[{i}]: mean {:+.4} ± {:.4}, variance {:.4}", w.mean, w.stderr, w.variance);
    }
    println!("E|W| / g = {:.4}, E[N] E|W| ε/|x| = {:.4}", s.mean_jump_ratio, s.balance);
    println!("Metropolis fallback used on {:.3}% of paths", 100.0 * s.metropolis_fraction);
    Ok(())
}
