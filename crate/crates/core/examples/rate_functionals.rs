//! Entropy rate of piecewise linear paths and of finite-dimensional marginals.

use levybridge::bridge::{BridgeConfig, TimeScale};
use levybridge::ldp::{finite_dim_rate, path_rate};
use levybridge::RVFunction;

fn main() -> levybridge::Result<()> {
    let cfg = BridgeConfig::new(RVFunction::power(2.0)?, 2, -10.0, TimeScale::Rho(0.0), 1.0, vec![1.0, 1.0], 0)?;
    let x = cfg.endpoint().to_vec();
    let at = |s: f64| x.iter().map(|v| s * v).collect::<Vec<_>>();

    let linear = path_rate(&cfg, &[(0.0, at(0.0)), (1.0, at(1.0))])?;
    println!("linear path: {}", linear.value);

    let fast_start = path_rate(&cfg, &[(0.0, at(0.0)), (0.25, at(0.5)), (1.0, at(1.0))])?;
    println!("half the way in a quarter of the time: {:.6}", fast_start.value);

    let pause = path_rate(&cfg, &[(0.0, at(0.0)), (0.3, at(0.5)), (0.7, at(0.5)), (1.0, at(1.0))])?;
    println!("pause in the middle: {:.6}", pause.value);

    let detour = finite_dim_rate(&cfg, &[0.5], &[vec![0.7, 0.3]])?;
    println!("off the segment: {} {:?}", detour.value, detour.violations);

    let back = finite_dim_rate(&cfg, &[0.3, 0.6], &[at(0.6), at(0.4)])?;
    println!("moving backwards: {} {:?}", back.value, back.violations);

    let marginals = finite_dim_rate(&cfg, &[0.2, 0.9], &[at(0.1), at(0.8)])?;
    println!("two marginals: {:.6}", marginals.value);
    println!("as JSON: {}", serde_json::to_string(&detour).expect("serializable"));
    Ok(())
}
