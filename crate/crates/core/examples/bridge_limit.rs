//! Small-ε behaviour: the speed function, convergence of the scaled bridge
//! log-density to the entropy rate, and the tail-constant consistency.

use levybridge::bridge::{Backend, BridgeConfig, BridgeModel, BridgeOptions, TimeScale};
use levybridge::ldp::{dtilde_consistency, scaled_bridge_logdensity_defect, speed_function};
use levybridge::RVFunction;

fn main() -> levybridge::Result<()> {
    let fun = RVFunction::power(2.0)?;
    let opts = BridgeOptions {
        backend: Backend::Asymptotic,
        ..BridgeOptions::default()
    };
    println!("{:>8} {:>12} {:>14} {:>14} {:>14}", "ln 1/ε", "S(ε)", "defect y=x/2", "defect y=3x/4", "off segment");
    for l in [20.0, 30.0, 40.0, 50.0, 60.0] {
        let on = BridgeModel::new(BridgeConfig::new(fun, 1, -l, TimeScale::Rho(0.0), 1.0, vec![1.0], 0)?, opts)?;
        let off = BridgeModel::new(BridgeConfig::new(fun, 2, -l, TimeScale::Rho(0.0), 1.0, vec![1.0, 0.0], 0)?, opts)?;
        println!(
            "{l:>8} {:>12.4e} {:>14.4e} {:>14.6} {:>14.6}",
            speed_function(on.config())?,
            scaled_bridge_logdensity_defect(&on, 0.5, &[0.5])?,
            scaled_bridge_logdensity_defect(&on, 0.5, &[0.75])?,
            scaled_bridge_logdensity_defect(&off, 0.5, &[0.5, 0.3])?
        );
    }

    let s = |rho: f64| -> levybridge::Result<f64> {
        speed_function(&BridgeConfig::new(fun, 1, -100.0, TimeScale::Rho(rho), 1.0, vec![1.0], 0)?)
    };
    println!("\nS(ε; ρ = 0.5) / S(ε; ρ = 0) at ε = e^-100: {:.6}", s(0.5)? / s(0.0)?);

    println!("\n{:>8} {:>14} {:>14}", "ln 1/ε", "with 1/g", "leading");
    for l in [1e1, 1e2, 1e3, 1e4, 1e5] {
        let d = dtilde_consistency(&BridgeConfig::new(fun, 1, -l, TimeScale::Rho(0.0), 1.0, vec![1.0], 0)?)?;
        println!("{l:>8} {:>14.8} {:>14.8}", d.ratio_with_correction, d.ratio_leading);
    }
    Ok(())
}
