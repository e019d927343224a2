//! Margin-capped masking across an η-grid for the three scenario presets.

use std::time::Instant;

use cogmask::mask::{mask_eta_sweep, MaskingProblem};
use cogmask::scenarios::{generate_experiment, Scenario};

fn main() -> cogmask::Result<()> {
    let etas = [0.0, 0.25, 0.5, 0.75, 1.0];
    for scenario in [Scenario::WaveformU1, Scenario::WaveformU2, Scenario::Beam] {
        let ex = generate_experiment(scenario, 20, 4, 7)?;
        let problem = MaskingProblem::from_dataset(ex.strategy.clone(), &ex.dataset, 0.0);
        let start = Instant::now();
        println!("{}:", scenario.name());
        for r in mask_eta_sweep(&problem, &etas) {
            let r = r?;
            println!(
                "  eta={:.2} loss={:.6e} margin {:.4e} -> {:.4e} (cap {:.4e}) iters={} restorations={}",
                r.eta, r.loss, r.margin_before, r.margin_after, r.cap, r.diagnostics.iterations, r.diagnostics.restorations
            );
        }
        println!("  elapsed {:.1?}", start.elapsed());
    }
    Ok(())
}
