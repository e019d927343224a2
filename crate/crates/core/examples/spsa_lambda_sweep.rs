//! SPSA masking against the noisy detector: loss and conditional Type-I
//! error versus the trade-off weight λ, medians over seeds.

use std::time::Instant;

use cogmask::detect::{DetectorConfig, NoiseModel};
use cogmask::mask::MaskingProblem;
use cogmask::scenarios::{generate_experiment, Scenario};
use cogmask::spsa::{spsa_lambda_sweep, SpsaConfig};

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) }
}

fn main() -> cogmask::Result<()> {
    let lambdas = [0.0, 1.0, 10.0, 100.0, 1000.0];
    let seeds = 0..5u64;
    for scenario in [Scenario::WaveformU1, Scenario::Beam] {
        for gamma in [0.05, 0.1, 0.2] {
            let start = Instant::now();
            let mut losses = vec![Vec::new(); lambdas.len()];
            let mut errs = vec![Vec::new(); lambdas.len()];
            for seed in seeds.clone() {
                let ex = generate_experiment(scenario, 10, 4, seed)?;
                let problem = MaskingProblem::from_dataset(ex.strategy, &ex.dataset, 0.0);
                let noise = NoiseModel::gaussian(0.3, 4)?;
                let detector = DetectorConfig { significance: gamma, seed, ..Default::default() };
                let base = SpsaConfig { seed, ..Default::default() };
                for (i, cell) in spsa_lambda_sweep(&problem, &noise, &detector, &base, &lambdas)?.iter().enumerate() {
                    losses[i].push(cell.loss);
                    errs[i].push(cell.type1);
                }
            }
            println!("{} gamma={gamma} ({:.1?})", scenario.name(), start.elapsed());
            for (i, l) in lambdas.iter().enumerate() {
                println!(
                    "  lambda={l:<7} loss={:.4e} cond_type1={:.3}",
                    median(losses[i].clone()),
                    median(errs[i].clone())
                );
            }
        }
    }
    Ok(())
}
