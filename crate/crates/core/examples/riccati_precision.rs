//! Stationary Kalman covariance from the algebraic Riccati equation, and the
//! precision probes a beam allocator sees for targets of varying agility.

use cogmask::scenarios::{
    are_solve, naive_beam, predicted_precision_probe, LinearGaussianSystem, PredictionHorizon, TargetModel,
};
use nalgebra::DMatrix;

fn main() -> cogmask::Result<()> {
    let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 0.95]);
    let c = DMatrix::identity(2, 2);
    let sys = LinearGaussianSystem::from_precisions(a, c, &[2.0, 1.0], &[1.5, 0.5])?;
    let s = are_solve(&sys)?;
    println!("stationary covariance:{s}");
    println!("fixed-point residual {:.2e}", (sys.riccati_map(&s) - &s).norm());

    let targets: Vec<TargetModel> = [0.5, 1.0, 2.0, 4.0]
        .iter()
        .map(|&q| TargetModel {
            a: DMatrix::from_row_slice(2, 2, &[0.9, 0.1, 0.0, 0.8]),
            q: DMatrix::identity(2, 2) * q,
            sigma0: DMatrix::identity(2, 2) * q,
        })
        .collect();
    for horizon in [PredictionHorizon::Steps(1), PredictionHorizon::Steps(5), PredictionHorizon::Asymptotic] {
        let alpha = predicted_precision_probe(&targets, horizon)?;
        let beta = naive_beam(&alpha, 2.0, 1.0)?;
        let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" ");
        println!("{horizon:?}: precision [{}] beams [{}]", fmt(&alpha), fmt(&beta));
    }
    Ok(())
}
