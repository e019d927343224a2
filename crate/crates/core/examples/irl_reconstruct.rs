//! Feasibility test, reconstruction and relative-optimality check on a
//! generated dataset, then the same test on a file holding a GARP cycle.

use cogmask::rp::{
    check_constraint_rationalizable, check_utility_rationalizable, reconstruct_strategy, relative_optimality_check,
};
use cogmask::scenarios::{generate_experiment, Scenario};
use cogmask::{DatasetKind, ProbeResponseDataset};

fn test(d: &ProbeResponseDataset) -> cogmask::Result<cogmask::rp::FeasibilityCertificate> {
    match d.kind() {
        DatasetKind::ConstraintKnown => check_utility_rationalizable(d),
        DatasetKind::UtilityKnown => check_constraint_rationalizable(d),
    }
}

fn main() -> cogmask::Result<()> {
    for scenario in [Scenario::WaveformU1, Scenario::Beam] {
        let ex = generate_experiment(scenario, 8, 3, 21)?;
        let cert = test(&ex.dataset)?;
        println!("{} ({}): feasible={} residual={:.2e}", scenario.name(), ex.dataset.kind().as_str(), cert.feasible, cert.lp_residual);
        let rec = reconstruct_strategy(&cert, &ex.dataset)?;
        println!("  reconstruction with {} pieces, relative optimality: {}", rec.pieces(), relative_optimality_check(&rec, &ex.dataset));
        let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(" ");
        println!("  offsets [{}]", fmt(&rec.offsets));
        println!("  slopes  [{}]", fmt(&rec.slopes.iter().map(|s| s[0]).collect::<Vec<_>>()));
    }

    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/garp_violation.txt");
    let garp = ProbeResponseDataset::load(path)?;
    let cert = test(&garp)?;
    println!("garp_violation.txt: feasible={}", cert.feasible);
    Ok(())
}
