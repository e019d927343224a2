//! Margins of the true strategy on naive data, and how they shrink as the
//! responses are pulled toward a common profile.

use cogmask::margins::{margin_constraint, margin_utility};
use cogmask::scenarios::{generate_experiment, Scenario};
use cogmask::DatasetKind;

fn main() -> cogmask::Result<()> {
    for scenario in [Scenario::WaveformU1, Scenario::WaveformU2, Scenario::Beam] {
        let ex = generate_experiment(scenario, 10, 4, 3)?;
        let margin = |d: &cogmask::ProbeResponseDataset| match d.kind() {
            DatasetKind::ConstraintKnown => margin_utility(&ex.strategy, d),
            DatasetKind::UtilityKnown => margin_constraint(&ex.strategy, d),
        };
        let m = margin(&ex.dataset)?;
        println!("{}: margin {:.4e} binding pair {:?}", scenario.name(), m.margin, m.binding_pair);
        let k = ex.dataset.horizon() as f64;
        let mean: Vec<f64> = (0..ex.dataset.dim())
            .map(|i| ex.dataset.responses().iter().map(|b| b[i]).sum::<f64>() / k)
            .collect();
        for w in [0.25, 0.5, 0.75] {
            let blended: Vec<Vec<f64>> = ex
                .dataset
                .responses()
                .iter()
                .map(|b| b.iter().zip(&mean).map(|(x, c)| (1.0 - w) * x + w * c).collect())
                .collect();
            match ex.dataset.with_observed_responses(blended).and_then(|d| margin(&d)) {
                Ok(r) => println!("  blend {w:.2}: margin {:.4e}", r.margin),
                Err(e) => println!("  blend {w:.2}: {e}"),
            }
        }
    }
    Ok(())
}
