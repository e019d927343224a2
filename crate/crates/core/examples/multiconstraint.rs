//! Vector-constraint feasibility by branch and bound, cross-checked against
//! exhaustive enumeration of active-constraint patterns.

use cogmask::rp::{check_multiconstraint_rationalizable, enumerate_multiconstraint, ConstraintTerm};
use cogmask::scenarios::naive_waveform;
use cogmask::{DatasetKind, ProbeResponseDataset, Strategy};

fn main() -> cogmask::Result<()> {
    let probes = vec![vec![0.6, 1.2, 0.9], vec![1.5, 0.4, 0.8], vec![0.9, 0.9, 2.0], vec![0.3, 1.1, 0.5]];
    let u = Strategy::sqrt_sum();
    let naive: Vec<Vec<f64>> = probes.iter().map(|a| naive_waveform(&u, a)).collect::<cogmask::Result<_>>()?;
    let cap = naive.iter().map(|b| b.iter().map(|x| x * x).sum::<f64>().sqrt()).fold(0.0, f64::max);

    // Naive responses plus a loose norm cap: rationalizable.
    let constraints = [ConstraintTerm::ProbeBudget, ConstraintTerm::NormCap { kappa: 2.0, radius: cap * 1.01 }];
    let d = ProbeResponseDataset::new(DatasetKind::ConstraintKnown, probes.clone(), naive.clone(), None)?;
    report("naive", &d, &constraints)?;

    // Swap two responses: the budget still holds but the choices contradict each other.
    let mut swapped = naive.clone();
    swapped.swap(0, 1);
    let scale = swapped
        .iter()
        .zip(&probes)
        .map(|(b, a)| b.iter().zip(a).map(|(x, y)| x * y).sum::<f64>())
        .fold(0.0, f64::max)
        .max(1.0);
    let swapped: Vec<Vec<f64>> = swapped.iter().map(|b| b.iter().map(|x| x / scale).collect()).collect();
    let d = ProbeResponseDataset::new(DatasetKind::ConstraintKnown, probes, swapped, None)?;
    report("swapped", &d, &constraints)?;
    Ok(())
}

fn report(label: &str, d: &ProbeResponseDataset, cs: &[ConstraintTerm]) -> cogmask::Result<()> {
    let bb = check_multiconstraint_rationalizable(d, cs)?;
    let ex = enumerate_multiconstraint(d, cs)?;
    println!("{label}: branch-and-bound feasible={} enumeration feasible={}", bb.feasible, ex.feasible);
    if let Some(flags) = &bb.active_flags {
        for (t, f) in flags.iter().enumerate() {
            println!("  t={t} active {f:?}");
        }
    }
    Ok(())
}
