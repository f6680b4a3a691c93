//! Pairing the rank field of point masses with the adjoint of the reconstruction operator.
use georank::measures::Measure;
use georank::rankfield::RankEvaluator;
use georank::reconstruct::{verify_identity_on_test_function, TestFunction};

fn main() -> georank::Result<()> {
    let cases = [
        ("d=1, delta_0", vec![vec![0.0]], TestFunction::bump(vec![0.2], 1.0)),
        (
            "d=3, two atoms",
            vec![vec![0.3, -0.2, 0.1], vec![-0.4, 0.0, 0.2]],
            TestFunction {
                center: vec![0.0; 3],
                radius: 1.0,
                poly: vec![1.0, 0.4],
            },
        ),
        (
            "d=3, bump away from the atom",
            vec![vec![0.0; 3]],
            TestFunction::bump(vec![2.0, 0.0, 0.0], 0.8),
        ),
    ];
    for (name, atoms, psi) in cases {
        let ev = RankEvaluator::exact(Measure::empirical(atoms, None)?)?;
        let c = verify_identity_on_test_function(&psi, &ev)?;
        println!(
            "{name:<30} <R, L*psi> = {:>16.12}   E[psi(Z)] = {:>16.12}   residual {:.1e}",
            c.lhs, c.rhs, c.residual
        );
    }
    Ok(())
}
