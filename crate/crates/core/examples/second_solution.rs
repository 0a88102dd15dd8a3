//! Between lambda1 and lambda* a Neumann problem with int a phi1^q < 0 has a second, mountain-pass solution.

use plap_lab::functionals::{ray_max_value, Problem};
use plap_lab::grid::{build_grid, build_weight, BoundaryCondition, WeightSpec};
use plap_lab::solver::{check_second_regime, ground_state, second_solution, SolveOptions};
use plap_lab::spectrum::{thresholds, EigenOptions};

fn main() -> plap_lab::Result<()> {
    let grid = build_grid(1, &[1.0], &[201], BoundaryCondition::Neumann)?;
    let weight = build_weight(&grid, &WeightSpec::TwoBump1d { a_plus: 15.0, a_minus: 15.0, delta: 0.4 })?;
    let base = Problem::new(2.0, 1.5, 0.0, weight)?;
    let th = thresholds(&base, &EigenOptions::default())?;
    println!(
        "lambda1 = {:.4}, lambda* = {:.4}, int a phi1^q = {:.3}",
        th.lambda_1, th.lambda_star, th.phi_weighted_mass
    );

    let opts = SolveOptions::default();
    for lambda in [0.2, 0.4, 0.7] {
        let prob = base.with_lambda(lambda)?;
        check_second_regime(&prob, &th)?;
        let plus = ground_state(&prob, &opts)?;
        let minus = second_solution(&prob, &opts)?;
        println!("lambda = {lambda}");
        println!(
            "  U+: m+ = {:+.4}  I = {:+.4e}  int a U^q = {:+.4e}",
            plus.m_value,
            plus.i_value.unwrap(),
            plus.energies.weighted
        );
        println!(
            "  U-: m- = {:+.4}  I = {:+.4e}  int a U^q = {:+.4e}  ray max {:+.4e}",
            minus.m_value,
            minus.i_value.unwrap(),
            minus.energies.weighted,
            ray_max_value(&prob, &minus.field)?
        );
    }

    // Past lambda* the constrained infimum is negative and the run says so.
    match ground_state(&base.with_lambda(th.lambda_star + 0.2)?, &opts) {
        Ok(_) => println!("unexpected: ground state beyond lambda*"),
        Err(e) => println!("beyond lambda*: {e}"),
    }
    Ok(())
}
