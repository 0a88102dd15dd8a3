//! lambda*(q) -> lambda*(p) as q -> p, and the empirical positivity thresholds q0 and delta0.

use plap_lab::functionals::Problem;
use plap_lab::grid::{build_grid, build_weight, BoundaryCondition, WeightSpec};
use plap_lab::verify::{positivity_delta_sweep, positivity_q_sweep, q0_trend, q_limit_lambda_star, VerifyOptions};

fn main() -> plap_lab::Result<()> {
    let opts = VerifyOptions::default();
    let grid = build_grid(1, &[1.0], &[201], BoundaryCondition::Neumann)?;
    let two_bump = |a_minus| WeightSpec::TwoBump1d { a_plus: 15.0, a_minus, delta: 0.4 };

    let prob = Problem::new(2.0, 1.5, 0.0, build_weight(&grid, &two_bump(15.0))?)?;
    let r = q_limit_lambda_star(&prob, &[1.5, 1.75, 1.9, 1.95], &opts)?;
    println!("{}", r.notes[0]);
    for (q, row) in r.values.iter().zip(&r.rows) {
        println!("  q = {q:<5} lambda* = {:.6}  gap {:.3e}", row[0], row[1]);
    }

    let prob = Problem::new(2.0, 1.5, 0.0, build_weight(&grid, &two_bump(45.0))?)?;
    let qs = [1.2, 1.5, 1.8, 1.95];
    let r = positivity_q_sweep(&prob, &qs, &opts)?;
    let dead = r.column("dead_fraction").unwrap();
    for (q, d) in qs.iter().zip(&dead) {
        println!("  q = {q:<5} dead share {d:.3}");
    }
    println!("q0 at lambda = 0: {:?}", r.threshold);
    let trend = q0_trend(&prob, &[-0.5, -1.0, -2.0], &qs, &opts)?;
    println!("q0 for lambda = -0.5, -1, -2: {:?}", trend.column("q0").unwrap());

    let r = positivity_delta_sweep(&prob.with_lambda(-1.0)?, &[1.0, 0.3, 0.1, 0.03], &opts)?;
    println!("delta0 at lambda = -1: {:?}", r.threshold);
    Ok(())
}
