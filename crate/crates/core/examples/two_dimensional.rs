//! A disk-shaped positivity set on a 65x65 Dirichlet grid.

use plap_lab::functionals::Problem;
use plap_lab::grid::{build_grid, build_weight, BoundaryCondition, WeightSpec};
use plap_lab::io::write_fields_csv;
use plap_lab::solver::{ground_state, positivity_report, SolveOptions};
use plap_lab::spectrum::{thresholds, EigenOptions};

fn main() -> plap_lab::Result<()> {
    let grid = build_grid(2, &[1.0, 1.0], &[65, 65], BoundaryCondition::Dirichlet)?;
    let spec = WeightSpec::DiskBump2d { center: vec![0.5, 0.5], radius: 0.3, a_plus: 20.0, a_minus: 20.0 };
    let prob = Problem::new(2.0, 1.5, -1.0, build_weight(&grid, &spec)?)?;

    let th = thresholds(&prob, &EigenOptions::default())?;
    println!(
        "lambda1 = {:.4} (continuum 2 pi^2 = {:.4}), lambda* = {:.4}, lambda_* = {:.4}",
        th.lambda_1,
        2.0 * std::f64::consts::PI.powi(2),
        th.lambda_star,
        th.lambda_lower_star
    );

    let start = std::time::Instant::now();
    let rep = ground_state(&prob, &SolveOptions::default())?;
    println!(
        "U+: M = {:.4e}, max {:.4}, residual {:.1e}, {} iterations, {:.2?}",
        rep.i_value.unwrap(),
        rep.field.max(),
        rep.residual,
        rep.iterations,
        start.elapsed()
    );
    let pos = positivity_report(&rep.field, prob.weight(), 1e-6)?;
    println!("positive on the disk: {}, dead share {:.3}", pos.positive_on_plus, pos.dead_core_fraction);

    let path = std::env::temp_dir().join("plap_disk.csv");
    write_fields_csv(&path, &[("u", &rep.field), ("a", prob.weight().values())])?;
    println!("wrote {}", path.display());
    Ok(())
}
