//! Principal eigenpairs against closed forms, then the three thresholds of an indefinite weight.

use plap_lab::functionals::Problem;
use plap_lab::grid::{build_grid, build_weight, BoundaryCondition, WeightSpec};
use plap_lab::spectrum::{principal_eigen, thresholds, EigenOptions};

fn main() -> plap_lab::Result<()> {
    // Dirichlet, p = 2: the discrete Laplacian on M intervals has lambda1 = (4/h^2) sin^2(pi h / 2).
    let m = 200;
    let grid = build_grid(1, &[1.0], &[m + 1], BoundaryCondition::Dirichlet)?;
    let spec = WeightSpec::TwoBump1d { a_plus: 1.0, a_minus: 1.0, delta: 0.4 };
    let prob = Problem::new(2.0, 1.5, 0.0, build_weight(&grid, &spec)?)?;
    let h = 1.0 / m as f64;
    let exact = 4.0 / (h * h) * (std::f64::consts::PI * h / 2.0).sin().powi(2);
    let eig = principal_eigen(&prob)?;
    println!("Dirichlet p=2: lambda1 = {:.12}  closed form {:.12}  rel err {:.1e}", eig.value, exact, (eig.value - exact).abs() / exact);

    // Neumann, any p: lambda1 = 0 with a constant eigenfunction.
    let grid = build_grid(1, &[1.0], &[201], BoundaryCondition::Neumann)?;
    for p in [1.7, 2.0, 3.0] {
        let prob = Problem::new(p, 1.2, 0.0, build_weight(&grid, &spec)?)?;
        let eig = principal_eigen(&prob)?;
        let phi = &eig.minimizer;
        println!("Neumann p={p}: lambda1 = {:.1e}, phi1 spread {:.1e}", eig.value, (phi.max() - phi.min()) / phi.max());
    }

    // lambda1 <= lambda* <= lambda_*; lambda* moves off lambda1 once int a phi1^q < 0.
    for a_minus in [0.5, 1.0, 2.0] {
        let spec = WeightSpec::TwoBump1d { a_plus: 1.0, a_minus, delta: 0.4 };
        let prob = Problem::new(2.0, 1.5, 0.0, build_weight(&grid, &spec)?)?;
        let th = thresholds(&prob, &EigenOptions::default())?;
        println!(
            "a- = {a_minus}: int a phi1^q = {:+.3}  lambda1 = {:.4}  lambda* = {:.4}  lambda_* = {:.4}",
            th.phi_weighted_mass, th.lambda_1, th.lambda_star, th.lambda_lower_star
        );
    }
    Ok(())
}
