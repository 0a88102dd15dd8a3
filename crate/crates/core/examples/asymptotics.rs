//! The ground state as lambda varies: ordered and decaying as lambda -> -infinity,
//! blowing up along the principal eigenfunction as lambda -> lambda1.

use plap_lab::functionals::Problem;
use plap_lab::grid::{build_grid, build_weight, BoundaryCondition, WeightSpec};
use plap_lab::solver::Sign;
use plap_lab::verify::{blowup_asymptote, monotonicity_sweep, SweepResult, VerifyOptions};

fn print(r: &SweepResult) {
    println!("{}: {}", r.parameter, r.columns.join(", "));
    for (v, row) in r.values.iter().zip(&r.rows) {
        let cells: Vec<String> = row.iter().map(|x| format!("{x:.4e}")).collect();
        println!("  {v:>6}  {}", cells.join("  "));
    }
    for v in &r.verdicts {
        println!("  {} {:?}: {}", v.property, v.verdict, v.detail);
    }
}

fn main() -> plap_lab::Result<()> {
    let opts = VerifyOptions::default();
    let ball = |bc, radius, amp| -> plap_lab::Result<Problem> {
        let grid = build_grid(1, &[1.0], &[201], bc)?;
        let spec = WeightSpec::DiskBump2d { center: vec![0.5], radius, a_plus: amp, a_minus: amp };
        Problem::new(2.0, 1.5, -1.0, build_weight(&grid, &spec)?)
    };

    let prob = ball(BoundaryCondition::Dirichlet, 0.25, 10.0)?;
    print(&monotonicity_sweep(&prob, &[-64.0, -8.0, -4.0, -2.0, -1.0, -0.5], &opts)?);

    // Neumann with int a > 0: lambda1 = 0 and U+ blows up as lambda -> 0 from below.
    let prob = ball(BoundaryCondition::Neumann, 0.3, 1.0)?;
    print(&blowup_asymptote(&prob, &[-0.4, -0.2, -0.1, -0.05], Sign::Plus, &opts)?);
    Ok(())
}
