//! For lambda < 0 every start reaches the same ground state. With two bumps separated by a dead
//! core, starts seeded on a single bump settle on one-bump solutions: other nonnegative solutions
//! exist, they just are not minimizers (their m is larger).

use plap_lab::functionals::Problem;
use plap_lab::grid::{build_grid, build_weight, scale_negative_part, BoundaryCondition, WeightSpec};
use plap_lab::verify::{uniqueness_multistart, VerifyOptions};

fn main() -> plap_lab::Result<()> {
    let opts = VerifyOptions::default();
    let grid = build_grid(1, &[1.0], &[201], BoundaryCondition::Dirichlet)?;

    let connected = build_weight(
        &grid,
        &WeightSpec::DiskBump2d { center: vec![0.5], radius: 0.25, a_plus: 10.0, a_minus: 10.0 },
    )?;
    let r = uniqueness_multistart(&Problem::new(2.0, 1.5, -1.0, connected)?, &opts)?;
    for v in &r.verdicts {
        println!("connected: {} {:?} ({})", v.property, v.verdict, v.detail);
    }

    let two = build_weight(&grid, &WeightSpec::TwoBump1d { a_plus: 15.0, a_minus: 15.0, delta: 0.4 })?;
    let prob = Problem::new(2.0, 1.5, -1.0, scale_negative_part(&two, 64.0)?)?;
    let r = uniqueness_multistart(&prob, &opts)?;
    let m = r.column("m_plus").unwrap();
    let basin = r.column("basin").unwrap();
    for ((s, m), b) in r.values.iter().zip(&m).zip(&basin) {
        println!("two bumps, n = 64: start {s} -> m = {m:.6}, basin {b}");
    }
    for n in &r.notes {
        println!("  {n}");
    }
    for v in &r.verdicts {
        println!("  {} {:?}", v.property, v.verdict);
    }
    Ok(())
}
