//! As the negative part of the weight grows, the ground state dies on the middle of the
//! negativity set; an explicit barrier confirms the dead core by comparison.

use plap_lab::deadcore::{box_nodes, build_barrier, comparison_check, split_bumps, sweep_n, BarrierSpec, SweepNOptions};
use plap_lab::functionals::Problem;
use plap_lab::grid::{build_grid, build_weight, scale_negative_part, BoundaryCondition, WeightSpec};
use plap_lab::solver::SolveOptions;

fn main() -> plap_lab::Result<()> {
    let grid = build_grid(1, &[1.0], &[201], BoundaryCondition::Neumann)?;
    let weight = build_weight(&grid, &WeightSpec::TwoBump1d { a_plus: 15.0, a_minus: 15.0, delta: 0.4 })?;
    let omega = box_nodes(&grid, &[0.4], &[0.6])?;
    let schedule = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0, 256.0];

    for lambda in [0.0, -1.0] {
        let prob = Problem::new(2.0, 1.5, lambda, weight.clone())?;
        let sw = sweep_n(&prob, &schedule, &omega, &SolveOptions::default(), &SweepNOptions::default())?;
        println!("lambda = {lambda}: n0 = {:?}", sw.n0);
        println!("  {:>5} {:>10} {:>11} {:>9}", "n", "max U", "M", "coverage");
        for r in &sw.rows {
            println!("  {:>5} {:>10.4} {:>11.3e} {:>9.3}", r.n, r.solution.max(), r.m_total, r.coverage);
        }

        let Some(n0) = sw.n0 else { continue };
        let row = sw.rows.iter().find(|r| r.n == n0).unwrap();
        let spec = BarrierSpec::for_problem(&prob, vec![0.5], 0.1, 0.25, n0)?;
        let barrier = build_barrier(prob.weight(), &spec)?;
        let cmp = comparison_check(&row.solution, &barrier, None)?;
        println!(
            "  barrier k = {:.3e}, beta = {}: comparison passed = {}",
            spec.amplitude,
            spec.beta,
            cmp.passed()
        );
        let pn = prob.with_weight(scale_negative_part(prob.weight(), n0)?)?;
        for (k, b) in split_bumps(&row.solution, 1e-6, &pn)?.iter().enumerate() {
            println!("  bump {k}: {} nodes, residual {:.1e}", b.support.len(), b.residual);
        }
    }
    Ok(())
}
