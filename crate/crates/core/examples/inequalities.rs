//! The two pointwise inequalities behind uniqueness, sampled at random.

use plap_lab::verify::{inequality_suite, InequalityOptions};

fn main() -> plap_lab::Result<()> {
    let r = inequality_suite(&InequalityOptions::default())?;
    for v in &r.verdicts {
        println!("{:<11} {:?}: {}", v.property, v.verdict, v.detail);
    }
    Ok(())
}
