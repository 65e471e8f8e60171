//! One line per acceptance criterion; exits nonzero if any fails.

use isocrystal::verify::criteria;

fn main() {
    let mut failed = 0;
    for c in criteria() {
        let check = c.run();
        let status = if check.pass { "PASS" } else { "FAIL" };
        println!(
            "[{status}] {:>2} {:<26} {:>7} ms  {}",
            check.id, check.name, check.millis, check.detail
        );
        failed += usize::from(!check.pass);
    }
    println!("{} of {} criteria passed", criteria().len() - failed, criteria().len());
    if failed > 0 {
        std::process::exit(1);
    }
}
