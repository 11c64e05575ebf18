//! One line per acceptance criterion; exits nonzero if any fails.

use lacelab_cli::acceptance::criteria;

fn main() {
    let mut failed = Vec::new();
    for c in criteria() {
        let outcome = c.run();
        println!("{}", outcome.line());
        if !outcome.passed {
            failed.push(outcome.id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria passed");
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
