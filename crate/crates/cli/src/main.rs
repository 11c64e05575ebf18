use std::io;
use std::path::Path;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let (mut out, mut err) = (io::stdout().lock(), io::stderr().lock());
    // `lacelab run <file>` replays an experiment file.
    let code = match args.get(1).map(String::as_str) {
        Some("run") if args.len() == 3 => lacelab_cli::run_spec_file(Path::new(&args[2]), &mut out, &mut err),
        _ => lacelab_cli::run(args, &mut out, &mut err),
    };
    std::process::exit(code);
}
