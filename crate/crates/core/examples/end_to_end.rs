//! Runs every CLI stage in a temporary directory, exactly as the `lookahead` binary would.

use site_lookahead::cli::main_from;

fn main() {
    let dir = tempfile::tempdir().expect("temp dir");
    let site = dir.path().join("site");
    let site = site.to_str().unwrap();
    let config = format!("{site}/config.toml");
    let stages: Vec<Vec<&str>> = vec![
        vec!["synth", "--out", site],
        vec!["--config", &config, "ingest-scan"],
        vec!["--config", &config, "build-features"],
        vec!["--config", &config, "--fixed-clock", "train"],
        vec!["--config", &config, "--fixed-clock", "forecast"],
        vec!["--config", &config, "report"],
    ];
    for args in stages {
        println!("$ lookahead {}", args.join(" "));
        let code = main_from(std::iter::once("lookahead").chain(args));
        if code != 0 {
            std::process::exit(code);
        }
    }
}
