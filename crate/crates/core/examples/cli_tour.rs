//! Drives the `p2h` front end in-process and lists the artifacts it writes.
//!
//! `cargo run --release --example cli_tour -- /tmp/p2h-tour`

use std::path::{Path, PathBuf};

use p2_hierarchy::cli;

/// Runs a fixed set of invocations into `dir`; returns `(artifact, exit code)`.
pub fn run_example(dir: &Path) -> std::io::Result<Vec<(PathBuf, i32)>> {
    std::fs::create_dir_all(dir)?;
    let path_file = dir.join("path.json");
    std::fs::write(&path_file, r#"{"start":[-30,52],"segments":[{"arc":{"center":[0,0],"sweep":-0.3}}]}"#)?;
    let runs: Vec<(&str, Vec<String>)> = vec![
        ("p24.tex", vec!["gen-eq".into(), "--n".into(), "2".into()]),
        ("series.json", "series --n 1 --kind infty --K 6 --alpha 0 --format json".split(' ').map(String::from).collect()),
        ("zero.json", "series --n 2 --kind zero --K 8 --alpha formal".split(' ').map(String::from).collect()),
        ("u1.txt", "transform-eq --n 1 --format text".split(' ').map(String::from).collect()),
        ("sectors.json", "sectors --n 2".split(' ').map(String::from).collect()),
        ("rates.csv", "rates --n 2".split(' ').map(String::from).collect()),
        (
            "arc.csv",
            vec![
                "integrate".into(),
                "--n".into(),
                "1".into(),
                "--path".into(),
                path_file.display().to_string(),
                "--spacing".into(),
                "1".into(),
            ],
        ),
        ("bad.json", "gen-eq --n 0".split(' ').map(String::from).collect()),
    ];
    let mut out = Vec::new();
    for (name, args) in runs {
        let target = dir.join(name);
        let mut argv = vec!["p2h".to_string(), "--out".into(), target.display().to_string()];
        argv.extend(args);
        let code = cli::run(argv);
        println!("{:<14} exit {code}", name);
        out.push((target, code));
    }
    Ok(out)
}

#[allow(dead_code)]
fn main() -> std::io::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("p2h-tour"));
    run_example(&dir).map(|_| ())
}
