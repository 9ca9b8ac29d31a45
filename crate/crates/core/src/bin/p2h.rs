fn main() {
    std::process::exit(p2_hierarchy::cli::run(std::env::args_os()));
}
