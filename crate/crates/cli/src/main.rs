fn main() {
    std::process::exit(g2v_cli::run(std::env::args_os().collect()));
}
