fn main() {
    std::process::exit(c3d_cli::run(std::env::args_os()));
}
