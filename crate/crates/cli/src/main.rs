fn main() {
    std::process::exit(divfree_cli::run(std::env::args_os()));
}
