fn main() {
    std::process::exit(disloc_fix_cli::run(std::env::args_os()));
}
