fn main() {
    std::process::exit(vln::cli::main_with_args(std::env::args_os()));
}
