fn main() {
    std::process::exit(sparse_sysid::cli::main_with_args(std::env::args_os()));
}
