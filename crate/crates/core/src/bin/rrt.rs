fn main() {
    std::process::exit(rrt_core::cli::main_with_args(std::env::args_os()));
}
