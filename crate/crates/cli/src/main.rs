fn main() {
    std::process::exit(fluxlattice_cli::cli::main_with_args(std::env::args_os()));
}
