fn main() {
    std::process::exit(lambda_cavity::cli::main_from_env());
}
