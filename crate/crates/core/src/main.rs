fn main() {
    std::process::exit(shrinker_lab::cli::main_exit_code());
}
