fn main() {
    std::process::exit(fjmgt::cli::main_entry());
}
