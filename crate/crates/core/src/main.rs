fn main() {
    std::process::exit(cxd::cli::main_entry());
}
