fn main() {
    std::process::exit(nonsmooth::cli::main_entry());
}
