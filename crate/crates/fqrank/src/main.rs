fn main() {
    std::process::exit(fqrank::cli_main());
}
