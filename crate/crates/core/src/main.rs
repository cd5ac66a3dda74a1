fn main() -> std::process::ExitCode {
    ces_doa::cli::main()
}
