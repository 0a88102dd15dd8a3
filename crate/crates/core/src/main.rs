fn main() -> std::process::ExitCode {
    plap_lab::cli::main()
}
