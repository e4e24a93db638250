fn main() -> std::process::ExitCode {
    chimera_bm::cli::main()
}
