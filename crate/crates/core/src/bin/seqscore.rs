fn main() -> std::process::ExitCode {
    seqscore::cli::main()
}
