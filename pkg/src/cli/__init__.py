"""Command-line layer: experiment config, verify suites, benchmark and subcommand handlers."""
