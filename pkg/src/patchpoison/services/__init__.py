"""Directory-level orchestration behind the CLI commands."""
