"""Experiment engine: configuration, checks, output files and the CLI."""
