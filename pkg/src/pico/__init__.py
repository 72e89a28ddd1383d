"""PiCo pipelines: parse, type-check, lower to dataflow graphs and run."""

__version__ = "0.1.0"
