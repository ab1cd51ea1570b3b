"""Forensic parsing of vehicle assistant app artifacts from phone extractions."""

__version__ = "0.1.0"
