"""Sandbox runner: executes one candidate/input pair per process and
serializes complex runtime values for the driving pipeline."""

__version__ = "0.1.0"
