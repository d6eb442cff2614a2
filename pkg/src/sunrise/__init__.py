"""SUNRISE: a Runtime Manager and client for containerized simulation experiments."""

__version__ = "0.1.0"
