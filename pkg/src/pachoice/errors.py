"""Shared exception types."""


class ConfigError(ValueError):
    """Invalid configuration: bad flag/key values or inconsistent settings."""
