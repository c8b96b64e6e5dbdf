class NetworkError(ValueError):
    """Malformed network, dataset or mixture, or mismatched inputs."""


class GuardError(RuntimeError):
    """A size guard tripped (too many models or global structures to materialize)."""
