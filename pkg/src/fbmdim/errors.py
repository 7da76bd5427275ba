"""Exception types shared across the package."""


class SynthesisError(RuntimeError):
    """Raised when the circulant embedding is not usable for sampling.

    The message names the fallback (direct covariance factorization) so the
    caller can retry with ``generator="cholesky"``.
    """


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to reach the requested tolerance."""


class CacheFormatError(ValueError):
    """A binary path-cache file is malformed or truncated."""


class ConfigError(ValueError):
    """An experiment configuration is invalid or inconsistent."""
