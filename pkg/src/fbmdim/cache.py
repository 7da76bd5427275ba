"""Binary path-cache format.

Layout (all little-endian):

    magic      4 bytes  b"MFBM"
    version    u16      format version, currently 1
    h          f64      Hurst index
    N          u32      horizon exponent
    r          u32      resolution exponent
    seed       u64
    generator  u8       0 = circulant_embedding, 1 = cholesky
    count      u64      number of samples (2^(N+r) + 1)
    samples    count * f64
"""

import struct
from pathlib import Path

import numpy as np

from .errors import CacheFormatError
from .fbm import FbmPath, HurstIndex

__all__ = ["write_path_cache", "read_path_cache", "MAGIC", "FORMAT_VERSION"]

MAGIC = b"MFBM"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sHdIIQBQ")
_GENERATOR_CODES = {"circulant_embedding": 0, "cholesky": 1}
_GENERATOR_NAMES = {v: k for k, v in _GENERATOR_CODES.items()}


def write_path_cache(path_obj: FbmPath, filename) -> None:
    """Serialize an FbmPath to ``filename``."""
    header = _HEADER.pack(
        MAGIC,
        FORMAT_VERSION,
        path_obj.h.h,
        path_obj.horizon_exponent,
        path_obj.resolution_exponent,
        path_obj.seed,
        _GENERATOR_CODES[path_obj.generator_id],
        path_obj.samples.size,
    )
    with open(filename, "wb") as fh:
        fh.write(header)
        fh.write(path_obj.samples.astype("<f8", copy=False).tobytes())


def read_path_cache(filename) -> FbmPath:
    """Read an FbmPath back, validating magic, version, and sample count."""
    raw = Path(filename).read_bytes()
    if len(raw) < _HEADER.size:
        raise CacheFormatError(f"{filename}: truncated header ({len(raw)} bytes)")
    magic, version, h, n, r, seed, gen_code, count = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise CacheFormatError(f"{filename}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != FORMAT_VERSION:
        raise CacheFormatError(f"{filename}: unsupported format version {version}")
    if gen_code not in _GENERATOR_NAMES:
        raise CacheFormatError(f"{filename}: unknown generator id {gen_code}")
    if count != 2 ** (n + r) + 1:
        raise CacheFormatError(f"{filename}: sample count {count} inconsistent with N={n}, r={r}")
    body = raw[_HEADER.size :]
    expected_bytes = count * 8
    if len(body) != expected_bytes:
        raise CacheFormatError(f"{filename}: expected {expected_bytes} sample bytes, found {len(body)}")
    samples = np.frombuffer(body, dtype="<f8").astype(np.float64)
    return FbmPath(
        h=HurstIndex(h),
        horizon_exponent=n,
        resolution_exponent=r,
        samples=samples,
        seed=seed,
        generator_id=_GENERATOR_NAMES[gen_code],
    )
