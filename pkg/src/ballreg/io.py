"""BallFile: a small binary container for coefficients, samples and masks.

Layout (all little-endian)::

    offset  size  field
    0       4     magic b"BLC1"
    4       4     endianness marker, uint32 0x01020304
    8       4     L (int32)
    12      4     P (int32)
    16      4     spin (int32)
    20      1     kind: 0 coeffs, 1 samples, 2 mask
    21      1     reality flag
    22      1     complex flag (payload interleaves re/im)
    23      1     reserved (0)
    24      8     tau (float64)
    32      8     aux integer (mask seed, else 0)
    40      8     aux float (mask fraction, else 0)
    48      8     payload length in items (uint64)
    56      ...   payload

Payload items are float64, except for masks which are a packed bit array
(``numpy.packbits`` order, length counted in bits).
"""

from __future__ import annotations

import struct

import numpy as np

from .ball import BallBandProfile, BallCoeffs, BallSamples
from .operators import Mask

__all__ = [
    "BallFileError",
    "BadMagicError",
    "EndiannessError",
    "SizeMismatchError",
    "KindError",
    "HeaderError",
    "MAGIC",
    "write_ballfile",
    "read_ballfile",
]

MAGIC = b"BLC1"
_MARK = 0x01020304
_HEADER = struct.Struct("<4sIiiiBBBBdqdQ")
KINDS = {0: "coeffs", 1: "samples", 2: "mask"}
_KIND_CODES = {v: k for k, v in KINDS.items()}


class BallFileError(Exception):
    """Base class for BallFile format errors."""


class BadMagicError(BallFileError):
    pass


class EndiannessError(BallFileError):
    pass


class SizeMismatchError(BallFileError):
    pass


class KindError(BallFileError):
    pass


class HeaderError(BallFileError):
    pass


def _pack(profile, kind, reality, is_complex, aux_i, aux_f, n):
    return _HEADER.pack(MAGIC, _MARK, profile.L, profile.P, profile.spin, _KIND_CODES[kind],
                        int(reality), int(is_complex), 0, float(profile.tau), int(aux_i),
                        float(aux_f), int(n))


def write_ballfile(obj, path, profile=None):
    """Write BallCoeffs, BallSamples or Mask (with ``profile``) to ``path``."""
    if isinstance(obj, BallCoeffs):
        data = np.ascontiguousarray(obj.values, dtype="<c16").view("<f8").ravel()
        head = _pack(obj.profile, "coeffs", obj.reality, True, 0, 0.0, data.size)
        payload = data.tobytes()
    elif isinstance(obj, BallSamples):
        cplx = np.iscomplexobj(obj.values) and not obj.reality
        if cplx:
            data = np.ascontiguousarray(obj.values, dtype="<c16").view("<f8").ravel()
        else:
            data = np.ascontiguousarray(np.real(obj.values), dtype="<f8").ravel()
        head = _pack(obj.profile, "samples", obj.reality, cplx, 0, 0.0, data.size)
        payload = data.tobytes()
    elif isinstance(obj, Mask):
        if profile is None:
            raise ValueError("profile required to write a mask")
        if obj.keep.shape != profile.sample_shape:
            raise ValueError("mask shape does not match profile")
        bits = np.packbits(obj.keep.ravel())
        head = _pack(profile, "mask", False, False, obj.seed, obj.fraction, obj.keep.size)
        payload = bits.tobytes()
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")
    with open(path, "wb") as fh:
        fh.write(head)
        fh.write(payload)


def read_ballfile(path, expect=None):
    """Read a BallFile.  ``expect`` ("coeffs", "samples", "mask") enforces the kind."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        if raw[:4] != MAGIC[: len(raw[:4])]:
            raise BadMagicError(f"{path}: not a BallFile")
        raise SizeMismatchError(f"{path}: truncated header ({len(raw)} bytes)")
    (magic, mark, L, P, spin, kind_code, reality, is_complex, _res, tau, aux_i, aux_f,
     n) = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise BadMagicError(f"{path}: bad magic {magic!r}")
    if mark != _MARK:
        if mark == 0x04030201:
            raise EndiannessError(f"{path}: big-endian file not supported")
        raise EndiannessError(f"{path}: bad endianness marker {mark:#x}")
    if kind_code not in KINDS:
        raise HeaderError(f"{path}: unknown kind code {kind_code}")
    kind = KINDS[kind_code]
    if expect is not None and kind != expect:
        raise KindError(f"{path}: expected {expect}, file holds {kind}")
    try:
        profile = BallBandProfile(L, P, spin, tau)
    except ValueError as exc:
        raise HeaderError(f"{path}: {exc}") from exc

    body = raw[_HEADER.size:]
    if kind == "mask":
        nbytes = (n + 7) // 8
        if n != profile.n_samples or len(body) != nbytes:
            raise SizeMismatchError(f"{path}: mask payload {len(body)} bytes, expected {nbytes}")
        keep = np.unpackbits(np.frombuffer(body, np.uint8))[:n].astype(bool)
        keep = keep.reshape(profile.sample_shape)
        keep.setflags(write=False)
        return Mask(keep, float(aux_f), int(aux_i))

    shape = profile.coeff_shape if kind == "coeffs" else profile.sample_shape
    expected = int(np.prod(shape)) * (2 if is_complex else 1)
    if n != expected or len(body) != 8 * n:
        raise SizeMismatchError(f"{path}: payload holds {len(body) // 8} values, header {n}, "
                                f"grid needs {expected}")
    data = np.frombuffer(body, "<f8").copy()
    arr = data.view("<c16").reshape(shape) if is_complex else data.reshape(shape)
    if kind == "coeffs":
        return BallCoeffs(profile, arr, reality=bool(reality))
    return BallSamples(profile, arr, reality=bool(reality))
