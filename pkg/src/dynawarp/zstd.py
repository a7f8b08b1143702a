"""Minimal ctypes binding to the system zStandard library.

Produces and consumes standard zstd frames (RFC 8878). Only the one-shot
compress/decompress entry points are needed; frames written here record
the content size, so decompression can allocate exactly.
"""

from __future__ import annotations

import ctypes
import ctypes.util

DEFAULT_LEVEL = 3

_lib = None


class ZstdUnavailableError(RuntimeError):
    pass


def _load():
    global _lib
    if _lib is not None:
        return _lib
    name = ctypes.util.find_library("zstd") or "libzstd.so.1"
    try:
        lib = ctypes.CDLL(name)
    except OSError as exc:
        raise ZstdUnavailableError(
            "libzstd is not available; use the 'none' codec") from exc
    lib.ZSTD_compressBound.restype = ctypes.c_size_t
    lib.ZSTD_compressBound.argtypes = [ctypes.c_size_t]
    lib.ZSTD_compress.restype = ctypes.c_size_t
    lib.ZSTD_compress.argtypes = [ctypes.c_void_p, ctypes.c_size_t,
                                  ctypes.c_char_p, ctypes.c_size_t, ctypes.c_int]
    lib.ZSTD_decompress.restype = ctypes.c_size_t
    lib.ZSTD_decompress.argtypes = [ctypes.c_void_p, ctypes.c_size_t,
                                    ctypes.c_char_p, ctypes.c_size_t]
    lib.ZSTD_getFrameContentSize.restype = ctypes.c_ulonglong
    lib.ZSTD_getFrameContentSize.argtypes = [ctypes.c_char_p, ctypes.c_size_t]
    lib.ZSTD_isError.restype = ctypes.c_uint
    lib.ZSTD_isError.argtypes = [ctypes.c_size_t]
    _lib = lib
    return lib


def compress(data: bytes, level: int = DEFAULT_LEVEL) -> bytes:
    lib = _load()
    bound = lib.ZSTD_compressBound(len(data))
    dst = ctypes.create_string_buffer(bound)
    written = lib.ZSTD_compress(dst, bound, data, len(data), level)
    if lib.ZSTD_isError(written):
        raise RuntimeError("zstd compression failed")
    return dst.raw[:written]


def decompress(frame: bytes, expected_size: int | None = None) -> bytes:
    lib = _load()
    size = expected_size
    if size is None:
        size = lib.ZSTD_getFrameContentSize(frame, len(frame))
        if size in (2 ** 64 - 1, 2 ** 64 - 2):  # ERROR / CONTENTSIZE_UNKNOWN
            raise RuntimeError("zstd frame content size unavailable")
    dst = ctypes.create_string_buffer(size) if size else ctypes.create_string_buffer(1)
    written = lib.ZSTD_decompress(dst, size, frame, len(frame))
    if lib.ZSTD_isError(written):
        raise RuntimeError("zstd decompression failed")
    return dst.raw[:written]
