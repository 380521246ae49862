"""RIFF/WAVE reading and writing for interleaved linear PCM and float audio.

Supported encodings: 16, 24 and 32-bit signed integer PCM and 32-bit IEEE
float, 1 to 8 channels. Integer samples are scaled by ``2**(bits-1)`` so
full-scale negative maps to exactly -1.0, and writing inverts that scaling
exactly.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .dsp import MultichannelClip
from .errors import BeltlocError
from .fileutil import atomic_write_bytes

WAVE_FORMAT_PCM = 0x0001
WAVE_FORMAT_IEEE_FLOAT = 0x0003
WAVE_FORMAT_EXTENSIBLE = 0xFFFE
MAX_CHANNELS = 8

# KSDATAFORMAT_SUBTYPE_* GUID tail shared by PCM and IEEE float
_GUID_TAIL = b"\x00\x00\x00\x00\x10\x00\x80\x00\x00\xaa\x00\x38\x9b\x71"

ENCODINGS = {
    "pcm16": (WAVE_FORMAT_PCM, 16),
    "pcm24": (WAVE_FORMAT_PCM, 24),
    "pcm32": (WAVE_FORMAT_PCM, 32),
    "float32": (WAVE_FORMAT_IEEE_FLOAT, 32),
}


class WavError(BeltlocError):
    category = "io"


class MalformedWavError(WavError):
    pass


class UnsupportedWavEncodingError(WavError):
    pass


class TooManyChannelsError(WavError):
    pass


def _encoding_name(tag: int, bits: int) -> str:
    for name, spec in ENCODINGS.items():
        if spec == (tag, bits):
            return name
    raise UnsupportedWavEncodingError(
        f"unsupported WAV encoding: format tag 0x{tag:04x} with {bits} bits per sample")


def _parse_fmt(body: bytes):
    if len(body) < 16:
        raise MalformedWavError("fmt chunk too short")
    tag, channels, rate, byte_rate, block_align, bits = struct.unpack("<HHIIHH", body[:16])
    if tag == WAVE_FORMAT_EXTENSIBLE:
        if len(body) < 40:
            raise MalformedWavError("extensible fmt chunk too short")
        valid_bits = struct.unpack("<H", body[18:20])[0]
        sub = body[24:40]
        if sub[2:] != _GUID_TAIL:
            raise UnsupportedWavEncodingError("unknown extensible sub-format GUID")
        tag = struct.unpack("<H", sub[:2])[0]
        if valid_bits and valid_bits != bits:
            raise UnsupportedWavEncodingError(
                f"{valid_bits} valid bits in a {bits}-bit container is not supported")
    if channels == 0:
        raise MalformedWavError("fmt chunk declares zero channels")
    if rate == 0:
        raise MalformedWavError("fmt chunk declares a zero sample rate")
    if bits % 8 or block_align != channels * bits // 8:
        raise MalformedWavError(
            f"inconsistent block alignment {block_align} for {channels} x {bits} bits")
    encoding = _encoding_name(tag, bits)
    if channels > MAX_CHANNELS:
        raise TooManyChannelsError(f"{channels} channels exceeds the maximum of {MAX_CHANNELS}")
    return encoding, channels, rate


def _decode(data: bytes, encoding: str, channels: int) -> np.ndarray:
    if encoding == "float32":
        x = np.frombuffer(data, dtype="<f4").astype(np.float64)
    elif encoding == "pcm16":
        x = np.frombuffer(data, dtype="<i2") / 2.0 ** 15
    elif encoding == "pcm32":
        x = np.frombuffer(data, dtype="<i4") / 2.0 ** 31
    else:
        b = np.frombuffer(data, dtype=np.uint8).reshape(-1, 3).astype(np.int32)
        v = b[:, 0] | (b[:, 1] << 8) | (b[:, 2] << 16)
        v = np.where(v >= 1 << 23, v - (1 << 24), v)
        x = v / 2.0 ** 23
    return x.reshape(-1, channels).T.copy()


def parse_wav_bytes(raw: bytes):
    """Decode a WAV byte string into ``(samples, sample_rate, encoding)``."""
    if len(raw) < 12 or raw[:4] != b"RIFF" or raw[8:12] != b"WAVE":
        raise MalformedWavError("not a RIFF/WAVE file")
    pos = 12
    fmt = None
    while pos + 8 <= len(raw):
        cid = raw[pos:pos + 4]
        size = struct.unpack("<I", raw[pos + 4:pos + 8])[0]
        body = raw[pos + 8:pos + 8 + size]
        if cid == b"fmt ":
            fmt = _parse_fmt(body)
        elif cid == b"data":
            if fmt is None:
                raise MalformedWavError("data chunk precedes fmt chunk")
            if len(body) < size:
                raise MalformedWavError(
                    f"data chunk truncated: {len(body)} of {size} bytes present")
            encoding, channels, rate = fmt
            frame = channels * ENCODINGS[encoding][1] // 8
            if size % frame:
                raise MalformedWavError("data size is not a whole number of frames")
            return _decode(body, encoding, channels), rate, encoding
        pos += 8 + size + (size & 1)
    if fmt is None:
        raise MalformedWavError("missing fmt chunk")
    raise MalformedWavError("missing data chunk")


def read_wav_array(path):
    """Read any supported WAV file; returns ``(samples, sample_rate, encoding)``
    with ``samples`` shaped (channels, frames) in float64."""
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise WavError(f"cannot read {path}: {exc}") from None
    try:
        return parse_wav_bytes(raw)
    except WavError as exc:
        raise type(exc)(f"{path}: {exc}") from None


def read_wav(path) -> MultichannelClip:
    samples, rate, _ = read_wav_array(path)
    if samples.shape[0] < 2:
        raise WavError(f"{path}: a multichannel clip needs at least two channels")
    return MultichannelClip(samples, rate)


def _encode(samples: np.ndarray, encoding: str) -> bytes:
    inter = np.ascontiguousarray(samples.T)
    if encoding == "float32":
        return inter.astype("<f4").tobytes()
    bits = ENCODINGS[encoding][1]
    scale = 2.0 ** (bits - 1)
    v = np.clip(np.round(inter * scale), -scale, scale - 1).astype(np.int64)
    if encoding == "pcm16":
        return v.astype("<i2").tobytes()
    if encoding == "pcm32":
        return v.astype("<i4").tobytes()
    b = v.astype("<i4").view(np.uint8).reshape(-1, 4)[:, :3]
    return b.tobytes()


def wav_bytes(samples, sample_rate: int, encoding: str = "float32") -> bytes:
    samples = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    channels = samples.shape[0]
    if encoding not in ENCODINGS:
        raise UnsupportedWavEncodingError(f"unsupported encoding {encoding!r}")
    if not 1 <= channels <= MAX_CHANNELS:
        raise TooManyChannelsError(f"{channels} channels is outside 1..{MAX_CHANNELS}")
    tag, bits = ENCODINGS[encoding]
    block = channels * bits // 8
    data = _encode(samples, encoding)
    if channels > 2 or bits > 16:
        fmt = struct.pack("<HHIIHHHHI", WAVE_FORMAT_EXTENSIBLE, channels, sample_rate,
                          sample_rate * block, block, bits, 22, bits, 0)
        fmt += struct.pack("<H", tag) + _GUID_TAIL
    else:
        fmt = struct.pack("<HHIIHH", tag, channels, sample_rate, sample_rate * block,
                          block, bits)
    chunks = b"fmt " + struct.pack("<I", len(fmt)) + fmt
    chunks += b"data" + struct.pack("<I", len(data)) + data
    if len(data) & 1:
        chunks += b"\x00"
    return b"RIFF" + struct.pack("<I", 4 + len(chunks)) + b"WAVE" + chunks


def write_wav(clip, path, encoding: str = "float32", sample_rate: int | None = None) -> None:
    """Write a clip (or a (channels, frames) array with ``sample_rate``)."""
    if isinstance(clip, MultichannelClip):
        samples, rate = clip.samples, clip.sample_rate
    else:
        if sample_rate is None:
            raise ValueError("sample_rate is required when writing a raw array")
        samples, rate = clip, sample_rate
    atomic_write_bytes(path, wav_bytes(samples, int(rate), encoding))
