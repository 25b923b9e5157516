"""Audio loading and log-Mel feature extraction.

Speech clips are decoded to mono float arrays in [-1, 1], optionally
resampled to the model rate, and converted to the model's input
representation: a short-time Fourier power spectrum projected through a
triangular Mel filterbank, log-compressed, dynamic-range clamped, and affinely
rescaled. The constants of that chain are explicit in
:class:`FeatureConfig` so extractions are reproducible.

WAV files are parsed directly (PCM 8/16/24/32-bit and IEEE float, plus the
EXTENSIBLE wrapper). No MP3 decoder is available in this build: loading an
MP3 raises a decode error, but :func:`mp3_duration` walks the frame headers so
corpus preparation can still compute durations for MP3 clips.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from math import gcd
from pathlib import Path

import numpy as np
from scipy.signal import resample_poly

from .errors import KurdasrError


class AudioDecodeError(KurdasrError):
    """The file is not decodable audio (bad container, codec, or truncation)."""


class FeatureConfigError(KurdasrError):
    """Feature configuration inconsistent with the input buffer."""


@dataclass(frozen=True)
class AudioBuffer:
    """Mono audio: amplitudes in [-1, 1] plus the rate they were sampled at."""

    samples: np.ndarray
    sample_rate: int
    channels: int = 1

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass(frozen=True)
class WavInfo:
    """Header-level facts about a WAV file, without decoding samples."""

    sample_rate: int
    bits_per_sample: int
    channels: int
    frames: int
    format_tag: int

    @property
    def duration(self) -> float:
        return self.frames / self.sample_rate if self.sample_rate else 0.0


_WAVE_FORMAT_PCM = 1
_WAVE_FORMAT_IEEE_FLOAT = 3
_WAVE_FORMAT_EXTENSIBLE = 0xFFFE


def _parse_wav(data: bytes, path: str) -> tuple[WavInfo, bytes]:
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise AudioDecodeError(f"{path}: not a RIFF/WAVE file")
    fmt = None
    payload = None
    offset = 12
    while offset + 8 <= len(data):
        chunk_id = data[offset : offset + 4]
        (size,) = struct.unpack_from("<I", data, offset + 4)
        body = data[offset + 8 : offset + 8 + size]
        if chunk_id == b"fmt ":
            if len(body) < 16:
                raise AudioDecodeError(f"{path}: truncated fmt chunk")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
        elif chunk_id == b"data":
            if len(body) < size:
                raise AudioDecodeError(f"{path}: truncated data chunk ({len(body)} of {size} bytes)")
            payload = body
        offset += 8 + size + (size & 1)
    if fmt is None or payload is None:
        raise AudioDecodeError(f"{path}: missing fmt or data chunk")
    format_tag, channels, sample_rate, _, block_align, bits = fmt
    if channels < 1 or sample_rate < 1 or block_align < 1:
        raise AudioDecodeError(f"{path}: invalid fmt fields")
    frames = len(payload) // block_align
    return WavInfo(sample_rate, bits, channels, frames, format_tag), payload


def wav_info(path) -> WavInfo:
    """Read WAV header facts (rate, bit depth, channels, frame count)."""
    with open(path, "rb") as fh:
        data = fh.read()
    info, _ = _parse_wav(data, str(path))
    return info


def _decode_wav(data: bytes, path: str) -> AudioBuffer:
    info, payload = _parse_wav(data, path)
    tag = info.format_tag
    if tag == _WAVE_FORMAT_EXTENSIBLE:
        # fmt extension carries the real tag; re-read it from the raw chunk.
        tag = _extensible_subformat(data, path)
    bits = info.bits_per_sample
    usable = len(payload) - len(payload) % (info.channels * (bits // 8))
    payload = payload[:usable]
    if tag == _WAVE_FORMAT_PCM:
        if bits == 8:
            raw = np.frombuffer(payload, dtype=np.uint8).astype(np.float32)
            samples = (raw - 128.0) / 128.0
        elif bits == 16:
            samples = np.frombuffer(payload, dtype="<i2").astype(np.float32) / 32768.0
        elif bits == 24:
            raw = np.frombuffer(payload, dtype=np.uint8).reshape(-1, 3)
            as_int = (
                raw[:, 0].astype(np.int32)
                | (raw[:, 1].astype(np.int32) << 8)
                | (raw[:, 2].astype(np.int32) << 16)
            )
            as_int = np.where(as_int >= 1 << 23, as_int - (1 << 24), as_int)
            samples = as_int.astype(np.float32) / float(1 << 23)
        elif bits == 32:
            samples = np.frombuffer(payload, dtype="<i4").astype(np.float32) / float(1 << 31)
        else:
            raise AudioDecodeError(f"{path}: unsupported PCM bit depth {bits}")
    elif tag == _WAVE_FORMAT_IEEE_FLOAT:
        if bits == 32:
            samples = np.frombuffer(payload, dtype="<f4").astype(np.float32)
        elif bits == 64:
            samples = np.frombuffer(payload, dtype="<f8").astype(np.float32)
        else:
            raise AudioDecodeError(f"{path}: unsupported float bit depth {bits}")
    else:
        raise AudioDecodeError(f"{path}: unsupported WAV codec tag {tag}")
    if info.channels > 1:
        samples = samples.reshape(-1, info.channels).mean(axis=1)
    return AudioBuffer(samples=samples, sample_rate=info.sample_rate, channels=1)


def _extensible_subformat(data: bytes, path: str) -> int:
    offset = 12
    while offset + 8 <= len(data):
        chunk_id = data[offset : offset + 4]
        (size,) = struct.unpack_from("<I", data, offset + 4)
        if chunk_id == b"fmt ":
            if size < 26:
                raise AudioDecodeError(f"{path}: EXTENSIBLE fmt chunk too short")
            (sub,) = struct.unpack_from("<H", data, offset + 8 + 24)
            return sub
        offset += 8 + size + (size & 1)
    raise AudioDecodeError(f"{path}: missing fmt chunk")


def load_audio(path) -> AudioBuffer:
    """Decode a WAV file to a mono AudioBuffer (multi-channel is averaged).

    MP3 input is recognized but raises :class:`AudioDecodeError`: no MP3
    decoder is available in this build (use :func:`mp3_duration` for header
    metadata). Anything else raises a decode error naming the container.
    """
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] == b"RIFF":
        return _decode_wav(data, str(path))
    if _looks_like_mp3(data):
        raise AudioDecodeError(
            f"{path}: MP3 sample decoding is not supported in this build "
            "(no MP3 codec available); convert to WAV"
        )
    raise AudioDecodeError(f"{path}: unsupported container (expected WAV or MP3)")


# -- MP3 header walking (metadata only, no sample decoding) --

_MP3_BITRATES_V1_L3 = (0, 32, 40, 48, 56, 64, 80, 96, 112, 128, 160, 192, 224, 256, 320)
_MP3_BITRATES_V2_L3 = (0, 8, 16, 24, 32, 40, 48, 56, 64, 80, 96, 112, 128, 144, 160)
_MP3_RATES = {3: (44100, 48000, 32000), 2: (22050, 24000, 16000), 0: (11025, 12000, 8000)}


def _looks_like_mp3(data: bytes) -> bool:
    if data[:3] == b"ID3":
        return True
    return len(data) >= 2 and data[0] == 0xFF and (data[1] & 0xE0) == 0xE0


def _skip_id3(data: bytes) -> int:
    if data[:3] != b"ID3" or len(data) < 10:
        return 0
    size = (data[6] << 21) | (data[7] << 14) | (data[8] << 7) | data[9]
    return 10 + size


def _parse_mp3_frame(data: bytes, offset: int) -> tuple[int, int, int] | None:
    """Return (frame_bytes, samples_per_frame, sample_rate) or None."""
    if offset + 4 > len(data):
        return None
    b1, b2, b3 = data[offset], data[offset + 1], data[offset + 2]
    if b1 != 0xFF or (b2 & 0xE0) != 0xE0:
        return None
    version = (b2 >> 3) & 0x3          # 3=MPEG1, 2=MPEG2, 0=MPEG2.5
    layer = (b2 >> 1) & 0x3            # 1=Layer III
    if version == 1 or layer != 1:
        return None
    bitrate_index = (b3 >> 4) & 0xF
    rate_index = (b3 >> 2) & 0x3
    padding = (b3 >> 1) & 0x1
    if bitrate_index in (0, 0xF) or rate_index == 3:
        return None
    sample_rate = _MP3_RATES[version][rate_index]
    if version == 3:
        bitrate = _MP3_BITRATES_V1_L3[bitrate_index] * 1000
        samples = 1152
        frame_bytes = 144 * bitrate // sample_rate + padding
    else:
        bitrate = _MP3_BITRATES_V2_L3[bitrate_index] * 1000
        samples = 576
        frame_bytes = 72 * bitrate // sample_rate + padding
    return frame_bytes, samples, sample_rate


def mp3_duration(path) -> float:
    """Duration in seconds from MP3 Layer III frame headers (Xing-aware)."""
    with open(path, "rb") as fh:
        data = fh.read()
    offset = _skip_id3(data)
    first = None
    # Resync tolerance: scan forward for the first valid header.
    while offset < len(data) - 4:
        first = _parse_mp3_frame(data, offset)
        if first is not None:
            break
        offset += 1
    if first is None:
        raise AudioDecodeError(f"{path}: no MP3 frame header found")

    frame_bytes, samples, sample_rate = first
    # A Xing/Info block in the first frame carries the total frame count.
    side_info = 32 if (data[offset + 3] >> 6) != 3 else 17
    tag_at = offset + 4 + side_info
    if data[tag_at : tag_at + 4] in (b"Xing", b"Info"):
        (flags,) = struct.unpack_from(">I", data, tag_at + 4)
        if flags & 0x1:
            (frames,) = struct.unpack_from(">I", data, tag_at + 8)
            return frames * samples / sample_rate

    total_samples = 0
    while True:
        parsed = _parse_mp3_frame(data, offset)
        if parsed is None:
            break
        frame_bytes, samples, sample_rate = parsed
        total_samples += samples
        offset += frame_bytes
        if offset >= len(data):
            break
    return total_samples / sample_rate


def probe_duration(path) -> float:
    """Clip duration in seconds from container headers (WAV or MP3)."""
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head[:4] == b"RIFF":
        return wav_info(path).duration
    return mp3_duration(path)


# -- resampling and features --


def resample(buffer: AudioBuffer, target_rate: int) -> AudioBuffer:
    """Band-limited polyphase resampling; bit-exact passthrough on equal rates."""
    if target_rate <= 0:
        raise FeatureConfigError(f"target rate must be positive: {target_rate}")
    if target_rate == buffer.sample_rate:
        return buffer
    g = gcd(buffer.sample_rate, target_rate)
    up, down = target_rate // g, buffer.sample_rate // g
    samples = resample_poly(buffer.samples.astype(np.float64), up, down).astype(np.float32)
    return AudioBuffer(samples=samples, sample_rate=target_rate, channels=1)


@dataclass(frozen=True)
class FeatureConfig:
    """Log-Mel extraction constants (defaults: 16 kHz, 25 ms window, 10 ms hop).

    ``log_floor`` clamps Mel energies before log10; ``dynamic_range`` clamps
    each value to within that many log10 units of the global maximum; the
    result is rescaled as (x + 4) / 4.
    """

    sample_rate: int = 16000
    num_mels: int = 128
    fft_size: int = 400
    window: int = 400
    hop: int = 160
    log_floor: float = 1e-10
    dynamic_range: float = 8.0


@dataclass(frozen=True)
class MelSpectrogram:
    frames: np.ndarray  # [num_frames, num_mels], float32
    num_mels: int
    hop: int
    window: int
    sample_rate: int


def _hz_to_mel(freq: np.ndarray) -> np.ndarray:
    # Linear below 1 kHz, logarithmic above; keeps low-frequency triangles
    # wide enough that no filter falls between FFT bins.
    freq = np.asarray(freq, dtype=np.float64)
    mels = freq * 3.0 / 200.0
    log_region = freq >= 1000.0
    mels = np.where(
        log_region,
        15.0 + np.log(np.maximum(freq, 1000.0) / 1000.0) / (np.log(6.4) / 27.0),
        mels,
    )
    return mels


def _mel_to_hz(mels: np.ndarray) -> np.ndarray:
    mels = np.asarray(mels, dtype=np.float64)
    freq = mels * 200.0 / 3.0
    log_region = mels >= 15.0
    freq = np.where(log_region, 1000.0 * np.exp((np.maximum(mels, 15.0) - 15.0) * np.log(6.4) / 27.0), freq)
    return freq


def mel_filterbank(num_mels: int, fft_size: int, sample_rate: int) -> np.ndarray:
    """Triangular filterbank [num_mels, fft_size//2 + 1] covering 0..Nyquist."""
    nyquist = sample_rate / 2.0
    fft_freqs = np.linspace(0.0, nyquist, fft_size // 2 + 1)
    mel_points = np.linspace(_hz_to_mel(0.0), _hz_to_mel(nyquist), num_mels + 2)
    hz_points = _mel_to_hz(mel_points)

    fdiff = np.diff(hz_points)
    ramps = hz_points[:, None] - fft_freqs[None, :]
    lower = -ramps[:-2] / fdiff[:-1, None]
    upper = ramps[2:] / fdiff[1:, None]
    weights = np.maximum(0.0, np.minimum(lower, upper))
    # Area normalization so filter response is independent of bandwidth.
    weights *= (2.0 / (hz_points[2:] - hz_points[:-2]))[:, None]
    return weights


def _hann_periodic(size: int) -> np.ndarray:
    n = np.arange(size, dtype=np.float64)
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * n / size)


def log_mel(buffer: AudioBuffer, config: FeatureConfig | None = None) -> MelSpectrogram:
    """Convert a sampled speech array to a normalized log-Mel spectrogram.

    The signal is reflect-padded by half a window at both ends, so frame k is
    centered at sample k*hop and the frame count is exactly
    ``len(samples) // hop`` for every input length. Inputs shorter than one
    hop yield an empty (0-frame) spectrogram, never an error.
    """
    config = config or FeatureConfig()
    if buffer.sample_rate != config.sample_rate:
        raise FeatureConfigError(
            f"buffer rate {buffer.sample_rate} != configured rate {config.sample_rate}; resample first"
        )
    if config.window > config.fft_size:
        raise FeatureConfigError("window must not exceed fft_size")
    samples = np.asarray(buffer.samples, dtype=np.float64)
    num_frames = len(samples) // config.hop
    if num_frames == 0:
        return MelSpectrogram(
            frames=np.zeros((0, config.num_mels), dtype=np.float32),
            num_mels=config.num_mels,
            hop=config.hop,
            window=config.window,
            sample_rate=config.sample_rate,
        )
    half = config.window // 2
    padded = np.pad(samples, half, mode="reflect") if half else samples
    window_fn = _hann_periodic(config.window)
    starts = np.arange(num_frames) * config.hop
    frame_view = np.lib.stride_tricks.sliding_window_view(padded, config.window)
    frames = frame_view[starts] * window_fn
    spectrum = np.fft.rfft(frames, n=config.fft_size, axis=1)
    power = np.abs(spectrum) ** 2

    filters = mel_filterbank(config.num_mels, config.fft_size, config.sample_rate)
    mel_energy = power @ filters.T
    log_spec = np.log10(np.maximum(mel_energy, config.log_floor))
    log_spec = np.maximum(log_spec, log_spec.max() - config.dynamic_range)
    log_spec = (log_spec + 4.0) / 4.0
    return MelSpectrogram(
        frames=log_spec.astype(np.float32),
        num_mels=config.num_mels,
        hop=config.hop,
        window=config.window,
        sample_rate=config.sample_rate,
    )


# -- feature dump format: 24-byte little-endian header + float32 rows --

_DUMP_MAGIC = b"KMEL"
_DUMP_VERSION = 1
_HEADER = struct.Struct("<4sIIIII")  # magic, version, num_frames, num_mels, rate, hop


class FeatureDumpError(KurdasrError):
    """A feature dump file is malformed."""


def write_features(spec: MelSpectrogram, path) -> None:
    frames = np.ascontiguousarray(spec.frames, dtype="<f4")
    header = _HEADER.pack(
        _DUMP_MAGIC, _DUMP_VERSION, frames.shape[0], spec.num_mels, spec.sample_rate, spec.hop
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(frames.tobytes())


def read_features(path) -> MelSpectrogram:
    """Read a feature dump; window size is not stored and reads back as 0."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < _HEADER.size:
        raise FeatureDumpError(f"{path}: truncated header")
    magic, version, num_frames, num_mels, rate, hop = _HEADER.unpack_from(data)
    if magic != _DUMP_MAGIC or version != _DUMP_VERSION:
        raise FeatureDumpError(f"{path}: bad magic or version")
    expected = num_frames * num_mels * 4
    body = data[_HEADER.size :]
    if len(body) != expected:
        raise FeatureDumpError(f"{path}: expected {expected} payload bytes, found {len(body)}")
    frames = np.frombuffer(body, dtype="<f4").reshape(num_frames, num_mels)
    return MelSpectrogram(frames=frames, num_mels=num_mels, hop=hop, window=0, sample_rate=rate)
