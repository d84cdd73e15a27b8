import struct

import numpy as np
import pytest


def build_wav_bytes(
    samples_per_channel,
    sample_rate=44100,
    bit_depth=16,
    fmt_tag=1,
    extra_chunk=None,
):
    """Hand-rolled RIFF/WAVE container for byte-exact decoder tests.

    samples_per_channel: list of per-channel integer sample lists.
    """
    n_channels = len(samples_per_channel)
    n_samples = len(samples_per_channel[0])
    bytes_per_sample = bit_depth // 8

    frames = bytearray()
    for i in range(n_samples):
        for ch in samples_per_channel:
            v = int(ch[i])
            if bit_depth == 8:
                frames += struct.pack("B", v + 128)
            elif bit_depth == 16:
                frames += struct.pack("<h", v)
            elif bit_depth == 24:
                frames += (v & 0xFFFFFF).to_bytes(3, "little")
            elif bit_depth == 32:
                frames += struct.pack("<i", v)
            else:
                raise ValueError(bit_depth)

    block_align = n_channels * bytes_per_sample
    fmt = struct.pack(
        "<HHIIHH",
        fmt_tag,
        n_channels,
        sample_rate,
        sample_rate * block_align,
        block_align,
        bit_depth,
    )
    chunks = b"fmt " + struct.pack("<I", len(fmt)) + fmt
    if extra_chunk is not None:
        cid, body = extra_chunk
        chunks += cid + struct.pack("<I", len(body)) + body + (b"\x00" if len(body) % 2 else b"")
    chunks += b"data" + struct.pack("<I", len(frames)) + bytes(frames)
    return b"RIFF" + struct.pack("<I", 4 + len(chunks)) + b"WAVE" + chunks


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
