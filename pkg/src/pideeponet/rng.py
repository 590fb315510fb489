"""Seeded substreams.

Every random draw in the package comes from ``substream(seed, tag, *index)``:
a PCG64 generator keyed by the run seed, a purpose tag and integer indices, so
that e.g. function ``k`` or epoch ``e`` can be regenerated without replaying
earlier draws.
"""

import zlib

import numpy as np

_TAGS = {}


def _tag_id(tag):
    if tag not in _TAGS:
        _TAGS[tag] = zlib.crc32(tag.encode("utf-8"))
    return _TAGS[tag]


def substream(seed, tag, *index):
    """Independent generator for ``(seed, tag, index...)``."""
    if seed < 0:
        raise ValueError("seed must be non-negative")
    key = [int(seed), _tag_id(tag), *(int(i) for i in index)]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(key)))
