"""KCX binary container.

Layout (all integers little-endian)::

    b"KCX1"            4 bytes magic
    version            u32
    header_len         u64
    header             UTF-8 JSON, header_len bytes
    section*           until end of file

    section:
    tag                8 bytes ASCII, NUL padded
    meta_len           u64
    meta               UTF-8 JSON
    payload_len        u64
    payload            raw little-endian array bytes
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from contextlib import contextmanager
from dataclasses import dataclass, field

from .errors import FormatError

MAGIC = b"KCX1"
VERSION = 1


@dataclass
class Section:
    tag: str
    meta: dict = field(default_factory=dict)
    payload: bytes = b""


def _encode_json(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")


def atomic_write_bytes(path, data: bytes) -> None:
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


@contextmanager
def atomic_open(path, mode: str = "w", **kwargs):
    """Open a sibling temp file; rename over ``path`` only if the block succeeds."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, mode, **kwargs) as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def encode(header: dict, sections, magic: bytes = MAGIC, version: int = VERSION) -> bytes:
    head = _encode_json(header)
    parts = [magic, struct.pack("<IQ", version, len(head)), head]
    for sec in sections:
        tag = sec.tag.encode("ascii")
        if len(tag) > 8:
            raise ValueError(f"section tag {sec.tag!r} longer than 8 bytes")
        meta = _encode_json(sec.meta)
        parts += [tag.ljust(8, b"\0"), struct.pack("<Q", len(meta)), meta,
                  struct.pack("<Q", len(sec.payload)), bytes(sec.payload)]
    return b"".join(parts)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise FormatError(f"truncated {what}: need {n} bytes, {len(self.data) - self.pos} left", self.pos)
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def json(self, n: int, what: str):
        start = self.pos
        raw = self.take(n, what)
        try:
            return json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise FormatError(f"malformed {what}: {exc}", start) from exc


def decode(data: bytes, magic: bytes = MAGIC, version: int = VERSION):
    """Parse a container; returns ``(header, [Section, ...])``."""
    r = _Reader(data)
    got = r.take(len(magic), "magic")
    if got != magic:
        raise FormatError(f"bad magic {got!r}, expected {magic!r}", 0)
    ver, hlen = struct.unpack("<IQ", r.take(12, "header prefix"))
    if ver != version:
        raise FormatError(f"unsupported version {ver}, expected {version}", len(magic))
    header = r.json(hlen, "header")
    sections = []
    while r.pos < len(data):
        start = r.pos
        tag = r.take(8, "section tag").rstrip(b"\0")
        try:
            tag = tag.decode("ascii")
        except UnicodeDecodeError as exc:
            raise FormatError("non-ASCII section tag", start) from exc
        (mlen,) = struct.unpack("<Q", r.take(8, "section meta length"))
        meta = r.json(mlen, f"{tag} section meta")
        (plen,) = struct.unpack("<Q", r.take(8, "section payload length"))
        payload = r.take(plen, f"{tag} section payload")
        sections.append(Section(tag, meta, payload))
    return header, sections


def write(path, header: dict, sections, magic: bytes = MAGIC, version: int = VERSION) -> None:
    atomic_write_bytes(path, encode(header, sections, magic, version))


def read(path, magic: bytes = MAGIC, version: int = VERSION):
    with open(path, "rb") as fh:
        data = fh.read()
    return decode(data, magic, version)
