"""KNN1 checkpoints: the KCX container layout with magic ``KNN1``.

The header is the architecture spec; a single PARAMS section holds every
parameter as little-endian float32, concatenated in ``Network.parameters()``
order.
"""

import numpy as np

from .. import kcx
from ..errors import FormatError
from .network import Network

MAGIC = b"KNN1"
VERSION = 1


def save_checkpoint(network: Network, path, extra=None) -> None:
    payload = b"".join(np.ascontiguousarray(p, dtype="<f4").tobytes() for _, p in network.parameters())
    shapes = [[name, list(p.shape)] for name, p in network.parameters()]
    header = {"architecture": network.spec, "extra": extra or {}}
    kcx.write(path, header, [kcx.Section("PARAMS", {"dtype": "f4", "shapes": shapes}, payload)],
              magic=MAGIC, version=VERSION)


def load_checkpoint(path) -> Network:
    header, sections = kcx.read(path, magic=MAGIC, version=VERSION)
    try:
        net = Network(header["architecture"])
    except (KeyError, TypeError) as exc:
        raise FormatError(f"invalid architecture header: {exc}") from exc
    sec = next((s for s in sections if s.tag == "PARAMS"), None)
    if sec is None:
        raise FormatError("checkpoint has no PARAMS section")
    params = net.parameters()
    expected = sum(p.size for _, p in params) * 4
    if len(sec.payload) != expected:
        raise FormatError(f"PARAMS payload is {len(sec.payload)} bytes, architecture needs {expected}")
    flat = np.frombuffer(sec.payload, dtype="<f4")
    pos = 0
    for _, p in params:
        p[...] = flat[pos:pos + p.size].reshape(p.shape)
        pos += p.size
    net.extra = header.get("extra", {})
    return net
