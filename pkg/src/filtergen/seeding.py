"""Deterministic seed derivation for independent stages and streams."""

from __future__ import annotations

import hashlib


def derive_seed(master: int, *parts) -> int:
    """Stable 63-bit seed keyed by a master seed and a label path."""
    label = "/".join(str(p) for p in (master,) + parts)
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1
