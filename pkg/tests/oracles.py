"""Independent reference implementations used by the tests.

Nothing here imports the code under test except plain data types, so each
oracle is a second, deliberately naive derivation of the same quantity.
"""

from __future__ import annotations

import math
import struct

import numpy as np

ZIGZAG_AC_1_TO_9 = [(0, 1), (1, 0), (2, 0), (1, 1), (0, 2), (0, 3), (1, 2), (2, 1), (3, 0)]


def naive_dct_histogram(plane) -> list[float]:
    """Explicit double-loop DCT-II of each full block, then per-frequency counting."""
    plane = [[int(v) for v in row] for row in np.asarray(plane)]
    h, w = len(plane), len(plane[0])
    counts = [[0] * 41 for _ in range(9)]
    n_blocks = 0
    for by in range(h // 8):
        for bx in range(w // 8):
            n_blocks += 1
            for f, (u, v) in enumerate(ZIGZAG_AC_1_TO_9):  # u = vertical, v = horizontal frequency
                total = 0.0
                for y in range(8):
                    for x in range(8):
                        s = plane[by * 8 + y][bx * 8 + x] - 128
                        total += s * math.cos((2 * y + 1) * u * math.pi / 16) * math.cos((2 * x + 1) * v * math.pi / 16)
                cu = math.sqrt(1 / 8) if u == 0 else math.sqrt(2 / 8)
                cv = math.sqrt(1 / 8) if v == 0 else math.sqrt(2 / 8)
                coef = cu * cv * total
                r = int(math.floor(abs(coef) + 0.5)) * (1 if coef >= 0 else -1)
                if -20 <= r <= 20:
                    counts[f][r + 20] += 1
    return [c / n_blocks for group in counts for c in group]


def _dist(a, b) -> float:
    total = 0.0
    for u, v in zip(a, b):
        total += (u - v) * (u - v)
    return math.sqrt(total)


def brute_lsr(X, y) -> list[float]:
    n = len(y)
    out = []
    for i in range(n):
        best = math.inf
        for j in range(n):
            if y[j] != y[i]:
                best = min(best, _dist(X[i], X[j]))
        out.append(best)
    return out


def brute_ier(X, y) -> float:
    n = len(y)
    intra = extra = 0.0
    for i in range(n):
        a = min(_dist(X[i], X[j]) for j in range(n) if j != i and y[j] == y[i])
        b = min(_dist(X[i], X[j]) for j in range(n) if y[j] != y[i])
        intra += a
        extra += b
    return math.inf if extra == 0 else intra / extra


def tally_fuse(decisions, labels, query, n_classes):
    """Hash-map BKS: returns ('class', c) or ('reject', reason)."""
    table: dict[tuple, dict[int, int]] = {}
    for d, y in zip(decisions, labels):
        table.setdefault(tuple(int(v) for v in d), {}).setdefault(int(y), 0)
        table[tuple(int(v) for v in d)][int(y)] += 1
    cell = table.get(tuple(int(v) for v in query))
    if not cell:
        return ("reject", "empty-unit")
    best = max(cell.values())
    winners = [c for c, n in cell.items() if n == best]
    if len(winners) > 1:
        return ("reject", "tie")
    return ("class", winners[0])


def nested_composition(x, platforms, L, detectors, fuse, stop=None):
    """Literal recursion F_l(x) = block_l(x, F_{l-1}(x)).

    ``detectors(block, context_steps, x)`` returns the expert decisions and
    ``fuse(block, context_steps, decisions)`` the fused local class or None.
    Returns (steps oldest-first, rejected, rejection_block).
    """

    def block(level):
        if level < 0:
            return (), False, None
        steps, rejected, at = block(level - 1)
        if rejected:
            return steps, rejected, at
        if level > 0 and len(steps) < level:
            return steps, False, None
        if level > 0 and stop is not None and steps[0] == stop:
            return steps, False, None
        cls = fuse(level, steps, detectors(level, steps, x))
        if cls is None:
            return steps, True, level
        if cls == 0:
            return steps, False, None
        return (platforms[cls - 1],) + steps, False, None

    return block(L - 1)


# --- byte-level JPEG crafting -------------------------------------------------

def seg(marker: int, payload: bytes = b"") -> bytes:
    return bytes((0xFF, marker)) + struct.pack(">H", len(payload) + 2) + payload


def dqt(table_id: int = 0, value: int = 1) -> bytes:
    return seg(0xDB, bytes([table_id]) + bytes([value] * 64))


def dht(cls: int = 0, table_id: int = 0) -> bytes:
    bits = [0, 1] + [0] * 14
    return seg(0xC4, bytes([(cls << 4) | table_id] + bits + [0]))


def sof(marker: int = 0xC0, width: int = 8, height: int = 8, ncomp: int = 1) -> bytes:
    body = struct.pack(">BHHB", 8, height, width, ncomp)
    for i in range(ncomp):
        body += bytes((i + 1, 0x11, 0 if i == 0 else 1))
    return seg(marker, body)


def sos(ncomp: int = 1) -> bytes:
    body = bytes([ncomp]) + b"".join(bytes((i + 1, 0x00)) for i in range(ncomp)) + bytes((0, 63, 0))
    return seg(0xDA, body)


def crafted_file(*middle: bytes, entropy: bytes = b"\x12\x34\xff\x00\x56") -> bytes:
    return b"\xff\xd8" + b"".join(middle) + entropy + b"\xff\xd9"
