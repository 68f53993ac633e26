"""Instance generation and on-disk formats.

Generation follows the GKD recipe: n points drawn uniformly from
[low, high]^s (defaults 0..100), dissimilarity = Euclidean distance to the
power r.  The PRNG is NumPy's PCG64 via ``default_rng(seed)`` and the only
draw is ``uniform(low, high, size=(n, s))``, so a (spec, seed) pair pins
the instance bit for bit.

Two text formats:

* triplet -- header line ``n``, then one ``i j d_ij`` line per pair i < j,
  1-indexed, all C(n, 2) pairs present exactly once.  This is the shape
  GKD-style distance files use.
* points  -- header line ``n s``, then n lines of s coordinates.

Floats are written with 17 significant digits, which round-trips IEEE
doubles exactly.
"""

from __future__ import annotations

import dataclasses
import json
import math
import os
from typing import Optional, Union

import numpy as np

from .geometry import build_distance_matrix
from .model import Instance

PRule = Union[str, int]  # "ceil10" | "2ceil10" | explicit integer


class ParseError(ValueError):
    """Malformed instance file; carries the 1-based line number."""

    def __init__(self, path, lineno: int, message: str):
        super().__init__(f"{path}:{lineno}: {message}")
        self.path = str(path)
        self.lineno = lineno


def resolve_p(n: int, rule: PRule) -> int:
    if isinstance(rule, bool):  # bool is an int; refuse it explicitly
        raise ValueError(f"invalid p rule {rule!r}")
    if isinstance(rule, int):
        if not 1 <= rule <= n:
            raise ValueError(f"explicit p={rule} outside [1, {n}]")
        return rule
    if rule == "ceil10":
        return math.ceil(n / 10)
    if rule == "2ceil10":
        return 2 * math.ceil(n / 10)
    raise ValueError(f"unknown p rule {rule!r}")


@dataclasses.dataclass(frozen=True)
class GenSpec:
    """Everything needed to regenerate one instance deterministically."""

    n: int
    s: int
    seed: int
    p_rule: PRule = "ceil10"
    r: float = 1.0
    low: float = 0.0
    high: float = 100.0

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError(f"n={self.n} must be positive")
        if self.s < 1:
            raise ValueError(f"s={self.s} must be positive")
        if not (0.0 < self.r <= 2.0):
            raise ValueError(f"r={self.r} outside (0, 2]")
        if not self.low < self.high:
            raise ValueError(f"empty coordinate range [{self.low}, {self.high}]")

    @property
    def p(self) -> int:
        return resolve_p(self.n, self.p_rule)

    def instance_name(self) -> str:
        return f"gkd_n{self.n}_s{self.s}_r{self.r:g}_seed{self.seed}_p{self.p}"

    def file_stem(self) -> str:
        # p is rule metadata, not file content: variants share one file
        return f"gkd_n{self.n}_s{self.s}_r{self.r:g}_seed{self.seed}"


def generate(spec: GenSpec) -> Instance:
    rng = np.random.default_rng(spec.seed)  # PCG64
    pts = rng.uniform(spec.low, spec.high, size=(spec.n, spec.s))
    q = build_distance_matrix(pts, spec.r)
    return Instance(q=q, p=spec.p, r=spec.r, points=pts, name=spec.instance_name())


# --------------------------------------------------------------------------
# readers / writers


def write_instance(inst: Instance, path, fmt: str = "points") -> None:
    if fmt == "points":
        if inst.points is None:
            raise ValueError("instance has no coordinates; write the triplet format")
        lines = [f"{inst.n} {inst.points.shape[1]}"]
        lines += [" ".join(f"{v:.17g}" for v in row) for row in inst.points]
    elif fmt == "triplet":
        lines = [f"{inst.n}"]
        for i in range(inst.n):
            for j in range(i + 1, inst.n):
                lines.append(f"{i + 1} {j + 1} {inst.q[i, j]:.17g}")
    else:
        raise ValueError(f"unknown format {fmt!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_instance(
    path,
    fmt: Optional[str] = None,
    *,
    p: Optional[int] = None,
    p_rule: PRule = "ceil10",
    r: float = 1.0,
    name: Optional[str] = None,
) -> Instance:
    """Load either format; the header's token count disambiguates.

    Neither format carries p: pass it explicitly or let ``p_rule`` derive it
    from n.  ``r`` matters only for the points format (it shapes Q) but is
    recorded on the instance either way.
    """
    with open(path) as fh:
        raw = fh.read().splitlines()
    lines = [(i + 1, ln.strip()) for i, ln in enumerate(raw) if ln.strip()]
    if not lines:
        raise ParseError(path, 1, "empty file")
    header = lines[0][1].split()
    if fmt is None:
        fmt = {1: "triplet", 2: "points"}.get(len(header))
        if fmt is None:
            raise ParseError(path, lines[0][0], f"unrecognised header {lines[0][1]!r}")

    if fmt == "points":
        if len(header) != 2:
            raise ParseError(path, lines[0][0], "points header must be 'n s'")
        try:
            n, s = int(header[0]), int(header[1])
        except ValueError:
            raise ParseError(path, lines[0][0], f"bad header {lines[0][1]!r}") from None
        if n < 1 or s < 1:
            raise ParseError(path, lines[0][0], f"bad dimensions n={n}, s={s}")
        if len(lines) - 1 != n:
            raise ParseError(
                path, lines[-1][0], f"expected {n} coordinate lines, found {len(lines) - 1}"
            )
        pts = np.empty((n, s))
        for row, (lineno, ln) in enumerate(lines[1:]):
            toks = ln.split()
            if len(toks) != s:
                raise ParseError(path, lineno, f"expected {s} coordinates, found {len(toks)}")
            try:
                pts[row] = [float(t) for t in toks]
            except ValueError:
                raise ParseError(path, lineno, f"unparseable coordinate in {ln!r}") from None
        q = build_distance_matrix(pts, r)
        pp = p if p is not None else resolve_p(n, p_rule)
        return Instance(q=q, p=pp, r=r, points=pts,
                        name=name or _stem(path))

    if fmt == "triplet":
        if len(header) != 1:
            raise ParseError(path, lines[0][0], "triplet header must be a single 'n'")
        try:
            n = int(header[0])
        except ValueError:
            raise ParseError(path, lines[0][0], f"bad header {lines[0][1]!r}") from None
        if n < 1:
            raise ParseError(path, lines[0][0], f"bad dimension n={n}")
        q = np.zeros((n, n))
        seen = np.zeros((n, n), dtype=bool)
        for lineno, ln in lines[1:]:
            toks = ln.split()
            if len(toks) != 3:
                raise ParseError(path, lineno, f"expected 'i j d', found {ln!r}")
            try:
                i, j, d = int(toks[0]), int(toks[1]), float(toks[2])
            except ValueError:
                raise ParseError(path, lineno, f"unparseable entry {ln!r}") from None
            if not (1 <= i < j <= n):
                raise ParseError(path, lineno, f"pair ({i}, {j}) not 1 <= i < j <= {n}")
            if seen[i - 1, j - 1]:
                raise ParseError(path, lineno, f"duplicate pair ({i}, {j})")
            seen[i - 1, j - 1] = True
            q[i - 1, j - 1] = q[j - 1, i - 1] = d
        want = n * (n - 1) // 2
        have = int(seen.sum())
        if have != want:
            raise ParseError(path, lines[-1][0], f"{want - have} pair(s) missing of {want}")
        pp = p if p is not None else resolve_p(n, p_rule)
        return Instance(q=q, p=pp, r=r, points=None, name=name or _stem(path))

    raise ValueError(f"unknown format {fmt!r}")


def _stem(path) -> str:
    return os.path.splitext(os.path.basename(str(path)))[0]


# --------------------------------------------------------------------------
# suite manifests


@dataclasses.dataclass(frozen=True)
class SuiteEntry:
    """One (instance file, p) pairing a benchmark should solve."""

    name: str
    path: str  # relative to the manifest file
    fmt: str
    n: int
    s: Optional[int]
    p: int
    r: float
    seed: Optional[int] = None
    p_rule: Optional[str] = None


def write_manifest(entries: list[SuiteEntry], path) -> None:
    doc = {
        "format_version": 1,
        "entries": [dataclasses.asdict(e) for e in entries],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def read_manifest(path) -> list[SuiteEntry]:
    with open(path) as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict) or "entries" not in doc:
        raise ValueError(f"{path}: not a suite manifest")
    out = []
    for e in doc["entries"]:
        out.append(
            SuiteEntry(
                name=e["name"],
                path=e["path"],
                fmt=e.get("fmt", "points"),
                n=int(e["n"]),
                s=(None if e.get("s") is None else int(e["s"])),
                p=int(e["p"]),
                r=float(e.get("r", 1.0)),
                seed=e.get("seed"),
                p_rule=e.get("p_rule"),
            )
        )
    return out


def load_entry(entry: SuiteEntry, manifest_path) -> Instance:
    base = os.path.dirname(os.path.abspath(str(manifest_path)))
    full = os.path.join(base, entry.path)
    return read_instance(full, entry.fmt, p=entry.p, r=entry.r, name=entry.name)
