"""Plain-text run manifests.

Grammar: UTF-8 lines of ``key=value``; blank lines and lines starting with
``#`` are ignored. Keys are dotted identifiers. Values are one of

* a float in ``repr`` form (round-trips exactly), ``inf``, ``-inf`` or ``nan``,
* a complex number written ``re+imj`` with ``repr`` components,
* an integer, ``true``/``false``, or a bare string,
* a list: comma-separated scalars inside ``[...]``.

Keys are written in sorted order so identical inputs give identical files.
"""

from __future__ import annotations

import math
import re
from pathlib import Path

_KEY = re.compile(r"^[A-Za-z_][A-Za-z0-9_.\-]*$")


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, complex):
        sign = "-" if math.copysign(1.0, v.imag) < 0 else "+"
        return f"{v.real!r}{sign}{abs(v.imag)!r}j"
    if isinstance(v, (list, tuple)):
        return "[" + ",".join(_fmt(x) for x in v) + "]"
    if hasattr(v, "item"):
        return _fmt(v.item())
    s = str(v)
    if "\n" in s:
        raise ValueError("manifest values must be single-line")
    return s


def format_manifest(data: dict, header: str | None = None) -> str:
    lines = []
    if header:
        lines += [f"# {h}" for h in header.splitlines()]
    for k in sorted(data):
        if not _KEY.match(k):
            raise ValueError(f"invalid manifest key {k!r}")
        lines.append(f"{k}={_fmt(data[k])}")
    return "\n".join(lines) + "\n"


def write_manifest(path, data: dict, header: str | None = None) -> None:
    Path(path).write_text(format_manifest(data, header), encoding="utf-8")


def _parse_scalar(s: str):
    s = s.strip()
    if s == "true":
        return True
    if s == "false":
        return False
    if re.fullmatch(r"[+-]?\d+", s):
        return int(s)
    try:
        return float(s)
    except ValueError:
        pass
    if s.endswith("j"):
        try:
            return complex(s)
        except ValueError:
            pass
    return s


def parse_value(s: str):
    s = s.strip()
    if s.startswith("[") and s.endswith("]"):
        inner = s[1:-1].strip()
        return [] if not inner else [_parse_scalar(x) for x in inner.split(",")]
    return _parse_scalar(s)


def read_manifest(path) -> dict:
    out = {}
    for n, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"line {n}: expected key=value")
        k, v = line.split("=", 1)
        k = k.strip()
        if not _KEY.match(k):
            raise ValueError(f"line {n}: invalid key {k!r}")
        out[k] = parse_value(v)
    return out
