"""Run configuration, verification report assembly, JSON/CSV emission."""

from __future__ import annotations

import csv
import io
import json
import math
import re
from dataclasses import asdict, dataclass, field
from importlib import resources
from typing import Any, Sequence

import numpy as np

from .tolerances import GRAY, LOOSE, TIGHT

SCHEMA_VERSION = 1
MIN_ORDER, MAX_ORDER = 4, 10


class ConfigError(ValueError):
    """Malformed or inconsistent run configuration (CLI exit code 2)."""


@dataclass
class GridSpec:
    counts: tuple[int, ...] = (5, 5)
    bounds: tuple[tuple[float, float], ...] | None = None

    def __str__(self) -> str:
        head = "x".join(str(k) for k in self.counts)
        if self.bounds is None:
            return head
        return head + "@" + "x".join(f"[{a!r},{b!r}]" for a, b in self.bounds)


_GRID = re.compile(r"^\s*(\d+(?:\s*[x×]\s*\d+)*)\s*(?:@\s*(.+))?$")
_BOX = re.compile(r"\[\s*([^,\]]+)\s*,\s*([^\]]+)\s*\]")


def parse_grid(text: str) -> GridSpec:
    """``"5x5"`` or ``"5×5@[-0.3,0.3]×[-0.3,0.3]"``."""
    m = _GRID.match(text)
    if m is None:
        raise ConfigError(f"malformed grid {text!r}; expected e.g. 5x5@[-0.3,0.3]x[-0.3,0.3]")
    counts = tuple(int(k) for k in re.split(r"\s*[x×]\s*", m.group(1)))
    if any(k < 1 for k in counts):
        raise ConfigError(f"grid counts must be positive in {text!r}")
    bounds = None
    if m.group(2):
        boxes = _BOX.findall(m.group(2))
        rest = _BOX.sub("", m.group(2))
        if not boxes or re.sub(r"[\s x×]", "", rest):
            raise ConfigError(f"malformed grid bounds in {text!r}")
        try:
            bounds = tuple((float(a), float(b)) for a, b in boxes)
        except ValueError as exc:
            raise ConfigError(f"non-numeric grid bounds in {text!r}") from exc
        if len(bounds) != len(counts):
            raise ConfigError(f"grid {text!r} has {len(counts)} counts but {len(bounds)} intervals")
        if any(a > b for a, b in bounds):
            raise ConfigError(f"empty interval in grid {text!r}")
    return GridSpec(counts, bounds)


def parse_mu(text: str) -> list[float]:
    try:
        return [float(t) for t in text.replace(" ", "").split(",") if t]
    except ValueError as exc:
        raise ConfigError(f"malformed mu list {text!r}") from exc


def parse_tol(text: str) -> dict[str, float]:
    """``"1e-6"`` (loose only) or ``"tight=1e-8,loose=1e-6,gray=1e-3"``."""
    out = {}
    try:
        if "=" not in text:
            return {"loose": float(text)}
        for part in text.split(","):
            key, val = part.split("=")
            key = key.strip()
            if key not in ("tight", "loose", "gray"):
                raise ConfigError(f"unknown tolerance {key!r}")
            out[key] = float(val)
    except ValueError as exc:
        raise ConfigError(f"malformed tolerance {text!r}") from exc
    return out


@dataclass
class RunConfig:
    command: str = "verify-all"
    surface: str = "sphere(1)"
    grid: GridSpec = field(default_factory=GridSpec)
    mu_values: list[float] | None = None
    jet_order: int = 8
    tolerances: dict[str, float] = field(default_factory=lambda: {"tight": TIGHT, "loose": LOOSE, "gray": GRAY})
    output: str | None = None
    format: str = "json"
    jobs: int = 1

    def validate(self) -> None:
        if not MIN_ORDER <= self.jet_order <= MAX_ORDER:
            raise ConfigError(f"jet order must lie in [{MIN_ORDER}, {MAX_ORDER}], got {self.jet_order}")
        if self.format not in ("json", "csv"):
            raise ConfigError(f"unknown format {self.format!r}")
        if self.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        t = self.tolerances
        if not (0 < t["tight"] and 0 < t["loose"] < t["gray"]):
            raise ConfigError(f"inconsistent tolerances {t}")

    def to_json(self) -> dict:
        d = asdict(self)
        d["grid"] = str(self.grid)
        return d

    @classmethod
    def from_json(cls, doc: dict) -> "RunConfig":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(doc) - known
        if extra:
            raise ConfigError(f"unknown config keys {sorted(extra)}")
        doc = dict(doc)
        if "grid" in doc and isinstance(doc["grid"], str):
            doc["grid"] = parse_grid(doc["grid"])
        if "tolerances" in doc:
            doc["tolerances"] = {**cls().tolerances, **doc["tolerances"]}
        try:
            return cls(**doc)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc


def clean(value: Any) -> Any:
    """Convert numpy values to JSON-native ones; non-finite floats become null."""
    if isinstance(value, dict):
        return {str(k): clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [clean(v) for v in value]
    if isinstance(value, np.ndarray):
        return clean(value.tolist())
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return v if math.isfinite(v) else None
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def load_schema() -> dict:
    return json.loads(resources.files("affinelab").joinpath("report_schema.json").read_text())


def validate_report(report: dict) -> None:
    import jsonschema

    jsonschema.validate(report, load_schema())


def dumps(report: dict) -> str:
    # json emits floats with repr, the shortest round-tripping decimal
    return json.dumps(clean(report), indent=2, sort_keys=False, allow_nan=False) + "\n"


def frame_summary(fp) -> dict:
    res = {k: fp.residuals.get(k) for k in RESIDUAL_KEYS}
    return {
        "u": fp.u,
        "x": fp.x,
        "Y": fp.Y,
        "H": fp.H,
        "lambda": fp.lam,
        "L": fp.L,
        "A_norm2": fp.A_norm2,
        "orientation": fp.orientation,
        "residuals": res,
    }


RESIDUAL_KEYS = (
    "unimodular",
    "volume_identity",
    "detg",
    "apolarity",
    "gauss_y_normal",
    "yi_normal",
    "b_symmetry",
    "gauss",
    "codazzi_A",
    "codazzi_B",
)

PARALLEL_KEYS = (
    "c_detT",
    "c_consistency",
    "a_residual",
    "pushed_basis",
    "mutg",
    "b_invariance",
    "mub_cb",
    "lambda_formula",
    "muhandh",
    "detg",
)


def parallel_summary(rec) -> dict:
    return {
        "u": rec.u,
        "mu": rec.mu,
        "detT": rec.detT,
        "c": rec.c,
        "lambda_mu": rec.lam_mu,
        "lambda_formula": rec.lam_formula,
        "residuals": {k: rec.residuals[k] for k in PARALLEL_KEYS},
    }


def invariants_csv(samples: Sequence[dict], n: int) -> str:
    """CSV export of FramePoint summaries (one row per grid point)."""
    coord = ["u", "v"] if n == 2 else [f"u{i + 1}" for i in range(n)]
    header = [
        *coord,
        *[f"lambda_{i + 1}" for i in range(n)],
        *[f"L_{i + 1}" for i in range(n)],
        "apolarity_residual",
        "gauss_residual",
        "codazzi_A_residual",
        "codazzi_B_residual",
    ]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for s in samples:
        r = s["residuals"]
        w.writerow(
            [repr(float(v)) for v in [*s["u"], *s["lambda"], *s["L"]]]
            + ["" if r[k] is None else repr(float(r[k])) for k in ("apolarity", "gauss", "codazzi_A", "codazzi_B")]
        )
    return buf.getvalue()


def parallel_csv(records: Sequence[dict], n: int) -> str:
    """CSV export of ParallelRecord summaries (grid size x |mu| rows)."""
    coord = ["u", "v"] if n == 2 else [f"u{i + 1}" for i in range(n)]
    header = [*coord, "mu", "detT", "c", *[f"lambda_mu_{i + 1}" for i in range(n)], *PARALLEL_KEYS]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in records:
        w.writerow(
            [repr(float(v)) for v in [*r["u"], r["mu"], r["detT"], r["c"], *r["lambda_mu"]]]
            + [repr(float(r["residuals"][k])) for k in PARALLEL_KEYS]
        )
    return buf.getvalue()


__all__ = [
    "SCHEMA_VERSION",
    "ConfigError",
    "GridSpec",
    "RunConfig",
    "parse_grid",
    "parse_mu",
    "parse_tol",
    "clean",
    "dumps",
    "load_schema",
    "validate_report",
    "frame_summary",
    "parallel_summary",
    "invariants_csv",
    "parallel_csv",
    "RESIDUAL_KEYS",
    "PARALLEL_KEYS",
]
