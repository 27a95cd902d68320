"""Sweep configuration: profile families, cells and the TOML config file."""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ..profiles import NormPair, VarianceProfile, make_diagonal, make_iid, make_tensor, read_profile
from ..sampling import DOMAIN_PROFILES, KeyedStream

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ConfigError(ValueError):
    pass


FAMILIES = ("iid", "tensor", "diagonal", "sparse", "file")
VECTOR_KINDS = ("ones", "e1", "geometric", "power", "random")


def _vector(kind: str, param: float | None, length: int, seed: int, salt: int) -> np.ndarray:
    i = np.arange(length, dtype=np.float64)
    if kind == "ones":
        return np.ones(length)
    if kind == "e1":
        v = np.zeros(length)
        v[0] = 1.0
        return v
    if kind == "geometric":
        return (0.8 if param is None else param) ** i
    if kind == "power":
        return (i + 1.0) ** -(0.5 if param is None else param)
    if kind == "random":
        return KeyedStream(seed, DOMAIN_PROFILES).at(salt).random(length)
    raise ConfigError(f"unknown vector kind {kind!r}; expected one of {VECTOR_KINDS}")


def _parse_vector(text: str) -> tuple[str, float | None]:
    kind, _, arg = text.partition(":")
    return kind, (float(arg) if arg else None)


@dataclass(frozen=True)
class ProfileSpec:
    """A profile family with parameters, instantiated per ``(m, n)``.

    String forms: ``iid``, ``iid:s=2``, ``diagonal:alpha=0.5``,
    ``sparse:density=0.1``, ``tensor:x=geometric:0.8,y=ones``,
    ``file:path/to/profile.txt``.
    """

    family: str
    params: tuple[tuple[str, str], ...] = ()

    @classmethod
    def parse(cls, text: str) -> ProfileSpec:
        family, _, rest = text.strip().partition(":")
        if family not in FAMILIES:
            raise ConfigError(f"unknown profile family {family!r}; expected one of {FAMILIES}")
        if family == "file":
            if not rest:
                raise ConfigError("file profile needs a path: file:<path>")
            return cls(family, (("path", rest),))
        params = []
        for item in filter(None, rest.split(",")):
            key, eq, val = item.partition("=")
            if not eq:
                raise ConfigError(f"bad profile parameter {item!r} in {text!r}")
            params.append((key.strip(), val.strip()))
        return cls(family, tuple(params))

    @property
    def label(self) -> str:
        if not self.params:
            return self.family
        return self.family + ":" + ",".join(f"{k}={v}" for k, v in self.params)

    def get(self, key: str, default=None):
        return dict(self.params).get(key, default)

    def build(self, m: int, n: int, seed: int = 0) -> VarianceProfile:
        f = self.family
        if f == "iid":
            return make_iid(m, n, float(self.get("s", 1.0)))
        if f == "diagonal":
            if m != n:
                raise ConfigError(f"diagonal profile needs m == n, got {m}x{n}")
            alpha = float(self.get("alpha", 0.5))
            return make_diagonal((np.arange(n) + 1.0) ** -alpha)
        if f == "tensor":
            xk, xa = _parse_vector(self.get("x", "geometric:0.8"))
            yk, ya = _parse_vector(self.get("y", "geometric:0.8"))
            x = _vector(xk, xa, n, seed, 2 * (m << 20 | n))
            y = _vector(yk, ya, m, seed, 2 * (m << 20 | n) + 1)
            return make_tensor(x, y)
        if f == "sparse":
            density = float(self.get("density", 0.1))
            u = KeyedStream(seed, DOMAIN_PROFILES).at(m << 32 | n).random((m, n))
            return VarianceProfile((u < density).astype(np.float64))
        if f == "file":
            prof = read_profile(self.get("path"))
            if prof.shape != (m, n):
                raise ConfigError(f"{self.get('path')}: profile is {prof.m}x{prof.n}, cell asks {m}x{n}")
            return prof
        raise ConfigError(f"unknown family {f!r}")

    def tensor_vectors(self, m: int, n: int, seed: int = 0):
        """``(x, y)`` of a tensor spec, ``x`` of length ``n`` and ``y`` of length ``m``."""
        if self.family != "tensor":
            raise ConfigError(f"{self.label} is not a tensor profile")
        xk, xa = _parse_vector(self.get("x", "geometric:0.8"))
        yk, ya = _parse_vector(self.get("y", "geometric:0.8"))
        return (_vector(xk, xa, n, seed, 2 * (m << 20 | n)),
                _vector(yk, ya, m, seed, 2 * (m << 20 | n) + 1))


@dataclass(frozen=True)
class Cell:
    index: int
    profile: ProfileSpec
    m: int
    n: int
    pair: NormPair

    @property
    def cell_id(self) -> str:
        return f"{self.profile.label}|{self.m}x{self.n}|{self.pair.p_star:g},{self.pair.q:g}"


DEFAULT_DIMS = ((4, 4), (8, 8), (16, 16), (32, 32), (64, 64))
DEFAULT_PAIRS = tuple((ps, q) for ps in (1.25, 1.5, 2.0) for q in (2.0, 3.0, 4.0, 8.0))
DEFAULT_PROFILES = ("iid", "tensor:x=geometric:0.8,y=geometric:0.8", "diagonal:alpha=0.5", "sparse:density=0.1")

CHEVET_TENSORS = (
    "tensor:x=e1,y=e1",
    "tensor:x=ones,y=ones",
    "tensor:x=geometric:0.8,y=ones",
    "tensor:x=ones,y=power:0.5",
    "tensor:x=random,y=random",
)
CHEVET_DIMS = ((8, 8), (32, 32))
CHEVET_PAIRS = tuple((ps, q) for ps in (1.5, 2.0) for q in (2.0, 4.0))

DIAGONAL_PROFILES = ("diagonal:alpha=0.5", "diagonal:alpha=0", "diagonal:alpha=1")
DIAGONAL_DIMS = ((1, 1), (4, 4), (16, 16), (64, 64))
DIAGONAL_PAIRS = ((1.5, 3.0), (2.0, 2.0), (1.0, 4.0), (2.0, math.inf))

# (label, weight kind, length, p)
CONCENTRATION_CASES = (
    ("unit-p2", "ones", 1, 2.0),
    ("unit-p1", "ones", 1, 1.0),
    ("flat8-p2", "ones", 8, 2.0),
    ("flat8-p4", "ones", 8, 4.0),
    ("flat64-p3", "ones", 64, 3.0),
    ("decay32-p2", "power:0.5", 32, 2.0),
    ("decay32-p6", "power:0.5", 32, 6.0),
    ("geom16-p1.5", "geometric:0.7", 16, 1.5),
    ("random20-p2.5", "random", 20, 2.5),
    ("spike100-p8", "e1", 100, 8.0),
)
CONCENTRATION_T = (0.25, 0.5, 1.0, 1.5, 2.0, 3.0)


@dataclass
class SweepConfig:
    profiles: list[ProfileSpec] = field(default_factory=lambda: [ProfileSpec.parse(s) for s in DEFAULT_PROFILES])
    pairs: list[NormPair] = field(default_factory=lambda: [NormPair(*p) for p in DEFAULT_PAIRS])
    dims: list[tuple[int, int]] = field(default_factory=lambda: list(DEFAULT_DIMS))
    n_samples: int = 500
    seed: int = 0
    constants: dict[str, float] = field(default_factory=lambda: {"C": 1.0})
    output_dir: Path = Path("out")
    restarts: int | None = None
    concentration_samples: int = 100_000
    concentration_cases: list[tuple[str, np.ndarray, float]] | None = None
    t_grid: tuple[float, ...] = CONCENTRATION_T

    def __post_init__(self):
        for m, n in self.dims:
            if m < 1 or n < 1:
                raise ConfigError(f"bad dimensions {m}x{n}")
        if self.n_samples < 2:
            raise ConfigError("samples must be >= 2")

    def cells(self) -> list[Cell]:
        out = []
        for prof in self.profiles:
            for m, n in self.dims:
                for pair in self.pairs:
                    out.append(Cell(len(out), prof, m, n, pair))
        return out

    def with_overrides(self, **kw) -> SweepConfig:
        return replace(self, **{k: v for k, v in kw.items() if v is not None})

    @property
    def C(self) -> float:
        return float(self.constants.get("C", 1.0))


def default_chevet_config(**kw) -> SweepConfig:
    cfg = SweepConfig(
        profiles=[ProfileSpec.parse(s) for s in CHEVET_TENSORS],
        pairs=[NormPair(*p) for p in CHEVET_PAIRS],
        dims=list(CHEVET_DIMS),
    )
    return cfg.with_overrides(**kw)


def default_diagonal_config(**kw) -> SweepConfig:
    cfg = SweepConfig(
        profiles=[ProfileSpec.parse(s) for s in DIAGONAL_PROFILES],
        pairs=[NormPair(*p) for p in DIAGONAL_PAIRS],
        dims=list(DIAGONAL_DIMS),
    )
    return cfg.with_overrides(**kw)


def concentration_cases(cfg: SweepConfig):
    if cfg.concentration_cases is not None:
        return cfg.concentration_cases
    cases = []
    for k, (label, kind, length, p) in enumerate(CONCENTRATION_CASES):
        vk, va = _parse_vector(kind)
        cases.append((label, _vector(vk, va, length, cfg.seed, 1_000_000 + k), p))
    return cases


def _pair(v) -> NormPair:
    if not isinstance(v, (list, tuple)) or len(v) != 2:
        raise ConfigError(f"pair must be [p_star, q], got {v!r}")
    try:
        return NormPair(float(v[0]), float(v[1]))
    except ValueError as e:
        raise ConfigError(str(e)) from None


def _dims(v) -> tuple[int, int]:
    if isinstance(v, int):
        return (v, v)
    if isinstance(v, (list, tuple)) and len(v) == 2:
        return (int(v[0]), int(v[1]))
    raise ConfigError(f"dims entries must be n or [m, n], got {v!r}")


def load_config(path, base: SweepConfig | None = None) -> SweepConfig:
    """Read a TOML config.  Top-level keys override ``base``; see README for the schema."""
    try:
        data = tomllib.loads(Path(path).read_text())
    except (OSError, tomllib.TOMLDecodeError) as e:
        raise ConfigError(f"{path}: {e}") from None
    cfg = base or SweepConfig()
    known = {"profiles", "pairs", "dims", "samples", "seed", "constants", "restarts",
             "concentration"}
    extra = set(data) - known
    if extra:
        raise ConfigError(f"{path}: unknown keys {sorted(extra)}")
    kw = {}
    if "profiles" in data:
        kw["profiles"] = [ProfileSpec.parse(s) for s in data["profiles"]]
    if "pairs" in data:
        kw["pairs"] = [_pair(v) for v in data["pairs"]]
    if "dims" in data:
        kw["dims"] = [_dims(v) for v in data["dims"]]
    if "samples" in data:
        kw["n_samples"] = int(data["samples"])
    if "seed" in data:
        kw["seed"] = int(data["seed"])
    if "restarts" in data:
        kw["restarts"] = int(data["restarts"])
    if "constants" in data:
        kw["constants"] = {**cfg.constants, **{k: float(v) for k, v in data["constants"].items()}}
    conc = data.get("concentration")
    if conc is not None:
        if "samples" in conc:
            kw["concentration_samples"] = int(conc["samples"])
        if "t" in conc:
            kw["t_grid"] = tuple(float(t) for t in conc["t"])
        if "cases" in conc:
            cases = []
            for c in conc["cases"]:
                try:
                    cases.append((str(c["label"]), np.asarray(c["weights"], dtype=float), float(c["p"])))
                except (KeyError, TypeError, ValueError):
                    raise ConfigError(f"{path}: concentration case needs label, weights, p") from None
            kw["concentration_cases"] = cases
    try:
        return cfg.with_overrides(**kw)
    except ValueError as e:
        raise ConfigError(f"{path}: {e}") from None
