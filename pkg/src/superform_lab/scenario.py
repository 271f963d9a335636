"""Scenario configuration: a flat key=value file overridden by command-line flags."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from fractions import Fraction
from pathlib import Path

SUITES = ("exact-identities", "jets", "thom", "lattice", "phi", "torsion", "fock", "all")


class ScenarioError(ValueError):
    """Invalid scenario; maps to the usage-error exit status."""


def _floats(text: str) -> tuple[float, ...]:
    parts = [p for p in text.replace(";", ",").split(",") if p.strip()]
    if not parts:
        raise ScenarioError(f"empty value list {text!r}")
    return tuple(float(p) for p in parts)


@dataclass(frozen=True)
class Scenario:
    """One run request.  ``None`` means "use the suite's default profile"."""

    suite: str = "all"
    n: int | None = None
    base_dim: int | None = None
    jet_order: int | None = None
    mode: str | None = None
    seed: int | None = None
    t: tuple[float, ...] | None = None
    s: tuple[float, ...] | None = None
    lattice_scale: str = "1"
    radius: str = "auto"
    tol: float | None = None
    workers: int = 1
    extra: dict = field(default_factory=dict, compare=False)

    # -- construction -------------------------------------------------------

    @classmethod
    def from_pairs(cls, pairs: dict[str, str]) -> "Scenario":
        kw: dict = {}
        known = {f.name for f in fields(cls)} - {"extra"}
        for raw_key, raw in pairs.items():
            key = raw_key.strip().replace("-", "_")
            val = str(raw).strip()
            if key not in known:
                raise ScenarioError(f"unknown scenario key {raw_key!r}")
            try:
                if key in ("n", "base_dim", "jet_order", "seed", "workers"):
                    kw[key] = int(val)
                elif key == "tol":
                    kw[key] = float(val)
                elif key in ("t", "s"):
                    kw[key] = _floats(val)
                else:
                    kw[key] = val
            except ValueError as exc:
                raise ScenarioError(f"bad value for {raw_key}: {val!r}") from exc
        return cls(**kw)

    @classmethod
    def from_file(cls, path: str | Path) -> "Scenario":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ScenarioError(f"cannot read scenario file: {exc}") from exc
        return cls.from_pairs(parse_pairs(text))

    def merged(self, overrides: dict[str, str]) -> "Scenario":
        """A new scenario with ``overrides`` (raw key=value strings) applied on top."""
        base = {k: _fmt(v) for k, v in asdict(self).items() if k != "extra" and v is not None}
        return Scenario.from_pairs({**base, **overrides})

    # -- validation -------------------------------------------------------------

    def validate(self) -> "Scenario":
        if self.suite not in SUITES:
            raise ScenarioError(f"unknown suite {self.suite!r}; choose from {', '.join(SUITES)}")
        if self.n is not None and not 1 <= self.n <= 4:
            raise ScenarioError("n must be between 1 and 4")
        if self.base_dim is not None and self.base_dim < 1:
            raise ScenarioError("base-dim must be positive")
        if self.jet_order is not None and not 0 <= self.jet_order <= 6:
            raise ScenarioError("jet-order must be between 0 and 6")
        if self.mode not in (None, "exact", "float"):
            raise ScenarioError("mode must be exact or float")
        for name in ("t", "s"):
            vals = getattr(self, name)
            if vals is not None and any(v != v for v in vals):
                raise ScenarioError(f"{name} contains NaN")
        if self.t is not None and any(v <= 0 for v in self.t):
            raise ScenarioError("t values must be positive")
        try:
            c = Fraction(self.lattice_scale)
        except (ValueError, ZeroDivisionError) as exc:
            raise ScenarioError(f"bad lattice scale {self.lattice_scale!r}") from exc
        if c <= 0:
            raise ScenarioError("lattice scale must be positive")
        if self.radius != "auto":
            try:
                r = int(self.radius)
            except ValueError as exc:
                raise ScenarioError("radius must be 'auto' or a non-negative integer") from exc
            if r < 0:
                raise ScenarioError("radius must be non-negative")
        if self.tol is not None and not self.tol > 0:
            raise ScenarioError("tol must be positive")
        if self.workers < 1:
            raise ScenarioError("workers must be at least 1")
        self._suite_preconditions()
        return self

    def _suite_preconditions(self) -> None:
        n, suite = self.n, self.suite
        if n is None:
            return
        if suite == "phi" and (n % 2 == 0 or n == 1):
            raise ScenarioError("phi needs an odd rank N >= 3")
        if suite == "lattice" and self.mode == "exact":
            raise ScenarioError("lattice sums are float only")
        if suite in ("jets", "phi", "lattice") and self.base_dim is not None and self.base_dim < 2 * n - 1:
            raise ScenarioError("base-dim must be at least 2N - 1 for this suite")
        if suite == "exact-identities" and self.mode == "float" and n > 3:
            raise ScenarioError("float exact-identities support N <= 3")

    # -- accessors used by the suites ------------------------------------------

    @property
    def base_seed(self) -> int:
        return 1 if self.seed is None else self.seed

    def seeds(self, default: tuple[int, ...]) -> tuple[int, ...]:
        return default if self.seed is None else (self.seed,)

    def ranks(self, default: tuple[int, ...]) -> tuple[int, ...]:
        return default if self.n is None else (self.n,)

    def t_values(self, default: tuple[float, ...]) -> tuple[float, ...]:
        return default if self.t is None else self.t

    def s_values(self, default: tuple[float, ...]) -> tuple[float, ...]:
        return default if self.s is None else self.s

    def tol_or(self, default: float) -> float:
        return default if self.tol is None else self.tol

    def exact_or(self, default: bool) -> bool:
        return default if self.mode is None else self.mode == "exact"

    @property
    def scale(self) -> Fraction:
        return Fraction(self.lattice_scale)

    @property
    def radius_value(self) -> int | None:
        return None if self.radius == "auto" else int(self.radius)

    def as_dict(self) -> dict:
        d = {k: v for k, v in asdict(self).items() if k not in ("extra", "workers")}
        return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}


def _fmt(v) -> str:
    if isinstance(v, tuple):
        return ",".join(repr(x) for x in v)
    return str(v)


def parse_pairs(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for no, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ScenarioError(f"line {no}: expected key=value")
        k, v = line.split("=", 1)
        if not k.strip():
            raise ScenarioError(f"line {no}: empty key")
        out[k.strip()] = v.strip()
    return out
