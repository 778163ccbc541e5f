"""Flat key=value run configuration.

The format is deliberately language-neutral: one ``key = value`` pair per
line, ``#`` comments, dotted section prefixes (``domain.``, ``solver.``,
``moser.``).  Every numeric precondition of the downstream modules is
checked at parse time so misconfigurations fail before any assembly starts.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

__all__ = ["RunConfig", "parse_config", "load_config", "ConfigError"]

KNOWN_KEYS = {
    "domain.kind", "domain.a", "domain.b",
    "domain.ax", "domain.bx", "domain.ay", "domain.by",
    "domain.h", "domain.r_ext",
    "s", "eps", "eps_list",
    "nonlinearity.model", "nonlinearity.p",
    "solver.path_points", "solver.grad_tol", "solver.max_outer",
    "solver.descent_step", "solver.seed", "solver.jitter",
    "moser.n_max",
    "seed",
}


class ConfigError(ValueError):
    """Configuration file problem with an actionable message."""


@dataclass
class RunConfig:
    """Validated run parameters plus the hash of their textual source."""

    domain_kind: str = "interval"
    a: float = -1.0
    b: float = 1.0
    ax: float = 0.0
    bx: float = 1.0
    ay: float = 0.0
    by: float = 1.0
    h: float = 0.01
    r_ext: float | None = None        # None: 5 * diam(domain)
    s: float = 0.25
    eps: float | None = None
    eps_list: list[float] = field(default_factory=list)
    model: str = "power"
    p: float = 3.0
    path_points: int = 21
    grad_tol: float | None = None
    max_outer: int = 20000
    descent_step: float = 0.5
    solver_seed: int = 0
    jitter: float = 0.0
    n_max: int = 12
    seed: int = 0
    config_sha256: str = ""

    @property
    def dim(self) -> int:
        return 1 if self.domain_kind == "interval" else 2

    def diameter(self) -> float:
        if self.domain_kind == "interval":
            return self.b - self.a
        return float(((self.bx - self.ax) ** 2 + (self.by - self.ay) ** 2) ** 0.5)

    def resolved_r_ext(self) -> float:
        return 5.0 * self.diameter() if self.r_ext is None else self.r_ext

    def first_eps(self) -> float:
        if self.eps is not None:
            return self.eps
        if self.eps_list:
            return self.eps_list[0]
        raise ConfigError("no eps configured: set 'eps' or 'eps_list'")

    def build_mesh(self):
        from .mesh import build_box_mesh, build_interval_mesh

        if self.domain_kind == "interval":
            return build_interval_mesh(self.a, self.b, self.h, self.resolved_r_ext())
        return build_box_mesh(((self.ax, self.bx), (self.ay, self.by)),
                              self.h, self.resolved_r_ext())

    def nonlinearity(self):
        from .problem import power_nonlinearity

        if self.model != "power":
            raise ConfigError(
                f"nonlinearity.model '{self.model}' has no CLI constructor; "
                "table models are built through the library API"
            )
        return power_nonlinearity(self.p)

    def mpa_config(self):
        from .mountain_pass import MPAConfig

        return MPAConfig(path_points=self.path_points, grad_tol=self.grad_tol,
                         max_outer=self.max_outer, descent_step=self.descent_step,
                         seed=self.solver_seed, jitter=self.jitter)


def _parse_float(key: str, raw: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"key '{key}': expected a number, got '{raw}'") from None


def _parse_int(key: str, raw: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"key '{key}': expected an integer, got '{raw}'") from None


def parse_config(text: str) -> RunConfig:
    """Parse and validate configuration text; raises ConfigError on problems."""
    pairs: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got '{line.strip()}'")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key not in KNOWN_KEYS:
            raise ConfigError(
                f"line {lineno}: unknown key '{key}' (known keys: "
                + ", ".join(sorted(KNOWN_KEYS)) + ")"
            )
        if key in pairs:
            raise ConfigError(f"line {lineno}: duplicate key '{key}'")
        pairs[key] = raw

    cfg = RunConfig()
    cfg.config_sha256 = hashlib.sha256(text.encode()).hexdigest()

    if "domain.kind" in pairs:
        kind = pairs["domain.kind"]
        if kind not in ("interval", "box"):
            raise ConfigError(f"domain.kind must be 'interval' or 'box', got '{kind}'")
        cfg.domain_kind = kind
    for key, attr in (("domain.a", "a"), ("domain.b", "b"),
                      ("domain.ax", "ax"), ("domain.bx", "bx"),
                      ("domain.ay", "ay"), ("domain.by", "by"),
                      ("domain.h", "h"), ("s", "s"),
                      ("solver.descent_step", "descent_step"),
                      ("nonlinearity.p", "p"), ("solver.jitter", "jitter")):
        if key in pairs:
            setattr(cfg, attr, _parse_float(key, pairs[key]))
    if "domain.r_ext" in pairs:
        cfg.r_ext = _parse_float("domain.r_ext", pairs["domain.r_ext"])
    if "eps" in pairs:
        cfg.eps = _parse_float("eps", pairs["eps"])
    if "eps_list" in pairs:
        items = [x for x in pairs["eps_list"].replace(",", " ").split() if x]
        if not items:
            raise ConfigError("eps_list is empty: give at least one eps value")
        cfg.eps_list = [_parse_float("eps_list", x) for x in items]
    if "solver.grad_tol" in pairs and pairs["solver.grad_tol"].lower() != "auto":
        cfg.grad_tol = _parse_float("solver.grad_tol", pairs["solver.grad_tol"])
    for key, attr in (("solver.path_points", "path_points"),
                      ("solver.max_outer", "max_outer"),
                      ("solver.seed", "solver_seed"),
                      ("moser.n_max", "n_max"), ("seed", "seed")):
        if key in pairs:
            setattr(cfg, attr, _parse_int(key, pairs[key]))
    if "nonlinearity.model" in pairs:
        cfg.model = pairs["nonlinearity.model"]

    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    if cfg.h <= 0.0:
        raise ConfigError(f"domain.h must be positive, got {cfg.h}")
    if cfg.domain_kind == "interval":
        if cfg.a >= cfg.b:
            raise ConfigError(f"interval needs domain.a < domain.b, got ({cfg.a}, {cfg.b})")
    else:
        if cfg.ax >= cfg.bx or cfg.ay >= cfg.by:
            raise ConfigError("box needs domain.ax < domain.bx and domain.ay < domain.by")
    if cfg.r_ext is not None and cfg.r_ext < cfg.diameter():
        raise ConfigError(
            f"domain.r_ext = {cfg.r_ext} is thinner than the domain diameter "
            f"{cfg.diameter():.6g}; the collar would truncate the kernel too hard"
        )
    if not 0.0 < cfg.s < 1.0:
        raise ConfigError(f"s must lie in (0, 1), got {cfg.s}")
    if cfg.dim <= 2.0 * cfg.s:
        raise ConfigError(
            f"need dim > 2 s (finite critical exponent): dim={cfg.dim}, s={cfg.s}; "
            "for an interval use s < 1/2"
        )
    two_star = 2.0 * cfg.dim / (cfg.dim - 2.0 * cfg.s)
    if cfg.model == "power" and not (2.0 < cfg.p < two_star):
        raise ConfigError(
            f"nonlinearity.p must lie in (2, 2*_s) = (2, {two_star:.6g}), got {cfg.p}"
        )
    for value in ([cfg.eps] if cfg.eps is not None else []) + cfg.eps_list:
        if value <= 0.0:
            raise ConfigError(f"eps values must be positive, got {value}")
    if cfg.path_points < 8:
        raise ConfigError(f"solver.path_points must be >= 8, got {cfg.path_points}")
    if cfg.grad_tol is not None and cfg.grad_tol <= 0.0:
        raise ConfigError(f"solver.grad_tol must be positive, got {cfg.grad_tol}")
    if cfg.max_outer < 1:
        raise ConfigError(f"solver.max_outer must be >= 1, got {cfg.max_outer}")
    if cfg.n_max < 1:
        raise ConfigError(f"moser.n_max must be >= 1, got {cfg.n_max}")


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    return parse_config(path.read_text())
