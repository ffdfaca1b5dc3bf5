"""Run configuration: JSON ingestion, validation, canonical echo."""

from __future__ import annotations

import json
from dataclasses import dataclass, field as dfield

from .manifold import SolveOptions


class ConfigError(ValueError):
    pass


_DEFAULT_SOLVER = {
    "tol": 1e-8,
    "max_outer": 800,
    "reduce_tol": 1e-9,
    "scale_rtol": 1e-8,
}


@dataclass
class RunConfig:
    grid: dict
    potential: dict
    nonlinearity: dict
    epsilons: list
    solver: dict
    reference_grid: dict
    groundstate: dict
    seed: int = 0
    workers: int = 1
    output_dir: str = "out"
    dx_over_eps: float | None = None

    def to_dict(self) -> dict:
        return {
            "grid": self.grid,
            "potential": self.potential,
            "nonlinearity": self.nonlinearity,
            "epsilons": self.epsilons,
            "dx_over_eps": self.dx_over_eps,
            "solver": self.solver,
            "reference_grid": self.reference_grid,
            "groundstate": self.groundstate,
            "seed": self.seed,
            "workers": self.workers,
            "output_dir": self.output_dir,
        }

    def solve_options(self) -> SolveOptions:
        s = self.solver
        return SolveOptions(
            tol=float(s["tol"]),
            max_outer=int(s["max_outer"]),
            reduce_tol=float(s["reduce_tol"]),
            scale_rtol=float(s["scale_rtol"]),
        )


def _require(mapping: dict, key: str, context: str):
    if key not in mapping:
        raise ConfigError(f"missing {context}.{key}")
    return mapping[key]


def validate_config(raw: dict) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")

    grid = dict(_require(raw, "grid", "config"))
    d = int(_require(grid, "dimension", "grid"))
    n = int(_require(grid, "points_per_axis", "grid"))
    L = float(_require(grid, "half_extent", "grid"))
    if d not in (1, 2, 3):
        raise ConfigError(f"grid.dimension must be 1, 2 or 3, got {d}")
    if n < 3 or n % 2 == 0:
        raise ConfigError(f"grid.points_per_axis must be odd and >= 3, got {n}")
    if L <= 0:
        raise ConfigError(f"grid.half_extent must be positive, got {L}")

    pot = dict(_require(raw, "potential", "config"))
    kind = _require(pot, "kind", "potential")
    if kind not in ("paper", "constant"):
        raise ConfigError(f"unknown potential.kind {kind!r}")
    wells = _require(pot, "wells", "potential")
    if not isinstance(wells, list) or not wells:
        raise ConfigError("potential.wells must be a nonempty list")
    for i, w in enumerate(wells):
        center = _require(w, "center", f"wells[{i}]")
        if len(center) != d:
            raise ConfigError(f"wells[{i}].center has {len(center)} coordinates for d={d}")
        for key in ("inner", "middle", "outer"):
            _require(w, key, f"wells[{i}]")
        if not (0 < w["inner"] < w["middle"] < w["outer"]):
            raise ConfigError(f"wells[{i}] radii must nest strictly")
        if w.get("shape", "box") not in ("box", "ball"):
            raise ConfigError(f"wells[{i}].shape must be 'box' or 'ball'")

    nl = dict(_require(raw, "nonlinearity", "config"))
    p = float(nl.get("p", 2.5))
    q = float(nl.get("q", 2.5))
    if not (2.0 < p < 3.0 and 2.0 < q < 3.0):
        raise ConfigError(f"nonlinearity exponents must lie in (2,3), got p={p}, q={q}")
    if float(nl.get("a", 0.1)) <= 0:
        raise ConfigError("nonlinearity.a must be positive")

    eps = [float(e) for e in raw.get("epsilons", [])]
    if not eps:
        raise ConfigError("epsilons must be a nonempty list")
    if any(e <= 0 for e in eps):
        raise ConfigError("epsilons must be positive")
    if len(eps) > 1 and any(b >= a for a, b in zip(eps, eps[1:])):
        raise ConfigError("epsilons must be strictly decreasing")

    solver = dict(_DEFAULT_SOLVER)
    solver.update(raw.get("solver", {}))

    ref = dict(raw.get("reference_grid", {"half_extent": 20.0, "points_per_axis": 2001}))
    gs = dict(raw.get("groundstate", {}))
    lams = [float(x) for x in gs.get("lambdas", [])]
    if len(set(lams)) != len(lams):
        raise ConfigError("groundstate.lambdas contains duplicates")
    if any(l <= 0 for l in lams):
        raise ConfigError("groundstate.lambdas must be positive")
    gs["lambdas"] = lams
    gs.setdefault("n_starts", 3)

    workers = int(raw.get("workers", 1))
    if workers < 1:
        raise ConfigError("workers must be >= 1")
    dx_over_eps = raw.get("dx_over_eps")
    if dx_over_eps is not None and float(dx_over_eps) <= 0:
        raise ConfigError("dx_over_eps must be positive")

    return RunConfig(
        grid={"dimension": d, "half_extent": L, "points_per_axis": n},
        potential={"kind": kind, "wells": wells, "value": float(pot.get("value", 1.0))},
        nonlinearity={
            "p": p,
            "q": q,
            "a": float(nl.get("a", 0.1)),
            "axis_sigma": float(nl.get("axis_sigma", 1e-3)),
        },
        epsilons=eps,
        solver=solver,
        reference_grid=ref,
        groundstate=gs,
        seed=int(raw.get("seed", 0)),
        workers=workers,
        output_dir=str(raw.get("output_dir", "out")),
        dx_over_eps=None if dx_over_eps is None else float(dx_over_eps),
    )


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: malformed JSON ({exc})") from exc
    except OSError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return validate_config(raw)


def points_for_eps(cfg: RunConfig, eps: float) -> int:
    """Per-eps axis resolution: the configured n, refined so dx <= eps * dx_over_eps."""
    n = cfg.grid["points_per_axis"]
    if cfg.dx_over_eps is not None:
        L = cfg.grid["half_extent"]
        need = int(-(-2.0 * L // (eps * cfg.dx_over_eps))) + 1
        if need % 2 == 0:
            need += 1
        n = max(n, need)
    return n
