"""Problem instances: generation, precomputation and persistence.

Locations are indexed as one ordered set: candidates ``0..D-1`` first,
competitors ``D..D+E-1`` after. Every array indexed by "alternative" in this
package follows that order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, InstanceParseError

SCHEMA_VERSION = 1
DEFAULT_SLOPE = -0.1


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Instance:
    """A choice-based competitive facility location instance.

    Attributes:
        customer_xy: (N, 2) customer coordinates.
        weights: (N,) customer weights q_n, all positive.
        candidate_xy: (D, 2) candidate facility coordinates.
        x0: (D,) factual attractiveness covariate of each candidate.
        competitor_xy: (E, 2) competitor coordinates.
        slope: distance coefficient in the utility (negative).
    """

    customer_xy: np.ndarray
    weights: np.ndarray
    candidate_xy: np.ndarray
    x0: np.ndarray
    competitor_xy: np.ndarray
    slope: float = DEFAULT_SLOPE

    def __post_init__(self):
        for name in ("customer_xy", "weights", "candidate_xy", "x0", "competitor_xy"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        object.__setattr__(self, "slope", float(self.slope))
        self.validate()

    def validate(self) -> None:
        for name in ("customer_xy", "candidate_xy", "competitor_xy"):
            arr = getattr(self, name)
            if arr.ndim != 2 or arr.shape[1] != 2:
                raise ConfigError(f"{name} must have shape (k, 2), got {arr.shape}")
            if arr.shape[0] == 0:
                raise ConfigError(f"{name} must be non-empty")
            if not np.all(np.isfinite(arr)):
                raise ConfigError(f"{name} has non-finite entries")
        if self.weights.shape != (self.n_customers,):
            raise ConfigError("weights must have one entry per customer")
        if not np.all(self.weights > 0):
            raise ConfigError("all customer weights must be positive")
        if self.x0.shape != (self.n_candidates,):
            raise ConfigError("x0 must have one entry per candidate")
        if not np.all(np.isfinite(self.x0)):
            raise ConfigError("x0 has non-finite entries")
        if not np.isfinite(self.slope):
            raise ConfigError("slope must be finite")

    @property
    def n_customers(self) -> int:
        return self.customer_xy.shape[0]

    @property
    def n_candidates(self) -> int:
        return self.candidate_xy.shape[0]

    @property
    def n_competitors(self) -> int:
        return self.competitor_xy.shape[0]

    @property
    def n_locations(self) -> int:
        return self.n_candidates + self.n_competitors

    @property
    def location_xy(self) -> np.ndarray:
        """(D+E, 2) coordinates, candidates first."""
        return np.vstack([self.candidate_xy, self.competitor_xy])

    def __eq__(self, other) -> bool:
        if not isinstance(other, Instance):
            return NotImplemented
        return self.slope == other.slope and all(
            np.array_equal(getattr(self, k), getattr(other, k))
            for k in ("customer_xy", "weights", "candidate_xy", "x0", "competitor_xy")
        )

    __hash__ = None


@dataclass(frozen=True)
class GenerationConfig:
    n_customers: int
    n_candidates: int
    n_competitors: int
    box_side: float = 20.0
    weight_rule: str = "constant"
    seed: int = 0
    slope: float = DEFAULT_SLOPE

    def validate(self) -> None:
        for name in ("n_customers", "n_candidates", "n_competitors"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 1:
                raise ConfigError(f"{name} must be a positive integer, got {v!r}")
        if not self.box_side > 0:
            raise ConfigError(f"box_side must be positive, got {self.box_side!r}")
        if self.weight_rule != "constant":
            raise ConfigError(f"unknown weight rule {self.weight_rule!r}")
        if not (0 <= int(self.seed) < 2**64):
            raise ConfigError("seed must fit in 64 bits")


def generate(config: GenerationConfig) -> Instance:
    """Uniform random instance on ``[0, box_side]^2`` with all ``x0 = 0``."""
    config.validate()
    rng = np.random.default_rng(int(config.seed))
    side = float(config.box_side)
    customers = rng.uniform(0.0, side, size=(config.n_customers, 2))
    candidates = rng.uniform(0.0, side, size=(config.n_candidates, 2))
    competitors = rng.uniform(0.0, side, size=(config.n_competitors, 2))
    return Instance(
        customer_xy=customers,
        weights=np.ones(config.n_customers),
        candidate_xy=candidates,
        x0=np.zeros(config.n_candidates),
        competitor_xy=competitors,
        slope=config.slope,
    )


@dataclass(frozen=True, eq=False)
class PrecomputedUtilities:
    """Fixed quantities derived from an instance.

    ``a_hat[n, d] = exp(slope * dist(n, d))`` for candidates and
    ``b[n, e] = exp(slope * dist(n, e))`` for competitors; ``b_sum`` sums
    ``b`` over competitors. ``ground_cost`` is the squared Euclidean distance
    between every pair of locations (candidates first).
    """

    a_hat: np.ndarray
    b: np.ndarray
    b_sum: np.ndarray
    ground_cost: np.ndarray
    phi0: np.ndarray = field(default=None)

    @property
    def n_candidates(self) -> int:
        return self.a_hat.shape[1]


def _pairwise_dist(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    diff = p[:, None, :] - q[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def precompute(inst: Instance) -> PrecomputedUtilities:
    a_hat = np.exp(inst.slope * _pairwise_dist(inst.customer_xy, inst.candidate_xy))
    b = np.exp(inst.slope * _pairwise_dist(inst.customer_xy, inst.competitor_xy))
    loc = inst.location_xy
    diff = loc[:, None, :] - loc[None, :, :]
    ground = np.einsum("ijk,ijk->ij", diff, diff)
    return PrecomputedUtilities(
        a_hat=_frozen(a_hat),
        b=_frozen(b),
        b_sum=_frozen(b.sum(axis=1)),
        ground_cost=_frozen(ground),
        phi0=_frozen(np.exp(inst.x0)),
    )


# -- persistence -------------------------------------------------------------

def to_dict(inst: Instance) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "cfl_instance",
        "utility_slope": inst.slope,
        "customers": [
            {"xy": [float(x), float(y)], "weight": float(w)}
            for (x, y), w in zip(inst.customer_xy, inst.weights)
        ],
        "candidates": [
            {"xy": [float(x), float(y)], "x0": float(c)}
            for (x, y), c in zip(inst.candidate_xy, inst.x0)
        ],
        "competitors": [{"xy": [float(x), float(y)]} for x, y in inst.competitor_xy],
    }


def _number(value, field_name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise InstanceParseError(f"expected a number, got {value!r}", field_name)
    return float(value)


def _xy(entry, field_name: str) -> list[float]:
    if not isinstance(entry, dict) or "xy" not in entry:
        raise InstanceParseError("missing 'xy'", field_name)
    xy = entry["xy"]
    if not isinstance(xy, list) or len(xy) != 2:
        raise InstanceParseError("'xy' must be a list of two numbers", f"{field_name}.xy")
    return [_number(v, f"{field_name}.xy") for v in xy]


def from_dict(data: dict) -> Instance:
    if not isinstance(data, dict):
        raise InstanceParseError("top level must be an object")
    for key in ("customers", "candidates", "competitors"):
        if key not in data:
            raise InstanceParseError("missing required field", key)
        if not isinstance(data[key], list) or not data[key]:
            raise InstanceParseError("must be a non-empty list", key)
    version = data.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise InstanceParseError(f"unsupported schema version {version!r}", "schema_version")

    cust_xy, weights = [], []
    for i, c in enumerate(data["customers"]):
        name = f"customers[{i}]"
        cust_xy.append(_xy(c, name))
        if "weight" not in c:
            raise InstanceParseError("missing 'weight'", name)
        w = _number(c["weight"], f"{name}.weight")
        if not w > 0:
            raise InstanceParseError(f"weight must be positive, got {w}", f"{name}.weight")
        weights.append(w)

    cand_xy, x0 = [], []
    for i, c in enumerate(data["candidates"]):
        name = f"candidates[{i}]"
        cand_xy.append(_xy(c, name))
        x0.append(_number(c.get("x0", 0.0), f"{name}.x0"))

    comp_xy = [_xy(c, f"competitors[{i}]") for i, c in enumerate(data["competitors"])]
    slope = _number(data.get("utility_slope", DEFAULT_SLOPE), "utility_slope")
    try:
        return Instance(
            customer_xy=np.array(cust_xy),
            weights=np.array(weights),
            candidate_xy=np.array(cand_xy),
            x0=np.array(x0),
            competitor_xy=np.array(comp_xy),
            slope=slope,
        )
    except ConfigError as exc:
        raise InstanceParseError(str(exc)) from exc


def save(inst: Instance, path) -> None:
    # json writes floats with repr(), which round-trips float64 exactly
    Path(path).write_text(json.dumps(to_dict(inst), indent=1) + "\n")


def load(path) -> Instance:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InstanceParseError(f"invalid JSON: {exc}") from exc
    return from_dict(data)
