"""Problem instances: parameter sets, random generation, candidate grids and JSON I/O."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from functools import lru_cache
from pathlib import Path

import numpy as np

from .exceptions import ParameterError, SchemaError

SCHEMA_VERSION = 1
DEFAULT_NODE_CHOICES = (5, 10, 15, 20, 25, 30)
DEFAULT_AREA_SIDE = 3000.0

_QUADRATURE_CELLS = 64


def db_to_linear(db):
    return 10.0 ** (db / 10.0)


def dbm_to_watts(dbm):
    return 10.0 ** ((dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class EnvParams:
    """Radio environment and data-collection constants (SI units, linear ratios)."""

    beta: float = 12.08
    beta_tilde: float = 0.11
    xi_los: float = 1.0
    xi_nlos: float = 20.0
    carrier_freq: float = 2e9
    light_speed: float = 3e8
    noise_power: float = 1e-14
    ch_tx_power: float = 0.1
    snr_threshold: float = 100.0
    bandwidth: float = 1e6
    packet_bits: float = 5e6
    slot_seconds: float = 0.1
    altitude: float = 100.0
    l_sub: int = 5

    def __post_init__(self):
        for f in fields(self):
            if not getattr(self, f.name) > 0:
                raise SchemaError(f"must be positive, got {getattr(self, f.name)!r}", field=f"env.{f.name}")
        if not self.xi_los < self.xi_nlos:
            raise SchemaError("xi_los must be smaller than xi_nlos", field="env.xi_los")
        if not self.snr_threshold > 1:
            raise SchemaError("snr_threshold must exceed 1 (linear)", field="env.snr_threshold")

    def with_threshold_db(self, gamma_db):
        return _replace(self, snr_threshold=db_to_linear(gamma_db))


@dataclass(frozen=True)
class UavParams:
    """Rotary-wing UAV speed and propulsion constants."""

    speed: float = 15.0
    p0: float = 99.66
    p1: float = 120.16
    u_tip: float = 120.0
    v0: float = 0.002
    d0: float = 0.48
    rho: float = 1.225
    s0: float = 0.0001
    delta: float = 0.5
    p_com: float = 0.1

    def __post_init__(self):
        for f in fields(self):
            if not getattr(self, f.name) > 0:
                raise SchemaError(f"must be positive, got {getattr(self, f.name)!r}", field=f"uav.{f.name}")

    @property
    def hover_power(self):
        return self.p0 + self.p1


@dataclass(frozen=True)
class GroundCluster:
    ch_position: tuple[float, float]
    node_count: int

    def __post_init__(self):
        if int(self.node_count) != self.node_count or self.node_count < 1:
            raise SchemaError(f"node count must be an integer >= 1, got {self.node_count!r}",
                              field="clusters.n")
        object.__setattr__(self, "ch_position", (float(self.ch_position[0]), float(self.ch_position[1])))
        object.__setattr__(self, "node_count", int(self.node_count))


@dataclass(frozen=True)
class Scenario:
    """Start point, ground clusters and the constants the tour is evaluated under."""

    start: tuple[float, float, float]
    clusters: tuple[GroundCluster, ...]
    env: EnvParams = field(default_factory=EnvParams)
    uav: UavParams = field(default_factory=UavParams)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "clusters", tuple(self.clusters))
        object.__setattr__(self, "start", tuple(float(v) for v in self.start))
        if len(self.clusters) < 1:
            raise SchemaError("at least one cluster is required", field="clusters")
        if len(self.start) != 3 or not math.isclose(self.start[2], self.env.altitude):
            raise SchemaError("start altitude must equal env.altitude", field="start")

    @property
    def m(self):
        return len(self.clusters)

    @property
    def node_counts(self):
        return np.array([c.node_count for c in self.clusters], dtype=np.int64)

    @property
    def ch_positions(self):
        return np.array([c.ch_position for c in self.clusters], dtype=np.float64)

    def replace(self, **changes):
        return _replace(self, **changes)


def _replace(obj, **changes):
    kwargs = {f.name: getattr(obj, f.name) for f in fields(obj)}
    kwargs.update(changes)
    return type(obj)(**kwargs)


@dataclass(frozen=True)
class CandidateGrid:
    cluster_index: int
    points: np.ndarray
    radius: float

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64).reshape(-1, 3)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if len(pts) < 1:
            raise ParameterError("a candidate grid needs at least one point")

    def __len__(self):
        return len(self.points)


def generate_scenario(seed, m, area_side=DEFAULT_AREA_SIDE, node_count_choices=DEFAULT_NODE_CHOICES,
                      env=None, uav=None):
    """Draw a random instance: CH positions uniform over the square, node counts from a choice set.

    CH positions and node counts use separate sub-streams of one counter-based
    generator, so either can be reproduced independently of the other.
    """
    if int(m) != m or m < 1:
        raise ParameterError(f"m must be a positive integer, got {m!r}")
    if not area_side > 0:
        raise ParameterError(f"area_side must be positive, got {area_side!r}")
    choices = np.asarray(list(node_count_choices), dtype=np.int64)
    if choices.size == 0:
        raise ParameterError("node_count_choices must be nonempty")
    if np.any(choices < 1):
        raise ParameterError("node counts must be >= 1")
    env = env or EnvParams()
    uav = uav or UavParams()

    pos_seq, count_seq = np.random.SeedSequence(int(seed)).spawn(2)
    pos_rng = np.random.Generator(np.random.Philox(pos_seq))
    count_rng = np.random.Generator(np.random.Philox(count_seq))
    xy = pos_rng.uniform(0.0, area_side, size=(int(m), 2))
    counts = count_rng.choice(choices, size=int(m))
    clusters = tuple(GroundCluster((float(x), float(y)), int(n)) for (x, y), n in zip(xy, counts))
    return Scenario(start=(0.0, 0.0, env.altitude), clusters=clusters, env=env, uav=uav, seed=int(seed))


@lru_cache(maxsize=64)
def _grid_offsets(radius, l_sub):
    """Horizontal offsets of the grid points relative to the disk center."""
    r = float(radius)
    if r == 0.0:
        return np.zeros((1, 2))
    width = 2.0 * r / l_sub
    sub = (np.arange(_QUADRATURE_CELLS) + 0.5) / _QUADRATURE_CELLS
    out = []
    for j in range(l_sub):
        y0 = -r + j * width
        for i in range(l_sub):
            x0 = -r + i * width
            xs = np.array([x0, x0 + width])
            ys = np.array([y0, y0 + width])
            far = math.hypot(np.abs(xs).max(), np.abs(ys).max())
            near = math.hypot(_axis_gap(*xs), _axis_gap(*ys))
            if near > r:
                continue
            if far <= r:
                out.append((x0 + width / 2, y0 + width / 2))
                continue
            gx, gy = np.meshgrid(x0 + sub * width, y0 + sub * width)
            inside = gx ** 2 + gy ** 2 <= r * r
            if not inside.any():
                # sliver thinner than the quadrature spacing: use the nearest cell point
                out.append((_clamp0(*xs), _clamp0(*ys)))
                continue
            out.append((gx[inside].mean(), gy[inside].mean()))
    offsets = np.array(out, dtype=np.float64)
    # symmetric cells cancel only up to rounding; pin them to the axis
    offsets[np.abs(offsets) < 1e-12 * r] = 0.0
    offsets.setflags(write=False)
    return offsets


def _axis_gap(lo, hi):
    if lo <= 0.0 <= hi:
        return 0.0
    return min(abs(lo), abs(hi))


def _clamp0(lo, hi):
    return min(max(0.0, lo), hi)


def build_candidate_grid(cluster, service_radius, l_sub, altitude=100.0, cluster_index=0):
    """Sample hovering candidates inside the service disk above ``cluster``'s CH.

    The bounding square of the disk is split into ``l_sub`` x ``l_sub`` cells.
    Cells inside the disk contribute their center, cells cut by the circle the
    centroid of the part inside (64 x 64 sub-cell quadrature), the rest nothing.
    """
    if not service_radius >= 0:
        raise ParameterError(f"service_radius must be nonnegative, got {service_radius!r}")
    if int(l_sub) != l_sub or l_sub < 1:
        raise ParameterError(f"l_sub must be a positive integer, got {l_sub!r}")
    off = _grid_offsets(float(service_radius), int(l_sub))
    cx, cy = cluster.ch_position
    pts = np.empty((len(off), 3))
    pts[:, 0] = cx + off[:, 0]
    pts[:, 1] = cy + off[:, 1]
    pts[:, 2] = altitude
    return CandidateGrid(cluster_index=cluster_index, points=pts, radius=float(service_radius))


def build_grids(scenario, service_radius=None, l_sub=None):
    from .channel import service_radius as _radius

    r = _radius(scenario.env) if service_radius is None else service_radius
    l_sub = scenario.env.l_sub if l_sub is None else l_sub
    return [build_candidate_grid(c, r, l_sub, scenario.env.altitude, k)
            for k, c in enumerate(scenario.clusters)]


# --- serialization -------------------------------------------------------

def scenario_to_dict(s):
    return {
        "version": SCHEMA_VERSION,
        "seed": s.seed,
        "start": list(s.start),
        "env": asdict(s.env),
        "uav": asdict(s.uav),
        "clusters": [{"ch": list(c.ch_position), "n": c.node_count} for c in s.clusters],
    }


def scenario_from_dict(d):
    if not isinstance(d, dict):
        raise SchemaError("top level must be an object")
    for key in ("version", "seed", "start", "env", "uav", "clusters"):
        if key not in d:
            raise SchemaError("missing", field=key)
    if d["version"] != SCHEMA_VERSION:
        raise SchemaError(f"unsupported version {d['version']!r}", field="version")
    env = _params_from(EnvParams, d["env"], "env")
    uav = _params_from(UavParams, d["uav"], "uav")
    if not isinstance(d["clusters"], list):
        raise SchemaError("must be an array", field="clusters")
    clusters = []
    for k, c in enumerate(d["clusters"]):
        try:
            ch, n = c["ch"], c["n"]
        except (KeyError, TypeError):
            raise SchemaError("each cluster needs 'ch' and 'n'", field=f"clusters[{k}]") from None
        if not (isinstance(ch, list) and len(ch) == 2):
            raise SchemaError("ch must be [x, y]", field=f"clusters[{k}].ch")
        if isinstance(n, bool) or not isinstance(n, int) or n < 1:
            raise SchemaError(f"node count must be an integer >= 1, got {n!r}", field=f"clusters[{k}].n")
        clusters.append(GroundCluster((float(ch[0]), float(ch[1])), n))
    start = d["start"]
    if not (isinstance(start, list) and len(start) == 3):
        raise SchemaError("must be [x, y, z]", field="start")
    return Scenario(start=tuple(start), clusters=tuple(clusters), env=env, uav=uav, seed=int(d["seed"]))


def _params_from(cls, block, name):
    if not isinstance(block, dict):
        raise SchemaError("must be an object", field=name)
    names = {f.name for f in fields(cls)}
    unknown = set(block) - names
    if unknown:
        raise SchemaError(f"unknown keys {sorted(unknown)}", field=name)
    missing = names - set(block)
    if missing:
        raise SchemaError(f"missing keys {sorted(missing)}", field=name)
    return cls(**block)


def save_scenario(s, path):
    Path(path).write_text(json.dumps(scenario_to_dict(s), indent=2) + "\n", encoding="utf-8")


def load_scenario(path):
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"not valid JSON ({exc})") from None
    return scenario_from_dict(data)
