"""Attention encoder/decoder that proposes a cluster visiting order.

Sequence element 0 is the start point; elements 1..M are clusters, each
described by its padded candidate grid, CH position and node count.  The
encoder has no positional encoding (the element order carries no meaning); the
decoder sees the already-visited elements plus a sinusoidal position code and
points at the next cluster.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import numerics as nx
from .exceptions import DimensionError, ParameterError, SchemaError
from .numerics import Tensor
from .router import DEFAULT_OMEGA, refine

NEG_INF = -np.inf


@dataclass(frozen=True)
class ModelConfig:
    d_em: int = 512
    heads: int = 8
    d_v: int = 0
    encoder_layers: int = 6
    decoder_layers: int = 2
    ffn_hidden: int = 0
    clip_c: float = 10.0
    l_sub: int = 5
    area_side: float = 3000.0
    n_scale: float = 30.0

    def __post_init__(self):
        if self.d_v == 0:
            object.__setattr__(self, "d_v", self.d_em // self.heads)
        if self.ffn_hidden == 0:
            object.__setattr__(self, "ffn_hidden", 4 * self.d_em)
        for f in fields(self):
            if not getattr(self, f.name) > 0:
                raise ParameterError(f"ModelConfig.{f.name} must be positive")

    @property
    def cluster_features(self):
        return 3 * (self.l_sub ** 2 + 1) + 1

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def _uniform(rng, shape, fan_in):
    bound = 1.0 / math.sqrt(fan_in)
    return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True)


def init_params(config, seed=0):
    """Fresh parameter dict (name -> Tensor) with fan-in scaled uniform weights."""
    rng = np.random.default_rng(seed)
    d, hv, f = config.d_em, config.heads * config.d_v, config.ffn_hidden
    p = {}

    def norm(prefix):
        p[f"{prefix}.gamma"] = Tensor(np.ones(d), requires_grad=True)
        p[f"{prefix}.beta"] = Tensor(np.zeros(d), requires_grad=True)

    def attention(prefix):
        for k in ("wq", "wk", "wv"):
            p[f"{prefix}.{k}"] = _uniform(rng, (d, hv), d)
        p[f"{prefix}.wo"] = _uniform(rng, (hv, d), hv)

    p["embed.start.w"] = _uniform(rng, (3, d), 3)
    p["embed.start.b"] = _uniform(rng, (d,), 3)
    fc = config.cluster_features
    p["embed.cluster.w"] = _uniform(rng, (fc, d), fc)
    p["embed.cluster.b"] = _uniform(rng, (d,), fc)
    for layer in range(config.encoder_layers):
        pre = f"enc{layer}"
        attention(f"{pre}.attn")
        norm(f"{pre}.bn1")
        p[f"{pre}.ffn.w1"] = _uniform(rng, (d, f), d)
        p[f"{pre}.ffn.b1"] = _uniform(rng, (f,), d)
        p[f"{pre}.ffn.w2"] = _uniform(rng, (f, d), f)
        p[f"{pre}.ffn.b2"] = _uniform(rng, (d,), f)
        norm(f"{pre}.bn2")
    for layer in range(config.decoder_layers):
        pre = f"dec{layer}"
        attention(f"{pre}.self")
        norm(f"{pre}.ln1")
        attention(f"{pre}.cross")
        norm(f"{pre}.ln2")
    p["out.wq"] = _uniform(rng, (d, d), d)
    p["out.wk"] = _uniform(rng, (d, d), d)
    return p


def positional_encoding(t, d_em):
    """Sinusoidal code for decoder position t: sin on even dims, cos on odd dims."""
    dims = np.arange(d_em)
    freq = 1.0 / 10000.0 ** (2 * (dims // 2) / d_em)
    return np.where(dims % 2 == 0, np.sin(freq * t), np.cos(freq * t))


def featurize(instances, config):
    """Stack normalized encoder inputs: start (B, 1, 3) and clusters (B, M, 3(L^2+1)+1)."""
    m = instances[0].m
    if any(inst.m != m for inst in instances):
        raise DimensionError("all instances in a batch must have the same number of clusters")
    k = config.l_sub ** 2
    a = config.area_side
    start = np.empty((len(instances), 1, 3))
    clusters = np.empty((len(instances), m, config.cluster_features))
    for b, inst in enumerate(instances):
        start[b, 0] = inst.start / a
        for j in range(m):
            pts = inst.points[j]
            if len(pts) > k:
                raise DimensionError(f"cluster {j} has {len(pts)} candidates, feature layout holds {k}")
            if len(pts) < k:
                pts = np.vstack([pts, np.repeat(inst.centers[j][None], k - len(pts), axis=0)])
            row = clusters[b, j]
            row[:3 * k] = pts.reshape(-1) / a
            row[3 * k:3 * k + 2] = inst.centers[j][:2] / a
            row[3 * k + 2] = 0.0
            row[-1] = inst.counts[j] / config.n_scale
    return start, clusters


@dataclass
class Rollout:
    orders: np.ndarray          # (B, M) 0-based cluster ids in visiting order
    log_prob: Tensor            # (B,) summed step log-probabilities
    step_probs: list            # M arrays of shape (B, M+1)


class DecodeState:
    """Visited mask, decoded prefix and per-layer decoder caches for a batch of partial orders."""

    def __init__(self, batch, n_elements, n_layers):
        self.visited = np.zeros((batch, n_elements), dtype=bool)
        self.visited[:, 0] = True
        self.last = np.zeros(batch, dtype=np.int64)
        self.prefix = [np.zeros(batch, dtype=np.int64)]
        self.caches = [[] for _ in range(n_layers)]
        self.log_prob = np.zeros(batch)

    @property
    def step(self):
        return len(self.prefix) - 1

    def advance(self, choice):
        rows = np.arange(len(choice))
        self.visited[rows, choice] = True
        self.last = np.asarray(choice, dtype=np.int64)
        self.prefix.append(self.last)

    def select(self, parents):
        """Keep only the given batch rows (in that order), e.g. surviving beams."""
        parents = np.asarray(parents, dtype=np.int64)
        out = DecodeState.__new__(DecodeState)
        out.visited = self.visited[parents].copy()
        out.last = self.last[parents].copy()
        out.prefix = [p[parents].copy() for p in self.prefix]
        out.caches = [[nx.take(t, parents, axis=0) for t in layer] for layer in self.caches]
        out.log_prob = self.log_prob[parents].copy()
        return out


class Encoded:
    """Encoder output for a batch together with the pointer-head keys."""

    def __init__(self, h, keys):
        self.h = h
        self.keys = keys

    @property
    def batch(self):
        return self.h.shape[0]

    def take(self, rows):
        return Encoded(nx.take(self.h, rows, axis=0), nx.take(self.keys, rows, axis=0))


class TransformerPolicy:
    """Parameters plus the forward computations of the order policy."""

    def __init__(self, config, params=None, seed=0):
        self.config = config
        self.params = params if params is not None else init_params(config, seed)

    # -- building blocks ----------------------------------------------------

    def mha(self, prefix, q_in, kv_in, mask=None, return_weights=False):
        """Multi-head attention; ``mask`` (B, n_kv) marks keys that may not be attended."""
        p, cfg = self.params, self.config
        h, dv = cfg.heads, cfg.d_v
        b, nq, _ = q_in.shape
        nk = kv_in.shape[1]

        def heads(x, w, n):
            return nx.transpose(nx.reshape(x @ p[w], (b, n, h, dv)), (0, 2, 1, 3))

        q = heads(q_in, f"{prefix}.wq", nq)
        k = heads(kv_in, f"{prefix}.wk", nk)
        v = heads(kv_in, f"{prefix}.wv", nk)
        scores = nx.scale(q @ nx.transpose(k, (0, 1, 3, 2)), 1.0 / math.sqrt(dv))
        if mask is not None:
            full = np.broadcast_to(np.asarray(mask, dtype=bool)[:, None, None, :], scores.shape)
            scores = nx.masked_fill(scores, full, NEG_INF)
        weights = nx.softmax(scores, axis=-1)
        z = nx.reshape(nx.transpose(weights @ v, (0, 2, 1, 3)), (b, nq, h * dv))
        out = z @ p[f"{prefix}.wo"]
        return (out, weights) if return_weights else out

    def embed(self, start_x, cluster_x):
        p = self.params
        if cluster_x.shape[-1] != self.config.cluster_features or start_x.shape[-1] != 3:
            raise DimensionError(
                f"embed: expected feature widths 3 and {self.config.cluster_features}, "
                f"got {start_x.shape[-1]} and {cluster_x.shape[-1]}")
        h0 = nx.as_tensor(start_x) @ p["embed.start.w"] + p["embed.start.b"]
        hm = nx.as_tensor(cluster_x) @ p["embed.cluster.w"] + p["embed.cluster.b"]
        return nx.concat([h0, hm], axis=1)

    def encode(self, emb, return_weights=False):
        p = self.params
        h = emb
        weights = []
        for layer in range(self.config.encoder_layers):
            pre = f"enc{layer}"
            z, w = self.mha(f"{pre}.attn", h, h, return_weights=True)
            weights.append(w)
            z1 = nx.batch_norm_tokens(h + z, p[f"{pre}.bn1.gamma"], p[f"{pre}.bn1.beta"])
            ff = nx.relu(z1 @ p[f"{pre}.ffn.w1"] + p[f"{pre}.ffn.b1"]) @ p[f"{pre}.ffn.w2"] + p[f"{pre}.ffn.b2"]
            h = nx.batch_norm_tokens(z1 + ff, p[f"{pre}.bn2.gamma"], p[f"{pre}.bn2.beta"])
        return (h, weights) if return_weights else h

    def encode_instances(self, instances):
        start_x, cluster_x = featurize(instances, self.config)
        h = self.encode(self.embed(start_x, cluster_x))
        return Encoded(h, h @ self.params["out.wk"])

    def decode_step(self, state, enc):
        """Distribution over the M+1 elements for the next stop of every row in ``state``."""
        if state.visited.all(axis=1).any():
            raise ParameterError("decode_step called on a state with every element visited")
        p, cfg = self.params, self.config
        b = enc.batch
        x = nx.index_rows(enc.h, state.last)
        x = nx.reshape(x, (b, 1, cfg.d_em)) + positional_encoding(state.step, cfg.d_em)
        for layer in range(cfg.decoder_layers):
            pre = f"dec{layer}"
            cache = state.caches[layer]
            cache.append(x)
            kv = cache[0] if len(cache) == 1 else nx.concat(cache, axis=1)
            z = nx.layer_norm(x + self.mha(f"{pre}.self", x, kv), p[f"{pre}.ln1.gamma"], p[f"{pre}.ln1.beta"])
            zz = self.mha(f"{pre}.cross", z, enc.h, mask=state.visited)
            x = nx.layer_norm(z + zz, p[f"{pre}.ln2.gamma"], p[f"{pre}.ln2.beta"])
        q = x @ p["out.wq"]
        u = nx.reshape(q @ nx.transpose(enc.keys, (0, 2, 1)), (b, enc.keys.shape[1]))
        u = nx.scale(nx.tanh(nx.scale(u, 1.0 / math.sqrt(cfg.d_em))), cfg.clip_c)
        return nx.softmax(nx.masked_fill(u, state.visited, NEG_INF), axis=-1)

    # -- decoding -----------------------------------------------------------

    def rollout(self, instances, mode="greedy", rng=None, orders=None, enc=None):
        """Decode one order per row: ``greedy``, ``sample`` (needs ``rng``) or ``teacher`` (given ``orders``)."""
        enc = enc or self.encode_instances(instances)
        b, n = enc.batch, enc.h.shape[1]
        m = n - 1
        state = DecodeState(b, n, self.config.decoder_layers)
        rows = np.arange(b)
        total = None
        step_probs = []
        forced = None if orders is None else np.asarray(orders, dtype=np.int64) + 1
        for t in range(m):
            probs = self.decode_step(state, enc)
            pr = probs.data
            step_probs.append(pr)
            if mode == "greedy":
                choice = np.argmax(pr, axis=1)
            elif mode == "sample":
                cdf = np.cumsum(pr, axis=1)
                u = rng.random(b) * cdf[:, -1]
                choice = np.argmax(cdf > u[:, None], axis=1)
            elif mode == "teacher":
                choice = forced[:, t]
                if np.any(state.visited[rows, choice]):
                    raise ParameterError("teacher order revisits an element")
            else:
                raise ParameterError(f"unknown decode mode {mode!r}")
            lp = nx.log(nx.index_rows(probs, choice))
            total = lp if total is None else total + lp
            state.log_prob += lp.data
            state.advance(choice)
        return Rollout(orders=np.stack(state.prefix[1:], axis=1) - 1, log_prob=total, step_probs=step_probs)

    def log_prob(self, order, instance):
        """Differentiable log-probability of a complete visiting order (0-based cluster ids)."""
        order = np.asarray(order, dtype=np.int64)
        if sorted(order.tolist()) != list(range(instance.m)):
            raise ParameterError(f"order {order.tolist()} is not a permutation of 0..{instance.m - 1}")
        r = self.rollout([instance], mode="teacher", orders=order[None, :])
        return nx.reshape(r.log_prob, ())

    def decode_greedy(self, instance):
        with nx.no_grad():
            r = self.rollout([instance], mode="greedy")
        return tuple(int(v) for v in r.orders[0]), float(r.log_prob.data[0])

    def sample_orders(self, instance, width, seed):
        """``width`` independent sampled orders with their log-probabilities."""
        if width < 1:
            raise ParameterError("width must be >= 1")
        rng = np.random.default_rng(seed)
        with nx.no_grad():
            enc = self.encode_instances([instance]).take(np.zeros(width, dtype=np.int64))
            r = self.rollout(None, mode="sample", rng=rng, enc=enc)
        return r.orders, r.log_prob.data

    def decode_sample(self, instance, width, seed, select="aoi", omega=None):
        """Best of ``width`` sampled orders.

        ``select="aoi"`` refines every distinct sample with weighted A* and keeps
        the cheapest; ``select="probability"`` keeps the most probable sample.
        Ties go to the earliest draw.
        """
        orders, logps = self.sample_orders(instance, width, seed)
        if select == "probability":
            k = int(np.argmax(logps))
        elif select == "aoi":
            omega = DEFAULT_OMEGA if omega is None else omega
            seen = {}
            costs = np.empty(len(orders))
            for i, o in enumerate(orders):
                key = tuple(int(v) for v in o)
                if key not in seen:
                    seen[key] = refine(instance, key, omega).total_aoi
                costs[i] = seen[key]
            k = int(np.argmin(costs))
        else:
            raise ParameterError(f"select must be 'aoi' or 'probability', got {select!r}")
        return tuple(int(v) for v in orders[k]), float(logps[k])

    def decode_beam(self, instance, width):
        """Beam search on cumulative log-probability; returns the most probable surviving order."""
        if width < 1:
            raise ParameterError("width must be >= 1")
        with nx.no_grad():
            enc1 = self.encode_instances([instance])
            n = enc1.h.shape[1]
            state = DecodeState(1, n, self.config.decoder_layers)
            enc = enc1
            for _ in range(n - 1):
                probs = self.decode_step(state, enc).data
                with np.errstate(divide="ignore"):
                    scores = state.log_prob[:, None] + np.log(probs)
                beam_idx, elem_idx = np.meshgrid(np.arange(len(scores)), np.arange(n), indexing="ij")
                flat = scores.ravel()
                ok = np.isfinite(flat)
                rank = np.lexsort((elem_idx.ravel()[ok], beam_idx.ravel()[ok], -flat[ok]))[:width]
                parents = beam_idx.ravel()[ok][rank]
                elems = elem_idx.ravel()[ok][rank]
                state = state.select(parents)
                state.log_prob = flat[ok][rank]
                state.advance(elems)
                enc = enc1.take(np.zeros(len(parents), dtype=np.int64))
        orders = np.stack(state.prefix[1:], axis=1) - 1
        return tuple(int(v) for v in orders[0]), float(state.log_prob[0])

    # -- persistence --------------------------------------------------------

    def state_dict(self):
        return {k: v.data for k, v in self.params.items()}

    def copy(self):
        return TransformerPolicy(self.config, {k: Tensor(v.data.copy(), requires_grad=True)
                                               for k, v in self.params.items()})

    def save(self, path):
        nx.save_checkpoint(path, self.state_dict(), self.config.to_dict())

    @classmethod
    def load(cls, path):
        arrays, config = nx.load_checkpoint(path)
        if config is None:
            raise SchemaError("checkpoint carries no model config", field="config")
        cfg = ModelConfig.from_dict(config)
        expected = init_params(cfg, 0)
        missing = set(expected) - set(arrays)
        if missing:
            raise SchemaError(f"missing parameters {sorted(missing)}", field="checkpoint")
        params = {k: Tensor(arrays[k], requires_grad=True) for k in expected}
        return cls(cfg, params)
