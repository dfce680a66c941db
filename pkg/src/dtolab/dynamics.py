"""Discrete-time Metropolis dynamics of the classical Model-1 chain.

One attempt picks a uniformly random link and flips it with a probability
that depends only on the sign of its local field ``F = sum of B_p`` around it:

==========  ====================  ==========================
``F``       effect of the flip    probability
==========  ====================  ==========================
``F > 0``   creates defects       ``h / (q1^2 + h)``
``F = 0``   moves defects         ``(q2^2 + h) / (q1^2 + h)``
``F < 0``   heals defects         ``1``
==========  ====================  ==========================

Time is counted in sweeps of ``n_links`` attempts.  Two samplers realize the
same chain: ``"metropolis"`` performs every attempt literally, while
``"rejection-free"`` keeps links binned by acceptance class and jumps over
runs of rejected attempts with a geometric skip.  Because attempts are iid
and a rejected attempt leaves the state unchanged, both produce identical
trajectory laws in attempt time; the second is much faster when most
attempts are rejected (small ``h``).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Mapping, Sequence

import numba as nb
import numpy as np

from .lattice import LoopSpec, Torus, build_torus
from .rng import make_state, mix_seed, randbelow, uniform
from .spins import (
    SpinConfig,
    _defect_wraps,
    _loop_product,
    all_up,
    build_square_patch,
    build_typeB_strip,
    random_config,
)

__all__ = [
    "Model",
    "Schedule",
    "ObservableSeries",
    "EnsembleStats",
    "WilsonEstimate",
    "flip_probability",
    "mc_step",
    "Sampler",
    "run_trajectory",
    "run_ensemble",
    "binned_error",
    "estimate_wilson",
    "estimate_wilson_rectangles",
    "measure_lifetime",
    "lifetime_ensemble",
    "defect_density_series",
    "estimate_baseline",
    "shrink_time",
    "trajectory_seed",
]

METHODS = ("rejection-free", "metropolis")
AUTO_THRESHOLD = 0.02


def resolve_method(model: "Model", method: str) -> str:
    """Map ``"auto"`` to the faster sampler for the model's creation rate."""
    if method == "auto":
        pc = model.class_probabilities()[0]
        return "rejection-free" if pc < AUTO_THRESHOLD else "metropolis"
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS + ('auto',)}")
    return method


# ---------------------------------------------------------------------------
# model


@dataclass(frozen=True)
class Model:
    """Physical parameters of the classical chain.

    ``kappa_v`` and ``kappa_z`` are carried for the exact generator and the
    run manifests; they do not enter the Metropolis probabilities.
    """

    dim: int = 2
    h: float = 0.0
    q1: float = 1.0
    q2: float = 1.0 / math.sqrt(2.0)
    kappa_v: float = 1.0
    kappa_z: float = 1.0

    def __post_init__(self) -> None:
        if self.dim not in (2, 3):
            raise ValueError("dim must be 2 or 3")
        if not self.h >= 0:
            raise ValueError("h must be nonnegative")
        if not (self.q1 > 0 and self.q2 > 0):
            raise ValueError("q1 and q2 must be positive")
        if self.q2 > self.q1:
            raise ValueError("q2 > q1 would give move probabilities above 1")
        if self.kappa_v < 0 or self.kappa_z < 0:
            raise ValueError("dissipation strengths must be nonnegative")

    @property
    def beta(self) -> float:
        return math.sqrt(self.h / (self.q1**2 + self.h))

    def class_probabilities(self) -> np.ndarray:
        """Acceptance for (create, move, heal)."""
        d = self.q1**2 + self.h
        return np.array([self.h / d, (self.q2**2 + self.h) / d, 1.0])

    def field_table(self) -> np.ndarray:
        """Acceptance indexed by ``field + 4`` for fields in [-4, 4]."""
        pc, pm, ph = self.class_probabilities()
        return np.array([ph] * 4 + [pm] + [pc] * 4)

    def rate(self, field_value: int) -> float:
        """Continuous-time flip rate ``P^2(F) + h`` used by the exact generator."""
        if field_value > 0:
            return self.h
        if field_value == 0:
            return self.q2**2 + self.h
        return self.q1**2 + self.h


def flip_probability(model: Model, local_field_value: int) -> float:
    """Metropolis acceptance of a link with the given local field."""
    f = int(local_field_value)
    fmax = 2 if model.dim == 2 else 4
    if f != local_field_value or abs(f) > fmax or f % 2:
        raise ValueError(f"illegal local field {local_field_value} in {model.dim}d")
    return float(model.field_table()[f + 4])


# ---------------------------------------------------------------------------
# kernels


@nb.njit(cache=True, nogil=True)
def _metropolis(bits, plaq, lp, table, rng, n_attempts, ndef, stop_at_zero, monotone):
    """Literal single-link Metropolis; returns attempts performed."""
    N = bits.shape[0]
    k = lp.shape[1]
    for t in range(n_attempts):
        if stop_at_zero and ndef[0] == 0:
            return t
        l = randbelow(rng, N)
        f = 0
        for j in range(k):
            f += plaq[lp[l, j]]
        p = table[f + 4]
        if p <= 0.0:
            continue
        if p < 1.0 and uniform(rng) >= p:
            continue
        bits[l] ^= 1
        d = 0
        for j in range(k):
            q = lp[l, j]
            plaq[q] = -plaq[q]
            d -= plaq[q]
        if monotone and d > 0:
            raise RuntimeError("defect count increased at h = 0")
        ndef[0] += d
    return n_attempts


@nb.njit(cache=True, nogil=True)
def _class_of(f):
    if f > 0:
        return 0
    if f == 0:
        return 1
    return 2


@nb.njit(cache=True, nogil=True)
def _nfold_init(plaq, lp, field, cls_list, cls_cnt, pos, cls_of):
    N = lp.shape[0]
    cls_cnt[:] = 0
    for l in range(N):
        f = 0
        for j in range(lp.shape[1]):
            f += plaq[lp[l, j]]
        field[l] = f
        c = _class_of(f)
        cls_of[l] = c
        pos[l] = cls_cnt[c]
        cls_list[c, cls_cnt[c]] = l
        cls_cnt[c] += 1


@nb.njit(cache=True, nogil=True)
def _nfold_move(m, c_new, cls_list, cls_cnt, pos, cls_of):
    c_old = cls_of[m]
    i = pos[m]
    last = cls_list[c_old, cls_cnt[c_old] - 1]
    cls_list[c_old, i] = last
    pos[last] = i
    cls_cnt[c_old] -= 1
    pos[m] = cls_cnt[c_new]
    cls_list[c_new, cls_cnt[c_new]] = m
    cls_cnt[c_new] += 1
    cls_of[m] = c_new


@nb.njit(cache=True, nogil=True)
def _rejection_free(bits, plaq, lp, pl, probs, rng, n_attempts, ndef,
                    field, cls_list, cls_cnt, pos, cls_of, stop_at_zero, monotone):
    """Advance by ``n_attempts`` attempts, sampling only accepted ones.

    The number of attempts up to and including the next acceptance is
    geometric with success probability ``A = sum_c n_c p_c / N``; the accepted
    link is drawn with weight ``p_c`` among all links.  Returns the attempt
    index reached (the attempt of the final healing if ``stop_at_zero``).
    """
    N = bits.shape[0]
    t = 0
    while True:
        if stop_at_zero and ndef[0] == 0:
            return t
        w0 = cls_cnt[0] * probs[0]
        w1 = cls_cnt[1] * probs[1]
        w2 = cls_cnt[2] * probs[2]
        W = w0 + w1 + w2
        if W <= 0.0:
            return n_attempts
        A = W / N
        if A >= 1.0:
            skip = 1.0
        else:
            u = 1.0 - uniform(rng)
            skip = float(math.ceil(math.log(u) / math.log1p(-A)))
            if skip < 1.0:
                skip = 1.0
        if t + skip > n_attempts:
            return n_attempts
        t += np.int64(skip)
        r = uniform(rng) * W
        if r < w0:
            c = 0
        elif r < w0 + w1:
            c = 1
        else:
            c = 2
        l = cls_list[c, randbelow(rng, cls_cnt[c])]
        bits[l] ^= 1
        d = 0
        for j in range(lp.shape[1]):
            q = lp[l, j]
            v = -plaq[q]
            plaq[q] = v
            d -= v
            for kk in range(pl.shape[1]):
                m = pl[q, kk]
                field[m] += 2 * v
                cn = _class_of(field[m])
                if cn != cls_of[m]:
                    _nfold_move(m, cn, cls_list, cls_cnt, pos, cls_of)
        if monotone and d > 0:
            raise RuntimeError("defect count increased at h = 0")
        ndef[0] += d


@nb.njit(cache=True, nogil=True)
def _run_products(bits, up, axis, n_sites, kmax):
    # R[s, k] = parity of the k consecutive links along axis starting at s.
    R = np.zeros((n_sites, kmax + 1), dtype=np.uint8)
    for k in range(1, kmax + 1):
        for s in range(n_sites):
            R[s, k] = bits[axis * n_sites + s] ^ R[up[s, axis], k - 1]
    return R


@nb.njit(cache=True, nogil=True)
def _shift(s, axis, k, up):
    for _ in range(k):
        s = up[s, axis]
    return s


@nb.njit(cache=True, nogil=True)
def _rect_average(bits, up, n_sites, planes, shapes):
    """Mean Wilson loop of each (w, h) shape over all translations and the
    given ordered planes (w along plane[0], h along plane[1])."""
    dim = up.shape[1]
    kmax = 0
    for i in range(shapes.shape[0]):
        kmax = max(kmax, shapes[i, 0], shapes[i, 1])
    runs = np.zeros((dim, n_sites, kmax + 1), dtype=np.uint8)
    for a in range(dim):
        runs[a] = _run_products(bits, up, a, n_sites, kmax)
    out = np.zeros(shapes.shape[0])
    for i in range(shapes.shape[0]):
        w = shapes[i, 0]
        h = shapes[i, 1]
        acc = 0
        for pi in range(planes.shape[0]):
            a = planes[pi, 0]
            b = planes[pi, 1]
            for s in range(n_sites):
                sa = _shift(s, a, w, up)
                sb = _shift(s, b, h, up)
                par = runs[a, s, w] ^ runs[b, sa, h] ^ runs[a, sb, w] ^ runs[b, s, h]
                acc += 1 - 2 * par
        out[i] = acc / (planes.shape[0] * n_sites)
    return out


@nb.njit(cache=True, nogil=True)
def _random_stabilizers(bits, vl, rng, count):
    for _ in range(count):
        v = randbelow(rng, vl.shape[0])
        for j in range(vl.shape[1]):
            bits[vl[v, j]] ^= 1


def _up_table(torus: Torus) -> np.ndarray:
    # up[s, a] = s + e_a, read from the link endpoints.
    n = torus.n_sites
    return np.stack(
        [torus.link_vertices[a * n:(a + 1) * n, 1] for a in range(torus.dim)], axis=1
    ).copy()


# ---------------------------------------------------------------------------
# sampler state


class Sampler:
    """Mutable chain state (configuration, RNG and sampler bookkeeping).

    Parameters
    ----------
    model : Model
    cfg : SpinConfig
        Copied; the caller's configuration is never mutated.
    seed : int
        64-bit seed of the xoshiro256** stream.
    method : {"auto", "rejection-free", "metropolis"}
    monotone_check : bool
        Raise if an accepted flip raises the defect count (meaningful at h=0).
    """

    def __init__(self, model: Model, cfg: SpinConfig, seed: int,
                 method: str = "auto", monotone_check: bool = False):
        if cfg.torus.dim != model.dim:
            raise ValueError("configuration and model dimensions differ")
        method = resolve_method(model, method)
        self.model = model
        self.cfg = cfg.copy()
        self.torus = cfg.torus
        self.seed = int(seed)
        self.rng = make_state(seed)
        self.method = method
        self.monotone = bool(monotone_check)
        self.ndef = np.array([self.cfg.n_defects], dtype=np.int64)
        self.attempts = 0
        self._table = model.field_table()
        self._probs = model.class_probabilities()
        t = self.torus
        self._lp = t.link_plaquettes
        self._pl = t.plaquette_links
        if method == "rejection-free":
            N = t.n_links
            self._field = np.empty(N, dtype=np.int64)
            self._cls_list = np.empty((3, N), dtype=np.int64)
            self._cls_cnt = np.zeros(3, dtype=np.int64)
            self._pos = np.empty(N, dtype=np.int64)
            self._cls_of = np.empty(N, dtype=np.int64)
            _nfold_init(self.cfg.plaq, self._lp, self._field, self._cls_list,
                        self._cls_cnt, self._pos, self._cls_of)

    @property
    def n_defects(self) -> int:
        return int(self.ndef[0])

    def advance(self, n_attempts: int, stop_at_zero: bool = False) -> int:
        """Run up to ``n_attempts`` attempts; returns the number performed."""
        n_attempts = int(n_attempts)
        if n_attempts <= 0:
            return 0
        c = self.cfg
        if self.method == "metropolis":
            done = _metropolis(c.bits, c.plaq, self._lp, self._table, self.rng,
                               n_attempts, self.ndef, stop_at_zero, self.monotone)
        else:
            done = _rejection_free(c.bits, c.plaq, self._lp, self._pl, self._probs,
                                   self.rng, n_attempts, self.ndef, self._field,
                                   self._cls_list, self._cls_cnt, self._pos,
                                   self._cls_of, stop_at_zero, self.monotone)
        c.n_defects = int(self.ndef[0])
        self.attempts += int(done)
        return int(done)

    def sweeps(self, n: float) -> None:
        self.advance(int(round(n * self.torus.n_links)))

    def randomize_stabilizers(self, count: int) -> None:
        """Apply ``count`` random vertex stabilizers (no plaquette changes)."""
        if count > 0:
            _random_stabilizers(self.cfg.bits, self.torus.vertex_links, self.rng, int(count))

    @property
    def time(self) -> float:
        return self.attempts / self.torus.n_links


def mc_step(model: Model, cfg: SpinConfig, rng: np.ndarray) -> bool:
    """One literal Metropolis attempt on ``cfg`` in place.

    ``rng`` is a xoshiro256** state from :func:`dtolab.rng.make_state`.
    """
    if cfg.torus.dim != model.dim:
        raise ValueError("configuration and model dimensions differ")
    ndef = np.array([cfg.n_defects], dtype=np.int64)
    before = cfg.bits.copy()
    _metropolis(cfg.bits, cfg.plaq, cfg.torus.link_plaquettes, model.field_table(),
                rng, 1, ndef, False, False)
    cfg.n_defects = int(ndef[0])
    return not np.array_equal(before, cfg.bits)


# ---------------------------------------------------------------------------
# schedules and series


@dataclass(frozen=True)
class Schedule:
    """When and what to measure along a trajectory.

    Measurement stamps are ``burn_in + every * j`` for ``j = 1..`` up to
    ``total_sweeps``, unless explicit ``times`` are given.

    Attributes
    ----------
    channels : tuple of str
        Any of ``"defect_count"``, ``"sector"`` (one channel per axis),
        ``"wrap"`` (3d), plus Wilson channels implied by ``loops`` and
        ``rectangles``.
    loops : mapping name -> LoopSpec
        Explicit loops, recorded as ``wilson:<name>``.
    rectangles : tuple of (w, h)
        Translation-averaged rectangles, recorded as ``wavg:<w>x<h>``.
    planes : tuple of (a, b), optional
        Ordered planes for the averaged rectangles; default all ordered
        pairs of distinct axes.
    """

    total_sweeps: float = 0
    every: float = 1
    burn_in: float = 0
    times: tuple[float, ...] | None = None
    channels: tuple[str, ...] = ("defect_count",)
    loops: Mapping[str, LoopSpec] = field(default_factory=dict)
    rectangles: tuple[tuple[int, int], ...] = ()
    planes: tuple[tuple[int, int], ...] | None = None
    include_initial: bool = False
    method: str = "auto"
    stabilizer_rate: float = 0.0
    monotone_check: bool = False

    def stamps(self) -> np.ndarray:
        if self.times is not None:
            t = np.asarray(self.times, dtype=float)
            if t.size and (np.any(np.diff(t) <= 0) or t[0] < 0):
                raise ValueError("explicit times must be nonnegative and increasing")
            return t
        if self.total_sweeps < 0 or self.every < 0 or self.burn_in < 0:
            raise ValueError("schedule entries must be nonnegative")
        if self.every == 0 or self.total_sweeps <= self.burn_in:
            t = np.empty(0)
        else:
            n = int(math.floor((self.total_sweeps - self.burn_in) / self.every + 1e-9))
            t = self.burn_in + self.every * np.arange(1, n + 1)
        if self.include_initial:
            t = np.concatenate([[0.0], t])
        return t

    def manifest(self) -> dict:
        d = {k: v for k, v in asdict(self).items() if k != "loops"}
        d["loops"] = {k: list(v.links) for k, v in self.loops.items()}
        return d


@dataclass
class ObservableSeries:
    """Measurements of one trajectory."""

    times: np.ndarray
    channels: dict[str, np.ndarray]
    seed: int
    model: Model

    def __len__(self) -> int:
        return int(self.times.size)

    def to_csv(self, path_or_buf=None) -> str:
        names = list(self.channels)
        lines = [",".join(["sweep"] + names)]
        for i in range(len(self)):
            row = [repr(float(self.times[i]))]
            row += [repr(float(self.channels[n][i])) for n in names]
            lines.append(",".join(row))
        text = "\n".join(lines) + "\n"
        if path_or_buf is not None:
            if hasattr(path_or_buf, "write"):
                path_or_buf.write(text)
            else:
                with open(path_or_buf, "w", newline="") as fh:
                    fh.write(text)
        return text


def _channel_names(torus: Torus, schedule: Schedule) -> list[str]:
    names = []
    for ch in schedule.channels:
        if ch == "defect_count":
            names.append("defect_count")
        elif ch == "sector":
            names += [f"sector:{a}" for a in range(torus.dim)]
        elif ch == "wrap":
            if torus.dim != 3:
                raise ValueError("the wrap channel needs a 3d torus")
            names.append("wrap")
        else:
            raise ValueError(f"unknown channel {ch!r}")
    names += [f"wilson:{k}" for k in schedule.loops]
    names += [f"wavg:{w}x{h}" for w, h in schedule.rectangles]
    return names


class _Measurer:
    def __init__(self, torus: Torus, schedule: Schedule):
        self.torus = torus
        self.schedule = schedule
        self.names = _channel_names(torus, schedule)
        for name, loop in schedule.loops.items():
            if loop.torus != torus:
                raise ValueError(f"loop {name!r} lives on a different torus")
        self.loop_arrays = [lp.link_array for lp in schedule.loops.values()]
        self.sector_loops = []
        if "sector" in schedule.channels:
            from .lattice import straight_loop

            self.sector_loops = [straight_loop(torus, a, 0).link_array for a in range(torus.dim)]
        self.up = _up_table(torus)
        planes = schedule.planes
        if planes is None:
            planes = [(a, b) for a in range(torus.dim) for b in range(torus.dim) if a != b]
        self.planes = np.asarray(planes, dtype=np.int64).reshape(-1, 2)
        self.shapes = np.asarray(schedule.rectangles, dtype=np.int64).reshape(-1, 2)
        for w, h in self.shapes:
            for a, b in self.planes:
                if w >= torus.extents[a] or h >= torus.extents[b]:
                    raise ValueError(f"rectangle {w}x{h} does not fit {torus.extents}")

    def measure(self, cfg: SpinConfig, ndef: int) -> list[float]:
        out: list[float] = []
        t = self.torus
        for ch in self.schedule.channels:
            if ch == "defect_count":
                out.append(float(ndef))
            elif ch == "sector":
                out += [float(_loop_product(cfg.bits, lp)) for lp in self.sector_loops]
            elif ch == "wrap":
                out.append(float(_defect_wraps(cfg.plaq, t.n_sites, *t.extents)))
        out += [float(_loop_product(cfg.bits, lp)) for lp in self.loop_arrays]
        if self.shapes.size:
            out += list(_rect_average(cfg.bits, self.up, t.n_sites, self.planes, self.shapes))
        return out


def run_trajectory(model: Model, init: SpinConfig, schedule: Schedule,
                   seed: int = 0) -> ObservableSeries:
    """Run one trajectory and record the scheduled measurements.

    Deterministic given ``(model, init, schedule, seed)``.
    """
    meas = _Measurer(init.torus, schedule)
    stamps = schedule.stamps()
    sampler = Sampler(model, init, seed, schedule.method, schedule.monotone_check)
    N = init.torus.n_links
    data = np.empty((stamps.size, len(meas.names)))
    done_attempts = 0
    for i, ts in enumerate(stamps):
        target = int(round(ts * N))
        delta = target - done_attempts
        if delta > 0:
            sampler.advance(delta)
            if schedule.stabilizer_rate > 0:
                sampler.randomize_stabilizers(int(round(schedule.stabilizer_rate * delta / N)))
            done_attempts = target
        data[i] = meas.measure(sampler.cfg, sampler.n_defects)
    channels = {n: data[:, j].copy() for j, n in enumerate(meas.names)}
    return ObservableSeries(stamps.astype(float), channels, int(seed), model)


# ---------------------------------------------------------------------------
# statistics


def binned_error(x: np.ndarray, min_bins: int = 32) -> tuple[float, float, int]:
    """Mean and standard error of a correlated series by bin doubling.

    The bin size doubles while at least ``min_bins`` bins remain and the
    largest error over the levels is reported, which is conservative once
    the bins exceed the autocorrelation time.

    Returns
    -------
    mean, stderr, bin_size
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    if n == 0:
        return float("nan"), float("nan"), 0
    mean = float(x.mean())
    if n < 2:
        return mean, float("nan"), 1
    errs, sizes = [], []
    y, size = x.copy(), 1
    while y.size >= max(min_bins, 2):
        errs.append(float(y.std(ddof=1) / math.sqrt(y.size)))
        sizes.append(size)
        m = y.size // 2
        y = 0.5 * (y[: 2 * m : 2] + y[1 : 2 * m : 2])
        size *= 2
    if not errs:
        return mean, float(x.std(ddof=1) / math.sqrt(n)), 1
    best = int(np.argmax(errs))
    return mean, errs[best], sizes[best]


@dataclass
class EnsembleStats:
    """Per-channel, per-stamp statistics over independent trajectories."""

    times: np.ndarray
    mean: dict[str, np.ndarray]
    stderr: dict[str, np.ndarray]
    n_traj: int
    bin_size: int
    seeds: list[int]
    trajectories: list[ObservableSeries] | None = None

    @property
    def stderr_defined(self) -> bool:
        return self.n_traj > 1

    def to_csv(self, path_or_buf=None) -> str:
        names = list(self.mean)
        head = ["sweep"] + [f"{n}{s}" for n in names for s in ("", ":stderr")]
        lines = [",".join(head)]
        for i in range(self.times.size):
            row = [repr(float(self.times[i]))]
            for n in names:
                row += [repr(float(self.mean[n][i])), repr(float(self.stderr[n][i]))]
            lines.append(",".join(row))
        text = "\n".join(lines) + "\n"
        if path_or_buf is not None:
            with open(path_or_buf, "w", newline="") as fh:
                fh.write(text)
        return text


def trajectory_seed(base_seed: int, i: int) -> int:
    """Seed of trajectory ``i``; see :mod:`dtolab.rng`."""
    return mix_seed(base_seed, i)


def _init_rng(seed: int) -> np.random.Generator:
    # Initial-state randomness comes from a separate numpy stream.
    return np.random.default_rng([seed & 0xFFFFFFFF, seed >> 32, 0x1A17])


def _map(fn, n: int, threads: int) -> list:
    if threads <= 1 or n <= 1:
        return [fn(i) for i in range(n)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(n)))


def run_ensemble(model: Model, init_factory: Callable[[np.random.Generator], SpinConfig],
                 n_traj: int, base_seed: int, schedule: Schedule, threads: int = 1,
                 keep: bool = False) -> EnsembleStats:
    """Run ``n_traj`` independent trajectories and average channel by channel.

    Trajectory ``i`` uses seed ``trajectory_seed(base_seed, i)`` for both its
    initial state (through ``init_factory``) and its Metropolis stream, so
    results do not depend on ``threads``.
    """
    if n_traj < 1:
        raise ValueError("n_traj must be at least 1")
    seeds = [trajectory_seed(base_seed, i) for i in range(n_traj)]

    def one(i: int) -> ObservableSeries:
        init = init_factory(_init_rng(seeds[i]))
        return run_trajectory(model, init, schedule, seeds[i])

    series = _map(one, n_traj, threads)
    names = list(series[0].channels)
    mean, err = {}, {}
    for nm in names:
        stack = np.stack([s.channels[nm] for s in series])
        mean[nm] = stack.mean(axis=0)
        if n_traj > 1:
            err[nm] = stack.std(axis=0, ddof=1) / math.sqrt(n_traj)
        else:
            err[nm] = np.full(stack.shape[1], np.nan)
    return EnsembleStats(series[0].times, mean, err, n_traj, 1, seeds,
                         series if keep else None)


# ---------------------------------------------------------------------------
# Wilson loops


@dataclass(frozen=True)
class WilsonEstimate:
    mean: float
    stderr: float
    n_samples: int
    bin_size: int


def _default_burn_in(torus: Torus) -> int:
    return 10 * max(torus.extents) ** 2


def estimate_wilson(model: Model, loop: LoopSpec, *, sweeps: int = 10_000,
                    burn_in: int | None = None, every: int = 1, seed: int = 0,
                    init: SpinConfig | None = None, average: str = "translations",
                    method: str = "auto") -> WilsonEstimate:
    """Time-averaged Wilson loop after burn-in.

    With ``average="translations"`` a rectangle is averaged over all its
    translates in its own plane and orientation at every measurement (an
    unbiased estimator of the same expectation by translation invariance);
    ``"none"`` records the single given loop.
    """
    torus = loop.torus
    if torus.dim != model.dim:
        raise ValueError("loop and model dimensions differ")
    if init is not None and init.torus != torus:
        raise ValueError("initial configuration lives on a different torus")
    burn = _default_burn_in(torus) if burn_in is None else burn_in
    if average == "translations" and loop.kind == "contractible-rectangle":
        sched = Schedule(total_sweeps=burn + sweeps, every=every, burn_in=burn,
                         channels=(), rectangles=(loop.widths,), planes=(loop.axes,),
                         method=method)
        key = f"wavg:{loop.widths[0]}x{loop.widths[1]}"
    elif average in ("none", "translations"):
        sched = Schedule(total_sweeps=burn + sweeps, every=every, burn_in=burn,
                         channels=(), loops={"loop": loop}, method=method)
        key = "wilson:loop"
    else:
        raise ValueError(f"unknown averaging mode {average!r}")
    start = all_up(torus) if init is None else init
    s = run_trajectory(model, start, sched, seed)
    m, e, b = binned_error(s.channels[key])
    return WilsonEstimate(m, e, len(s), b)


def estimate_wilson_rectangles(model: Model, torus: Torus, shapes: Sequence[tuple[int, int]],
                               *, sweeps: int, burn_in: int | None = None, every: int = 1,
                               seed: int = 0, n_traj: int = 1, threads: int = 1,
                               planes=None, method: str = "auto"
                               ) -> dict[tuple[int, int], WilsonEstimate]:
    """Translation- and orientation-averaged rectangles from ``n_traj``
    independent runs started at all-up.

    Each run is reduced to its time average; runs are then combined as iid
    samples, except for ``n_traj = 1`` where the binned error is used.
    """
    burn = _default_burn_in(torus) if burn_in is None else burn_in
    sched = Schedule(total_sweeps=burn + sweeps, every=every, burn_in=burn, channels=(),
                     rectangles=tuple(tuple(s) for s in shapes), planes=planes,
                     method=method)

    def one(i: int) -> ObservableSeries:
        return run_trajectory(model, all_up(torus), sched, trajectory_seed(seed, i))

    series = _map(one, n_traj, threads)
    out = {}
    for w, h in sched.rectangles:
        key = f"wavg:{w}x{h}"
        if n_traj == 1:
            m, e, b = binned_error(series[0].channels[key])
            out[(w, h)] = WilsonEstimate(m, e, len(series[0]), b)
        else:
            per = np.array([s.channels[key].mean() for s in series])
            out[(w, h)] = WilsonEstimate(float(per.mean()),
                                         float(per.std(ddof=1) / math.sqrt(n_traj)),
                                         int(sum(len(s) for s in series)), len(series[0]))
    return out


# ---------------------------------------------------------------------------
# 3d relaxation observables


def measure_lifetime(model: Model, init: SpinConfig, tau0: float, max_sweeps: float,
                     seed: int = 0, method: str = "auto") -> float | None:
    """First check time (in sweeps, multiples of ``tau0``) at which no defect
    loop winds around the torus; ``None`` if that never happens before
    ``max_sweeps``.
    """
    if model.dim != 3:
        raise ValueError("lifetimes are measured in 3d")
    if tau0 <= 0:
        raise ValueError("tau0 must be positive")
    t = init.torus
    if not _defect_wraps(init.plaq, t.n_sites, *t.extents):
        return 0.0
    if model.h == 0:
        return None
    sampler = Sampler(model, init, seed, method)
    step = int(round(tau0 * t.n_links))
    n_checks = int(math.floor(max_sweeps / tau0 + 1e-9))
    for k in range(1, n_checks + 1):
        sampler.advance(step)
        if not _defect_wraps(sampler.cfg.plaq, t.n_sites, *t.extents):
            return k * tau0
    return None


def lifetime_ensemble(model: Model, L: int, n_traj: int, base_seed: int, tau0: float,
                      max_sweeps: float, width: int | None = None,
                      threads: int = 1) -> np.ndarray:
    """Lifetimes of ``n_traj`` type-B strips on an ``L^3`` torus (NaN = timeout)."""
    torus = build_torus(3, [L, L, L])
    init = build_typeB_strip(torus, (0, 1), width if width is not None else L // 2)

    def one(i: int) -> float:
        r = measure_lifetime(model, init, tau0, max_sweeps, trajectory_seed(base_seed, i))
        return float("nan") if r is None else r

    return np.asarray(_map(one, n_traj, threads), dtype=float)


def estimate_baseline(model: Model, torus: Torus, sweeps: int, seed: int = 0,
                      burn_in: int | None = None, every: int = 1) -> tuple[float, float]:
    """Stationary defect count ``P_tot(inf)`` and its binned error.

    Runs from all-up for ``burn_in + sweeps`` and averages the last quarter
    of the measured window.
    """
    burn = _default_burn_in(torus) if burn_in is None else burn_in
    sched = Schedule(total_sweeps=burn + sweeps, every=every, burn_in=burn)
    s = run_trajectory(model, all_up(torus), sched, seed)
    x = s.channels["defect_count"]
    m, e, _ = binned_error(x[3 * x.size // 4:], min_bins=8)
    return m, e


def defect_density_series(model: Model, torus: Torus,
                          init_factory: Callable[[np.random.Generator], SpinConfig] | None,
                          schedule: Schedule, baseline: float | str, n_traj: int = 1,
                          base_seed: int = 0, threads: int = 1,
                          tail_from: float | None = None) -> EnsembleStats:
    """Ensemble mean of ``(P_tot(t) - baseline) / n_sites``.

    ``init_factory=None`` draws independent random link configurations.
    ``baseline="tail"`` subtracts from every trajectory its own average over
    the stamps at ``t >= tail_from``; the error then comes from the spread of
    these per-trajectory differences.
    """
    if model.dim != 3:
        raise ValueError("the defect density series is a 3d observable")
    if init_factory is None:
        def init_factory(rng):
            return random_config(torus, rng)
    sched = Schedule(total_sweeps=schedule.total_sweeps, every=schedule.every,
                     burn_in=schedule.burn_in, times=schedule.times,
                     channels=("defect_count",), include_initial=schedule.include_initial,
                     method=schedule.method)
    scale = float(torus.n_sites)
    if isinstance(baseline, str):
        if baseline != "tail" or tail_from is None:
            raise ValueError("baseline must be a number or 'tail' with tail_from")
        tail = sched.stamps() >= tail_from
        if not tail.any():
            raise ValueError("no stamps at or after tail_from")
        stats = run_ensemble(model, init_factory, n_traj, base_seed, sched, threads, keep=True)
        X = np.stack([s.channels["defect_count"] for s in stats.trajectories])
        D = (X - X[:, tail].mean(axis=1, keepdims=True)) / scale
        d = D.mean(axis=0)
        e = D.std(axis=0, ddof=1) / math.sqrt(n_traj) if n_traj > 1 else np.full(d.size, np.nan)
    else:
        stats = run_ensemble(model, init_factory, n_traj, base_seed, sched, threads)
        d = (stats.mean["defect_count"] - baseline) / scale
        e = stats.stderr["defect_count"] / scale
    return EnsembleStats(stats.times, {"delta_D": d}, {"delta_D": e}, stats.n_traj, 1,
                         stats.seeds)


def shrink_time(model: Model, torus: Torus, R: int, seed: int = 0,
                max_sweeps: float = 1e7, method: str = "auto") -> float | None:
    """Sweeps until a square patch of side ``R`` has no defects left (h = 0).

    The time is the first whole sweep after which the defect set is empty;
    ``None`` on timeout.
    """
    if model.h != 0:
        raise ValueError("shrink_time is defined at h = 0")
    init = build_square_patch(torus, R)
    if init.n_defects == 0:
        return 0.0
    sampler = Sampler(model, init, seed, method, monotone_check=True)
    budget = int(max_sweeps * torus.n_links)
    used = sampler.advance(budget, stop_at_zero=True)
    if sampler.n_defects != 0:
        return None
    return float(math.ceil(used / torus.n_links))
