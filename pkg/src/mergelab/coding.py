"""Slepian-Wolf codes over small alphabets with exactly enumerated error.

Words ``x^n`` and ``y^n`` are indexed lexicographically with the first
symbol most significant, matching the Kronecker order of ``p^{(x) n}``.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .info import JointDistribution, conditional_shannon

DEFAULT_BUDGET = 2 ** 21


class BudgetExceeded(ValueError):
    """An enumeration or simulation would exceed the dimension budget."""

    def __init__(self, what: str, size: int, budget: int):
        super().__init__(f"{what} needs {size} entries, over the budget of {budget} (set MERGELAB_BUDGET to raise it)")
        self.size = size
        self.budget = budget


def dimension_budget(budget=None) -> int:
    if budget is not None:
        return int(budget)
    env = os.environ.get("MERGELAB_BUDGET")
    return int(env) if env else DEFAULT_BUDGET


class Reserve(NamedTuple):
    """Reserve-space output of ``gtilde``: the undecodable input pair itself."""

    nu: int
    y: int


@dataclass(frozen=True, eq=False)
class SWCode:
    n: int
    num_bins: int
    nx: int
    ny: int
    f: np.ndarray
    g: np.ndarray
    good_set: np.ndarray
    error_prob: float

    def __post_init__(self):
        for arr in (self.f, self.g, self.good_set):
            arr.setflags(write=False)

    @property
    def num_x(self) -> int:
        return self.nx ** self.n

    @property
    def num_y(self) -> int:
        return self.ny ** self.n

    @property
    def ebits(self) -> int:
        """Qubits needed to carry the bin index."""
        return max(0, math.ceil(math.log2(self.num_bins) - 1e-12))

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "N": self.num_bins,
            "nx": self.nx,
            "ny": self.ny,
            "f": [int(v) for v in self.f],
            "error_prob": float(self.error_prob),
        }

    def dump(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh)


def num_bins_for(p: JointDistribution, n: int, rate_delta: float) -> int:
    rate = n * (conditional_shannon(p) + rate_delta)
    return max(1, math.ceil(2 ** rate - 1e-9))


def _check_enumeration(p, n, budget):
    nx, ny = p.shape
    size = (nx ** n) * (ny ** n)
    budget = dimension_budget(budget)
    if size > budget:
        raise BudgetExceeded(f"enumerating |X|^n |Y|^n at n={n}", size, budget)
    return nx, ny


def ml_decoder(pn: np.ndarray, f: np.ndarray, num_bins: int) -> np.ndarray:
    """Maximum-likelihood decoder table ``g[nu, y]``; -1 marks an empty bin.

    Ties go to the smallest word index, i.e. the lexicographically smallest
    ``x^n``, because ``argmax`` returns the first maximum and each bin's
    members are kept in ascending order.
    """
    g = np.full((num_bins, pn.shape[1]), -1, dtype=np.int64)
    order = np.argsort(f, kind="stable")
    bounds = np.searchsorted(f[order], np.arange(num_bins + 1))
    for nu in range(num_bins):
        members = order[bounds[nu]:bounds[nu + 1]]
        if members.size:
            g[nu] = members[np.argmax(pn[members], axis=0)]
    return g


def _good_set(pn, f, g):
    decoded = g[f]  # decoded[x, y] = g(f(x), y)
    return (decoded == np.arange(pn.shape[0])[:, None]) & (pn > 0)


def code_from_binning(p: JointDistribution, n: int, f, num_bins: int) -> SWCode:
    """Complete a given binning ``f`` with the ML decoder and its exact error."""
    pn = p.power(n)
    f = np.asarray(f, dtype=np.int64)
    if f.shape != (pn.shape[0],) or f.min() < 0 or f.max() >= num_bins:
        raise ValueError("binning must map every x^n into range(num_bins)")
    err, g, good = _ml_error(pn, f, num_bins)
    nx, ny = p.shape
    return SWCode(n, num_bins, nx, ny, f, g, good, err)


def identity_code(p: JointDistribution, n: int, budget=None) -> SWCode:
    """The full-index code ``f(x^n) = x^n`` with ``N = |X|^n``; zero error."""
    _check_enumeration(p, n, budget)
    nx = p.shape[0]
    return code_from_binning(p, n, np.arange(nx ** n), nx ** n)


def _uniform_binning(rng, num_words, num_bins):
    u = rng.random(num_words)
    return np.minimum((u * num_bins).astype(np.int64), num_bins - 1)


def _ml_error(pn, f, num_bins):
    g = ml_decoder(pn, f, num_bins)
    good = _good_set(pn, f, g)
    return float(pn[~good].sum()), g, good


def climb(pn: np.ndarray, f: np.ndarray, num_bins: int, rng, max_passes: int = 50) -> np.ndarray:
    """Single-word moves between bins while the exact ML error drops.

    The ML error of a bin is ``sum_y (sum_x p(x,y) - max_x p(x,y))``, so
    adding word ``x`` to a bin whose column maxima are ``M`` costs
    ``sum_y min(p(x,y), M(y))``.  A move is taken only when the cost at the
    destination is strictly below the cost of staying.
    """
    f = f.copy()
    num_y = pn.shape[1]
    bin_max = np.zeros((num_bins, num_y))
    np.maximum.at(bin_max, f, pn)
    members = [set(np.flatnonzero(f == nu).tolist()) for nu in range(num_bins)]
    for _ in range(max_passes):
        moved = False
        for x in rng.permutation(pn.shape[0]):
            nu = f[x]
            rest = [m for m in members[nu] if m != x]
            rest_max = pn[rest].max(axis=0) if rest else np.zeros(num_y)
            stay = np.minimum(pn[x], rest_max).sum()
            cost = np.minimum(pn[x][None, :], bin_max).sum(axis=1)
            cost[nu] = stay
            mu = int(np.argmin(cost))
            if cost[mu] < stay - 1e-15:
                members[nu].discard(x)
                members[mu].add(x)
                bin_max[nu] = rest_max
                bin_max[mu] = np.maximum(bin_max[mu], pn[x])
                f[x] = mu
                moved = True
        if not moved:
            break
    return f


def random_code(p: JointDistribution, n: int, num_bins: int, trials: int = 1, seed=None, budget=None,
                search: str = "climb") -> SWCode:
    """Best of ``trials`` seeded random binnings into ``num_bins`` bins.

    Each trial draws one uniform ``u_x`` per source word and bins it at
    ``floor(u_x * N)``, an i.i.d. uniform binning.  With ``search="iid"`` that
    binning is used as is; for a fixed seed the binning into ``2N`` bins then
    refines the one into ``N`` bins, so the best error cannot increase with
    such doubling.  With ``search="climb"`` (default) each binning is first
    improved by :func:`climb`.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if search not in ("iid", "climb"):
        raise ValueError(f"unknown search {search!r}")
    nx, ny = _check_enumeration(p, n, budget)
    pn = p.power(n)
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(trials):
        f = _uniform_binning(rng, pn.shape[0], num_bins)
        if search == "climb":
            f = climb(pn, f, num_bins, rng)
        err, g, good = _ml_error(pn, f, num_bins)
        if best is None or err < best[0]:
            best = (err, f, g, good)
    err, f, g, good = best
    return SWCode(n, num_bins, nx, ny, f, g, good, err)


def build_code(p: JointDistribution, n: int, rate_delta: float = 0.0, trials: int = 1, seed=None, budget=None,
               search: str = "climb") -> SWCode:
    """Slepian-Wolf code with ``N = ceil(2^{n(H(X|Y)+delta)})`` bins.

    When ``N`` reaches ``|X|^n`` the identity binning is used instead: no
    binning can do better than zero error and random ones usually collide.
    """
    if n < 1:
        raise ValueError("block length must be >= 1")
    if rate_delta < 0:
        raise ValueError("rate_delta must be >= 0")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    nx, _ = _check_enumeration(p, n, budget)
    num_bins = num_bins_for(p, n, rate_delta)
    if num_bins >= nx ** n:
        return identity_code(p, n, budget)
    return random_code(p, n, num_bins, trials, seed, budget, search)


def error_probability(code: SWCode, p: JointDistribution) -> float:
    """Exact ``Pr{X^n != g(f(X^n), Y^n)}`` under ``p``, recomputed from the tables."""
    if p.shape != (code.nx, code.ny):
        raise ValueError(f"code alphabets {(code.nx, code.ny)} do not match distribution {p.shape}")
    pn = p.power(code.n)
    good = _good_set(pn, code.f, code.g)
    return float(pn[~good].sum())


def word_index(symbols, alphabet: int) -> int:
    idx = 0
    for s in symbols:
        idx = idx * alphabet + int(s)
    return idx


def word_symbols(index: int, alphabet: int, n: int) -> tuple:
    return tuple(int(v) for v in np.unravel_index(index, (alphabet,) * n)) if n else ()


def gtilde(code: SWCode, nu: int, yn):
    """Injective decoder ``G~``: ``(x^n, y^n)`` word indices on success, else ``Reserve(nu, y^n)``."""
    y = yn if isinstance(yn, (int, np.integer)) else word_index(yn, code.ny)
    if not (0 <= nu < code.num_bins and 0 <= y < code.num_y):
        raise IndexError(f"(nu, y) = ({nu}, {y}) out of range")
    x = int(code.g[nu, y])
    if x >= 0 and code.f[x] == nu and code.good_set[x, y]:
        return (x, int(y))
    return Reserve(int(nu), int(y))


def gtilde_table(code: SWCode) -> np.ndarray:
    """Flat output label of ``G~`` for every ``(nu, y)``.

    Labels ``x * |Y|^n + y`` are the decoded pairs; labels from
    ``|X|^n |Y|^n`` upward are the reserve copy of ``(nu, y)``.
    """
    nuy = np.arange(code.num_bins)[:, None], np.arange(code.num_y)[None, :]
    x = code.g
    valid = x >= 0
    xs = np.where(valid, x, 0)
    hit = valid & (code.f[xs] == nuy[0]) & code.good_set[xs, nuy[1]]
    pair = xs * code.num_y + nuy[1]
    reserve = code.num_x * code.num_y + nuy[0] * code.num_y + nuy[1]
    return np.where(hit, pair, reserve)
