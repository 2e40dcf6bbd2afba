"""Entropies and coherence quantifiers, all in bits."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .qstate import PureState, State, as_density, dephase

EIG_FLOOR = 1e-12


def _entropy_of_spectrum(lam: np.ndarray) -> float:
    lam = np.asarray(lam, dtype=float)
    lam = lam[lam >= EIG_FLOOR]
    h = -np.sum(lam * np.log2(lam))
    return float(h) if h > 0 else 0.0


def von_neumann_entropy(rho: State) -> float:
    """``-Tr rho log2 rho``; eigenvalues below 1e-12 contribute nothing."""
    if isinstance(rho, PureState):
        return 0.0
    return _entropy_of_spectrum(rho.eigenvalues())


def diagonal_entropy(rho: State) -> float:
    """Entropy of the fully dephased state, read straight off the diagonal."""
    if isinstance(rho, PureState):
        return _entropy_of_spectrum(np.abs(rho.amplitudes) ** 2)
    return _entropy_of_spectrum(np.real(np.diag(rho.matrix)))


def shannon_entropy(p) -> float:
    p = np.asarray(p, dtype=float).reshape(-1)
    if np.any(p < 0):
        raise ValueError("probabilities must be non-negative")
    if abs(p.sum() - 1) > 1e-9:
        raise ValueError(f"probabilities sum to {p.sum()!r}, expected 1")
    return _entropy_of_spectrum(p)


def binary_entropy(x: float) -> float:
    if not 0 <= x <= 1:
        raise ValueError(f"binary entropy argument {x!r} outside [0, 1]")
    return shannon_entropy([x, 1 - x])


@dataclass(frozen=True, eq=False)
class JointDistribution:
    """Joint pmf ``p(x, y)`` stored as a ``|X| x |Y|`` matrix."""

    px_y: np.ndarray

    def __post_init__(self):
        p = np.array(self.px_y, dtype=float)
        if p.ndim == 1:
            p = p.reshape(-1, 1)
        if p.ndim != 2:
            raise ValueError("joint distribution must be a matrix")
        if np.any(p < 0):
            raise ValueError("joint distribution has negative entries")
        if abs(p.sum() - 1) > 1e-12:
            raise ValueError(f"joint distribution sums to {p.sum()!r}, expected 1")
        p.setflags(write=False)
        object.__setattr__(self, "px_y", p)

    @property
    def shape(self):
        return self.px_y.shape

    def marginal_x(self):
        return self.px_y.sum(axis=1)

    def marginal_y(self):
        return self.px_y.sum(axis=0)

    def power(self, n: int) -> np.ndarray:
        """``p(x^n, y^n)`` with words indexed lexicographically (first symbol most significant)."""
        out = np.ones((1, 1))
        for _ in range(n):
            out = np.kron(out, self.px_y)
        return out


def conditional_shannon(p: JointDistribution) -> float:
    """``H(X|Y) = H(XY) - H(Y)``, clipped at 0 against rounding."""
    h = shannon_entropy(p.px_y) - shannon_entropy(p.marginal_y())
    return max(h, 0.0)


def doubly_symmetric_binary(crossover: float) -> JointDistribution:
    """Uniform binary X observed through a binary symmetric channel."""
    q = crossover
    return JointDistribution(np.array([[1 - q, q], [q, 1 - q]]) / 2)


def read_joint_csv(path) -> JointDistribution:
    """Read the ``x,y,p`` CSV format (one row per nonzero entry)."""
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["x", "y", "p"]:
            raise ValueError("joint distribution CSV needs header 'x,y,p'")
        for row in reader:
            rows.append((int(row["x"]), int(row["y"]), float(row["p"])))
    if not rows:
        raise ValueError("joint distribution CSV is empty")
    nx = max(r[0] for r in rows) + 1
    ny = max(r[1] for r in rows) + 1
    p = np.zeros((nx, ny))
    for x, y, v in rows:
        p[x, y] += v
    return JointDistribution(p)


def write_joint_csv(p: JointDistribution, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "y", "p"])
        for (x, y), v in np.ndenumerate(p.px_y):
            if v > 0:
                w.writerow([x, y, repr(float(v))])


def rel_entropy_coherence(rho: State) -> float:
    """Relative entropy of coherence ``S(Delta rho) - S(rho)``."""
    return max(diagonal_entropy(rho) - von_neumann_entropy(rho), 0.0)


def qi_relative_entropy(rho: State, incoherent_side: Iterable[str]) -> float:
    """Quantum-incoherent relative entropy ``S(Delta^Y rho) - S(rho)``.

    ``incoherent_side`` names the factors Y that are dephased; the rest of
    the layout is the quantum side X.
    """
    rho = as_density(rho)
    dephased = dephase(rho, incoherent_side)
    return max(von_neumann_entropy(dephased) - von_neumann_entropy(rho), 0.0)


def dephased_entropy(rho: State, subsystems: Iterable[str]) -> float:
    return von_neumann_entropy(dephase(rho, subsystems))

