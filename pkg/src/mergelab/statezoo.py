"""Constructors for the named states used throughout the package."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .qstate import DensityOperator, LayoutError, PureState, StateError, SystemLayout, partial_trace
from .qstate import TOL


def _check_d(d):
    if int(d) != d or d < 2:
        raise ValueError(f"dimension must be an integer >= 2, got {d!r}")
    return int(d)


def qft(d: int) -> np.ndarray:
    """Quantum Fourier transform, ``omega^(jk) / sqrt(d)``."""
    d = _check_d(d)
    j = np.arange(d)
    return np.exp(2j * np.pi * np.outer(j, j) / d) / np.sqrt(d)


def max_entangled(d: int, labels=("A", "B")) -> PureState:
    d = _check_d(d)
    amps = np.eye(d).reshape(-1) / np.sqrt(d)
    return PureState(SystemLayout.of((labels[0], d), (labels[1], d)), amps)


def max_coherent(d: int, label: str = "B") -> PureState:
    d = _check_d(d)
    return PureState(SystemLayout.of((label, d)), np.ones(d) / np.sqrt(d))


def flower(d: int, unitary=None) -> PureState:
    """Flower state on ``(R, A, B)`` with dims ``(d, 2, d)``.

    Branch ``i`` of the qubit A carries ``(1 x U_i)|Phi_d>`` on RB with
    ``U_0 = 1`` and ``U_1 = qft(d)`` unless ``unitary`` overrides ``U_1``.
    """
    d = _check_d(d)
    u1 = qft(d) if unitary is None else np.asarray(unitary, dtype=complex)
    if u1.shape != (d, d):
        raise StateError(f"override unitary must be {d}x{d}")
    branches = [np.eye(d), u1]
    t = np.zeros((d, 2, d), dtype=complex)
    for i, u in enumerate(branches):
        # amplitude of |r>|i>|b> is <r|U_i^T|j=b>/sqrt(2d) = U_i[b, r]/sqrt(2d)
        t[:, i, :] = u.T / np.sqrt(2 * d)
    return PureState(SystemLayout.of(("R", d), ("A", 2), ("B", d)), t.reshape(-1))


def flower_branch_form(d: int, unitary=None) -> PureState:
    """Flower state assembled from its second form, ``sum_i |i>^A (1 x U_i)|Phi_d>^RB / sqrt 2``."""
    d = _check_d(d)
    u1 = qft(d) if unitary is None else np.asarray(unitary, dtype=complex)
    phi = np.eye(d) / np.sqrt(d)  # phi[r, b]
    t = np.zeros((d, 2, d), dtype=complex)
    for i, u in enumerate([np.eye(d), u1]):
        t[:, i, :] = (phi @ u.T) / np.sqrt(2)  # (1 x U) acting on the b index
    return PureState(SystemLayout.of(("R", d), ("A", 2), ("B", d)), t.reshape(-1))


def source_state(p, reference_dim=None, seed=None) -> PureState:
    """Pure ``sum_xy sqrt(p(x,y)) |mu_xy>^R |x>^A |y>^B``.

    With ``reference_dim=None`` the reference states are orthonormal
    ``|xy>``.  Otherwise they are seeded random unit vectors in a reference
    of the given dimension (then the state is still normalized because each
    ``|x>|y>`` pair is orthogonal on AB).
    """
    p = np.asarray(getattr(p, "px_y", p), dtype=float)
    nx, ny = p.shape
    amp = np.sqrt(p)
    if reference_dim is None:
        dr = nx * ny
        mu = np.eye(dr).reshape(dr, nx, ny)
    else:
        dr = int(reference_dim)
        rng = np.random.default_rng(seed)
        mu = rng.normal(size=(dr, nx, ny)) + 1j * rng.normal(size=(dr, nx, ny))
        mu /= np.linalg.norm(mu, axis=0, keepdims=True)
    t = mu * amp[None, :, :]
    return PureState(SystemLayout.of(("R", dr), ("A", nx), ("B", ny)), t.reshape(-1))


@dataclass(frozen=True, eq=False)
class SeparableFamily:
    """``rho = sum_ij p_ij |ij><ij|^R x |psi_ij><psi_ij|^A x |i><i|^B``.

    ``states[i][j]`` is the vector ``|psi_ij>``; vectors with the same ``i``
    must be orthonormal.
    """

    p: np.ndarray
    states: tuple

    def __post_init__(self):
        p = np.array(self.p, dtype=float)
        if p.ndim != 2 or np.any(p < 0) or abs(p.sum() - 1) > 1e-9:
            raise ValueError("p must be a non-negative matrix summing to 1")
        ni, nj = p.shape
        vecs = np.array(self.states, dtype=complex)
        if vecs.ndim != 3 or vecs.shape[:2] != (ni, nj):
            raise ValueError(f"states must have shape ({ni}, {nj}, d_A)")
        for i in range(ni):
            gram = vecs[i].conj() @ vecs[i].T
            bad = np.argwhere(np.abs(gram - np.eye(nj)) > TOL)
            if bad.size:
                j, k = bad[0]
                raise ValueError(f"<psi_{i}{j}|psi_{i}{k}> = {gram[j, k]:.3g} violates orthonormality (i,j,k)=({i},{j},{k})")
        p.setflags(write=False)
        vecs.setflags(write=False)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "states", vecs)

    @property
    def dims(self):
        ni, nj, da = self.states.shape
        return ni * nj, da, ni


def separable_family_state(fam: SeparableFamily) -> DensityOperator:
    ni, nj, da = fam.states.shape
    dr = ni * nj
    rho = np.zeros((dr * da * ni,) * 2, dtype=complex)
    for i in range(ni):
        for j in range(nj):
            if fam.p[i, j] == 0:
                continue
            r = np.zeros(dr)
            r[i * nj + j] = 1
            b = np.zeros(ni)
            b[i] = 1
            v = np.kron(np.kron(r, fam.states[i, j]), b)
            rho += fam.p[i, j] * np.outer(v, v.conj())
    return DensityOperator(SystemLayout.of(("R", dr), ("A", da), ("B", ni)), rho)


def random_separable_family(ni: int, nj: int, da: int, seed=None) -> SeparableFamily:
    """Random weights and, per ``i``, ``nj`` orthonormal vectors from a Haar unitary."""
    if nj > da:
        raise ValueError("need nj <= d_A for orthonormal branches")
    rng = np.random.default_rng(seed)
    p = rng.random((ni, nj))
    p /= p.sum()
    states = np.array([haar_unitary(da, rng)[:, :nj].T for _ in range(ni)])
    return SeparableFamily(p, states)


def haar_unitary(d: int, rng) -> np.ndarray:
    z = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def _layout_for(dims, labels):
    dims = tuple(int(d) for d in dims)
    if any(d < 1 for d in dims):
        raise ValueError(f"dimensions must be positive, got {dims}")
    if labels is None:
        labels = ("R", "A", "B")[: len(dims)] if len(dims) <= 3 else tuple(f"S{i}" for i in range(len(dims)))
    if len(labels) != len(dims):
        raise LayoutError("need one label per dimension")
    return SystemLayout(tuple(zip(labels, dims)))


def random_pure(dims, seed=None, labels=None) -> PureState:
    """Haar-random pure state: a normalized complex Gaussian vector."""
    layout = _layout_for(dims, labels)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    v = rng.normal(size=layout.total_dim) + 1j * rng.normal(size=layout.total_dim)
    return PureState(layout, v / np.linalg.norm(v))


def random_density(dims, rank=None, seed=None, labels=None) -> DensityOperator:
    """Random mixed state, the marginal of a Haar-random purification of dimension ``rank``."""
    layout = _layout_for(dims, labels)
    d = layout.total_dim
    rank = d if rank is None else int(rank)
    if not 1 <= rank <= d:
        raise ValueError(f"rank must lie in [1, {d}]")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    purif = random_pure((d, rank), seed=rng, labels=("S", "E"))
    rho = partial_trace(purif, ["E"])
    return DensityOperator(layout, rho.matrix)
