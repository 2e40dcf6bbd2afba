"""Kraus channels, coherence-class validators and minimum output entropy."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .qstate import TOL, DensityOperator, LayoutError, State, SystemLayout, _apply_on_axes, as_density
from .statezoo import haar_unitary, qft

ZERO = 1e-12


class ChannelError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class KrausChannel:
    kraus: tuple
    input_layout: SystemLayout
    output_layout: SystemLayout

    def __post_init__(self):
        ops = [np.array(k, dtype=complex) for k in self.kraus]
        if not ops:
            raise ChannelError("channel needs at least one Kraus operator")
        din, dout = self.input_layout.total_dim, self.output_layout.total_dim
        for k in ops:
            if k.shape != (dout, din):
                raise ChannelError(f"Kraus operator of shape {k.shape}, expected {(dout, din)}")
        completeness = sum(k.conj().T @ k for k in ops)
        dev = np.max(np.abs(completeness - np.eye(din)))
        if dev > TOL:
            raise ChannelError(f"Kraus operators are not trace preserving (deviation {dev:.3g})")
        for k in ops:
            k.setflags(write=False)
        object.__setattr__(self, "kraus", tuple(ops))

    @classmethod
    def from_kraus(cls, kraus, in_label="in", out_label="out") -> "KrausChannel":
        ops = [np.asarray(k, dtype=complex) for k in kraus]
        dout, din = ops[0].shape
        return cls(tuple(ops), SystemLayout.of((in_label, din)), SystemLayout.of((out_label, dout)))

    @property
    def in_dim(self) -> int:
        return self.input_layout.total_dim

    @property
    def out_dim(self) -> int:
        return self.output_layout.total_dim


def identity_channel(d: int) -> KrausChannel:
    return KrausChannel.from_kraus([np.eye(d)])


def unitary_channel(u) -> KrausChannel:
    return KrausChannel.from_kraus([u])


def dephasing_channel(d: int) -> KrausChannel:
    return KrausChannel.from_kraus([np.diag(np.eye(d)[i]) for i in range(d)])


def tensor_channel(a: KrausChannel, b: KrausChannel) -> KrausChannel:
    relabel = {label: label + "'" for label in b.input_layout.labels}
    relabel_out = {label: label + "'" for label in b.output_layout.labels}
    return KrausChannel(
        tuple(np.kron(ka, kb) for ka in a.kraus for kb in b.kraus),
        a.input_layout.concat(b.input_layout.relabel(relabel)),
        a.output_layout.concat(b.output_layout.relabel(relabel_out)),
    )


def apply(ch: KrausChannel, rho: State, targets=None) -> DensityOperator:
    """Apply ``ch`` to ``rho``.

    Without ``targets`` the channel acts on the whole state and the result
    carries ``ch.output_layout``.  With ``targets`` it acts on those factors
    only and they are replaced by the output factors.
    """
    rho = as_density(rho)
    if targets is None:
        if rho.layout.total_dim != ch.in_dim:
            raise ChannelError(f"state dimension {rho.layout.total_dim} != channel input {ch.in_dim}")
        out = sum(k @ rho.matrix @ k.conj().T for k in ch.kraus)
        return DensityOperator(ch.output_layout, out)
    targets = [targets] if isinstance(targets, str) else list(targets)
    if rho.layout.dim_of(targets) != ch.in_dim:
        raise ChannelError(f"targets {targets} have dimension {rho.layout.dim_of(targets)}, channel expects {ch.in_dim}")
    # a single output factor keeps the name of the first target
    if len(ch.output_layout) == 1:
        outputs = [(targets[0], ch.out_dim)]
    else:
        outputs = list(ch.output_layout.factors)
    total = sum(_unnormalized_apply(rho, k, targets, outputs) for k in ch.kraus)
    return DensityOperator(_replaced_layout(rho.layout, targets, outputs), total)


def _replaced_layout(layout, targets, outputs):
    first = min(layout.indices(targets))
    before = list(layout.factors[:first])
    after = [f for f in layout.factors[first:] if f[0] not in targets]
    clash = {label for label, _ in outputs} & {label for label, _ in before + after}
    if clash:
        raise LayoutError(f"output label {sorted(clash)[0]!r} already present")
    return SystemLayout(tuple(before) + tuple(outputs) + tuple(after))


def _unnormalized_apply(rho, k, targets, outputs):
    layout = rho.layout
    axes = layout.indices(targets)
    in_dims = [layout.dims[i] for i in axes]
    out_dims = [d for _, d in outputs]
    nfac = len(layout)
    t = _apply_on_axes(rho.tensor, k, axes, in_dims, out_dims)
    shift = len(out_dims) - len(in_dims)
    t = _apply_on_axes(t, k.conj(), [a + nfac + shift for a in axes], in_dims, out_dims)
    d = int(np.prod(t.shape[: t.ndim // 2]))
    return t.reshape(d, d)


def _column_ok(k: np.ndarray) -> bool:
    return bool(np.all(np.count_nonzero(np.abs(k) > ZERO, axis=0) <= 1))


def is_incoherent(ch: KrausChannel) -> bool:
    """Every Kraus operator maps each basis vector to a multiple of a basis vector."""
    return all(_column_ok(k) for k in ch.kraus)


def is_strictly_incoherent(ch: KrausChannel) -> bool:
    """Kraus operators and their adjoints are all incoherent."""
    return all(_column_ok(k) and _column_ok(k.conj().T) for k in ch.kraus)


def is_mio(ch: KrausChannel) -> bool:
    """Maps every incoherent state to an incoherent one.

    Checking basis projectors suffices: incoherent states are their convex
    hull and the channel is linear.
    """
    for i in range(ch.in_dim):
        out = sum(np.outer(k[:, i], k[:, i].conj()) for k in ch.kraus)
        off = out - np.diag(np.diag(out))
        if np.max(np.abs(off)) >= TOL:
            return False
    return True


def flower_decode_channel(d: int) -> KrausChannel:
    """``M(sigma) = Delta(U sigma U^dag)`` with ``U = (|0> x 1 + |1> x QFT) / sqrt 2``.

    Maps ``B`` (dim d) onto ``(B~, B)`` (dims 2, d).  The Kraus operators are
    the rows of the isometry: ``|k><k|U`` for each output basis vector k.
    """
    if int(d) != d or d < 2:
        raise ChannelError(f"flower_decode_channel needs d >= 2, got {d!r}")
    d = int(d)
    iso = np.vstack([np.eye(d), qft(d)]) / np.sqrt(2)
    kraus = []
    for k in range(2 * d):
        op = np.zeros((2 * d, d), dtype=complex)
        op[k] = iso[k]
        kraus.append(op)
    return KrausChannel(tuple(kraus), SystemLayout.of(("B", d)), SystemLayout.of(("B~", 2), ("B", d)))


def maassen_uffink_floor(d: int) -> float:
    """Entropy floor ``1 + log2(d)/2`` of the flower decode channel."""
    return 1 + 0.5 * np.log2(d)


# -- minimum output entropy -----------------------------------------------------


def _params_to_vector(x, d):
    # phase gauge fixed: first amplitude real
    v = np.empty(d, dtype=complex)
    v[0] = x[0]
    v[1:] = x[1:d] + 1j * x[d:]
    return v


def _stacked(ch):
    return np.concatenate(ch.kraus, axis=0)


def _entropy_and_grad(stack, dout, v):
    """Output entropy at ``v/|v|`` and its gradient w.r.t. the real parameters."""
    nrm = np.vdot(v, v).real
    w = (stack @ v).reshape(-1, dout)
    rho = (w.T @ w.conj()) / nrm
    lam, vecs = np.linalg.eigh((rho + rho.conj().T) / 2)
    lam = np.clip(lam, 1e-300, None)
    keep = lam > 1e-12
    s = float(-np.sum(lam[keep] * np.log2(lam[keep])))
    g_op = (vecs * -np.log2(lam)) @ vecs.conj().T
    # Phi^dag(G) v = sum_k K_k^dag G K_k v
    gv = (stack.conj().T @ (w @ g_op.T).reshape(-1)) / nrm
    tr = np.real(np.trace(g_op @ rho))
    dv = 2 * (gv - tr * v / nrm)
    grad = np.concatenate([[dv[0].real], dv[1:].real, dv[1:].imag])
    return s, grad


def output_entropy(ch: KrausChannel, vec) -> float:
    v = np.asarray(vec, dtype=complex)
    return _entropy_and_grad(_stacked(ch), ch.out_dim, v)[0]


def min_output_entropy(ch: KrausChannel, restarts: int = 100, seed=None, return_state=False):
    """Smallest output entropy found over pure inputs by multi-start local search.

    The result upper-bounds the true minimum output entropy.  The first
    starts are the basis vectors and the uniform superposition, where
    dephasing-type channels bottom out; the rest are Haar random.  Each start
    runs L-BFGS on the real parameters with the global phase removed.
    Deterministic for a given seed.
    """
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    d = ch.in_dim
    stack = _stacked(ch)
    rng = np.random.default_rng(seed)
    starts = [np.eye(d)[i] for i in range(d)] + [np.ones(d) / np.sqrt(d)]
    starts = starts[:restarts]
    while len(starts) < restarts:
        v = rng.normal(size=d) + 1j * rng.normal(size=d)
        starts.append(v / np.linalg.norm(v))

    def f(x):
        return _entropy_and_grad(stack, ch.out_dim, _params_to_vector(x, d))

    best_val, best_vec = np.inf, None
    for v0 in starts:
        if abs(v0[0]) > 0:
            v0 = v0 * np.exp(-1j * np.angle(v0[0]))
        x0 = np.concatenate([[v0[0].real], v0[1:].real, v0[1:].imag])
        val = f(x0)[0]
        if d > 1:
            res = minimize(f, x0, jac=True, method="L-BFGS-B", options={"maxiter": 500})
            # score the returned point directly; the optimizer's own value can lag
            val_opt = f(res.x)[0]
            if val_opt < val:
                val, x0 = val_opt, res.x
        if val < best_val:
            v = _params_to_vector(x0, d)
            best_val, best_vec = val, v / np.linalg.norm(v)
    if return_state:
        return best_val, best_vec
    return best_val


# -- random channels --------------------------------------------------------------


def random_channel(d_in: int, d_out: int, rng, num_kraus: int = 3) -> KrausChannel:
    """Generic channel from a Haar-random Stinespring isometry."""
    u = haar_unitary(d_out * num_kraus, rng)[:, :d_in]
    kraus = [u[k * d_out:(k + 1) * d_out] for k in range(num_kraus)]
    return KrausChannel.from_kraus(kraus)


def random_sio(d: int, rng, num_kraus: int = 3) -> KrausChannel:
    """Kraus operators ``P_k D_k`` (permutation times diagonal), weights normalized columnwise."""
    diags = rng.normal(size=(num_kraus, d)) + 1j * rng.normal(size=(num_kraus, d))
    diags /= np.linalg.norm(diags, axis=0, keepdims=True)
    kraus = []
    for k in range(num_kraus):
        perm = np.eye(d)[rng.permutation(d)]
        kraus.append(perm @ np.diag(diags[k]))
    return KrausChannel.from_kraus(kraus)


def random_io(d: int, rng, num_kraus: int = 3) -> KrausChannel:
    """Random incoherent channel that is generally not strictly incoherent.

    A random convex mixture of a strictly incoherent channel and a
    measure-and-prepare map ``|g(k)><w_k|`` whose measurement basis ``w`` is
    Haar random; each of those operators has a single nonzero row.
    """
    t = rng.random()
    sio = random_sio(d, rng, num_kraus)
    w = haar_unitary(d, rng)
    targets = rng.integers(d, size=d)
    kraus = [np.sqrt(t) * k for k in sio.kraus]
    for k in range(d):
        op = np.zeros((d, d), dtype=complex)
        op[targets[k]] = w[k].conj()
        kraus.append(np.sqrt(1 - t) * op)
    return KrausChannel.from_kraus(kraus)


def random_mio(d: int, rng) -> KrausChannel:
    """Random channel that maps incoherent states to incoherent states.

    Built as ``Delta o E`` composed with a random generic channel E, mixed with
    a random incoherent channel; the dephasing at the output makes it MIO
    without being IO in general.
    """
    gen = random_channel(d, d, rng)
    kraus = []
    t = rng.random()
    for k in gen.kraus:
        for i in range(d):
            op = np.zeros((d, d), dtype=complex)
            op[i] = k[i]
            kraus.append(np.sqrt(t) * op)
    kraus += [np.sqrt(1 - t) * k for k in random_io(d, rng).kraus]
    return KrausChannel.from_kraus(kraus)


# -- JSON --------------------------------------------------------------------------


def channel_to_dict(ch: KrausChannel) -> dict:
    def enc(m):
        return [[float(z.real), float(z.imag)] for z in m.reshape(-1)]

    return {"kraus": [enc(k) for k in ch.kraus], "in_dim": ch.in_dim, "out_dim": ch.out_dim}


def channel_from_dict(obj: dict) -> KrausChannel:
    try:
        din, dout = int(obj["in_dim"]), int(obj["out_dim"])
        kraus = [np.array([complex(re, im) for re, im in k]).reshape(dout, din) for k in obj["kraus"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise ChannelError(f"malformed channel document: {exc}") from exc
    return KrausChannel.from_kraus(kraus)


def load_channel(path) -> KrausChannel:
    with open(path, encoding="utf-8") as fh:
        return channel_from_dict(json.load(fh))


def dump_channel(ch: KrausChannel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(channel_to_dict(ch), fh)
