"""Dense pure and mixed states over labeled tensor factors.

Every multipartite object carries a :class:`SystemLayout`, an ordered list of
``(label, dim)`` factors.  Operations address factors by label; the Kronecker
order is whatever the layout says, so callers never index subsystems by
position.  The incoherent basis of every factor is its computational basis.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

TOL = 1e-9

PARTY_LABELS = ("R", "A", "B", "B~", "A'", "A0", "B0")


class LayoutError(ValueError):
    """Raised for unknown, duplicate or mismatched subsystem labels."""


class StateError(ValueError):
    """Raised when an array does not describe a valid state or unitary."""


@dataclass(frozen=True)
class SystemLayout:
    factors: tuple

    def __post_init__(self):
        factors = tuple((str(label), int(dim)) for label, dim in self.factors)
        seen = set()
        for label, dim in factors:
            if dim < 1:
                raise LayoutError(f"factor {label!r} has non-positive dimension {dim}")
            if label in seen:
                raise LayoutError(f"duplicate label {label!r}")
            seen.add(label)
        object.__setattr__(self, "factors", factors)

    @classmethod
    def of(cls, *factors) -> "SystemLayout":
        """``SystemLayout.of(("R", 2), ("A", 2))``."""
        return cls(tuple(factors))

    @property
    def labels(self) -> tuple:
        return tuple(label for label, _ in self.factors)

    @property
    def dims(self) -> tuple:
        return tuple(dim for _, dim in self.factors)

    @property
    def total_dim(self) -> int:
        return int(np.prod(self.dims, dtype=np.int64)) if self.factors else 1

    def __len__(self):
        return len(self.factors)

    def __contains__(self, label):
        return label in self.labels

    def dim(self, label: str) -> int:
        return self.dims[self.index(label)]

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise LayoutError(f"unknown label {label!r}; layout has {list(self.labels)}") from None

    def indices(self, labels: Iterable[str]) -> list:
        return [self.index(label) for label in _as_labels(labels)]

    def concat(self, other: "SystemLayout") -> "SystemLayout":
        clash = set(self.labels) & set(other.labels)
        if clash:
            raise LayoutError(f"duplicate label {sorted(clash)[0]!r} in tensor product")
        return SystemLayout(self.factors + other.factors)

    def without(self, labels: Iterable[str]) -> "SystemLayout":
        drop = set(_as_labels(labels))
        return SystemLayout(tuple(f for f in self.factors if f[0] not in drop))

    def select(self, labels: Iterable[str]) -> "SystemLayout":
        return SystemLayout(tuple(self.factors[i] for i in self.indices(labels)))

    def relabel(self, mapping: dict) -> "SystemLayout":
        for old in mapping:
            self.index(old)
        return SystemLayout(tuple((mapping.get(label, label), dim) for label, dim in self.factors))

    def dim_of(self, labels: Iterable[str]) -> int:
        return int(np.prod([self.dim(label) for label in _as_labels(labels)], dtype=np.int64))


def _as_labels(labels) -> list:
    if isinstance(labels, str):
        return [labels]
    return list(labels)


def _as_layout(layout) -> SystemLayout:
    if isinstance(layout, SystemLayout):
        return layout
    return SystemLayout(tuple(layout))


@dataclass(frozen=True, eq=False)
class PureState:
    layout: SystemLayout
    amplitudes: np.ndarray

    def __post_init__(self):
        layout = _as_layout(self.layout)
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if amps.size != layout.total_dim:
            raise StateError(f"{amps.size} amplitudes for layout of dimension {layout.total_dim}")
        norm = np.linalg.norm(amps)
        if abs(norm - 1) > TOL:
            raise StateError(f"state norm is {norm!r}, expected 1")
        amps.setflags(write=False)
        object.__setattr__(self, "layout", layout)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape(self.layout.dims)

    def density(self) -> "DensityOperator":
        return DensityOperator(self.layout, np.outer(self.amplitudes, self.amplitudes.conj()))


@dataclass(frozen=True, eq=False)
class DensityOperator:
    layout: SystemLayout
    matrix: np.ndarray

    def __post_init__(self):
        layout = _as_layout(self.layout)
        mat = np.array(self.matrix, dtype=complex)
        d = layout.total_dim
        if mat.shape != (d, d):
            raise StateError(f"matrix shape {mat.shape} does not match layout dimension {d}")
        herm = np.max(np.abs(mat - mat.conj().T)) if d else 0.0
        if herm > TOL:
            raise StateError(f"matrix is not Hermitian (deviation {herm:.3g})")
        tr = np.trace(mat).real
        if abs(tr - 1) > TOL:
            raise StateError(f"trace is {tr!r}, expected 1")
        mat = (mat + mat.conj().T) / 2
        lam_min = np.linalg.eigvalsh(mat)[0]
        if lam_min < -TOL:
            raise StateError(f"matrix has negative eigenvalue {lam_min:.3g}")
        mat.setflags(write=False)
        object.__setattr__(self, "layout", layout)
        object.__setattr__(self, "matrix", mat)

    @property
    def tensor(self) -> np.ndarray:
        dims = self.layout.dims
        return self.matrix.reshape(dims + dims)

    def eigenvalues(self) -> np.ndarray:
        """Eigenvalues in ascending order, with solver noise in [-TOL, 0) clamped to 0."""
        lam = np.linalg.eigvalsh(self.matrix)
        return np.where(lam < 0, 0.0, lam)

    def density(self) -> "DensityOperator":
        return self


State = Union[PureState, DensityOperator]


def as_density(state: State) -> DensityOperator:
    return state.density()


def basis_state(layout, index) -> PureState:
    """Computational basis ket; ``index`` is a flat index or one digit per factor."""
    layout = _as_layout(layout)
    if not isinstance(index, (int, np.integer)):
        index = int(np.ravel_multi_index(tuple(index), layout.dims))
    amps = np.zeros(layout.total_dim, dtype=complex)
    amps[index] = 1
    return PureState(layout, amps)


def ket(label: str, vector) -> PureState:
    """Normalize ``vector`` into a single-factor pure state."""
    vec = np.asarray(vector, dtype=complex)
    return PureState(SystemLayout.of((label, vec.size)), vec / np.linalg.norm(vec))


def maximally_mixed(layout) -> DensityOperator:
    layout = _as_layout(layout)
    d = layout.total_dim
    return DensityOperator(layout, np.eye(d) / d)


def tensor(a: State, b: State) -> State:
    """Kronecker product; the result has the concatenated layout."""
    layout = a.layout.concat(b.layout)
    if isinstance(a, PureState) and isinstance(b, PureState):
        return PureState(layout, np.kron(a.amplitudes, b.amplitudes))
    return DensityOperator(layout, np.kron(as_density(a).matrix, as_density(b).matrix))


def tensor_all(states: Sequence[State]) -> State:
    out = states[0]
    for s in states[1:]:
        out = tensor(out, s)
    return out


def relabel(state: State, mapping: dict) -> State:
    """Rename factors.  Zero cost: the data array is shared, not copied."""
    return type(state)(state.layout.relabel(mapping), state.amplitudes if isinstance(state, PureState) else state.matrix)


def permute(state: State, order: Sequence[str]) -> State:
    """Reorder factors so the layout follows ``order`` (all labels required)."""
    order = list(order)
    if sorted(order) != sorted(state.layout.labels):
        raise LayoutError(f"permutation {order} does not cover layout {list(state.layout.labels)}")
    perm = state.layout.indices(order)
    new_layout = state.layout.select(order)
    if isinstance(state, PureState):
        return PureState(new_layout, state.tensor.transpose(perm).reshape(-1))
    k = len(perm)
    t = state.tensor.transpose(perm + [p + k for p in perm])
    d = new_layout.total_dim
    return DensityOperator(new_layout, t.reshape(d, d))


def partial_trace(rho: State, drop: Iterable[str]) -> DensityOperator:
    """Trace out the factors named in ``drop``."""
    rho = as_density(rho)
    drop = _as_labels(drop)
    drop_idx = set(rho.layout.indices(drop))
    keep = [i for i in range(len(rho.layout)) if i not in drop_idx]
    new_layout = rho.layout.without(drop)
    k = len(rho.layout)
    # einsum subscripts: kept factors get distinct row/col letters, traced ones share one
    letters = iter(_letters(2 * k))
    row = [next(letters) for _ in range(k)]
    col = [row[i] if i in drop_idx else next(letters) for i in range(k)]
    out = [row[i] for i in keep] + [col[i] for i in keep]
    expr = "".join(row) + "".join(col) + "->" + "".join(out)
    t = np.einsum(expr, rho.tensor)
    d = new_layout.total_dim
    return DensityOperator(new_layout, t.reshape(d, d))


def reduce_to(rho: State, keep: Iterable[str]) -> DensityOperator:
    """Partial trace onto ``keep``, returned in the order given."""
    keep = _as_labels(keep)
    rho = as_density(rho)
    rho.layout.indices(keep)
    reduced = partial_trace(rho, [label for label in rho.layout.labels if label not in keep])
    return permute(reduced, keep)


def _letters(n):
    import string

    pool = string.ascii_letters
    if n > len(pool):
        raise LayoutError(f"too many factors ({n // 2}) for einsum")
    return pool[:n]


def dephase(rho: State, subsystems: Iterable[str]) -> DensityOperator:
    """Fully decohere the listed factors in their computational bases."""
    rho = as_density(rho)
    idx = rho.layout.indices(subsystems)
    dims = rho.layout.dims
    k = len(dims)
    mask = np.ones(dims + dims, dtype=bool)
    for i in idx:
        shape = [1] * (2 * k)
        shape[i] = dims[i]
        shape[i + k] = dims[i]
        mask &= np.eye(dims[i], dtype=bool).reshape(shape)
    d = rho.layout.total_dim
    return DensityOperator(rho.layout, np.where(mask, rho.tensor, 0).reshape(d, d))


def _check_same_layout(a, b):
    if a.layout != b.layout:
        raise LayoutError(f"layout mismatch: {a.layout.factors} vs {b.layout.factors}")


def trace_norm(m: np.ndarray) -> float:
    m = np.asarray(m)
    if np.allclose(m, m.conj().T, atol=1e-12):
        return float(np.sum(np.abs(np.linalg.eigvalsh((m + m.conj().T) / 2))))
    return float(np.sum(np.linalg.svd(m, compute_uv=False)))


def trace_distance(rho: State, sigma: State) -> float:
    """Unnormalized trace norm ``||rho - sigma||_1``, in [0, 2]."""
    _check_same_layout(rho, sigma)
    if isinstance(rho, PureState) and isinstance(sigma, PureState):
        # 2 sqrt(1 - F), with 1 - F taken as the squared norm of the part of
        # sigma orthogonal to rho; this keeps equal states at rounding level
        a, b = rho.amplitudes, sigma.amplitudes
        perp = b - np.vdot(a, b) * a
        return float(min(2.0, 2 * np.linalg.norm(perp)))
    return trace_norm(as_density(rho).matrix - as_density(sigma).matrix)


def overlap(psi: PureState, rho: State) -> float:
    """``<psi|rho|psi>``."""
    _check_same_layout(psi, rho)
    if isinstance(rho, PureState):
        return float(abs(np.vdot(psi.amplitudes, rho.amplitudes)) ** 2)
    v = psi.amplitudes
    return float(np.real(np.vdot(v, rho.matrix @ v)))


def is_unitary(u: np.ndarray, tol: float = TOL) -> bool:
    u = np.asarray(u)
    return u.ndim == 2 and u.shape[0] == u.shape[1] and np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))) <= tol


def is_isometry(v: np.ndarray, tol: float = TOL) -> bool:
    v = np.asarray(v)
    return v.ndim == 2 and v.shape[0] >= v.shape[1] and np.max(np.abs(v.conj().T @ v - np.eye(v.shape[1]))) <= tol


def _apply_on_axes(t: np.ndarray, op: np.ndarray, axes: list, in_dims: list, out_dims: list) -> np.ndarray:
    """Contract ``op`` (out x in) into tensor ``t`` on ``axes``; outputs land at ``axes[0]``."""
    rest = [i for i in range(t.ndim) if i not in axes]
    moved = t.transpose(axes + rest)
    lead = int(np.prod(in_dims, dtype=np.int64))
    moved = moved.reshape((lead,) + moved.shape[len(axes):])
    res = np.tensordot(op, moved, axes=(1, 0))
    res = res.reshape(tuple(out_dims) + res.shape[1:])
    # put the output block back where the first target axis sat
    pos = min(axes)
    before = [i for i in rest if i < pos]
    n_out = len(out_dims)
    perm = list(range(n_out, n_out + len(before))) + list(range(n_out)) + list(range(n_out + len(before), res.ndim))
    return res.transpose(perm)


def _target_layout(layout: SystemLayout, targets: list, outputs) -> SystemLayout:
    outputs = tuple((str(label), int(dim)) for label, dim in outputs)
    first = min(layout.indices(targets))
    rest = [f for f in layout.factors if f[0] not in targets]
    before = [f for f in layout.factors[:first] if f[0] not in targets]
    after = rest[len(before):]
    return SystemLayout(tuple(before) + outputs + tuple(after))


def apply_operator(state: State, op: np.ndarray, targets: Sequence[str], outputs=None) -> State:
    """Apply a linear map on ``targets`` without validating it.

    ``outputs`` gives the replacement factors; by default they equal the
    targets.  New factors take the position of the earliest target.
    """
    targets = _as_labels(targets)
    layout = state.layout
    axes = layout.indices(targets)
    in_dims = [layout.dims[i] for i in axes]
    if outputs is None:
        outputs = [(label, layout.dim(label)) for label in targets]
    out_dims = [int(dim) for _, dim in outputs]
    op = np.asarray(op, dtype=complex)
    if op.shape != (int(np.prod(out_dims, dtype=np.int64)), int(np.prod(in_dims, dtype=np.int64))):
        raise StateError(f"operator shape {op.shape} does not match targets {targets} with dims {in_dims}")
    new_layout = _target_layout(layout, targets, outputs)
    if isinstance(state, PureState):
        t = _apply_on_axes(state.tensor, op, axes, in_dims, out_dims)
        return PureState(new_layout, t.reshape(-1))
    k = len(layout)
    t = _apply_on_axes(state.tensor, op, axes, in_dims, out_dims)
    # the column axes have shifted by the change in factor count
    shift = len(out_dims) - len(in_dims)
    col_axes = [a + k + shift for a in axes]
    t = _apply_on_axes(t, op.conj(), col_axes, in_dims, out_dims)
    d = new_layout.total_dim
    return DensityOperator(new_layout, t.reshape(d, d))


def apply_unitary(state: State, u: np.ndarray, targets: Sequence[str]) -> State:
    """Apply unitary ``u`` on the listed factors (in the listed order)."""
    targets = _as_labels(targets)
    u = np.asarray(u, dtype=complex)
    dim = state.layout.dim_of(targets)
    if u.shape != (dim, dim):
        raise StateError(f"unitary of shape {u.shape} on targets of dimension {dim}")
    if not is_unitary(u):
        raise StateError("matrix is not unitary")
    return apply_operator(state, u, targets)


def apply_isometry(state: State, v: np.ndarray, targets: Sequence[str], outputs) -> State:
    """Apply isometry ``v`` mapping ``targets`` onto the new factors ``outputs``."""
    v = np.asarray(v, dtype=complex)
    if not is_isometry(v):
        raise StateError("matrix is not an isometry")
    return apply_operator(state, v, targets, outputs)


# -- JSON state files ---------------------------------------------------------


def state_to_dict(state: State) -> dict:
    if isinstance(state, PureState):
        data = state.amplitudes
        kind = "pure"
    else:
        data = state.matrix.reshape(-1)
        kind = "mixed"
    return {
        "factors": [{"label": label, "dim": dim} for label, dim in state.layout.factors],
        "kind": kind,
        "data": [[float(z.real), float(z.imag)] for z in data],
    }


def state_from_dict(obj: dict) -> State:
    try:
        layout = SystemLayout(tuple((f["label"], f["dim"]) for f in obj["factors"]))
        kind = obj["kind"]
        data = np.array([complex(re, im) for re, im in obj["data"]])
    except (KeyError, TypeError, ValueError) as exc:
        raise StateError(f"malformed state document: {exc}") from exc
    if kind == "pure":
        return PureState(layout, data)
    if kind == "mixed":
        d = layout.total_dim
        if data.size != d * d:
            raise StateError(f"{data.size} entries for a {d}x{d} density matrix")
        return DensityOperator(layout, data.reshape(d, d))
    raise StateError(f"unknown state kind {kind!r}")


def dump_state(state: State, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(state_to_dict(state), fh)


def load_state(path) -> State:
    with open(path, encoding="utf-8") as fh:
        return state_from_dict(json.load(fh))


def apply_diagonal(state: PureState, phases: np.ndarray, targets: Sequence[str]) -> PureState:
    """Multiply amplitudes by ``phases`` indexed by the joint basis of ``targets``."""
    targets = _as_labels(targets)
    layout = state.layout
    axes = layout.indices(targets)
    phases = np.asarray(phases, dtype=complex)
    if phases.size != layout.dim_of(targets):
        raise StateError(f"{phases.size} phases for targets of dimension {layout.dim_of(targets)}")
    if np.max(np.abs(np.abs(phases) - 1)) > TOL:
        raise StateError("diagonal entries must have unit modulus")
    shape = [1] * len(layout)
    # broadcast the phase table over the target axes in target order
    ph = phases.reshape([layout.dims[a] for a in axes])
    order = np.argsort(axes)
    ph = ph.transpose(order)
    for a in sorted(axes):
        shape[a] = layout.dims[a]
    return PureState(layout, (state.tensor * ph.reshape(shape)).reshape(-1))


def apply_kraus(rho: State, kraus, targets: Sequence[str]) -> DensityOperator:
    """``sum_k K_k rho K_k^dag`` on ``targets``; each ``K_k`` keeps the target dimensions.

    The Kraus set need not be complete; the result is validated as a state
    and returned in the input factor order.
    """
    rho = as_density(rho)
    targets = _as_labels(targets)
    layout = rho.layout
    axes = layout.indices(targets)
    dims = [layout.dims[a] for a in axes]
    k = len(layout)
    total = 0
    for op in kraus:
        op = np.asarray(op, dtype=complex)
        t = _apply_on_axes(rho.tensor, op, axes, dims, dims)
        t = _apply_on_axes(t, op.conj(), [a + k for a in axes], dims, dims)
        total = total + t
    grouped = _target_layout(layout, targets, [(label, layout.dim(label)) for label in targets])
    d = layout.total_dim
    return permute(DensityOperator(grouped, np.reshape(total, (d, d))), layout.labels)
