"""Lattice Hamiltonian on the product space of all wires.

Basis states are configurations ``(c_1, ..., c_M)`` of node indices,
numbered mixed-radix row-major with the last wire fastest. The operator is
stored as a diagonal (potentials, fields and on-site kinetic terms) plus
one nearest-neighbour hop amplitude per wire.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .compiler import SimulatorLayout
from .errors import ConvergenceError, EvaluationError, IsosimError

BASIS_CONVENTION = "mixed-radix-row-major-last-fastest"
DENSE_EIGEN_LIMIT = 2048
DENSE_MATRIX_LIMIT = 4096


@dataclass(frozen=True)
class BasisIndexer:
    radices: tuple[int, ...]

    @property
    def dimension(self) -> int:
        return math.prod(self.radices)

    @property
    def strides(self) -> tuple[int, ...]:
        strides, s = [], 1
        for r in reversed(self.radices):
            strides.append(s)
            s *= r
        return tuple(reversed(strides))

    def index(self, digits) -> int:
        idx = 0
        for d, r in zip(digits, self.radices):
            if not 0 <= d < r:
                raise IndexError(f"digit {d} out of range for radix {r}")
            idx = idx * r + int(d)
        return idx

    def digits(self, index: int) -> tuple[int, ...]:
        if not 0 <= index < self.dimension:
            raise IndexError(index)
        out = []
        for r in reversed(self.radices):
            index, d = divmod(index, r)
            out.append(d)
        return tuple(reversed(out))


@dataclass(frozen=True)
class SparseHamiltonian:
    radices: tuple[int, ...]
    diagonal: np.ndarray  # length D, real
    hops: tuple[float, ...]  # one per wire, already scaled
    time: float = 0.0
    scale: float = 1.0

    @property
    def dimension(self) -> int:
        return len(self.diagonal)

    @property
    def norm_bound(self) -> float:
        """Gershgorin bound on the spectral radius."""
        return float(np.max(np.abs(self.diagonal)) + 2.0 * sum(abs(h) for h in self.hops))

    def __matmul__(self, v):
        return apply(self, v)


def assemble(layout: SimulatorLayout, t: float = 0.0) -> SparseHamiltonian:
    """Build H(t): potentials and fields sampled at time ``t``, times the
    energy scale."""
    if not math.isfinite(t):
        raise IsosimError(f"time must be finite, got {t!r}")
    radices = layout.radices
    M = len(radices)
    index = {g.wire: k for k, g in enumerate(layout.grids)}
    total = np.zeros(radices)

    def axis_view(values, axes):
        shape = [1] * M
        for ax in axes:
            shape[ax] = radices[ax]
        return np.reshape(values, shape)

    with np.errstate(over="raise", invalid="raise"):
        try:
            for c in layout.couplings:
                i, j = index[c.wire_i], index[c.wire_j]
                vals = c.values if i < j else c.values.T
                total = total + axis_view(vals, sorted((i, j)))
            for f in layout.fields:
                k = index[f.wire]
                total = total + axis_view(f.sample(t), [k])
            for k, s in enumerate(layout.stencils):
                total = total + axis_view(np.full(radices[k], s.onsite), [k])
            diagonal = layout.scale * total.reshape(-1)
        except FloatingPointError as exc:
            raise EvaluationError(f"overflow while assembling the diagonal: {exc}") from None
    if not np.all(np.isfinite(diagonal)):
        raise EvaluationError("non-finite entry in the assembled diagonal")
    diagonal.setflags(write=False)
    hops = tuple(layout.scale * s.hop for s in layout.stencils)
    return SparseHamiltonian(radices, diagonal, hops, float(t), layout.scale)


def apply(H: SparseHamiltonian, v: np.ndarray) -> np.ndarray:
    """Matrix-vector product H @ v without forming the matrix."""
    v = np.asarray(v)
    if v.shape != (H.dimension,):
        raise ValueError(f"vector of shape {v.shape} does not match dimension {H.dimension}")
    out = H.diagonal * v
    if len(H.radices) == 0:
        return out
    vt = v.reshape(H.radices)
    ot = out.reshape(H.radices)
    for ax, h in enumerate(H.hops):
        lo = [slice(None)] * len(H.radices)
        hi = [slice(None)] * len(H.radices)
        lo[ax] = slice(None, -1)
        hi[ax] = slice(1, None)
        lo, hi = tuple(lo), tuple(hi)
        ot[hi] += h * vt[lo]
        ot[lo] += h * vt[hi]
    return out


def dense_matrix(H: SparseHamiltonian) -> np.ndarray:
    """Explicit matrix, built by index arithmetic (independent of apply)."""
    D = H.dimension
    if D > DENSE_MATRIX_LIMIT:
        raise IsosimError(f"dimension {D} exceeds the dense limit {DENSE_MATRIX_LIMIT}")
    A = np.diag(np.array(H.diagonal, dtype=float))
    idx = BasisIndexer(H.radices)
    strides = idx.strides
    for c in range(D):
        digits = idx.digits(c)
        for ax, h in enumerate(H.hops):
            if digits[ax] + 1 < H.radices[ax]:
                n = c + strides[ax]
                A[c, n] = h
                A[n, c] = h
    return A


def expectation(H: SparseHamiltonian, psi: np.ndarray) -> float:
    norm = np.linalg.norm(psi)
    if abs(norm - 1.0) > 1e-8:
        raise IsosimError(f"state is not normalized (norm {norm!r})")
    return float(np.vdot(psi, apply(H, psi)).real)


# ------------------------------------------------------------------ spectra

@dataclass(frozen=True)
class SpectrumResult:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns
    residuals: np.ndarray
    method: str

    def to_dict(self, H: SparseHamiltonian) -> dict:
        return {
            "dimension": H.dimension,
            "scale": H.scale,
            "method": self.method,
            "eigenvalues": [float(x) for x in self.eigenvalues],
            "residuals": [float(x) for x in self.residuals],
        }


def _residuals(H: SparseHamiltonian, vals, vecs) -> np.ndarray:
    return np.array(
        [np.linalg.norm(apply(H, vecs[:, i]) - vals[i] * vecs[:, i]) for i in range(len(vals))]
    )


def _fix_sign(vecs: np.ndarray) -> np.ndarray:
    # deterministic gauge: largest-magnitude entry positive
    for i in range(vecs.shape[1]):
        j = np.argmax(np.abs(vecs[:, i]))
        if vecs[j, i] < 0:
            vecs[:, i] = -vecs[:, i]
    return vecs


def lowest_eigenpairs(
    H: SparseHamiltonian,
    k: int = 1,
    tol: float = 1e-10,
    method: str = "auto",
    seed: int = 42,
    max_iter: int | None = None,
) -> SpectrumResult:
    """The ``k`` lowest eigenpairs of H in ascending order.

    ``method="auto"`` uses dense LAPACK diagonalization up to dimension
    2048 and Lanczos above it. Residuals satisfy
    ``|Hv - Ev| <= tol * norm_bound``.
    """
    D = H.dimension
    if not 1 <= k <= D:
        raise IsosimError(f"requested {k} eigenpairs of a dimension-{D} operator")
    if method == "auto":
        method = "dense" if D <= DENSE_EIGEN_LIMIT else "lanczos"
    if method == "dense":
        vals, vecs = np.linalg.eigh(dense_matrix(H))
        vals, vecs = vals[:k], _fix_sign(vecs[:, :k].copy())
    elif method == "lanczos":
        vals, vecs = lanczos_lowest(H, k, tol=tol, seed=seed, max_iter=max_iter)
        vecs = _fix_sign(vecs)
    else:
        raise ValueError(f"unknown method {method!r}")
    res = _residuals(H, vals, vecs)
    bound = tol * max(H.norm_bound, 1.0)
    if np.any(res > bound):
        raise ConvergenceError(
            f"eigenpair residual {res.max():.3e} above {bound:.3e}", float(res.max())
        )
    return SpectrumResult(vals, vecs, res, method)


def _lanczos_run(matvec, D, start, locked, want, tol, scale, max_iter):
    """One Lanczos run with full reorthogonalization against the Krylov
    basis and the locked vectors. Returns converged Ritz pairs (lowest
    ``want``) and the best residual estimate seen."""
    V = np.zeros((D, max_iter + 1))
    alpha = np.zeros(max_iter)
    beta = np.zeros(max_iter)

    def orth(w, m):
        for _ in range(2):
            if locked.shape[1]:
                w = w - locked @ (locked.T @ w)
            w = w - V[:, :m] @ (V[:, :m].T @ w)
        return w

    q = orth(start, 0)
    q /= np.linalg.norm(q)
    V[:, 0] = q
    best = np.inf
    check_every = 5
    m = 0
    for m in range(1, max_iter + 1):
        w = matvec(V[:, m - 1])
        alpha[m - 1] = V[:, m - 1] @ w
        w = orth(w, m)
        b = np.linalg.norm(w)
        beta[m - 1] = b
        exhausted = b <= 1e-14 * scale or m + locked.shape[1] >= D
        if m % check_every and not exhausted and m != max_iter:
            V[:, m] = w / b
            continue
        T = np.diag(alpha[:m]) + np.diag(beta[: m - 1], 1) + np.diag(beta[: m - 1], -1)
        theta, S = np.linalg.eigh(T)
        n = min(want, m)
        est = np.abs(b * S[-1, :n])
        best = min(best, float(est.max()))
        if exhausted or np.all(est <= tol * scale):
            return theta[:n], V[:, :m] @ S[:, :n], est, best
        V[:, m] = w / b
    return None, None, None, best


def lanczos_lowest(
    H: SparseHamiltonian,
    k: int,
    tol: float = 1e-10,
    seed: int = 42,
    max_iter: int | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Lanczos with full reorthogonalization and explicit locking.

    Converged vectors are locked and later runs work in their orthogonal
    complement, so eigenvalues missed by a single Krylov sequence (e.g.
    degenerate copies) are recovered; the last run confirms that nothing
    below the k-th locked value remains.
    """
    D = H.dimension
    rng = np.random.default_rng(seed)
    scale = max(H.norm_bound, 1.0)
    max_iter = min(D, max_iter or max(300, 4 * k + 60))
    matvec = lambda x: apply(H, x)  # noqa: E731

    locked_vecs = np.zeros((D, 0))
    locked_vals = np.zeros(0)
    best = np.inf
    for _ in range(4 * k + 8):
        want = max(k - len(locked_vals), 1)
        if locked_vecs.shape[1] >= D:
            break
        start = rng.standard_normal(D)
        room = D - locked_vecs.shape[1]
        theta, X, est, run_best = _lanczos_run(
            matvec, D, start, locked_vecs, want, tol, scale, min(max_iter, room)
        )
        best = min(best, run_best)
        if theta is None:
            raise ConvergenceError(
                f"Lanczos did not converge in {max_iter} iterations", best
            )
        if len(locked_vals) >= k:
            # confirmation run: anything below the current k-th value?
            if theta[0] >= locked_vals[k - 1] - tol * scale:
                break
            theta, X = theta[:1], X[:, :1]
        locked_vecs = np.hstack([locked_vecs, X])
        locked_vals = np.concatenate([locked_vals, theta])
        order = np.argsort(locked_vals, kind="stable")
        locked_vals, locked_vecs = locked_vals[order], locked_vecs[:, order]
        if len(locked_vals) > k:
            locked_vals, locked_vecs = locked_vals[:k], locked_vecs[:, :k]
    else:
        raise ConvergenceError("Lanczos locking did not settle", best)
    # Rayleigh-Ritz on the locked space cleans up mixing within clusters
    Q, _ = np.linalg.qr(locked_vecs)
    HQ = np.column_stack([matvec(Q[:, i]) for i in range(Q.shape[1])])
    theta, S = np.linalg.eigh(Q.T @ HQ)
    return theta[:k], Q @ S[:, :k]
