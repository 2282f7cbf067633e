"""Time evolution: driven real-time dynamics, imaginary-time relaxation and
thermal (Lindblad) relaxation of the simulator."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .compiler import SimulatorLayout
from .errors import ConvergenceError, IsosimError, StepSizeError
from .hamiltonian import SparseHamiltonian, apply, assemble, dense_matrix

LINDBLAD_LIMIT = 128
RATE_FLOOR = 1e-12


@dataclass(frozen=True)
class PropagatorConfig:
    dt: float = 1e-2
    krylov_dim: int = 24
    tol: float = 1e-9
    max_steps: int = 1_000_000
    max_substeps: int = 10_000

    def __post_init__(self):
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise IsosimError(f"dt must be positive, got {self.dt!r}")
        if self.krylov_dim < 2:
            raise IsosimError("krylov_dim must be at least 2")
        if not (math.isfinite(self.tol) and self.tol > 0):
            raise IsosimError(f"tol must be positive, got {self.tol!r}")


# -------------------------------------------------------------- states

def normalize(v: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(v)
    if n == 0:
        raise IsosimError("cannot normalize the zero vector")
    return v / n


def random_state(dimension: int, seed: int = 42) -> np.ndarray:
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(dimension) + 1j * rng.standard_normal(dimension)
    return normalize(v)


def check_state(psi: np.ndarray, dimension: int) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    if psi.shape != (dimension,):
        raise IsosimError(f"state has shape {psi.shape}, operator dimension is {dimension}")
    n = np.linalg.norm(psi)
    if abs(n - 1.0) > 1e-8:
        raise IsosimError(f"state is not normalized (norm {n!r})")
    return psi


def density_from_state(psi: np.ndarray) -> np.ndarray:
    return np.outer(psi, psi.conj())


def check_density(rho: np.ndarray, dimension: int | None = None) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise IsosimError(f"density matrix must be square, got {rho.shape}")
    if dimension is not None and rho.shape[0] != dimension:
        raise IsosimError(f"density matrix dimension {rho.shape[0]} != {dimension}")
    if np.linalg.norm(rho - rho.conj().T) > 1e-10:
        raise IsosimError("density matrix is not Hermitian")
    if abs(np.trace(rho).real - 1.0) > 1e-8:
        raise IsosimError(f"density matrix trace {np.trace(rho).real!r} != 1")
    if np.linalg.eigvalsh(rho).min() < -1e-9:
        raise IsosimError("density matrix is not positive semidefinite")
    return rho


def trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    return 0.5 * float(np.abs(np.linalg.eigvalsh(a - b)).sum())


# -------------------------------------------------------------- krylov

def _lanczos_basis(H: SparseHamiltonian, v: np.ndarray, m: int):
    """Hermitian Lanczos with full reorthogonalization. Returns (V, T,
    beta_next, exact) where ``exact`` flags an invariant subspace."""
    D = len(v)
    m = min(m, D)
    V = np.zeros((D, m), dtype=complex)
    alpha = np.zeros(m)
    beta = np.zeros(m)
    V[:, 0] = v
    scale = max(H.norm_bound, 1.0)
    for j in range(m):
        w = apply(H, V[:, j])
        alpha[j] = np.vdot(V[:, j], w).real
        for _ in range(2):
            w = w - V[:, : j + 1] @ (V[:, : j + 1].conj().T @ w)
        b = np.linalg.norm(w)
        beta[j] = b
        if b <= 1e-13 * scale or j + 1 == D:
            n = j + 1
            T = np.diag(alpha[:n]) + np.diag(beta[: n - 1], 1) + np.diag(beta[: n - 1], -1)
            return V[:, :n], T, 0.0, True
        if j + 1 < m:
            V[:, j + 1] = w / b
    T = np.diag(alpha) + np.diag(beta[: m - 1], 1) + np.diag(beta[: m - 1], -1)
    return V, T, float(beta[m - 1]), False


def krylov_expv(
    H: SparseHamiltonian,
    v: np.ndarray,
    z: complex,
    cfg: PropagatorConfig | None = None,
    shift: float = 0.0,
) -> np.ndarray:
    """Approximate ``exp(z (H - shift)) v`` in a Krylov subspace.

    The total step is split into substeps until the a posteriori error
    estimate ``beta_m |e_m^T exp(tau T) e_1|``, relative to the substep
    result, is below ``tol`` in proportion to the substep length. When the Krylov space becomes
    invariant (always the case for dimension <= krylov_dim) the result is
    exact up to rounding.
    """
    cfg = cfg or PropagatorConfig()
    v = np.asarray(v, dtype=complex)
    if z == 0:
        return v.copy()
    nv = np.linalg.norm(v)
    if nv == 0:
        raise IsosimError("krylov_expv needs a nonzero vector")
    w = v.copy()
    remaining = 1.0
    frac = 1.0
    substeps = 0
    err = float("nan")
    while remaining > 1e-15:
        nw = np.linalg.norm(w)
        V, T, b, exact = _lanczos_basis(H, w / nw, cfg.krylov_dim)
        theta, S = np.linalg.eigh(T - shift * np.eye(len(T)))
        floor = 16 * len(T) * np.finfo(float).eps * b
        frac = remaining if (exact or substeps == 0) else min(remaining, 2 * frac)
        while True:
            substeps += 1
            if substeps > cfg.max_substeps:
                raise ConvergenceError("krylov_expv exceeded its substep budget", err)
            c = S @ (np.exp(z * frac * theta) * S[0, :])
            if exact:
                break
            err = b * abs(c[-1]) / np.linalg.norm(c)
            # relative error budget, shared out in proportion to step length;
            # the estimate itself cannot resolve below its rounding floor
            if err <= max(cfg.tol * frac, floor):
                break
            frac *= 0.5
        w = nw * (V @ c)
        remaining -= frac
    return w


# ------------------------------------------------------------ observables

def wire_moments(layout: SimulatorLayout, psi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-wire position mean and variance for the probability |psi|^2."""
    prob = (np.abs(psi) ** 2).reshape(layout.radices)
    total = prob.sum()
    M = len(layout.radices)
    means, variances = np.zeros(M), np.zeros(M)
    for k, g in enumerate(layout.grids):
        other = tuple(ax for ax in range(M) if ax != k)
        marginal = prob.sum(axis=other) / total
        means[k] = marginal @ g.positions
        variances[k] = marginal @ (g.positions - means[k]) ** 2
    return means, variances


@dataclass
class TrajectoryRecord:
    wires: list[str]
    times: list[float] = field(default_factory=list)
    energies: list[float] = field(default_factory=list)
    norms: list[float] = field(default_factory=list)
    means: list[np.ndarray] = field(default_factory=list)
    variances: list[np.ndarray] = field(default_factory=list)

    def add(self, t, energy, norm, mean, var):
        if self.times and t <= self.times[-1]:
            raise IsosimError("trajectory sample times must increase")
        self.times.append(float(t))
        self.energies.append(float(energy))
        self.norms.append(float(norm))
        self.means.append(mean)
        self.variances.append(var)

    def columns(self, observables=("mean", "var")) -> list[str]:
        cols = ["time", "energy", "norm"]
        for w in self.wires:
            if "mean" in observables:
                cols.append(f"mean_{w}")
            if "var" in observables:
                cols.append(f"var_{w}")
        return cols

    def rows(self, observables=("mean", "var")):
        for n, t in enumerate(self.times):
            row = [t, self.energies[n], self.norms[n]]
            for k in range(len(self.wires)):
                if "mean" in observables:
                    row.append(float(self.means[n][k]))
                if "var" in observables:
                    row.append(float(self.variances[n][k]))
            yield row


def _record(rec, layout, H, t, psi):
    mean, var = wire_moments(layout, psi)
    n = np.linalg.norm(psi)
    energy = np.vdot(psi, apply(H, psi)).real / n**2
    rec.add(t, energy, n, mean, var)


def evolve_real(
    layout: SimulatorLayout,
    psi0: np.ndarray,
    t_final: float,
    cfg: PropagatorConfig | None = None,
    sample_every: int = 1,
) -> tuple[TrajectoryRecord, np.ndarray]:
    """Schrodinger evolution with exponential midpoint steps.

    A time-dependent H is sampled at the middle of each step, which keeps
    the scheme second order in ``dt``. The final step is shortened so the
    run ends exactly at ``t_final``.
    """
    cfg = cfg or PropagatorConfig()
    if not (math.isfinite(t_final) and t_final > 0):
        raise IsosimError(f"t_final must be positive, got {t_final!r}")
    psi = check_state(psi0, layout.dimension).copy()
    nsteps = max(1, math.ceil(t_final / cfg.dt - 1e-9))
    if nsteps > cfg.max_steps:
        raise IsosimError(f"{nsteps} steps exceed max_steps={cfg.max_steps}")
    driven = layout.time_dependent
    H_static = None if driven else assemble(layout, 0.0)
    rec = TrajectoryRecord([g.wire for g in layout.grids])
    _record(rec, layout, H_static or assemble(layout, 0.0), 0.0, psi)
    t = 0.0
    for n in range(1, nsteps + 1):
        t_next = t_final if n == nsteps else n * cfg.dt
        h = t_next - t
        H = H_static if not driven else assemble(layout, t + 0.5 * h)
        psi = krylov_expv(H, psi, -1j * h, cfg)
        t = t_next
        if n % sample_every == 0 or n == nsteps:
            _record(rec, layout, H_static or assemble(layout, t), t, psi)
    return rec, psi


def propagate(H: SparseHamiltonian, psi: np.ndarray, t: float,
              cfg: PropagatorConfig | None = None) -> np.ndarray:
    """``exp(-i H t) psi`` for a fixed operator, in steps of ``cfg.dt``."""
    cfg = cfg or PropagatorConfig()
    nsteps = max(1, math.ceil(abs(t) / cfg.dt - 1e-9))
    h = t / nsteps
    for _ in range(nsteps):
        psi = krylov_expv(H, psi, -1j * h, cfg)
    return psi


# ------------------------------------------------------- imaginary time

@dataclass
class RelaxResult:
    state: np.ndarray
    energy: float
    energies: list[float]
    steps: int
    converged: bool


def relax_imaginary(
    layout: SimulatorLayout,
    psi0: np.ndarray | None = None,
    dtau: float = 0.1,
    tol: float = 1e-10,
    max_steps: int = 100_000,
    cfg: PropagatorConfig | None = None,
    seed: int = 42,
    t: float = 0.0,
) -> RelaxResult:
    """Project onto the ground state by ``psi <- normalize(exp(-H dtau) psi)``.

    Stops once the energy changes by less than ``tol`` in one step.
    ``steps`` counts the steps before that confirming step, so a ground
    state input reports 0. Raises :class:`ConvergenceError` on stagnation.
    """
    if not (math.isfinite(dtau) and dtau > 0):
        raise IsosimError(f"dtau must be positive, got {dtau!r}")
    cfg = cfg or PropagatorConfig()
    H = assemble(layout, t)
    psi = random_state(layout.dimension, seed) if psi0 is None else check_state(psi0, layout.dimension)
    energy = float(np.vdot(psi, apply(H, psi)).real)
    energies = [energy]
    for step in range(1, max_steps + 1):
        # shifting by the current energy keeps the norm near one
        psi = normalize(krylov_expv(H, psi, -dtau, cfg, shift=energy))
        new = float(np.vdot(psi, apply(H, psi)).real)
        energies.append(new)
        change = abs(energy - new)
        energy = new
        if change < tol:
            return RelaxResult(psi, energy, energies, step - 1, True)
    raise ConvergenceError(
        f"imaginary-time relaxation stagnated after {max_steps} steps", change
    )


# ------------------------------------------------------------- lindblad

@dataclass(frozen=True)
class BathSpec:
    """Thermal bath coupled through the summed wire positions.

    Downward transitions (energy released ``w > 0``) occur at ``gamma0``
    times the squared coupling; upward ones carry the extra factor
    ``exp(-w/T)``. ``T = 0`` keeps only downward jumps, ``T = inf`` makes
    the rates symmetric.
    """

    temperature: float = 0.0
    gamma0: float = 1.0

    def __post_init__(self):
        if math.isnan(self.temperature) or self.temperature < 0:
            raise IsosimError(f"temperature must be >= 0, got {self.temperature!r}")
        if not (math.isfinite(self.gamma0) and self.gamma0 > 0):
            raise IsosimError(f"gamma0 must be positive, got {self.gamma0!r}")

    def rate(self, omega: np.ndarray) -> np.ndarray:
        """Rate for a jump releasing energy ``omega``."""
        omega = np.asarray(omega, dtype=float)
        out = np.full(omega.shape, self.gamma0)
        up = omega < 0
        if self.temperature == 0:
            out[up] = 0.0
        elif math.isfinite(self.temperature):
            out[up] = self.gamma0 * np.exp(omega[up] / self.temperature)
        return out


def coupling_operator(layout: SimulatorLayout) -> np.ndarray:
    """Diagonal of C = sum_i X_i in the configuration basis."""
    M = len(layout.radices)
    total = np.zeros(layout.radices)
    for k, g in enumerate(layout.grids):
        shape = [1] * M
        shape[k] = g.sites
        total = total + g.positions.reshape(shape)
    return total.reshape(-1)


@dataclass(frozen=True)
class EigenBath:
    """The Lindblad generator expressed in the eigenbasis of H."""

    energies: np.ndarray
    vectors: np.ndarray
    rates: np.ndarray  # rates[m, n]: transition n -> m
    outflow: np.ndarray  # total rate out of each level

    @property
    def dimension(self) -> int:
        return len(self.energies)

    def to_eigenbasis(self, rho):
        return self.vectors.conj().T @ rho @ self.vectors

    def from_eigenbasis(self, rho):
        return self.vectors @ rho @ self.vectors.conj().T

    def reachable(self, start: int = 0) -> np.ndarray:
        """Levels connected to ``start`` through transitions of either direction."""
        adj = (self.rates > 0) | (self.rates.T > 0)
        seen = np.zeros(self.dimension, dtype=bool)
        seen[start] = True
        frontier = [start]
        while frontier:
            n = frontier.pop()
            for m in np.nonzero(adj[:, n] & ~seen)[0]:
                seen[m] = True
                frontier.append(m)
        return seen

    def population_generator(self) -> np.ndarray:
        return self.rates - np.diag(self.outflow)


def eigen_bath(H: SparseHamiltonian, layout: SimulatorLayout, bath: BathSpec) -> EigenBath:
    D = H.dimension
    if D > LINDBLAD_LIMIT:
        raise IsosimError(f"Lindblad mode needs dimension <= {LINDBLAD_LIMIT}, got {D}")
    E, U = np.linalg.eigh(dense_matrix(H))
    C = U.T @ (coupling_operator(layout)[:, None] * U)
    omega = E[None, :] - E[:, None]  # omega[m, n] = E_n - E_m, released by n -> m
    rates = bath.rate(omega) * np.abs(C) ** 2
    np.fill_diagonal(rates, 0.0)
    # selection-rule zeros come out as rounding noise; make them exact
    if rates.size and rates.max() > 0:
        rates[rates < RATE_FLOOR * rates.max()] = 0.0
    return EigenBath(E, U.astype(complex), rates, rates.sum(axis=0))


def _rk4_factors(eb: EigenBath, h: float) -> tuple[np.ndarray, np.ndarray]:
    """One classical RK4 step of the dissipator, written as its stability
    polynomial: an elementwise factor for coherences and a matrix for
    populations. The dissipator never mixes the two."""
    y = -0.5 * h * (eb.outflow[:, None] + eb.outflow[None, :])
    coh = 1 + y + y**2 / 2 + y**3 / 6 + y**4 / 24
    x = h * eb.population_generator()
    x2 = x @ x
    pop = np.eye(len(x)) + x + x2 / 2 + x2 @ x / 6 + x2 @ x2 / 24
    return coh, pop


@dataclass
class LindbladResult:
    rho: np.ndarray
    times: list[float]
    energies: list[float]
    ground_population: list[float]
    reachable: np.ndarray
    warning: str = ""


def suggest_lindblad_times(eb: EigenBath, accuracy: float = 1e-8) -> tuple[float, float]:
    """A (t_final, dt) pair: t_final from the slowest relaxation rate of
    the populations, dt from the fastest, inside the RK4 stability region."""
    fastest = float(eb.outflow.max()) if eb.outflow.size else 0.0
    if fastest <= 0:
        return 1.0, 1.0
    reach = eb.reachable(0)
    G = eb.population_generator()[np.ix_(reach, reach)]
    ev = np.sort(np.abs(np.linalg.eigvals(G).real))
    gap = ev[1] if len(ev) > 1 else fastest
    gap = max(gap, 1e-300)
    # coherences decay at half the summed outflow of their two levels
    out = eb.outflow[reach]
    slow_coh = 0.5 * out[out > 0].min()
    slowest = min(gap, slow_coh)
    t_final = math.log(10.0 / accuracy) / slowest
    dt = 1.0 / fastest
    return t_final, dt


def lindblad_relax(
    layout: SimulatorLayout,
    rho0: np.ndarray,
    bath: BathSpec,
    t_final: float | None = None,
    dt: float | None = None,
    sample_every: int = 100,
    t: float = 0.0,
) -> LindbladResult:
    """Relax a density matrix under the thermal Lindblad equation.

    Jumps ``|m><n| <m|C|n>`` act between eigenstates of H with
    detailed-balance rates. The commutator is integrated exactly in the
    eigenbasis and the dissipator with classical RK4 in the interaction
    picture, so the step size is limited only by the transition rates
    rather than by the level spacings.
    ``t_final``/``dt`` default to :func:`suggest_lindblad_times`.
    """
    H = assemble(layout, t)
    D = H.dimension
    eb = eigen_bath(H, layout, bath)
    rho = check_density(rho0, D)
    auto_t, auto_dt = suggest_lindblad_times(eb)
    t_final = auto_t if t_final is None else t_final
    dt = auto_dt if dt is None else dt
    if not (math.isfinite(t_final) and t_final > 0 and math.isfinite(dt) and dt > 0):
        raise IsosimError("t_final and dt must be positive and finite")

    reach = eb.reachable(0)
    r = eb.to_eigenbasis(rho)
    warning = ""
    outside = float(np.diag(r).real[~reach].sum())
    if outside > 1e-10 or reach.sum() == 1 and D > 1:
        warning = (
            f"{int((~reach).sum())} of {D} levels are not coupled to the ground state; "
            f"population {outside:.3e} cannot reach it"
        )

    nsteps = max(1, math.ceil(t_final / dt - 1e-9))
    h = t_final / nsteps
    E = eb.energies

    def record(time, r_int):
        times.append(time)
        pops = np.diag(r_int).real
        energies.append(float(pops @ E))
        ground.append(float(pops[0]))

    times: list[float] = []
    energies: list[float] = []
    ground: list[float] = []
    record(0.0, r)
    coh, pop = _rk4_factors(eb, h)
    diag = np.diag_indices(D)
    r0 = r.copy()
    populations = r0[diag].real.copy()
    for n in range(1, nsteps + 1):
        populations = pop @ populations
        if n % sample_every == 0 or n == nsteps:
            # coherences pick up the same factor every step
            r = coh**n * r0
            r[diag] = populations
            r = 0.5 * (r + r.conj().T)
            lo = np.linalg.eigvalsh(r).min()
            if lo < -1e-7:
                raise StepSizeError(
                    f"density matrix lost positivity (eigenvalue {lo:.3e}); reduce dt"
                )
            record(n * h, r)
    phase = np.exp(-1j * np.subtract.outer(E, E) * t_final)
    rho_final = eb.from_eigenbasis(phase * r)
    return LindbladResult(rho_final, times, energies, ground, reach, warning)


def gibbs_state(H: SparseHamiltonian, T: float) -> np.ndarray:
    """Thermal state exp(-H/T)/Z from the dense spectrum."""
    if H.dimension > 2048:
        raise IsosimError("gibbs_state needs dimension <= 2048")
    if not (T > 0):
        raise IsosimError(f"temperature must be positive, got {T!r}")
    E, U = np.linalg.eigh(dense_matrix(H))
    w = np.exp(-(E - E.min()) / T)
    w /= w.sum()
    return (U * w) @ U.T
