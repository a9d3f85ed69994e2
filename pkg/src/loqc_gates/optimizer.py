"""Maximization of S + F/eps over linear optical networks.

Search space
------------
The success S = <A|A> / ||U||^(2M) has cusps wherever the top singular
value of U is degenerate, and the optima sit exactly on such cusps (a
unitary U has all singular values equal).  ``objective`` exposes this
function and its gradient for general complex U.

``maximize`` instead walks on the unitary group U(2N): U is the top-left
N x N block of a 2N x 2N unitary W.  Every contraction arises this way, the
block automatically has norm <= 1 and <A|A> is a polynomial in W, so the
function is smooth and its maxima are ordinary critical points.  Steps use
a Cayley retraction W <- W cay(K), K anti-Hermitian, with a BFGS inverse
Hessian kept in left-trivialized Lie algebra coordinates.

Internally the quantity maximized is S - delta/eps with delta = 1 - F as
returned by ``infidelity``.  It differs from S + F/eps by the constant
1/eps but keeps full relative precision when delta is tiny.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .contraction import COALESCENCE_TOL, QualityMetrics, evaluate, halmos_dilation, normalize, plan_for, svd_profile
from .errors import NormError
from .targets import GateSpec, embed_target, knill_frame


@dataclass(frozen=True)
class OptimizerConfig:
    epsilon: float = 1e-6
    max_iterations: int = 4000
    gradient_tolerance: float = 1e-6
    step_tolerance: float = 1e-14
    rng_seed: int = 0
    perturbation_sigma: float = 1e-3
    # cold starts descend an eps-ladder from here down to ``epsilon``
    continuation_start: float = 1.0
    continuation_factor: float = 100.0
    coalescence_tol: float = COALESCENCE_TOL

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.perturbation_sigma < 0:
            raise ValueError("perturbation_sigma must be >= 0")


@dataclass
class OptimizedPoint:
    u: np.ndarray = field(repr=False)
    metrics: QualityMetrics
    epsilon: float
    objective: float
    converged: bool
    iterations: int
    gradient_norm: float
    seed: int | None = None
    unitary: np.ndarray | None = field(default=None, repr=False)

    @property
    def delta(self) -> float:
        return self.metrics.infidelity

    @property
    def success(self) -> float:
        return self.metrics.success


class _Terms:
    """<A|A>/D_c, delta and weighted gradients for one spec, without norm rescaling."""

    def __init__(self, spec: GateSpec, n_modes: int):
        self.plan = plan_for(spec, n_modes)
        t = embed_target(spec.target).entries
        self.target = t / np.linalg.norm(t)
        self.d_c = spec.d_c

    def values(self, a: np.ndarray) -> tuple[float, float, np.ndarray, float]:
        aa = float(np.vdot(a, a).real)
        if aa == 0:
            raise NormError("post-selected map vanishes; fidelity undefined")
        perp = a - self.target * np.vdot(self.target, a)
        return aa / self.d_c, float(np.vdot(perp, perp).real) / aa, perp, aa

    def __call__(self, u: np.ndarray, w_s: float, w_delta: float):
        """Returns (S_raw, delta, gradient of w_s*S_raw + w_delta*delta).

        Gradients of real functions are complex arrays d/dRe + i d/dIm.
        """
        a, minors = self.plan.amplitudes_and_minors(u)
        s, delta, perp, aa = self.values(a)
        grad_a = w_s * 2 * a / self.d_c + w_delta * 2 * (perp - delta * a) / aa
        return s, delta, self.plan.pullback(minors, grad_a)

    def value(self, u: np.ndarray) -> tuple[float, float]:
        s, delta, _, _ = self.values(self.plan.amplitudes(u))
        return s, delta


def objective(u: np.ndarray, spec: GateSpec, epsilon: float) -> tuple[float, np.ndarray]:
    """S + F/eps for a general complex U, with its gradient.

    The gradient is taken over [Re U.ravel(), Im U.ravel()].  The norm
    rescaling is differentiated through the leading singular pair, so where
    the top singular value is degenerate the result is one element of the
    subdifferential.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    u = np.asarray(u, dtype=complex)
    p, sv, qh = np.linalg.svd(u)
    sigma = sv[0]
    if sigma == 0:
        raise NormError("objective is undefined for the zero matrix")
    m = spec.total_photons
    scale = sigma ** (-2 * m)
    raw, delta, g = _Terms(spec, u.shape[0])(u, scale, -1.0 / epsilon)
    # d sigma = Re(p1^dag dU q1)
    g = g - 2 * m * raw * scale / sigma * np.outer(p[:, 0], qh[0])
    value = raw * scale + (1.0 - delta) / epsilon
    return float(value), np.concatenate([g.real.ravel(), g.imag.ravel()])


# ---------------------------------------------------------------------------
# Lie algebra coordinates of u(n) with the Frobenius metric


class _SkewCoords:
    def __init__(self, n: int):
        self.n = n
        self.iu = np.triu_indices(n, 1)
        self.dim = n * n

    def to_vec(self, k: np.ndarray) -> np.ndarray:
        off = k[self.iu] * np.sqrt(2)
        return np.concatenate([np.diagonal(k).imag, off.real, off.imag])

    def from_vec(self, x: np.ndarray) -> np.ndarray:
        n = self.n
        m = len(self.iu[0])
        k = np.zeros((n, n), dtype=complex)
        off = (x[n : n + m] + 1j * x[n + m :]) / np.sqrt(2)
        k[self.iu] = off
        k = k - k.conj().T
        k[np.diag_indices(n)] = 1j * x[:n]
        return k


def _cayley(k: np.ndarray) -> np.ndarray:
    eye = np.eye(k.shape[0])
    return np.linalg.solve(eye - 0.5 * k, eye + 0.5 * k)


def _polar(w: np.ndarray) -> np.ndarray:
    p, _, qh = np.linalg.svd(w)
    return p @ qh


class _Generators:
    """Anti-Hermitian generators K = sum_k T_k K_k T_k^dag over orthonormal blocks T_k.

    A single identity block gives all of u(2n); fewer or smaller blocks
    confine the walk to a subgroup (frozen modes, a symmetry).
    """

    def __init__(self, blocks: list[np.ndarray]):
        self.blocks = [np.asarray(t, dtype=complex) for t in blocks]
        self.coords = [_SkewCoords(t.shape[1]) for t in self.blocks]
        self.sizes = [c.dim for c in self.coords]
        self.dim = sum(self.sizes)
        self.n = self.blocks[0].shape[0]

    def to_vec(self, omega: np.ndarray) -> np.ndarray:
        return np.concatenate([c.to_vec(t.conj().T @ omega @ t) for c, t in zip(self.coords, self.blocks)])

    def from_vec(self, x: np.ndarray) -> np.ndarray:
        k = np.zeros((self.n, self.n), dtype=complex)
        start = 0
        for c, t, size in zip(self.coords, self.blocks, self.sizes):
            k += t @ c.from_vec(x[start : start + size]) @ t.conj().T
            start += size
        return k


ROUNDING_GAIN = 1e3 * np.finfo(float).eps


class _UnitaryAscent:
    """BFGS ascent of S - delta/eps over the top-left block of a unitary W.

    ``frame`` (a fixed unitary L) makes the optimized matrix L W[:n, :n] L^dag;
    ``blocks`` restricts the generators (see ``_Generators``).
    """

    def __init__(self, spec: GateSpec, n: int, frame: np.ndarray | None = None, blocks=None):
        self.n = n
        self.terms = _Terms(spec, n)
        self.frame = frame
        self.coords = _Generators([np.eye(2 * n)] if blocks is None else blocks)

    def block(self, w: np.ndarray) -> np.ndarray:
        u = w[: self.n, : self.n]
        return u if self.frame is None else self.frame @ u @ self.frame.conj().T

    def value_grad(self, w: np.ndarray, eps: float):
        n = self.n
        s, delta, g_u = self.terms(self.block(w), 1.0, -1.0 / eps)
        if self.frame is not None:
            g_u = self.frame.conj().T @ g_u @ self.frame
        x = np.zeros_like(w)
        x[:, :n] = w[:n, :].conj().T @ g_u
        omega = 0.5 * (x - x.conj().T)
        return s - delta / eps, s, delta, self.coords.to_vec(omega)

    def value(self, w: np.ndarray, eps: float) -> float:
        try:
            s, delta = self.terms.value(self.block(w))
        except NormError:
            return -np.inf
        return s - delta / eps

    def run(self, w: np.ndarray, eps: float, cfg: OptimizerConfig) -> tuple[np.ndarray, bool, int, float]:
        f, _, _, g = self.value_grad(w, eps)
        h = None
        it = 0
        gnorm = float(np.linalg.norm(g))
        failures = 0
        while it < cfg.max_iterations:
            if gnorm <= cfg.gradient_tolerance:
                return w, True, it, gnorm
            it += 1
            p = g if h is None else h @ g
            slope = float(g @ p)
            if slope <= 0:
                h, p, slope = None, g, float(g @ g)
            if h is None:
                # first step: move ~1e-2 in the algebra
                p = p * min(1.0, 1e-2 / max(np.linalg.norm(p), 1e-300))
                slope = float(g @ p)
            t = 1.0
            accepted = False
            while t * np.linalg.norm(p) > cfg.step_tolerance:
                w_new = w @ _cayley(self.coords.from_vec(t * p))
                f_new = self.value(w_new, eps)
                if f_new >= f + 1e-4 * t * slope:
                    accepted = True
                    break
                t *= 0.5
            if not accepted:
                # predicted gain below rounding: stationary to working precision
                if h is not None and 0.5 * slope <= ROUNDING_GAIN * max(abs(f), 1e-300):
                    return w, True, it, gnorm
                failures += 1
                if failures > 2 or h is None:
                    break
                h = None
                continue
            failures = 0
            if it % 50 == 0:
                w_new = _polar(w_new)
            f_new, _, _, g_new = self.value_grad(w_new, eps)
            step = t * p
            y = g - g_new  # gradient change of the minimized function -f
            sy = float(step @ y)
            if sy > 1e-300:
                if h is None:
                    h = np.eye(len(g)) * (sy / float(y @ y))
                rho = 1.0 / sy
                hy = h @ y
                h = h - rho * (np.outer(step, hy) + np.outer(hy, step)) + (rho * rho * float(y @ hy) + rho) * np.outer(step, step)
            w, f, g = w_new, f_new, g_new
            gnorm = float(np.linalg.norm(g))
        return w, gnorm <= cfg.gradient_tolerance, it, gnorm


def _epsilon_ladder(cfg: OptimizerConfig) -> list[float]:
    eps = [cfg.epsilon]
    if cfg.continuation_start and cfg.continuation_start > cfg.epsilon:
        e = cfg.continuation_start
        ladder = []
        while e > cfg.epsilon * cfg.continuation_factor * (1 + 1e-9):
            ladder.append(e)
            e /= cfg.continuation_factor
        eps = ladder + eps
    return eps


def _point(w: np.ndarray, n: int, spec: GateSpec, eps: float, converged: bool, iterations: int, gnorm: float, cfg, seed=None) -> OptimizedPoint:
    u = normalize(w[:n, :n])
    metrics = evaluate(u, spec, cfg.coalescence_tol)
    value = metrics.success + metrics.fidelity / eps
    return OptimizedPoint(u, metrics, eps, value, converged, iterations, gnorm, seed, w)


def maximize(u0: np.ndarray, spec: GateSpec, cfg: OptimizerConfig, warm: bool = False, w0: np.ndarray | None = None) -> OptimizedPoint:
    """Local maximum of S + F/eps starting from ``u0``.

    Cold starts (``warm=False``) descend an eps-ladder first so that the
    target fidelity constraint is approached gradually.
    """
    u0 = normalize(u0)
    n = u0.shape[0]
    w = halmos_dilation(u0) if w0 is None else w0
    ascent = _UnitaryAscent(spec, n)
    stages = [cfg.epsilon] if warm else _epsilon_ladder(cfg)
    total = 0
    for eps in stages:
        w, converged, its, gnorm = ascent.run(w, eps, cfg)
        total += its
    return _point(w, n, spec, cfg.epsilon, converged, total, gnorm, cfg)


def perturb(u: np.ndarray, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """Complex Gaussian kick with Frobenius norm ``sigma * ||u||_F`` (in expectation)."""
    u = np.asarray(u, dtype=complex)
    if sigma == 0:
        return u.copy()
    noise = rng.normal(size=u.shape) + 1j * rng.normal(size=u.shape)
    noise *= sigma * np.linalg.norm(u) / np.sqrt(2 * u.size)
    return u + noise


@dataclass
class FamilyTrace:
    points: list[OptimizedPoint]
    family_label: str = ""
    coalescence_events: list[tuple[float, int]] = field(default_factory=list)
    aborted: bool = False

    @property
    def deltas(self) -> list[float]:
        return [p.delta for p in self.points]

    @property
    def epsilons(self) -> list[float]:
        return [p.epsilon for p in self.points]

    def frontier(self) -> list[tuple[float, float]]:
        return [(p.delta, p.success) for p in self.points]

    def first_coalescence(self) -> float | None:
        return self.coalescence_events[0][0] if self.coalescence_events else None


def coalescence_events(points: list[OptimizedPoint]) -> list[tuple[float, int]]:
    """(delta, index) whenever the count of non-unit NSVs drops between consecutive points.

    ``index`` is the position (in the descending NSV list) of the singular
    value that merged with unity; with k non-unit values left before the
    merge, the largest of them sits at N - k.
    """
    events = []
    for prev, cur in zip(points, points[1:]):
        k0, k1 = prev.metrics.implied_vacuum_modes, cur.metrics.implied_vacuum_modes
        n = len(cur.metrics.nsv)
        for k in range(k0, k1, -1):
            events.append((cur.delta, n - k))
    return events


def trace_family(
    start: OptimizedPoint,
    spec: GateSpec,
    epsilon_schedule,
    cfg: OptimizerConfig,
    label: str = "",
    refine_events: bool = True,
    on_point=None,
) -> FamilyTrace:
    """Follow a family of optima while eps grows, so fidelity is traded for success.

    Each step kicks U with relative Gaussian noise of size
    ``cfg.perturbation_sigma`` (this lets the walk leave ridges where the
    previous optimum was pinned) and re-optimizes at the next eps.  A step
    that fails to converge ends the trace; the points so far are kept.
    With ``refine_events`` each drop in the vacuum count is located by
    bisection in eps instead of being pinned to the next schedule point.
    ``on_point`` is called with every accepted point as soon as it exists.
    """
    schedule = [float(e) for e in epsilon_schedule]
    if not schedule:
        raise ValueError("empty epsilon schedule")
    if any(b <= a for a, b in zip(schedule, schedule[1:])) or schedule[0] <= 0:
        raise ValueError("epsilon schedule must be positive and strictly increasing")
    if not start.converged:
        raise ValueError("trace must start from a converged point")
    rng = np.random.default_rng(cfg.rng_seed)
    n = start.u.shape[0]
    ascent = _UnitaryAscent(spec, n)
    u = start.u
    points: list[OptimizedPoint] = []
    aborted = False
    for eps in schedule:
        w0 = halmos_dilation(normalize(perturb(u, cfg.perturbation_sigma, rng)))
        w, converged, its, gnorm = ascent.run(w0, eps, cfg)
        point = _point(w, n, spec, eps, converged, its, gnorm, cfg, cfg.rng_seed)
        if not converged:
            aborted = True
            break
        points.append(point)
        if on_point is not None:
            on_point(point)
        u = point.u
    events = []
    if refine_events:
        for prev, cur in zip(points, points[1:]):
            events += _refine_coalescence(ascent, prev, cur, spec, cfg)
    else:
        events = coalescence_events(points)
    return FamilyTrace(points, label, events, aborted)


def _refine_coalescence(ascent, prev: OptimizedPoint, cur: OptimizedPoint, spec: GateSpec, cfg, rel_tol: float = 1e-4, max_steps: int = 40) -> list[tuple[float, int]]:
    """Bisect eps between two trace points to find where each singular value merges.

    The event delta is the largest delta still reached with the old vacuum
    count, so a gradual merge and the end of a family (a fold, after which
    the trace jumps to a unitary-like family) are reported the same way.
    """
    k0, k1 = prev.metrics.implied_vacuum_modes, cur.metrics.implied_vacuum_modes
    n = len(cur.metrics.nsv)
    events = []
    for k in range(k0, k1, -1):
        lo, hi = prev, cur.epsilon
        for _ in range(max_steps):
            if hi - lo.epsilon <= rel_tol * hi:
                break
            mid = 0.5 * (lo.epsilon + hi)
            w, converged, its, gnorm = ascent.run(lo.unitary, mid, cfg)
            trial = _point(w, ascent.n, spec, mid, converged, its, gnorm, cfg)
            if converged and trial.metrics.implied_vacuum_modes >= k:
                lo = trial
            else:
                hi = mid
        events.append((lo.delta, n - k))
    return events


def epsilon_schedule(eps_min: float, eps_max: float, steps: int) -> list[float]:
    if steps < 1:
        raise ValueError("schedule needs at least one step")
    if not 0 < eps_min <= eps_max:
        raise ValueError("need 0 < eps_min <= eps_max")
    if steps == 1:
        return [float(eps_min)]
    return [float(e) for e in np.geomspace(eps_min, eps_max, steps)]


def epsilon_for_delta(delta: float, s1: float, s2: float) -> float:
    """eps at which a frontier S0 + s1 sqrt(delta) + s2 delta is tangent to S + F/eps = const."""
    return 1.0 / (s1 / (2 * np.sqrt(delta)) + s2)


def default_epsilon_range(s1: float, s2: float, delta_lo: float = 1e-4, delta_hi: float = 0.3) -> tuple[float, float]:
    """eps interval that sweeps a frontier with slope terms (s1, s2) from delta_lo to delta_hi."""
    return epsilon_for_delta(delta_lo, s1, s2), epsilon_for_delta(delta_hi, s1, s2)


def knill_form_score(u: np.ndarray, spec: GateSpec) -> float:
    """How far U is from having one non-interacting mode per qubit.

    For qubit q with modes (2q, 2q+1), a local rotation can isolate a mode
    iff some combination v of the pair's rows has no weight outside the
    pair's columns; the best achievable leak |v^dag U[pair, rest]|^2 is the
    smallest eigenvalue of the 2 x 2 Gram matrix.  The same is done for
    columns and the two are averaged.  Returns the worst qubit, in [0, 1]
    for the spectrally normalized U.
    """
    u = normalize(u)
    n = u.shape[0]
    if n < spec.n_comp_modes:
        raise ValueError("matrix does not cover the computational modes")
    worst = 0.0
    for q in range(spec.n_qubits):
        pair = [2 * q, 2 * q + 1]
        rest = [m for m in range(n) if m not in pair]
        rows = u[np.ix_(pair, rest)]
        cols = u[np.ix_(rest, pair)]
        leak_r = np.linalg.eigvalsh(rows @ rows.conj().T)[0]
        leak_c = np.linalg.eigvalsh(cols.conj().T @ cols)[0]
        worst = max(worst, 0.5 * float(leak_r + leak_c))
    return min(max(worst, 0.0), 1.0)


KNILL_TOL = 1e-3
SIGNATURE_TOL = 1e-3


def degeneracy_signature(nsv, tol: float = SIGNATURE_TOL) -> tuple[int, ...]:
    """Multiplicities of the normalized singular values, clustering within ``tol``."""
    groups = [1]
    for a, b in zip(nsv, nsv[1:]):
        if a - b <= tol:
            groups[-1] += 1
        else:
            groups.append(1)
    return tuple(groups)


@dataclass
class Family:
    signature: tuple[int, ...]
    success: float
    knill: bool
    representative: OptimizedPoint
    members: list[OptimizedPoint]

    @property
    def key(self) -> tuple:
        return (self.signature, round(self.success, 3), self.knill)


def random_start(n: int, rng: np.random.Generator) -> np.ndarray:
    return normalize(rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))


@dataclass(frozen=True)
class SearchStructure:
    """Where random restarts begin and which generators the ladder may use.

    ``frame`` is an N x N local mode frame, ``bypass`` the modes held
    non-interacting during the ladder (in that frame).
    """

    frame: np.ndarray | None = None
    bypass: tuple[int, ...] = ()

    @property
    def restricted(self) -> bool:
        return bool(self.bypass)


def search_structure(spec: GateSpec, kind: str = "auto") -> SearchStructure:
    """``full`` searches everything; ``knill`` keeps one mode per qubit out of the interaction.

    ``auto`` picks ``knill`` for two-qubit targets that are a controlled
    phase up to Hadamards on some qubits.  Three-qubit targets get the full
    search: restricted Toffoli restarts miss the best families.
    """
    if kind not in ("auto", "full", "knill"):
        raise ValueError(f"unknown search structure {kind!r}")
    if kind == "full":
        return SearchStructure()
    local = knill_frame(spec.target)
    if kind == "auto" and spec.n_qubits != 2:
        local = None
    if local is None:
        if kind == "knill":
            raise ValueError(f"target {spec.target.label!r} has no Knill-form frame")
        return SearchStructure()
    frame = np.eye(spec.n_modes, dtype=complex)
    frame[: spec.n_comp_modes, : spec.n_comp_modes] = local
    return SearchStructure(frame, tuple(2 * q for q in range(spec.n_qubits)))


def _structured_start(structure: SearchStructure, n: int, rng: np.random.Generator) -> np.ndarray:
    """Random start in the structure's own frame (identity on bypass modes)."""
    u = random_start(n, rng)
    if not structure.restricted:
        return u
    inter = [m for m in range(n) if m not in structure.bypass]
    out = np.eye(n, dtype=complex)
    out[np.ix_(inter, inter)] = normalize(u[np.ix_(inter, inter)])
    return out


def _restart(spec: GateSpec, structure: SearchStructure, cfg: OptimizerConfig, rng: np.random.Generator) -> OptimizedPoint:
    n = spec.n_modes
    w = halmos_dilation(_structured_start(structure, n, rng))
    total = 0
    if structure.restricted:
        inter = [m for m in range(n) if m not in structure.bypass]
        active = inter + [n + m for m in inter]
        ascent = _UnitaryAscent(spec, n, structure.frame, [np.eye(2 * n)[:, active]])
        for eps in _epsilon_ladder(cfg):
            w, _, its, _ = ascent.run(w, eps, cfg)
            total += its
        # back to the lab frame, then polish without restrictions
        big = np.zeros((2 * n, 2 * n), dtype=complex)
        big[:n, :n] = structure.frame
        big[n:, n:] = structure.frame
        w = big @ w @ big.conj().T
        stages = [cfg.epsilon]
    else:
        stages = _epsilon_ladder(cfg)
    ascent = _UnitaryAscent(spec, n)
    for eps in stages:
        w, converged, its, gnorm = ascent.run(w, eps, cfg)
        total += its
    return _point(w, n, spec, cfg.epsilon, converged, total, gnorm, cfg)


def random_restart_search(
    spec: GateSpec,
    epsilon: float,
    n_restarts: int,
    seed: int = 0,
    cfg: OptimizerConfig | None = None,
    structure: str = "auto",
    progress=None,
) -> list[Family]:
    """Optimize from ``n_restarts`` random starts and group the results into families.

    Restart ``i`` draws its start from ``default_rng([seed, i])``, so each
    run is reproducible on its own.  Starts are i.i.d. complex Gaussian
    matrices, normalized; with the Knill structure only the interacting
    block is random.  Families are keyed by the NSV degeneracy pattern, S
    rounded to 1e-3 and the Knill-form flag, and come back sorted by
    decreasing success.
    """
    if n_restarts < 1:
        raise ValueError("need at least one restart")
    from dataclasses import replace

    cfg = OptimizerConfig(epsilon=epsilon) if cfg is None else replace(cfg, epsilon=epsilon)
    layout = search_structure(spec, structure)
    points = []
    for i in range(n_restarts):
        point = _restart(spec, layout, cfg, np.random.default_rng([seed, i]))
        point.seed = i
        points.append(point)
        if progress is not None:
            progress(point)
    return group_families(points, spec)


def group_families(points: list[OptimizedPoint], spec: GateSpec) -> list[Family]:
    groups: dict[tuple, list[OptimizedPoint]] = {}
    for p in sorted(points, key=lambda p: (p.seed if p.seed is not None else -1, -p.objective)):
        knill = knill_form_score(p.u, spec) < KNILL_TOL
        key = (degeneracy_signature(p.metrics.nsv), round(p.success, 3), knill)
        groups.setdefault(key, []).append(p)
    families = []
    for key, members in groups.items():
        rep = max(members, key=lambda p: (p.objective, -(p.seed or 0)))
        families.append(Family(key[0], rep.success, key[2], rep, members))
    families.sort(key=lambda f: (-f.success, f.signature, f.knill))
    return families


PERFECT_FIDELITY = 1 - 1e-6


def best_point(families: list[Family], min_fidelity: float = PERFECT_FIDELITY) -> OptimizedPoint | None:
    """Converged point of highest success among those with fidelity >= min_fidelity."""
    pool = [
        p for f in families for p in f.members if p.converged and p.metrics.fidelity >= min_fidelity
    ]
    if not pool:
        return None
    return max(pool, key=lambda p: (p.success, -(p.seed or 0)))
