"""Update rules producing replayable optimization paths.

All algorithms start from zero and record every iterate.  A run is
fully determined by (problem, regularizer, schedule, steps, seed), and
replaying with the same seed reproduces the stored path bit for bit.

The learning-rate coupling is the load-bearing piece: a regularized run
at strength lam uses gamma_k = eta_k / (1 + lam * eta_k), equivalently
1 - lam * gamma_k = gamma_k / eta_k, which is exactly what makes a
weighted average of the plain path reproduce the regularized one.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .problems import (
    ConvexityBounds,
    KernelProblem,
    QuadraticProblem,
    Regularizer,
    eval_loss_grad,
    stochastic_grad,
)

__all__ = [
    "LRSchedule",
    "PathRecord",
    "DivergenceError",
    "make_schedule",
    "sgd_run",
    "psgd_run",
    "nsgd_run",
    "kernel_gd_run",
    "save_path",
    "load_path",
]

_PATH_FORMAT = "iterreg-path"
_PATH_VERSION = 1


class DivergenceError(RuntimeError):
    """Raised when iterates blow up (learning rate too large)."""


@dataclass(frozen=True)
class LRSchedule:
    """Per-step learning rates eta_k with coupled regularized rates gamma_k."""

    etas: np.ndarray  # shape (steps,) or (1,) for a constant rate
    lam: float = 0.0

    def __post_init__(self):
        etas = np.atleast_1d(np.asarray(self.etas, dtype=np.float64))
        if etas.ndim != 1 or etas.size == 0:
            raise ValueError("etas must be a nonempty 1-D sequence")
        if etas.min() <= 0:
            raise ValueError("learning rates must be positive")
        if self.lam < 0:
            raise ValueError("lambda must be nonnegative")
        object.__setattr__(self, "etas", etas)

    @property
    def is_constant(self) -> bool:
        return self.etas.size == 1

    def eta(self, k: int) -> float:
        return float(self.etas[k % self.etas.size]) if not self.is_constant else float(self.etas[0])

    def gamma(self, k: int) -> float:
        e = self.eta(k)
        return e / (1.0 + self.lam * e)

    def etas_upto(self, steps: int) -> np.ndarray:
        if self.is_constant:
            return np.full(steps, self.etas[0])
        reps = int(np.ceil(steps / self.etas.size))
        return np.tile(self.etas, reps)[:steps]

    def gammas_upto(self, steps: int) -> np.ndarray:
        e = self.etas_upto(steps)
        return e / (1.0 + self.lam * e)


def make_schedule(
    kind: Union[float, Sequence[float]],
    lam: float = 0.0,
    bounds: Optional[ConvexityBounds] = None,
) -> LRSchedule:
    """Build a schedule from a constant rate or an explicit rate sequence.

    When curvature bounds are supplied, every eta_k must satisfy
    eta_k < 1/beta; otherwise the caller vouches for stability.
    """
    etas = np.atleast_1d(np.asarray(kind, dtype=np.float64))
    sched = LRSchedule(etas=etas, lam=lam)
    if bounds is not None:
        limit = 1.0 / bounds.beta
        if sched.etas.max() >= limit:
            raise ValueError(
                f"learning rate {sched.etas.max():.6g} >= 1/beta = {limit:.6g}"
            )
    # Coupling sanity: 1 - lam*gamma must equal gamma/eta to near machine
    # precision for every step.
    e = sched.etas
    g = e / (1.0 + lam * e)
    if np.abs((1.0 - lam * g) - g / e).max() > 1e-14:
        raise AssertionError("learning-rate coupling violated")
    return sched


@dataclass(frozen=True)
class PathRecord:
    """An ordered list of iterates plus the metadata needed to replay it."""

    iterates: np.ndarray  # (steps+1, dim), iterates[0] == 0
    tag: str
    seed: Optional[int] = None
    schedule: Optional[LRSchedule] = None
    problem_fingerprint: str = ""
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        arr = np.asarray(self.iterates, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError("iterates must be a (steps+1, dim) array")
        if arr.shape[0] >= 1 and np.any(arr[0] != 0.0):
            raise ValueError("paths must start at zero")
        object.__setattr__(self, "iterates", arr)

    def __len__(self) -> int:
        return self.iterates.shape[0]

    @property
    def final(self) -> np.ndarray:
        return self.iterates[-1]


def problem_fingerprint(problem) -> str:
    """Stable short hash of the problem's defining arrays."""
    h = hashlib.sha256()
    if isinstance(problem, KernelProblem):
        h.update(problem.K.tobytes())
        h.update(problem.y.tobytes())
    elif isinstance(problem, QuadraticProblem):
        h.update(problem.sigma.tobytes())
        h.update(problem.a.tobytes())
    else:
        h.update(problem.X.tobytes())
        h.update(problem.Y.tobytes())
        h.update(np.float64(problem.base_ridge).tobytes())
    return h.hexdigest()[:16]


# ---------------------------------------------------------------------------
# Gradient sources


def _step_rng(seed: int, step: int) -> np.random.Generator:
    # Counter-based: the stream for a step depends only on (seed, step),
    # so coupled runs see identical batches / noise at every step.
    return np.random.Generator(
        np.random.Philox(counter=[step, 0, 0, 0], key=[seed, 0x49737472])
    )


def _sphere_noise_matrix(seed: int, steps: int, dim: int, sigma: float) -> np.ndarray:
    """One noise vector per step, each uniform on the radius-sigma sphere.

    Drawn in a single stream keyed by the seed, so coupled runs with the
    same seed and length see identical noise sequences.
    """
    rng = np.random.Generator(np.random.Philox(key=[seed, 0x6E6F6973]))
    mat = rng.standard_normal((max(steps, 1), dim))
    mat *= sigma / np.linalg.norm(mat, axis=1, keepdims=True)
    return mat


def _gradient(problem, reg, w, step, batch_size, seed, noise):
    """Gradient of the (regularized) objective, optionally noisy.

    Mini-batches are drawn uniformly with replacement; a batch covering
    the whole sample reduces to the exact full gradient, so batch_size
    >= n coincides with a deterministic run.  ``noise`` is a per-step
    matrix of injected perturbations (the estimate is gradient - noise).
    """
    if batch_size is not None:
        if batch_size >= problem.n_samples:
            batch = np.arange(problem.n_samples)
        else:
            rng = _step_rng(seed, step)
            batch = rng.integers(0, problem.n_samples, size=batch_size)
        return stochastic_grad(problem, reg, w, batch)
    _, g = eval_loss_grad(problem, reg, w)
    if noise is not None:
        g = g - noise[step]
    return g


def _guard(w: np.ndarray, limit: float, step: int, tag: str) -> None:
    norm = float(np.linalg.norm(w))
    if not np.isfinite(norm) or norm > limit:
        raise DivergenceError(
            f"{tag} diverged at step {step}: ||w|| = {norm:.3e} (rate too large?)"
        )


def _guard_limit(problem) -> float:
    if isinstance(problem, QuadraticProblem):
        return 1e8 * (1.0 + float(np.linalg.norm(problem.minimizer())))
    return 1e8


def _validate_run_args(reg, schedule, batch_size, seed, deterministic):
    # A schedule with lam == 0 provides raw (uncoupled) rates, also for
    # regularized objectives; a coupled schedule must agree with the penalty.
    if reg.lam > 0 and schedule.lam > 0 and schedule.lam != reg.lam:
        raise ValueError(
            f"schedule lambda {schedule.lam} does not match regularizer lambda {reg.lam}"
        )
    if not deterministic:
        if batch_size is None:
            raise ValueError("stochastic runs need a batch_size")
        if seed is None:
            raise ValueError("stochastic runs need a seed")


def sgd_run(
    problem,
    reg: Regularizer,
    schedule: LRSchedule,
    steps: int,
    batch_size: Optional[int] = None,
    seed: Optional[int] = None,
    deterministic: bool = True,
    noise_sigma: Optional[float] = None,
) -> PathRecord:
    """(Stochastic) gradient descent; regularized runs use the coupled rate.

    With ``noise_sigma`` set, full gradients are perturbed by noise drawn
    uniformly on a sphere of that radius (mean zero, variance exactly
    noise_sigma**2), which keeps bounded-variance assumptions tight.
    """
    _validate_run_args(reg, schedule, batch_size, seed, deterministic)
    regularized = reg.lam > 0
    dim = problem.param_dim
    w = np.zeros(dim)
    path = np.empty((steps + 1, dim))
    path[0] = w
    limit = _guard_limit(problem)
    use_batches = batch_size if not deterministic else None
    noise = None
    if noise_sigma is not None and noise_sigma > 0:
        if seed is None:
            raise ValueError("noise injection needs a seed")
        noise = _sphere_noise_matrix(seed, steps, dim, noise_sigma)
    for k in range(steps):
        rate = schedule.gamma(k) if regularized else schedule.eta(k)
        g = _gradient(problem, reg, w, k, use_batches, seed, noise)
        w = w - rate * g
        _guard(w, limit, k, "sgd")
        path[k + 1] = w
    return PathRecord(
        iterates=path,
        tag="sgd" if (use_batches or noise_sigma) else "gd",
        seed=seed,
        schedule=schedule,
        problem_fingerprint=problem_fingerprint(problem),
        extras={"lam": reg.lam, "reg": reg.kind},
    )


def psgd_run(
    problem,
    reg: Regularizer,
    schedule: LRSchedule,
    steps: int,
    Q: Optional[np.ndarray] = None,
    batch_size: Optional[int] = None,
    seed: Optional[int] = None,
    deterministic: bool = True,
    noise_sigma: Optional[float] = None,
) -> PathRecord:
    """Preconditioned (stochastic) gradient descent.

    The preconditioner is applied through a cached Cholesky factorization.
    Regularized runs expect a generalized-l2 penalty whose matrix matches
    Q; the unregularized companion run passes Q explicitly.  Injected
    noise is applied after preconditioning, matching the bounded-variance
    assumption placed on Q^{-1}(grad estimate - grad).
    """
    _validate_run_args(reg, schedule, batch_size, seed, deterministic)
    regularized = reg.lam > 0
    if regularized and reg.kind != "generalized_l2":
        raise ValueError("regularized preconditioned runs need a generalized_l2 penalty")
    if Q is None:
        if reg.Q is None:
            raise ValueError("Q required (explicitly or through the regularizer)")
        Q = reg.Q
    elif reg.Q is not None and not np.array_equal(Q, reg.Q):
        raise ValueError("explicit Q disagrees with the regularizer's Q")
    Q = np.asarray(Q, dtype=np.float64)
    try:
        factor = cho_factor(Q)
    except np.linalg.LinAlgError as exc:
        raise ValueError("Q must be positive definite") from exc

    dim = problem.param_dim
    d = problem.d
    c = dim // d
    w = np.zeros(dim)
    path = np.empty((steps + 1, dim))
    path[0] = w
    limit = _guard_limit(problem)
    use_batches = batch_size if not deterministic else None
    noise = None
    if noise_sigma is not None and noise_sigma > 0:
        if seed is None:
            raise ValueError("noise injection needs a seed")
        noise = _sphere_noise_matrix(seed, steps, dim, noise_sigma)
    for k in range(steps):
        rate = schedule.gamma(k) if regularized else schedule.eta(k)
        g = _gradient(problem, reg, w, k, use_batches, seed, None)
        step_dir = cho_solve(factor, g.reshape(d, c)).ravel()
        if noise is not None:
            step_dir = step_dir - noise[k]
        w = w - rate * step_dir
        _guard(w, limit, k, "psgd")
        path[k + 1] = w
    return PathRecord(
        iterates=path,
        tag="psgd" if (use_batches or noise_sigma) else "pgd",
        seed=seed,
        schedule=schedule,
        problem_fingerprint=problem_fingerprint(problem),
        extras={"lam": reg.lam, "reg": reg.kind},
    )


@dataclass
class NesterovState:
    """Momentum bookkeeping for an accelerated run."""

    current: np.ndarray
    previous: np.ndarray
    tau: float

    def lookahead(self) -> np.ndarray:
        return self.current + self.tau * (self.current - self.previous)


def nesterov_momentum(rate: float, strong_convexity: float) -> float:
    prod = rate * strong_convexity
    if not (0 < prod < 1):
        raise ValueError(f"need 0 < rate*alpha < 1 for momentum, got {prod:.6g}")
    root = np.sqrt(prod)
    return (1.0 - root) / (1.0 + root)


def nsgd_run(
    problem,
    reg: Regularizer,
    schedule: LRSchedule,
    steps: int,
    alpha: float,
    batch_size: Optional[int] = None,
    seed: Optional[int] = None,
    deterministic: bool = True,
    noise_sigma: Optional[float] = None,
) -> PathRecord:
    """Nesterov-accelerated (stochastic) gradient descent at a constant rate.

    Iterates are indexed from zero with w_0 = w_1 = 0; the first gradient
    step produces w_2.  The momentum coefficient is
    tau = (1 - sqrt(rate * mu)) / (1 + sqrt(rate * mu)) with mu the
    strong-convexity constant of the objective being optimized
    (alpha for the plain loss, alpha + lam for the regularized one).
    """
    _validate_run_args(reg, schedule, batch_size, seed, deterministic)
    if not schedule.is_constant:
        raise ValueError("accelerated runs support constant learning rates only")
    if reg.kind not in ("none", "l2"):
        raise ValueError("accelerated runs support none/l2 regularizers only")
    regularized = reg.lam > 0
    rate = schedule.gamma(0) if regularized else schedule.eta(0)
    mu = alpha + reg.lam if regularized else alpha
    tau = nesterov_momentum(rate, mu)

    dim = problem.param_dim
    path = np.empty((max(steps, 1) + 1, dim))
    path[0] = 0.0
    path[1] = 0.0
    state = NesterovState(current=np.zeros(dim), previous=np.zeros(dim), tau=tau)
    limit = _guard_limit(problem)
    use_batches = batch_size if not deterministic else None
    noise = None
    if noise_sigma is not None and noise_sigma > 0:
        if seed is None:
            raise ValueError("noise injection needs a seed")
        noise = _sphere_noise_matrix(seed, steps, dim, noise_sigma)
    for k in range(1, steps):
        v = state.lookahead()
        g = _gradient(problem, reg, v, k, use_batches, seed, noise)
        w_next = v - rate * g
        _guard(w_next, limit, k, "nsgd")
        path[k + 1] = w_next
        state = NesterovState(current=w_next, previous=state.current, tau=tau)
    iterates = path[: steps + 1] if steps >= 1 else path[:1]
    return PathRecord(
        iterates=iterates,
        tag="nsgd" if (use_batches or noise_sigma) else "ngd",
        seed=seed,
        schedule=schedule,
        problem_fingerprint=problem_fingerprint(problem),
        extras={"lam": reg.lam, "reg": reg.kind, "alpha": alpha, "tau": tau},
    )


def kernel_gd_run(
    kernel: KernelProblem,
    schedule: LRSchedule,
    steps: int,
    lam: float = 0.0,
    lam_hat: Optional[float] = None,
) -> PathRecord:
    """Gradient descent on the dual kernel objective.

    With ``lam_hat`` unset this optimizes the dual loss at strength lam
    with scalar rates eta_k.  With ``lam_hat`` set it runs the companion
    regularized path at strength lam_hat under the matrix-valued rates
    gamma_k = eta_k (I + (lam_hat - lam) eta_k K)^{-1}, applied in the
    cached eigenbasis of K.
    """
    if lam_hat is not None and lam_hat <= lam:
        raise ValueError("need lam_hat > lam for the coupled kernel run")
    mu = kernel.eigenvalues
    u = kernel.basis
    y_eig = u.T @ kernel.y
    strength = lam if lam_hat is None else lam_hat
    coeff = np.zeros(kernel.n)
    path = np.empty((steps + 1, kernel.n))
    path[0] = 0.0
    for k in range(steps):
        eta = schedule.eta(k)
        if lam_hat is None:
            rate = eta
        else:
            rate = eta / (1.0 + (lam_hat - lam) * eta * mu)
        grad_eig = (mu * mu + strength * mu) * coeff - mu * y_eig
        coeff = coeff - rate * grad_eig
        path[k + 1] = u @ coeff
    return PathRecord(
        iterates=path,
        tag="kernel-gd",
        schedule=schedule,
        problem_fingerprint=problem_fingerprint(kernel),
        extras={"lam": lam, "lam_hat": lam_hat},
    )


# ---------------------------------------------------------------------------
# Serialization: JSON-lines, one float64 vector per line.  Standard json
# prints shortest round-trip representations, so text -> float64 is
# bit-exact on reload.


def save_path(record: PathRecord, path: str) -> None:
    header = {
        "format": _PATH_FORMAT,
        "version": _PATH_VERSION,
        "tag": record.tag,
        "seed": record.seed,
        "steps": len(record) - 1,
        "dim": int(record.iterates.shape[1]),
        "problem": record.problem_fingerprint,
        "extras": _jsonable(record.extras),
        "schedule": None
        if record.schedule is None
        else {"etas": record.schedule.etas.tolist(), "lam": record.schedule.lam},
    }
    with open(path, "w", encoding="ascii") as fh:
        fh.write(json.dumps(header) + "\n")
        for row in record.iterates:
            fh.write(json.dumps([float(v) for v in row]) + "\n")


def load_path(path: str) -> PathRecord:
    with open(path, "r", encoding="ascii") as fh:
        header = json.loads(fh.readline())
        if header.get("format") != _PATH_FORMAT:
            raise ValueError(f"{path}: not a path record")
        if header.get("version") != _PATH_VERSION:
            raise ValueError(f"{path}: unsupported version {header.get('version')}")
        rows = [json.loads(line) for line in fh if line.strip()]
    iterates = np.array(rows, dtype=np.float64)
    expected = (header["steps"] + 1, header["dim"])
    if iterates.shape != expected:
        raise ValueError(f"{path}: expected shape {expected}, got {iterates.shape}")
    sched = header.get("schedule")
    schedule = None if sched is None else LRSchedule(np.asarray(sched["etas"]), sched["lam"])
    return PathRecord(
        iterates=iterates,
        tag=header["tag"],
        seed=header["seed"],
        schedule=schedule,
        problem_fingerprint=header.get("problem", ""),
        extras=header.get("extras", {}),
    )


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj
