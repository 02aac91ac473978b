"""Shared numerical kernels.

Quadrature for integrands with inverse-square-root endpoint singularities,
trapezoid averaging of periodic functions, a bracketed scalar root finder,
and a counter-based random source with reproducible, independent substreams.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import BracketError, ConvergenceError, EvaluationError, ValidationError

__all__ = [
    "QuadratureSpec",
    "RandomStream",
    "integrate_singular",
    "periodic_average",
    "solve_scalar",
]

_KINDS = ("endpoint-singular", "periodic-trapezoid")


@dataclass(frozen=True)
class QuadratureSpec:
    """Node budget and rule family for the quadrature kernels.

    ``endpoint-singular`` drives :func:`integrate_singular` (Chebyshev-Gauss
    nodes under a sine substitution), ``periodic-trapezoid`` drives
    :func:`periodic_average`. Both are spectrally accurate for analytic
    integrands.
    """

    node_count: int = 256
    kind: str = "endpoint-singular"

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValidationError(f"unknown quadrature kind {self.kind!r}")
        if self.node_count < 16:
            raise ValidationError("node_count must be at least 16")
        if self.kind == "periodic-trapezoid" and self.node_count % 2:
            raise ValidationError("periodic-trapezoid requires an even node_count")


DEFAULT_SINGULAR = QuadratureSpec(256, "endpoint-singular")
DEFAULT_PERIODIC = QuadratureSpec(512, "periodic-trapezoid")


def _evaluate(f: Callable, x: np.ndarray, what: str) -> np.ndarray:
    """Evaluate ``f`` on an array, falling back to a scalar loop, and check finiteness."""
    try:
        vals = np.asarray(f(x), dtype=float)
        if vals.shape != x.shape:
            vals = np.broadcast_to(vals, x.shape).astype(float)
    except (TypeError, ValueError):
        vals = np.fromiter((float(f(xi)) for xi in x), dtype=float, count=x.size)
    if not np.all(np.isfinite(vals)):
        bad = x[~np.isfinite(vals)][0]
        raise EvaluationError(f"{what} returned a non-finite value at x={bad!r}", abscissa=float(bad))
    return vals


def integrate_singular(smooth_factor: Callable, a: float, b: float,
                       spec: QuadratureSpec | None = None) -> float:
    """Integrate ``smooth_factor(x) / sqrt((x - a) (b - x))`` over ``[a, b]``.

    The substitution ``x = ((a+b) + (b-a) sin u) / 2`` absorbs both endpoint
    singularities; midpoint nodes in ``u`` then realize Chebyshev-Gauss
    quadrature, so the error decays spectrally when ``smooth_factor`` is
    analytic on ``[a, b]``.
    """
    if not (a < b):
        raise ValidationError("integrate_singular requires a < b")
    spec = spec or DEFAULT_SINGULAR
    n = spec.node_count
    u = -0.5 * np.pi + np.pi * (np.arange(n) + 0.5) / n
    x = 0.5 * ((a + b) + (b - a) * np.sin(u))
    vals = _evaluate(smooth_factor, x, "smooth factor")
    return float(np.pi / n * vals.sum())


def periodic_average(f: Callable, kappa: int = 1,
                     spec: QuadratureSpec | None = None) -> float:
    """Mean of a ``2*pi*kappa``-periodic function over one full period.

    Uses the trapezoid rule on uniform nodes, which is exact once the node
    count exceeds twice the top harmonic of the integrand.
    """
    if kappa < 1:
        raise ValidationError("kappa must be a positive integer")
    spec = spec or DEFAULT_PERIODIC
    n = spec.node_count
    z = 2.0 * np.pi * kappa * np.arange(n) / n
    vals = _evaluate(f, z, "periodic integrand")
    return float(vals.mean())


def solve_scalar(f: Callable[[float], float], lo: float, hi: float,
                 tol: float = 1e-12, max_iter: int = 200) -> float:
    """Find a root of ``f`` inside the bracket ``[lo, hi]``.

    Hybrid secant/bisection iteration: secant steps are taken while they stay
    inside the current bracket and keep shrinking it; otherwise the step
    falls back to bisection, which guarantees convergence to bracket width
    ``tol``.
    """
    flo = float(f(lo))
    fhi = float(f(hi))
    if flo == 0.0:
        return float(lo)
    if fhi == 0.0:
        return float(hi)
    if flo * fhi > 0.0:
        raise BracketError(f"no sign change on [{lo}, {hi}]: f(lo)={flo}, f(hi)={fhi}")
    a, fa, b, fb = float(lo), flo, float(hi), fhi
    width_prev = abs(b - a)
    for it in range(max_iter):
        if abs(b - a) <= tol:
            return a if abs(fa) <= abs(fb) else b
        x = None
        if fb != fa:
            x = b - fb * (b - a) / (fb - fa)
        # Secant must land strictly inside and keep halving every two rounds.
        if x is None or not (min(a, b) < x < max(a, b)) or (it % 2 == 1 and abs(b - a) > 0.5 * width_prev):
            x = 0.5 * (a + b)
        if it % 2 == 1:
            width_prev = abs(b - a)
        fx = float(f(x))
        if fx == 0.0:
            return float(x)
        if fa * fx < 0.0:
            b, fb = x, fx
        else:
            a, fa = x, fx
    raise ConvergenceError(f"root finder exhausted {max_iter} iterations; bracket width {abs(b - a)}")


_U53 = 2.0 ** -53


@dataclass(frozen=True)
class RandomStream:
    """Counter-based source of standard normal increments.

    Increments are addressed by absolute step index: the value at step ``k``
    depends only on ``(master_seed, substream_index, k)``, so simulations are
    reproducible regardless of scheduling or block size, and distinct
    substreams are statistically independent.
    """

    master_seed: int
    substream_index: int = 0

    def __post_init__(self):
        if not 0 <= self.master_seed < 2 ** 64:
            raise ValidationError("master_seed must fit in 64 bits")
        if self.substream_index < 0:
            raise ValidationError("substream_index must be nonnegative")

    def _key(self) -> np.ndarray:
        return np.array([self.master_seed, self.substream_index], dtype=np.uint64)

    def normals(self, start: int, count: int) -> np.ndarray:
        """Standard normal increments for steps ``start .. start + count - 1``.

        Each step consumes one Philox counter (four 64-bit words); the first
        two words feed a Box-Muller transform. Blocks at different offsets
        tile together bit-exactly.
        """
        if count == 0:
            return np.empty(0)
        bg = np.random.Philox(counter=[start, 0, 0, 0], key=self._key())
        raw = bg.random_raw(4 * count).reshape(count, 4)
        u1 = ((raw[:, 0] >> np.uint64(11)).astype(np.float64) + 1.0) * _U53  # (0, 1]
        u2 = (raw[:, 1] >> np.uint64(11)).astype(np.float64) * _U53          # [0, 1)
        return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)

    def uniforms(self, start: int, count: int) -> np.ndarray:
        """Uniform [0, 1) draws on the same counter layout (third word)."""
        if count == 0:
            return np.empty(0)
        bg = np.random.Philox(counter=[start, 0, 0, 0], key=self._key())
        raw = bg.random_raw(4 * count).reshape(count, 4)
        return (raw[:, 2] >> np.uint64(11)).astype(np.float64) * _U53
