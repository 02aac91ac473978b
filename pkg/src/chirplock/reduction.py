"""Reduction of the driven stochastic oscillator to its slow phase-plane picture.

Exponent calculus and existence conditions, the resonance curve, leading-order
averaged coefficients, the phase functions P and J with locked-phase
classification, quartic-well thresholds in closed form, and the
stochastic-stability horizon trichotomy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Optional

import numpy as np

from .errors import (DegenerateRootError, PreAsymptoticError, UnsupportedRegimeError,
                     ValidationError)
from .numerics import solve_scalar
from .oscillator import LeadingOrbit, Potential, frequency, leading_orbit

__all__ = [
    "TrigTerm",
    "ForcingSpec",
    "NoiseSpec",
    "LockedPhase",
    "ResonanceAnalysis",
    "AveragedCoefficients",
    "ResonanceTrack",
    "exponents",
    "resonance_curve",
    "leading_averages",
    "locked_phases",
    "duffing_threshold",
    "horizon",
    "horizon_class",
    "analysis_to_dict",
]

STABLE = "stable-lock"
UNSTABLE = "unstable-lock"
SADDLE = "saddle-lock"

HORIZON_POLYNOMIAL = "polynomial"
HORIZON_EXPONENTIAL = "exponential"
HORIZON_INFINITE = "infinite"

LEADING_ORDER_CAVEAT = (
    "locked phases and the averaged phase functions use leading-order "
    "coefficients only; their accuracy at moderate times is not quantified"
)


def as_exponent(x):
    """Coerce an exponent input to Fraction when it is exactly representable.

    Accepts Fraction, int, 'num/den' strings, (num, den) pairs, or float.
    Floats stay floats, so downstream equality checks fall back to a
    tolerance instead of exact rational comparison.
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise ValidationError("exponents cannot be booleans")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    if isinstance(x, tuple):
        return Fraction(*x)
    return float(x)


def _exponents_equal(a, b, tol: float = 1e-12) -> bool:
    if isinstance(a, Fraction) and isinstance(b, Fraction):
        return a == b
    return abs(float(a) - float(b)) < tol


@dataclass(frozen=True)
class TrigTerm:
    """One monomial ``x1**i x2**j`` carrying one harmonic of the excitation phase."""

    i: int
    j: int
    harmonic: int
    cos_amp: float
    sin_amp: float = 0.0

    def __post_init__(self):
        if self.i < 0 or self.j < 0:
            raise ValidationError("monomial powers must be nonnegative")
        if self.harmonic < 0:
            raise ValidationError("harmonic index must be nonnegative")

    @property
    def is_zero(self) -> bool:
        return self.cos_amp == 0.0 and self.sin_amp == 0.0


def _top_degrees(terms) -> tuple:
    live = [t for t in terms if not t.is_zero]
    if not live:
        return 0, 0, False
    p = max(t.i for t in live)
    l = max(t.j for t in live)
    corner = any(t.i == p and t.j == l for t in live)
    return p, l, corner


def _coefficient(terms, i: int, j: int, S):
    S = np.asarray(S, dtype=float)
    out = np.zeros_like(S)
    for t in terms:
        if t.i == i and t.j == j and not t.is_zero:
            out = out + t.cos_amp * np.cos(t.harmonic * S) + t.sin_amp * np.sin(t.harmonic * S)
    return out


def _evaluate_terms(terms, x1, x2, S):
    x1 = np.asarray(x1, dtype=float)
    out = np.zeros(np.broadcast_shapes(np.shape(x1), np.shape(x2), np.shape(S)))
    for t in terms:
        if t.is_zero:
            continue
        trig = t.cos_amp * np.cos(t.harmonic * np.asarray(S)) \
            + t.sin_amp * np.sin(t.harmonic * np.asarray(S))
        out = out + trig * np.asarray(x1) ** t.i * np.asarray(x2) ** t.j
    return out


@dataclass(frozen=True)
class ForcingSpec:
    """Decaying chirped excitation ``t**(-alpha) Q(x1, x2, S(t))`` with ``S = s t**(beta+1)``."""

    alpha: object
    beta: object
    s: float
    terms: tuple

    def __post_init__(self):
        object.__setattr__(self, "alpha", as_exponent(self.alpha))
        object.__setattr__(self, "beta", as_exponent(self.beta))
        object.__setattr__(self, "s", float(self.s))
        object.__setattr__(self, "terms", tuple(self.terms))
        if float(self.alpha) < 0:
            raise ValidationError("alpha must be nonnegative")
        if float(self.beta) <= 0:
            raise ValidationError("beta must be positive")
        if self.s <= 0:
            raise ValidationError("s must be positive")
        p, l, corner = _top_degrees(self.terms)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "l", l)
        object.__setattr__(self, "_corner", corner)

    @property
    def is_zero(self) -> bool:
        return all(t.is_zero for t in self.terms)

    def phase(self, t):
        return self.s * np.asarray(t, dtype=float) ** (float(self.beta) + 1.0)

    def phase_rate(self, t):
        b = float(self.beta)
        return self.s * (b + 1.0) * np.asarray(t, dtype=float) ** b

    def coefficient(self, i: int, j: int, S):
        return _coefficient(self.terms, i, j, S)

    def top_coefficient(self, S):
        return _coefficient(self.terms, self.p, self.l, S)

    def __call__(self, x1, x2, S):
        return _evaluate_terms(self.terms, x1, x2, S)


@dataclass(frozen=True)
class NoiseSpec:
    """Multiplicative noise ``t**(-gamma) mu sigma(x1, x2, S(t)) dw``."""

    gamma: object
    mu: float
    terms: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "gamma", as_exponent(self.gamma))
        object.__setattr__(self, "mu", float(self.mu))
        object.__setattr__(self, "terms", tuple(self.terms))
        if float(self.gamma) < 0:
            raise ValidationError("gamma must be nonnegative")
        if self.mu < 0:
            raise ValidationError("mu must be nonnegative")
        n, m, corner = _top_degrees(self.terms)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "_corner", corner)

    @classmethod
    def none(cls) -> "NoiseSpec":
        return cls(gamma=0, mu=0.0, terms=())

    @property
    def is_zero(self) -> bool:
        return self.mu == 0.0 or all(t.is_zero for t in self.terms)

    def coefficient(self, i: int, j: int, S):
        return _coefficient(self.terms, i, j, S)

    def top_coefficient(self, S):
        return _coefficient(self.terms, self.n, self.m, S)

    def __call__(self, x1, x2, S):
        return _evaluate_terms(self.terms, x1, x2, S)


@dataclass(frozen=True)
class LockedPhase:
    Theta0: float
    P_prime: float
    J_value: float
    kind: str


class _TrigSeries:
    """Compact real trigonometric polynomial with analytic derivative."""

    __slots__ = ("const", "orders", "cos_c", "sin_c")

    def __init__(self, const, orders, cos_c, sin_c):
        self.const = float(const)
        self.orders = np.asarray(orders, dtype=int)
        self.cos_c = np.asarray(cos_c, dtype=float)
        self.sin_c = np.asarray(sin_c, dtype=float)

    @classmethod
    def from_samples(cls, values: np.ndarray, rel_tol: float = 1e-13) -> "_TrigSeries":
        n = len(values)
        spec = np.fft.rfft(values) / n
        cos_c = 2.0 * spec.real
        sin_c = -2.0 * spec.imag
        const = spec[0].real
        mags = np.hypot(cos_c, sin_c)
        scale = max(mags[1:].max(initial=0.0), abs(const), 1e-300)
        orders = [m for m in range(1, len(spec) - (n % 2 == 0)) if mags[m] > rel_tol * scale]
        return cls(const, orders, cos_c[orders] if orders else [], sin_c[orders] if orders else [])

    @classmethod
    def constant(cls, value: float) -> "_TrigSeries":
        return cls(value, [], [], [])

    def __call__(self, theta):
        theta = np.asarray(theta, dtype=float)
        out = np.full(theta.shape, self.const)
        for m, a, b in zip(self.orders, self.cos_c, self.sin_c):
            out = out + a * np.cos(m * theta) + b * np.sin(m * theta)
        return out if out.shape else float(out)

    def derivative(self) -> "_TrigSeries":
        return _TrigSeries(0.0, self.orders, self.orders * self.sin_c, -self.orders * self.cos_c)

    def shifted(self, delta: float) -> "_TrigSeries":
        return _TrigSeries(self.const + delta, self.orders, self.cos_c, self.sin_c)

    def plus(self, other: "_TrigSeries") -> "_TrigSeries":
        orders = sorted(set(self.orders.tolist()) | set(other.orders.tolist()))
        idx_a = {m: i for i, m in enumerate(self.orders)}
        idx_b = {m: i for i, m in enumerate(other.orders)}
        cos_c = [self.cos_c[idx_a[m]] if m in idx_a else 0.0 for m in orders]
        sin_c = [self.sin_c[idx_a[m]] if m in idx_a else 0.0 for m in orders]
        for k, m in enumerate(orders):
            if m in idx_b:
                cos_c[k] += other.cos_c[idx_b[m]]
                sin_c[k] += other.sin_c[idx_b[m]]
        return _TrigSeries(self.const + other.const, orders, cos_c, sin_c)


@dataclass(frozen=True)
class ResonanceAnalysis:
    """Exponent data, existence flags, and (once computed) the locked-phase picture."""

    kappa: int
    h: int
    a: int
    b: Optional[int]
    M1: object
    M2: object
    M: object
    A: object
    B: object
    C: object
    ncond_ok: bool
    adas_ok: bool
    z0: float
    nu0: float
    theta_grid: Optional[np.ndarray] = None
    P_values: Optional[np.ndarray] = None
    J_values: Optional[np.ndarray] = None
    locked_phases: Optional[tuple] = None
    drift: Optional[bool] = None
    horizon: Optional[str] = None

    def stable_phases(self) -> tuple:
        if self.locked_phases is None:
            return ()
        return tuple(lp for lp in self.locked_phases if lp.kind == STABLE)

    @property
    def kron_B_2A(self) -> bool:
        return _exponents_equal(self.B, 2 * self.A if isinstance(self.A, Fraction) else 2.0 * float(self.A))


def exponents(forcing: ForcingSpec, noise: NoiseSpec, h: int, kappa: int) -> ResonanceAnalysis:
    """Fill the exponent block of the analysis and evaluate the existence conditions."""
    if h == 0:
        raise UnsupportedRegimeError(
            "h = 0 keeps the frequency bounded, so the growing resonance condition "
            "cannot be solved at large times")
    if h < 0 or kappa < 1:
        raise ValidationError("need h >= 1 and kappa >= 1")
    if forcing.is_zero:
        raise ValidationError("forcing must be nonzero for the reduction")
    if not forcing._corner:
        raise ValidationError(
            f"forcing lacks its top corner coefficient (i, j) = ({forcing.p}, {forcing.l})")
    if not (forcing.l <= forcing.p <= 2 * h + 1):
        raise ValidationError("forcing degrees must satisfy 0 <= l <= p <= 2h+1")

    p, l = forcing.p, forcing.l
    alpha, beta = forcing.alpha, forcing.beta
    a = p + (l - 1) * (h + 1)
    # mixed Fraction/float arithmetic degrades to float automatically
    M1 = -alpha + a * beta / h

    zero_noise = noise.is_zero
    if zero_noise:
        b = None
        M2 = -math.inf
    else:
        if not noise._corner:
            raise ValidationError(
                f"noise lacks its top corner coefficient (i, j) = ({noise.n}, {noise.m})")
        if not (noise.n <= p and noise.m <= l):
            raise ValidationError("noise degrees must satisfy n <= p and m <= l")
        b = noise.n + (noise.m - 1) * (h + 1)
        M2 = -2 * noise.gamma + 2 * b * beta / h

    M = M1 if zero_noise or float(M1) >= float(M2) else M2
    Mlow = M2 if zero_noise or float(M2) <= float(M1) else M1
    B = beta + 1
    A = (beta - M) / 2
    C = math.inf if zero_noise else (beta - Mlow) / 2

    ncond_ok = -1 <= float(M) < float(beta)
    adas_ok = True if zero_noise else (3 * M1 - 2 * M2 >= beta if
                                       isinstance(M1, Fraction) and isinstance(M2, Fraction) and isinstance(beta, Fraction)
                                       else 3 * float(M1) - 2 * float(M2) >= float(beta) - 1e-12)

    nu0 = leading_orbit(h).nu0
    z0 = (forcing.s * (float(beta) + 1.0) / (nu0 * kappa)) ** (1.0 / h)
    return ResonanceAnalysis(kappa=kappa, h=h, a=a, b=b, M1=M1, M2=M2, M=M,
                             A=A, B=B, C=C, ncond_ok=ncond_ok, adas_ok=adas_ok,
                             z0=z0, nu0=nu0)


def resonance_curve(potential: Potential, forcing: ForcingSpec, kappa: int, t: float,
                    *, bracket: tuple | None = None) -> float:
    """Amplitude at which the orbit frequency matches ``kappa**-1`` times the drive rate."""
    if kappa < 1:
        raise ValidationError("kappa must be a positive integer")
    target = float(forcing.phase_rate(t)) / kappa
    rho_lo = potential.rho_floor()
    if rho_lo <= 0:
        raise ValidationError("potential has no admissible amplitude floor; resonance "
                              "tracking needs a growing frequency (h >= 1)")
    if bracket is not None:
        lo, hi = bracket
    else:
        lo = rho_lo
        nu_lo = frequency(potential, lo)
        if nu_lo >= target:
            beta = float(forcing.beta)
            t_min = (nu_lo * kappa / (forcing.s * (beta + 1.0))) ** (1.0 / beta)
            raise PreAsymptoticError(
                f"resonance condition unsolvable at t={t}; need t > {t_min:.6g}", t_min=t_min)
        h = potential.h
        nu0 = leading_orbit(h).nu0 if h >= 1 else 1.0
        hi = max(2.0 * lo, 1.5 * (target / nu0) ** (1.0 / h) if h >= 1 else 2.0 * lo)
        for _ in range(200):
            if frequency(potential, hi) > target:
                break
            hi *= 2.0
    return solve_scalar(lambda r: frequency(potential, r) - target, lo, hi,
                        tol=1e-11 * max(1.0, hi))


class ResonanceTrack:
    """Cached resonance amplitude ``rho_kappa(t)`` over a time window.

    Solves the resonance condition on a geometric time grid and interpolates
    log-log in between, which keeps the per-sample cost of observable
    extraction flat. The same object must be used to synthesize and analyze
    a trajectory for their amplitudes to agree to interpolation accuracy.
    """

    def __init__(self, potential: Potential, forcing: ForcingSpec, kappa: int,
                 t_min: float, t_max: float, points_per_decade: int = 128):
        if not (0 < t_min < t_max):
            raise ValidationError("need 0 < t_min < t_max")
        self.potential = potential
        self.forcing = forcing
        self.kappa = kappa
        span = math.log10(t_max / t_min)
        n = max(8, int(math.ceil(points_per_decade * span)) + 1)
        self.log_t = np.linspace(math.log(t_min), math.log(t_max), n)
        rho = np.empty(n)
        bracket = None
        for i, lt in enumerate(self.log_t):
            t = math.exp(lt)
            rho[i] = resonance_curve(potential, forcing, kappa, t, bracket=bracket)
            bracket = (rho[i] * 0.98, rho[i] * 1.35)
        self.log_rho = np.log(rho)
        self.t_min = t_min
        self.t_max = t_max

    def rho_at(self, t):
        lt = np.log(np.asarray(t, dtype=float))
        out = np.exp(np.interp(lt, self.log_t, self.log_rho))
        return out if out.shape else float(out)


@dataclass(frozen=True)
class AveragedCoefficients:
    """Leading-order drift/diffusion coefficients and their phase averages.

    The 2D grids sample the closed-form angle/phase coefficient functions;
    the ``theta_*`` arrays are their averages over the fast phase on a
    uniform grid of the slow phase offset, and the ``chi_*`` scalars are the
    amplitude-equation constants.
    """

    h: int
    kappa: int
    phi_grid: np.ndarray
    S_grid: np.ndarray
    f10: np.ndarray
    f20: np.ndarray
    g10: np.ndarray
    c10: np.ndarray
    c20: np.ndarray
    theta_grid: np.ndarray
    theta_1_A_0: np.ndarray
    theta_1_2A_0: np.ndarray
    theta_1_2CmA_0: np.ndarray
    theta_2_2A_0: np.ndarray
    chi_1_BmA_0: float
    chi_1_B_0: float
    chi_2_A_0: float
    chi_2_2A_0: float
    series_1_A: _TrigSeries
    series_1_2A: _TrigSeries
    series_1_2CmA: _TrigSeries
    series_2_2A: _TrigSeries


def _orbit_on_grid(leading: LeadingOrbit, n: int) -> tuple:
    """Synthesize X10/X20 and derivatives on a uniform n-point angle grid."""
    phi = 2.0 * math.pi * np.arange(n) / n
    coeffs = leading.fourier_cos
    X10 = np.full(n, coeffs[0])
    dX10 = np.zeros(n)
    for m in range(1, len(coeffs)):
        X10 += coeffs[m] * np.cos(m * phi)
        dX10 += -m * coeffs[m] * np.sin(m * phi)
    X20 = leading.nu0 * dX10
    d2X10 = -X10 ** (2 * leading.h + 1) / leading.nu0 ** 2
    return phi, X10, X20, dX10, d2X10


def leading_averages(potential: Potential, forcing: ForcingSpec, noise: NoiseSpec,
                     leading: LeadingOrbit, analysis: ResonanceAnalysis,
                     *, theta_points: int = 1024, grid_points: int = 512) -> AveragedCoefficients:
    """Evaluate the leading coefficient functions and their fast-phase averages.

    The averages are plain trapezoid means over the fast phase, evaluated on
    matched uniform grids so the orbit factor is sampled exactly at the
    angles the average requires (no interpolation enters).
    """
    h = potential.h
    if leading.h != h:
        raise ValidationError("leading orbit degree does not match the potential")
    if analysis.h != h:
        raise ValidationError("analysis degree does not match the potential")
    if not (forcing.l <= forcing.p <= 2 * h + 1):
        raise ValidationError("forcing degrees must satisfy 0 <= l <= p <= 2h+1")
    if not noise.is_zero and not (noise.n <= forcing.p and noise.m <= forcing.l):
        raise ValidationError("noise degrees must satisfy n <= p and m <= l")

    nu0 = leading.nu0
    kappa = analysis.kappa
    p, l = forcing.p, forcing.l
    nn, mm = noise.n, noise.m
    pref = nu0 / (2.0 * (h + 1.0))

    # (phi, S) grids of the closed-form coefficient functions
    phi_fs, X10s, X20s, dX10s, d2X10s = _orbit_on_grid(leading, grid_points)
    S_grid = 2.0 * math.pi * np.arange(grid_points) / grid_points
    Qs = forcing.top_coefficient(S_grid)
    sig = noise.top_coefficient(S_grid)
    mu = noise.mu
    f1_orb = pref * X10s ** p * X20s ** l * dX10s
    f2_orb = -pref * X10s ** (p + 1) * X20s ** l
    g_orb = -(nu0 ** 2 / (8.0 * (h + 1.0) ** 2)) * X10s ** (2 * nn) * X20s ** (2 * mm) \
        * (h * dX10s ** 2 + X10s * d2X10s)
    c1_orb = pref * X10s ** nn * X20s ** mm * dX10s
    c2_orb = -pref * X10s ** (nn + 1) * X20s ** mm
    f10 = np.outer(f1_orb, Qs)
    f20 = np.outer(f2_orb, Qs)
    g10 = np.outer(g_orb, (mu * sig) ** 2)
    c10 = np.outer(c1_orb, sig)
    c20 = np.outer(c2_orb, sig)

    # fast-phase averages on the matched grid: angle (zeta/kappa + Theta) and
    # phase S = zeta land on multiples of 2*pi/(kappa*N) simultaneously
    N = theta_points
    Norb = kappa * N
    _, X10, X20, dX10, d2X10 = _orbit_on_grid(leading, Norb)
    zeta = 2.0 * math.pi * np.arange(Norb) / N
    QS = forcing.top_coefficient(zeta)
    F1 = pref * X10 ** p * X20 ** l * dX10 * QS
    F2 = -pref * X10 ** (p + 1) * X20 ** l * QS

    # mean over j of weighted[(j + kappa*i) % Norb], all offsets i at once
    idx = (np.arange(Norb)[None, :] + kappa * np.arange(N)[:, None]) % Norb

    def strided_average(weighted: np.ndarray) -> np.ndarray:
        return weighted[idx].mean(axis=1)

    avg_f1 = strided_average(F1)
    avg_f2 = strided_average(F2)

    Af, Bf = float(analysis.A), float(analysis.B)
    z0, a = analysis.z0, analysis.a
    th1A = Bf ** (-Af / Bf) * z0 ** a * avg_f1
    th12A = (a + 1) * Bf ** (-Af / Bf) * th1A
    th22A = Bf ** (-2.0 * Af / Bf) * z0 ** a * avg_f2

    if noise.is_zero:
        th12CmA = np.zeros(N)
    else:
        Cf = float(analysis.C)
        sigS = noise.top_coefficient(zeta)
        G1 = -(mu ** 2) * (nu0 ** 2 / (8.0 * (h + 1.0) ** 2)) * sigS ** 2 \
            * X10 ** (2 * nn) * X20 ** (2 * mm) * (h * dX10 ** 2 + X10 * d2X10)
        avg_g1 = strided_average(G1)
        th12CmA = Bf ** ((Af - 2.0 * Cf) / Bf) * z0 ** (2 * analysis.b) * avg_g1

    beta_over_h = float(forcing.beta) / h
    chi_1_BmA_0 = -Bf ** ((Af - Bf) / Bf) * beta_over_h
    chi_1_B_0 = (Af - beta_over_h) / Bf
    chi_2_A_0 = Bf ** (-Af / Bf) * z0 ** h * h * nu0
    chi_2_2A_0 = Bf ** (-2.0 * Af / Bf) * z0 ** h * h * (h - 1) * nu0 / 2.0

    theta_grid = 2.0 * math.pi * np.arange(N) / N
    return AveragedCoefficients(
        h=h, kappa=kappa, phi_grid=phi_fs, S_grid=S_grid,
        f10=f10, f20=f20, g10=g10, c10=c10, c20=c20,
        theta_grid=theta_grid,
        theta_1_A_0=th1A, theta_1_2A_0=th12A, theta_1_2CmA_0=th12CmA,
        theta_2_2A_0=th22A,
        chi_1_BmA_0=chi_1_BmA_0, chi_1_B_0=chi_1_B_0,
        chi_2_A_0=chi_2_A_0, chi_2_2A_0=chi_2_2A_0,
        series_1_A=_TrigSeries.from_samples(th1A),
        series_1_2A=_TrigSeries.from_samples(th12A),
        series_1_2CmA=_TrigSeries.from_samples(th12CmA),
        series_2_2A=_TrigSeries.from_samples(th22A),
    )


def phase_functions(coeffs: AveragedCoefficients, analysis: ResonanceAnalysis) -> tuple:
    """Assemble the lock indicator P and damping indicator J as trig series."""
    kron = analysis.kron_B_2A
    P = coeffs.series_1_A.shifted(coeffs.chi_1_BmA_0 if kron else 0.0)
    J = coeffs.series_1_2A.plus(coeffs.series_2_2A.derivative())
    J = J.shifted(coeffs.chi_1_B_0 if kron else 0.0)
    return P, J


def _wrap_pi(theta):
    return (np.asarray(theta) + np.pi) % (2.0 * np.pi) - np.pi


def locked_phases(coeffs: AveragedCoefficients, analysis: ResonanceAnalysis,
                  *, merge_tol: float = 1e-6, degenerate_tol: float = 1e-8) -> ResonanceAnalysis:
    """Locate and classify the roots of the lock indicator P.

    Roots come from a sign-change scan over the sampled grid refined by
    bisection on the underlying trigonometric polynomial. Classification:
    P' < 0 with J < 0 is a stable lock, P' < 0 with J > 0 an unstable lock,
    P' > 0 a saddle lock. No roots at all means phase drift.
    """
    if not (analysis.ncond_ok and analysis.adas_ok):
        raise ValidationError("locked-phase analysis requires the existence "
                              "conditions (ncond, adas) to hold")
    P, J = phase_functions(coeffs, analysis)
    grid = coeffs.theta_grid
    n = len(grid)
    vals = P(grid)
    step = 2.0 * np.pi / n

    roots = []
    for i in range(n):
        v0, v1 = vals[i], vals[(i + 1) % n]
        th0 = grid[i]
        if v0 == 0.0:
            roots.append(th0)
        elif v0 * v1 < 0.0:
            roots.append(solve_scalar(P, th0, th0 + step, tol=1e-13))
    # merge duplicates modulo 2*pi
    merged = []
    for r in sorted(_wrap_pi(r) for r in roots):
        if merged and abs(r - merged[-1]) < merge_tol:
            continue
        merged.append(r)
    if len(merged) > 1 and abs((merged[0] + 2.0 * np.pi) - merged[-1]) < merge_tol:
        merged.pop()

    Pp = P.derivative()
    phases = []
    for r in merged:
        slope = float(Pp(r))
        if abs(slope) < degenerate_tol:
            raise DegenerateRootError(
                f"phase root at Theta={r:.6f} has |P'| = {abs(slope):.2e} below "
                f"{degenerate_tol:.1e}; the simple-root assumption fails")
        jval = float(J(r))
        if slope > 0:
            kind = SADDLE
        elif jval < 0:
            kind = STABLE
        else:
            kind = UNSTABLE
        phases.append(LockedPhase(Theta0=float(r), P_prime=slope, J_value=jval, kind=kind))

    return replace(analysis,
                   theta_grid=grid, P_values=vals, J_values=J(grid),
                   locked_phases=tuple(phases), drift=(len(phases) == 0),
                   horizon=horizon_class(analysis))


def duffing_threshold(kappa: int, case: str, leading: LeadingOrbit | None = None) -> float:
    """Closed-form lock-existence threshold for the quartic well.

    ``p0-odd`` covers amplitude-independent drive at odd resonance order,
    where locks require ``|Q| / s**2`` above the threshold; ``p1-even``
    covers linear drive at even order, where locks require ``|Q| / s``
    above it.
    """
    from .oscillator import duffing_fourier
    if kappa < 1:
        raise ValidationError("kappa must be a positive integer")
    orbit = leading if leading is not None else leading_orbit(1)
    nu0 = orbit.nu0
    if case == "p0-odd":
        if kappa % 2 == 0:
            raise ValidationError("p0-odd thresholds exist only for odd kappa")
        k = (kappa + 1) // 2
        q_k, _ = duffing_fourier(k, orbit)
        return 128.0 / ((3.0 * nu0 * kappa) ** 3 * q_k)
    if case == "p1-even":
        if kappa % 2 == 1:
            raise ValidationError("p1-even thresholds exist only for even kappa")
        k = kappa // 2
        _, qt_k = duffing_fourier(k, orbit)
        return 3.0 / (2.0 * (nu0 * k) ** 2 * qt_k)
    raise ValidationError(f"unknown threshold case {case!r}")


def horizon_class(analysis: ResonanceAnalysis) -> str:
    """Trichotomy on C against A + B/2."""
    A, B, C = analysis.A, analysis.B, analysis.C
    if C == math.inf:
        return HORIZON_INFINITE
    if isinstance(A, Fraction) and isinstance(B, Fraction) and isinstance(C, Fraction):
        edge = A + B / 2
        if C < edge:
            return HORIZON_POLYNOMIAL
        if C == edge:
            return HORIZON_EXPONENTIAL
        return HORIZON_INFINITE
    edge = float(A) + float(B) / 2.0
    c = float(C)
    if abs(c - edge) < 1e-12:
        return HORIZON_EXPONENTIAL
    return HORIZON_POLYNOMIAL if c < edge else HORIZON_INFINITE


def horizon(analysis: ResonanceAnalysis, mu: float, epsilon: float, t_star: float) -> tuple:
    """Stability-horizon class and duration for noise strength ``mu``.

    Polynomial: ``t_star (mu**(-2(1-eps)/B) - 1)``; exponential:
    ``t_star (exp(mu**(-2(1-eps)/B)) - 1)``; infinite horizons return inf.
    """
    if not (0.0 < epsilon < 1.0):
        raise ValidationError("epsilon must lie in (0, 1)")
    if mu <= 0.0:
        raise ValidationError("mu must be positive")
    if t_star <= 0.0:
        raise ValidationError("t_star must be positive")
    if analysis.locked_phases is not None and not analysis.stable_phases():
        raise ValidationError("horizon requires a stable locked phase")
    cls = horizon_class(analysis)
    if cls == HORIZON_INFINITE:
        return cls, math.inf
    power = mu ** (-2.0 * (1.0 - epsilon) / float(analysis.B))
    if cls == HORIZON_POLYNOMIAL:
        return cls, t_star * (power - 1.0)
    return cls, t_star * (math.expm1(power) if power < 700 else math.inf)


def _exp_str(x):
    if x is None:
        return None
    if isinstance(x, Fraction):
        return str(x)
    if x == math.inf:
        return "inf"
    if x == -math.inf:
        return "-inf"
    return float(x)


def analysis_to_dict(analysis: ResonanceAnalysis) -> dict:
    """JSON-ready view of an analysis (exponents, flags, locked phases, horizon)."""
    out = {
        "kappa": analysis.kappa,
        "h": analysis.h,
        "a": analysis.a,
        "b": analysis.b,
        "M1": _exp_str(analysis.M1),
        "M2": _exp_str(analysis.M2),
        "M": _exp_str(analysis.M),
        "A": _exp_str(analysis.A),
        "B": _exp_str(analysis.B),
        "C": _exp_str(analysis.C),
        "ncond_ok": analysis.ncond_ok,
        "adas_ok": analysis.adas_ok,
        "z0": analysis.z0,
        "nu0": analysis.nu0,
        "drift": analysis.drift,
        "horizon": analysis.horizon,
        "caveats": [LEADING_ORDER_CAVEAT],
    }
    if analysis.locked_phases is not None:
        out["locked_phases"] = [
            {"Theta0": lp.Theta0, "P_prime": lp.P_prime, "J": lp.J_value, "class": lp.kind}
            for lp in analysis.locked_phases
        ]
    return out
