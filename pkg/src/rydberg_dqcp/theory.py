"""Effective clock-model field theory: scaling dimensions, regions, exponents,
and the marginal distributions of the order parameter.

The 1D effective theory for a cylinder of circumference ``l_y`` has stiffness
``K' = K / (rho0^2 l_y)``. Vertex operators have dimension

    x_{m,n} = (m^2 / K' + n^2 K') / 4

with ``m`` the dual (vortex) index and ``n`` the phase index. Exact
``Fraction`` input gives exact output, which is used at the thresholds.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np
from scipy import integrate
from scipy.special import log_ndtr

# relevance thresholds in K'
K_Z6 = Fraction(2, 9)  # cos(6 phi) marginal
K_DUAL = Fraction(1, 2)  # cos(2 pi Theta) marginal
K_POTTS = Fraction(2, 3)  # x_3 == x_Theta
K_Z3 = Fraction(8, 9)  # cos(3 phi) marginal

REGIONS = (
    "Z3-ordered(1/3)",
    "Z3-ordered(2/3)",
    "Z6-regime(double-frequency)",
    "LL-critical(emergent U(1))",
    "disordered",
    "Potts-point",
    "KT-boundary",
)


class TheoryError(ValueError):
    pass


def _check_k(kp):
    if isinstance(kp, (int, Fraction)):
        if kp <= 0:
            raise TheoryError(f"K' must be positive, got {kp}")
        return Fraction(kp)
    kp = float(kp)
    if not math.isfinite(kp) or kp <= 0:
        raise TheoryError(f"K' must be positive and finite, got {kp}")
    return kp


def scaling_dimension(m: int, n: int, k_prime):
    """``x_{m,n}``. Exact when ``k_prime`` is an int or ``Fraction``."""
    kp = _check_k(k_prime)
    return (m * m / kp + n * n * kp) / 4


def x_n(n: int, k_prime):
    return scaling_dimension(0, n, k_prime)


def x_theta(k_prime):
    """Dimension of ``cos(2 pi Theta)``, equal to ``1/K'`` (the ``m = 2`` vertex)."""
    return scaling_dimension(2, 0, k_prime)


def _same(a, b) -> bool:
    if isinstance(a, Fraction):
        return a == b
    return math.isclose(a, float(b), rel_tol=1e-12, abs_tol=0.0)


def _sign(x) -> int:
    return (x > 0) - (x < 0)


@dataclass(frozen=True)
class Region:
    label: str
    sublabel: str | None = None

    def __str__(self):
        return self.label if self.sublabel is None else f"{self.label}: {self.sublabel}"


def classify_region(k_prime, g3: float = 0.0, g6: float = 0.0) -> Region:
    """Phase region of the deformed clock model from ``K'`` and coupling signs.

    Exact thresholds yield the boundary labels ``Potts-point`` or
    ``KT-boundary`` instead of a phase.
    """
    kp = _check_k(k_prime)
    s3, s6 = _sign(g3), _sign(g6)
    if s3 != 0:
        if _same(kp, K_POTTS):
            return Region("Potts-point")
        if _same(kp, K_Z6):
            return Region("KT-boundary", "cos(6 phi) marginal")
        if kp > K_POTTS:
            return Region("disordered", "Potts-disordered side")
        if kp > K_Z6:
            # cos(3 phi) = 1 minimizes g3 cos(3 phi) for g3 < 0
            return Region("Z3-ordered(1/3)" if s3 < 0 else "Z3-ordered(2/3)")
        if s6 < 0:
            sub = "first-order transition"
        elif s6 > 0:
            sub = "intermediate Z6 phase"
        else:
            sub = "undetermined (g6 = 0)"
        return Region("Z6-regime(double-frequency)", sub)
    if _same(kp, K_Z6) or _same(kp, K_DUAL):
        return Region("KT-boundary")
    if kp < K_Z6:
        return Region("Z6-regime(double-frequency)", "Z6-ordered")
    if kp < K_DUAL:
        return Region("LL-critical(emergent U(1))")
    return Region("disordered")


@dataclass(frozen=True)
class Exponents:
    nu: float
    beta: float
    eta: float

    @property
    def beta_over_nu(self):
        return self.beta / self.nu

    @property
    def inv_nu(self):
        return 1 / self.nu


def critical_exponents(x3) -> Exponents:
    """``nu = 1/(2 - x3)``, ``beta = x3/(2 - x3)``, ``eta = 2 x3``."""
    if x3 >= 2:
        raise TheoryError(f"x3 = {x3} >= 2: cos(3 phi) is irrelevant, no exponents")
    return Exponents(1 / (2 - x3), x3 / (2 - x3), 2 * x3)


def exponents_from_k(k_prime) -> Exponents:
    return critical_exponents(x_n(3, k_prime))


# ------------------------------------------------------------------ couplings


@dataclass(frozen=True)
class EffectiveCouplings:
    """Couplings of the amplitude-phase action on a cylinder."""

    K: float
    mu: float
    lam: float
    l_y: int = 1
    g3: float = 0.0
    g6: float = 0.0
    g_h: float = 0.0
    vol: float = 1.0

    def __post_init__(self):
        if self.lam <= 0:
            raise TheoryError("lambda must be positive")
        if self.mu <= 0:
            raise TheoryError("rho0 is real only for mu > 0")
        if self.K <= 0 or self.l_y <= 0:
            raise TheoryError("K and l_y must be positive")

    @classmethod
    def from_rho0(cls, K, rho0, l_y=1, lam=1.0, **kw):
        return cls(K=K, mu=2 * lam * rho0 * rho0, lam=lam, l_y=l_y, **kw)

    @property
    def rho0(self) -> float:
        return math.sqrt(self.mu / (2 * self.lam))

    @property
    def k_prime(self) -> float:
        return self.K / (self.rho0**2 * self.l_y)

    @property
    def g3_prime(self) -> float:
        return self.g3 * self.l_y * self.rho0**3

    @property
    def g6_prime(self) -> float:
        return self.g6 * self.l_y * self.rho0**6

    # amplitudes entering the snapshot marginals
    @property
    def A3(self) -> float:
        return self.g3 * self.rho0**3 * self.vol

    @property
    def A6(self) -> float:
        return self.g6 * self.rho0**6 * self.vol

    @property
    def M(self) -> float:
        return self.mu * self.vol

    @property
    def L(self) -> float:
        return self.lam * self.vol


@dataclass
class ScalingReport:
    k_prime: float
    x: dict
    x_theta: float
    relevant: dict
    region: str
    sublabel: str | None
    exponents: dict | None
    inputs: dict = field(default_factory=dict)

    def to_json(self, **kw) -> str:
        return json.dumps(asdict(self), **kw)


def scaling_report(k_prime, ns=(1, 2, 3, 6), g3=0.0, g6=0.0, inputs=None) -> ScalingReport:
    kp = _check_k(k_prime)
    xs = {str(n): float(x_n(n, kp)) for n in ns}
    xt = float(x_theta(kp))
    relevant = {f"cos({n}phi)": x < 2 for n, x in zip(ns, xs.values())}
    relevant["cos(2pi Theta)"] = xt < 2
    region = classify_region(kp, g3, g6)
    x3 = x_n(3, kp)
    if x3 < 2:
        e = critical_exponents(x3)
        exps = {"nu": float(e.nu), "beta": float(e.beta), "eta": float(e.eta),
                "beta_over_nu": float(e.beta_over_nu), "inv_nu": float(e.inv_nu)}
    else:
        exps = None
    return ScalingReport(float(kp), xs, xt, relevant, region.label, region.sublabel, exps, dict(inputs or {}))


def report_for(K=None, rho0=None, l_y=1, k_prime=None, g3=0.0, g6=0.0) -> ScalingReport:
    """Report from either ``K'`` directly or ``(K, rho0, l_y)``."""
    if k_prime is None:
        if K is None or rho0 is None:
            raise TheoryError("give k_prime or both K and rho0")
        if rho0 <= 0:
            raise TheoryError("rho0 must be positive")
        k_prime = K / (rho0 * rho0 * l_y)
        inputs = {"K": K, "rho0": rho0, "l_y": l_y}
    else:
        inputs = {"k_prime": k_prime}
    inputs.update(g3=g3, g6=g6)
    return scaling_report(k_prime, g3=g3, g6=g6, inputs=inputs)


# ------------------------------------------------------------------ marginals


def _phi_log_weight(phi, a3, a6):
    return -a3 * np.cos(3 * phi) - a6 * np.cos(6 * phi)


def log_norm_phi(a3: float, a6: float) -> float:
    """``log int_0^{2 pi} exp(-A3 cos 3phi - A6 cos 6phi) dphi`` by quadrature."""
    shift = abs(a3) + abs(a6)
    # the integrand has period 2 pi / 3; integrate one period with breakpoints
    f = lambda p: math.exp(-a3 * math.cos(3 * p) - a6 * math.cos(6 * p) - shift)
    pts = [k * math.pi / 6 for k in range(1, 4)]
    val, _ = integrate.quad(f, 0.0, 2 * math.pi / 3, points=pts, epsabs=0.0, epsrel=1e-13, limit=400)
    return math.log(3 * val) + shift


def predicted_P_phi(phi, a3: float, a6: float = 0.0):
    """``P(phi) ~ exp(-A3 cos 3phi - A6 cos 6phi)`` normalized on [0, 2 pi)."""
    phi = np.asarray(phi, dtype=float)
    return np.exp(_phi_log_weight(phi, a3, a6) - log_norm_phi(a3, a6))


def log_norm_rho(m: float, l: float) -> float:
    """``log int_0^inf rho exp(M rho^2 - L rho^4) d rho`` in closed form.

    With ``u = rho^2`` this is half a truncated Gaussian integral.
    """
    if l <= 0:
        raise TheoryError("L must be positive for a normalizable P(rho)")
    s = math.sqrt(l)
    return math.log(0.5 * math.sqrt(math.pi) / s) + m * m / (4 * l) + float(log_ndtr(m / math.sqrt(2 * l)))


def predicted_P_rho(rho, m: float, l: float):
    """``P(rho) ~ rho exp(M rho^2 - L rho^4)`` normalized on [0, inf)."""
    rho = np.asarray(rho, dtype=float)
    lz = log_norm_rho(m, l)
    with np.errstate(divide="ignore"):
        out = np.exp(np.log(np.where(rho > 0, rho, 1.0)) + m * rho**2 - l * rho**4 - lz)
    return np.where(rho > 0, out, 0.0)


def rho_mode(m: float, l: float) -> float:
    """Positive root of ``2 L r^4 - M r^2 = 1/2``."""
    if l <= 0:
        raise TheoryError("L must be positive")
    u = (m + math.sqrt(m * m + 4 * l)) / (4 * l)
    return math.sqrt(u)


def rho0_squared(m: float, l: float) -> float:
    """Saddle value ``M / 2L``."""
    return m / (2 * l)
