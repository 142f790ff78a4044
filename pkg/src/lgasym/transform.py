"""Normal-form analysis of u'' = (f + g) u near an endpoint.

Splits the potential into a leading part f (whose sign fixes the regime)
and a perturbation g, checks the hypotheses that make the leading-order
asymptotics meaningful, and builds the change of variables that turns the
equation into a perturbed constant-coefficient problem:

    y = Phi(x) = int_a^x |f|^(1/2),   u = |f|^(-1/4) * v(y),

under which v'' = (zeta^2 + psi/|f|^(1/2) ...) v with the perturbation

    psi = g * |f|^(-1/2) - |f|^(-1/4) * (|f|^(-1/4))''.

psi is built symbolically from the coefficient ASTs so its derivatives
and L1 norms are available to the rest of the pipeline.  Problems posed
at the endpoint 0 are inverted through s = 1/x, v(s) = s * u(1/s), which
multiplies both coefficients by s^(-4) after substitution; the inverted
split is classified at infinity.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import expr, quadrature


class HypothesisFailed(RuntimeError):
    """A structural hypothesis needed for the asymptotic analysis fails.

    checks holds the record of everything that was verified, in order,
    including the failing one.
    """

    def __init__(self, message, checks=None):
        super().__init__(message)
        self.checks = checks if checks is not None else []


class AmbiguousSignError(HypothesisFailed):
    """The leading coefficient changes sign (or vanishes) on the probe
    grid, so no single regime applies."""


class Regime(enum.Enum):
    EXP_INFINITY = "exponential-at-infinity"
    OSC_INFINITY = "oscillatory-at-infinity"
    ALGEBRAIC_INFINITY = "algebraic-at-infinity"
    EXP_SINGULAR = "exponential-at-zero"
    OSC_SINGULAR = "oscillatory-at-zero"
    CONSTANT_EXP = "constant-exponential"
    CONSTANT_OSC = "constant-oscillatory"

    @property
    def oscillatory(self):
        return self in (Regime.OSC_INFINITY, Regime.OSC_SINGULAR,
                        Regime.CONSTANT_OSC)

    @property
    def algebraic(self):
        return self is Regime.ALGEBRAIC_INFINITY

    @property
    def at_zero(self):
        return self in (Regime.EXP_SINGULAR, Regime.OSC_SINGULAR)


@dataclass
class CoefficientSplit:
    f_ast: expr.ExprNode
    g_ast: expr.ExprNode
    f: object = field(repr=False, default=None)
    g: object = field(repr=False, default=None)

    def __post_init__(self):
        if self.f is None:
            self.f = expr.compile_fn(self.f_ast)
        if self.g is None:
            self.g = expr.compile_fn(self.g_ast)

    @classmethod
    def from_expressions(cls, f_text, g_text):
        return cls(expr.parse(f_text), expr.parse(g_text))


def invert_split(split):
    """Pull a split at the endpoint 0 back to infinity through s = 1/x.

    With v(s) = s * u(1/s), the equation u'' = (f + g) u becomes
    v'' = (ft + gt) v where ft(s) = s^-4 f(1/s) and likewise for g.
    Applying the inversion twice returns an AST that evaluates identically
    to the original (the involution property), though the tree itself is
    larger.
    """
    inv = expr.binary("div", expr.const(1.0), expr.VAR)
    s4 = expr.binary("pow", expr.VAR, expr.const(-4.0))

    def pull(ast):
        return expr.binary("mul", s4, expr.substitute(ast, inv))

    return CoefficientSplit(pull(split.f_ast), pull(split.g_ast))


@dataclass
class PsiData:
    """The symbolic perturbation psi and the pieces it is built from."""

    psi_ast: expr.ExprNode
    amplitude_ast: expr.ExprNode     # |f|^(-1/4)
    sqrt_f_ast: expr.ExprNode        # |f|^(1/2)
    inv_sqrt_f_ast: expr.ExprNode    # |f|^(-1/2)
    psi: object = field(repr=False, default=None)
    amplitude: object = field(repr=False, default=None)
    sqrt_f: object = field(repr=False, default=None)
    inv_sqrt_f: object = field(repr=False, default=None)

    def __post_init__(self):
        if self.psi is None:
            self.psi = expr.compile_fn(self.psi_ast)
        if self.amplitude is None:
            self.amplitude = expr.compile_fn(self.amplitude_ast)
        if self.sqrt_f is None:
            self.sqrt_f = expr.compile_fn(self.sqrt_f_ast)
        if self.inv_sqrt_f is None:
            self.inv_sqrt_f = expr.compile_fn(self.inv_sqrt_f_ast)


def compute_psi(split, sign):
    """Build psi = g |f|^(-1/2) - |f|^(-1/4) (|f|^(-1/4))'' symbolically.

    sign is the (constant) sign of f near the endpoint; |f| is realized
    as f itself or its negation so fractional powers stay real on the
    relevant half-line.  For constant f the curvature term differentiates
    to zero exactly and psi reduces to g |f|^(-1/2).
    """
    if sign > 0:
        sf = split.f_ast
    elif sign < 0:
        sf = expr.unary("neg", split.f_ast)
    else:
        raise ValueError("psi is undefined when f vanishes identically")
    amp = expr.binary("pow", sf, expr.const(-0.25))
    inv_sqrt = expr.binary("pow", sf, expr.const(-0.5))
    sqrt = expr.binary("pow", sf, expr.const(0.5))
    curvature = expr.differentiate(expr.differentiate(amp))
    psi = expr.binary("sub",
                      expr.binary("mul", split.g_ast, inv_sqrt),
                      expr.binary("mul", amp, curvature))
    return PsiData(psi, amp, sqrt, inv_sqrt)


# --------------------------------------------------------------------------
# classification

_PROBE_POINTS = 96


def probe_sign(fn, lo, hi):
    """Sign of fn on a geometric probe grid of >= 64 points.

    Returns +1, -1, or 0 (identically zero on the grid); raises
    AmbiguousSignError when the samples mix signs or vanish at isolated
    points, since then no fractional power of |f| is usable.
    """
    lo = max(float(lo), 1e-8)
    hi = max(float(hi), lo * 1e4)
    xs = np.geomspace(lo, hi, _PROBE_POINTS)
    vals = np.asarray(fn(xs), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise AmbiguousSignError(
            "leading coefficient is not finite on the probe grid")
    pos = bool(np.any(vals > 0.0))
    neg = bool(np.any(vals < 0.0))
    zero = bool(np.any(vals == 0.0))
    if pos and neg:
        raise AmbiguousSignError(
            "leading coefficient changes sign on [%g, %g]; split it so the "
            "leading part has one sign near the endpoint" % (lo, hi))
    if zero and (pos or neg):
        raise AmbiguousSignError(
            "leading coefficient vanishes at probe points without being "
            "identically zero")
    if pos:
        return 1
    if neg:
        return -1
    return 0


@dataclass
class Classification:
    regime: Regime
    sign: int
    checks: list
    constant_f: float | None = None
    inverted: CoefficientSplit | None = None
    psi: PsiData | None = None
    inner: "Classification | None" = None  # inverted-problem classification


def _check(checks, name, passed, detail):
    checks.append({"name": name, "passed": bool(passed), "detail": detail})
    if not passed:
        raise HypothesisFailed(detail, checks)


def _phase_diverges(sqrt_f_fn, start):
    """True when int_start^inf |f|^(1/2) is judged divergent."""
    try:
        quadrature.integrate_to_infinity(sqrt_f_fn, start, tol=1e-8)
    except quadrature.DivergenceError:
        return True, None
    except quadrature.BudgetExceededError:
        # Could not settle; treat as divergent only if the partial mass is
        # already large.  Conservatively report failure to converge.
        return True, "budget"
    else:
        return False, None


def classify_regime(split, endpoint, interval, checks=None):
    """Decide the asymptotic regime of u'' = (f+g) u at an endpoint.

    endpoint is 'infinity' or 'zero'; interval = (lo, hi) bounds the
    region of interest (hi may be inf for the endpoint at infinity).
    Verifies, in order: a single sign for f, divergence of the phase
    integral (so the endpoint is at infinite transformed distance), and
    integrability of the perturbation (psi for nonzero f, the s-weighted
    g for f == 0).  Raises HypothesisFailed (or AmbiguousSignError) as
    soon as a hypothesis fails; the raised error carries the check log.
    """
    if checks is None:
        checks = []
    lo, hi = float(interval[0]), float(interval[1])

    if endpoint == "zero":
        if not math.isfinite(hi) or hi <= 0:
            raise ValueError("zero-endpoint problems need a finite right edge")
        inverted = invert_split(split)
        inner = []
        try:
            sub = classify_regime(inverted, "infinity", (1.0 / hi, math.inf),
                                  checks=inner)
        except HypothesisFailed as e:
            checks.extend(
                dict(c, name="inverted:" + c["name"]) for c in e.checks)
            raise HypothesisFailed(str(e), checks) from None
        checks.extend(dict(c, name="inverted:" + c["name"]) for c in sub.checks)
        if sub.regime is Regime.EXP_INFINITY:
            regime = Regime.EXP_SINGULAR
        elif sub.regime is Regime.OSC_INFINITY:
            regime = Regime.OSC_SINGULAR
        elif sub.regime in (Regime.CONSTANT_EXP, Regime.CONSTANT_OSC):
            # constant inverted leading part can only come from c/x^4
            regime = (Regime.EXP_SINGULAR if sub.sign > 0
                      else Regime.OSC_SINGULAR)
        else:
            _check(checks, "leading-part-at-zero", False,
                   "f vanishes identically near 0; substitute s = 1/x and "
                   "pose the problem at infinity instead")
        return Classification(regime, sub.sign, checks,
                              inverted=inverted, psi=sub.psi, inner=sub)

    if endpoint != "infinity":
        raise ValueError("endpoint must be 'infinity' or 'zero'")

    probe_lo = max(lo, 1e-8)
    if expr.is_constant(split.f_ast):
        c = expr.constant_value(split.f_ast)
        sign = 0 if c == 0.0 else (1 if c > 0.0 else -1)
        checks.append({"name": "constant-leading-part", "passed": True,
                       "detail": "f is the constant %g" % c})
    else:
        sign = probe_sign(split.f, probe_lo, hi if math.isfinite(hi) else 1e6)
        checks.append({"name": "sign-probe", "passed": True,
                       "detail": "f has constant sign %+d on the probe grid"
                       % sign if sign else "f samples to zero everywhere"})
        c = None

    start = max(lo, 1.0)
    if sign == 0:
        # algebraic regime: need the first moment of g near infinity
        weighted = _weighted_g(split)
        try:
            tail = quadrature.l1_tail_norm(weighted, start, tol=1e-8)
        except quadrature.DivergenceError:
            _check(checks, "weighted-perturbation-integrable", False,
                   "int s*|g(s)| ds diverges at infinity, so solutions need "
                   "not behave like a + b*x there")
        _check(checks, "weighted-perturbation-integrable", True,
               "int_%g^inf s*|g| = %.6g" % (start, tail.value))
        return Classification(Regime.ALGEBRAIC_INFINITY, 0, checks)

    psi = compute_psi(split, sign)
    if c is not None:
        regime = Regime.CONSTANT_EXP if sign > 0 else Regime.CONSTANT_OSC
    else:
        diverges, note = _phase_diverges(psi.sqrt_f, start)
        _check(checks, "phase-integral-diverges", diverges,
               "int |f|^(1/2) converges at infinity; the endpoint is at "
               "finite transformed distance and no normal form applies"
               if not diverges else
               "int_%g^inf |f|^(1/2) diverges%s" %
               (start, " (budget exhausted)" if note else ""))
        regime = Regime.EXP_INFINITY if sign > 0 else Regime.OSC_INFINITY

    def abs_psi(x):
        with np.errstate(all="ignore"):
            return np.abs(psi.psi(x))

    try:
        tail = quadrature.l1_tail_norm(abs_psi, start, tol=1e-8)
    except quadrature.DivergenceError:
        _check(checks, "perturbation-integrable", False,
               "the perturbation psi is not integrable at infinity; the "
               "leading part does not dominate")
    _check(checks, "perturbation-integrable", True,
           "int_%g^inf |psi| = %.6g" % (start, tail.value))
    return Classification(regime, sign, checks, constant_f=c, psi=psi)


def _weighted_g(split):
    g = split.g

    def weighted(x):
        with np.errstate(all="ignore"):
            return np.abs(x * g(x))

    return weighted


# --------------------------------------------------------------------------
# phase map

class PhaseMap:
    """The monotone change of variables y = Phi(x) = int_a^x |f|^(1/2).

    Forward values x(y) are tabulated on the uniform marching grid by a
    fixed-step classical Runge-Kutta integration of dx/dy = |f(x)|^(-1/2)
    (local error O(h^5), far below the marching error), with cubic Hermite
    interpolation between nodes.  The inverse y(x) is evaluated directly
    as a quadrature of |f|^(1/2) from the nearest node, so it carries no
    interpolation error.
    """

    def __init__(self, a, h, x_nodes, slopes, sqrt_f, affine_rate=None):
        self.a = float(a)
        self.h = float(h)
        self.x_nodes = x_nodes
        self.slopes = slopes
        self.sqrt_f = sqrt_f
        self.affine_rate = affine_rate
        self.y_nodes = h * np.arange(len(x_nodes))

    @classmethod
    def build(cls, w, sqrt_f, a, y_span, h):
        """Tabulate x(y) for y in [0, y_span] with uniform step h.

        w(x) must return |f(x)|^(-1/2) (the reciprocal of sqrt_f); both
        must be positive on the swept interval.
        """
        n = int(round(y_span / h))
        xs = np.empty(n + 1)
        slopes = np.empty(n + 1)
        x = float(a)
        k1 = float(w(x))
        for i in range(n):
            xs[i] = x
            slopes[i] = k1
            k2 = float(w(x + 0.5 * h * k1))
            k3 = float(w(x + 0.5 * h * k2))
            k4 = float(w(x + h * k3))
            x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            k1 = float(w(x))
        xs[n] = x
        slopes[n] = k1
        if not np.all(np.isfinite(xs)):
            raise HypothesisFailed(
                "phase map left the domain of |f|^(-1/2)")
        return cls(a, h, xs, slopes, sqrt_f)

    @classmethod
    def affine(cls, a, rate, y_span, h):
        """Exact map for constant f: y = rate * (x - a), rate = |f|^(1/2)."""
        n = int(round(y_span / h))
        ys = h * np.arange(n + 1)
        xs = a + ys / rate
        slopes = np.full(n + 1, 1.0 / rate)
        return cls(a, h, xs, slopes, lambda x: np.full_like(
            np.asarray(x, dtype=float), rate), affine_rate=rate)

    @property
    def y_span(self):
        return self.h * (len(self.x_nodes) - 1)

    def x_of_y(self, y):
        if self.affine_rate is not None:
            return self.a + np.asarray(y, dtype=float) / self.affine_rate
        y = np.asarray(y, dtype=float)
        scalar = y.ndim == 0
        yv = np.atleast_1d(y)
        if np.any(yv < -1e-12) or np.any(yv > self.y_span * (1 + 1e-12)):
            raise ValueError("y outside the tabulated phase range")
        idx = np.clip((yv / self.h).astype(int), 0, len(self.x_nodes) - 2)
        t = yv / self.h - idx
        x0 = self.x_nodes[idx]
        x1 = self.x_nodes[idx + 1]
        m0 = self.slopes[idx] * self.h
        m1 = self.slopes[idx + 1] * self.h
        t2 = t * t
        t3 = t2 * t
        val = ((2 * t3 - 3 * t2 + 1) * x0 + (t3 - 2 * t2 + t) * m0
               + (-2 * t3 + 3 * t2) * x1 + (t3 - t2) * m1)
        return float(val[0]) if scalar else val

    def y_of_x(self, x):
        """Phi(x) by quadrature from the nearest tabulated node."""
        if self.affine_rate is not None:
            return self.affine_rate * (float(x) - self.a)
        x = float(x)
        i = int(np.searchsorted(self.x_nodes, x))
        i = min(max(i, 0), len(self.x_nodes) - 1)
        if i > 0 and abs(self.x_nodes[i - 1] - x) < abs(self.x_nodes[i] - x):
            i -= 1
        base = self.y_nodes[i]
        xi = self.x_nodes[i]
        if x == xi:
            return float(base)
        seg = quadrature.integrate_finite(self.sqrt_f, xi, x, tol=1e-13)
        return float(base + seg.value)


# --------------------------------------------------------------------------
# closed-form approximants

@dataclass
class LGApproximant:
    """One branch of the leading-order approximation.

    value(x) = amplitude(x) * exp(zeta * phase(x)); real for zeta = +-1,
    complex on the unit-imaginary branches.
    """

    label: str
    zeta: complex
    amplitude: object
    phase: object

    def value(self, x):
        z = self.zeta * self.phase(x)
        if isinstance(z, complex):
            return complex(self.amplitude(x)) * np.exp(z)
        return float(self.amplitude(x)) * math.exp(float(z))


def build_approximants(regime, psi, phase_map):
    """The (dominant, recessive) or (e^{+i.}, e^{-i.}) approximant pair.

    Constant-f regimes use the absolute phase (anchored at x = 0) with
    unit amplitude, matching the e^{zeta x} normalization; general
    regimes use the phase from the map's anchor and the |f|^(-1/4)
    amplitude.  Algebraic regimes return the pair (x, 1).
    """
    if regime.algebraic:
        one = LGApproximant("linear", 0.0, lambda x: np.asarray(x, float),
                            lambda x: 0.0)
        const = LGApproximant("constant", 0.0, lambda x: np.ones_like(
            np.asarray(x, dtype=float)), lambda x: 0.0)
        return one, const
    if regime in (Regime.CONSTANT_EXP, Regime.CONSTANT_OSC):
        rate = phase_map.affine_rate

        def phase(x):
            return rate * float(x)

        def amp(x):
            return 1.0
    else:
        phase = phase_map.y_of_x

        def amp(x):
            return float(psi.amplitude(x))

    if regime.oscillatory:
        return (LGApproximant("forward", 1j, amp, phase),
                LGApproximant("backward", -1j, amp, phase))
    return (LGApproximant("growing", 1.0, amp, phase),
            LGApproximant("decaying", -1.0, amp, phase))
