"""Marching solvers for the renormalized correction equations.

After the phase change of variables, each leading-order branch e^{zeta y}
carries a correction z solving a Volterra integral equation

    z(y) = 1 + (1/mu) * int_0^y (1 - e^{-mu (y-t)}) w(t) z(t) dt,

with mu = 2 zeta, zeta in {1, i, -i}, and w the transformed perturbation.
When the leading part vanishes identically the analogous equation in the
original variable has the kernel (s - s^2/x):

    z(x) = 1 + int_a^x (s - s^2/x) g(s) z(s) ds.

Both are solved by second-order product integration: z is interpolated
linearly between uniform nodes and every kernel moment over a cell is
integrated exactly, giving an implicit scalar update per step.  The
derivative comes for free (z' equals the memory integral E in the kernel
case, S2/x^2 in the algebraic case).

The continuous solutions obey |z| <= exp(T) with T the running L1 norm of
the perturbation weight; the discrete march asserts this envelope at
every step, allowing only its own O(h^2) discretization slack (which
vanishes identically when w == 0).  A violation raises EnvelopeError and
is the caller's cue to halve the step.

Connection constants at infinity are completed past the end of the grid
by a small linear solve against tail integrals supplied by the caller,
with a computable residual bound, so the march never needs to continue
until the perturbation underflows.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

_ROUNDOFF = 1e-12


class VolterraError(RuntimeError):
    pass


class StepTooLargeError(VolterraError):
    """The implicit update is outside its contraction regime; halve h."""


class EnvelopeError(VolterraError):
    """The discrete solution broke the exp(T) envelope beyond the
    scheme's own discretization slack; halve h."""


def hermite_uniform(origin, h, vals, derivs, t):
    """Cubic Hermite interpolation on a uniform grid (vectorized in t).

    Works for real or complex node values; error O(h^4) for smooth data.
    """
    t = np.asarray(t, dtype=float)
    scalar = t.ndim == 0
    tv = np.atleast_1d(t)
    pos = (tv - origin) / h
    n = len(vals)
    if np.any(pos < -1e-9) or np.any(pos > (n - 1) * (1 + 1e-12) + 1e-9):
        raise ValueError("interpolation point outside the grid")
    idx = np.clip(pos.astype(int), 0, n - 2)
    u = pos - idx
    v0 = np.asarray(vals)[idx]
    v1 = np.asarray(vals)[idx + 1]
    m0 = np.asarray(derivs)[idx] * h
    m1 = np.asarray(derivs)[idx + 1] * h
    u2 = u * u
    u3 = u2 * u
    out = ((2 * u3 - 3 * u2 + 1) * v0 + (u3 - 2 * u2 + u) * m0
           + (-2 * u3 + 3 * u2) * v1 + (u3 - u2) * m1)
    if scalar:
        return out[0]
    return out


@dataclass
class VolterraSolution:
    kind: str                 # 'exponential' | 'oscillatory' | 'algebraic'
    mu: complex
    h: float
    grid: np.ndarray          # uniform nodes (phase variable, or s itself)
    w: np.ndarray             # perturbation samples on the grid
    z: np.ndarray
    z_deriv: np.ndarray
    envelope_log: np.ndarray  # running T_k
    l1_q: np.ndarray          # running int |w z|
    P0: complex               # int_0^Y w z dt (signed)
    P_refl: complex | None    # int_0^Y e^{mu t} w z dt (oscillatory runs)
    S1: float | None = None   # algebraic: int s g z up to the grid end
    S2: float | None = None   # algebraic: int s^2 g z up to the grid end
    z_max: float = 0.0
    steps: int = 0

    def z_at(self, t):
        return hermite_uniform(self.grid[0], self.h, self.z, self.z_deriv, t)

    def deriv_at(self, t):
        # derivative of the Hermite interpolant of z', using a second
        # difference for its slopes, keeps O(h^2) accuracy; sufficient
        # since z' is only reported, never re-integrated.
        d = self.z_deriv
        slopes = np.gradient(d, self.h)
        return hermite_uniform(self.grid[0], self.h, d, slopes, t)

    def envelope_report(self):
        env = np.exp(self.envelope_log)
        with np.errstate(invalid="ignore"):
            ratio = np.abs(self.z) / env
        return {
            "max_abs_z": float(np.max(np.abs(self.z))),
            "envelope_log_end": float(self.envelope_log[-1]),
            "z_env_max_ratio": float(np.max(ratio)),
            "l1_q_end": float(abs(self.l1_q[-1])),
            "l1_q_bound_end": float(env[-1] - 1.0),
            "l1_q_excess": float(np.max(self.l1_q - (env - 1.0))),
        }


def _kernel_weights(mu, h):
    """Exact hat-function moments of the kernel over one cell.

    Returns (D, A, B, cL, cR): D = e^{-mu h}; A and B weight q_k and
    q_{k+1} in the memory update; cL and cR are the net (1/mu)(h/2 - .)
    weights of the implicit z update.  Series forms are used for small
    mu h where the closed forms cancel.
    """
    cd = mu * h
    D = cmath.exp(-cd) if isinstance(mu, complex) else math.exp(-cd)
    if abs(cd) < 0.5:
        # I0/h    = sum (-cd)^m / (m+1)!
        # A/h     = sum (-cd)^m (m+1) / (m+2)!
        # h/2 - A = -h * sum_{m>=1} (-cd)^m (m+1)/(m+2)!
        # h/2 - B = -h * sum_{m>=1} (-cd)^m / (m+2)!
        i0 = 0.0
        da = 0.0
        db = 0.0
        term = 1.0 + 0j if isinstance(mu, complex) else 1.0
        fact = 1.0
        for m in range(0, 18):
            fact2 = fact * (m + 1)      # (m+1)!
            fact3 = fact2 * (m + 2)     # (m+2)!
            i0 += term / fact2
            if m >= 1:
                da -= term * (m + 1) / fact3
                db -= term / fact3
            term *= -cd
            fact = fact2
        i0 *= h
        half_minus_A = h * da
        half_minus_B = h * db
        A = 0.5 * h - half_minus_A
        B = 0.5 * h - half_minus_B
    else:
        I0 = (1.0 - D) / mu
        I1 = (1.0 - D * (1.0 + cd)) / (mu * mu)
        A = I1 / h
        B = I0 - A
        half_minus_A = 0.5 * h - A
        half_minus_B = 0.5 * h - B
    return D, A, B, half_minus_A / mu, half_minus_B / mu


def _reflected_weights(mu, h):
    """Exact hat moments of e^{mu t} over one cell (relative to the left
    node): JL weights q_k, JR weights q_{k+1}."""
    cd = mu * h
    E = cmath.exp(cd) if isinstance(mu, complex) else math.exp(cd)
    if abs(cd) < 0.5:
        j0 = 0.0
        j1 = 0.0
        term = 1.0 + 0j if isinstance(mu, complex) else 1.0
        fact2 = 1.0
        for m in range(0, 18):
            fact2 = fact2 * (m + 1)
            fact3 = fact2 * (m + 2)
            j0 += term / fact2
            j1 += term * (m + 1) / fact3
            term *= cd
        J0 = h * j0
        JR = h * j1
    else:
        J0 = (E - 1.0) / mu
        JR = (E * (cd - 1.0) + 1.0) / (mu * mu) / h
    return E, J0 - JR, JR


def _envelope_bound(T, h):
    """Admissible |z| at envelope log T: the Gronwall bound exp(T) plus
    the scheme's own O(h^2) slack (exactly exp(0) = 1 when T == 0)."""
    return math.exp(T) * (1.0 + _ROUNDOFF + h * h * T)


def solve_kernel(w_vals, h, zeta, grid=None):
    """March the kernel equation for mu = 2 zeta over uniform nodes.

    w_vals are the perturbation samples on the grid; zeta is 1 (growing
    exponential branch) or +-1j (oscillatory branches).  Oscillatory runs
    also accumulate the reflected moment int e^{mu t} w z dt needed for
    the second connection constant.
    """
    w_arr = np.asarray(w_vals, dtype=float)
    if not np.all(np.isfinite(w_arr)):
        raise VolterraError("perturbation samples are not finite")
    n = len(w_arr)
    if n < 2:
        raise VolterraError("need at least two grid nodes")
    oscillatory = (complex(zeta).real == 0.0)
    mu = complex(2.0 * zeta) if oscillatory else float(2.0 * zeta)
    if float(np.max(np.abs(w_arr))) * h > 0.5:
        raise StepTooLargeError(
            "h * max|w| = %.3g exceeds the contraction margin"
            % (float(np.max(np.abs(w_arr))) * h))
    D, A, B, cL, cR = _kernel_weights(mu, h)
    if oscillatory:
        Em, JL, JR = _reflected_weights(mu, h)
        phase = 1.0 + 0j
        P = 0.0 + 0j
    else:
        P = None
    w = w_arr.tolist()
    zero = 0j if oscillatory else 0.0
    z = [1.0 + zero]
    E = zero
    Q = zero
    T = 0.0
    L1 = 0.0
    derivs = [zero]
    Ts = [0.0]
    L1s = [0.0]
    zmax = 1.0
    zk = 1.0 + zero
    for k in range(n - 1):
        wk = w[k]
        wk1 = w[k + 1]
        qk = wk * zk
        num = 1.0 + (Q - D * E) / mu + qk * cL
        denom = 1.0 - wk1 * cR
        if abs(denom) < 0.5:
            raise StepTooLargeError("implicit update lost contraction")
        zk1 = num / denom
        qk1 = wk1 * zk1
        if oscillatory:
            P += phase * (qk * JL + qk1 * JR)
            phase *= Em
        Q += 0.5 * h * (qk + qk1)
        E = D * E + qk * A + qk1 * B
        T += 0.5 * h * (abs(wk) + abs(wk1))
        L1 += 0.5 * h * (abs(qk) + abs(qk1))
        az = abs(zk1)
        if az > _envelope_bound(T, h):
            raise EnvelopeError(
                "|z| = %.6g exceeded its envelope %.6g at node %d"
                % (az, math.exp(T), k + 1))
        if az > zmax:
            zmax = az
        z.append(zk1)
        derivs.append(E)
        Ts.append(T)
        L1s.append(L1)
        zk = zk1
    if grid is None:
        grid = h * np.arange(n)
    dtype = complex if oscillatory else float
    return VolterraSolution(
        kind="oscillatory" if oscillatory else "exponential",
        mu=mu, h=h, grid=np.asarray(grid, dtype=float),
        w=w_arr,
        z=np.array(z, dtype=dtype),
        z_deriv=np.array(derivs, dtype=dtype),
        envelope_log=np.array(Ts), l1_q=np.array(L1s),
        P0=Q, P_refl=P, z_max=zmax, steps=n - 1)


def solve_algebraic(g_vals, a, h):
    """March z(x) = 1 + int_a^x (s - s^2/x) g z ds on nodes a + k h.

    The running moments S1 = int s g z and S2 = int s^2 g z are updated
    with exact polynomial moments of the hat interpolant of g z, so the
    kernel weight at the diagonal vanishes to the same order as the
    kernel itself.  The envelope uses the same exact first moments of
    |g|, making T the product-integration value of int s |g| ds.
    """
    g_arr = np.asarray(g_vals, dtype=float)
    if not np.all(np.isfinite(g_arr)):
        raise VolterraError("perturbation samples are not finite")
    n = len(g_arr)
    if n < 2:
        raise VolterraError("need at least two grid nodes")
    a = float(a)
    if a < 0:
        raise VolterraError("algebraic march needs a >= 0")
    peak = float(np.max(np.abs(g_arr) * (a + h * np.arange(n))))
    if peak * h > 0.5:
        raise StepTooLargeError(
            "h * max|s g| = %.3g exceeds the contraction margin" % (peak * h))
    g = g_arr.tolist()
    z = [1.0]
    derivs = [0.0]
    Ts = [0.0]
    L1s = [0.0]
    S1 = 0.0
    S2 = 0.0
    T = 0.0
    L1 = 0.0
    zmax = 1.0
    zk = 1.0
    h2_6 = h * h / 6.0
    h2_3 = h * h / 3.0
    h3_12 = h ** 3 / 12.0
    h3_4 = h ** 3 / 4.0
    for k in range(n - 1):
        sk = a + k * h
        sk1 = sk + h
        # exact cell moments of s and s^2 against the two hat halves
        m1L = 0.5 * h * sk + h2_6
        m1R = 0.5 * h * sk + h2_3
        m2L = 0.5 * h * sk * sk + h2_3 * sk + h3_12
        m2R = 0.5 * h * sk * sk + 2.0 * h2_3 * sk + h3_4
        pk = g[k] * zk
        gk1 = g[k + 1]
        num = 1.0 + S1 + m1L * pk - (S2 + m2L * pk) / sk1
        denom = 1.0 - gk1 * (m1R - m2R / sk1)
        if abs(denom) < 0.5:
            raise StepTooLargeError("implicit update lost contraction")
        zk1 = num / denom
        pk1 = gk1 * zk1
        S1 += m1L * pk + m1R * pk1
        S2 += m2L * pk + m2R * pk1
        T += m1L * abs(g[k]) + m1R * abs(gk1)
        L1 += m1L * abs(pk) + m1R * abs(pk1)
        az = abs(zk1)
        if az > _envelope_bound(T, h):
            raise EnvelopeError(
                "|z| = %.6g exceeded its envelope %.6g at node %d"
                % (az, math.exp(T), k + 1))
        if az > zmax:
            zmax = az
        z.append(zk1)
        derivs.append(S2 / (sk1 * sk1))
        Ts.append(T)
        L1s.append(L1)
        zk = zk1
    grid = a + h * np.arange(n)
    return VolterraSolution(
        kind="algebraic", mu=0.0, h=h, grid=grid, w=g_arr,
        z=np.array(z), z_deriv=np.array(derivs),
        envelope_log=np.array(Ts), l1_q=np.array(L1s),
        P0=S1, P_refl=None, S1=S1, S2=S2, z_max=zmax, steps=n - 1)


# --------------------------------------------------------------------------
# tail completion of connection constants

@dataclass
class Completion:
    value: complex
    residual_bound: float


def complete_exponential(sol, G0, G0_abs):
    """Limit of z for the growing exponential branch.

    G0 = int_Y^inf w dt (signed) and G0_abs its absolute version, both
    supplied by the caller from quadrature of the perturbation beyond
    the grid end Y.

    Writing Q(y) = int_0^y w z and E(y) = int_0^y e^{-2(y-t)} w z (the
    memory term, equal to z'), the marched value satisfies
    z(Y) = 1 + (Q(Y) - E(Y))/2 exactly, while the limit satisfies
    z_inf = 1 + Q(inf)/2.  Splitting the tail of Q around z_inf gives

        z_inf = (1 + Q(Y)/2 - err) / (1 - G0/2),
        err   = (1/2) int_Y^inf w (z_inf - z),

    so the computable quotient is exact up to err, which is second order
    in the tail: |z_inf - z(t)| <= G0_abs * z_sup + |E(Y)|/2 for t >= Y.
    """
    if G0_abs >= 0.5:
        raise VolterraError(
            "tail mass %.3g too large to complete; march further" % G0_abs)
    P0 = sol.P0.real if isinstance(sol.P0, complex) else sol.P0
    zhat = (1.0 + 0.5 * P0) / (1.0 - 0.5 * G0)
    E_end = abs(sol.z_deriv[-1])
    z_tail_sup = max(sol.z_max * math.exp(G0_abs), abs(zhat))
    sup_dev = G0_abs * z_tail_sup + 0.5 * E_end
    residual = 0.5 * G0_abs * sup_dev / (1.0 - 0.5 * G0_abs)
    return Completion(zhat, residual)


@dataclass
class OscillatoryCoeffs:
    xi1: complex
    xi2: complex
    eta1: complex
    eta2: complex
    residual_bound: float
    conjugation_defect: float


def complete_oscillatory(sol_fwd, sol_bwd, G0, Gp, Gm, tail_l1):
    """Connection constants for the two oscillatory runs.

    sol_fwd is the zeta = +i run, sol_bwd the zeta = -i run.  G0, Gp, Gm
    are int_Y^inf w e^{0, +2it, -2it} dt and tail_l1 = int_Y^inf |w| dt.
    Models z past the grid end by its two-term asymptotic form, solves
    the resulting 2x2 systems, and reports a residual bound plus the
    conjugation defect (exactly zero in exact arithmetic for real w).
    """
    if tail_l1 >= 0.5:
        raise VolterraError(
            "tail mass %.3g too large to complete; march further" % tail_l1)
    tw = 2.0j
    # forward run: z ~ xi1 + xi2 e^{-2 i t} past the grid end.  The 2x2
    # system below is exact when z is replaced by that model inside the
    # tail integrals; the replacement error per row is at most
    # (L/2) sup_{t>=Y} |z - model| <= (L/2) L z_sup, and the matrix is
    # I + B with row sums of |B| at most L, so the solved coefficients
    # carry a second-order residual L^2 z_sup / (2 (1 - L)).
    Afwd = np.array([[1.0 - G0 / tw, -Gm / tw],
                     [Gp / tw, 1.0 + G0 / tw]])
    bfwd = np.array([1.0 + sol_fwd.P0 / tw, -sol_fwd.P_refl / tw])
    xi1, xi2 = np.linalg.solve(Afwd, bfwd)
    # backward run: z ~ eta2 + eta1 e^{+2 i t}
    Abwd = np.array([[1.0 + G0 / tw, Gp / tw],
                     [-Gm / tw, 1.0 - G0 / tw]])
    bbwd = np.array([1.0 - sol_bwd.P0 / tw, sol_bwd.P_refl / tw])
    eta2, eta1 = np.linalg.solve(Abwd, bbwd)
    size = max(abs(xi1) + abs(xi2), abs(eta1) + abs(eta2))
    z_tail_sup = max(max(sol_fwd.z_max, sol_bwd.z_max) * math.exp(tail_l1),
                     size)
    residual = tail_l1 * tail_l1 * z_tail_sup / (2.0 * (1.0 - tail_l1))
    defect = max(abs(xi1 - eta2.conjugate()), abs(xi2 - eta1.conjugate()))
    return OscillatoryCoeffs(complex(xi1), complex(xi2), complex(eta1),
                             complex(eta2), residual, defect)


def complete_algebraic(sol, W0, W0_abs):
    """Limit of z for the algebraic march; W0 = int_X^inf s g ds.

    With S1(x) = int_a^x s g z and S2(x) = int_a^x s^2 g z, the limit
    satisfies z_inf = (1 + S1(X) - err) / (1 - W0) where
    err = int_X^inf s g (z_inf - z).  The deviation on the tail obeys
    |z_inf - z(x)| <= 2 W0_abs z_sup + |S2(X)|/X exactly, so err is a
    product of small quantities.
    """
    if W0_abs >= 0.5:
        raise VolterraError(
            "tail mass %.3g too large to complete; march further" % W0_abs)
    X = float(sol.grid[-1])
    zhat = (1.0 + sol.S1) / (1.0 - W0)
    drift = abs(sol.S2) / X if X > 0 else 0.0
    z_tail_sup = max(sol.z_max * math.exp(W0_abs), abs(zhat))
    sup_dev = 2.0 * W0_abs * z_tail_sup + drift
    residual = W0_abs * sup_dev / (1.0 - W0_abs)
    return Completion(zhat, residual)
