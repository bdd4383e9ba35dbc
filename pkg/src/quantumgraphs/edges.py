"""Per-edge fundamental solutions and their endpoint data.

C(lam, .) and S(lam, .) solve -y'' + V y = lam y with C(0) = 1, C'(0) = 0 and
S(0) = 0, S'(0) = 1.  Both are entire functions of lam; every quantity here is
evaluated through them (never through sqrt(lam) branch cuts or 1/sin poles),
so negative and complex lam need no special casing and only the classic DtN
block can ever be singular.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .exceptions import DirichletSingularityError
from .potentials import Potential, SampledPotential, ZERO, is_closed_form

_SERIES_CUT = 1e-4

# dtn_block refuses when |S_l| < DTN_REFUSE * (1 + |lam|) * l; conditioning of
# the 1/S division is lost below that.
DTN_REFUSE = 1e-8


def _cs_kernel(z):
    """cos(sqrt(z)) and sin(sqrt(z))/sqrt(z) as entire functions of z.

    Scalar z, real or complex.  A power series takes over near z = 0 where the
    closed forms lose digits.
    """
    if isinstance(z, complex):
        if abs(z) < _SERIES_CUT:
            return _cs_series(z)
        w = z ** 0.5
        import cmath
        return cmath.cos(w), cmath.sin(w) / w
    z = float(z)
    if abs(z) < _SERIES_CUT:
        return _cs_series(z)
    if z > 0:
        w = math.sqrt(z)
        return math.cos(w), math.sin(w) / w
    w = math.sqrt(-z)
    return math.cosh(w), math.sinh(w) / w


def _cs_series(z):
    # Truncation error ~ |z|^5 / 10! < 3e-27 at the cutover.
    c = 1 + z * (-1 / 2 + z * (1 / 24 + z * (-1 / 720 + z / 40320)))
    s = 1 + z * (-1 / 6 + z * (1 / 120 + z * (-1 / 5040 + z / 362880)))
    return c, s


def _cs_kernel_arr(z: np.ndarray):
    """Vectorized kernel for real arrays z."""
    z = np.asarray(z, dtype=float)
    c = np.empty_like(z)
    s = np.empty_like(z)
    small = np.abs(z) < _SERIES_CUT
    pos = (z >= _SERIES_CUT)
    neg = (z <= -_SERIES_CUT)
    if small.any():
        zz = z[small]
        c[small] = 1 + zz * (-1 / 2 + zz * (1 / 24 + zz * (-1 / 720 + zz / 40320)))
        s[small] = 1 + zz * (-1 / 6 + zz * (1 / 120 + zz * (-1 / 5040 + zz / 362880)))
    if pos.any():
        w = np.sqrt(z[pos])
        c[pos] = np.cos(w)
        s[pos] = np.sin(w) / w
    if neg.any():
        w = np.sqrt(-z[neg])
        c[neg] = np.cosh(w)
        s[neg] = np.sinh(w) / w
    return c, s


@dataclass(frozen=True)
class EdgeBasis:
    """Endpoint data of the fundamental pair at a fixed (lam, edge)."""

    lam: float | complex
    length: float
    C: float | complex
    S: float | complex
    Cp: float | complex
    Sp: float | complex

    def wronskian(self) -> float | complex:
        return self.C * self.Sp - self.Cp * self.S

    def as_matrix(self) -> np.ndarray:
        """Transfer matrix [[C, S], [C', S']] at x = length."""
        return np.array([[self.C, self.S], [self.Cp, self.Sp]])


def _piece_transfer(mu, delta):
    """Transfer matrix over a constant-potential piece: mu = lam - V, width delta."""
    c, s = _cs_kernel(mu * delta * delta)
    sd = delta * s
    return c, sd, -mu * sd, c  # C, S, Cp, Sp over the piece


def propagator(lam, potential: Potential, x: float) -> np.ndarray:
    """Fundamental matrix [[C(x), S(x)], [C'(x), S'(x)]] on [0, x]."""
    if isinstance(potential, SampledPotential):
        return _sampled_propagator(lam, potential, [float(x)])[0]
    M = np.eye(2, dtype=complex if isinstance(lam, complex) else float)
    for x0, x1, v in potential.pieces(float(x)):
        if x1 <= x0:
            continue
        hi = min(x1, float(x))
        if hi <= x0:
            break
        c, sd, cp, sp = _piece_transfer(lam - v, hi - x0)
        M = np.array([[c, sd], [cp, sp]]) @ M
        if hi >= float(x):
            break
    return M


def _sampled_propagator(lam, potential: SampledPotential, xs):
    """Fundamental matrices at the points xs, by adaptive integration."""
    is_c = isinstance(lam, complex)

    def rhs(t, y):
        q = potential(t) - lam
        return [y[1], q * y[0], y[3], q * y[2]]

    y0 = np.array([1.0, 0.0, 0.0, 1.0], dtype=complex if is_c else float)
    xs = np.asarray(xs, dtype=float)
    order = np.argsort(xs)
    sol = solve_ivp(rhs, (0.0, float(xs.max())), y0, method="RK45",
                    rtol=1e-12, atol=1e-12, t_eval=xs[order], dense_output=False)
    out = np.empty((len(xs), 2, 2), dtype=y0.dtype)
    for k, idx in enumerate(order):
        C, Cp, S, Sp = sol.y[:, k]
        out[idx] = [[C, S], [Cp, Sp]]
    return out


def cs_values(lam, length: float, potential: Potential = ZERO) -> EdgeBasis:
    """Fundamental-pair endpoint data for one edge at spectral parameter lam."""
    M = propagator(lam, potential, float(length))
    return EdgeBasis(lam=lam, length=float(length),
                     C=M[0, 0], S=M[0, 1], Cp=M[1, 0], Sp=M[1, 1])


def cs_profile(lam, length: float, potential: Potential, xs) -> tuple[np.ndarray, ...]:
    """Arrays (C, S, C', S') sampled at the points xs in [0, length].

    Used for dot placement, eigenfunction sampling, and residual checks.
    """
    xs = np.asarray(xs, dtype=float)
    if isinstance(potential, SampledPotential):
        mats = _sampled_propagator(lam, potential, xs)
        return mats[:, 0, 0], mats[:, 0, 1], mats[:, 1, 0], mats[:, 1, 1]

    is_c = isinstance(lam, complex)
    dtype = complex if is_c else float
    C = np.empty(len(xs), dtype=dtype)
    S = np.empty_like(C)
    Cp = np.empty_like(C)
    Sp = np.empty_like(C)
    state = np.eye(2, dtype=dtype)  # fundamental matrix at the piece start
    for x0, x1, v in potential.pieces(float(length)):
        sel = (xs >= x0) & (xs <= x1) if x1 >= length else (xs >= x0) & (xs < x1)
        if sel.any():
            d = xs[sel] - x0
            mu = lam - v
            if is_c:
                kc = np.empty(len(d), dtype=complex)
                ks = np.empty(len(d), dtype=complex)
                for i, di in enumerate(d):
                    kc[i], ks[i] = _cs_kernel(complex(mu) * di * di)
            else:
                kc, ks = _cs_kernel_arr(mu * d * d)
            sd = d * ks
            # columns of T(d) @ state
            C[sel] = kc * state[0, 0] + sd * state[1, 0]
            S[sel] = kc * state[0, 1] + sd * state[1, 1]
            Cp[sel] = -mu * sd * state[0, 0] + kc * state[1, 0]
            Sp[sel] = -mu * sd * state[0, 1] + kc * state[1, 1]
        c, sdl, cp, sp = _piece_transfer(lam - v, x1 - x0)
        state = np.array([[c, sdl], [cp, sp]]) @ state
    return C, S, Cp, Sp


def dirichlet_threshold(lam, length: float) -> float:
    """|S_l| below this is treated as a hit on the edge Dirichlet spectrum."""
    return DTN_REFUSE * (1.0 + abs(lam)) * float(length)


def nearest_dirichlet_estimate(lam, length: float, potential: Potential = ZERO) -> float:
    """One Newton step for the zero of lam -> S(lam, l) starting at lam."""
    h = 1e-6 * (1.0 + abs(lam))
    s0 = cs_values(lam, length, potential).S
    sp = (cs_values(lam + h, length, potential).S
          - cs_values(lam - h, length, potential).S) / (2 * h)
    if sp == 0:
        return float(np.real(lam))
    return float(np.real(lam - s0 / sp))


def dtn_block(lam, length: float, potential: Potential = ZERO) -> np.ndarray:
    """Per-edge Dirichlet-to-Neumann block.

    Maps endpoint values (u(0), u(l)) to inward derivatives (u'(0), -u'(l)).
    With the Wronskian identity the block is (1/S_l) [[-C_l, 1], [1, -Sp_l]];
    it is symmetric for real potentials and undefined on the edge Dirichlet
    spectrum, where S_l = 0.
    """
    eb = cs_values(lam, length, potential)
    if abs(eb.S) < dirichlet_threshold(lam, length):
        raise DirichletSingularityError(
            f"lambda = {lam} is numerically on the Dirichlet spectrum of an edge "
            f"of length {length} (|S| = {abs(eb.S):.3e}); "
            "use the dotted-dtn or intersection backend",
            lam=lam, nearest=nearest_dirichlet_estimate(lam, length, potential))
    return np.array([[-eb.C, 1.0], [1.0, -eb.Sp]]) / eb.S


def edge_trace_subspace(lam, length: float, potential: Potential = ZERO) -> np.ndarray:
    """Trace vectors of the fundamental pair, as a 4 x 2 matrix.

    Rows follow the per-edge endpoint order (value at 0, inward derivative
    at 0, value at l, inward derivative at l); columns are the traces of C
    and S.  Always rank 2, including on the edge Dirichlet spectrum.
    """
    eb = cs_values(lam, length, potential)
    return np.array([
        [1.0, 0.0],
        [0.0, 1.0],
        [eb.C, eb.S],
        [-eb.Cp, -eb.Sp],
    ])


def exp_trace_subspace(lam, length: float) -> np.ndarray:
    """Trace vectors of the oscillatory pair exp(ikx), exp(ik(l-x)).

    Only defined for lam > 0 on potential-free edges; spans the same solution
    space as the fundamental pair, so the assembled zero set is unchanged.
    """
    lam = float(lam)
    if lam <= 0:
        raise ValueError("exponential basis requires lam > 0")
    k = math.sqrt(lam)
    e = complex(math.cos(k * length), math.sin(k * length))
    return np.array([
        [1.0, e],
        [1j * k, -1j * k * e],
        [e, 1.0],
        [-1j * k * e, 1j * k],
    ])
