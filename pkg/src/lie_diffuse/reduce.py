"""Companion reduction of order-m-in-time problems to first-order systems.

The Cauchy problem

    d^m u / dt^m = a_1 D d^{m-1} u + ... + a_m D u + f,
    d^j u / dt^j (0) = g_{j+1},   j = 0..m-1,

with invariant (x-independent) coefficient operators a_i of order at most i
is rewritten through u_j = d^{j-1}/dt^{j-1} Gamma^{m-j} u, where Gamma =
(1 + Laplacian)^{1/2} is the Bessel potential.  The stacked state obeys

    d/dt (u_1, ..., u_m) = B (u_1, ..., u_m) + (0, ..., 0, f),

with Gamma on the superdiagonal of B and last-row blocks
b_i = a_{m-i+1} Gamma^{i-m}, all of order one, so the system is genuinely
first order in time and first order in frequency.

Per representation the blocks are plain matrices, so the system is stepped
with the same exact-exponential / Crank-Nicolson / RK4 formulas as the
scalar evolution module, acting on stacked (m d) x d coefficient blocks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .harmonic import SpectralField
from .symbol import Symbol, bessel_weight
from .evolve import weighted_field


@dataclass
class HigherOrderProblem:
    """Order-m Cauchy data: coefficients a_1..a_m, data g_1..g_m, forcing.

    coeffs[i-1] holds a_i (the operator multiplying d^{m-i} u / dt^{m-i}),
    either a Symbol of order <= i or None for a missing term.
    """

    m: int
    coeffs: list
    data: list
    forcing: object = None
    T: float = 1.0

    def __post_init__(self):
        if self.m < 2:
            raise ValueError("time order m must be at least 2")
        if len(self.coeffs) != self.m:
            raise ValueError(f"need {self.m} coefficient slots, got {len(self.coeffs)}")
        if len(self.data) != self.m:
            raise ValueError(f"need {self.m} data fields, got {len(self.data)}")
        for i, sym in enumerate(self.coeffs, start=1):
            if sym is None:
                continue
            if not isinstance(sym, Symbol):
                raise ValueError(f"coefficient a_{i} is not a symbol")
            if sym.order > i + 1e-12:
                raise ValueError(
                    f"coefficient a_{i} declares order {sym.order}, "
                    f"which exceeds its slot order {i}")
            if not sym.x_independent:
                raise ValueError("reduction supports x-independent coefficients")


@dataclass
class FirstOrderSystem:
    """Companion form of a HigherOrderProblem, per-representation blocks."""

    m: int
    group: str
    two_L: int
    coeffs: list
    initial: list          # stacked u_j(0) = Gamma^{m-j} g_j
    forcing: object = None
    T: float = 1.0
    gamma_kind: str = "elliptic"
    t_independent: bool = True

    def gamma_power(self, rep, power: float) -> np.ndarray:
        return bessel_weight(rep, float(power), self.gamma_kind)

    def block_matrix(self, t: float, rep) -> np.ndarray:
        """The (m d) x (m d) companion matrix at one representation."""
        d = rep.dim
        m = self.m
        B = np.zeros((m * d, m * d), dtype=complex)
        G = self.gamma_power(rep, 1.0)
        for j in range(m - 1):
            B[j * d:(j + 1) * d, (j + 1) * d:(j + 2) * d] = G
        for i in range(m):
            a = self.coeffs[m - i - 1]       # b_{i+1} = a_{m-i} Gamma^{i+1-m}
            if a is None:
                continue
            A = np.asarray(a.evaluator(t, None, rep))
            B[(m - 1) * d:, i * d:(i + 1) * d] = A @ self.gamma_power(rep, i + 1 - m)
        return B

    def forcing_at(self, t: float):
        if self.forcing is None:
            return None
        if isinstance(self.forcing, SpectralField):
            return self.forcing
        return self.forcing(t)


def reduce_to_first_order(p: HigherOrderProblem,
                          gamma_kind: str = "elliptic") -> FirstOrderSystem:
    """Build the companion system, with u_j(0) = Gamma^{m-j} g_j."""
    group, two_L = p.data[0].group, p.data[0].two_L
    for g in p.data:
        if g.group != group or g.two_L != two_L:
            raise ValueError("data fields disagree on group or bandlimit")
    initial = [weighted_field(g, float(p.m - j), gamma_kind)
               for j, g in enumerate(p.data, start=1)]
    t_indep = all(s is None or s.t_independent for s in p.coeffs)
    return FirstOrderSystem(p.m, group, two_L, list(p.coeffs), initial,
                            p.forcing, p.T, gamma_kind, t_indep)


def _stack(sys: FirstOrderSystem, fields, rep) -> np.ndarray:
    return np.concatenate([F[rep] for F in fields], axis=0)


def _unstack(sys: FirstOrderSystem, V: np.ndarray, rep, out_fields):
    d = rep.dim
    for j in range(sys.m):
        out_fields[j].coeffs[rep] = V[j * d:(j + 1) * d]


def solve_reduced(sys: FirstOrderSystem, scheme: str = "auto",
                  dt: float = 1e-3):
    """Integrate the companion system; returns the stacked trajectory.

    Each trajectory entry is a list of m SpectralFields (u_1..u_m).  The
    exact scheme uses the per-representation block exponential (midpoint
    freezing when coefficients depend on t); cn and rk4 mirror the scalar
    steppers on the stacked blocks.
    """
    if scheme == "auto":
        scheme = "exact" if sys.t_independent else "cn"
    if scheme not in ("exact", "cn", "rk4"):
        raise ValueError(f"unknown scheme {scheme!r}")
    if dt > sys.T:
        raise ValueError("dt exceeds the horizon")
    n_steps = max(2, int(round(sys.T / dt)))
    dt = sys.T / n_steps

    m = sys.m
    reps = list(sys.initial[0].coeffs)
    state = {rep: _stack(sys, sys.initial, rep) for rep in reps}

    const_force = sys.forcing is None or isinstance(sys.forcing, SpectralField)
    cache = {}
    if scheme == "exact" and sys.t_independent and const_force:
        for rep in reps:
            cache[rep] = _exact_block(sys, rep, 0.0, dt)

    def forcing_block(t, rep):
        f = sys.forcing_at(t)
        if f is None:
            return None
        d = rep.dim
        F = np.zeros((m * d, d), dtype=complex)
        F[(m - 1) * d:] = f[rep]
        return F

    def snapshot():
        fields = [SpectralField.zeros(sys.group, sys.two_L) for _ in range(m)]
        for rep in reps:
            _unstack(sys, state[rep], rep, fields)
        return fields

    trajectory = [snapshot()]
    for n in range(n_steps):
        t = n * dt
        for rep in reps:
            V = state[rep]
            if scheme == "exact":
                P, Q = cache.get(rep) or _exact_block(sys, rep, t, dt)
                Fm = forcing_block(t + 0.5 * dt, rep)
                V = P @ V if Fm is None else P @ V + Q @ Fm
            elif scheme == "cn":
                tm = t + 0.5 * dt
                B = sys.block_matrix(tm, rep)
                rhs = V + (0.5 * dt) * (B @ V)
                Fm = forcing_block(tm, rep)
                if Fm is not None:
                    rhs = rhs + dt * Fm
                V = np.linalg.solve(np.eye(B.shape[0]) - 0.5 * dt * B, rhs)
            else:
                V = _rk4_block(sys, rep, V, t, dt, forcing_block)
            state[rep] = V
        trajectory.append(snapshot())
    return trajectory


def _exact_block(sys, rep, t, dt):
    B = sys.block_matrix(t + 0.5 * dt, rep)
    n = B.shape[0]
    big = np.zeros((2 * n, 2 * n), dtype=complex)
    big[:n, :n] = dt * B
    big[:n, n:] = dt * np.eye(n)
    E = expm(big)
    return E[:n, :n], E[:n, n:]


def _rk4_block(sys, rep, V, t, dt, forcing_block):
    def rhs(tau, W):
        out = sys.block_matrix(tau, rep) @ W
        F = forcing_block(tau, rep)
        return out + F if F is not None else out

    k1 = rhs(t, V)
    k2 = rhs(t + 0.5 * dt, V + 0.5 * dt * k1)
    k3 = rhs(t + 0.5 * dt, V + 0.5 * dt * k2)
    k4 = rhs(t + dt, V + dt * k3)
    return V + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def extract_u(sys: FirstOrderSystem, trajectory):
    """Recover u = Gamma^{-(m-1)} u_1 along a stacked trajectory."""
    return [weighted_field(stacked[0], float(1 - sys.m), sys.gamma_kind)
            for stacked in trajectory]
