"""Gain-condition diagnostics and the exponential ultimate-bound envelope.

Nothing here is asserted during simulation: the numbers are reported so a
run can be judged against the sufficient conditions of the stability
result, which the replication gains do not meet.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np


@dataclass(frozen=True)
class AnalysisParams:
    g_bar: float
    h_bar: float
    xd_bar: float
    xd_dot_bar: float
    theta_bar: float
    N: int
    k1: float
    k2: float
    k3: float
    gamma: Union[float, np.ndarray] = 2.0
    eps1: float = 0.1
    lambda4: float = 0.01
    eps_bar: float = 1.0  # assumed reconstruction-error bound, not knowable


def rayleigh_bounds(gamma: Union[float, np.ndarray]) -> tuple[float, float]:
    """``(lambda1, lambda2)`` bracketing ``V = z^T blkdiag(I, I, Gamma^-1) z / 2``."""
    if np.ndim(gamma) == 0:
        eig = np.array([float(gamma)])
    else:
        gm = np.asarray(gamma, dtype=float)
        if gm.ndim != 2 or gm.shape[0] != gm.shape[1] or not np.allclose(gm, gm.T):
            raise ValueError("gamma must be a symmetric square matrix")
        eig = np.linalg.eigvalsh(gm)
    if eig.min() <= 0:
        raise ValueError("gamma must be positive definite")
    inv = 1.0 / eig
    return 0.5 * min(1.0, float(inv.min())), 0.5 * max(1.0, float(inv.max()))


@dataclass
class Condition:
    name: str
    value: float
    threshold: float
    passed: bool

    @property
    def margin(self) -> float:
        return self.value - self.threshold


@dataclass
class GainReport:
    conditions: list[Condition]
    lambda3: float
    lambda3_terms: tuple[float, float, float]
    notes: list[str] = field(default_factory=list)

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.conditions)

    @property
    def verdict(self) -> str:
        return "PASS" if self.all_passed else "FAIL"

    def format_table(self) -> str:
        lines = [f"{'condition':<30}{'value':>14}{'required >':>16}{'margin':>16}  status"]
        for c in self.conditions:
            lines.append(
                f"{c.name:<30}{c.value:>14.6g}{c.threshold:>16.6g}{c.margin:>16.6g}  "
                f"{'PASS' if c.passed else 'FAILED'}"
            )
        t = self.lambda3_terms
        lines.append(f"lambda3 = min({t[0]:.6g}, {t[1]:.6g}, {t[2]:.6g}) = {self.lambda3:.6g}"
                     + ("" if self.lambda3 > 0 else "  (nonpositive)"))
        lines.extend(self.notes)
        lines.append(f"verdict: {self.verdict}")
        return "\n".join(lines)


def k1_threshold(g_bar: float, N: int, eps1: float) -> float:
    return 2.0 + (N**3 + N + eps1) / (g_bar * N)


def k2_threshold(g_bar: float, k1: float) -> float:
    return 4.0 * k1 * g_bar + 2.0 * g_bar**2 * (k1**4 + k1**2 + 1.0)


def lambda3_terms(params: AnalysisParams) -> tuple[float, float, float]:
    g, N, k1, k2 = params.g_bar, params.N, params.k1, params.k2
    t1 = 0.5 * k1 * g * N - g * N - 0.5 * N**3 - 0.5 * N - 0.5 * params.eps1
    t2 = (0.25 * k2 - k1 * g - 0.5 * k1**2 * g**2 - 0.5 * g**2 - 0.5 * k1**4 * g**2)
    return t1, t2, 0.5 * params.k3


def check_gain_conditions(params: AnalysisParams) -> GainReport:
    p = params
    conds = [
        Condition("eps1 > 0", p.eps1, 0.0, p.eps1 > 0),
        Condition("k1 > 2 + (N^3+N+eps1)/(g_bar N)", p.k1, k1_threshold(p.g_bar, p.N, p.eps1),
                  p.k1 > k1_threshold(p.g_bar, p.N, p.eps1)),
        Condition("k2 > 4k1 g_bar + 2g_bar^2(...)", p.k2, k2_threshold(p.g_bar, p.k1),
                  p.k2 > k2_threshold(p.g_bar, p.k1)),
        Condition("k3 > 0", p.k3, 0.0, p.k3 > 0),
    ]
    terms = lambda3_terms(p)
    lam3 = min(terms)
    notes = [
        "radii of the stabilizing sets D and S depend on the unknown bounding "
        "function rho and are not computed",
    ]
    if lam3 <= p.lambda4:
        notes.append(f"lambda3 <= lambda4 = {p.lambda4:g}: the ultimate bound is vacuous")
    return GainReport(conds, lam3, terms, notes)


@dataclass
class UltimateBound:
    upsilon: float
    radius: float
    vacuous: bool


def upsilon(params: AnalysisParams) -> float:
    p = params
    return (p.eps_bar**2 / p.k2
            + p.xd_dot_bar**2 / (2.0 * p.g_bar * p.N)
            + p.h_bar**2 / (2.0 * p.eps1)
            + 0.5 * (2 * p.N + 1) ** 2 * p.k3 * p.theta_bar**2 * p.N)


def ultimate_bound(params: AnalysisParams, lambda1: float, lambda2: float, lambda3: float) -> UltimateBound:
    ups = upsilon(params)
    radius = float(np.sqrt(lambda2 * ups / (lambda1 * params.lambda4)))
    return UltimateBound(ups, radius, vacuous=not params.lambda4 < lambda3)


def theorem_envelope(lambda1, lambda2, lambda4, ups, z0_norm, elapsed):
    """Upper bound on ``|z(t)|`` after ``elapsed = t - t0`` seconds."""
    floor = ups / lambda4
    decay = np.exp(-(lambda4 / lambda2) * np.asarray(elapsed, dtype=float))
    return np.sqrt((lambda2 / lambda1) * (floor + decay * (z0_norm**2 - floor)))
