"""Parameter optimization and security-boundary root finding.

Golden-section search for the unimodal one-dimensional maximizations
(modulation variance, signal squeezing with nested modulation) and interval
bisection for zero crossings (secure distance, maximal tolerable leakage
ratio).  All searches are deterministic for identical inputs.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

from .keyrate import key_rate, key_rate_individual
from .scenarios import (
    ATTACK_INDIVIDUAL,
    ChannelModel,
    MultimodeLeakageScenario,
    ProtocolChoice,
    ScenarioError,
    distance_to_transmittance,
)

VM_BRACKET = (1e-3, 1e3)
VM_TOL = 1e-4
VS_MIN = 1e-3
VS_TOL = 1e-4
DISTANCE_TOL_KM = 0.01
DISTANCE_CAP_KM = 500.0
K_CAP = 100.0
K_TOL = 1e-4
STRONG_MODULATION_VM = 1e6

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class OptimizationResult:
    """Outcome of a one-dimensional search.

    x is the argmax (or root), value the objective there.  converged means
    the bracket was narrowed below tolerance; for root searches it also
    requires a bracketing sign change, so an unbounded boundary (for
    example a rate that stays positive to the probe cap) is reported with
    converged False and x at the cap or infinity.
    """

    x: float
    value: float
    iterations: int
    bracket: tuple[float, float]
    converged: bool


def golden_section_max(f, lo: float, hi: float,
                       tol: float) -> OptimizationResult:
    """Golden-section maximization on [lo, hi] to absolute tolerance tol.

    Assumes a unimodal objective; a monotone objective converges to the
    corresponding bracket edge.
    """
    if not hi > lo:
        raise ValueError("empty bracket")
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    iterations = 0
    while b - a > tol:
        iterations += 1
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return OptimizationResult(x=x, value=f(x), iterations=iterations,
                              bracket=(lo, hi), converged=True)


def bisect_zero(f, lo: float, hi: float, tol: float,
                f_lo: float | None = None,
                f_hi: float | None = None) -> OptimizationResult:
    """Bisection root of f on [lo, hi]; requires f(lo) > 0 > f(hi)."""
    f_lo = f(lo) if f_lo is None else f_lo
    f_hi = f(hi) if f_hi is None else f_hi
    if f_lo <= 0.0 or f_hi >= 0.0:
        raise ValueError(
            f"bisection bracket does not straddle zero: "
            f"f({lo}) = {f_lo}, f({hi}) = {f_hi}")
    iterations = 0
    a, b = lo, hi
    while b - a > tol:
        iterations += 1
        mid = 0.5 * (a + b)
        if f(mid) > 0.0:
            a = mid
        else:
            b = mid
    x = 0.5 * (a + b)
    return OptimizationResult(x=x, value=f(x), iterations=iterations,
                              bracket=(lo, hi), converged=True)


def _with_v_m(scenario, v_m: float):
    return dataclasses.replace(scenario, v_m=v_m)


def _with_v_s(scenario, v_s: float, tie_leakage: bool):
    if isinstance(scenario, MultimodeLeakageScenario) and tie_leakage:
        return dataclasses.replace(
            scenario, v_s=v_s,
            leakage_variances=(v_s,) * scenario.n_modes)
    return dataclasses.replace(scenario, v_s=v_s)


def _leakage_tied(scenario) -> bool:
    if not isinstance(scenario, MultimodeLeakageScenario):
        return False
    return all(v == scenario.v_s for v in scenario.leakage_variances)


def optimize_vm(scenario, channel: ChannelModel, protocol: ProtocolChoice,
                bracket: tuple[float, float] = VM_BRACKET,
                tol: float = VM_TOL) -> OptimizationResult:
    """Maximize the key rate over the modulation variance.

    With perfect post-processing the collective rate grows monotonically
    in v_m and the search lands at the upper bracket edge; any beta < 1
    produces an interior optimum.  An everywhere-negative objective still
    converges and reports the (negative) best value.
    """
    def objective(v_m):
        return key_rate(_with_v_m(scenario, v_m), channel, protocol).rate

    return golden_section_max(objective, bracket[0], bracket[1], tol)


def optimize_squeezing(scenario, channel: ChannelModel,
                       protocol: ProtocolChoice,
                       v_bracket: tuple[float, float] = (VS_MIN, 1.0),
                       tol: float = VS_TOL,
                       tie_leakage: bool | None = None,
                       strong_modulation: bool = False) -> OptimizationResult:
    """Maximize the key rate over signal squeezing.

    The inner modulation variance is re-optimized at every candidate v_s
    (joint optimization), except on the strong-modulation track where the
    individual reverse-reconciliation rate is evaluated at a fixed huge
    modulation instead; on a purely lossy channel that track peaks at
    v = sqrt(k^2 / (1 + k^2)).

    tie_leakage (default: inferred from the template) keeps the leakage
    variances equal to the optimized signal variance, matching a source
    that radiates identical states in every mode.
    """
    if tie_leakage is None:
        tie_leakage = _leakage_tied(scenario)

    if strong_modulation:
        def objective(v_s):
            sc = _with_v_s(scenario, v_s, tie_leakage)
            sc = _with_v_m(sc, STRONG_MODULATION_VM)
            return key_rate_individual(sc, channel, protocol.direction).rate
    else:
        def objective(v_s):
            sc = _with_v_s(scenario, v_s, tie_leakage)
            return optimize_vm(sc, channel, protocol).value

    return golden_section_max(objective, v_bracket[0], v_bracket[1], tol)


def _optimized_rate(scenario, channel, protocol, optimize_v_s,
                    tie_leakage) -> float:
    if optimize_v_s:
        return optimize_squeezing(scenario, channel, protocol,
                                  tie_leakage=tie_leakage).value
    return optimize_vm(scenario, channel, protocol).value


def secure_distance(scenario, protocol: ProtocolChoice,
                    channel_template: ChannelModel,
                    optimize_v_s: bool = False,
                    tie_leakage: bool | None = None,
                    tol_km: float = DISTANCE_TOL_KM,
                    d_max: float = DISTANCE_CAP_KM) -> OptimizationResult:
    """Longest fiber length with a positive (optimized) key rate.

    The channel transmittance follows from the template's attenuation; its
    excess noise is held fixed.  Returns 0 km when the protocol is already
    insecure at contact, and the probe cap with converged False when the
    rate is still positive at d_max (the true distance is then only lower
    bounded).
    """
    if tie_leakage is None:
        tie_leakage = _leakage_tied(scenario)
    att = channel_template.attenuation_db_per_km

    def rate_at(d_km):
        eta = distance_to_transmittance(d_km, att)
        ch = dataclasses.replace(channel_template, eta=eta)
        return _optimized_rate(scenario, ch, protocol, optimize_v_s,
                               tie_leakage)

    r0 = rate_at(0.0)
    if r0 <= 0.0:
        return OptimizationResult(x=0.0, value=r0, iterations=0,
                                  bracket=(0.0, 0.0), converged=True)
    lo, hi = 0.0, 2.0
    r_hi = rate_at(hi)
    iterations = 0
    while r_hi > 0.0 and hi < d_max:
        lo, hi = hi, min(2.0 * hi, d_max)
        r_hi = rate_at(hi)
        iterations += 1
    if r_hi > 0.0:
        return OptimizationResult(x=hi, value=r_hi, iterations=iterations,
                                  bracket=(lo, hi), converged=False)
    result = bisect_zero(rate_at, lo, hi, tol_km, f_hi=r_hi)
    return dataclasses.replace(result, iterations=result.iterations
                               + iterations)


def max_tolerable_k(scenario, channel: ChannelModel,
                    protocol: ProtocolChoice,
                    tol: float = K_TOL, k_cap: float = K_CAP,
                    optimize_v_m: bool = True,
                    strong_modulation: bool = False) -> OptimizationResult:
    """Zero crossing of the key rate in the leakage ratio k.

    Requires a positive rate at k = 0.  On the strong-modulation pure-loss
    track the crossing matches the closed form
    sqrt(v (eta - 2 + v - eta v) / ((eta - 1)(v - 1)^2)).  When the rate
    stays positive all the way to k_cap the leakage tolerance is
    effectively unbounded, reported as x = inf with converged False.
    """
    if not isinstance(scenario, MultimodeLeakageScenario):
        raise ScenarioError("leakage-ratio search needs a multimode "
                            "scenario")

    def rate_at(k):
        sc = dataclasses.replace(scenario, k=k)
        if strong_modulation:
            sc = _with_v_m(sc, STRONG_MODULATION_VM)
            return key_rate_individual(sc, channel,
                                       protocol.direction).rate
        if optimize_v_m and protocol.attack != ATTACK_INDIVIDUAL:
            return optimize_vm(sc, channel, protocol).value
        return key_rate(sc, channel, protocol).rate

    r0 = rate_at(0.0)
    if r0 <= 0.0:
        raise ScenarioError(
            f"rate at k = 0 is {r0}; no positive region to bound")
    lo, hi = 0.0, 0.5
    r_hi = rate_at(hi)
    iterations = 0
    while r_hi > 0.0 and hi < k_cap:
        lo, hi = hi, min(2.0 * hi, k_cap)
        r_hi = rate_at(hi)
        iterations += 1
    if r_hi > 0.0:
        return OptimizationResult(x=math.inf, value=r_hi,
                                  iterations=iterations,
                                  bracket=(lo, hi), converged=False)
    result = bisect_zero(rate_at, lo, hi, tol, f_hi=r_hi)
    return dataclasses.replace(result, iterations=result.iterations
                               + iterations)
