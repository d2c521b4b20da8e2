"""Protocol scenarios: leakage models, channel model, covariance builders.

Two source-side threat models are covered:

* multimode modulation leakage: the source emits N extra modes that receive
  a correlated copy of the Gaussian modulation (ratio k) and are fully
  available to the eavesdropper;
* premodulation leakage: the signal couples to a vacuum mode on a beam
  splitter of transmittance eta_e before the modulator, and the reflected
  arm is available to the eavesdropper.

Builders return labelled :class:`~cvleak.gaussian.GaussianState` objects in
shot-noise units.  Conventions documented here once:

* all source modes emit minimum-uncertainty states: a mode of signal-quadrature
  variance V has x variance V and p variance 1/V (V = 1 is the vacuum /
  coherent case);
* modulation displaces x of the signal by a Gaussian of variance v_m and p
  independently by a Gaussian of the same variance; the leakage copy is
  +k * displacement in x and -k * displacement in p;
* the channel environment is a thermal state of variance 1 + epsilon: a
  mode of variance V leaves a channel (eta, epsilon) with variance
  eta * V + (1 - eta) * (1 + epsilon).  This is the one place the noise
  convention lives; see :func:`channel_output_variance`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .gaussian import (
    GaussianState,
    apply_beamsplitter,
    apply_squeezer,
    attach_epr,
    attach_vacuum,
    partial_trace,
)

DEFAULT_ATTENUATION_DB_PER_KM = 0.2


class ScenarioError(ValueError):
    """Raised for parameter values outside the declared domains."""


DIRECTION_DR = "DR"
DIRECTION_RR = "RR"
ATTACK_INDIVIDUAL = "individual"
ATTACK_COLLECTIVE = "collective"


@dataclass(frozen=True)
class ChannelModel:
    """Untrusted channel with transmittance eta and excess noise epsilon."""

    eta: float
    epsilon: float = 0.0
    attenuation_db_per_km: float = DEFAULT_ATTENUATION_DB_PER_KM

    def __post_init__(self):
        if not 0.0 < self.eta <= 1.0:
            raise ScenarioError(f"eta must lie in (0, 1], got {self.eta}")
        if self.epsilon < 0.0:
            raise ScenarioError(
                f"epsilon must be >= 0, got {self.epsilon}")
        if self.attenuation_db_per_km <= 0.0:
            raise ScenarioError("attenuation must be positive")


@dataclass(frozen=True)
class MultimodeLeakageScenario:
    """Source with N modulated leakage modes at modulation ratio k.

    v_s is the signal quadrature variance (1 = coherent, < 1 = squeezed),
    v_m the modulation variance, k the ratio of leakage-mode to signal-mode
    modulation, and leakage_variances the intrinsic quadrature variances of
    the leakage modes.
    """

    v_s: float
    v_m: float
    k: float = 0.0
    leakage_variances: tuple[float, ...] = (1.0,)

    def __post_init__(self):
        if not 0.0 < self.v_s <= 1.0:
            raise ScenarioError(f"v_s must lie in (0, 1], got {self.v_s}")
        if self.v_m < 0.0:
            raise ScenarioError(f"v_m must be >= 0, got {self.v_m}")
        if self.k < 0.0:
            raise ScenarioError(f"k must be >= 0, got {self.k}")
        vl = tuple(float(v) for v in self.leakage_variances)
        if any(v <= 0.0 for v in vl):
            raise ScenarioError("leakage variances must be positive")
        object.__setattr__(self, "leakage_variances", vl)

    @property
    def n_modes(self) -> int:
        return len(self.leakage_variances)


@dataclass(frozen=True)
class PremodLeakageScenario:
    """Lossy coupling (eta_e) between source and modulator.

    The side-channel input mode has variance v_es (1 = vacuum); its output
    arm belongs to the eavesdropper.
    """

    v_s: float
    v_m: float
    eta_e: float = 1.0
    v_es: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.v_s <= 1.0:
            raise ScenarioError(f"v_s must lie in (0, 1], got {self.v_s}")
        if self.v_m < 0.0:
            raise ScenarioError(f"v_m must be >= 0, got {self.v_m}")
        if not 0.0 < self.eta_e <= 1.0:
            raise ScenarioError(
                f"eta_e must lie in (0, 1], got {self.eta_e}")
        if self.v_es < 1.0:
            raise ScenarioError(f"v_es must be >= 1, got {self.v_es}")


@dataclass(frozen=True)
class ProtocolChoice:
    """Reconciliation direction, attack class and post-processing efficiency."""

    direction: str = DIRECTION_RR
    attack: str = ATTACK_COLLECTIVE
    beta: float = 1.0

    def __post_init__(self):
        direction = str(self.direction).upper()
        if direction not in (DIRECTION_DR, DIRECTION_RR):
            raise ScenarioError(f"direction must be DR or RR, "
                                f"got {self.direction!r}")
        attack = str(self.attack).lower()
        if attack not in (ATTACK_INDIVIDUAL, ATTACK_COLLECTIVE):
            raise ScenarioError(
                f"attack must be individual or collective, "
                f"got {self.attack!r}")
        if not 0.0 < self.beta <= 1.0:
            raise ScenarioError(f"beta must lie in (0, 1], got {self.beta}")
        object.__setattr__(self, "direction", direction)
        object.__setattr__(self, "attack", attack)


def effective_leakage(scenario: MultimodeLeakageScenario) -> tuple[float, float]:
    """Reduce N leakage modes to an equivalent single mode.

    Because every leakage mode carries the same correlated displacement, the
    symmetric mode combination concentrates all of it: the effective mode
    has variance N / sum(1/V_Ln) (the harmonic mean) and modulation ratio
    k_eff = k sqrt(N).  For identical variances this leaves V_L unchanged.
    """
    n = scenario.n_modes
    if n < 1:
        raise ScenarioError("no leakage modes to reduce")
    v_l_eff = n / sum(1.0 / v for v in scenario.leakage_variances)
    k_eff = scenario.k * math.sqrt(n)
    return v_l_eff, k_eff


def distance_to_transmittance(
        distance_km: float,
        attenuation_db_per_km: float = DEFAULT_ATTENUATION_DB_PER_KM) -> float:
    """Transmittance of a fiber of the given length: 10^(-att * d / 10)."""
    if distance_km < 0.0:
        raise ScenarioError(f"distance must be >= 0, got {distance_km}")
    return 10.0 ** (-attenuation_db_per_km * distance_km / 10.0)


def channel_output_variance(v_in: float, channel: ChannelModel) -> float:
    """Quadrature variance after the untrusted channel.

    Single point of truth for the excess-noise convention: the channel
    couples the mode to a thermal environment of variance 1 + epsilon on a
    beam splitter of transmittance eta, so

        V_out = eta * V_in + (1 - eta) * (1 + epsilon).

    Equivalently, the channel-input-referred excess noise is
    (1 - eta) * epsilon / eta.
    """
    return channel.eta * v_in + (1.0 - channel.eta) * (1.0 + channel.epsilon)


def add_correlated_modulation(state: GaussianState,
                              weights: "list[tuple[str, float, float]]",
                              v_m: float) -> GaussianState:
    """Apply one shared Gaussian displacement to several modes.

    Each entry of ``weights`` is (mode, x_weight, p_weight): the x
    displacement of the mode is x_weight times a shared Gaussian of variance
    v_m, and independently for p.  Adding classical correlated noise is a
    rank-two update of the covariance matrix.
    """
    if v_m < 0.0:
        raise ScenarioError(f"modulation variance must be >= 0, got {v_m}")
    wx = np.zeros(2 * state.n_modes)
    wp = np.zeros(2 * state.n_modes)
    for label, w_x, w_p in weights:
        i = state.index(label)
        wx[2 * i] = w_x
        wp[2 * i + 1] = w_p
    cm = state.cm + v_m * (np.outer(wx, wx) + np.outer(wp, wp))
    return GaussianState(state.mode_labels, cm, state.mean,
                         check_physicality=False)


def apply_noisy_channel(state: GaussianState, mode: str, channel: ChannelModel,
                        purify: bool = False,
                        eve_prefix: str | None = None
                        ) -> tuple[GaussianState, tuple[str, ...]]:
    """Send one mode through the untrusted channel (eta, epsilon).

    Returns the new state and the labels of the added environment modes.

    Without purification the mode variance maps
    V -> eta V + (1 - eta)(1 + epsilon) and its correlations scale by
    sqrt(eta); the environment is discarded.  With ``purify=True`` the
    thermal environment of variance 1 + epsilon is one arm of an EPR pair
    and both arms are kept (they belong to the eavesdropper); a pure-loss
    environment is a single vacuum mode.  At eta = 1 the environment
    decouples and the state is returned unchanged.
    """
    state.index(mode)
    eta, eps = channel.eta, channel.epsilon
    prefix = eve_prefix if eve_prefix is not None else mode
    if not purify:
        n = state.n_modes
        i = state.index(mode)
        s = np.eye(2 * n)
        s[2 * i, 2 * i] = math.sqrt(eta)
        s[2 * i + 1, 2 * i + 1] = math.sqrt(eta)
        cm = s @ state.cm @ s.T
        extra = np.zeros((2 * n, 2 * n))
        extra[2 * i, 2 * i] = (1.0 - eta) * (1.0 + eps)
        extra[2 * i + 1, 2 * i + 1] = (1.0 - eta) * (1.0 + eps)
        return GaussianState(state.mode_labels, cm + extra,
                             check_physicality=False), ()
    if eta == 1.0:
        return state, ()
    if eps == 0.0:
        anc = f"{prefix}_env"
        out = attach_vacuum(state, anc)
        out = apply_beamsplitter(out, mode, anc, eta)
        return out, (anc,)
    anc, twin = f"{prefix}_env", f"{prefix}_env_twin"
    out = attach_epr(state, anc, twin, 1.0 + eps)
    out = apply_beamsplitter(out, mode, anc, eta)
    return out, (anc, twin)


def _squeezed_source(state: GaussianState, label: str,
                     variance: float) -> GaussianState:
    """Attach a minimum-uncertainty mode with x variance ``variance``."""
    out = attach_vacuum(state, label)
    if variance != 1.0:
        out = apply_squeezer(out, label, -0.5 * math.log(variance))
    return out


def build_pm_multimode(scenario: MultimodeLeakageScenario,
                       channel: ChannelModel) -> GaussianState:
    """Prepare-and-measure covariance matrix over modes B, L, E.

    B is Bob's received mode, L the effective leakage mode held by the
    eavesdropper, E the environment mode of the purely lossy channel.  The
    leakage modes are first reduced to the effective single mode.  Only the
    pure-loss analytic track is covered here; excess noise enters through
    the purified entanglement-based models.
    """
    if channel.epsilon != 0.0:
        raise ScenarioError(
            "build_pm_multimode covers the pure-loss track; epsilon must "
            "be 0")
    if scenario.n_modes >= 1:
        v_l, k = effective_leakage(scenario)
    else:
        v_l, k = 1.0, 0.0
    v_s, v_m, eta = scenario.v_s, scenario.v_m, channel.eta
    root_e = math.sqrt(eta * (1.0 - eta))

    def entries(vs, vl, sign):
        # One quadrature sector; sign flips the modulation copy in p.
        v_b = eta * (vs + v_m - 1.0) + 1.0
        v_ll = vl + k * k * v_m
        v_e = (1.0 - eta) * (vs + v_m) + eta
        c_bl = sign * math.sqrt(eta) * k * v_m
        c_be = -root_e * (vs + v_m - 1.0)
        c_le = -sign * k * math.sqrt(1.0 - eta) * v_m
        return v_b, v_ll, v_e, c_bl, c_be, c_le

    cm = np.zeros((6, 6))
    for off, (vs, vl, sign) in enumerate(
            [(v_s, v_l, 1.0), (1.0 / v_s, 1.0 / v_l, -1.0)]):
        v_b, v_ll, v_e, c_bl, c_be, c_le = entries(vs, vl, sign)
        b, l, e = off, 2 + off, 4 + off
        cm[b, b] = v_b
        cm[l, l] = v_ll
        cm[e, e] = v_e
        cm[b, l] = cm[l, b] = c_bl
        cm[b, e] = cm[e, b] = c_be
        cm[l, e] = cm[e, l] = c_le
    return GaussianState(("B", "L", "E"), cm)


def build_pm_multimode_constructive(scenario: MultimodeLeakageScenario,
                                    channel: ChannelModel) -> GaussianState:
    """Same state as :func:`build_pm_multimode`, built step by step.

    Attaches the source modes, applies the shared modulation, and couples
    the signal to the channel vacuum on a beam splitter.  Kept as an
    independent construction for cross-checking the closed-form entries.
    """
    if channel.epsilon != 0.0:
        raise ScenarioError("constructive multimode builder is pure-loss")
    if scenario.n_modes >= 1:
        v_l, k = effective_leakage(scenario)
    else:
        v_l, k = 1.0, 0.0
    state = GaussianState.empty()
    state = _squeezed_source(state, "B", scenario.v_s)
    state = _squeezed_source(state, "L", v_l)
    state = attach_vacuum(state, "E")
    state = add_correlated_modulation(
        state, [("B", 1.0, 1.0), ("L", k, -k)], scenario.v_m)
    state = apply_beamsplitter(state, "B", "E", channel.eta)
    return state


def build_pm_premod(scenario: PremodLeakageScenario,
                    channel: ChannelModel) -> GaussianState:
    """Prepare-and-measure covariance matrix over modes B, ES, E.

    B is Bob's received mode, ES the output of the premodulation channel
    (eavesdropper's), E the environment mode of the purely lossy channel.
    A noisy side-channel input (v_es > 1) is a thermal state, so its
    variance enters both quadrature sectors unchanged.
    """
    if channel.epsilon != 0.0:
        raise ScenarioError(
            "build_pm_premod covers the pure-loss track; epsilon must be 0")
    v_m, eta_e, eta = scenario.v_m, scenario.eta_e, channel.eta
    root_c = math.sqrt(eta * eta_e * (1.0 - eta_e))
    root_e = math.sqrt(eta * (1.0 - eta))
    root_s = math.sqrt((1.0 - eta) * (1.0 - eta_e) * eta_e)

    cm = np.zeros((6, 6))
    for off, (vs, ves) in enumerate(
            [(scenario.v_s, scenario.v_es),
             (1.0 / scenario.v_s, scenario.v_es)]):
        u = eta_e * (vs - 1.0) + (1.0 - eta_e) * (ves - 1.0)
        v_b = eta * (u + v_m) + 1.0
        v_es = eta_e * ves + (1.0 - eta_e) * vs
        v_e = eta + (1.0 - eta) * (v_m + u + 1.0)
        c_bes = (ves - vs) * root_c
        c_be = -(u + v_m) * root_e
        c_ese = (vs - ves) * root_s
        b, es, e = off, 2 + off, 4 + off
        cm[b, b] = v_b
        cm[es, es] = v_es
        cm[e, e] = v_e
        cm[b, es] = cm[es, b] = c_bes
        cm[b, e] = cm[e, b] = c_be
        cm[es, e] = cm[e, es] = c_ese
    return GaussianState(("B", "ES", "E"), cm)


def build_pm_premod_constructive(scenario: PremodLeakageScenario,
                                 channel: ChannelModel) -> GaussianState:
    """Step-by-step oracle for :func:`build_pm_premod`.

    A thermal side-channel input is realized as one arm of an EPR pair whose
    twin is traced out at the end.
    """
    if channel.epsilon != 0.0:
        raise ScenarioError("constructive premod builder is pure-loss")
    state = GaussianState.empty()
    state = _squeezed_source(state, "B", scenario.v_s)
    if scenario.v_es == 1.0:
        state = attach_vacuum(state, "ES")
    else:
        state = attach_epr(state, "ES", "ES_twin", scenario.v_es)
    state = attach_vacuum(state, "E")
    state = apply_beamsplitter(state, "B", "ES", scenario.eta_e)
    state = add_correlated_modulation(state, [("B", 1.0, 1.0)], scenario.v_m)
    state = apply_beamsplitter(state, "B", "E", channel.eta)
    return partial_trace(state, ["B", "ES", "E"])
