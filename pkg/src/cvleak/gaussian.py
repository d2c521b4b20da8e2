"""Gaussian-state covariance algebra in shot-noise units.

All states are zero-mean Gaussian states of N optical modes, described by a
2N x 2N covariance matrix over the quadrature vector (x1, p1, ..., xN, pN).
The shot-noise unit (SNU) convention is used throughout: the vacuum state has
quadrature variance 1, so physical covariance matrices have all symplectic
eigenvalues >= 1.

Modes are addressed by opaque string labels rather than indices, so protocol
code can say "condition on mode E" without tracking positions.  Every
operation returns a new state; nothing is mutated in place, which makes the
functions safe to call concurrently.
"""

from __future__ import annotations

import math
from dataclasses import InitVar, dataclass, field

import numpy as np

# Tolerance policy: physicality checks at 1e-9, equality assertions in tests
# at 1e-8, serialization round-trips at 1e-12.
SYMMETRY_RTOL = 1e-12
PHYSICALITY_ATOL = 1e-9
ENTROPY_NU_CLAMP = 1e-6


class ModeError(ValueError):
    """Raised for unknown, duplicate or otherwise invalid mode labels."""


class PhysicalityError(ValueError):
    """Raised when a covariance matrix violates the uncertainty principle."""


def physicality_tolerance(cm: np.ndarray) -> float:
    """How far below 1 a computed symplectic eigenvalue may credibly sit.

    Rounding the entries of a pure two-mode squeezed pair of variance V to
    floating point already perturbs its unit symplectic eigenvalues by
    about eps V^2 (the nu^2 = V^2 - (V^2 - 1) cancellation), so states with
    huge variances cannot be certified tighter than that.  For matrices of
    order unity this reduces to the 1e-9 physicality floor.
    """
    scale = max(1.0, float(np.max(np.abs(cm)))) if cm.size else 1.0
    return max(PHYSICALITY_ATOL, 4.0 * np.finfo(float).eps * scale * scale)


def symplectic_form(n_modes: int) -> np.ndarray:
    """Return the 2N x 2N symplectic form for (x1, p1, ..., xN, pN) ordering.

    Block diagonal with 2x2 blocks [[0, 1], [-1, 0]]; satisfies omega @ omega
    = -identity.
    """
    omega = np.zeros((2 * n_modes, 2 * n_modes))
    for i in range(n_modes):
        omega[2 * i, 2 * i + 1] = 1.0
        omega[2 * i + 1, 2 * i] = -1.0
    return omega


@dataclass(frozen=True)
class GaussianState:
    """Zero-mean Gaussian state over labelled modes.

    Attributes
    ----------
    mode_labels : tuple of str
        Unique identifiers, one per mode, in covariance-matrix order.
    cm : ndarray
        Symmetric 2N x 2N covariance matrix in SNU, quadrature ordering
        (x1, p1, ..., xN, pN).
    mean : ndarray
        Length-2N mean vector.  Always zero in this package; carried for
        generality.

    Direct construction verifies the uncertainty principle.  The operations
    in this module skip that eigenvalue check on their outputs
    (check_physicality=False): symplectic maps, mode attachment and
    Gaussian conditioning preserve physicality exactly, and rechecking
    after every step dominated the runtime.  The preservation itself is
    covered by the randomized property tests.
    """

    mode_labels: tuple[str, ...]
    cm: np.ndarray
    mean: np.ndarray = field(default=None)  # type: ignore[assignment]
    check_physicality: InitVar[bool] = True

    def __post_init__(self, check_physicality: bool = True):
        labels = tuple(str(l) for l in self.mode_labels)
        n = len(labels)
        if len(set(labels)) != n:
            raise ModeError(f"duplicate mode labels in {labels}")
        cm = np.array(self.cm, dtype=float)
        if cm.shape != (2 * n, 2 * n):
            raise ModeError(
                f"covariance matrix shape {cm.shape} does not match "
                f"{n} modes")
        if n > 0:
            scale = max(1.0, float(np.max(np.abs(cm))))
            if np.max(np.abs(cm - cm.T)) > SYMMETRY_RTOL * scale:
                raise PhysicalityError("covariance matrix is not symmetric")
        cm = 0.5 * (cm + cm.T)  # remove roundoff asymmetry
        mean = self.mean
        if mean is None:
            mean = np.zeros(2 * n)
        mean = np.array(mean, dtype=float)
        if mean.shape != (2 * n,):
            raise ModeError("mean vector length does not match mode count")
        cm.flags.writeable = False
        mean.flags.writeable = False
        object.__setattr__(self, "mode_labels", labels)
        object.__setattr__(self, "cm", cm)
        object.__setattr__(self, "mean", mean)
        if n > 0 and check_physicality:
            nu_min = np.min(_symplectic_eigenvalues(cm))
            if nu_min < 1.0 - physicality_tolerance(cm):
                raise PhysicalityError(
                    f"uncertainty principle violated: min symplectic "
                    f"eigenvalue {nu_min!r} < 1")

    @classmethod
    def empty(cls) -> "GaussianState":
        return cls(mode_labels=(), cm=np.zeros((0, 0)), mean=np.zeros(0))

    @property
    def n_modes(self) -> int:
        return len(self.mode_labels)

    def index(self, label: str) -> int:
        try:
            return self.mode_labels.index(label)
        except ValueError:
            raise ModeError(f"unknown mode {label!r}; "
                            f"present: {self.mode_labels}") from None

    def has_mode(self, label: str) -> bool:
        return label in self.mode_labels

    def block(self, label_row: str, label_col: str) -> np.ndarray:
        """2x2 covariance block between two modes (equal labels: variance)."""
        i, j = 2 * self.index(label_row), 2 * self.index(label_col)
        return self.cm[i:i + 2, j:j + 2].copy()

    def variance(self, label: str, quadrature: str) -> float:
        i = 2 * self.index(label) + _quad_offset(quadrature)
        return float(self.cm[i, i])


def _quad_offset(quadrature: str) -> int:
    if quadrature == "x":
        return 0
    if quadrature == "p":
        return 1
    raise ValueError(f"quadrature must be 'x' or 'p', got {quadrature!r}")


def attach_vacuum(state: GaussianState, label: str) -> GaussianState:
    """Append one vacuum mode (unit variances, no correlations)."""
    if state.has_mode(label):
        raise ModeError(f"mode {label!r} already present")
    n = state.n_modes
    cm = np.zeros((2 * n + 2, 2 * n + 2))
    cm[:2 * n, :2 * n] = state.cm
    cm[2 * n, 2 * n] = 1.0
    cm[2 * n + 1, 2 * n + 1] = 1.0
    return GaussianState(state.mode_labels + (label,), cm,
                         check_physicality=False)


def attach_epr(state: GaussianState, label_a: str, label_b: str,
               variance: float) -> GaussianState:
    """Append a two-mode squeezed vacuum (EPR) pair of variance V >= 1.

    Both new modes get diagonal variance V; the x quadratures are correlated
    by +sqrt(V^2 - 1) and the p quadratures by -sqrt(V^2 - 1), so the pair is
    pure for every V.
    """
    if variance < 1.0:
        raise ValueError(f"EPR variance must be >= 1, got {variance}")
    for label in (label_a, label_b):
        if state.has_mode(label):
            raise ModeError(f"mode {label!r} already present")
    if label_a == label_b:
        raise ModeError("EPR labels must differ")
    c = math.sqrt(variance * variance - 1.0)
    n = state.n_modes
    cm = np.zeros((2 * n + 4, 2 * n + 4))
    cm[:2 * n, :2 * n] = state.cm
    block = np.array([
        [variance, 0.0, c, 0.0],
        [0.0, variance, 0.0, -c],
        [c, 0.0, variance, 0.0],
        [0.0, -c, 0.0, variance],
    ])
    cm[2 * n:, 2 * n:] = block
    return GaussianState(state.mode_labels + (label_a, label_b), cm,
                         check_physicality=False)


def apply_beamsplitter(state: GaussianState, mode_a: str, mode_b: str,
                       transmittance: float) -> GaussianState:
    """Mix two modes on a beam splitter of transmittance T in [0, 1].

    Input-output relation on the quadrature vectors (v_a, v_b):

        v_a ->  sqrt(T) v_a + sqrt(1-T) v_b
        v_b -> -sqrt(1-T) v_a + sqrt(T) v_b

    applied identically to x and p.  The covariance matrix maps to
    S @ cm @ S.T; all other modes are untouched.
    """
    if not 0.0 <= transmittance <= 1.0:
        raise ValueError(f"transmittance must lie in [0, 1], "
                         f"got {transmittance}")
    ia, ib = state.index(mode_a), state.index(mode_b)
    if ia == ib:
        raise ModeError("beam splitter needs two distinct modes")
    t = math.sqrt(transmittance)
    rf = math.sqrt(1.0 - transmittance)
    s = np.eye(2 * state.n_modes)
    for q in range(2):
        a, b = 2 * ia + q, 2 * ib + q
        s[a, a] = t
        s[a, b] = rf
        s[b, a] = -rf
        s[b, b] = t
    return GaussianState(state.mode_labels, s @ state.cm @ s.T,
                         check_physicality=False)


def apply_squeezer(state: GaussianState, mode: str, r: float) -> GaussianState:
    """Single-mode squeezer: x variance scales by e^{-2r}, p by e^{+2r}."""
    if not math.isfinite(r):
        raise ValueError(f"squeezing parameter must be finite, got {r}")
    i = state.index(mode)
    s = np.eye(2 * state.n_modes)
    s[2 * i, 2 * i] = math.exp(-r)
    s[2 * i + 1, 2 * i + 1] = math.exp(r)
    return GaussianState(state.mode_labels, s @ state.cm @ s.T,
                         check_physicality=False)


def _partition(cm: np.ndarray, idx: int):
    """Split cm into (rest block, cross block, measured 2x2 block)."""
    keep = [j for j in range(cm.shape[0]) if j not in (2 * idx, 2 * idx + 1)]
    meas = [2 * idx, 2 * idx + 1]
    gamma_rest = cm[np.ix_(keep, keep)]
    sigma = cm[np.ix_(keep, meas)]
    gamma_meas = cm[np.ix_(meas, meas)]
    return gamma_rest, sigma, gamma_meas


def _homodyne_matrix(gamma_rest, sigma, gamma_meas, quad_offset):
    """Conditional covariance after a homodyne of one quadrature.

    Implements gamma_rest - sigma (X gamma_meas X)^MP sigma^T where X picks
    the measured quadrature.  The Moore-Penrose pseudoinverse of the
    rank-one selection is diag(1/v, 0) for measured variance v > 0 and the
    zero matrix for v == 0, in which case the remainder is returned
    unchanged.  Negative v means a malformed input.
    """
    v = float(gamma_meas[quad_offset, quad_offset])
    if v < 0.0:
        raise PhysicalityError(
            f"measured quadrature variance {v} is negative")
    if v == 0.0:
        return gamma_rest.copy()
    c = sigma[:, quad_offset]
    return gamma_rest - np.outer(c, c) / v


def homodyne_condition(state: GaussianState, mode: str,
                       quadrature: str) -> GaussianState:
    """State of the remaining modes after a homodyne detection of one mode.

    The measured mode is removed; the conditional covariance of the rest is
    the Schur-type complement with the Moore-Penrose pseudoinverse of the
    single-quadrature selection.  For zero-mean states the conditional
    covariance does not depend on the measurement outcome.
    """
    idx = state.index(mode)
    off = _quad_offset(quadrature)
    gamma_rest, sigma, gamma_meas = _partition(state.cm, idx)
    cond = _homodyne_matrix(gamma_rest, sigma, gamma_meas, off)
    labels = tuple(l for l in state.mode_labels if l != mode)
    return GaussianState(labels, cond, check_physicality=False)


def heterodyne_condition(state: GaussianState, mode: str) -> GaussianState:
    """State of the remaining modes after a heterodyne detection of one mode.

    Conditional covariance gamma_rest - sigma (gamma_meas + I)^-1 sigma^T;
    the measured mode is removed.
    """
    idx = state.index(mode)
    gamma_rest, sigma, gamma_meas = _partition(state.cm, idx)
    cond = gamma_rest - sigma @ np.linalg.inv(gamma_meas + np.eye(2)) @ sigma.T
    labels = tuple(l for l in state.mode_labels if l != mode)
    return GaussianState(labels, cond, check_physicality=False)


def _joint_condition(state: GaussianState, modes, measured_rows,
                     regularize: bool) -> GaussianState:
    """Condition on several modes with a single Schur complement.

    Mathematically identical to conditioning the modes one at a time, but
    numerically far better behaved when the measured modes carry variances
    many orders above the remainder: sequential conditioning pushes the
    huge entries through intermediate states with shrinking pivots, while
    the joint complement never forms large intermediates on the kept side.
    """
    for mode in modes:
        state.index(mode)
    if len(set(modes)) != len(modes):
        raise ModeError("duplicate modes in joint conditioning")
    keep_rows = [i for i in range(2 * state.n_modes)
                 if (state.mode_labels[i // 2] not in modes)]
    gamma_rest = state.cm[np.ix_(keep_rows, keep_rows)]
    sigma = state.cm[np.ix_(keep_rows, measured_rows)]
    block = state.cm[np.ix_(measured_rows, measured_rows)]
    if regularize:
        block = block + np.eye(len(measured_rows))
    update = sigma @ np.linalg.solve(block, sigma.T)
    cond = gamma_rest - 0.5 * (update + update.T)
    labels = tuple(l for l in state.mode_labels if l not in modes)
    return GaussianState(labels, cond, check_physicality=False)


def joint_homodyne_condition(state: GaussianState, modes,
                             quadrature: str) -> GaussianState:
    """Condition on one quadrature of each listed mode, jointly."""
    modes = list(modes)
    off = _quad_offset(quadrature)
    rows = [2 * state.index(m) + off for m in modes]
    return _joint_condition(state, modes, rows, regularize=False)


def joint_heterodyne_condition(state: GaussianState, modes) -> GaussianState:
    """Condition on heterodyne outcomes of all listed modes, jointly."""
    modes = list(modes)
    rows: list[int] = []
    for mode in modes:
        i = state.index(mode)
        rows.extend([2 * i, 2 * i + 1])
    return _joint_condition(state, modes, rows, regularize=True)


def partial_trace(state: GaussianState,
                  keep: "list[str] | tuple[str, ...]") -> GaussianState:
    """Reduced state over the requested modes, in the requested order."""
    keep = list(keep)
    if len(set(keep)) != len(keep):
        raise ModeError("duplicate labels in partial_trace request")
    rows = []
    for label in keep:
        i = state.index(label)
        rows.extend([2 * i, 2 * i + 1])
    cm = state.cm[np.ix_(rows, rows)]
    return GaussianState(tuple(keep), cm, check_physicality=False)


def _symplectic_eigenvalues(cm: np.ndarray) -> np.ndarray:
    """Symplectic spectrum of a covariance matrix (N values, descending).

    The eigenvalues of i Omega cm come in pairs +/- nu_i; their absolute
    values are deduplicated by sorting and taking every second entry.
    For positive-definite cm the spectrum is computed through a Cholesky
    factor: i L^T Omega L is Hermitian, so a backward-stable symmetric
    eigensolver applies (states mixing strongly squeezed and strongly
    anti-squeezed modes are badly conditioned for the plain nonsymmetric
    route).  Semidefinite inputs fall back to the direct eigenvalues.
    """
    n = cm.shape[0] // 2
    if n == 0:
        return np.zeros(0)
    omega = symplectic_form(n)
    try:
        l_factor = np.linalg.cholesky(cm)
        herm = 1j * (l_factor.T @ omega @ l_factor)
        nus = np.linalg.eigvalsh(herm)
        return nus[n:][::-1].copy()
    except np.linalg.LinAlgError:
        eigs = np.linalg.eigvals(omega @ cm)
        nus = np.sort(np.abs(eigs))
        return nus[::2][::-1].copy()


def symplectic_eigenvalues(state: GaussianState) -> np.ndarray:
    return _symplectic_eigenvalues(state.cm)


def entropy_g(nu: float, nu_tolerance: float = ENTROPY_NU_CLAMP) -> float:
    """Entropy contribution g(nu) of one symplectic eigenvalue, in bits.

    g(nu) = ((nu+1)/2) log2((nu+1)/2) - ((nu-1)/2) log2((nu-1)/2), with
    g(1) = 0.  Values slightly below 1 (down to 1 - nu_tolerance, default
    1e-6) are treated as roundoff and clamped to 1; anything lower is
    rejected as unphysical.  Callers whose states passed through much
    larger intermediate variances may pass a wider tolerance, since
    near-unit eigenvalue pairs split by the square root of the matrix
    perturbation.
    """
    if nu < 1.0 - nu_tolerance:
        raise PhysicalityError(
            f"symplectic eigenvalue {nu} below 1; state is unphysical")
    if nu <= 1.0:
        return 0.0
    a = (nu + 1.0) / 2.0
    b = (nu - 1.0) / 2.0
    return a * math.log2(a) - b * math.log2(b)


def von_neumann_entropy(state: GaussianState,
                        nu_tolerance: float = ENTROPY_NU_CLAMP) -> float:
    """Von Neumann entropy of the state in bits (0 for pure states)."""
    return float(sum(entropy_g(float(nu), nu_tolerance)
                     for nu in symplectic_eigenvalues(state)))


def format_matrix_snapshot(cm: np.ndarray) -> str:
    """Serialize a matrix as plain-text rows of decimal numbers.

    Row i of the output is row i of the matrix in (x1, p1, ..., xN, pN)
    ordering, entries separated by single spaces, formatted with enough
    digits (repr precision) to round-trip within 1e-12.
    """
    cm = np.asarray(cm, dtype=float)
    lines = [" ".join(f"{v:.17g}" for v in row) for row in cm]
    return "\n".join(lines) + "\n"


def parse_matrix_snapshot(text: str) -> np.ndarray:
    rows = [
        [float(tok) for tok in line.split()]
        for line in text.strip().splitlines() if line.strip()
    ]
    if not rows:
        return np.zeros((0, 0))
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise ValueError("ragged matrix snapshot")
    return np.array(rows, dtype=float)
