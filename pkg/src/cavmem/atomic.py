"""Hyperfine + Zeeman structure of the Rb-87 ladder manifolds.

Exact diagonalization of H = H_hfs + H_Zeeman in the |m_j, m_i> product basis
for the 5S1/2, 5P3/2 and 5D5/2 terms, magnetic-level tracking across field
values, and dipole transition enumeration (one- and two-photon) with relative
strengths from Clebsch-Gordan algebra on the field-dressed eigenvectors.

Energies are in MHz relative to each manifold's zero-field hyperfine centroid;
detunings between manifolds are in GHz relative to the zero-field line
centroid of the manifold pair.  All functions are pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import linear_sum_assignment

from .constants import AtomConstants, default_constants
from .errors import DomainError, NumericalError, StructuralError

__all__ = [
    "ManifoldSpec", "ZeemanState", "TransitionLine", "TwoPhotonLine",
    "POLARIZATIONS", "manifold_spec", "all_manifolds", "basis_labels",
    "clebsch_gordan", "build_hamiltonian", "diagonalize_manifold",
    "breit_rabi_curve", "transition_lines", "dipole_strength_sums",
    "two_photon_lines", "group_two_photon_lines",
]

POLARIZATIONS = ("sigma-", "pi", "sigma+")
_POL_Q = {"sigma-": -1, "pi": 0, "sigma+": +1}

# global state numbering: manifolds stacked in energy order of the ladder
_INDEX_OFFSET = {"5S1/2": 0, "5P3/2": 8, "5D5/2": 24}

# reference field for the state-labelling convention; labels at other fields
# follow by stepwise eigenvector-overlap tracking
REFERENCE_FIELD_MT = 300.0
_TRACK_STEP_MT = 20.0

# lines weaker than this fraction of the strongest line in a manifold pair
# are omitted
STRENGTH_THRESHOLD = 1e-6


@dataclass(frozen=True)
class ManifoldSpec:
    """A fine-structure term and the constants of its internal Hamiltonian."""

    label: str
    l: int
    j: float
    i: float
    a_hfs_mhz: float
    b_hfs_mhz: float
    g_j: float
    g_i: float
    mu_b_mhz_per_mt: float
    gamma_fwhm_mhz: float = 0.0

    def __post_init__(self):
        if self.j == 0.5 and self.b_hfs_mhz != 0.0:
            raise StructuralError("quadrupole constant must vanish for J = 1/2")
        if self.dim < 1 or abs(2 * self.j - round(2 * self.j)) > 1e-12:
            raise StructuralError(f"bad angular momenta for {self.label}")

    @property
    def dim(self) -> int:
        return int(round((2 * self.j + 1) * (2 * self.i + 1)))


@dataclass(frozen=True, eq=False)
class ZeemanState:
    """One field-dressed eigenstate of a manifold."""

    manifold: ManifoldSpec
    index: int                      # global label, stable across B
    energy_mhz: float               # relative to the manifold centroid
    composition: np.ndarray = field(repr=False)  # amplitudes over |m_j, m_i>
    dominant_mj_mi: tuple[float, float]

    @property
    def m_f(self) -> float:
        mj, mi = self.dominant_mj_mi
        return mj + mi


@dataclass(frozen=True)
class TransitionLine:
    lower: ZeemanState
    upper: ZeemanState
    polarization: str
    detuning_ghz: float             # from the zero-field centroid of the pair
    strength: float                 # relative, strongest line in pair = 1
    raw_strength: float             # unnormalized |<u|d_q|l>|^2


@dataclass(frozen=True)
class TwoPhotonLine:
    ground: ZeemanState
    intermediate: ZeemanState
    doubly_excited: ZeemanState
    signal_pol: str
    control_pol: str
    signal_detuning_ghz: float      # one-photon resonance of the lower leg
    control_detuning_ghz: float     # one-photon resonance of the upper leg
    strength: float
    is_loss_channel: bool

    @property
    def total_detuning_ghz(self) -> float:
        # two-photon detuning from the field-free 5S->5D interval; exact by
        # construction since the two legs share the intermediate energy
        return self.signal_detuning_ghz + self.control_detuning_ghz


def manifold_spec(label: str, constants: AtomConstants | None = None) -> ManifoldSpec:
    """Build the ManifoldSpec for one of the ladder terms."""
    c = constants or default_constants()
    term = c.term(label)
    letter = "".join(ch for ch in term.label if ch.isalpha()).upper()
    return ManifoldSpec(
        label=term.label,
        l={"S": 0, "P": 1, "D": 2}[letter],
        j=term.j,
        i=c.nuclear_spin,
        a_hfs_mhz=term.a_mhz,
        b_hfs_mhz=term.b_mhz,
        g_j=term.g_j,
        g_i=c.g_i,
        mu_b_mhz_per_mt=c.mu_b_mhz_per_mt,
        gamma_fwhm_mhz=term.gamma_fwhm_mhz,
    )


def all_manifolds(constants: AtomConstants | None = None) -> tuple[ManifoldSpec, ...]:
    return tuple(manifold_spec(lbl, constants) for lbl in ("5S1/2", "5P3/2", "5D5/2"))


def _ladder_ops(j: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    dim = int(round(2 * j + 1))
    m = j - np.arange(dim)          # descending m
    jz = np.diag(m)
    jp = np.zeros((dim, dim))
    for k in range(1, dim):
        jp[k - 1, k] = math.sqrt(j * (j + 1) - m[k] * (m[k] + 1))
    return jz, jp, jp.T


def basis_labels(manifold: ManifoldSpec) -> list[tuple[float, float]]:
    """(m_j, m_i) labels in the basis order used by build_hamiltonian."""
    mj = manifold.j - np.arange(int(round(2 * manifold.j + 1)))
    mi = manifold.i - np.arange(int(round(2 * manifold.i + 1)))
    return [(a, b) for a in mj for b in mi]


def clebsch_gordan(j1: float, m1: float, j2: float, m2: float,
                   j3: float, m3: float) -> float:
    """<j1 m1; j2 m2 | j3 m3> by the Racah closed form."""
    if abs(m1 + m2 - m3) > 1e-9:
        return 0.0
    if j3 < abs(j1 - j2) - 1e-9 or j3 > j1 + j2 + 1e-9:
        return 0.0
    if abs(m1) > j1 + 1e-9 or abs(m2) > j2 + 1e-9 or abs(m3) > j3 + 1e-9:
        return 0.0

    def fact(x: float) -> float | None:
        n = int(round(x))
        return None if n < 0 else math.factorial(n)

    pref = ((2 * j3 + 1) * fact(j3 + j1 - j2) * fact(j3 - j1 + j2)
            * fact(j1 + j2 - j3) / fact(j1 + j2 + j3 + 1))
    pref *= (fact(j3 + m3) * fact(j3 - m3) * fact(j1 - m1) * fact(j1 + m1)
             * fact(j2 - m2) * fact(j2 + m2))
    total = 0.0
    for k in range(0, int(round(2 * (j1 + j2 + j3))) + 1):
        denoms = [fact(k), fact(j1 + j2 - j3 - k), fact(j1 - m1 - k),
                  fact(j2 + m2 - k), fact(j3 - j2 + m1 + k), fact(j3 - j1 - m2 + k)]
        if any(d is None for d in denoms):
            continue
        total += (-1) ** k / math.prod(denoms)
    return math.sqrt(pref) * total


def build_hamiltonian(manifold: ManifoldSpec, b_mt: float) -> np.ndarray:
    """H_hfs + H_Zeeman in MHz over the |m_j, m_i> product basis.

    H_hfs = A (I.J) + B [3(I.J)^2 + 3/2 (I.J) - I(I+1)J(J+1)] / (2I(2I-1)J(2J-1))
    H_Zeeman = mu_B B (g_J m_j + g_I m_i), diagonal in this basis.
    """
    if b_mt < 0:
        raise DomainError("magnetic field must be non-negative")
    j, i = manifold.j, manifold.i
    jz, jp, jm = _ladder_ops(j)
    iz, ip, im = _ladder_ops(i)
    eye_j, eye_i = np.eye(jz.shape[0]), np.eye(iz.shape[0])

    idotj = (np.kron(jz, iz)
             + 0.5 * (np.kron(jp, im) + np.kron(jm, ip)))
    h = manifold.a_hfs_mhz * idotj
    if manifold.b_hfs_mhz != 0.0 and j > 0.5 and i > 0.5:
        denom = 2 * i * (2 * i - 1) * j * (2 * j - 1)
        h = h + manifold.b_hfs_mhz * (
            3 * idotj @ idotj + 1.5 * idotj
            - i * (i + 1) * j * (j + 1) * np.eye(manifold.dim)
        ) / denom
    h = h + manifold.mu_b_mhz_per_mt * b_mt * (
        manifold.g_j * np.kron(jz, eye_i) + manifold.g_i * np.kron(eye_j, iz)
    )
    if h.shape != (manifold.dim, manifold.dim):
        raise StructuralError("Hamiltonian dimension mismatch")
    return h


def _mf_values(manifold: ManifoldSpec) -> np.ndarray:
    return np.array([mj + mi for mj, mi in basis_labels(manifold)])


def _eigh_blockwise(manifold: ManifoldSpec, b_mt: float) -> tuple[np.ndarray, np.ndarray]:
    """Eigensystem solved per m_F block, so m_F purity is exact."""
    h = build_hamiltonian(manifold, b_mt)
    mf = _mf_values(manifold)
    n = manifold.dim
    energies = np.empty(n)
    vectors = np.zeros((n, n))
    col = 0
    for val in np.unique(mf):
        idx = np.flatnonzero(np.abs(mf - val) < 1e-9)
        evals, evecs = np.linalg.eigh(h[np.ix_(idx, idx)])
        for k in range(len(idx)):
            energies[col] = evals[k]
            vectors[idx, col] = evecs[:, k]
            col += 1
    # residual check against the full matrix
    res = np.linalg.norm(h @ vectors - vectors * energies)
    scale = max(np.linalg.norm(h), 1.0)
    if res > 1e-9 * scale:
        raise NumericalError(
            f"eigensolver residual {res:.3e} exceeds 1e-9*|H| for "
            f"{manifold.label} at B={b_mt} mT")
    return energies, vectors


@lru_cache(maxsize=None)
def _reference_system(manifold: ManifoldSpec) -> tuple[np.ndarray, np.ndarray]:
    """Eigensystem at the reference field, sorted ascending in energy."""
    energies, vectors = _eigh_blockwise(manifold, REFERENCE_FIELD_MT)
    order = np.argsort(energies)
    return energies[order], vectors[:, order]


def _match_columns(v_from: np.ndarray, v_to: np.ndarray) -> np.ndarray:
    """perm[k] = column of v_to matching column k of v_from (max overlap)."""
    overlap = np.abs(v_from.T @ v_to) ** 2
    rows, cols = linear_sum_assignment(-overlap)
    perm = np.empty(v_from.shape[1], dtype=int)
    perm[rows] = cols
    return perm


@lru_cache(maxsize=4096)
def _tracked_system(manifold: ManifoldSpec, b_mt: float) -> tuple[np.ndarray, np.ndarray]:
    """Eigensystem at b_mt, columns ordered by the reference labelling."""
    _, v_ref = _reference_system(manifold)
    # walk from the reference field in bounded steps to keep overlaps sharp
    n_steps = max(1, int(math.ceil(abs(b_mt - REFERENCE_FIELD_MT) / _TRACK_STEP_MT)))
    fields = np.linspace(REFERENCE_FIELD_MT, b_mt, n_steps + 1)
    v_prev = v_ref
    order_prev = np.arange(manifold.dim)
    for b in fields[1:]:
        energies, vectors = _eigh_blockwise(manifold, b)
        perm = _match_columns(v_prev, vectors)
        order_prev = perm[order_prev]
        v_prev = vectors
    energies, vectors = _eigh_blockwise(manifold, float(fields[-1]))
    return energies[order_prev], vectors[:, order_prev]


def diagonalize_manifold(manifold: ManifoldSpec, b_mt: float) -> list[ZeemanState]:
    """All (2J+1)(2I+1) dressed eigenstates with B-stable labels."""
    energies, vectors = _tracked_system(manifold, b_mt)
    labels = basis_labels(manifold)
    offset = _INDEX_OFFSET.get(manifold.label, 0)
    states = []
    for k in range(manifold.dim):
        comp = vectors[:, k].astype(complex)
        dom = labels[int(np.argmax(np.abs(comp) ** 2))]
        states.append(ZeemanState(
            manifold=manifold,
            index=offset + k + 1,
            energy_mhz=float(energies[k]),
            composition=comp,
            dominant_mj_mi=dom,
        ))
    return states


def breit_rabi_curve(manifold: ManifoldSpec, b_grid_mt) -> np.ndarray:
    """Energies (MHz) on a sorted B grid, shape (len(grid), dim).

    Column k follows the state labelled k+offset+1; traces are continuous in B
    (labels propagated point-to-point by eigenvector overlap).
    """
    b_grid = np.asarray(b_grid_mt, dtype=float)
    if b_grid.ndim != 1 or len(b_grid) == 0:
        raise DomainError("B grid must be a non-empty 1-D sequence")
    if np.any(np.diff(b_grid) < 0):
        raise DomainError("B grid must be sorted ascending")
    out = np.empty((len(b_grid), manifold.dim))
    # anchor the first point to the global labelling, then chain point-to-point
    energies, vectors = _tracked_system(manifold, float(b_grid[0]))
    out[0] = energies
    v_prev = vectors
    for row, b in enumerate(b_grid[1:], start=1):
        e, v = _eigh_blockwise(manifold, float(b))
        perm = _match_columns(v_prev, v)
        out[row] = e[perm]
        v_prev = v[:, perm]
    return out


def _dipole_amplitudes(lower_states: list[ZeemanState],
                       upper_states: list[ZeemanState],
                       q: int) -> np.ndarray:
    """Matrix of <u|d_q|l> over dressed states (reduced matrix element = 1)."""
    lo_m, up_m = lower_states[0].manifold, upper_states[0].manifold
    lo_labels = basis_labels(lo_m)
    up_index = {lab: n for n, lab in enumerate(basis_labels(up_m))}
    # per lower-basis component, the target upper component and CG factor
    target, cgf = [], []
    for (mj, mi) in lo_labels:
        lab = (mj + q, mi)
        if lab in up_index:
            target.append(up_index[lab])
            cgf.append(clebsch_gordan(lo_m.j, mj, 1, q, up_m.j, mj + q))
        else:
            target.append(-1)
            cgf.append(0.0)
    amp = np.zeros((len(lower_states), len(upper_states)), dtype=complex)
    for a, low in enumerate(lower_states):
        for b, up in enumerate(upper_states):
            s = 0.0 + 0.0j
            for n, (t, c) in enumerate(zip(target, cgf)):
                if t >= 0 and c != 0.0:
                    s += np.conj(up.composition[t]) * c * low.composition[n]
            amp[a, b] = s
    return amp


def _check_dipole_allowed(lower: ManifoldSpec, upper: ManifoldSpec) -> None:
    if abs(lower.l - upper.l) != 1:
        raise DomainError(
            f"{lower.label} -> {upper.label} is not dipole allowed (dL != 1)")


def transition_lines(lower: ManifoldSpec, upper: ManifoldSpec, b_mt: float,
                     polarization: str | None = None) -> list[TransitionLine]:
    """Dipole lines between two manifolds at field b_mt.

    Strengths are |<u|d_q|l>|^2 on the dressed eigenvectors, normalized so the
    strongest line of the manifold pair (over all polarizations) equals 1.
    Lines below STRENGTH_THRESHOLD of that maximum are omitted.
    """
    _check_dipole_allowed(lower, upper)
    pols = POLARIZATIONS if polarization is None else (polarization,)
    for p in pols:
        if p not in _POL_Q:
            raise DomainError(f"unknown polarization {p!r}")
    lo_states = diagonalize_manifold(lower, b_mt)
    up_states = diagonalize_manifold(upper, b_mt)
    raw: dict[str, np.ndarray] = {
        p: np.abs(_dipole_amplitudes(lo_states, up_states, _POL_Q[p])) ** 2
        for p in POLARIZATIONS
    }
    norm = max(m.max() for m in raw.values())
    if norm <= 0:
        raise NumericalError("all transition strengths vanished")
    lines = []
    for p in pols:
        mat = raw[p]
        for a, low in enumerate(lo_states):
            for b, up in enumerate(up_states):
                s = mat[a, b] / norm
                if s < STRENGTH_THRESHOLD:
                    continue
                lines.append(TransitionLine(
                    lower=low, upper=up, polarization=p,
                    detuning_ghz=(up.energy_mhz - low.energy_mhz) / 1e3,
                    strength=float(s),
                    raw_strength=float(mat[a, b]),
                ))
    lines.sort(key=lambda ln: ln.detuning_ghz)
    return lines


def dipole_strength_sums(lower: ManifoldSpec, upper: ManifoldSpec,
                         b_mt: float) -> np.ndarray:
    """Per-lower-state strength sums over all upper states and polarizations.

    Computed from the full amplitude matrices with no line-omission threshold;
    by closure of the dipole algebra these sums are independent of B.
    """
    _check_dipole_allowed(lower, upper)
    lo_states = diagonalize_manifold(lower, b_mt)
    up_states = diagonalize_manifold(upper, b_mt)
    total = np.zeros(lower.dim)
    for pol in POLARIZATIONS:
        amp = _dipole_amplitudes(lo_states, up_states, _POL_Q[pol])
        total += np.sum(np.abs(amp) ** 2, axis=1)
    order = np.argsort([s.index for s in lo_states])
    return total[order]


def two_photon_lines(b_mt: float, signal_pol: str, control_pol: str,
                     total_window_ghz: tuple[float, float] = (-50.0, 50.0),
                     reference_signal_detuning_ghz: float | None = None,
                     gamma_eff_ghz: float = 0.55,
                     constants: AtomConstants | None = None) -> list[TwoPhotonLine]:
    """Ladder paths 5S1/2 -> 5P3/2 -> 5D5/2 within a two-photon window.

    One entry per (ground, intermediate, upper) triple.  `total_window_ghz`
    selects on the total two-photon detuning (signal + control legs) from the
    field-free 5S -> 5D interval.  When a reference signal detuning is given
    (the carrier of the driving field), each path's strength is the product of
    its two one-photon strengths divided by 1 + (d_int/gamma_eff)^2, with
    d_int the distance of the lower-leg resonance from that reference and
    gamma_eff the Doppler-broadened intermediate width; otherwise the raw
    product is kept.  Only ordering and grouping of lines are contractual;
    absolute weights are not.
    """
    if total_window_ghz[0] >= total_window_ghz[1]:
        raise DomainError("two-photon window must be non-empty")
    s12, p32, d52 = all_manifolds(constants)
    leg1 = transition_lines(s12, p32, b_mt, signal_pol)
    leg2 = transition_lines(p32, d52, b_mt, control_pol)
    by_intermediate: dict[int, list[TransitionLine]] = {}
    for ln in leg2:
        by_intermediate.setdefault(ln.lower.index, []).append(ln)
    loss = not (signal_pol == "sigma-" and control_pol == "sigma-")
    out = []
    for ln1 in leg1:
        if reference_signal_detuning_ghz is None:
            weight = 1.0
        else:
            d_int = ln1.detuning_ghz - reference_signal_detuning_ghz
            weight = 1.0 / (1.0 + (d_int / gamma_eff_ghz) ** 2)
        for ln2 in by_intermediate.get(ln1.upper.index, ()):
            total = ln1.detuning_ghz + ln2.detuning_ghz
            if not (total_window_ghz[0] <= total <= total_window_ghz[1]):
                continue
            out.append(TwoPhotonLine(
                ground=ln1.lower,
                intermediate=ln1.upper,
                doubly_excited=ln2.upper,
                signal_pol=signal_pol,
                control_pol=control_pol,
                signal_detuning_ghz=ln1.detuning_ghz,
                control_detuning_ghz=ln2.detuning_ghz,
                strength=float(ln1.raw_strength * ln2.raw_strength * weight),
                is_loss_channel=loss,
            ))
    out.sort(key=lambda tl: tl.total_detuning_ghz)
    return out


def group_two_photon_lines(lines: list[TwoPhotonLine],
                           tol_ghz: float = 1e-6) -> list[tuple[float, float, TwoPhotonLine]]:
    """Merge paths sharing (ground, upper) into composite lines.

    Returns (total_detuning_ghz, summed_strength, strongest_path) sorted by
    detuning.  Paths through different intermediates add incoherently here;
    the spectral weighting already lives in the per-path strengths.
    """
    grouped: dict[tuple[int, int], list[TwoPhotonLine]] = {}
    for ln in lines:
        grouped.setdefault((ln.ground.index, ln.doubly_excited.index), []).append(ln)
    out = []
    for paths in grouped.values():
        pos = paths[0].total_detuning_ghz
        assert all(abs(p.total_detuning_ghz - pos) < tol_ghz for p in paths)
        total = sum(p.strength for p in paths)
        best = max(paths, key=lambda p: p.strength)
        out.append((pos, total, best))
    out.sort(key=lambda t: t[0])
    return out
