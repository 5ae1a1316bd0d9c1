"""Separatrices, fidelity susceptibility, transition location and
classification, critical-coupling finders and exponent fits."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.stats import t as student_t

from .model import (
    ModelError,
    ModelKind,
    ModelSpec,
    SectorSpec,
    SectorType,
    FULL3_KINDS,
    RWA3_KINDS,
    enumerate_basis,
    lambda_c_classical,
)
from .operators import assemble_hamiltonian
from .spectra import EigenResult, StateVector, lowest_eigenpairs
from .variational import (
    Family,
    VariationalPoint,
    embed_variational_state,
    energy_surface_2level,
    minimize_energy,
    rwa3_reduced_minimum,
    tcm_critical_data,
    tcm_projected_ground,
    v_sas_plus_energy,
)

FIRST_ORDER_SLOPE_JUMP = 1e-3
PEAK_PROMINENCE_FACTOR = 10.0


# --- separatrices ------------------------------------------------------------


def _theta0(x: float) -> float:
    """Heaviside with Theta(0) = 0, keeping the Xi separatrix continuous."""
    return 1.0 if x > 0.0 else 0.0


def separatrix_ordinate(kind: ModelKind, omega21: float | None = None,
                        omega31: float | None = None,
                        abscissa: float | None = None):
    """Solve the analytic separatrix for the remaining coordinate.

    Three-level kinds: returns mu_12 given mu_23 (Xi), mu_13 given mu_23
    (Lambda) or mu_13 given mu_12 (V); None when there is no real solution.
    Full (non-RWA) kinds take and return halved coordinates.  Two-level
    kinds return the critical coupling from omega21 = omega_A.
    """
    if kind is ModelKind.TCM:
        if omega21 is None or omega21 < 0:
            raise ModelError("TCM separatrix requires omega_A >= 0")
        return math.sqrt(omega21)
    if kind is ModelKind.DICKE:
        if omega21 is None or omega21 < 0:
            raise ModelError("Dicke separatrix requires omega_A >= 0")
        return math.sqrt(omega21) / 2.0
    if omega21 is None or omega31 is None or abscissa is None:
        raise ModelError("three-level separatrix requires omega21, omega31, abscissa")
    scale = 2.0 if kind in FULL3_KINDS else 1.0
    a = scale * abscissa
    config = kind.value.rsplit("_", 1)[0]
    if config == "XI":
        if omega21 <= 0 or omega31 <= 0:
            raise ModelError("Xi separatrix requires positive level spacings")
        rhs = omega21 - (abs(a) - math.sqrt(omega31)) ** 2 \
            * _theta0(abs(a) - math.sqrt(omega31))
    elif config == "LAMBDA":
        if omega21 <= 0 or omega31 <= 0:
            raise ModelError("Lambda separatrix requires positive level spacings")
        rhs = omega31 - (abs(a) - math.sqrt(omega21)) ** 2 \
            * _theta0(abs(a) - math.sqrt(omega21))
    elif config == "V":
        if omega21 <= 0 or omega31 <= 0:
            raise ModelError("V separatrix requires positive level spacings")
        rhs = omega31 * (1.0 - a * a / omega21)
    else:
        raise ModelError(f"no separatrix for kind {kind}")
    if rhs < 0.0:
        return None
    return math.sqrt(rhs) / scale


# --- fidelity ----------------------------------------------------------------


def fidelity_and_susceptibility(states, dtau: float):
    """Per-step fidelity F and susceptibility chi = 2(1 - F)/dtau^2.

    states is an ordered list of StateVector on one common basis, or of
    (block_key, StateVector) pairs; states in different blocks are
    orthogonal by symmetry.
    """
    if dtau <= 0:
        raise ModelError("dtau must be positive")
    if len(states) < 2:
        raise ModelError("need at least two states")
    fs = []
    for a, b in zip(states[:-1], states[1:]):
        ka, sa = a if isinstance(a, tuple) else (None, a)
        kb, sb = b if isinstance(b, tuple) else (None, b)
        if ka != kb:
            fs.append(0.0)
        else:
            fs.append(sa.fidelity(sb))
    f = np.asarray(fs)
    return f, 2.0 * (1.0 - f) / (dtau * dtau)


# --- parameter paths ---------------------------------------------------------

_FIELD_SETTERS = {
    "gamma": lambda s, v: s.replace_couplings(v),
    "omega_a": lambda s, v: ModelSpec(s.kind, s.n_atoms, v, s.couplings, s.field_freq),
    "mu_12": lambda s, v: s.replace_couplings((v, s.couplings[1], s.couplings[2])),
    "mu_13": lambda s, v: s.replace_couplings((s.couplings[0], v, s.couplings[2])),
    "mu_23": lambda s, v: s.replace_couplings((s.couplings[0], s.couplings[1], v)),
}


def spec_with(spec: ModelSpec, **fields) -> ModelSpec:
    for name, value in fields.items():
        if name not in _FIELD_SETTERS:
            raise ModelError(f"unknown path field {name!r}")
        spec = _FIELD_SETTERS[name](spec, value)
    return spec


@dataclass(frozen=True)
class ParameterPath:
    """Straight path through model space, parameterised by one primary field.

    linked maps other field names to (slope, intercept) pairs or callables
    of the primary value.
    """

    base: ModelSpec
    primary: str
    start: float
    stop: float
    linked: dict = field(default_factory=dict)

    def spec_at(self, tau: float) -> ModelSpec:
        fields = {self.primary: tau}
        for name, link in self.linked.items():
            fields[name] = link(tau) if callable(link) else link[0] * tau + link[1]
        return spec_with(self.base, **fields)

    def coordinates(self, tau: float) -> dict:
        fields = {self.primary: tau}
        for name, link in self.linked.items():
            fields[name] = link(tau) if callable(link) else link[0] * tau + link[1]
        return fields

    def grid(self, samples: int) -> np.ndarray:
        if samples < 2:
            raise ModelError("a path needs at least 2 samples")
        return np.linspace(self.start, self.stop, samples)


# --- block-resolved exact grounds ---------------------------------------------


def block_ground(spec: ModelSpec, sector: SectorSpec, k: int = 1) -> EigenResult:
    basis = enumerate_basis(spec, sector)
    return lowest_eigenpairs(assemble_hamiltonian(spec, basis),
                             min(k, basis.dimension))


def tcm_global_ground(spec: ModelSpec, lam_cap: int | None = None):
    """(lambda*, EigenResult) of the lowest lambda-block ground of the TCM."""
    if lam_cap is None:
        lam_cap = int(lambda_c_classical(spec)) + 12
    best = None
    for lam in range(lam_cap + 1):
        res = block_ground(spec, SectorSpec(SectorType.LAMBDA_BLOCK, lam))
        if best is None or res.ground_energy < best[1].ground_energy:
            best = (lam, res)
    return best


def rwa3_global_ground(spec: ModelSpec, m_cap: int | None = None,
                       stop_rise: int = 5):
    """(M*, EigenResult) of the lowest M-block ground of a 3-level RWA model.

    Blocks are scanned upward until the block minima have risen for
    stop_rise consecutive M beyond the current best.
    """
    if m_cap is None:
        m_cap = 4 * spec.n_atoms + 16
    best = None
    rise = 0
    prev = math.inf
    for m in range(m_cap + 1):
        res = block_ground(spec, SectorSpec(SectorType.M_BLOCK, m))
        e = res.ground_energy
        if best is None or e < best[1].ground_energy:
            best = (m, res)
        rise = rise + 1 if e > prev else 0
        prev = e
        if rise >= stop_rise and e > best[1].ground_energy + spec.field_freq:
            break
    return best


def _quantum_block_state(spec: ModelSpec, n_max: int | None):
    """(block_key, EigenResult) of the global ground, by model kind."""
    if spec.kind is ModelKind.TCM:
        lam, res = tcm_global_ground(spec)
        return ("lambda", lam), res
    if spec.kind in RWA3_KINDS:
        m, res = rwa3_global_ground(spec)
        return ("M", m), res
    if n_max is None:
        raise ModelError("parity-sector scans need an explicit Fock cutoff")
    best = None
    for par in (+1, -1):
        res = block_ground(spec, SectorSpec(SectorType.PARITY, par, fock_cutoff=n_max))
        if best is None or res.ground_energy < best[1].ground_energy:
            best = (("parity", par), res)
    return best


# --- transition reports --------------------------------------------------------


@dataclass(frozen=True)
class Transition:
    tau_c: float
    order: str                      # "FIRST" | "SECOND"
    chi_peak: float
    delta_excitation: int | None    # change in lambda or M when applicable
    coordinates: dict


@dataclass
class TransitionReport:
    method: str
    taus: np.ndarray
    chi: np.ndarray
    transitions: list


def _order_from_slopes(energy_of, tau_c, h) -> str:
    el = (energy_of(tau_c - h / 2) - energy_of(tau_c - 3 * h / 2)) / h
    er = (energy_of(tau_c + 3 * h / 2) - energy_of(tau_c + h / 2)) / h
    return "FIRST" if abs(er - el) > FIRST_ORDER_SLOPE_JUMP else "SECOND"


def _bisect(f, lo, hi, iters=60, tol=1e-10):
    """Leftmost sign change of f on [lo, hi]; f > 0 marks the left branch."""
    if f(lo) <= 0:
        return lo
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol:
            break
    return 0.5 * (lo + hi)


def locate_transitions(path: ParameterPath, method: str, samples: int = 201,
                       n_max: int | None = None,
                       refine_h: float = 1e-4) -> TransitionReport:
    """Find transitions along a path by the requested criterion.

    QUANTUM uses exact block-resolved ground states and fidelity
    susceptibility peaks; SAS and PROJECTED use variational surfaces and
    detect onsets or jumps of the minimising parameters.  Orders follow the
    jump of the relevant ground energy's first derivative.
    """
    taus = path.grid(samples)
    dtau = taus[1] - taus[0]
    if method == "QUANTUM":
        return _locate_quantum(path, taus, dtau, n_max, refine_h)
    if method in ("SAS", "PROJECTED"):
        return _locate_variational(path, taus, dtau, method, refine_h)
    raise ModelError(f"unknown method {method!r}")


def _locate_quantum(path, taus, dtau, n_max, refine_h):
    keyed = [_quantum_block_state(path.spec_at(t), n_max) for t in taus]
    states = [(k, r.ground_state) for k, r in keyed]
    f, chi = fidelity_and_susceptibility(states, dtau)
    energies = np.array([r.ground_energy for _, r in keyed])

    def ground_energy(tau):
        return _quantum_block_state(path.spec_at(tau), n_max)[1].ground_energy

    threshold = PEAK_PROMINENCE_FACTOR * max(float(np.median(chi)), 1e-300)
    transitions = []
    for i in np.flatnonzero(chi > threshold):
        key_l, res_l = keyed[i]
        key_r, res_r = keyed[i + 1]
        if key_l == key_r:
            # same-sector peaks must be interior local maxima
            if not (0 < i < len(chi) - 1) or chi[i] < chi[i - 1] or chi[i] < chi[i + 1]:
                continue
        if key_l != key_r:
            def gap(tau, kl=key_l, kr=key_r):
                spec = path.spec_at(tau)
                el = _block_energy_for_key(spec, kl, n_max)
                er = _block_energy_for_key(spec, kr, n_max)
                return er - el
            tau_c = _bisect(gap, taus[i], taus[i + 1])
            delta = key_r[1] - key_l[1] if key_l[0] == key_r[0] \
                and isinstance(key_l[1], int) and key_l[0] != "parity" else None
        else:
            tau_c = _parabolic_peak(taus, chi, i)
            delta = None
        order = _order_from_slopes(ground_energy, tau_c, refine_h)
        transitions.append(Transition(float(tau_c), order, float(chi[i]), delta,
                                      path.coordinates(float(tau_c))))
    return TransitionReport("QUANTUM", taus, chi, _dedupe(transitions, dtau))


def _block_energy_for_key(spec, key, n_max):
    kind, value = key
    if kind == "lambda":
        return block_ground(spec, SectorSpec(SectorType.LAMBDA_BLOCK, value)).ground_energy
    if kind == "M":
        return block_ground(spec, SectorSpec(SectorType.M_BLOCK, value)).ground_energy
    return block_ground(spec, SectorSpec(SectorType.PARITY, value,
                                         fock_cutoff=n_max)).ground_energy


def _parabolic_peak(taus, chi, i):
    mid = 0.5 * (taus[:-1] + taus[1:])
    if not 0 < i < len(chi) - 1:
        return mid[i]
    y0, y1, y2 = chi[i - 1], chi[i], chi[i + 1]
    denom = y0 - 2 * y1 + y2
    if denom == 0:
        return mid[i]
    return mid[i] + 0.5 * (y0 - y2) / denom * (mid[1] - mid[0])


def _dedupe(transitions, dtau):
    out = []
    for tr in sorted(transitions, key=lambda t: t.tau_c):
        if out and abs(tr.tau_c - out[-1].tau_c) < 1.5 * dtau:
            if tr.chi_peak > out[-1].chi_peak:
                out[-1] = tr
            continue
        out.append(tr)
    return out


# --- variational transition detection ----------------------------------------


def _tcm_region_code(spec):
    return {"NorthPole": 0, "Parallels": 1, "SouthPole": 2}[tcm_critical_data(spec).region]


def _locate_variational(path, taus, dtau, method, refine_h):
    spec0 = path.spec_at(taus[0])
    if spec0.kind is ModelKind.TCM:
        if method == "PROJECTED":
            values = [tcm_projected_ground(path.spec_at(t))[0] for t in taus]
            energy_of = lambda tau: tcm_projected_ground(path.spec_at(tau))[1].energy
            label_of = lambda tau: tcm_projected_ground(path.spec_at(tau))[0]
        else:
            values = [_tcm_region_code(path.spec_at(t)) for t in taus]
            energy_of = lambda tau: tcm_critical_data(path.spec_at(tau)).e0_per_atom
            label_of = lambda tau: _tcm_region_code(path.spec_at(tau))
        return _report_from_labels(path, taus, dtau, method, values,
                                   energy_of, label_of, refine_h)
    if spec0.kind in RWA3_KINDS:
        if method == "PROJECTED":
            return _locate_rwa3_projected(path, taus, dtau, refine_h)
        return _locate_rwa3_surface(path, taus, dtau, refine_h)
    # Dicke and full three-level kinds: parity-adapted minimiser jumps
    return _locate_sas_jump(path, taus, dtau, refine_h)


def _report_from_labels(path, taus, dtau, method, values, energy_of, label_of,
                        refine_h):
    transitions = []
    for i in range(len(values) - 1):
        if values[i] != values[i + 1]:
            tau_c = _bisect(lambda t, v=values[i]: 1.0 if label_of(t) == v else -1.0,
                            taus[i], taus[i + 1], iters=45)
            order = _order_from_slopes(energy_of, tau_c, refine_h)
            delta = values[i + 1] - values[i] if isinstance(values[i], int) else None
            transitions.append(Transition(float(tau_c), order, math.inf, delta,
                                          path.coordinates(float(tau_c))))
    chi = np.zeros(len(taus) - 1)
    return TransitionReport(method, taus, chi, _dedupe(transitions, dtau))


def rwa3_projected_block_minimum(spec, m_total, seeds=None):
    """Best true Rayleigh quotient of the coherent state projected onto one
    M block; returns (per-atom energy, minimising (rho, rho2, rho3))."""
    basis = enumerate_basis(spec, SectorSpec(SectorType.M_BLOCK, m_total))
    H = assemble_hamiltonian(spec, basis).entries
    if m_total == 0:
        return spec.level_freqs[0], (0.0, 0.0, 0.0)
    if seeds is None:
        seeds = [(0.3, 0.3, 0.1), (math.sqrt(m_total), 0.15, 0.1),
                 (0.4 * math.sqrt(m_total), 0.8, 0.4)]

    def rayleigh(x):
        rho, r2, r3 = (abs(v) for v in x)
        try:
            pt = VariationalPoint(Family.RWA3_COH,
                                  dict(rho=rho, rho2=r2, rho3=r3), 0.0)
            st = embed_variational_state(pt, basis)
        except ModelError:
            return math.inf
        return float(np.vdot(st.amplitudes, H @ st.amplitudes).real)

    best = (math.inf, (0.0, 0.0, 0.0))
    for s in seeds:
        r = minimize(rayleigh, s, method="Nelder-Mead",
                     options=dict(xatol=1e-8, fatol=1e-12, maxiter=1500))
        if r.fun < best[0]:
            best = (float(r.fun), tuple(abs(v) for v in r.x))
    return best[0] / spec.n_atoms, best[1]


def _locate_rwa3_projected(path, taus, dtau, refine_h, m_cap=8):
    cache = {}

    def block_min(tau, m):
        key = (round(float(tau), 14), m)
        if key not in cache:
            cache[key] = rwa3_projected_block_minimum(path.spec_at(tau), m)[0]
        return cache[key]

    def argmin_m(tau):
        es = [block_min(tau, m) for m in range(m_cap + 1)]
        k = int(np.argmin(es))
        return es[k], k

    values = [argmin_m(t)[1] for t in taus]
    transitions = []
    for i in range(len(values) - 1):
        if values[i] == values[i + 1]:
            continue
        m_l, m_r = values[i], values[i + 1]
        tau_c = _bisect(lambda t: block_min(t, m_r) - block_min(t, m_l),
                        taus[i], taus[i + 1], iters=40)
        energy_of = lambda t: min(block_min(t, m_l), block_min(t, m_r))
        order = _order_from_slopes(energy_of, tau_c, refine_h)
        transitions.append(Transition(float(tau_c), order, math.inf, m_r - m_l,
                                      path.coordinates(float(tau_c))))
    chi = np.zeros(len(taus) - 1)
    return TransitionReport("PROJECTED", taus, chi, _dedupe(transitions, dtau))


def _locate_rwa3_surface(path, taus, dtau, refine_h):
    """Transitions of the continuum (field-eliminated) coherent surface:
    onsets where its minimum drops below the normal value omega_1, and
    first-order jumps of the minimising atomic parameters."""
    e_normal = path.spec_at(taus[0]).level_freqs[0]
    eps = 1e-11

    def solve(tau):
        return rwa3_reduced_minimum(path.spec_at(tau))

    def energy_of(tau):
        return solve(tau)[0]

    sols = [solve(t) for t in taus]
    collective = np.array([s[0] < e_normal - eps for s in sols])
    vecs = np.array([s[1] for s in sols])
    transitions = []
    for i in range(len(taus) - 1):
        if collective[i] != collective[i + 1]:
            tau_c = _bisect(lambda t: 1.0 if energy_of(t) > e_normal - eps else -1.0,
                            taus[i], taus[i + 1], iters=45)
            order = _order_from_slopes(energy_of, tau_c, refine_h)
            transitions.append(Transition(float(tau_c), order, math.inf, None,
                                          path.coordinates(float(tau_c))))
        elif collective[i]:
            scale = np.maximum(np.abs(vecs).max(axis=0), 1e-6)
            if np.abs((vecs[i + 1] - vecs[i]) / scale).max() > 0.25:
                left, right = vecs[i], vecs[i + 1]

                def side(tau):
                    v = np.array(solve(tau)[1])
                    return 1.0 if np.linalg.norm(v - left) < np.linalg.norm(v - right) \
                        else -1.0

                tau_c = _bisect(side, taus[i], taus[i + 1], iters=45)
                order = _order_from_slopes(energy_of, tau_c, refine_h)
                transitions.append(Transition(float(tau_c), order, math.inf, None,
                                              path.coordinates(float(tau_c))))
    chi = np.zeros(len(taus) - 1)
    return TransitionReport("SAS", taus, chi, _dedupe(transitions, dtau))


def _sas_family_for(spec):
    if spec.kind is ModelKind.DICKE:
        return Family.DICKE_SAS_PLUS
    if spec.kind in FULL3_KINDS:
        return Family.FULL3_SAS_PLUS
    raise ModelError("SAS jump detection requires a parity-conserving kind")


def _locate_sas_jump(path, taus, dtau, refine_h):
    family = _sas_family_for(path.spec_at(taus[0]))

    def optimum(tau):
        return minimize_energy(path.spec_at(tau), family)

    points = [optimum(t) for t in taus]
    names = [n for n in ("q", "theta", "alpha", "rho2", "rho3") if n in points[0].params]
    vecs = np.array([[pt.params[n] for n in names] for pt in points])
    scale = np.maximum(np.abs(vecs).max(axis=0), 1e-6)
    jumps = np.abs(np.diff(vecs, axis=0) / scale).max(axis=1)
    transitions = []
    for i in np.flatnonzero(jumps > 0.25):
        left, right = vecs[i], vecs[i + 1]

        def side(tau):
            v = np.array([optimum(tau).params[n] for n in names])
            return 1.0 if np.linalg.norm(v - left) < np.linalg.norm(v - right) else -1.0

        tau_c = _bisect(side, taus[i], taus[i + 1], iters=45)
        order = _order_from_slopes(lambda t: optimum(t).energy, tau_c, refine_h)
        transitions.append(Transition(float(tau_c), order, math.inf, None,
                                      path.coordinates(float(tau_c))))
    chi = np.zeros(len(taus) - 1)
    return TransitionReport("SAS", taus, chi, _dedupe(transitions, dtau))


# --- critical-coupling finders --------------------------------------------------


def dicke_quantum_critical_coupling(n_atoms: int, omega_a: float = 1.0,
                                    n_max: int | None = None,
                                    n_grid: int = 33, stages: int = 3) -> float:
    """Pseudo-critical coupling of the finite Dicke model at the peak of the
    ground-state fidelity susceptibility (even parity sector)."""
    if n_max is None:
        n_max = int(28 + 1.6 * math.sqrt(n_atoms))
    gc = math.sqrt(omega_a) / 2.0
    shift = 0.5 * n_atoms ** (-2.0 / 3.0) * 2.0 * gc
    lo, hi = gc + 0.3 * shift, gc + 1.8 * shift
    sector = SectorSpec(SectorType.PARITY, +1, fock_cutoff=n_max)
    v0 = None
    peak = None
    for _ in range(stages):
        gammas = np.linspace(lo, hi, n_grid)
        states = []
        for g in gammas:
            spec = ModelSpec(ModelKind.DICKE, n_atoms, omega_a, g)
            basis = enumerate_basis(spec, sector)
            H = assemble_hamiltonian(spec, basis)
            method = "dense" if basis.dimension <= 600 else "iterative"
            res = lowest_eigenpairs(H, 1, method=method, v0=v0)
            v0 = res.ground_state.amplitudes.real
            states.append(res.ground_state)
        d = gammas[1] - gammas[0]
        _, chi = fidelity_and_susceptibility(states, d)
        i = int(np.argmax(chi))
        if i == 0:
            lo, hi = lo - (hi - lo), lo + 0.2 * (hi - lo)
            continue
        if i == len(chi) - 1:
            lo, hi = hi - 0.2 * (hi - lo), hi + (hi - lo)
            continue
        peak = _parabolic_peak(gammas, chi, i)
        lo, hi = peak - 2.5 * d, peak + 2.5 * d
    return float(peak)


def _two_branch_jump(scan_values, argmin_of, lo, hi, jump_scale=0.25):
    """Critical parameter where the global minimiser jumps between branches.

    scan_values: array of couplings; argmin_of(c) returns the minimiser
    vector.  Bisection classifies midpoints by distance to the bracketing
    branch solutions.
    """
    sols = [np.asarray(argmin_of(c), dtype=float) for c in scan_values]
    vecs = np.array(sols)
    scale = np.maximum(np.abs(vecs).max(axis=0), 1e-9)
    jumps = np.abs(np.diff(vecs, axis=0) / scale).max(axis=1)
    k = int(np.argmax(jumps))
    if jumps[k] < jump_scale:
        raise ModelError("no minimiser jump found in the scan window")
    a, b = float(scan_values[k]), float(scan_values[k + 1])
    left, right = vecs[k], vecs[k + 1]
    for _ in range(45):
        mid = 0.5 * (a + b)
        v = np.asarray(argmin_of(mid), dtype=float)
        if np.linalg.norm((v - left) / scale) < np.linalg.norm((v - right) / scale):
            a = mid
        else:
            b = mid
        if b - a < 1e-10:
            break
    return 0.5 * (a + b)


def _dicke_sas_argmin(n_atoms, omega_a, gamma):
    spec = ModelSpec(ModelKind.DICKE, n_atoms, omega_a, gamma)
    qmax = math.sqrt(2.0 * n_atoms) * gamma
    best = (math.inf, None)
    for q0 in (-0.05, -0.25 * qmax, -0.6 * qmax, -qmax):
        for th0 in (0.05, 0.35, 0.7, 1.1):
            f = lambda x: energy_surface_2level(
                spec, Family.DICKE_SAS_PLUS, dict(q=x[0], theta=x[1]))
            r = minimize(f, [q0, th0], method="Nelder-Mead",
                         options=dict(xatol=1e-11, fatol=1e-14, maxiter=4000))
            if r.fun < best[0]:
                best = (float(r.fun), (float(r.x[0]), float(r.x[1])))
    return best[1]


def dicke_sas_critical_coupling(n_atoms: int, omega_a: float = 1.0) -> float:
    """Coupling at which the even-SAS surface minimum jumps between the
    normal-like and superradiant branches."""
    gc = math.sqrt(omega_a) / 2.0
    asym = math.exp(-1.5) * n_atoms ** (-11.0 / 21.0) * 2.0 * gc
    lo, hi = gc + 0.35 * asym, gc + 3.2 * asym
    grid = np.linspace(lo, hi, 17)
    return float(_two_branch_jump(
        grid, lambda g: _dicke_sas_argmin(n_atoms, omega_a, g), lo, hi))


def _v_sas_argmin(n_atoms, mu):
    m = mu / math.sqrt(2.0)
    spec = ModelSpec(ModelKind.V_FULL, n_atoms, (0.0, 1.0, 1.0), (m, m, 0.0))
    best = (math.inf, None)
    for r0 in (0.01, 0.1, 0.3, 0.7):
        for x0 in (0.05, 0.3, 0.6, 0.9):
            f = lambda x: v_sas_plus_energy(
                spec, abs(x[0]), min(abs(x[1]), 0.999999), 0.0)
            r = minimize(f, [r0, x0], method="Nelder-Mead",
                         options=dict(xatol=1e-11, fatol=1e-14, maxiter=4000))
            if r.fun < best[0]:
                best = (float(r.fun), (abs(float(r.x[0])), abs(float(r.x[1]))))
    return best[1]


def v_sas_critical_coupling(n_atoms: int) -> float:
    """Coupling magnitude mu at the even-SAS minimiser jump of the full V
    model at double resonance (coupling direction is immaterial there)."""
    asym = math.exp(-1.5) * n_atoms ** (-11.0 / 21.0)
    lo, hi = 0.5 + 0.25 * asym, 0.5 + 3.5 * asym
    grid = np.linspace(lo, hi, 15)
    return float(_two_branch_jump(
        grid, lambda mu: _v_sas_argmin(n_atoms, mu), lo, hi))


# --- exponent fits -------------------------------------------------------------


@dataclass(frozen=True)
class FitResult:
    exponent: float
    log_prefactor: float
    r_squared: float
    confidence_interval: tuple


def fit_critical_exponent(samples, offset: float) -> FitResult:
    """Least-squares line on (ln N, ln(coupling_c - offset)).

    Returns the slope (critical exponent), intercept (log prefactor), R^2
    and a 95% confidence interval for the slope from the fit residuals.
    """
    if len(samples) < 4:
        raise ModelError("need at least 4 samples to fit an exponent")
    ns = np.array([s[0] for s in samples], dtype=float)
    cs = np.array([s[1] for s in samples], dtype=float)
    if np.any(cs <= offset):
        raise ModelError("every critical coupling must exceed the offset")
    x = np.log(ns)
    y = np.log(cs - offset)
    if np.ptp(x) == 0:
        raise ModelError("degenerate abscissas")
    n = len(x)
    xm, ym = x.mean(), y.mean()
    sxx = float(((x - xm) ** 2).sum())
    slope = float(((x - xm) * (y - ym)).sum() / sxx)
    intercept = float(ym - slope * xm)
    resid = y - (intercept + slope * x)
    ss_res = float((resid ** 2).sum())
    ss_tot = float(((y - ym) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    if n > 2 and ss_res > 0:
        se = math.sqrt(ss_res / (n - 2) / sxx)
        half = float(student_t.ppf(0.975, n - 2)) * se
    else:
        half = 0.0
    return FitResult(slope, intercept, r2, (slope - half, slope + half))


# --- triple point ---------------------------------------------------------------


def triple_point_spec(n_atoms: int) -> ModelSpec:
    """Xi RWA model at double resonance and the triple-point couplings."""
    return ModelSpec(ModelKind.XI_RWA, n_atoms, (0.0, 1.0, 2.0),
                     (1.0, 0.0, math.sqrt(2.0)))


def triple_point_ground_state(n_atoms: int, m_total: int) -> StateVector:
    """Analytic ground state of the M = 0, 1, 2 block at the triple point.

    The relative sign of the single-photon-of-level-3 component is fixed by
    the Hamiltonian convention (positive symmetric-irrep matrix elements
    with the printed overall minus on the interaction).
    """
    if n_atoms < 2:
        raise ModelError("the analytic triple-point states require N >= 2")
    if m_total not in (0, 1, 2):
        raise ModelError("analytic triple-point states exist for M = 0, 1, 2")
    spec = triple_point_spec(n_atoms)
    basis = enumerate_basis(spec, SectorSpec(SectorType.M_BLOCK, m_total))
    index = basis.index()
    n = n_atoms
    amp = np.zeros(basis.dimension, dtype=complex)
    if m_total == 0:
        amp[index[(0, n, n)]] = 1.0
    elif m_total == 1:
        amp[index[(0, n, n - 1)]] = 1.0 / math.sqrt(2.0)
        amp[index[(1, n, n)]] = 1.0 / math.sqrt(2.0)
    else:
        amp[index[(0, n - 1, n - 1)]] = 1.0 / (2.0 * math.sqrt(n))
        amp[index[(0, n, n - 2)]] = 0.5 * math.sqrt((n - 1.0) / n)
        amp[index[(1, n, n - 1)]] = 1.0 / math.sqrt(2.0)
        amp[index[(2, n, n)]] = 0.5
    return StateVector.from_amplitudes(amp, basis)


# --- quantum loci helpers ---------------------------------------------------------


def rwa3_first_crossing(path: ParameterPath, m_scan: int = 10,
                        lo: float | None = None, hi: float | None = None) -> float:
    """Path coordinate where the exact ground leaves the M = 0 block."""
    lo = path.start if lo is None else lo
    hi = path.stop if hi is None else hi

    def gap(tau):
        spec = path.spec_at(tau)
        e0 = block_ground(spec, SectorSpec(SectorType.M_BLOCK, 0)).ground_energy
        e1 = min(block_ground(spec, SectorSpec(SectorType.M_BLOCK, m)).ground_energy
                 for m in range(1, m_scan + 1))
        return e1 - e0

    if gap(lo) <= 0 or gap(hi) > 0:
        raise ModelError("crossing not bracketed by the path ends")
    return _bisect(gap, lo, hi)


def rwa3_block_crossing(path: ParameterPath, m_from: int, m_scan: int = 10,
                        lo: float | None = None, hi: float | None = None) -> float:
    """Path coordinate where the block m_from stops being the global ground."""
    lo = path.start if lo is None else lo
    hi = path.stop if hi is None else hi

    def gap(tau):
        spec = path.spec_at(tau)
        ea = block_ground(spec, SectorSpec(SectorType.M_BLOCK, m_from)).ground_energy
        eb = min(block_ground(spec, SectorSpec(SectorType.M_BLOCK, m)).ground_energy
                 for m in range(0, m_scan + 1) if m != m_from)
        return eb - ea

    return _bisect(gap, lo, hi)
