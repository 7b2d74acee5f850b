"""Deviation-from-conjugacy pseudometrics between identified systems.

Two systems are compared in eigenfunction space through a pair of conjugacy
residuals over unitary transformations C:

    r1(C) = || Phi_g - C Phi_f ||_F          (trajectory geometry)
    r2(C) = || Lambda_f - C* Lambda_g C ||_F (operator spectrum)

Minimizing each residual on its own has a closed form: r1 by the orthogonal
Procrustes solution (SVD of Phi_g Phi_f*), r2 by an exact linear assignment
on the squared eigenvalue distances followed by a unit-modulus diagonal that
re-phases the matched rows. The two solutions bound a rectangle of possible
Pareto-optimal residual pairs; its near corner, far corner, and exact mean
distance from the origin give the d_min / d_avg / d_max deviations.

The same unitary solutions pull back to observable space as the non-unitary
transform T_C = (Omega W_g)^-1 C W_f, with Omega the diagonal that brings
T_C as close as possible to the plain least squares map T_LSQ = Psi_g Psi_f+.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .koopman import EigenfunctionTrajectory, KoopmanModel, reconstruct_observables
from .linalg import pinv, svd, unitarity_defect

UNITARY_TOL = 1e-8
DOMINANCE_TOL = 1e-9
GAMMA_ZERO_TOL = 1e-14
OMEGA_ZERO_TOL = 1e-14
DEGENERATE_RECT_TOL = 1e-9


class ContractViolationError(ValueError):
    """An input violated a documented precondition (non-unitary C, bad corners)."""


@dataclass(frozen=True)
class ParetoCorners:
    """The two closed-form corner solutions and their residual pairs.

    ``permutation`` maps row i of system f to its matched row in system g;
    ``gamma`` holds the unit-modulus diagonal entries of C_r2 = Gamma P.
    Corner dominance (r1_at_cr1 <= r1_at_cr2 and r2_at_cr2 <= r2_at_cr1, up
    to DOMINANCE_TOL) is what makes the rectangle construction meaningful.
    """

    c_r1: np.ndarray
    c_r2: np.ndarray
    permutation: np.ndarray
    gamma: np.ndarray
    r1_at_cr1: float
    r2_at_cr1: float
    r1_at_cr2: float
    r2_at_cr2: float


@dataclass(frozen=True)
class DeviationTriple:
    """Deviation-from-conjugacy summary: d_min <= d_avg <= d_max."""

    d_min: float
    d_avg: float
    d_max: float


@dataclass(frozen=True)
class ConjugacyReport:
    """Full comparison output.

    ``normalization`` records which system's Frobenius norms divided the
    residuals ("none", "f", or "g"); ``ref_norms`` stores the divisors
    (1, 1) when no reference was chosen. ``psi_residuals`` maps transform
    name -> (operator residual, trajectory residual) in observable space.
    """

    corners: ParetoCorners
    deviations: DeviationTriple
    normalization: str
    ref_norms: tuple[float, float]
    t_c_r1: np.ndarray
    t_c_r2: np.ndarray
    t_lsq: np.ndarray
    psi_residuals: dict[str, tuple[float, float]] = field(default_factory=dict)


def _phi_array(traj) -> np.ndarray:
    if isinstance(traj, EigenfunctionTrajectory):
        return traj.phi
    return np.asarray(traj, dtype=complex)


def _psi_array(obs) -> np.ndarray:
    psi = getattr(obs, "psi", obs)
    return np.asarray(psi, dtype=complex)


def residual_r1(phi_f, phi_g, c) -> float:
    """Trajectory residual || Phi_g - C Phi_f ||_F."""
    pf, pg = _phi_array(phi_f), _phi_array(phi_g)
    if pf.shape != pg.shape:
        raise ValueError(f"shape mismatch {pf.shape} vs {pg.shape}")
    c = np.asarray(c, dtype=complex)
    if c.shape != (pf.shape[0], pf.shape[0]):
        raise ValueError(f"C shape {c.shape} does not match Phi rows {pf.shape[0]}")
    return float(np.linalg.norm(pg - c @ pf))


def residual_r2(lambdas_f, lambdas_g, c) -> float:
    """Spectral residual || Lambda_f - C* Lambda_g C ||_F for unitary C."""
    lf = np.asarray(lambdas_f, dtype=complex).reshape(-1)
    lg = np.asarray(lambdas_g, dtype=complex).reshape(-1)
    if lf.shape != lg.shape:
        raise ValueError(f"spectrum length mismatch {lf.shape} vs {lg.shape}")
    c = np.asarray(c, dtype=complex)
    defect = unitarity_defect(c)
    if defect > UNITARY_TOL:
        raise ContractViolationError(
            f"C is not unitary (defect {defect:.3e} > {UNITARY_TOL:.0e})"
        )
    conjugated = c.conj().T @ (lg[:, None] * c)
    diag = np.arange(lf.shape[0])
    conjugated[diag, diag] -= lf
    return float(np.linalg.norm(conjugated))


def solve_c_r1(phi_f, phi_g) -> np.ndarray:
    """Unitary minimizer of r1: U V* from the SVD of Phi_g Phi_f*."""
    pf, pg = _phi_array(phi_f), _phi_array(phi_g)
    if pf.shape != pg.shape:
        raise ValueError(f"shape mismatch {pf.shape} vs {pg.shape}")
    res = svd(pg @ pf.conj().T)
    return res.U @ res.V.conj().T


def _assignment(cost: np.ndarray) -> np.ndarray:
    """Exact minimum-cost assignment on a square cost matrix, O(n^3).

    Shortest augmenting path formulation with dual potentials. Strict
    less-than comparisons make the scan order (hence tie-breaking) fixed:
    among equal-cost alternatives the lowest column index encountered first
    wins, so results are deterministic.
    """
    n = cost.shape[0]
    # 1-based columns; column 0 is the virtual root of each augmenting path.
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    assigned_row = np.zeros(n + 1, dtype=int)
    parent = np.zeros(n + 1, dtype=int)
    padded = np.empty((n + 1, n + 1))
    padded[1:, 1:] = cost
    for i in range(1, n + 1):
        assigned_row[0] = i
        j0 = 0
        min_reduced = np.full(n + 1, np.inf)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = assigned_row[j0]
            free = ~used
            free[0] = False
            reduced = padded[i0, free] - u[i0] - v[free]
            idx = np.flatnonzero(free)
            better = reduced < min_reduced[idx]
            if np.any(better):
                upd = idx[better]
                min_reduced[upd] = reduced[better]
                parent[upd] = j0
            pos = int(np.argmin(min_reduced[idx]))
            delta = min_reduced[idx][pos]
            j1 = int(idx[pos])
            u[assigned_row[used]] += delta
            v[used] -= delta
            min_reduced[~used] -= delta
            j0 = j1
            if assigned_row[j0] == 0:
                break
        while j0 != 0:
            j1 = parent[j0]
            assigned_row[j0] = assigned_row[j1]
            j0 = j1
    match = np.empty(n, dtype=int)
    for j in range(1, n + 1):
        match[assigned_row[j] - 1] = j - 1
    return match


def solve_permutation(lambdas_f, lambdas_g) -> np.ndarray:
    """Match spectra: permutation pi minimizing sum |lambda_f[i] - lambda_g[pi[i]]|^2."""
    lf = np.asarray(lambdas_f, dtype=complex).reshape(-1)
    lg = np.asarray(lambdas_g, dtype=complex).reshape(-1)
    if lf.shape != lg.shape:
        raise ValueError(f"spectrum length mismatch {lf.shape} vs {lg.shape}")
    cost = np.abs(lf[:, None] - lg[None, :]) ** 2
    return _assignment(cost)


def assignment_cost(lambdas_f, lambdas_g, permutation) -> float:
    """Total squared matching cost of a given permutation."""
    lf = np.asarray(lambdas_f, dtype=complex).reshape(-1)
    lg = np.asarray(lambdas_g, dtype=complex).reshape(-1)
    return float(np.sum(np.abs(lf - lg[np.asarray(permutation)]) ** 2))


def permutation_matrix(permutation) -> np.ndarray:
    """Matrix P with P[pi[i], i] = 1: row i of (P @ Phi_f) at slot pi[i]."""
    pi = np.asarray(permutation, dtype=int)
    n = pi.shape[0]
    p = np.zeros((n, n))
    p[pi, np.arange(n)] = 1.0
    return p


def solve_gamma(phi_f, phi_g, permutation) -> np.ndarray:
    """Unit-modulus diagonal re-phasing the permuted rows onto Phi_g.

    The unconstrained least squares factor is Phi_g (P Phi_f)+; keeping only
    its diagonal and projecting each entry to the unit circle is the unitary
    polar factor of that diagonal. Entries with modulus below GAMMA_ZERO_TOL
    carry no phase information and default to 1.
    """
    pf, pg = _phi_array(phi_f), _phi_array(phi_g)
    p = permutation_matrix(permutation)
    aligned = p @ pf
    raw = np.diag(pg @ pinv(aligned))
    mod = np.abs(raw)
    safe = np.where(mod < GAMMA_ZERO_TOL, 1.0, raw)
    return np.where(mod < GAMMA_ZERO_TOL, 1.0 + 0.0j, safe / np.abs(safe))


def solve_c_r2(phi_f, phi_g, lambdas_f, lambdas_g):
    """Unitary minimizer of r2, phased to also help r1: C_r2 = Gamma P.

    Returns (C_r2, permutation, gamma). Any unit-modulus diagonal leaves r2
    at the assignment optimum, so gamma is free to chase the trajectory fit.
    """
    pi = solve_permutation(lambdas_f, lambdas_g)
    gamma = solve_gamma(phi_f, phi_g, pi)
    c = gamma[:, None] * permutation_matrix(pi)
    return c, pi, gamma


def mean_corner_distance(d1: float, d2: float) -> float:
    """Mean distance from the center of a d1 x d2 rectangle to its points.

    Closed form of the uniform average of sqrt(x^2 + y^2) over the rectangle
    [-d1/2, d1/2] x [-d2/2, d2/2]. Equivalently, the mean distance from the
    origin over a corner rectangle of half the side lengths. Degenerates to
    the segment mean max(d1, d2)/4 when one side collapses, and to 0 at a
    point.
    """
    if d1 < 0 or d2 < 0:
        raise ValueError(f"sides must be nonnegative, got ({d1}, {d2})")
    big, small = (d1, d2) if d1 >= d2 else (d2, d1)
    if big == 0.0:
        return 0.0
    if small < 1e-12 * big:
        return big / 4.0
    diag = np.hypot(d1, d2)
    num = d2**3 * np.arcsinh(d1 / d2) + d1**3 * np.arcsinh(d2 / d1) + 2 * d1 * d2 * diag
    return float(num / (12.0 * d1 * d2))


def _segment_mean(a: float, b_lo: float, b_hi: float) -> float:
    """Mean of sqrt(a^2 + y^2) for y uniform on [b_lo, b_hi]."""
    if b_hi - b_lo <= 0.0:
        return float(np.hypot(a, b_lo))
    if a == 0.0:
        return 0.5 * (b_lo + b_hi)

    def antiderivative(y: float) -> float:
        return 0.5 * (y * np.hypot(a, y) + a * a * np.arcsinh(y / a))

    return float((antiderivative(b_hi) - antiderivative(b_lo)) / (b_hi - b_lo))


def _rectangle_mean(a_lo, a_hi, b_lo, b_hi) -> float:
    """Mean distance from the origin over [a_lo, a_hi] x [b_lo, b_hi]."""
    num = (
        a_hi * b_hi * mean_corner_distance(2 * a_hi, 2 * b_hi)
        - a_lo * b_hi * mean_corner_distance(2 * a_lo, 2 * b_hi)
        - a_hi * b_lo * mean_corner_distance(2 * a_hi, 2 * b_lo)
        + a_lo * b_lo * mean_corner_distance(2 * a_lo, 2 * b_lo)
    )
    return float(num / ((a_hi - a_lo) * (b_hi - b_lo)))


def pareto_deviations(corners: ParetoCorners) -> DeviationTriple:
    """d_min / d_avg / d_max from the two corner residual pairs.

    The rectangle [r1(C_r1), r1(C_r2)] x [r2(C_r2), r2(C_r1)] bounds every
    Pareto-optimal residual pair; d_min and d_max are the distances to its
    near and far corners and d_avg is the exact mean distance over it. When
    a side collapses below DEGENERATE_RECT_TOL * d_max, the mean is taken
    over the remaining segment (both sides collapsed: d_avg = d_min), which
    removes the 0/0 in the closed form without changing the limit.
    """
    a_lo, a_hi = corners.r1_at_cr1, corners.r1_at_cr2
    b_lo, b_hi = corners.r2_at_cr2, corners.r2_at_cr1
    d_max = float(np.hypot(a_hi, b_hi))
    tol = DOMINANCE_TOL * max(1.0, d_max)
    if a_lo > a_hi + tol or b_lo > b_hi + tol:
        raise ContractViolationError(
            "corner dominance violated: "
            f"r1 {a_lo:.6e} vs {a_hi:.6e}, r2 {b_lo:.6e} vs {b_hi:.6e}"
        )
    # Rounding can leave the optimal corner a hair above the other one.
    a_hi = max(a_hi, a_lo)
    b_hi = max(b_hi, b_lo)
    d_min = float(np.hypot(a_lo, b_lo))
    width_flat = (a_hi - a_lo) <= DEGENERATE_RECT_TOL * d_max
    height_flat = (b_hi - b_lo) <= DEGENERATE_RECT_TOL * d_max
    if width_flat and height_flat:
        d_avg = d_min
    elif width_flat:
        d_avg = _segment_mean(0.5 * (a_lo + a_hi), b_lo, b_hi)
    elif height_flat:
        d_avg = _segment_mean(0.5 * (b_lo + b_hi), a_lo, a_hi)
    else:
        d_avg = _rectangle_mean(a_lo, a_hi, b_lo, b_hi)
    d_avg = min(max(d_avg, d_min), d_max)
    return DeviationTriple(d_min=d_min, d_avg=d_avg, d_max=d_max)


def lsq_transform(psi_f, psi_g) -> np.ndarray:
    """Plain least squares observable-space map T_LSQ = Psi_g Psi_f+."""
    pf, pg = _psi_array(psi_f), _psi_array(psi_g)
    if pf.shape != pg.shape:
        raise ValueError(f"shape mismatch {pf.shape} vs {pg.shape}")
    return pg @ pinv(pf)


def recover_t(
    c,
    model_f: KoopmanModel,
    model_g: KoopmanModel,
    psi_f,
    psi_g,
    t_lsq: np.ndarray | None = None,
) -> np.ndarray:
    """Pull a unitary eigenfunction-space C back to observable space.

    T_C = (Omega W_g)^-1 C W_f, where the diagonal Omega resolves the scale
    freedom of the left eigenvectors by matching the least squares transform:
    Omega^-1 = Diag(W_g T_LSQ (C W_f)+). Near-zero diagonal entries carry no
    information and are replaced by 1 (with a warning).
    """
    c = np.asarray(c, dtype=complex)
    if t_lsq is None:
        t_lsq = lsq_transform(psi_f, psi_g)
    cwf = c @ model_f.W
    omega_inv = np.diag(model_g.W @ t_lsq @ pinv(cwf)).copy()
    tiny = np.abs(omega_inv) < OMEGA_ZERO_TOL
    if np.any(tiny):
        warnings.warn(
            f"{int(tiny.sum())} scale entries below {OMEGA_ZERO_TOL:.0e} replaced by 1",
            RuntimeWarning,
            stacklevel=2,
        )
        omega_inv[tiny] = 1.0
    return np.linalg.solve(model_g.W, omega_inv[:, None] * cwf)


def _psi_space_residuals(t, k_f, k_g, psi_f, psi_g) -> tuple[float, float]:
    """(operator, trajectory) residuals of a candidate observable-space T."""
    try:
        conj = np.linalg.solve(t, k_g @ t)
        op = float(np.linalg.norm(k_f - conj))
    except np.linalg.LinAlgError:
        op = float("inf")
    traj = float(np.linalg.norm(psi_g - t @ psi_f))
    return op, traj


def compare(
    model_f: KoopmanModel,
    phi_f: EigenfunctionTrajectory,
    model_g: KoopmanModel,
    phi_g: EigenfunctionTrajectory,
    normalization: str = "none",
) -> ConjugacyReport:
    """Full deviation-from-conjugacy comparison of two identified systems.

    Solves both corner transformations, evaluates the four residuals
    (optionally divided by the reference system's ||Phi||_F and ||Lambda||_F
    when ``normalization`` is "f" or "g"), forms the deviation triple, and
    recovers the observable-space transforms T_C and T_LSQ together with
    their residuals. Both corners are always computed; coincidence is
    reported through the numbers rather than assumed.
    """
    if normalization not in ("none", "f", "g"):
        raise ValueError(f"normalization must be 'none', 'f' or 'g', got {normalization!r}")
    pf, pg = _phi_array(phi_f), _phi_array(phi_g)
    if pf.shape != pg.shape:
        raise ValueError(
            f"systems must share dimensions, got {pf.shape} vs {pg.shape}"
        )
    c1 = solve_c_r1(pf, pg)
    c2, pi, gamma = solve_c_r2(pf, pg, model_f.lambdas, model_g.lambdas)

    if normalization == "f":
        phi_norm = float(np.linalg.norm(pf))
        lam_norm = float(np.linalg.norm(model_f.lambdas))
    elif normalization == "g":
        phi_norm = float(np.linalg.norm(pg))
        lam_norm = float(np.linalg.norm(model_g.lambdas))
    else:
        phi_norm = lam_norm = 1.0
    if phi_norm == 0.0 or lam_norm == 0.0:
        raise ValueError("reference system has zero norm; cannot normalize")

    corners = ParetoCorners(
        c_r1=c1,
        c_r2=c2,
        permutation=pi,
        gamma=gamma,
        r1_at_cr1=residual_r1(pf, pg, c1) / phi_norm,
        r2_at_cr1=residual_r2(model_f.lambdas, model_g.lambdas, c1) / lam_norm,
        r1_at_cr2=residual_r1(pf, pg, c2) / phi_norm,
        r2_at_cr2=residual_r2(model_f.lambdas, model_g.lambdas, c2) / lam_norm,
    )
    deviations = pareto_deviations(corners)

    if isinstance(phi_f, EigenfunctionTrajectory):
        psi_f_mat = reconstruct_observables(model_f, phi_f)
    else:
        psi_f_mat = np.linalg.solve(model_f.W, pf / model_f.scales[:, None])
    if isinstance(phi_g, EigenfunctionTrajectory):
        psi_g_mat = reconstruct_observables(model_g, phi_g)
    else:
        psi_g_mat = np.linalg.solve(model_g.W, pg / model_g.scales[:, None])

    t_lsq = lsq_transform(psi_f_mat, psi_g_mat)
    t_c1 = recover_t(c1, model_f, model_g, psi_f_mat, psi_g_mat, t_lsq=t_lsq)
    t_c2 = recover_t(c2, model_f, model_g, psi_f_mat, psi_g_mat, t_lsq=t_lsq)
    residuals = {
        "T_C_r1": _psi_space_residuals(t_c1, model_f.K, model_g.K, psi_f_mat, psi_g_mat),
        "T_C_r2": _psi_space_residuals(t_c2, model_f.K, model_g.K, psi_f_mat, psi_g_mat),
        "T_LSQ": _psi_space_residuals(t_lsq, model_f.K, model_g.K, psi_f_mat, psi_g_mat),
    }
    return ConjugacyReport(
        corners=corners,
        deviations=deviations,
        normalization=normalization,
        ref_norms=(phi_norm, lam_norm),
        t_c_r1=t_c1,
        t_c_r2=t_c2,
        t_lsq=t_lsq,
        psi_residuals=residuals,
    )
