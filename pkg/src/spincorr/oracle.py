"""Brute-force quantum correlations of arbitrary two-qubit density matrices.

Nothing here knows about X states or Bell bases: each measure is built from its
definition (eigendecomposition, matrix square root, explicit measurement
optimization), so it can check the closed forms independently.  Qubit A is the
first tensor factor and is the one measured.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np

SQRT_HALF = 1.0 / math.sqrt(2.0)

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
NEG_EIG_TOL = 1e-10
JACOBI_TOL = 1e-14
JACOBI_MAX_SWEEPS = 100
# eigen-pairs with p_m + p_n below this are left out of the Fisher sums
FISHER_FLOOR = 1e-14

I2 = np.eye(2, dtype=complex)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = (SX, SY, SZ)
# sigma_mu acting on qubit A
LOCAL_A = tuple(np.kron(s, I2) for s in PAULI)


class ValidationError(ValueError):
    """Input is not a valid density matrix within tolerance."""


@dataclass(frozen=True)
class EigenSystem:
    values: np.ndarray  # descending
    vectors: np.ndarray  # columns


@dataclass(frozen=True)
class MeasurementDirection:
    theta: float
    phi: float

    def unit_vector(self) -> np.ndarray:
        st = math.sin(self.theta)
        return np.array([st * math.cos(self.phi), st * math.sin(self.phi), math.cos(self.theta)])


def jacobi_eigh(a: np.ndarray, tol: float = JACOBI_TOL, max_sweeps: int = JACOBI_MAX_SWEEPS):
    """Cyclic Jacobi for a small Hermitian (or real symmetric) matrix.

    Returns (values, vectors) with values in descending order and the
    eigenvectors as columns.  Each rotation first removes the phase of the
    pivot, then applies the usual real rotation.  Works in the precision of
    the input (complex128 or clongdouble).
    """
    a = np.array(a)
    a = a.astype(np.result_type(a.dtype, np.complex64))
    real = np.real(a).dtype.type
    n = a.shape[0]
    v = np.eye(n, dtype=a.dtype)
    one = real(1)
    offdiag = ~np.eye(n, dtype=bool)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.abs(a[offdiag]) ** 2))
        if off < tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                mag = np.abs(apq)
                if mag < 1e-300:
                    continue
                # phase step: make a[p, q] real and positive
                ph = apq / mag
                a[:, q] *= np.conj(ph)
                a[q, :] *= ph
                v[:, q] *= np.conj(ph)
                theta = (a[q, q].real - a[p, p].real) / (2 * mag)
                t = one / (np.abs(theta) + np.sqrt(theta * theta + one))
                if theta < 0:
                    t = -t
                c = one / np.sqrt(t * t + one)
                s = t * c
                ap, aq = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                ap, aq = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * ap - s * aq
                a[q, :] = s * ap + c * aq
                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    else:
        raise RuntimeError("Jacobi iteration did not converge")
    vals = np.real(np.diag(a))
    order = np.argsort(-vals, kind="stable")
    return vals[order], v[:, order]


def validate_density(rho) -> np.ndarray:
    rho = np.asarray(rho)
    rho = rho.astype(np.result_type(rho.dtype, np.complex128))
    if rho.shape != (4, 4):
        raise ValidationError(f"expected a 4x4 matrix, got shape {rho.shape}")
    if np.max(np.abs(rho - rho.conj().T)) > HERMITIAN_TOL:
        raise ValidationError("matrix is not Hermitian")
    if abs(np.trace(rho) - 1.0) > TRACE_TOL:
        raise ValidationError("trace differs from 1")
    return rho


def eig4(rho) -> EigenSystem:
    rho = validate_density(rho)
    vals, vecs = jacobi_eigh(rho)
    if vals[-1] < -NEG_EIG_TOL:
        raise ValidationError(f"negative eigenvalue {vals[-1]:.3e}")
    return EigenSystem(np.clip(vals, 0.0, 1.0), vecs)


def sqrt_density(rho) -> np.ndarray:
    es = eig4(rho)
    v = es.vectors
    return (v * np.sqrt(es.values)) @ v.conj().T


def _lambda_max(m: np.ndarray):
    vals, _ = jacobi_eigh(0.5 * (m + m.T))
    return vals[0]


def w_matrix(rho) -> np.ndarray:
    """W_{mu nu} = Tr(sqrt(rho) sigma_mu sqrt(rho) sigma_nu), with sigma on qubit A."""
    sr = sqrt_density(rho)
    w = np.empty((3, 3), dtype=sr.real.dtype)
    for i, si in enumerate(LOCAL_A):
        left = sr @ si @ sr
        for j, sj in enumerate(LOCAL_A):
            w[i, j] = np.trace(left @ sj).real
    return 0.5 * (w + w.T)


def lqu_bruteforce(rho) -> float:
    """1 - largest eigenvalue of W.

    Near-zero eigenvalues of rho enter through their square roots, so feed an
    extended-precision matrix (``clongdouble``) when 1e-8 accuracy matters.
    """
    return float(1 - _lambda_max(w_matrix(rho)))


def _local_elements(es: EigenSystem):
    v = es.vectors
    return [v.conj().T @ s @ v for s in LOCAL_A]


def m_matrix(rho) -> np.ndarray:
    """Fisher matrix M_{mu nu} = sum 2 p_m p_n/(p_m+p_n) <m|s_mu|n><n|s_nu|m>.

    The diagonal pairs m == n are included; they vanish for Bell-diagonal
    states and keep the sum independent of the basis chosen inside degenerate
    eigenspaces.
    """
    es = eig4(rho)
    p = es.values
    den = p[:, None] + p[None, :]
    keep = den > FISHER_FLOOR
    coef = np.where(keep, 2.0 * np.outer(p, p) / np.where(keep, den, 1.0), 0.0)
    el = _local_elements(es)
    m = np.empty((3, 3), dtype=p.dtype)
    for i in range(3):
        for j in range(3):
            m[i, j] = np.sum(coef * el[i] * el[j].T).real
    return 0.5 * (m + m.T)


def lqfi_bruteforce(rho) -> float:
    return float(1 - _lambda_max(m_matrix(rho)))


def fisher_information(rho, direction) -> float:
    """F(rho, n.sigma (x) I) = 1/2 sum (p_m - p_n)^2/(p_m + p_n) |<m|H|n>|^2."""
    n = np.asarray(direction, dtype=float)
    n = n / np.linalg.norm(n)
    h = sum(c * s for c, s in zip(n, LOCAL_A))
    es = eig4(rho)
    p = es.values
    hm = es.vectors.conj().T @ h @ es.vectors
    den = p[:, None] + p[None, :]
    keep = den > FISHER_FLOOR
    num = (p[:, None] - p[None, :]) ** 2
    return 0.5 * float(np.sum(np.where(keep, num / np.where(keep, den, 1.0), 0.0) * np.abs(hm) ** 2))


# ---------------------------------------------------------------------------
# discord


def _xlog2x(x):
    x = np.asarray(x, dtype=float)
    return np.where(x > 0, x * np.log2(np.where(x > 0, x, 1.0)), 0.0)


def _qubit_entropy(bloch_len):
    r = np.clip(bloch_len, 0.0, 1.0)
    return -(_xlog2x((1 + r) / 2) + _xlog2x((1 - r) / 2))


def von_neumann_bits(rho) -> float:
    return float(-np.sum(_xlog2x(eig4(rho).values)))


def pauli_components(rho) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(a, b, T): Bloch vectors of A and B and the correlation matrix T_ij = Tr(rho s_i s_j)."""
    rho = np.asarray(rho, dtype=complex)
    a = np.array([np.trace(rho @ np.kron(s, I2)).real for s in PAULI])
    b = np.array([np.trace(rho @ np.kron(I2, s)).real for s in PAULI])
    t = np.array([[np.trace(rho @ np.kron(si, sj)).real for sj in PAULI] for si in PAULI])
    return a, b, t


def _conditional_entropy(a, b, t, n):
    """sum_k q_k S(rho_B|k) for projective measurement of A along unit vectors n (..., 3)."""
    na = n @ a
    tn = n @ t  # T^T n
    total = 0.0
    for sign in (1.0, -1.0):
        q = 0.5 * (1.0 + sign * na)
        vec = b + sign * tn
        nrm = np.linalg.norm(vec, axis=-1)
        safe_q = np.where(q > 1e-14, q, 1.0)
        r = np.where(q > 1e-14, nrm / (2.0 * safe_q), 0.0)
        total = total + np.where(q > 1e-14, q * _qubit_entropy(r), 0.0)
    return total


def _direction(theta, phi):
    st = np.sin(theta)
    return np.stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta)], axis=-1)


def discord_bruteforce(
    rho,
    grid: Tuple[int, int] = (181, 72),
    refine_iters: int = 40,
    return_direction: bool = False,
):
    """Entropic discord I - J with the measurement direction found numerically.

    A (theta, phi) grid is scanned, then the best cell is polished by a
    pattern search whose step halves ``refine_iters`` times.
    """
    rho = validate_density(rho)
    a, b, t = pauli_components(rho)
    s_ab = von_neumann_bits(rho)
    s_a = float(_qubit_entropy(np.linalg.norm(a)))

    n_theta, n_phi = grid
    thetas = np.linspace(0.0, math.pi, n_theta)
    phis = np.arange(n_phi) * (2.0 * math.pi / n_phi)
    th, ph = np.meshgrid(thetas, phis, indexing="ij")
    cond = _conditional_entropy(a, b, t, _direction(th, ph))
    # argmin returns the first minimum in C order: ties resolve to smallest (theta, phi)
    k = int(np.argmin(cond))
    i, j = divmod(k, n_phi)
    best_t, best_p, best = thetas[i], phis[j], float(cond[i, j])

    def f(tt, pp):
        return float(_conditional_entropy(a, b, t, _direction(np.array(tt), np.array(pp))))

    step = math.pi / max(n_theta - 1, 1)
    for _ in range(refine_iters):
        moved = True
        polls = 0
        while moved and polls < 50:
            moved = False
            polls += 1
            for dt, dp in ((step, 0.0), (-step, 0.0), (0.0, step), (0.0, -step)):
                val = f(best_t + dt, best_p + dp)
                if val < best - 1e-16:
                    best_t, best_p, best = best_t + dt, best_p + dp, val
                    moved = True
        step *= 0.5

    q = s_a - s_ab + best
    q = max(q, 0.0)
    if return_direction:
        tt = best_t % (2 * math.pi)
        if tt > math.pi:
            tt = 2 * math.pi - tt
            best_p += math.pi
        return q, MeasurementDirection(tt, best_p % (2 * math.pi))
    return q


def mutual_information(rho) -> float:
    rho = validate_density(rho)
    a, b, _ = pauli_components(rho)
    return float(_qubit_entropy(np.linalg.norm(a)) + _qubit_entropy(np.linalg.norm(b))) - von_neumann_bits(rho)


# ---------------------------------------------------------------------------
# fixed transforms


def fixed_transforms() -> Dict[str, np.ndarray]:
    """R (computational -> Bell basis), O = I (x) sigma_x and H2 = H (x) H."""
    r = SQRT_HALF * np.array(
        [[1, 0, 0, 1], [0, 1, 1, 0], [0, 1, -1, 0], [1, 0, 0, -1]], dtype=float
    )
    o = np.kron(np.eye(2), SX.real)
    h = SQRT_HALF * np.array([[1, 1], [1, -1]], dtype=float)
    return {"R": r, "O": o, "H2": np.kron(h, h)}


def conjugate(rho, u) -> np.ndarray:
    u = np.asarray(u)
    return u @ rho @ u.conj().T


def random_qubit_unitary(rng: np.random.Generator) -> np.ndarray:
    """Haar-random 2x2 unitary via QR of a complex Gaussian matrix."""
    z = (rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))) / math.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def unitarize(u, dtype=np.clongdouble) -> np.ndarray:
    """Re-orthonormalize the columns of ``u`` in ``dtype`` (Gram-Schmidt, two passes).

    A double-precision unitary is unitary only to ~1e-16, which shifts a zero
    eigenvalue of the conjugated state by that much; under the square root in
    the skew information that becomes ~1e-8.
    """
    u = np.array(u, dtype=dtype)
    n = u.shape[1]
    for j in range(n):
        for _ in range(2):
            for k in range(j):
                u[:, j] -= (u[:, k].conj() @ u[:, j]) * u[:, k]
        u[:, j] /= np.sqrt(np.real(u[:, j].conj() @ u[:, j]))
    return u


def all_measures(rho) -> Tuple[float, float, float]:
    """(Q, U, F) by brute force."""
    return discord_bruteforce(rho), lqu_bruteforce(rho), lqfi_bruteforce(rho)
