"""Partial-wave solutions for a homogeneous cylinder (2D) or sphere (3D).

The field and its normal derivative are continuous across the boundary; the
interior wavenumber is ``k_b * n``. Point sources use the addition theorem of
the Green's function (same sign convention as :mod:`seagle.green`), and in
3D the source must lie on an axis through the sphere center, which makes
the expansion a pure Legendre series.
"""
from __future__ import annotations

from dataclasses import dataclass
import numpy as np
from scipy.special import eval_legendre, h1vp, hankel1, jv, jvp, spherical_jn, spherical_yn

from .green import green_scalar
from .grid import InvalidInputError, SourceSpec


class TruncationError(RuntimeError):
    """The partial-wave series did not converge at the requested truncation."""


@dataclass(frozen=True)
class HomogeneousScatterer:
    radius: float
    n: float
    center: tuple[float, ...] = (0.0, 0.0)

    def __post_init__(self):
        if not self.radius > 0:
            raise InvalidInputError("radius must be positive")
        if not self.n > 0:
            raise InvalidInputError("refractive index must be positive")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    @property
    def dim(self) -> int:
        return len(self.center)

    @property
    def shape(self) -> str:
        return "cylinder" if self.dim == 2 else "sphere"


def _sph_h(l, x):
    return spherical_jn(l, x) + 1j * spherical_yn(l, x)


def _sph_hp(l, x):
    return spherical_jn(l, x, derivative=True) + 1j * spherical_yn(l, x, derivative=True)


def _mode_coefficients(k, k1, R, J, Jp, H, Hp, J1, J1p):
    """Scattered (a) and interior (b) amplitudes per unit incident amplitude.

    Solves  J + a H = b J1,  k J' + a k H' = b k1 J1'  by Cramer's rule.
    """
    det = k * Hp * J1 - k1 * J1p * H
    a = (k1 * J * J1p - k * Jp * J1) / det
    b = k * (Hp * J - H * Jp) / det
    return a, b


def _basis_2d(orders, k, R, n):
    k1 = k * n
    return _mode_coefficients(k, k1, R, jv(orders, k * R), jvp(orders, k * R),
                              hankel1(orders, k * R), h1vp(orders, k * R),
                              jv(orders, k1 * R), jvp(orders, k1 * R))


def _basis_3d(orders, k, R, n):
    k1 = k * n
    return _mode_coefficients(k, k1, R, spherical_jn(orders, k * R),
                              spherical_jn(orders, k * R, derivative=True),
                              _sph_h(orders, k * R), _sph_hp(orders, k * R),
                              spherical_jn(orders, k1 * R),
                              spherical_jn(orders, k1 * R, derivative=True))


def default_truncation(k_b: float, radius: float) -> int:
    return int(np.ceil(k_b * radius)) + 15


def _incident_coefficients(scat: HomogeneousScatterer, source: SourceSpec, orders):
    """Regular-wave amplitudes of the incident field about the scatterer center, plus the
    reference direction (unit vector) the angular dependence is measured from."""
    k = source.k_b
    c = np.asarray(scat.center)
    if source.kind == "point":
        rel = np.asarray(source.location) - c
        rho_s = np.linalg.norm(rel)
        if rho_s <= scat.radius:
            raise InvalidInputError("point source must lie outside the scatterer")
        axis = rel / rho_s
        if scat.dim == 2:
            coef = -0.25j * hankel1(orders, k * rho_s)
        else:
            coef = -1j * k / (4 * np.pi) * (2 * orders + 1) * _sph_h(orders, k * rho_s)
    else:
        axis = np.asarray(source.direction, dtype=float)
        phase = np.exp(1j * k * np.dot(axis, c))
        if scat.dim == 2:
            coef = phase * 1j ** orders.astype(float)
        else:
            coef = phase * 1j ** orders.astype(float) * (2 * orders + 1)
    return coef, axis


def _series_terms(scat, source, pts, M):
    """Per-mode contributions, shape (modes, npts), to (scattered outside, interior inside)."""
    k = source.k_b
    R, n = scat.radius, scat.n
    rel = pts - np.asarray(scat.center)
    rho = np.linalg.norm(rel, axis=-1)
    if scat.dim == 2:
        orders = np.arange(-M, M + 1)
        coef, axis = _incident_coefficients(scat, source, orders)
        a, b = _basis_2d(orders, k, R, n)
        phi = np.arctan2(rel[:, 1], rel[:, 0]) - np.arctan2(axis[1], axis[0])
        ang = np.exp(1j * orders[:, None] * phi[None, :])
        out = (coef * a)[:, None] * hankel1(orders[:, None], k * rho[None, :]) * ang
        ins = (coef * b)[:, None] * jv(orders[:, None], k * n * rho[None, :]) * ang
        # pair +m and -m so the tail check sees one term per |m|
        mid = M
        out = np.concatenate([out[mid:mid + 1], out[mid + 1:] + out[:mid][::-1]])
        ins = np.concatenate([ins[mid:mid + 1], ins[mid + 1:] + ins[:mid][::-1]])
    else:
        orders = np.arange(0, M + 1)
        coef, axis = _incident_coefficients(scat, source, orders)
        a, b = _basis_3d(orders, k, R, n)
        with np.errstate(invalid="ignore", divide="ignore"):
            cos_t = np.where(rho > 0, rel @ axis / np.where(rho > 0, rho, 1.0), 1.0)
        leg = eval_legendre(orders[:, None], cos_t[None, :])
        out = (coef * a)[:, None] * _sph_h(orders[:, None], k * rho[None, :]) * leg
        ins = (coef * b)[:, None] * spherical_jn(orders[:, None], k * n * rho[None, :]) * leg
    return out, ins, rho


def analytic_field(scat: HomogeneousScatterer, source: SourceSpec, points: np.ndarray,
                   M_max: int | None = None, tail_tol: float = 1e-13,
                   max_doublings: int = 4, part: str = "total") -> np.ndarray:
    """Total (or scattered, ``part="scattered"``) field at ``points`` of shape ``(P, dim)``.

    Outside the scatterer the incident field is evaluated directly and the
    scattered series added; inside, the interior series is the total field.
    The truncation doubles until the last retained mode is below ``tail_tol``
    relative to the sum.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] != scat.dim or len(source.location or source.direction) != scat.dim:
        raise InvalidInputError("dimension mismatch between scatterer, source and points")
    M = default_truncation(source.k_b, scat.radius) if M_max is None else int(M_max)
    for _ in range(max_doublings + 1):
        out, ins, rho = _series_terms(scat, source, pts, M)
        inside = rho < scat.radius
        terms = np.where(inside[None, :], ins, out)
        total = terms.sum(axis=0)
        scale = np.maximum(np.abs(total), 1e-300)
        if np.all(np.abs(terms[-1]) <= tail_tol * scale + 1e-300):
            break
        M *= 2
    else:
        raise TruncationError(f"series not converged at M_max = {M // 2}")
    inc = np.zeros(len(pts), dtype=np.complex128)
    outside = ~inside
    if source.kind == "point":
        inc[outside] = green_scalar(pts[outside] - np.asarray(source.location), source.k_b)
    else:
        inc[outside] = np.exp(1j * source.k_b * pts[outside] @ np.asarray(source.direction))
    if part == "scattered":
        scattered = total.copy()
        if np.any(inside):
            # interior: scattered = total - incident
            if source.kind == "point":
                scattered[inside] -= green_scalar(pts[inside] - np.asarray(source.location), source.k_b)
            else:
                scattered[inside] -= np.exp(1j * source.k_b * pts[inside] @ np.asarray(source.direction))
        return scattered
    return np.where(inside, total, inc + total)

