"""Free-space Green's functions and multipole kernels.

Every kernel is available in two forms: a pointwise public function
(``greens``, ``pressurelet``, ...) and a vectorised :class:`Kernel` whose
``block`` method maps displacement arrays to arrays of shape (..., p, q),
with ``p`` output and ``q`` input components.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import CoincidentPoints, InvalidOrder, MissingBeta, NonUnitNormal

EULER_GAMMA = 0.5772156649015329


class PDE(enum.Enum):
    POISSON = "poisson"
    MOD_HELMHOLTZ = "mhelm"
    STOKES = "stokes"
    MOD_STOKES = "mstokes"

    @classmethod
    def parse(cls, value) -> "PDE":
        if isinstance(value, cls):
            return value
        key = str(value).lower().replace("-", "_")
        aliases = {
            "poisson": cls.POISSON, "laplace": cls.POISSON,
            "mhelm": cls.MOD_HELMHOLTZ, "mod_helmholtz": cls.MOD_HELMHOLTZ,
            "modhelmholtz": cls.MOD_HELMHOLTZ,
            "stokes": cls.STOKES,
            "mstokes": cls.MOD_STOKES, "mod_stokes": cls.MOD_STOKES,
            "modstokes": cls.MOD_STOKES,
        }
        if key not in aliases:
            raise ValueError(f"unknown pde {value!r}")
        return aliases[key]

    @property
    def screened(self) -> bool:
        return self in (PDE.MOD_HELMHOLTZ, PDE.MOD_STOKES)

    @property
    def vector(self) -> bool:
        return self in (PDE.STOKES, PDE.MOD_STOKES)


def _require_beta(pde: PDE, beta: float) -> None:
    if pde.screened and not beta > 0:
        raise MissingBeta(f"{pde.value} needs beta > 0")


# ---------------------------------------------------------------------------
# small-argument-safe combinations for the modified Stokeslet


def _zk1_minus_one(z: np.ndarray) -> np.ndarray:
    """``z*K1(z) - 1`` without cancellation for small z."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    small = z < 2.0
    zs = z[small]
    if zs.size:
        w = 0.25 * zs * zs
        lg = np.log(0.5 * zs)
        # K1(z) = 1/z + I1(z) log(z/2) - (z/4) sum_k (psi(k+1)+psi(k+2)) w^k/(k!(k+1)!)
        acc = np.zeros_like(zs)
        term = np.ones_like(zs)
        for k in range(30):
            if k > 0:
                term = term * w / (k * (k + 1))
            acc += (special.digamma(k + 1) + special.digamma(k + 2)) * term
        out[small] = zs * special.i1(zs) * lg - w * acc
    zl = z[~small]
    if zl.size:
        out[~small] = zl * special.k1(zl) - 1.0
    return out


def _mstokes_parts(beta: float, r: np.ndarray):
    """Return a, b with G = -(1/(2 pi beta^2 r^2)) [a rr/r^2 - b I]."""
    z = beta * r
    z2k0 = z * z * special.k0(z)
    c = _zk1_minus_one(z)
    return z2k0 + 2.0 * c, z2k0 + c


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Kernel:
    """Vectorised free-space kernel.

    ``name`` is one of: laplace, mhelm, stokes, mstokes, pressure,
    stresslet, mhelm_multipole, laplace_multipole.
    """

    name: str
    beta: float = 0.0
    order: int = 0

    @property
    def shape(self) -> tuple[int, int]:
        return {
            "laplace": (1, 1), "mhelm": (1, 1),
            "stokes": (2, 2), "mstokes": (2, 2),
            "pressure": (1, 2), "stresslet": (2, 4),
            "mhelm_multipole": (1, 1), "laplace_multipole": (1, 1),
        }[self.name]

    @property
    def is_complex(self) -> bool:
        return self.name in ("mhelm_multipole", "laplace_multipole")

    @property
    def screened(self) -> bool:
        return self.name in ("mhelm", "mstokes", "mhelm_multipole")

    def block(self, dx, dy) -> np.ndarray:
        """Kernel values at displacements ``t - s`` = (dx, dy)."""
        dx = np.asarray(dx, dtype=float)
        dy = np.asarray(dy, dtype=float)
        r2 = dx * dx + dy * dy
        if np.any(r2 == 0):
            raise CoincidentPoints("kernel evaluated at coincident points")
        r = np.sqrt(r2)
        name = self.name
        if name == "laplace":
            return (-np.log(r) / (2 * np.pi))[..., None, None]
        if name == "mhelm":
            return (special.k0(self.beta * r) / (2 * np.pi))[..., None, None]
        if name == "stokes":
            lg = np.log(r)
            out = np.empty(dx.shape + (2, 2))
            out[..., 0, 0] = -lg + dx * dx / r2
            out[..., 1, 1] = -lg + dy * dy / r2
            out[..., 0, 1] = out[..., 1, 0] = dx * dy / r2
            return out / (4 * np.pi)
        if name == "mstokes":
            a, b = _mstokes_parts(self.beta, r)
            pre = -1.0 / (2 * np.pi * self.beta**2 * r2)
            out = np.empty(dx.shape + (2, 2))
            out[..., 0, 0] = a * dx * dx / r2 - b
            out[..., 1, 1] = a * dy * dy / r2 - b
            out[..., 0, 1] = out[..., 1, 0] = a * dx * dy / r2
            return out * pre[..., None, None]
        if name == "pressure":
            out = np.stack([dx / r2, dy / r2], axis=-1)[..., None, :]
            return out / (2 * np.pi)
        if name == "stresslet":
            comp = (dx, dy)
            out = np.empty(dx.shape + (2, 4))
            r4 = r2 * r2
            for i in range(2):
                for j in range(2):
                    for k in range(2):
                        out[..., i, 2 * j + k] = comp[i] * comp[j] * comp[k] / r4
            return out / np.pi
        if name == "mhelm_multipole":
            l = self.order
            val = special.kv(l, self.beta * r) * ((dx + 1j * dy) / r) ** l
            return val[..., None, None]
        if name == "laplace_multipole":
            return ((dx + 1j * dy) ** (-self.order))[..., None, None]
        raise ValueError(f"unknown kernel {name!r}")


def kernel_for(pde, beta: float = 0.0) -> Kernel:
    """Velocity/potential kernel of a PDE."""
    pde = PDE.parse(pde)
    _require_beta(pde, beta)
    return {
        PDE.POISSON: Kernel("laplace"),
        PDE.MOD_HELMHOLTZ: Kernel("mhelm", beta),
        PDE.STOKES: Kernel("stokes"),
        PDE.MOD_STOKES: Kernel("mstokes", beta),
    }[pde]


def make_multipole_kernel(pde, l: int, beta: float = 0.0) -> Kernel:
    pde = PDE.parse(pde)
    if pde is PDE.MOD_HELMHOLTZ:
        _require_beta(pde, beta)
        if l < 0:
            raise InvalidOrder("modified Helmholtz multipoles need l >= 0")
        return Kernel("mhelm_multipole", beta, l)
    if pde is PDE.POISSON:
        if l < 1:
            raise InvalidOrder("Laplace multipoles need l >= 1")
        return Kernel("laplace_multipole", 0.0, l)
    raise InvalidOrder(f"no multipole kernel for {pde.value}")


# ---------------------------------------------------------------------------
# pointwise public API


def _offset(t, s):
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    dx, dy = t[0] - s[0], t[1] - s[1]
    if dx == 0 and dy == 0:
        raise CoincidentPoints("t and s coincide")
    return dx, dy


def greens(pde, beta: float, t, s):
    """Free-space Green's function: a float, or a 2x2 array for Stokes flows."""
    kern = kernel_for(pde, beta)
    val = kern.block(*_offset(t, s))
    return float(val[0, 0]) if kern.shape == (1, 1) else val


def pressurelet(t, s) -> np.ndarray:
    return Kernel("pressure").block(*_offset(t, s))[0]


def multipole_kernel(pde, l: int, beta: float, t, s) -> complex:
    """``K_l(beta r) e^{i l theta}`` or ``1/(z - z')^l``."""
    kern = make_multipole_kernel(pde, l, beta)
    return complex(kern.block(*_offset(t, s))[0, 0])


def stresslet_dlp(t, s, n) -> np.ndarray:
    """Stokes double-layer kernel D with ``u_i = D_ij phi_j`` for normal n at s."""
    n = np.asarray(n, dtype=float)
    if abs(math.hypot(n[0], n[1]) - 1.0) > 1e-10:
        raise NonUnitNormal(f"|n| = {math.hypot(n[0], n[1])}")
    w = Kernel("stresslet").block(*_offset(t, s)).reshape(2, 2, 2)
    return w @ n


def modified_biharmonic_potential(beta: float, r):
    """``G_MB = -(1/(2 pi beta^2)) [K0(beta r) - log(1/r)]``."""
    r = np.asarray(r, dtype=float)
    return -(special.k0(beta * r) + np.log(r)) / (2 * np.pi * beta**2)
