"""
Periodic coefficient tensors a_ij^ab(y) and the built-in families
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, Any, Optional, Sequence, Tuple

import numpy as np

from ..core.errors import CoefficientError

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi


class Smoothness(Enum):
    """How regular a coefficient family is"""
    CONSTANT = "constant"
    SMOOTH = "smooth"
    PIECEWISE_CONSTANT = "piecewise-constant"


FAMILIES = ("constant", "classical", "laminate", "trig", "checkerboard")


@dataclass(frozen=True, eq=False)
class CoefficientField:
    """
    A 1-periodic fourth-order tensor field on the unit cell.

    Entries are laid out as a[..., i, j, alpha, beta]; the analytic
    gradient (when present) as g[..., k, i, j, alpha, beta].

    Isotropic fields layered across y1 carry their cell mean in
    _layer_mean; the cell solver then lifts the discontinuous part of
    the corrector pressure out of the Q1 space (see pressure_lift).
    """
    name: str
    dim: int
    mu: float
    smoothness: Smoothness
    params: Tuple[float, ...] = ()
    _eval: Callable[[np.ndarray], np.ndarray] = field(default=None, repr=False)
    _grad: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, repr=False)
    _adjoint_of: Optional["CoefficientField"] = field(default=None, repr=False)
    _layer_mean: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def smoothness_tag(self) -> str:
        return self.smoothness.value

    @property
    def has_analytic_gradient(self) -> bool:
        return self._grad is not None

    @property
    def has_pressure_lift(self) -> bool:
        return self._layer_mean is not None

    def pressure_lift(self, y: np.ndarray) -> Optional[np.ndarray]:
        """
        Known part g[..., j, beta] = a_1j^{1 beta}(y) - <a_1j^{1 beta}> of the
        corrector pressure pi_j^beta, or None for fields without layers.
        """
        if self._layer_mean is None:
            return None
        a = self.eval(y)
        return a[..., 0, :, 0, :] - self._layer_mean[0, :, 0, :]

    def eval(self, y: np.ndarray) -> np.ndarray:
        """Tensor entries at cell points y of shape (..., d)"""
        y = np.asarray(y, dtype=float)
        return self._eval(np.mod(y, 1.0))

    def analytic_gradient(self, y: np.ndarray) -> np.ndarray:
        if self._grad is None:
            from ..core.errors import AnalyticGradientError
            raise AnalyticGradientError(
                f"Family '{self.name}' has no analytic gradient", key="family"
            )
        y = np.asarray(y, dtype=float)
        return self._grad(np.mod(y, 1.0))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "family": self.name,
            "params": list(self.params),
            "dim": self.dim,
            "mu": self.mu,
            "smoothness": self.smoothness_tag,
        }


@dataclass
class EllipticityReport:
    """Extremal Rayleigh quotients over sampled (y, xi)"""
    min_quotient: float
    max_quotient: float
    mu: float
    samples: int
    tol: float = 1e-12

    @property
    def passed(self) -> bool:
        return (self.min_quotient >= self.mu - self.tol and
                self.max_quotient <= 1.0 / self.mu + self.tol)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "min_quotient": self.min_quotient,
            "max_quotient": self.max_quotient,
            "mu": self.mu,
            "samples": self.samples,
            "passed": self.passed,
        }


# ---------------------------------------------------------------------- #
# Constant tensors used to build families
# ---------------------------------------------------------------------- #
def identity_tensor(dim: int) -> np.ndarray:
    """delta_ij delta_ab"""
    eye = np.eye(dim)
    return np.einsum('ij,ab->ijab', eye, eye)


def transpose_tensor(dim: int) -> np.ndarray:
    """delta_ib delta_ja"""
    eye = np.eye(dim)
    return np.einsum('ib,ja->ijab', eye, eye)


def skew_tensor(dim: int) -> np.ndarray:
    """(delta_i1 delta_j2 - delta_i2 delta_j1) delta_ab on the first two axes"""
    eye = np.eye(dim)
    e = np.zeros((dim, dim))
    e[0, 1], e[1, 0] = 1.0, -1.0
    return np.einsum('ij,ab->ijab', e, eye)


def swap_pairs(a: np.ndarray) -> np.ndarray:
    """Index swap (i, alpha) <-> (j, beta) on the last four axes"""
    nd = a.ndim
    axes = list(range(nd - 4)) + [nd - 3, nd - 4, nd - 1, nd - 2]
    return np.transpose(a, axes)


def tensor_matrix(a0: np.ndarray) -> np.ndarray:
    """d^2 x d^2 matrix M[(i,a),(j,b)] of a constant tensor"""
    d = a0.shape[0]
    return np.transpose(a0, (0, 2, 1, 3)).reshape(d * d, d * d)


def _scalar_times(values: np.ndarray, tensor: np.ndarray) -> np.ndarray:
    return values[..., None, None, None, None] * tensor


def _mu_from_values(values: Sequence[float]) -> float:
    return float(min(min(values), 1.0 / max(values)))


# ---------------------------------------------------------------------- #
# Families
# ---------------------------------------------------------------------- #
def _constant(params: Sequence[float], dim: int) -> CoefficientField:
    if len(params) != dim ** 4:
        raise CoefficientError(
            f"constant family needs {dim ** 4} entries, got {len(params)}", key="params"
        )
    a0 = np.asarray(params, dtype=float).reshape(dim, dim, dim, dim)
    sym = tensor_matrix(a0)
    eig = np.linalg.eigvalsh(0.5 * (sym + sym.T))
    if eig[0] <= 0.0:
        raise CoefficientError("constant tensor is not elliptic (mu <= 0)", key="params")
    mu = float(min(eig[0], 1.0 / eig[-1]))
    a0 = a0.copy()
    a0.setflags(write=False)
    return CoefficientField(
        name="constant", dim=dim, mu=mu, smoothness=Smoothness.CONSTANT,
        params=tuple(float(p) for p in params),
        _eval=lambda y: np.broadcast_to(a0, y.shape[:-1] + a0.shape).copy(),
        _grad=lambda y: np.zeros(y.shape[:-1] + (dim,) + a0.shape),
    )


def _classical(params: Sequence[float], dim: int) -> CoefficientField:
    if len(params) != 1:
        raise CoefficientError("classical family takes one parameter mu", key="params")
    mu = float(params[0])
    if not 0.0 < mu <= 1.0:
        raise CoefficientError(f"classical family needs 0 < mu <= 1, got {mu}", key="params")
    a0 = mu * identity_tensor(dim)
    return CoefficientField(
        name="classical", dim=dim, mu=mu, smoothness=Smoothness.CONSTANT,
        params=(mu,),
        _eval=lambda y: np.broadcast_to(a0, y.shape[:-1] + a0.shape).copy(),
        _grad=lambda y: np.zeros(y.shape[:-1] + (dim,) + a0.shape),
    )


def _laminate(params: Sequence[float], dim: int) -> CoefficientField:
    if len(params) not in (2, 3):
        raise CoefficientError("laminate family takes [a1, a2] or [a1, a2, graded]", key="params")
    a1, a2 = float(params[0]), float(params[1])
    graded = len(params) == 3 and bool(params[2])
    if min(a1, a2) <= 0.0:
        raise CoefficientError("laminate layer values must be positive (mu > 0)", key="params")
    iso = identity_tensor(dim)
    mid, half = 0.5 * (a1 + a2), 0.5 * (a2 - a1)

    if graded:
        def lam(y):
            return mid - half * np.cos(TWO_PI * y[..., 0])

        def grad(y):
            g = np.zeros(y.shape[:-1] + (dim,) + iso.shape)
            g[..., 0, :, :, :, :] = _scalar_times(TWO_PI * half * np.sin(TWO_PI * y[..., 0]), iso)
            return g
        smooth = Smoothness.SMOOTH
    else:
        # a1 on y1 < 1/2, a2 above; the jump sits on a cell face for every even n
        def lam(y):
            return np.where(y[..., 0] < 0.5, a1, a2)
        grad = None
        smooth = Smoothness.PIECEWISE_CONSTANT

    return CoefficientField(
        name="laminate", dim=dim, mu=_mu_from_values([a1, a2]), smoothness=smooth,
        params=tuple(float(p) for p in params),
        _eval=lambda y: _scalar_times(lam(y), iso),
        _grad=grad,
        _layer_mean=mid * iso,
    )


def _trig(params: Sequence[float], dim: int) -> CoefficientField:
    if len(params) != 2:
        raise CoefficientError("trig family takes [mu, amplitude]", key="params")
    mu, amp = float(params[0]), float(params[1])
    if mu <= 0.0:
        raise CoefficientError("trig family needs mu > 0", key="params")
    if 1.0 - 1.2 * abs(amp) < mu or 1.0 + 1.2 * abs(amp) > 1.0 / mu:
        raise CoefficientError(
            f"trig amplitude {amp} breaks ellipticity bounds for mu={mu}", key="params"
        )
    t_id, t_tr, t_sk = identity_tensor(dim), transpose_tensor(dim), skew_tensor(dim)
    nu_amp = amp / 5.0

    def evaluate(y):
        y1, y2 = y[..., 0], y[..., 1]
        lam = 1.0 + amp * np.sin(TWO_PI * y1) * np.cos(TWO_PI * y2)
        nu = nu_amp * np.cos(TWO_PI * (y1 + y2))
        sig = amp * np.sin(TWO_PI * y2)
        return _scalar_times(lam, t_id) + _scalar_times(nu, t_tr) + _scalar_times(sig, t_sk)

    def gradient(y):
        y1, y2 = y[..., 0], y[..., 1]
        g = np.zeros(y.shape[:-1] + (dim,) + t_id.shape)
        dlam1 = TWO_PI * amp * np.cos(TWO_PI * y1) * np.cos(TWO_PI * y2)
        dlam2 = -TWO_PI * amp * np.sin(TWO_PI * y1) * np.sin(TWO_PI * y2)
        dnu = -TWO_PI * nu_amp * np.sin(TWO_PI * (y1 + y2))
        dsig2 = TWO_PI * amp * np.cos(TWO_PI * y2)
        g[..., 0, :, :, :, :] = _scalar_times(dlam1, t_id) + _scalar_times(dnu, t_tr)
        g[..., 1, :, :, :, :] = (_scalar_times(dlam2, t_id) + _scalar_times(dnu, t_tr)
                                 + _scalar_times(dsig2, t_sk))
        return g

    return CoefficientField(
        name="trig", dim=dim, mu=mu, smoothness=Smoothness.SMOOTH,
        params=(mu, amp), _eval=evaluate, _grad=gradient,
    )


def _checkerboard(params: Sequence[float], dim: int) -> CoefficientField:
    if len(params) != 2:
        raise CoefficientError("checkerboard family takes [c1, c2]", key="params")
    c1, c2 = float(params[0]), float(params[1])
    if min(c1, c2) <= 0.0:
        raise CoefficientError("checkerboard values must be positive (mu > 0)", key="params")
    iso = identity_tensor(dim)

    def evaluate(y):
        parity = np.floor(2.0 * y).astype(int).sum(axis=-1) % 2
        return _scalar_times(np.where(parity == 0, c1, c2), iso)

    return CoefficientField(
        name="checkerboard", dim=dim, mu=_mu_from_values([c1, c2]),
        smoothness=Smoothness.PIECEWISE_CONSTANT, params=(c1, c2), _eval=evaluate,
    )


_BUILDERS = {
    "constant": _constant,
    "classical": _classical,
    "laminate": _laminate,
    "trig": _trig,
    "checkerboard": _checkerboard,
}


def builtin_family(name: str, params: Sequence[float], dim: int = 2) -> CoefficientField:
    """Instantiate a built-in coefficient family"""
    builder = _BUILDERS.get(name)
    if builder is None:
        raise CoefficientError(f"Unknown coefficient family '{name}'", key="family")
    if dim < 2:
        raise CoefficientError("coefficient families need dim >= 2", key="dim")
    field_ = builder(list(params), dim)
    logger.debug("Built coefficient family %s params=%s mu=%.4g", name, field_.params, field_.mu)
    return field_


def check_ellipticity(A: CoefficientField, samples: int = 10_000, seed: int = 0,
                      tol: float = 1e-12) -> EllipticityReport:
    """Sample Rayleigh quotients a(y) xi.xi over unit-norm matrices xi"""
    if samples < 1:
        raise CoefficientError("samples must be >= 1", key="samples")
    rng = np.random.default_rng(seed)
    d = A.dim
    y = rng.random((samples, d))
    xi = rng.standard_normal((samples, d, d))
    xi /= np.linalg.norm(xi.reshape(samples, -1), axis=1)[:, None, None]
    q = np.einsum('pijab,pia,pjb->p', A.eval(y), xi, xi)
    return EllipticityReport(
        min_quotient=float(q.min()), max_quotient=float(q.max()),
        mu=A.mu, samples=samples, tol=tol,
    )


def adjoint(A: CoefficientField) -> CoefficientField:
    """A* with (a*)_ij^ab = a_ji^ba; adjoint(adjoint(A)) is A"""
    if A._adjoint_of is not None:
        return A._adjoint_of
    grad = None
    if A._grad is not None:
        grad = lambda y: swap_pairs(A._grad(y))
    layer_mean = None if A._layer_mean is None else swap_pairs(A._layer_mean)
    return CoefficientField(
        name=A.name + "*", dim=A.dim, mu=A.mu, smoothness=A.smoothness, params=A.params,
        _eval=lambda y: swap_pairs(A._eval(y)), _grad=grad, _adjoint_of=A,
        _layer_mean=layer_mean,
    )
