"""Rule profiles, signal and noise specifications, and realization sampling."""

from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from ._validation import check_random_state, check_vector
from .exceptions import InvalidSize, MissingNetwork, ZeroSeedWeight

DEFAULT_GAMMA_FLOOR = 1e-3
CORRELATIONS = ("independent", "perfectly_correlated", "custom")
LOCI = ("processing", "expressing")


@dataclass(frozen=True, eq=False)
class RuleProfile:
    """Per-player seed weights ``m`` and adjustment speeds ``gamma``."""

    m: np.ndarray
    gamma: np.ndarray
    gamma_floor: float = DEFAULT_GAMMA_FLOOR

    def __post_init__(self):
        if not self.gamma_floor > 0:
            raise ValueError("gamma_floor must be positive")
        m = np.atleast_1d(np.asarray(self.m, dtype=np.float64))
        n = m.shape[0]
        m = check_vector(m, n, "m", low=0.0, high=1.0)
        g = check_vector(self.gamma if np.ndim(self.gamma) else float(self.gamma), n,
                         "gamma", low=self.gamma_floor, high=1.0)
        m.setflags(write=False)
        g.setflags(write=False)
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "gamma", g)

    @property
    def n(self):
        return self.m.shape[0]

    @classmethod
    def build(cls, n, m, gamma=1.0, gamma_floor=DEFAULT_GAMMA_FLOOR):
        """Broadcast scalar ``m`` / ``gamma`` to ``n`` players."""
        return cls(check_vector(m, n, "m"), check_vector(gamma, n, "gamma"), gamma_floor)

    def with_m(self, m):
        return RuleProfile(m, self.gamma, self.gamma_floor)

    def to_dict(self):
        return {"m": self.m.tolist(), "gamma": self.gamma.tolist(),
                "gamma_floor": self.gamma_floor}


@dataclass(frozen=True)
class SignalModel:
    """State variance and seed-noise variances; ``x_i = theta + delta_i``."""

    theta_variance: float = 1.0
    sigma_sq: object = 1.0

    def __post_init__(self):
        if self.theta_variance < 0:
            raise ValueError("theta_variance must be >= 0")
        s = np.atleast_1d(np.asarray(self.sigma_sq, dtype=np.float64))
        if np.any(s <= 0) or not np.all(np.isfinite(s)):
            raise ValueError("sigma_sq must be positive and finite")

    def sigma_sq_vector(self, n):
        return check_vector(self.sigma_sq if np.ndim(self.sigma_sq) else float(self.sigma_sq),
                            n, "sigma_sq", low=0.0, low_open=True)

    def to_dict(self):
        s = self.sigma_sq
        return {"theta_variance": self.theta_variance,
                "sigma_sq": np.asarray(s).tolist() if np.ndim(s) else float(s)}


@dataclass(frozen=True)
class NoiseSpec:
    """Persistent (``xi``) and idiosyncratic (``nu``) error model.

    ``persistent_variance`` is the variance of each xi_i (or of each speaking
    error when ``locus='expressing'``); ``covariance`` is only read in
    ``custom`` mode.  ``persistent_bias`` is the mean of xi, added on top.
    """

    persistent_variance: float = 0.0
    persistent_bias: object = 0.0
    correlation: str = "independent"
    covariance: Optional[object] = None
    idiosyncratic_variance: float = 0.0
    locus: str = "processing"

    def __post_init__(self):
        if self.persistent_variance < 0 or self.idiosyncratic_variance < 0:
            raise ValueError("noise variances must be >= 0")
        if self.correlation not in CORRELATIONS:
            raise ValueError(f"correlation must be one of {CORRELATIONS}")
        if self.locus not in LOCI:
            raise ValueError(f"locus must be one of {LOCI}")
        if self.correlation == "custom":
            C = np.asarray(self.covariance, dtype=np.float64)
            if C.ndim != 2 or C.shape[0] != C.shape[1]:
                raise InvalidSize("custom covariance must be a square matrix")
            if not np.allclose(C, C.T, atol=1e-12):
                raise ValueError("custom covariance must be symmetric")
            if np.linalg.eigvalsh(C).min() < -1e-10 * max(1.0, np.abs(C).max()):
                raise ValueError("custom covariance must be positive semidefinite")

    def base_covariance(self, n):
        """Covariance of the raw errors (before any expressing-locus mixing)."""
        v = self.persistent_variance
        if self.correlation == "independent":
            return v * np.eye(n)
        if self.correlation == "perfectly_correlated":
            return np.full((n, n), v)
        C = np.asarray(self.covariance, dtype=np.float64)
        if C.shape != (n, n):
            raise InvalidSize(f"custom covariance is {C.shape}, expected {(n, n)}")
        return C.copy()

    def bias_vector(self, n):
        return check_vector(self.persistent_bias if np.ndim(self.persistent_bias)
                            else float(self.persistent_bias), n, "persistent_bias")

    def _mixing(self, n, net):
        if self.locus == "processing":
            return None
        if net is None:
            raise MissingNetwork("expressing errors are mixed by A; pass the network")
        if net.n != n:
            raise InvalidSize("network size does not match n")
        return net.A

    def xi_covariance(self, n, net=None):
        """Covariance of the error xi that enters the dynamics."""
        C = self.base_covariance(n)
        A = self._mixing(n, net)
        return C if A is None else A @ C @ A.T

    def xi_mean(self, n, net=None):
        b = self.bias_vector(n)
        A = self._mixing(n, net)
        return b if A is None else A @ b

    def to_dict(self):
        out = asdict(self)
        b = self.persistent_bias
        out["persistent_bias"] = np.asarray(b).tolist() if np.ndim(b) else float(b)
        if self.covariance is not None:
            out["covariance"] = np.asarray(self.covariance).tolist()
        return out


@dataclass(frozen=True, eq=False)
class Realization:
    """One draw of the state, seeds and persistent errors.

    ``nu_seed`` fixes the idiosyncratic error stream; every call to
    :meth:`nu_stream` restarts it, so a realization replays bit-exactly.
    """

    theta: float
    x: np.ndarray
    xi: np.ndarray
    nu_variance: float = 0.0
    nu_seed: Optional[int] = None

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.float64)
        xi = np.asarray(self.xi, dtype=np.float64)
        if x.ndim != 1 or xi.shape != x.shape:
            raise InvalidSize("x and xi must be vectors of equal length")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "xi", xi)

    @property
    def n(self):
        return self.x.shape[0]

    def nu_stream(self):
        return np.random.default_rng(self.nu_seed)

    def clone(self, nu_seed):
        """Same seeds and errors, independent idiosyncratic stream."""
        return Realization(self.theta, self.x, self.xi, self.nu_variance, nu_seed)


def _draw_xi(noise, n, rng, size, net):
    C = noise.base_covariance(n)
    if noise.correlation == "independent":
        z = rng.standard_normal((size, n)) * np.sqrt(noise.persistent_variance)
    elif noise.correlation == "perfectly_correlated":
        z = np.repeat(rng.standard_normal((size, 1)), n, axis=1) * np.sqrt(noise.persistent_variance)
    else:
        w, V = np.linalg.eigh(C)
        L = V * np.sqrt(np.clip(w, 0.0, None))
        z = rng.standard_normal((size, n)) @ L.T
    z = z + noise.bias_vector(n)
    A = noise._mixing(n, net)
    return z if A is None else z @ A.T


def sample_batch(signal, noise, n, size, seed=None, net=None):
    """Draw ``size`` independent (theta, x, xi) triples as arrays.

    Returns ``theta`` of shape (size,) and ``x``, ``xi`` of shape (size, n).
    Gaussian throughout; only first and second moments matter downstream.
    """
    if n < 2:
        raise InvalidSize("need n >= 2 players")
    rng = check_random_state(seed)
    theta = rng.standard_normal(size) * np.sqrt(signal.theta_variance)
    delta = rng.standard_normal((size, n)) * np.sqrt(signal.sigma_sq_vector(n))
    xi = _draw_xi(noise, n, rng, size, net)
    return theta, theta[:, None] + delta, xi


def sample_realization(signal, noise, n, seed=None, net=None):
    """Draw one :class:`Realization`; deterministic for a fixed integer seed."""
    rng = check_random_state(seed)
    theta, x, xi = sample_batch(signal, noise, n, 1, rng, net)
    nu_seed = int(rng.integers(2**63 - 1))
    return Realization(float(theta[0]), x[0], xi[0], noise.idiosyncratic_variance, nu_seed)


def modified_seed(x_i, xi_i, m_i):
    """Seed with the persistent error folded in: x + (1 - m) xi / m."""
    m_i = np.asarray(m_i, dtype=np.float64)
    if np.any(m_i == 0):
        raise ZeroSeedWeight("modified seed is undefined for a DeGroot player (m = 0)")
    return x_i + (1.0 - m_i) * xi_i / m_i
