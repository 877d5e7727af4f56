"""Prior hyperparameters and sampler settings."""
from dataclasses import dataclass

from .errors import InputError
from .gating import NIWPrior
from .samplers import KernelPrior, SliceConfig


@dataclass(frozen=True)
class PriorConfig:
    """Every fixed hyperparameter of the model plus the SMC knobs.

    The NIW scatter prior is ``psi0 * I`` with ``nu0`` defaulting to ``D + 2``.
    ``theta`` has a lognormal prior ``logN(m0, s0_sq)``, ``alpha`` a
    ``Gamma(a0, b0)`` prior (rate parametrisation), ``nu`` a
    ``Gamma(nu_shape, nu_rate)`` prior, and ``k0^2`` an
    ``Inv-Gamma(k0_shape, k0_scale)`` prior.
    """

    mu0: float = 0.0
    lambda0: float = 1.0
    psi0: float = 1.0
    nu0: float | None = None
    m0: float = 0.0
    s0_sq: float = 1.0
    a0: float = 1.0
    b0: float = 1.0
    nu_shape: float = 2.0
    nu_rate: float = 0.1
    k0_shape: float = 0.5
    k0_scale: float = 0.5
    particles: int = 100
    batch: int = 50
    threshold: float = 0.5
    slice_width: float = 1.0
    slice_steps_out: int = 10
    slice_max_shrink: int = 100

    def __post_init__(self):
        if self.particles < 1:
            raise InputError("particles must be >= 1")
        if self.batch < 1:
            raise InputError("batch must be >= 1")
        if not 0.0 < self.threshold <= 1.0:
            raise InputError("threshold must lie in (0, 1]")
        for name in ("lambda0", "psi0", "s0_sq", "a0", "b0", "nu_shape", "nu_rate",
                     "k0_shape", "k0_scale"):
            if not getattr(self, name) > 0:
                raise InputError(f"{name} must be positive")

    def niw(self, D):
        return NIWPrior.default(D, self.mu0, self.lambda0, self.psi0, self.nu0)

    @property
    def kernel_prior(self):
        return KernelPrior(self.m0, self.s0_sq)

    @property
    def slice(self):
        return SliceConfig(self.slice_width, self.slice_steps_out, self.slice_max_shrink)
