"""L^2 Sobolev norms of sampled multipliers and the Mihlin-Hormander quantity."""
from __future__ import annotations

import numpy as np

from .errors import NonDecayingSamples, ValidationError
from .multipliers import Multiplier, bump

DECAY_TOL = 1e-8


def sobolev_norm(samples, s: float, h: float) -> float:
    """(int (1 + tau^2)^s |F^(tau)|^2 dtau)^{1/2} from samples on a uniform grid.

    F^(tau) = (2 pi)^{-1/2} int F(lam) e^{-i lam tau} dlam is replaced by the
    scaled DFT, so at s = 0 the result is exactly the discrete L^2 norm.
    """
    F = np.asarray(samples)
    if F.ndim != 1 or len(F) < 2:
        raise ValidationError("need a one-dimensional sample vector")
    if s < 0 or not h > 0:
        raise ValidationError("need s >= 0 and positive spacing")
    peak = np.max(np.abs(F))
    if peak == 0:
        return 0.0
    if max(abs(F[0]), abs(F[-1])) > DECAY_TOL * peak:
        raise NonDecayingSamples("samples do not decay at the grid ends")
    N = len(F)
    Fhat = h / np.sqrt(2 * np.pi) * np.fft.fft(F)
    tau = 2 * np.pi * np.fft.fftfreq(N, d=h)
    dtau = 2 * np.pi / (N * h)
    return float(np.sqrt(np.sum((1 + tau**2) ** s * np.abs(Fhat) ** 2) * dtau))


def default_chi(lam):
    """The fixed cutoff chi = bump on [1/2, 2]."""
    return bump(lam, 0.5, 2.0)


def mh_condition_norm(F, s: float, t_set, chi=default_chi, window=(0.0, 2.5), n: int = 4096) -> float:
    """max over t in ``t_set`` of ||F(t .) chi||_{W_2^s}.

    ``F`` is a Multiplier or a vectorised callable; ``chi`` must vanish at
    both ends of ``window``.
    """
    f = F.eval if isinstance(F, Multiplier) else F
    lam = np.linspace(window[0], window[1], n)
    c = chi(lam)
    h = lam[1] - lam[0]
    return max(sobolev_norm(np.asarray(f(t * lam)) * c, s, h) for t in t_set)
