"""Time- and frequency-domain MAE losses and their convex mix."""

from __future__ import annotations

from . import autodiff as ad
from .autodiff import ConfigError, ShapeError, Tensor

MODULUS_EPS = 1e-12


def _pair(pred, target) -> tuple[Tensor, Tensor]:
    pred = pred if isinstance(pred, Tensor) else Tensor(pred)
    target = target if isinstance(target, Tensor) else Tensor(target)
    if pred.shape != target.shape:
        raise ShapeError(f"prediction {pred.shape} and target {target.shape} differ")
    return pred, target


def mae_time(pred, target) -> Tensor:
    """Mean absolute error over every element."""
    pred, target = _pair(pred, target)
    return ad.mean_all(ad.abs_(ad.sub(pred, target)))


def mae_freq(pred, target, eps: float = MODULUS_EPS) -> Tensor:
    """Mean complex modulus of the DFT difference along the horizon axis.

    The DFT is linear, so ``DFT(pred) - DFT(target)`` is computed as the
    DFT of the difference. Averaged over channels (and batch) and all O bins.
    """
    pred, target = _pair(pred, target)
    spec = ad.dft_real(ad.sub(pred, target))
    return ad.mean_all(ad.smooth_modulus(spec.real, spec.imag, eps))


def hybrid_loss(pred, target, alpha: float) -> Tensor:
    """``(1 - alpha) * mae_time + alpha * mae_freq``; the endpoints skip the unused term."""
    if not 0.0 <= alpha <= 1.0:
        raise ConfigError(f"alpha must lie in [0, 1], got {alpha}")
    if alpha == 0.0:
        return mae_time(pred, target)
    if alpha == 1.0:
        return mae_freq(pred, target)
    return ad.add(ad.scale(mae_time(pred, target), 1.0 - alpha), ad.scale(mae_freq(pred, target), alpha))
