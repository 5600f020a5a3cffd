"""One-sided and central difference quotients with error estimates."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["DerivativeEstimate", "one_sided_derivative", "central_derivative", "three_point_one_sided"]


@dataclass(frozen=True)
class DerivativeEstimate:
    value: float
    error: float
    raw: tuple[float, ...] = ()

    def __float__(self) -> float:
        return self.value


def _richardson(h: np.ndarray, d: np.ndarray, orders=(1, 2)):
    """Neville-style elimination of the ``h**k`` error terms for ``k`` in ``orders``."""
    table = [d]
    for k, order in enumerate(orders, start=1):
        prev = table[-1]
        if prev.size < 2:
            break
        # consecutive step ratio; exact for geometric step sequences
        ratio = (h[: prev.size - 1] / h[1 : prev.size]) ** order
        table.append((ratio * prev[1:] - prev[:-1]) / (ratio - 1.0))
    return table


def one_sided_derivative(f, side: int, steps=(1e-2, 5e-3, 2.5e-3), *, f0=None) -> DerivativeEstimate:
    """Right (``side=+1``) or left (``side=-1``) derivative of ``f`` at 0.

    Forward quotients on decreasing steps are Richardson-extrapolated against
    ``O(h)`` and ``O(h**2)`` error terms.  The reported error adds the change of
    the last two first-level extrapolants to the final correction, which stays
    honest when ``f`` has structure on scales finer than the steps.
    """
    if side not in (1, -1):
        raise ValueError("side must be +1 or -1")
    h = np.asarray(steps, dtype=float)
    if f0 is None:
        f0 = f(0.0)
    d = np.array([side * (f(side * hi) - f0) / hi for hi in h])
    table = _richardson(h, d)
    best = table[-1][-1]
    if len(table) >= 3:
        err = abs(table[2][-1] - table[1][-1]) + abs(table[1][-1] - table[1][0])
    elif len(table) == 2:
        err = abs(table[1][-1] - d[-1])
    else:
        err = abs(d[-1])
    return DerivativeEstimate(float(best), float(err), tuple(d.tolist()))


def three_point_one_sided(f, side: int, h: float, *, f0=None) -> DerivativeEstimate:
    """Second-order one-sided stencil ``(-3 f(0) + 4 f(h) - f(2h)) / 2h``."""
    if f0 is None:
        f0 = f(0.0)
    f1, f2 = f(side * h), f(side * 2 * h)
    val = side * (-3 * f0 + 4 * f1 - f2) / (2 * h)
    coarse = side * (f1 - f0) / h
    return DerivativeEstimate(float(val), float(abs(val - coarse) * h), (coarse,))


def central_derivative(f, h: float = 1e-4) -> DerivativeEstimate:
    """Fourth-order central difference at 0, error from the second-order one."""
    fp1, fm1, fp2, fm2 = f(h), f(-h), f(2 * h), f(-2 * h)
    d2 = (fp1 - fm1) / (2 * h)
    d4 = (8 * (fp1 - fm1) - (fp2 - fm2)) / (12 * h)
    return DerivativeEstimate(float(d4), float(abs(d4 - d2)), (d2,))
