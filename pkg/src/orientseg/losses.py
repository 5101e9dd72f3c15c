"""Offset encoding between boxes and anchors, and the proposal-network losses.

Offsets follow the usual parameterization: center deltas normalized by the
anchor size, log size ratios, and an angle delta in degrees wrapped into
[-90, 90).  The combined loss per anchor is

    total = cls(p, u) + lam * u * reg(t, t*)

where u is 1 for foreground anchors and 0 for background, p is the
predicted foreground probability, and reg sums a smooth-L1 penalty over
the five offset components.  Batch aggregation is the arithmetic mean,
computed with compensated summation so it is order-independent.

Analytic gradients for every loss are provided and can be verified against
central finite differences with :func:`grad_check`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

from .geometry import RotatedBox, wrap_degrees

PROB_EPS = 1e-12


@dataclass(frozen=True)
class RegressionOffsets:
    """Offset tuple (t_x, t_y, t_w, t_h, t_theta) between a box and an anchor."""

    t_x: float
    t_y: float
    t_w: float
    t_h: float
    t_theta: float

    def __post_init__(self) -> None:
        if not all(
            math.isfinite(v) for v in (self.t_x, self.t_y, self.t_w, self.t_h, self.t_theta)
        ):
            raise ValueError("offsets must be finite")

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return (self.t_x, self.t_y, self.t_w, self.t_h, self.t_theta)


@dataclass(frozen=True)
class LossBreakdown:
    """Mean classification and (foreground-masked) regression loss of a batch."""

    l_cls: float
    l_reg: float
    total: float
    lam: float


def encode(box: RotatedBox, anchor: RotatedBox) -> RegressionOffsets:
    """Offsets that move ``anchor`` onto ``box``."""
    if box.w <= 0 or box.h <= 0:
        raise ValueError("box dimensions must be positive")
    return RegressionOffsets(
        t_x=(box.x_c - anchor.x_c) / anchor.w,
        t_y=(box.y_c - anchor.y_c) / anchor.h,
        t_w=math.log(box.w / anchor.w),
        t_h=math.log(box.h / anchor.h),
        t_theta=wrap_degrees(box.theta - anchor.theta),
    )


def decode(t: RegressionOffsets, anchor: RotatedBox) -> RotatedBox:
    """Exact algebraic inverse of :func:`encode`; result is canonicalized."""
    return RotatedBox(
        x_c=anchor.x_c + t.t_x * anchor.w,
        y_c=anchor.y_c + t.t_y * anchor.h,
        w=anchor.w * math.exp(t.t_w),
        h=anchor.h * math.exp(t.t_h),
        theta=wrap_degrees(anchor.theta + t.t_theta),
    )


def smooth_l1(x: float) -> float:
    """0.5 x^2 inside the unit interval, |x| - 0.5 outside."""
    ax = abs(x)
    if ax < 1.0:
        return 0.5 * x * x
    return ax - 0.5


def smooth_l1_grad(x: float) -> float:
    """Derivative of :func:`smooth_l1`; one-sided value sign(x) at |x| = 1."""
    if abs(x) < 1.0:
        return x
    return math.copysign(1.0, x)


def reg_loss(t: RegressionOffsets, t_star: RegressionOffsets, u: int) -> float:
    """Foreground-masked smooth-L1 over the five offset deltas."""
    if u not in (0, 1):
        raise ValueError("u must be 0 or 1")
    if u == 0:
        return 0.0
    return math.fsum(smooth_l1(ts - tp) for tp, ts in zip(t.as_tuple(), t_star.as_tuple()))


def reg_loss_grad(t: RegressionOffsets, t_star: RegressionOffsets, u: int) -> tuple[float, ...]:
    """Gradient of :func:`reg_loss` with respect to the predicted offsets t."""
    if u == 0:
        return (0.0,) * 5
    return tuple(-smooth_l1_grad(ts - tp) for tp, ts in zip(t.as_tuple(), t_star.as_tuple()))


def cls_loss(p: float, u: int) -> float:
    """Binary cross-entropy between label u and foreground probability p."""
    if u not in (0, 1):
        raise ValueError("u must be 0 or 1")
    p = min(max(p, PROB_EPS), 1.0 - PROB_EPS)
    return -u * math.log(p) - (1 - u) * math.log(1.0 - p)


def cls_loss_grad(p: float, u: int) -> float:
    """Derivative of :func:`cls_loss` with respect to p (clamped interior)."""
    p = min(max(p, PROB_EPS), 1.0 - PROB_EPS)
    return -u / p + (1 - u) / (1.0 - p)


AnchorTerm = tuple[float, int, RegressionOffsets, RegressionOffsets]


def proposal_loss(batch: Sequence[AnchorTerm], lam: float = 1.0) -> LossBreakdown:
    """Mean combined loss over a batch of (p, u, t, t_star) anchor terms.

    ``l_reg`` reports the mean of the foreground-masked regression terms, so
    ``total == l_cls + lam * l_reg`` holds exactly and the total is affine
    in ``lam``.  Neutral anchors must already be excluded by the caller.
    """
    if not batch:
        raise ValueError("empty batch")
    if lam <= 0:
        raise ValueError("lam must be positive")
    n = len(batch)
    cls_terms = []
    reg_terms = []
    for p, u, t, t_star in batch:
        cls_terms.append(cls_loss(p, u))
        reg_terms.append(reg_loss(t, t_star, u))
    l_cls = math.fsum(cls_terms) / n
    l_reg = math.fsum(reg_terms) / n
    return LossBreakdown(l_cls=l_cls, l_reg=l_reg, total=l_cls + lam * l_reg, lam=lam)


def grad_check(
    f: Callable[[Sequence[float]], float],
    grad: Callable[[Sequence[float]], Sequence[float]],
    at: Sequence[float],
    step: float = 1e-6,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    The relative error per parameter is |fd - an| / max(|fd|, |an|, 1e-3);
    the floor keeps near-zero gradients from being compared at roundoff
    scale.  Callers must keep smooth-L1 arguments away from the |x| = 1
    kink, where the central difference straddles the derivative jump.
    """
    x0 = [float(v) for v in at]
    analytic = [float(g) for g in grad(x0)]
    worst = 0.0
    for i in range(len(x0)):
        hi = list(x0)
        lo = list(x0)
        hi[i] += step
        lo[i] -= step
        fd = (f(hi) - f(lo)) / (2.0 * step)
        err = abs(fd - analytic[i]) / max(abs(fd), abs(analytic[i]), 1e-3)
        worst = max(worst, err)
    return worst
