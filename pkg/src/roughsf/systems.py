"""Built-in slow-fast examples with one slow and one fast variable.

All examples use the OU-type fast drift ``g(x, y) = x - y``. Its frozen
dynamics contract synchronously at rate 1, which is recorded as the
dissipativity constant ``gamma2`` in ``meta``. The slow diffusion is
``sigma(x) = 0.5 + 0.25 sin x``, and f is bounded, smooth and globally
Lipschitz.
"""

from __future__ import annotations

import numpy as np

from roughsf.controlled import SmoothMap3
from roughsf.slowfast import SlowFastSystem


def _col(v):
    return np.asarray(v, dtype=float)[..., None]


def _mat(v):
    return np.asarray(v, dtype=float)[..., None, None]


def sine_sigma(a: float = 0.5, b: float = 0.25) -> SmoothMap3:
    """``x -> a + b sin x`` as a 1x1 matrix."""
    return SmoothMap3(
        value=lambda x: _mat(a + b * np.sin(x[..., 0])),
        grad=lambda x: _mat(b * np.cos(x[..., 0]))[..., None],
        hess=lambda x: _mat(-b * np.sin(x[..., 0]))[..., None, None],
        n_in=1,
        out_shape=(1, 1),
    )


def constant_sigma(c: float) -> SmoothMap3:
    return SmoothMap3.affine(np.zeros((1, 1, 1)), np.full((1, 1), float(c)))


def scalar_system(f, g, sigma, h, hx, hy, hxx, hxy, hyy, x0=0.0, y0=0.0, fbar=None, gtilde=None, meta=None):
    """Assemble a system with m = n = d = e = 1 from scalar functions of ``(x, y)``."""

    def grad(x, y):
        return np.stack([hx(x, y), hy(x, y)], axis=-1)[..., None, None, :]

    def hess(x, y):
        a, b, c = hxx(x, y), hxy(x, y), hyy(x, y)
        return np.stack([np.stack([a, b], axis=-1), np.stack([b, c], axis=-1)], axis=-2)[..., None, None, :, :]

    def wrap(fn):
        return lambda x, y: fn(x[..., 0], y[..., 0])

    return SlowFastSystem(
        m=1, n=1, d=1, e=1,
        f=lambda x, y: _col(f(x[..., 0], y[..., 0])),
        g=lambda x, y: _col(g(x[..., 0], y[..., 0])),
        sigma=sigma,
        h=lambda x, y: _mat(h(x[..., 0], y[..., 0])),
        h_grad=lambda x, y: grad(x[..., 0], y[..., 0]),
        h_hess=lambda x, y: hess(x[..., 0], y[..., 0]),
        x0=x0,
        y0=y0,
        fbar=None if fbar is None else (lambda x: _col(fbar(x[..., 0]))),
        gtilde_override=None if gtilde is None else (lambda x, y: _col(wrap(gtilde)(x, y))),
        meta=dict(meta or {}),
    )


def _zero(x, y):
    return np.zeros(np.broadcast(x, y).shape)


def _const(c):
    return lambda x, y: np.full(np.broadcast(x, y).shape, float(c))


OU_META = {
    "hypotheses": "H1-H6",
    "gamma1": 1.0,
    "gamma2": 1.0,
    "notes": "g = x - y is affine, h does not depend on y, f and sigma are bounded with bounded derivatives",
}


def ou(h0: float = 1.0, coupling: float = 0.0, x0: float = 0.0, y0: float = 0.0) -> SlowFastSystem:
    """``f = sin y + coupling cos x``, ``g = x - y``, ``h = h0``.

    The frozen law is ``N(x, h0^2 / 2)``, so ``f_bar(x) = exp(-h0^2/4) sin x + coupling cos x``.
    """
    damp = np.exp(-h0 * h0 / 4.0)
    return scalar_system(
        f=lambda x, y: np.sin(y) + coupling * np.cos(x),
        g=lambda x, y: x - y,
        sigma=sine_sigma(),
        h=_const(h0), hx=_zero, hy=_zero, hxx=_zero, hxy=_zero, hyy=_zero,
        x0=x0, y0=y0,
        fbar=lambda x: damp * np.sin(x) + coupling * np.cos(x),
        gtilde=lambda x, y: x - y,
        meta=dict(OU_META, h0=h0),
    )


def ou_slow_noise(h0: float = 1.0, coupling: float = 0.0, x0: float = 0.0, y0: float = 0.0) -> SlowFastSystem:
    """As :func:`ou` with ``h(x) = h0 (1 + sin(x) / 4)``, which does not depend on y.

    The frozen law is ``N(x, h(x)^2 / 2)``.
    """

    def hv(x, y):
        return h0 * (1 + 0.25 * np.sin(x)) + 0 * y

    return scalar_system(
        f=lambda x, y: np.sin(y) + coupling * np.cos(x),
        g=lambda x, y: x - y,
        sigma=sine_sigma(),
        h=hv,
        hx=lambda x, y: 0.25 * h0 * np.cos(x) + 0 * y,
        hy=_zero,
        hxx=lambda x, y: -0.25 * h0 * np.sin(x) + 0 * y,
        hxy=_zero,
        hyy=_zero,
        x0=x0, y0=y0,
        fbar=lambda x: np.exp(-(h0 * (1 + 0.25 * np.sin(x))) ** 2 / 4.0) * np.sin(x) + coupling * np.cos(x),
        gtilde=lambda x, y: x - y,
        meta=dict(OU_META, h0=h0),
    )


def ou_state_noise(h0: float = 1.0, x0: float = 0.0, y0: float = 0.0) -> SlowFastSystem:
    """``h(y) = h0 (1 + sin(y) / 2)``; the Itô correction of the fast drift is nonzero.

    No closed form for ``f_bar`` is known, so averaging needs a drift table.
    """
    meta = dict(OU_META, h0=h0)
    meta["notes"] = "g~ = x - y + h h_y / 2 has bounded perturbation; dissipativity holds with gamma2 close to 1"
    return scalar_system(
        f=lambda x, y: np.sin(y),
        g=lambda x, y: x - y,
        sigma=sine_sigma(),
        h=lambda x, y: h0 * (1 + 0.5 * np.sin(y)) + 0 * x,
        hx=_zero,
        hy=lambda x, y: 0.5 * h0 * np.cos(y) + 0 * x,
        hxx=_zero,
        hxy=_zero,
        hyy=lambda x, y: -0.5 * h0 * np.sin(y) + 0 * x,
        x0=x0, y0=y0,
        gtilde=lambda x, y: x - y + 0.5 * h0 * h0 * (1 + 0.5 * np.sin(y)) * 0.5 * np.cos(y),
        meta=meta,
    )


def decoupled(x0: float = 0.0, y0: float = 0.0) -> SlowFastSystem:
    """``f = cos x`` does not see the fast variable, so ``f_bar = f``."""
    return scalar_system(
        f=lambda x, y: np.cos(x) + 0 * y,
        g=lambda x, y: x - y,
        sigma=sine_sigma(),
        h=_const(1.0), hx=_zero, hy=_zero, hxx=_zero, hxy=_zero, hyy=_zero,
        x0=x0, y0=y0,
        fbar=np.cos,
        gtilde=lambda x, y: x - y,
        meta=dict(OU_META, notes="slow equation ignores y"),
    )


def frozen_fast(x0: float = 0.0, y0: float = 0.5) -> SlowFastSystem:
    """``g = 0`` and ``h = 0``: the fast variable stays at ``y0``."""
    return scalar_system(
        f=lambda x, y: np.sin(y) + np.cos(x),
        g=_zero,
        sigma=sine_sigma(),
        h=_zero, hx=_zero, hy=_zero, hxx=_zero, hxy=_zero, hyy=_zero,
        x0=x0, y0=y0,
        fbar=lambda x: np.sin(y0) + np.cos(x),
        gtilde=_zero,
        meta={"hypotheses": "H1-H4", "notes": "no fast dynamics"},
    )


SYSTEMS = {
    "ou": ou,
    "ou_slow_noise": ou_slow_noise,
    "ou_state_noise": ou_state_noise,
    "decoupled": decoupled,
    "frozen_fast": frozen_fast,
}


def get_system(name: str, **kwargs) -> SlowFastSystem:
    try:
        return SYSTEMS[name](**kwargs)
    except KeyError:
        raise ValueError(f"unknown system {name!r}; choose from {sorted(SYSTEMS)}") from None
