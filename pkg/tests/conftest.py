"""Shared fixtures: the standard sprays, sample clouds and the FD oracle."""

import numpy as np
import pytest

from sprayform.expr import ScalarModel, SprayModel, sample_points

# fixture sprays with the x-boxes that keep them inside their domains
FLAT2 = SprayModel.from_strings(2, ["0", "0"])
POLAR_FLAT = SprayModel.from_strings(2, ["x1*y2^2", "-2*y1*y2/x1"])
SPHERE = SprayModel.from_strings(
    2, ["sin(x1)*cos(x1)*y2^2", "-2*(cos(x1)/sin(x1))*y1*y2"])
FLAT3 = SprayModel.from_strings(3, ["0", "0", "0"])
DEFORMED_FLAT3 = SprayModel.from_strings(
    3,
    [
        "-2*sqrt(y1^2+y2^2+y3^2)*y1",
        "-2*sqrt(y1^2+y2^2+y3^2)*y2",
        "-2*sqrt(y1^2+y2^2+y3^2)*y3",
    ],
)

X_BOXES = {
    "flat2": (-1.0, 1.0),
    "polar_flat": ((0.5, 2.0), (-1.0, 1.0)),
    "sphere": ((0.4, 2.7), (-1.0, 1.0)),
    "deformed_flat3": (-1.0, 1.0),
}

SPRAYS = {
    "flat2": FLAT2,
    "polar_flat": POLAR_FLAT,
    "sphere": SPHERE,
    "deformed_flat3": DEFORMED_FLAT3,
}

EUCLID2 = ScalarModel.from_string(2, "sqrt(y1^2+y2^2)", 1.0)
EUCLID3 = ScalarModel.from_string(3, "sqrt(y1^2+y2^2+y3^2)", 1.0)
SPHERE_NORM = ScalarModel.from_string(2, "sqrt(y1^2 + sin(x1)^2*y2^2)", 1.0)


def cloud(name, count, seed, y_annulus=(0.5, 2.0)):
    m = SPRAYS[name]
    return sample_points(m.n, count, seed, x_box=X_BOXES[name], y_annulus=y_annulus)


def _central(fn, z, alpha, h):
    """Nested central differences for the mixed partial d^alpha fn(z)."""
    total = sum(alpha)
    if total == 0:
        return fn(z)
    i = next(k for k, a in enumerate(alpha) if a > 0)
    beta = list(alpha)
    beta[i] -= 1
    zp = np.array(z, dtype=float)
    zm = np.array(z, dtype=float)
    zp[i] += h
    zm[i] -= h
    return (_central(fn, zp, beta, h) - _central(fn, zm, beta, h)) / (2.0 * h)


def fd_partial(fn, z, alpha):
    """Richardson-extrapolated central differences, independent of the jets."""
    total = sum(alpha)
    if total == 0:
        return fn(np.asarray(z, dtype=float))
    if total == 1:
        return _central(fn, z, alpha, 1e-5)
    h = 1.2e-3 if total == 2 else 4e-3
    coarse = _central(fn, z, alpha, h)
    fine = _central(fn, z, alpha, h / 2.0)
    return (4.0 * fine - coarse) / 3.0


def backend_modules():
    from sprayform import _jetcore_py

    mods = [("pure", _jetcore_py)]
    try:
        from sprayform import _jetcore

        mods.append(("compiled", _jetcore))
    except ImportError:
        pass
    return mods


@pytest.fixture(params=[name for name, _ in backend_modules()])
def jet_backend(request, monkeypatch):
    """Run the test under each available jet kernel backend."""
    mods = dict(backend_modules())
    import sprayform.jets as jets

    monkeypatch.setattr(jets, "_KERNEL", mods[request.param])
    return request.param
