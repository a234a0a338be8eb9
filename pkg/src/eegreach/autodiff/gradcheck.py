"""Backprop-vs-finite-difference gradient verification."""
from dataclasses import dataclass, field

import numpy as np


@dataclass
class GradCheckReport:
    max_rel_error: float
    tolerance: float
    n_checked: int
    per_param: dict = field(default_factory=dict)

    @property
    def passed(self):
        return bool(self.max_rel_error < self.tolerance)


def gradient_check(fn, params, tolerance=1e-4, h=1e-5, max_coords=None, seed=0, floor=1e-6):
    """Compare backprop gradients with central finite differences.

    Parameters
    ----------
    fn : callable
        ``fn()`` rebuilds the graph from the current parameter values and
        returns a scalar Tensor.
    params : dict of str -> Tensor
        Leaves to check; they must have ``requires_grad=True``.
    tolerance : float
        Pass iff the largest relative error is below this.
    max_coords : int, optional
        Check a seeded random subset of at most this many coordinates per
        parameter (at least 50 unless the parameter is smaller).
    floor : float
        Lower bound on the relative-error denominator, so gradients that are
        both ~0 compare absolutely.
    """
    if not isinstance(params, dict):
        params = {f"p{i}": p for i, p in enumerate(params)}
    for p in params.values():
        p.zero_grad()
    fn().backward()
    analytic = {k: (p.grad.copy() if p.grad is not None else np.zeros_like(p.data))
                for k, p in params.items()}
    rng = np.random.default_rng(seed)
    worst = 0.0
    total = 0
    per_param = {}
    for name, p in params.items():
        n = p.data.size
        if max_coords is not None and n > max(max_coords, 50):
            coords = rng.choice(n, size=max(max_coords, 50), replace=False)
        else:
            coords = np.arange(n)
        flat = p.data.reshape(-1)
        errs = []
        for i in coords:
            orig = flat[i]
            flat[i] = orig + h
            up = float(fn().data)
            flat[i] = orig - h
            down = float(fn().data)
            flat[i] = orig
            numeric = (up - down) / (2.0 * h)
            exact = analytic[name].reshape(-1)[i]
            errs.append(abs(exact - numeric) / max(abs(exact), abs(numeric), floor))
        per_param[name] = float(max(errs)) if errs else 0.0
        worst = max(worst, per_param[name])
        total += len(coords)
    for p in params.values():
        p.zero_grad()
    return GradCheckReport(worst, tolerance, total, per_param)
