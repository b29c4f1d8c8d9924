"""Brute-force checks of Jacobian positivity on the reference triangle.

Two independent paths:

* :func:`sample_min_det` evaluates a determinant on a dense grid of the
  closed triangle ``x1, x2 >= 0, x1 + x2 <= 1``;
* :func:`certify_positive` bounds the quadratic determinant polynomial
  through its Bernstein coefficients on recursively subdivided triangles.
  A positive Bernstein net proves positivity; a sampled value ``<= 0`` is a
  concrete counterexample.
"""

from dataclasses import dataclass, field

import numpy as np

from .isoparam import basis_gradients, det_poly_coeffs, eval_det_poly, jacobian_FT

POSITIVE = "positive"
COUNTEREXAMPLE = "counterexample"
INDETERMINATE = "indeterminate"


@dataclass(frozen=True)
class OracleConfig:
    grid: int = 200
    margin: float = 1e-10
    subdivision_depth: int = 12

    def __post_init__(self):
        if int(self.grid) != self.grid or self.grid < 16:
            raise ValueError(f"grid must be an integer >= 16, got {self.grid}")
        if not self.margin > 0:
            raise ValueError(f"margin must be positive, got {self.margin}")
        if self.subdivision_depth < 0:
            raise ValueError("subdivision_depth must be non-negative")

    def to_dict(self):
        return {"grid": self.grid, "margin": self.margin, "subdivision_depth": self.subdivision_depth}

    @classmethod
    def from_dict(cls, data):
        return cls(**{k: data[k] for k in ("grid", "margin", "subdivision_depth") if k in data})


_GRID_CACHE = {}


def triangle_grid(n):
    """Points ``(i/n, j/n)`` with ``i + j <= n``; vertices and all edges included."""
    pts = _GRID_CACHE.get(n)
    if pts is None:
        i, j = np.meshgrid(np.arange(n + 1), np.arange(n + 1), indexing="ij")
        keep = i + j <= n
        pts = np.stack([i[keep], j[keep]], axis=-1) / float(n)
        pts.setflags(write=False)
        _GRID_CACHE[n] = pts
    return pts


def sample_min_det(evaluate, config=None):
    """Minimum of ``evaluate`` over the sampled closed triangle.

    ``evaluate`` takes an ``(n, 2)`` array of reference points and returns
    ``n`` values. Returns ``(min value, argmin point)``.
    """
    config = config or OracleConfig()
    pts = triangle_grid(config.grid)
    vals = np.asarray(evaluate(pts), dtype=float)
    k = int(np.argmin(vals))
    return float(vals[k]), pts[k].copy()


def net_det_evaluator(net):
    return lambda pts: jacobian_FT(net, pts)[1]


def net_min_det(net, config=None):
    return sample_min_det(net_det_evaluator(net), config)


def batch_min_det(points, config=None, chunk=64):
    """Sampled minimum of ``det dF/dxhat`` for a stack of nets ``(B, 6, 2)``.

    Returns ``(minima (B,), argmin points (B, 2))``.
    """
    config = config or OracleConfig()
    pts = triangle_grid(config.grid)
    grads = basis_gradients(pts)  # (6, 2, P)
    points = np.asarray(points, dtype=float)
    mins, args = [], []
    for start in range(0, len(points), chunk):
        ctrl = points[start:start + chunk].transpose(0, 2, 1)  # (b, 2, 6)
        col1 = ctrl @ grads[:, 0, :]  # (b, 2, P): dF/dx1
        col2 = ctrl @ grads[:, 1, :]
        det = col1[:, 0] * col2[:, 1] - col2[:, 0] * col1[:, 1]
        k = np.argmin(det, axis=1)
        mins.append(det[np.arange(len(k)), k])
        args.append(pts[k])
    return np.concatenate(mins), np.concatenate(args)


def decisive_sign(min_value, scale, config=None):
    """``+1``/``-1`` when ``|min| >= margin * scale``, else ``0``."""
    config = config or OracleConfig()
    if abs(min_value) < config.margin * scale:
        return 0
    return 1 if min_value > 0 else -1


@dataclass
class Certificate:
    status: str
    depth: int
    point: np.ndarray | None = None
    value: float | None = None
    triangles: int = 0
    lower_bound: float | None = field(default=None)

    @property
    def positive(self):
        return self.status == POSITIVE

    def to_dict(self):
        return {
            "status": self.status, "depth": self.depth,
            "point": None if self.point is None else [float(v) for v in self.point],
            "value": self.value, "triangles": self.triangles, "lower_bound": self.lower_bound,
        }


# undecided sub-triangles kept per level; beyond this the answer is indeterminate
_MAX_ACTIVE = 1 << 18

_ROOT = np.array([[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]])


def _bernstein(coeffs, tris):
    """Vertex values, edge midpoint values and the six Bernstein coefficients."""
    v = eval_det_poly(coeffs, tris)  # (k, 3)
    mids = np.stack([tris[:, [0, 0, 1]], tris[:, [1, 2, 2]]]).mean(axis=0)  # edges 01, 02, 12
    m = eval_det_poly(coeffs, mids)
    pairs = np.array([[0, 1], [0, 2], [1, 2]])
    edge = 2.0 * m - 0.5 * (v[:, pairs[:, 0]] + v[:, pairs[:, 1]])
    return v, mids, m, np.concatenate([v, edge], axis=1)


def _subdivide(tris):
    a, b, c = tris[:, 0], tris[:, 1], tris[:, 2]
    ab, ac, bc = (a + b) / 2, (a + c) / 2, (b + c) / 2
    return np.concatenate([
        np.stack([a, ab, ac], axis=1), np.stack([ab, b, bc], axis=1),
        np.stack([ac, bc, c], axis=1), np.stack([ab, bc, ac], axis=1),
    ])


def certify_positive(coeffs, config=None):
    """Prove ``p > 0`` on the reference triangle, or find a point with ``p <= 0``.

    ``coeffs`` are monomial coefficients ``(c00, c10, c01, c20, c11, c02)``.
    A quadratic lies in the convex hull of its Bernstein coefficients on any
    sub-triangle, so a sub-triangle with all coefficients positive is done.
    Undecided sub-triangles are split in four, level by level.
    """
    config = config or OracleConfig()
    coeffs = np.asarray(coeffs, dtype=float)
    tris = _ROOT
    count = 0
    lower = np.inf
    for depth in range(config.subdivision_depth + 1):
        count += len(tris)
        v, mids, m, bern = _bernstein(coeffs, tris)
        pts = np.concatenate([tris.reshape(-1, 2), mids.reshape(-1, 2)])
        vals = np.concatenate([v.ravel(), m.ravel()])
        k = int(np.argmin(vals))
        if vals[k] <= 0.0:
            return Certificate(COUNTEREXAMPLE, depth, pts[k].copy(), float(vals[k]), count)
        done = bern.min(axis=1) > 0.0
        if done.any():
            lower = min(lower, float(bern[done].min()))
        tris = tris[~done]
        if len(tris) == 0:
            return Certificate(POSITIVE, depth, None, None, count, lower)
        if depth == config.subdivision_depth or 4 * len(tris) > _MAX_ACTIVE:
            break
        tris = _subdivide(tris)
    return Certificate(INDETERMINATE, depth, pts[k].copy(), float(vals[k]), count,
                       float(bern.min()))


def certify_net(net, config=None):
    return certify_positive(det_poly_coeffs(net), config)
