"""Layered curved annulus triangulations around a cavity.

The inner region ``rho <= |x| <= mu`` is tiled by circumferential layers
of curved quadratic triangles. A layer ``eps <= |x| <= eps + tau`` with
``N`` couples holds ``N`` elements of type A (one vertex on the inner
circle) alternating with ``N`` of type B (one vertex on the outer circle).
The outer circle of one layer is the inner circle of the next, whose
angular offset is shifted by ``-pi/N`` so that vertices match. When the
count halves between layers, every B element of the outer layer is cut
along its radial midline into a C and a D element, which keeps the
interface conforming. The region ``mu <= |x| <= 1`` is covered by
concentric rings of straight triangles.

Edge nodes: when both end points lie strictly inside ``(mu, 1)`` the
Euclidean midpoint is used; otherwise the node sits at the polar midpoint
(mean radius, mean angle), so that edges on circles follow the circle.

Angles are stored as exact rational multiples of ``pi`` plus one global
offset, which makes node sharing between elements exact.
"""

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .conditions import LayerTooThickError, affine_N, deformation_N, mesh_validity_N
from .isoparam import ControlNet, jacobian_FT

log = logging.getLogger(__name__)

KINDS = ("A", "B", "C", "D", "straight")
_REL_TOL = 1e-12


class MeshFormatError(ValueError):
    """A mesh file could not be parsed; the message names the offending field."""


class MeshValidationError(ValueError):
    """A parsed mesh is structurally inconsistent (e.g. dangling node ids)."""


class PlanningError(RuntimeError):
    """No admissible layer sequence exists for the requested configuration."""


class ParameterError(ValueError):
    pass


@dataclass(frozen=True)
class LayerSpec:
    eps: float
    tau: float
    N: int
    coarsen_from_inner: bool = False

    @property
    def outer(self):
        return self.eps + self.tau

    def to_dict(self):
        return {"eps": self.eps, "tau": self.tau, "N": self.N}


@dataclass(frozen=True, eq=False)
class CurvedElement:
    kind: str
    nodes: tuple
    net: ControlNet
    layer: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown element kind {self.kind!r}")
        if len(self.nodes) != 6:
            raise ValueError("an element needs exactly 6 node ids")


@dataclass(eq=False)
class Mesh:
    nodes: np.ndarray
    elements: list
    layers: list
    rho: float
    mu: float
    warnings: list = field(default_factory=list)
    plans: list = field(default_factory=list)

    @property
    def n_nodes(self):
        return len(self.nodes)

    def element_layer(self, elem):
        return None if elem.layer is None else self.layers[elem.layer]

    def edges(self):
        """Map edge node triple ``(i, j, mid)`` (``i < j``) -> list of element indices."""
        out = {}
        for k, e in enumerate(self.elements):
            a1, a2, a3, a12, a13, a23 = e.nodes
            for (i, j), mid in (((a1, a2), a12), ((a1, a3), a13), ((a2, a3), a23)):
                out.setdefault((min(i, j), max(i, j), mid), []).append(k)
        return out

    def conformity_errors(self, tol=1e-12):
        """Edges used more than twice, or duplicated nodes along one edge."""
        errors = []
        pairs = {}
        for key, uses in self.edges().items():
            if len(uses) > 2:
                errors.append(f"edge {key} shared by {len(uses)} elements")
            pairs.setdefault(key[:2], []).append(key[2])
        scale = max(1.0, float(np.abs(self.nodes).max())) if len(self.nodes) else 1.0
        for (i, j), mids in pairs.items():
            for a in range(len(mids)):
                for b in range(a + 1, len(mids)):
                    if np.linalg.norm(self.nodes[mids[a]] - self.nodes[mids[b]]) < tol * scale:
                        errors.append(f"edge ({i}, {j}) has duplicated edge nodes {mids[a]}, {mids[b]}")
        return errors

    def boundary_edges(self):
        return [k for k, uses in self.edges().items() if len(uses) == 1]

    def mesh_map_min_dets(self, n=8):
        """Coarse per-element sample of ``det dF/dxhat`` (quick sanity check)."""
        t = np.linspace(0.0, 1.0, n + 1)
        x1, x2 = np.meshgrid(t, t, indexing="ij")
        keep = x1 + x2 <= 1.0 + 1e-15
        pts = np.stack([x1[keep], x2[keep]], axis=-1)
        return np.array([jacobian_FT(e.net, pts)[1].min() for e in self.elements])


class _Builder:
    """Node registry keyed by circle index and exact angle (in units of pi)."""

    def __init__(self, radii, mu, base_angle=0.0):
        self.radii = list(radii)
        self.mu = mu
        self.base = base_angle
        self.coords = []
        self.polar = []
        self._vertex = {}
        self._edge = {}
        self.elements = []

    def _new(self, xy, polar):
        self.coords.append(xy)
        self.polar.append(polar)
        return len(self.coords) - 1

    def vertex(self, circle, frac):
        frac = Fraction(frac) % 2
        key = (circle, frac)
        idx = self._vertex.get(key)
        if idx is None:
            r = self.radii[circle]
            th = self.base + float(frac) * math.pi
            idx = self._new((r * math.cos(th), r * math.sin(th)), (r, frac))
            self._vertex[key] = idx
        return idx

    def _interior(self, r):
        return self.mu < r < 1.0

    def edge_node(self, i, j, fi, fj):
        """Edge node between vertices ``i, j`` with labelled angles ``fi, fj``.

        The polar midpoint averages the labelled (unreduced) angles, which
        picks the right arc even for edges spanning half a turn.
        """
        ri, rj = self.polar[i][0], self.polar[j][0]
        euclid = self._interior(ri) and self._interior(rj)
        frac = None if euclid else ((fi + fj) / 2) % 2
        # with N = 2 two arcs join the same vertex pair, so arcs are keyed by their middle
        key = (min(i, j), max(i, j), frac)
        idx = self._edge.get(key)
        if idx is None:
            if euclid:
                xi, xj = self.coords[i], self.coords[j]
                xy = (0.5 * (xi[0] + xj[0]), 0.5 * (xi[1] + xj[1]))
                polar = (math.hypot(*xy), None)
            else:
                r = 0.5 * (ri + rj)
                th = self.base + float(frac) * math.pi
                xy = (r * math.cos(th), r * math.sin(th))
                polar = (r, frac)
            idx = self._new(xy, polar)
            self._edge[key] = idx
        return idx

    def element(self, kind, v1, v2, v3, layer=None):
        """Element from three ``(circle, angle in units of pi)`` vertex specs."""
        fr = [Fraction(v[1]) for v in (v1, v2, v3)]
        a, b, c = (self.vertex(*v) for v in (v1, v2, v3))
        ids = (a, b, c, self.edge_node(a, b, fr[0], fr[1]), self.edge_node(a, c, fr[0], fr[2]),
               self.edge_node(b, c, fr[1], fr[2]))
        net = ControlNet(np.array([self.coords[k] for k in ids]))
        e = CurvedElement(kind, ids, net, layer)
        self.elements.append(e)
        return e

    def node_array(self):
        return np.array(self.coords, dtype=float).reshape(-1, 2)


def _add_layer(b, inner, N, offset, split, layer, kinds=("A", "B")):
    """Elements of one layer between circles ``inner`` and ``inner + 1``.

    ``offset`` is the angle (units of pi) of the first inner vertex.
    """
    out = inner + 1
    for i in range(N):
        b.element(kinds[0], (inner, offset + Fraction(2 * i, N)),
                  (out, offset + Fraction(2 * i - 1, N)),
                  (out, offset + Fraction(2 * i + 1, N)), layer)
        top = (out, offset + Fraction(2 * i + 1, N))
        hi = (inner, offset + Fraction(2 * i + 2, N))
        lo = (inner, offset + Fraction(2 * i, N))
        if split:
            mid = (inner, offset + Fraction(2 * i + 1, N))
            b.element("C", top, mid, lo, layer)
            b.element("D", top, hi, mid, layer)
        else:
            b.element(kinds[1], top, hi, lo, layer)


def _check_counts(N, eps, tau):
    if int(N) != N or N < 2:
        raise ParameterError(f"angular count must be an integer >= 2, got {N}")
    if not (eps > 0 and tau > 0):
        raise ParameterError("eps and tau must be positive")


def build_layer(eps, tau, N, angular_offset=0.0, mu=None):
    """One standalone layer of ``2N`` alternating A/B elements.

    ``angular_offset`` (radians) is the angle of the first A element's inner
    vertex. Returns ``(elements, warnings)``; a warning is attached when
    ``N`` is below the count that makes the curved map itself valid.
    """
    _check_counts(N, eps, tau)
    b = _Builder([eps, eps + tau], eps + tau if mu is None else mu, angular_offset)
    _add_layer(b, 0, N, Fraction(0), False, 0)
    return b.elements, _count_warnings(eps, tau, N)


def _count_warnings(eps, tau, N):
    n_hat = mesh_validity_N(eps / tau)
    if N < n_hat:
        msg = f"N={N} below the mesh-validity count {n_hat} for eps={eps}, tau={tau}"
        log.warning(msg)
        return [msg]
    return []


def coarsen_split(eps, tau, N, tau_outer, angular_offset=0.0, mu=None):
    """Inner layer with ``N`` couples followed by an outer layer with ``N/2``.

    Every B element of the outer layer is split into C and D. Returns the
    elements of both layers (inner first).
    """
    _check_counts(N, eps, tau)
    if N % 2:
        raise ParameterError(f"coarsening needs an even count, got N={N}")
    _check_counts(N // 2, eps + tau, tau_outer)
    radii = [eps, eps + tau, eps + tau + tau_outer]
    b = _Builder(radii, radii[-1] if mu is None else mu, angular_offset)
    _add_layer(b, 0, N, Fraction(0), False, 0)
    _add_layer(b, 1, N // 2, Fraction(-1, N), True, 1)
    return b.elements


@dataclass(frozen=True)
class LayerStrategy:
    """Radial schedule for :func:`build_mesh`.

    ``tau0`` defaults to ``rho``; each next layer grows by ``growth``,
    is capped by the thickness bound from the solution, and (with
    ``clip``) halved until the layer is admissible. ``n_override`` maps
    layer index -> forced count, for building deliberately invalid meshes.
    """

    tau0: float | None = None
    growth: float = 2.0
    clip: bool = True
    cap_by_bound: bool = True
    max_layers: int = 64
    merge_fraction: float = 0.25
    n_override: tuple = ()

    def __post_init__(self):
        if not self.growth >= 1.0:
            raise ParameterError(f"growth must be >= 1, got {self.growth}")
        if self.tau0 is not None and not self.tau0 > 0:
            raise ParameterError("tau0 must be positive")

    def to_dict(self):
        return {"tau0": self.tau0, "growth": self.growth, "clip": self.clip,
                "cap_by_bound": self.cap_by_bound, "max_layers": self.max_layers,
                "merge_fraction": self.merge_fraction,
                "n_override": [list(p) for p in self.n_override]}

    @classmethod
    def from_dict(cls, data):
        kw = {k: data[k] for k in ("tau0", "growth", "clip", "cap_by_bound", "max_layers",
                                   "merge_fraction") if k in data}
        if "n_override" in data:
            kw["n_override"] = tuple((int(a), int(b)) for a, b in data["n_override"])
        return cls(**kw)


def plan_layers(solution, rho, mu, strategy=None):
    """Radii and per-layer plans for the inner region ``[rho, mu]``."""
    strategy = strategy or LayerStrategy()
    if not (rho < mu < 1.0):
        raise ParameterError(f"need rho < mu < 1, got rho={rho}, mu={mu}")
    if abs(rho - solution.rho) > _REL_TOL * rho:
        raise ParameterError(f"solution is tabulated from {solution.rho}, mesh starts at {rho}")
    radii = [rho]
    plans = []
    tau = strategy.tau0 if strategy.tau0 is not None else rho
    eps = rho
    while eps < mu * (1 - _REL_TOL):
        if len(plans) >= strategy.max_layers:
            raise PlanningError(f"more than {strategy.max_layers} layers needed to reach mu={mu}")
        if strategy.cap_by_bound:
            bound = math.sqrt(2.0 * solution.r_c / solution.max_r_second)
            tau = min(tau, bound)
        tau = min(tau, mu - eps)
        if mu - eps - tau < strategy.merge_fraction * tau:
            tau = mu - eps
        plan = None
        for _ in range(200):
            try:
                plan = deformation_N(solution, eps, tau)
                break
            except LayerTooThickError as exc:
                if not strategy.clip:
                    raise LayerTooThickError(
                        f"layer too thick at eps={eps:.6g}, tau={tau:.6g}: {exc}") from exc
                tau *= 0.5
        if plan is None:
            raise PlanningError(f"no admissible thickness found at eps={eps}")
        plans.append(plan)
        eps = mu if abs(eps + tau - mu) <= _REL_TOL * mu else eps + tau
        radii.append(eps)
        tau *= strategy.growth
    return radii, plans


def _counts_from(n0, req):
    counts = [n0]
    for k in range(1, len(req)):
        prev = counts[-1]
        half = prev // 2
        counts.append(half if prev % 2 == 0 and half >= max(req[k:]) and half >= 2 else prev)
    return counts


def _element_count(counts):
    total = 0
    for k, n in enumerate(counts):
        total += 3 * n if k and n < counts[k - 1] else 2 * n
    return total


def assign_counts(req, overrides=()):
    """Couple counts per layer: each at least its requirement, halving when allowed.

    The first count is chosen in ``[max(req), 2 max(req)]`` to minimise the
    total element number of the curved region.
    """
    top = max(req)
    best = min((_element_count(_counts_from(n0, req)), n0) for n0 in range(top, 2 * top + 1))
    counts = _counts_from(best[1], req)
    for k, n in overrides:
        if not 0 <= k < len(counts):
            raise ParameterError(f"override layer {k} out of range")
        counts[k] = int(n)
        for j in range(k - 1, -1, -1):
            if counts[j] not in (counts[j + 1], 2 * counts[j + 1]):
                counts[j] = counts[j + 1]
        for j in range(k + 1, len(counts)):
            if counts[j] not in (counts[j - 1], counts[j - 1] / 2):
                counts[j] = counts[j - 1]
    return counts


def outer_ring_radii(mu, K):
    """Geometric ring radii from ``mu`` to 1 with aspect close to one for ``K`` couples."""
    n = max(1, math.ceil(math.log(1.0 / mu) / math.log(1.0 + 2.0 * math.pi / K)))
    radii = [mu * (1.0 / mu) ** (k / n) for k in range(n + 1)]
    radii[0], radii[-1] = mu, 1.0
    return radii


def fitted_ring_radii(solution, mu, K, merge_fraction=0.25):
    """Ring radii from ``mu`` to 1 for ``K`` couples under a deformation.

    Each ring takes the aspect-one thickness unless the straight-element
    count of that ring would exceed ``K``; then it is thickened to the
    smallest thickness (bisected) for which the count fits. Returns
    ``None`` when even a single ring up to 1 does not fit.
    """
    radii = [mu]
    R = mu
    while R < 1.0:
        tau = min(R * 2.0 * math.pi / K, 1.0 - R)
        if affine_N(solution, R, tau) > K:
            if affine_N(solution, R, 1.0 - R) > K:
                return None
            lo, hi = tau, 1.0 - R
            while hi - lo > 1e-6 * hi:
                mid = 0.5 * (lo + hi)
                lo, hi = (lo, mid) if affine_N(solution, R, mid) <= K else (mid, hi)
            tau = hi
        if 1.0 - R - tau < merge_fraction * tau:
            tau = 1.0 - R
        R = 1.0 if R + tau >= 1.0 else R + tau
        radii.append(R)
    return radii


def _outer_ok(mesh, solution):
    from .verify import radial_deformation
    from .oracle import certify_net
    u = radial_deformation(solution)
    return all(certify_net(e.net.mapped(u)).positive
               for e in mesh.elements if e.kind == "straight")


def assemble(layer_radii, counts, mu, outer=True, base_angle=0.0, rings=None):
    """Build the mesh for given layer radii and couple counts.

    ``rings`` are the radii from ``mu`` to 1 of the straight region
    (default: aspect-one geometric rings).
    """
    n_layers = len(counts)
    K = counts[-1]
    if rings is None:
        rings = outer_ring_radii(mu, K)
    ring = list(rings[1:]) if outer else []
    radii = list(layer_radii) + ring
    b = _Builder(radii, mu, base_angle)
    layers = []
    offset = Fraction(0)
    warnings = []
    for k in range(n_layers):
        N = counts[k]
        split = k > 0 and N < counts[k - 1]
        if k > 0:
            offset -= Fraction(1, counts[k - 1])
        eps, tau = radii[k], radii[k + 1] - radii[k]
        _check_counts(N, eps, tau)
        _add_layer(b, k, N, offset, split, k)
        layers.append(LayerSpec(eps, tau, N, split))
        warnings += _count_warnings(eps, tau, N)
    # straight rings continue the staggered pattern with K couples
    for c in range(n_layers, len(radii) - 1):
        offset -= Fraction(1, K)
        _add_layer(b, c, K, offset, False, None, ("straight", "straight"))
    return Mesh(b.node_array(), b.elements, layers, radii[0], mu, warnings)


def build_mesh(solution, rho=None, mu=0.15, strategy=None):
    """Plan layers under the solution's deformation and assemble the mesh.

    The couple count of the last curved layer is also the count of the
    straight rings outside ``mu``. Ring thicknesses are fitted to that
    count; the count is raised only if no fit exists or a ring element
    fails the subdivision certificate under the deformation.
    """
    strategy = strategy or LayerStrategy()
    rho = solution.rho if rho is None else rho
    radii, plans = plan_layers(solution, rho, mu, strategy)
    req = [p.N_tilde for p in plans]
    outer_req = 2
    for _ in range(256):
        counts = assign_counts(req[:-1] + [max(req[-1], outer_req)], strategy.n_override)
        rings = fitted_ring_radii(solution, mu, counts[-1], strategy.merge_fraction)
        if rings is not None:
            mesh = assemble(radii, counts, mu, rings=rings)
            if strategy.n_override or _outer_ok(mesh, solution):
                break
        outer_req = counts[-1] + 1
    else:
        raise PlanningError(f"no outer couple count up to {outer_req} keeps the straight rings valid")
    mesh.plans = plans
    bad = np.flatnonzero(mesh.mesh_map_min_dets() <= 0)
    if len(bad) and not strategy.n_override:
        raise PlanningError(f"elements {bad.tolist()} have non-positive mesh-map determinant")
    return mesh


# ---------------------------------------------------------------- serialization

def mesh_to_dict(mesh):
    return {
        "rho": mesh.rho,
        "mu": mesh.mu,
        "nodes": [{"id": i, "x": float(x), "y": float(y)} for i, (x, y) in enumerate(mesh.nodes)],
        "elements": [{"kind": e.kind, "nodes": [int(k) for k in e.nodes]} for e in mesh.elements],
        "layers": [layer.to_dict() for layer in mesh.layers],
    }


def export(mesh, path):
    """Write mesh JSON. Floats use the shortest repr, which round-trips exactly."""
    with open(path, "w") as fh:
        json.dump(mesh_to_dict(mesh), fh, indent=1)
        fh.write("\n")


def _field(obj, key, where, kind=None):
    if not isinstance(obj, dict) or key not in obj:
        raise MeshFormatError(f"{where}: missing field {key!r}")
    val = obj[key]
    if kind is not None and (not isinstance(val, kind) or isinstance(val, bool)):
        raise MeshFormatError(f"{where}.{key}: expected {getattr(kind, '__name__', kind)}, "
                              f"got {type(val).__name__}")
    return val


def mesh_from_dict(data):
    num = (int, float)
    rho = float(_field(data, "rho", "mesh", num))
    mu = float(_field(data, "mu", "mesh", num))
    raw_nodes = _field(data, "nodes", "mesh", list)
    ids = {}
    coords = []
    for k, nd in enumerate(raw_nodes):
        where = f"nodes[{k}]"
        nid = _field(nd, "id", where, int)
        if nid in ids:
            raise MeshValidationError(f"{where}: duplicate node id {nid}")
        ids[nid] = len(coords)
        coords.append((float(_field(nd, "x", where, num)), float(_field(nd, "y", where, num))))
    nodes = np.array(coords, dtype=float).reshape(-1, 2)
    layers = []
    for k, ly in enumerate(data.get("layers", [])):
        where = f"layers[{k}]"
        N = _field(ly, "N", where, int)
        prev = layers[-1].N if layers else N
        layers.append(LayerSpec(float(_field(ly, "eps", where, num)),
                                float(_field(ly, "tau", where, num)), N, N < prev))
    elements = []
    for k, el in enumerate(_field(data, "elements", "mesh", list)):
        where = f"elements[{k}]"
        kind = _field(el, "kind", where, str)
        if kind not in KINDS:
            raise MeshFormatError(f"{where}.kind: unknown element kind {kind!r}")
        refs = _field(el, "nodes", where, list)
        if len(refs) != 6:
            raise MeshFormatError(f"{where}.nodes: expected 6 node ids, got {len(refs)}")
        missing = [r for r in refs if r not in ids]
        if missing:
            raise MeshValidationError(f"{where}: references missing node(s) {missing}")
        idx = tuple(ids[r] for r in refs)
        net = ControlNet(nodes[list(idx)])
        elements.append(CurvedElement(kind, idx, net, _layer_of(net, layers)))
    return Mesh(nodes, elements, layers, rho, mu)


def _layer_of(net, layers):
    r = np.hypot(net.points[:3, 0], net.points[:3, 1])
    for k, ly in enumerate(layers):
        tol = _REL_TOL * 10 * ly.outer
        if r.min() >= ly.eps - tol and r.max() <= ly.outer + tol:
            return k
    return None


def import_mesh(path):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise MeshFormatError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return mesh_from_dict(data)


def write_plot_csv(mesh, nodes_path, edges_path, samples=8):
    """Node table and a polyline per element edge (sampled along the curved edge)."""
    with open(nodes_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "x", "y"])
        for i, (x, y) in enumerate(mesh.nodes):
            w.writerow([i, repr(float(x)), repr(float(y))])
    t = np.linspace(0.0, 1.0, samples + 1)
    ref_edges = (np.stack([t, 0 * t], -1), np.stack([0 * t, t], -1), np.stack([1 - t, t], -1))
    from .isoparam import map_FT
    seen = set()
    with open(edges_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["edge", "element", "kind", "point", "x", "y"])
        n = 0
        for k, e in enumerate(mesh.elements):
            a1, a2, a3, a12, a13, a23 = e.nodes
            for (i, j, mid), ref in zip(((a1, a2, a12), (a1, a3, a13), (a2, a3, a23)), ref_edges):
                key = (min(i, j), max(i, j), mid)
                if key in seen:
                    continue
                seen.add(key)
                for q, (x, y) in enumerate(map_FT(e.net, ref)):
                    w.writerow([n, k, e.kind, q, repr(float(x)), repr(float(y))])
                n += 1
