"""Per-element orientation checks of a mesh and of a deformation on it.

A and B elements that sit in the canonical layer layout are decided in
closed form from three radial samples; everything else (C, D, straight,
or curved elements in a foreign layout) goes through the subdivision
certificate of the determinant polynomial. With ``dense=True`` every
element additionally gets a sampled minimum determinant.
"""

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .conditions import PreconditionError, check_type_A, check_type_B, verdict_theorem1
from .isoparam import RadialSamples, radial_net_A, radial_net_B
from .oracle import OracleConfig, certify_net, net_min_det

_LAYOUT_TOL = 1e-11


@dataclass
class ElementCheck:
    id: int
    kind: str
    layer: int | None
    method: str
    mesh_ok: bool
    deform_ok: bool | None = None
    mesh_detail: dict = field(default_factory=dict)
    deform_detail: dict = field(default_factory=dict)
    mesh_min_det: float | None = None
    deform_min_det: float | None = None

    @property
    def ok(self):
        return self.mesh_ok and self.deform_ok is not False

    def to_dict(self):
        out = asdict(self)
        out["ok"] = self.ok
        return out


@dataclass
class OPReport:
    elements: list
    layers: list
    with_deformation: bool

    @property
    def failing(self):
        return [c.id for c in self.elements if not c.ok]

    @property
    def failing_layers(self):
        return [ly["layer"] for ly in self.layers if ly.get("verdict") is False]

    @property
    def passed(self):
        return not self.failing and not self.failing_layers

    def to_dict(self):
        return {
            "passed": self.passed,
            "with_deformation": self.with_deformation,
            "failing_elements": self.failing,
            "failing_layers": self.failing_layers,
            "layers": self.layers,
            "elements": [c.to_dict() for c in self.elements],
        }


def radial_deformation(solution):
    """``u(a) = r(|a|) a / |a|`` as a point map."""
    def u(a):
        rad = math.hypot(a[0], a[1])
        return np.asarray(a, dtype=float) * (solution.r_at(rad) / rad)
    return u


def canonical_layout(elem):
    """``(eps, tau, N, angle)`` when an A/B net is the canonical layer layout, else ``None``."""
    if elem.kind not in ("A", "B"):
        return None
    pts = elem.net.points
    r = np.hypot(pts[:, 0], pts[:, 1])
    th = np.arctan2(pts[:, 1], pts[:, 0])
    half = abs(math.remainder(th[1] - th[0], 2 * math.pi))
    if half <= 0:
        return None
    N = round(math.pi / half)
    if N < 2:
        return None
    if elem.kind == "A":
        eps, outer = r[0], r[1]
        ref = radial_net_A(RadialSamples.identity(eps, outer - eps), N)
    else:
        eps, outer = r[1], r[0]
        ref = radial_net_B(RadialSamples.identity(eps, outer - eps), N)
    if not outer > eps:
        return None
    ref = ref.rotated(th[0])
    if np.max(np.abs(ref.points - pts)) > _LAYOUT_TOL * outer:
        return None
    return float(eps), float(outer - eps), N, float(th[0])


def _analytic(kind, samples, N):
    try:
        if kind == "A":
            ok, vals = check_type_A(samples, N)
            return ok, dict(vals)
        ok, v25 = check_type_B(samples, N)
        return ok, {"cond_25": v25}
    except PreconditionError as exc:
        return False, {"error": str(exc)}


def _certificate(net, config):
    cert = certify_net(net, config)
    return cert.positive, cert.to_dict()


def check_element(idx, elem, solution=None, config=None, dense=False):
    config = config or OracleConfig()
    layout = canonical_layout(elem)
    deformed = None
    if solution is not None:
        deformed = elem.net.mapped(radial_deformation(solution))
    if layout is not None:
        eps, tau, N, _ = layout
        mesh_ok, mesh_detail = _analytic(elem.kind, RadialSamples.identity(eps, tau), N)
        mesh_detail.update(eps=eps, tau=tau, N=N)
        method = "analytic"
        deform_ok, deform_detail = None, {}
        if solution is not None:
            deform_ok, deform_detail = _analytic(
                elem.kind, RadialSamples.from_solution(solution, eps, tau), N)
    else:
        method = "certificate"
        mesh_ok, mesh_detail = _certificate(elem.net, config)
        deform_ok, deform_detail = (None, {}) if deformed is None else _certificate(deformed, config)
    check = ElementCheck(idx, elem.kind, elem.layer, method, bool(mesh_ok),
                         None if deform_ok is None else bool(deform_ok), mesh_detail, deform_detail)
    if dense:
        check.mesh_min_det = net_min_det(elem.net, config)[0]
        if deformed is not None:
            check.deform_min_det = net_min_det(deformed, config)[0]
    return check


def layer_verdicts(mesh, solution):
    out = []
    for k, ly in enumerate(mesh.layers):
        entry = {"layer": k, "eps": ly.eps, "tau": ly.tau, "N": ly.N,
                 "coarsen_from_inner": ly.coarsen_from_inner}
        if solution is not None:
            try:
                entry["verdict"] = verdict_theorem1(
                    RadialSamples.from_solution(solution, ly.eps, ly.tau), ly.N)
            except PreconditionError as exc:
                entry["verdict"] = False
                entry["error"] = str(exc)
        out.append(entry)
    return out


def thread_count(default=1):
    raw = os.environ.get("CAVMESH_THREADS")
    if not raw:
        return default
    try:
        return max(1, int(raw))
    except ValueError:
        return default


def check_mesh(mesh, solution=None, config=None, dense=False, threads=None):
    """Check every element; results are ordered by element id."""
    config = config or OracleConfig()
    threads = thread_count() if threads is None else threads

    def one(k):
        return check_element(k, mesh.elements[k], solution, config, dense)

    ids = range(len(mesh.elements))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            checks = list(pool.map(one, ids))
    else:
        checks = [one(k) for k in ids]
    return OPReport(checks, layer_verdicts(mesh, solution), solution is not None)
