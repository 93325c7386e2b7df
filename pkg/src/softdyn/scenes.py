"""Scene configuration: strict JSON parsing and serialization."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from . import contact as ct
from .driver import ALL_METHODS, ReductionConfig
from .fem import Material, MaterialParams, RayleighParams
from .meshes import load_mesh
from .reduction import RefreshPolicy
from .steppers import NewtonConfig
from .system import ForceModel


class SceneError(ValueError):
    pass


@dataclass(frozen=True)
class SceneConfig:
    mesh_path: str
    material: MaterialParams
    rayleigh: RayleighParams
    gravity: tuple
    contact: ct.ContactConfig | None
    method: str
    h: float
    newton: NewtonConfig
    reduction: ReductionConfig | None
    duration: float
    cadence: float

    def __post_init__(self):
        if self.duration <= 0:
            raise SceneError("duration must be > 0")
        if self.cadence <= 0:
            raise SceneError("cadence must be > 0")
        if self.method.upper() not in ALL_METHODS:
            raise SceneError(f"unknown method {self.method!r}")


def _take(d, allowed, where):
    extra = set(d) - set(allowed)
    if extra:
        raise SceneError(f"unknown field(s) {sorted(extra)} in {where}")


def _parse_surface(d, i):
    _take(d, {"kind", "point", "normal", "center", "radius"}, f"surfaces[{i}]")
    kind = d.get("kind")
    if kind == "halfspace":
        return ct.HalfSpace(d["point"], d["normal"])
    if kind == "sphere":
        return ct.Sphere(d["center"], d["radius"])
    raise SceneError(f"unknown surface kind {kind!r}")


def parse_scene(data: dict, base_dir=".") -> SceneConfig:
    _take(data, {"mesh", "material", "rayleigh", "gravity", "contact",
                 "stepper", "reduction", "duration", "output_cadence"}, "scene")
    for req in ("mesh", "material", "stepper", "duration", "output_cadence"):
        if req not in data:
            raise SceneError(f"missing required field {req!r}")
    mesh_path = os.path.join(base_dir, data["mesh"])
    if not os.path.exists(mesh_path):
        raise SceneError(f"mesh file not found: {mesh_path}")

    md = data["material"]
    _take(md, {"model", "youngs_modulus", "poisson_ratio", "density"}, "material")
    try:
        mat = MaterialParams(Material(md["model"]), md["youngs_modulus"],
                             md["poisson_ratio"], md["density"])
    except (KeyError, ValueError) as exc:
        raise SceneError(f"bad material: {exc}") from exc

    rd = data.get("rayleigh", {})
    _take(rd, {"alpha", "beta"}, "rayleigh")
    ray = RayleighParams(rd.get("alpha", 0.0), rd.get("beta", 0.0))

    grav = tuple(data.get("gravity", (0.0, 0.0, 0.0)))
    if len(grav) != 3:
        raise SceneError("gravity must have 3 components")

    con = None
    if "contact" in data:
        cd = data["contact"]
        _take(cd, {"surfaces", "delta", "kappa", "mu", "epsilon"}, "contact")
        surfs = [_parse_surface(s, i) for i, s in enumerate(cd.get("surfaces", []))]
        con = ct.ContactConfig(tuple(surfs), cd.get("delta", 1e-3),
                               cd.get("kappa", 1.0), cd.get("mu", 0.0),
                               cd.get("epsilon", 1e-3))

    sd = data["stepper"]
    _take(sd, {"method", "h", "newton"}, "stepper")
    nd = sd.get("newton", {})
    _take(nd, {"max_iters", "abs_tol", "rel_tol"}, "newton")
    newton = NewtonConfig(nd.get("max_iters", 50), nd.get("abs_tol", 1e-10),
                          nd.get("rel_tol", 1e-12))
    method = sd["method"]
    h = sd["h"]
    if h <= 0:
        raise SceneError("step size must be > 0")

    red = None
    if "reduction" in data:
        rdd = data["reduction"]
        _take(rdd, {"s", "refresh", "every_n"}, "reduction")
        pol = rdd.get("refresh", "once")
        red = ReductionConfig(rdd.get("s", 5), RefreshPolicy(pol),
                              rdd.get("every_n", 1))

    return SceneConfig(mesh_path, mat, ray, grav, con, method, h, newton, red,
                       data["duration"], data["output_cadence"])


def load_scene(path) -> SceneConfig:
    try:
        with open(path) as f:
            data = json.load(f)
    except OSError as exc:
        raise SceneError(f"cannot read scene file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SceneError(f"{path}: invalid JSON ({exc})") from exc
    return parse_scene(data, base_dir=os.path.dirname(os.path.abspath(path)))


def scene_to_dict(sc: SceneConfig) -> dict:
    """Serialize back to the JSON schema (mesh path as given)."""
    out = {
        "mesh": sc.mesh_path,
        "material": {"model": sc.material.model.value,
                     "youngs_modulus": sc.material.youngs_modulus,
                     "poisson_ratio": sc.material.poisson_ratio,
                     "density": sc.material.density},
        "rayleigh": {"alpha": sc.rayleigh.alpha, "beta": sc.rayleigh.beta},
        "gravity": list(sc.gravity),
        "stepper": {"method": sc.method, "h": sc.h,
                    "newton": {"max_iters": sc.newton.max_iters,
                               "abs_tol": sc.newton.abs_tol,
                               "rel_tol": sc.newton.rel_tol}},
        "duration": sc.duration,
        "output_cadence": sc.cadence,
    }
    if sc.contact is not None:
        surfs = []
        for s in sc.contact.surfaces:
            if isinstance(s, ct.HalfSpace):
                surfs.append({"kind": "halfspace", "point": list(s.point),
                              "normal": list(s.normal)})
            else:
                surfs.append({"kind": "sphere", "center": list(s.center),
                              "radius": s.radius})
        out["contact"] = {"surfaces": surfs, "delta": sc.contact.delta,
                          "kappa": sc.contact.kappa, "mu": sc.contact.mu,
                          "epsilon": sc.contact.epsilon}
    if sc.reduction is not None:
        out["reduction"] = {"s": sc.reduction.s,
                            "refresh": sc.reduction.policy.value,
                            "every_n": sc.reduction.every_n}
    return out


def build_model(sc: SceneConfig) -> ForceModel:
    mesh = load_mesh(sc.mesh_path)
    return ForceModel(mesh, sc.material, sc.rayleigh, sc.gravity, sc.contact)
