"""JSON model files and the compact potential / feature-map flag syntax."""
from __future__ import annotations

import json

import numpy as np

from .core import Gmimn, Mimn, MimnError, Model, PotentialSpec, Rmimn
from .features import KERNELS, FeatureMapSpec, Homogeneous, Identity, Quadratic, Scaler, mapped_dim

MODEL_VERSION = 1


class ModelFileError(MimnError):
    pass


def parse_potential(text: str) -> PotentialSpec:
    """``mimn``, ``rmimn:<rho>`` or ``gmimn:<K>``."""
    kind, _, arg = text.strip().lower().partition(":")
    if kind == "mimn" and not arg:
        return Mimn()
    if kind == "rmimn":
        try:
            rho = float(arg)
        except ValueError:
            raise MimnError("rho must be in (0,1]") from None
        return Rmimn(rho)
    if kind == "gmimn":
        try:
            k = int(arg)
        except ValueError:
            raise MimnError(f"gmimn needs an integer segment count, got {arg!r}") from None
        return Gmimn(k)
    raise MimnError(f"unknown potential {text!r}; expected mimn, rmimn:<rho> or gmimn:<K>")


def parse_feature_map(text: str) -> FeatureMapSpec:
    """``linear``, ``quad`` or ``hom:<kernel>[:<order>[:<period>]]``."""
    parts = text.strip().lower().split(":")
    if parts == ["linear"] or parts == ["identity"]:
        return Identity()
    if parts in (["quad"], ["quadratic"]):
        return Quadratic()
    if parts[0] in ("hom", "homogeneous") and 2 <= len(parts) <= 4:
        try:
            order = int(parts[2]) if len(parts) > 2 else 3
            period = float(parts[3]) if len(parts) > 3 else 0.5
        except ValueError:
            raise MimnError(f"bad homogeneous map {text!r}") from None
        return Homogeneous(parts[1], order, period)
    raise MimnError(f"unknown feature map {text!r}; expected linear, quad or hom:<kernel>:<n>:<L>")


def potential_to_dict(spec: PotentialSpec) -> dict:
    if isinstance(spec, Mimn):
        return {"kind": "mimn"}
    if isinstance(spec, Rmimn):
        return {"kind": "rmimn", "rho": float(spec.rho)}
    return {"kind": "gmimn", "k_segments": spec.k_segments}


def potential_from_dict(d: dict) -> PotentialSpec:
    kind = d.get("kind")
    if kind == "mimn":
        return Mimn()
    if kind == "rmimn":
        return Rmimn(float(d["rho"]))
    if kind == "gmimn":
        return Gmimn(int(d["k_segments"]))
    raise ModelFileError(f"unsupported potential {kind!r}")


def feature_map_to_dict(spec: FeatureMapSpec) -> dict:
    if isinstance(spec, Identity):
        return {"kind": "linear"}
    if isinstance(spec, Quadratic):
        return {"kind": "quad"}
    return {"kind": "hom", "kernel": spec.kernel, "n": spec.order, "period": float(spec.period)}


def feature_map_from_dict(d: dict) -> FeatureMapSpec:
    kind = d.get("kind")
    if kind == "linear":
        return Identity()
    if kind == "quad":
        return Quadratic()
    if kind == "hom" and d.get("kernel") in KERNELS:
        return Homogeneous(d["kernel"], int(d["n"]), float(d["period"]))
    raise ModelFileError("unsupported feature_map")


def model_to_dict(model: Model) -> dict:
    return {
        "version": MODEL_VERSION,
        "potential": potential_to_dict(model.spec),
        "feature_map": feature_map_to_dict(model.map_spec or Identity()),
        "scaler": {"min": model.scaler.min.tolist(), "max": model.scaler.max.tolist()},
        "w_instance": model.w_instance.tolist(),
        "w_clique": model.w_clique.tolist(),
        "append_bias": bool(model.append_bias),
    }


def dumps_model(model: Model) -> str:
    """Canonical JSON: sorted keys, shortest round-trip float repr."""
    return json.dumps(model_to_dict(model), sort_keys=True, indent=1) + "\n"


def loads_model(text: str) -> Model:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ModelFileError(f"model file is not valid JSON: {e}") from None
    if not isinstance(doc, dict) or doc.get("version") != MODEL_VERSION:
        raise ModelFileError("unsupported model file version")
    try:
        spec = potential_from_dict(doc["potential"])
        map_spec = feature_map_from_dict(doc["feature_map"])
        scaler = Scaler(np.array(doc["scaler"]["min"], dtype=float),
                        np.array(doc["scaler"]["max"], dtype=float))
        w = np.array(doc["w_instance"], dtype=float)
        c = np.array(doc["w_clique"], dtype=float)
        bias = doc["append_bias"]
    except (KeyError, TypeError, ValueError) as e:
        if isinstance(e, ModelFileError):
            raise
        raise ModelFileError(f"malformed model file: {e}") from None
    if not isinstance(bias, bool):
        raise ModelFileError("append_bias must be a boolean")
    if w.size != mapped_dim(scaler.dim, map_spec, bias):
        raise ModelFileError(
            f"w_instance has length {w.size}, expected {mapped_dim(scaler.dim, map_spec, bias)}")
    if c.size != spec.n_weights:
        raise ModelFileError(f"w_clique has length {c.size}, expected {spec.n_weights}")
    return Model(w, c, spec, map_spec, scaler, bias)


def save_model(model: Model, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(dumps_model(model))


def load_model(path) -> Model:
    with open(path, encoding="utf-8") as f:
        return loads_model(f.read())
