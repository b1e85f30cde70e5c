"""Serializable calibrator models: one tagged union over every method.

A ``CalibratorModel`` pairs a method tag with its fitted parameters, the
class count, the label dictionary mapping external label names to internal
0-based indices, and fit metadata. An ``EnsembleModel`` averages the
outputs of same-method members (the inner-cross-validation ensemble).
Both round-trip losslessly through plain dicts / JSON.
"""

import datetime
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import dirichlet, ovr, scaling
from .core import DEFAULT_CLIP_FLOOR, LOGITS, PROBABILITIES, clip_probabilities

SCHEMA_ID = "probcal-model-v1"

#: method tag -> kind of input rows the method consumes.
METHOD_INPUT = {
    "dirichlet_l2": PROBABILITIES,
    "dirichlet_odir": PROBABILITIES,
    "temperature": LOGITS,
    "vector_scaling": LOGITS,
    "matrix_odir": LOGITS,
    "ovr_isotonic": PROBABILITIES,
    "ovr_width_bin": PROBABILITIES,
    "ovr_freq_bin": PROBABILITIES,
    "ovr_beta": PROBABILITIES,
    "uncalibrated": PROBABILITIES,
}

METHODS = tuple(METHOD_INPUT)


def _check_method(method: str):
    if method not in METHOD_INPUT:
        raise ValueError(f"unknown method {method!r}; expected one of {', '.join(METHODS)}")


def fit_method(method: str, X, y, hyper: dict, clip_floor: float = DEFAULT_CLIP_FLOOR,
               tol: float = 1e-8, max_iter: int = 500):
    """Fit the raw parameter object for one method on (X, y)."""
    _check_method(method)
    if method == "dirichlet_l2":
        probs = clip_probabilities(X, clip_floor)
        return dirichlet.fit(probs, y, dirichlet.L2Config(hyper["lam"]), tol=tol, max_iter=max_iter)
    if method == "dirichlet_odir":
        probs = clip_probabilities(X, clip_floor)
        reg = dirichlet.OdirConfig(hyper["lam"], hyper["mu"])
        return dirichlet.fit(probs, y, reg, tol=tol, max_iter=max_iter)
    if method == "temperature":
        return scaling.fit_temperature(X, y)
    if method == "vector_scaling":
        reg = scaling.OdirConfig(0.0, hyper.get("mu", 0.0))
        return scaling.fit_affine_logit(X, y, mode="vector", reg=reg, tol=tol, max_iter=max_iter)
    if method == "matrix_odir":
        reg = scaling.OdirConfig(hyper["lam"], hyper["mu"])
        return scaling.fit_affine_logit(X, y, mode="matrix", reg=reg, tol=tol, max_iter=max_iter)
    if method == "ovr_isotonic":
        return ovr.fit_ovr(X, y, "isotonic")
    if method == "ovr_width_bin":
        return ovr.fit_ovr(X, y, "width_bin", bins=hyper["bins"])
    if method == "ovr_freq_bin":
        return ovr.fit_ovr(X, y, "freq_bin", bins=hyper["bins"])
    if method == "ovr_beta":
        return ovr.fit_ovr(X, y, "beta")
    return None  # uncalibrated


def apply_method(method: str, params, X, clip_floor: float = DEFAULT_CLIP_FLOOR) -> np.ndarray:
    """Calibrated probability rows for one method's raw parameters."""
    _check_method(method)
    if method in ("dirichlet_l2", "dirichlet_odir"):
        return dirichlet.apply_linear(clip_probabilities(X, clip_floor), params)
    if method == "temperature":
        return scaling.apply_temperature(X, params)
    if method in ("vector_scaling", "matrix_odir"):
        return scaling.apply_affine_logit(X, params)
    if method.startswith("ovr_"):
        return ovr.apply_ovr(X, params)
    return clip_probabilities(X, clip_floor)  # uncalibrated


def _params_to_jsonable(method: str, params) -> dict:
    if method in ("dirichlet_l2", "dirichlet_odir"):
        return {"W": params.W.tolist(), "b": params.b.tolist()}
    if method == "temperature":
        return {"t": params.t}
    if method in ("vector_scaling", "matrix_odir"):
        return {"W": params.W.tolist(), "b": params.b.tolist()}
    if method.startswith("ovr_"):
        return {"kind": params.kind, "maps": [_binary_to_jsonable(m) for m in params.maps]}
    return {}


def _params_from_jsonable(method: str, obj: dict):
    if method in ("dirichlet_l2", "dirichlet_odir"):
        return dirichlet.LinearParams(W=np.array(obj["W"]), b=np.array(obj["b"]))
    if method == "temperature":
        return scaling.TemperatureParams(t=float(obj["t"]))
    if method in ("vector_scaling", "matrix_odir"):
        return scaling.AffineLogitParams(W=np.array(obj["W"]), b=np.array(obj["b"]))
    if method.startswith("ovr_"):
        maps = tuple(_binary_from_jsonable(m) for m in obj["maps"])
        return ovr.OneVsRestModel(kind=obj["kind"], maps=maps)
    return None


def _binary_to_jsonable(m) -> dict:
    if isinstance(m, ovr.IsotonicMap):
        return {"type": "isotonic", "breakpoints": m.breakpoints.tolist(), "values": m.values.tolist()}
    if isinstance(m, ovr.BinningMap):
        return {"type": "binning", "edges": m.edges.tolist(), "bin_values": m.bin_values.tolist(),
                "scheme": m.scheme}
    if isinstance(m, ovr.BetaParams):
        return {"type": "beta", "a": m.a, "b": m.b, "c": m.c}
    raise TypeError(f"unknown binary calibrator {type(m).__name__}")


def _binary_from_jsonable(obj: dict):
    t = obj["type"]
    if t == "isotonic":
        return ovr.IsotonicMap(breakpoints=np.array(obj["breakpoints"]), values=np.array(obj["values"]))
    if t == "binning":
        return ovr.BinningMap(edges=np.array(obj["edges"]), bin_values=np.array(obj["bin_values"]),
                              scheme=obj["scheme"])
    if t == "beta":
        return ovr.BetaParams(a=obj["a"], b=obj["b"], c=obj["c"])
    raise ValueError(f"unknown binary calibrator type {t!r}")


def _utc_now() -> str:
    return datetime.datetime.now(datetime.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclass
class CalibratorModel:
    """One fitted calibration map with its metadata."""

    method: str
    k: int
    params: object
    label_names: list = field(default_factory=list)
    hyperparams: dict = field(default_factory=dict)
    clip_floor: float = DEFAULT_CLIP_FLOOR
    seed: Optional[int] = None
    created: Optional[str] = None

    def __post_init__(self):
        _check_method(self.method)
        if self.k < 2:
            raise ValueError("k must be at least 2")
        if not self.label_names:
            self.label_names = [str(i) for i in range(self.k)]
        if len(self.label_names) != self.k:
            raise ValueError("label dictionary must have one name per class")

    @property
    def input_kind(self) -> str:
        return METHOD_INPUT[self.method]

    def apply(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        cols = X.shape[-1]
        if cols != self.k:
            raise ValueError(f"model expects {self.k} classes, input has {cols}")
        return apply_method(self.method, self.params, X, self.clip_floor)

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA_ID,
            "type": "single",
            "method": self.method,
            "k": self.k,
            "input": self.input_kind,
            "labels": list(self.label_names),
            "params": _params_to_jsonable(self.method, self.params),
            "hyperparams": dict(self.hyperparams),
            "clip_floor": self.clip_floor,
            "seed": self.seed,
            "created": self.created,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "CalibratorModel":
        if obj.get("schema") != SCHEMA_ID:
            raise ValueError(f"unsupported model schema {obj.get('schema')!r}")
        method = obj["method"]
        return cls(
            method=method,
            k=int(obj["k"]),
            params=_params_from_jsonable(method, obj["params"]),
            label_names=list(obj.get("labels", [])),
            hyperparams=dict(obj.get("hyperparams", {})),
            clip_floor=float(obj.get("clip_floor", DEFAULT_CLIP_FLOOR)),
            seed=obj.get("seed"),
            created=obj.get("created"),
        )


@dataclass
class EnsembleModel:
    """Average of same-method members fitted on different folds."""

    members: list

    def __post_init__(self):
        if not self.members:
            raise ValueError("ensemble needs at least one member")
        methods = {m.method for m in self.members}
        ks = {m.k for m in self.members}
        if len(methods) > 1 or len(ks) > 1:
            raise ValueError("ensemble members must share method and class count")

    @property
    def method(self) -> str:
        return self.members[0].method

    @property
    def k(self) -> int:
        return self.members[0].k

    @property
    def label_names(self) -> list:
        return self.members[0].label_names

    @property
    def input_kind(self) -> str:
        return self.members[0].input_kind

    @property
    def hyperparams(self) -> dict:
        return self.members[0].hyperparams

    def apply(self, X) -> np.ndarray:
        outputs = [m.apply(X) for m in self.members]
        mean = np.mean(outputs, axis=0)
        return mean / mean.sum(axis=-1, keepdims=True)

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA_ID,
            "type": "ensemble",
            "method": self.method,
            "k": self.k,
            "members": [m.to_dict() for m in self.members],
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "EnsembleModel":
        if obj.get("schema") != SCHEMA_ID:
            raise ValueError(f"unsupported model schema {obj.get('schema')!r}")
        return cls(members=[CalibratorModel.from_dict(m) for m in obj["members"]])


def model_from_dict(obj: dict):
    """Load either a single model or an ensemble from its dict form."""
    if not isinstance(obj, dict) or "type" not in obj:
        raise ValueError("not a calibrator model document")
    if obj["type"] == "single":
        return CalibratorModel.from_dict(obj)
    if obj["type"] == "ensemble":
        return EnsembleModel.from_dict(obj)
    raise ValueError(f"unknown model document type {obj['type']!r}")


def fit_calibrator(method: str, X, y, hyper: Optional[dict] = None,
                   label_names: Optional[list] = None,
                   clip_floor: float = DEFAULT_CLIP_FLOOR,
                   seed: Optional[int] = None,
                   tol: float = 1e-8, max_iter: int = 500) -> CalibratorModel:
    """Fit one method on all of (X, y) and wrap it as a CalibratorModel."""
    X = np.asarray(X, dtype=float)
    hyper = dict(hyper or {})
    params = fit_method(method, X, y, hyper, clip_floor, tol=tol, max_iter=max_iter)
    return CalibratorModel(
        method=method,
        k=X.shape[1],
        params=params,
        label_names=list(label_names) if label_names else [],
        hyperparams=hyper,
        clip_floor=clip_floor,
        seed=seed,
        created=_utc_now(),
    )
