"""Scenario files: schema validation and construction of models and Lagrangians."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .ambient import (
    AmbientModel,
    WarpProfile,
    cheeger_family,
    homothety_family,
    make_flat_cn,
    make_sphere,
)
from .errors import HamlagError
from .lagrangian import DEFAULT_CUTOFF, LagrangianRep


class ScenarioError(HamlagError, ValueError):
    """The scenario is malformed or inconsistent."""


@lru_cache(maxsize=1)
def scenario_schema() -> dict:
    text = resources.files("hamlag").joinpath("scenario.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def canonical_json(data) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


@dataclass(frozen=True)
class Scenario:
    data: dict
    source: str = "<dict>"

    @property
    def hash(self) -> str:
        return hashlib.sha256(canonical_json(self.data).encode("utf-8")).hexdigest()

    @property
    def numerics(self) -> dict:
        return dict(self.data.get("numerics", {}))

    @property
    def run(self) -> dict:
        return dict(self.data.get("run", {}))

    @property
    def group(self) -> str:
        default = "torus" if self.data["ambient"]["kind"] == "flat" else "so2"
        return self.data.get("group", {}).get("name", default)

    def cutoff(self, override: int | None = None) -> int:
        if override is not None:
            return int(override)
        d = self.build_model().d
        return int(self.numerics.get("cutoff", DEFAULT_CUTOFF[d]))

    def build_model(self) -> AmbientModel:
        amb = self.data["ambient"]
        fam = self.data.get("metric_family", {"kind": "constant"})
        grp = self.data.get("group", {})
        kind = fam["kind"]
        if amb["kind"] == "flat":
            if "n" not in amb:
                raise ScenarioError("flat ambient needs 'n'")
            if "profile" in amb:
                raise ScenarioError("warp profiles apply to the sphere only")
            if self.group != "torus":
                raise ScenarioError(f"flat C^n carries the torus action, not {self.group!r}")
            if kind == "warped":
                raise ScenarioError("the warped family lives on the sphere")
            model = make_flat_cn(amb["n"])
        else:
            if "n" in amb:
                raise ScenarioError("the sphere ambient takes no 'n'")
            if self.group == "torus":
                raise ScenarioError("the sphere carries so2 or so3, not the torus action")
            profile = None
            if kind == "warped":
                spec = amb.get("profile")
                if spec is None:
                    raise ScenarioError("the warped family needs ambient.profile")
                profile = WarpProfile(spec["name"], float(spec.get("amplitude", 1.0)))
            elif "profile" in amb:
                raise ScenarioError("ambient.profile is only used by the warped family")
            model = make_sphere(profile, self.group)
        if "Q" in grp:
            model = model.with_action(self.group, _matrix(grp["Q"], model.action.group_dim, "group.Q"))
        if kind == "cheeger":
            Q = None
            if "Q" in fam:
                Q = _matrix(fam["Q"], model.action.group_dim, "metric_family.Q")
            model = model.with_family(cheeger_family(model, Q))
        elif kind == "homothety":
            model = model.with_family(homothety_family(model, fam.get("kappa")))
        elif "kappa" in fam or "Q" in fam:
            raise ScenarioError(f"the {kind} family takes no parameters")
        return model

    def build_rep(self, cutoff: int | None = None, model: AmbientModel | None = None) -> LagrangianRep:
        model = model or self.build_model()
        lag = self.data["lagrangian"]
        for key in ("base_point", "harmonic_part"):
            if key in lag and len(lag[key]) != model.d:
                raise ScenarioError(f"lagrangian.{key} must have length {model.d}")
        for entry in lag.get("h", []) if lag.get("h") != "zero" else []:
            if len(entry["k"]) != model.d:
                raise ScenarioError(f"mode {entry['k']} does not match dimension {model.d}")
        try:
            return LagrangianRep.from_dict(model, lag, cutoff=self.cutoff(cutoff))
        except ValueError as exc:
            raise ScenarioError(str(exc)) from exc


def _matrix(rows, k: int, name: str) -> np.ndarray:
    Q = np.asarray(rows, dtype=float)
    if Q.shape != (k, k):
        raise ScenarioError(f"{name} must be {k}x{k}")
    return Q


def validate(data) -> None:
    try:
        jsonschema.validate(data, scenario_schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ScenarioError(f"schema violation at {where}: {exc.message}") from exc


def load_scenario(source) -> Scenario:
    """Load and validate a scenario from a path, JSON text or an already parsed dict."""
    if isinstance(source, dict):
        data, name = source, "<dict>"
    else:
        path = Path(source)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ScenarioError(f"cannot read scenario {path}: {exc}") from exc
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"malformed JSON in {path}: {exc}") from exc
        name = str(path)
    validate(data)
    scenario = Scenario(data, name)
    scenario.build_model()  # semantic checks up front
    return scenario
