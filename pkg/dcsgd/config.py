#! /usr/bin/env python

"""
Experiment configuration: one JSON document describing the problem, the
methods to compare and the run parameters.

A document holds either a single method at the top level::

    {"problem": {"kind": "counterexample"}, "mode": "plain",
     "compressor": {"kind": "top_k", "k": 1},
     "schedule": {"kind": "constant", "eta": 0.01}, "T": 50}

or a ``methods`` list of such entries, each with a ``name``.
Validation collects every problem before raising a single
:class:`ConfigurationError`.
"""

from __future__ import annotations
import json
from dataclasses import dataclass, field
from inspect import Parameter, signature
from typing import Dict, List, Any, Optional, Tuple

from dcsgd.compressors import nominal_delta
from dcsgd.data_models.problem import ProblemInstance
from dcsgd.data_models.run import Mode, Schedule
from dcsgd.data_models.sampling import SamplingScheme
from dcsgd.data_models.spec import CompressorSpec
from dcsgd.defaults import (
    DEFAULT_N_CHECKPOINTS,
    DEFAULT_N_GRID,
    DEFAULT_OUTPUT_DIR,
    DEFAULT_TARGET_GAP,
    DEFAULT_TRIALS,
    PROBLEM_KINDS,
    SCHEDULE_KINDS,
)
from dcsgd.exceptions import ConfigurationError, DCSGDError
from dcsgd.problems import make_counterexample, make_random_quadratic
from dcsgd.sampling import default_eso_vector, pp_variance_parameters, require_proper
from dcsgd.types import Path
from dcsgd.utils import filter_kwargs_by_callable

METHOD_KEYS = ["name", "mode", "compressor", "sampling", "schedule", "expect_divergence"]
TOP_LEVEL_KEYS = [
    "name",
    "problem",
    "methods",
    "T",
    "seeds",
    "output_dir",
    "target_gap",
    "n_checkpoints",
    "trials",
    "n_grid",
    "certify_dim",
] + METHOD_KEYS[1:]
PROBLEM_BUILDERS = {"counterexample": make_counterexample, "random_quadratic": make_random_quadratic}
DEFAULT_METHOD = {
    "mode": "plain",
    "compressor": {"kind": "identity"},
    "sampling": None,
    "schedule": {"kind": "two_phase"},
    "expect_divergence": False,
}


def build_problem(spec: Dict[str, Any]) -> ProblemInstance:
    """``{"kind": "counterexample", "t": 1}`` or ``{"kind": "random_quadratic", "n": ..., ...}``."""
    spec = dict(spec)
    kind = spec.pop("kind", None)
    if kind == "counterexample":
        unknown = set(spec) - {"t"}
        if unknown:
            raise ConfigurationError([f"Unknown counterexample parameters: {sorted(unknown)}."])
        return make_counterexample(spec.get("t", 1.0))
    if kind == "random_quadratic":
        kwargs = filter_kwargs_by_callable(spec, make_random_quadratic)
        unknown = set(spec) - set(kwargs)
        missing = {"n", "d", "mu", "L"} - set(kwargs)
        problems = list()
        if unknown:
            problems.append(f"Unknown random quadratic parameters: {sorted(unknown)}.")
        if missing:
            problems.append(f"Missing random quadratic parameters: {sorted(missing)}.")
        if problems:
            raise ConfigurationError(problems)
        return make_random_quadratic(**kwargs)
    raise ConfigurationError([f"Unknown problem kind '{kind}'; choose one of {PROBLEM_KINDS}."])


def resolve_problem(spec: Dict[str, Any]) -> Dict[str, Any]:
    """Problem document with every default of its builder made explicit."""
    builder = PROBLEM_BUILDERS[spec["kind"]]
    defaults = {
        name: param.default
        for name, param in signature(builder).parameters.items()
        if param.default is not Parameter.empty
    }
    return {"kind": spec["kind"], **defaults, **{k: v for k, v in spec.items() if k != "kind"}}


def effective_delta(
    problem: ProblemInstance,
    compressor: CompressorSpec,
    scheme: Optional[SamplingScheme] = None,
) -> Dict[str, float]:
    """
    Nominal delta of the compressor, a_S and the effective parameter:
    delta_n = (delta - 1) / n + 1 without a sampling scheme, delta_S with one.
    """
    n = problem.n
    delta = nominal_delta(compressor, problem.dim)
    if scheme is None:
        return {"delta": delta, "a_s": 0.0, "delta_eff": (delta - 1) / n + 1}
    a_s, delta_s = pp_variance_parameters(scheme, default_eso_vector(scheme), delta)
    return {"delta": delta, "a_s": a_s, "delta_eff": delta_s}


def build_schedule(
    spec: Dict[str, Any],
    problem: ProblemInstance,
    compressor: CompressorSpec,
    scheme: Optional[SamplingScheme],
    T: int,
) -> Schedule:
    """
    ``constant`` (``eta``), ``inverse_smoothness`` (eta = scale / L with the
    node-level L) or ``two_phase``: the two-phase schedule with a = mu and
    d = 2 delta_eff L.
    """
    kind = spec.get("kind")
    c = problem.constants
    if kind == "constant":
        return Schedule.constant(spec.get("eta", 0.0))
    if kind == "inverse_smoothness":
        return Schedule.constant(spec.get("scale", 1.0) / c.L)
    if kind == "two_phase":
        delta_eff = effective_delta(problem, compressor, scheme)["delta_eff"]
        return Schedule.two_phase(c.mu, 2 * delta_eff * c.L, T)
    raise ConfigurationError([f"Unknown schedule kind '{kind}'; choose one of {SCHEDULE_KINDS}."])


@dataclass
class MethodConfig:
    name: str
    mode: Mode
    compressor: CompressorSpec
    sampling: Optional[SamplingScheme] = None
    schedule: Dict[str, Any] = field(default_factory=lambda: {"kind": "two_phase"})
    expect_divergence: bool = False

    def __repr__(self) -> str:
        return f"Method '{self.name}' ({self.compressor.label}, {self.mode.value})"

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "mode": self.mode.value,
            "compressor": self.compressor.to_dict(),
            "sampling": self.sampling.to_dict() if self.sampling is not None else None,
            "schedule": dict(self.schedule),
            "expect_divergence": self.expect_divergence,
        }


def _parse_method(
    doc: Dict[str, Any], problem: Optional[ProblemInstance], position: int
) -> Tuple[Optional[MethodConfig], List[str]]:
    where = f"method {position}"
    problems = list()
    unknown = set(doc) - set(METHOD_KEYS)
    if unknown:
        problems.append(f"{where}: unknown keys {sorted(unknown)}.")
    doc = {**DEFAULT_METHOD, **doc}

    try:
        mode = Mode(doc["mode"])
    except ValueError:
        problems.append(f"{where}: unknown mode '{doc['mode']}'; choose one of {[m.value for m in Mode]}.")
        mode = None
    try:
        compressor = CompressorSpec.from_dict(doc["compressor"])
        if problem is not None:
            compressor.check_dim(problem.dim)
    except (DCSGDError, KeyError, ValueError, TypeError) as e:
        problems.append(f"{where}: invalid compressor: {e}")
        compressor = None
    where = f"method '{doc.get('name', position)}'"

    scheme = None
    if doc["sampling"] is not None:
        if mode is not None and mode != Mode.PP:
            problems.append(f"{where}: a sampling scheme is only used in 'pp' mode.")
        try:
            scheme = SamplingScheme.from_dict(
                doc["sampling"], problem.n if problem is not None else None
            )
            if problem is not None and scheme.n != problem.n:
                problems.append(f"{where}: sampling over {scheme.n} nodes, problem has {problem.n}.")
            elif problem is not None and mode == Mode.PP:
                require_proper(scheme)
        except (DCSGDError, KeyError, ValueError, TypeError) as e:
            problems.append(f"{where}: invalid sampling: {e}")
    elif mode == Mode.PP:
        problems.append(f"{where}: 'pp' mode needs a sampling scheme.")

    schedule = dict(doc["schedule"]) if isinstance(doc["schedule"], dict) else {}
    kind = schedule.get("kind")
    if kind not in SCHEDULE_KINDS:
        problems.append(f"{where}: unknown schedule kind '{kind}'; choose one of {SCHEDULE_KINDS}.")
    elif kind == "constant" and "eta" not in schedule:
        problems.append(f"{where}: constant schedule needs 'eta'.")
    elif kind == "inverse_smoothness":
        schedule.setdefault("scale", 1.0)

    if problems or compressor is None or mode is None:
        return None, problems
    name = doc.get("name") or f"{compressor.label}-{mode.value}"
    return (
        MethodConfig(
            name=str(name),
            mode=mode,
            compressor=compressor,
            sampling=scheme,
            schedule=schedule,
            expect_divergence=bool(doc["expect_divergence"]),
        ),
        problems,
    )


@dataclass
class ExperimentConfig:
    problem: Dict[str, Any]
    methods: List[MethodConfig]
    T: int = 100
    seeds: List[int] = field(default_factory=lambda: [0])
    output_dir: Path = DEFAULT_OUTPUT_DIR
    name: str = "experiment"
    target_gap: float = DEFAULT_TARGET_GAP
    n_checkpoints: int = DEFAULT_N_CHECKPOINTS
    trials: int = DEFAULT_TRIALS
    n_grid: List[int] = field(default_factory=lambda: list(DEFAULT_N_GRID))
    certify_dim: Optional[int] = None
    instance: ProblemInstance = field(init=False, repr=False)

    def __post_init__(self):
        self.output_dir = Path(self.output_dir)
        self.instance = build_problem(self.problem)
        self.problem = resolve_problem(self.problem)
        if self.certify_dim is None:
            self.certify_dim = self.instance.dim

    def __repr__(self) -> str:
        return f"Experiment '{self.name}' with {len(self.methods)} methods on {self.instance!r}"

    def schedule_for(self, method: MethodConfig) -> Schedule:
        return build_schedule(
            method.schedule, self.instance, method.compressor, method.sampling, self.T
        )

    @classmethod
    def from_dict(cls, doc: Dict[str, Any]) -> "ExperimentConfig":
        problems: List[str] = list()
        if not isinstance(doc, dict):
            raise ConfigurationError(["Configuration must be a JSON object."])
        unknown = set(doc) - set(TOP_LEVEL_KEYS)
        if unknown:
            problems.append(f"Unknown configuration keys: {sorted(unknown)}.")

        instance = None
        if "problem" not in doc:
            problems.append("Missing 'problem'.")
        else:
            try:
                instance = build_problem(doc["problem"])
            except ConfigurationError as e:
                problems += e.problems
            except (DCSGDError, TypeError, ValueError) as e:
                problems.append(f"Invalid problem: {e}")

        T = doc.get("T", 100)
        if not isinstance(T, int) or isinstance(T, bool) or T < 0:
            problems.append(f"'T' must be a non-negative integer, got {T!r}.")
        seeds = doc.get("seeds", [0])
        if not isinstance(seeds, list) or not all(
            isinstance(s, int) and not isinstance(s, bool) and s >= 0 for s in seeds
        ):
            problems.append(f"'seeds' must be a list of non-negative integers, got {seeds!r}.")
        target_gap = doc.get("target_gap", DEFAULT_TARGET_GAP)
        if not isinstance(target_gap, (int, float)) or not target_gap > 0:
            problems.append(f"'target_gap' must be positive, got {target_gap!r}.")
        n_checkpoints = doc.get("n_checkpoints", DEFAULT_N_CHECKPOINTS)
        if not isinstance(n_checkpoints, int) or n_checkpoints < 1:
            problems.append(f"'n_checkpoints' must be a positive integer, got {n_checkpoints!r}.")
        trials = doc.get("trials", DEFAULT_TRIALS)
        if not isinstance(trials, int) or trials < 1:
            problems.append(f"'trials' must be a positive integer, got {trials!r}.")
        n_grid = doc.get("n_grid", list(DEFAULT_N_GRID))
        if not isinstance(n_grid, list) or not n_grid or not all(
            isinstance(n, int) and n >= 1 for n in n_grid
        ):
            problems.append(f"'n_grid' must be a list of positive integers, got {n_grid!r}.")
        certify_dim = doc.get("certify_dim")
        if certify_dim is not None and (not isinstance(certify_dim, int) or certify_dim < 1):
            problems.append(f"'certify_dim' must be a positive integer, got {certify_dim!r}.")

        if "methods" in doc:
            stray = set(doc) & set(METHOD_KEYS[1:])
            if stray:
                problems.append(f"Keys {sorted(stray)} belong inside 'methods' entries.")
            method_docs = doc["methods"]
            if not isinstance(method_docs, list) or not method_docs:
                problems.append("'methods' must be a non-empty list.")
                method_docs = []
        else:
            method_docs = [{k: doc[k] for k in METHOD_KEYS[1:] if k in doc}]

        methods = list()
        for i, method_doc in enumerate(method_docs):
            if not isinstance(method_doc, dict):
                problems.append(f"method {i}: must be a JSON object.")
                continue
            method, method_problems = _parse_method(method_doc, instance, i)
            problems += method_problems
            if method is not None:
                methods.append(method)
        names = [m.name for m in methods]
        duplicated = sorted({n for n in names if names.count(n) > 1})
        if duplicated:
            problems.append(f"Duplicated method names: {duplicated}.")

        if instance is not None and isinstance(T, int) and T >= 0:
            for method in methods:
                try:
                    build_schedule(method.schedule, instance, method.compressor, method.sampling, T)
                except ConfigurationError as e:
                    problems += [f"method '{method.name}': {p}" for p in e.problems]
                except DCSGDError as e:
                    problems.append(f"method '{method.name}': invalid schedule: {e}")

        if problems:
            raise ConfigurationError(problems)
        return cls(
            problem=dict(doc["problem"]),
            methods=methods,
            T=T,
            seeds=list(seeds),
            output_dir=Path(doc.get("output_dir", DEFAULT_OUTPUT_DIR)),
            name=str(doc.get("name", "experiment")),
            target_gap=float(target_gap),
            n_checkpoints=n_checkpoints,
            trials=trials,
            n_grid=list(n_grid),
            certify_dim=certify_dim,
        )

    @classmethod
    def from_json(cls, path: Path) -> "ExperimentConfig":
        try:
            with open(path) as handle:
                doc = json.load(handle)
        except OSError as e:
            raise OSError(f"Could not read configuration '{path}': {e}") from e
        except json.JSONDecodeError as e:
            raise ConfigurationError([f"'{path}' is not valid JSON: {e}"])
        return cls.from_dict(doc)

    def to_dict(self) -> Dict[str, Any]:
        """Fully resolved document: every default explicit."""
        return {
            "name": self.name,
            "problem": dict(self.problem),
            "methods": [m.to_dict() for m in self.methods],
            "T": self.T,
            "seeds": list(self.seeds),
            "output_dir": str(self.output_dir),
            "target_gap": self.target_gap,
            "n_checkpoints": self.n_checkpoints,
            "trials": self.trials,
            "n_grid": list(self.n_grid),
            "certify_dim": self.certify_dim,
        }

    def to_json(self, path: Path) -> Path:
        path = Path(path)
        try:
            with open(path, "w") as handle:
                json.dump(self.to_dict(), handle, indent=2)
        except OSError as e:
            raise OSError(f"Could not write configuration '{path}': {e}") from e
        return path
