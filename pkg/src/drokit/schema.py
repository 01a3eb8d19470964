"""Problem-file ingestion: one self-describing JSON document per problem.

Objects are named and cross-reference each other by name, never by position,
so golden files stay reviewable. Every module-level invariant is revalidated
on load; a failed lookup, a malformed document, or an invariant violation
raises ``InputError`` (CLI exit code 2).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .ambiguity import (
    AmbiguitySet,
    AVaRSet,
    FiniteFamily,
    MomentSet,
    WassersteinBall,
)
from .composite import RectangularSpec
from .dp import MultistageProblem
from .spaces import (
    DiscreteMeasure,
    Filtration,
    FiniteSpace,
    Partition,
    RandomVariable,
    ScenarioTree,
    TreeNode,
    ValidationError,
    tree_filtration,
)
from .transport import MultistageBoundSpec, TreeProcess


class InputError(ValueError):
    """Unusable input document (schema, reference, or invariant failure)."""


@dataclass
class ProblemFile:
    """Parsed and cross-resolved problem document."""

    digest: str
    spaces: dict[str, FiniteSpace] = field(default_factory=dict)
    measures: dict[str, DiscreteMeasure] = field(default_factory=dict)
    random_variables: dict[str, RandomVariable] = field(default_factory=dict)
    partitions: dict[str, Partition] = field(default_factory=dict)
    filtrations: dict[str, Filtration] = field(default_factory=dict)
    trees: dict[str, ScenarioTree] = field(default_factory=dict)
    ambiguity_sets: dict[str, AmbiguitySet] = field(default_factory=dict)
    rectangular_specs: dict[str, RectangularSpec] = field(default_factory=dict)
    problems: dict[str, MultistageProblem] = field(default_factory=dict)
    processes: dict[str, TreeProcess] = field(default_factory=dict)
    bound_specs: dict[str, dict] = field(default_factory=dict)
    measure_space: dict[str, str] = field(default_factory=dict)
    rv_space: dict[str, str] = field(default_factory=dict)

    def lookup(self, table: str, name: str):
        store = getattr(self, table)
        if name not in store:
            raise InputError(f"unknown {table.rstrip('s')} name: {name!r}")
        return store[name]


def _require(obj: dict, key: str, where: str):
    if key not in obj:
        raise InputError(f"{where}: missing field {key!r}")
    return obj[key]


def _as_mapping(doc: dict, key: str) -> dict:
    section = doc.get(key, {})
    if not isinstance(section, dict):
        raise InputError(f"section {key!r} must be an object")
    return section


def load_problem_file(path: str) -> ProblemFile:
    with open(path, "rb") as fh:
        raw = fh.read()
    try:
        doc = json.loads(raw.decode("utf-8"))
    except json.JSONDecodeError as e:
        raise InputError(f"{path}: invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}")
    if not isinstance(doc, dict):
        raise InputError(f"{path}: document root must be an object")
    version = doc.get("version", "1")
    if str(version) != "1":
        raise InputError(f"unsupported problem-file version {version!r}")
    pf = ProblemFile(digest=hashlib.sha256(raw).hexdigest())
    try:
        _load_sections(doc, pf)
    except ValidationError as e:
        raise InputError(f"{path}: {e}") from e
    return pf


def _load_sections(doc: dict, pf: ProblemFile) -> None:
    for name, spec in _as_mapping(doc, "spaces").items():
        where = f"spaces.{name}"
        pf.spaces[name] = FiniteSpace(
            n=int(_require(spec, "n", where)),
            labels=tuple(spec["labels"]) if "labels" in spec else None,
            metric=np.asarray(spec["metric"], dtype=float) if "metric" in spec else None,
        )
    for name, spec in _as_mapping(doc, "measures").items():
        where = f"measures.{name}"
        space_name = _require(spec, "space", where)
        space = pf.lookup("spaces", space_name)
        m = DiscreteMeasure(np.asarray(_require(spec, "weights", where), dtype=float))
        if m.n != space.n:
            raise InputError(f"{where}: weight count differs from the space size")
        pf.measures[name] = m
        pf.measure_space[name] = space_name
    for name, spec in _as_mapping(doc, "random_variables").items():
        where = f"random_variables.{name}"
        space_name = _require(spec, "space", where)
        space = pf.lookup("spaces", space_name)
        rv = RandomVariable(np.asarray(_require(spec, "values", where), dtype=float))
        if rv.n != space.n:
            raise InputError(f"{where}: value count differs from the space size")
        pf.random_variables[name] = rv
        pf.rv_space[name] = space_name
    for name, spec in _as_mapping(doc, "partitions").items():
        where = f"partitions.{name}"
        space = pf.lookup("spaces", _require(spec, "space", where))
        atoms = tuple(tuple(int(i) for i in atom) for atom in _require(spec, "atoms", where))
        pf.partitions[name] = Partition(space.n, atoms)
    for name, spec in _as_mapping(doc, "trees").items():
        pf.trees[name] = _load_tree(name, spec)
    for name, spec in _as_mapping(doc, "filtrations").items():
        where = f"filtrations.{name}"
        if "tree" in spec:
            pf.filtrations[name] = tree_filtration(pf.lookup("trees", spec["tree"]))
            continue
        stages = tuple(
            pf.lookup("partitions", pname) for pname in _require(spec, "stages", where)
        )
        pf.filtrations[name] = Filtration(stages)
    for name, spec in _as_mapping(doc, "ambiguity_sets").items():
        pf.ambiguity_sets[name] = _load_ambiguity(pf, name, spec)
    for name, spec in _as_mapping(doc, "rectangular_specs").items():
        where = f"rectangular_specs.{name}"
        spaces = tuple(pf.lookup("spaces", s) for s in _require(spec, "stage_spaces", where))
        sets = tuple(
            pf.lookup("ambiguity_sets", s) for s in _require(spec, "stage_sets", where)
        )
        pf.rectangular_specs[name] = RectangularSpec(spaces, sets)
    for name, spec in _as_mapping(doc, "problems").items():
        pf.problems[name] = _load_problem(pf, name, spec)
    for name, spec in _as_mapping(doc, "processes").items():
        where = f"processes.{name}"
        spaces = tuple(pf.lookup("spaces", s) for s in _require(spec, "stage_spaces", where))
        kernels = tuple(
            np.asarray(k, dtype=float) for k in _require(spec, "kernels", where)
        )
        pf.processes[name] = TreeProcess(spaces, kernels)
    for name, spec in _as_mapping(doc, "bound_specs").items():
        pf.bound_specs[name] = _check_bound_spec(pf, name, spec)


def _load_tree(name: str, spec: dict) -> ScenarioTree:
    """Either a uniform ``branching`` profile or an explicit ``parents`` list
    (parents given as indices, ``null`` for the root; stages are derived)."""
    where = f"trees.{name}"
    if "branching" in spec:
        return ScenarioTree.from_branching([int(b) for b in spec["branching"]])
    parents = _require(spec, "parents", where)
    labels = spec.get("labels", [""] * len(parents))
    children: dict[int, list[int]] = {i: [] for i in range(len(parents))}
    stages = [0] * len(parents)
    for i, parent in enumerate(parents):
        if parent is None:
            stages[i] = 1
        else:
            p = int(parent)
            if p >= i:
                raise InputError(f"{where}: parents must precede children")
            children[p].append(i)
            stages[i] = stages[p] + 1
    nodes = tuple(
        TreeNode(
            index=i,
            stage=stages[i],
            parent=None if parents[i] is None else int(parents[i]),
            children=tuple(children[i]),
            label=str(labels[i]),
        )
        for i in range(len(parents))
    )
    return ScenarioTree(nodes)


def _load_ambiguity(pf: ProblemFile, name: str, spec: dict) -> AmbiguitySet:
    where = f"ambiguity_sets.{name}"
    kind = _require(spec, "kind", where)
    if kind == "finite_family":
        members = tuple(pf.lookup("measures", m) for m in _require(spec, "measures", where))
        return FiniteFamily(members)
    if kind == "avar":
        return AVaRSet(
            alpha=float(_require(spec, "alpha", where)),
            reference=pf.lookup("measures", _require(spec, "reference", where)),
        )
    if kind == "moment":
        return MomentSet(
            support=pf.lookup("spaces", _require(spec, "support", where)),
            psi=tuple(
                pf.lookup("random_variables", f) for f in _require(spec, "functions", where)
            ),
            targets=tuple(float(t) for t in _require(spec, "targets", where)),
        )
    if kind == "wasserstein":
        return WassersteinBall(
            center=pf.lookup("measures", _require(spec, "center", where)),
            radius=float(_require(spec, "radius", where)),
            space=pf.lookup("spaces", _require(spec, "space", where)),
        )
    raise InputError(f"{where}: unknown ambiguity kind {kind!r}")


def _load_problem(pf: ProblemFile, name: str, spec: dict) -> MultistageProblem:
    where = f"problems.{name}"
    set_names = _require(spec, "stage_sets", where)
    sets = tuple(
        None if s is None else pf.lookup("ambiguity_sets", s) for s in set_names
    )
    costs = tuple(np.asarray(c, dtype=float) for c in _require(spec, "costs", where))
    raw_feas = _require(spec, "feasible", where)
    feasible = [tuple(int(a) for a in raw_feas[0])]
    for stage in raw_feas[1:]:
        feasible.append(
            tuple(
                tuple(tuple(int(a) for a in actions) for actions in per_prev)
                for per_prev in stage
            )
        )
    return MultistageProblem(
        n_actions=tuple(int(a) for a in _require(spec, "n_actions", where)),
        stage_sizes=tuple(int(s) for s in _require(spec, "stage_sizes", where)),
        stage_sets=sets,
        costs=costs,
        feasible=tuple(feasible),
    )


def _check_bound_spec(pf: ProblemFile, name: str, spec: dict) -> dict:
    where = f"bound_specs.{name}"
    kind = _require(spec, "kind", where)
    if kind == "multistage":
        process = pf.lookup("processes", _require(spec, "process", where))
        bound = MultistageBoundSpec(
            eps=tuple(float(e) for e in _require(spec, "eps", where)),
            kappa=tuple(float(k) for k in _require(spec, "kappa", where)),
            weights=tuple(float(w) for w in _require(spec, "weights", where)),
            lipschitz=float(_require(spec, "lipschitz", where)),
        )
        objective = _require(spec, "rv", where)
        if objective not in pf.random_variables:
            raise InputError(f"{where}: unknown random variable {objective!r}")
        return {"kind": kind, "process": process, "bound": bound, "rv": objective}
    if kind == "ball_sweep":
        measure = pf.lookup("measures", _require(spec, "measure", where))
        space = pf.lookup("spaces", _require(spec, "space", where))
        rv = _require(spec, "rv", where)
        if rv not in pf.random_variables:
            raise InputError(f"{where}: unknown random variable {rv!r}")
        grid = tuple(float(e) for e in _require(spec, "eps_grid", where))
        if any(e < 0 for e in grid):
            raise InputError(f"{where}: radii must be nonnegative")
        return {"kind": kind, "measure": measure, "space": space, "rv": rv, "grid": grid}
    raise InputError(f"{where}: unknown bound-spec kind {kind!r}")
