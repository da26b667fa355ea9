"""Diagnoses: for each falsified binding and each expression of the atoms
that falsify it, the f-slice of the trace restricted to that expression's
instrumentation points, with every event annotated by its multiplicity."""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

from .errors import InvariantViolation
from .instrument import InstrumentationPlan, MultiplicityMultiset
from .monitor import VerdictMap, check, evaluate_binding
from .runtime import FSlice, IotaTrace, filter_trace
from .specs import Specification, evaluate_formula


@dataclass(frozen=True)
class AnnotatedFSlice:
    fslice: FSlice
    entries: tuple  # per run: tuple of (ConcreteState, multiplicity)

    def flat(self) -> list:
        """``(run index, ConcreteState, multiplicity)`` in timestamp order."""
        out = [(c.t, i, c, m) for i, run in enumerate(self.entries) for c, m in run]
        out.sort(key=lambda e: e[0])
        return [(i, c, m) for _, i, c, m in out]


@dataclass
class Diagnosis:
    entries: dict = field(default_factory=dict)  # (Binding, Expression) -> AnnotatedFSlice
    multisets: dict = field(default_factory=dict)  # Expression -> MultiplicityMultiset
    trace: IotaTrace = field(default=None, repr=False)

    def __len__(self):
        return len(self.entries)

    def __getitem__(self, key):
        return self.entries[key]

    def keys(self):
        return self.entries.keys()

    def items(self):
        return self.entries.items()

    def to_json(self) -> str:
        out = []
        ordered = sorted(
            self.entries.items(), key=lambda kv: (kv[0][0].key(self.trace), str(kv[0][1]))
        )
        for (binding, expr), annotated in ordered:
            bound = {}
            for var, (run, pos) in binding.assignment:
                c = self.trace.runs[run][pos]
                bound[var] = _event_json(self.trace.labels[run], c)
            slice_json = [
                {**_event_json(annotated.fslice.labels[i], c), "multiplicity": m}
                for i, c, m in annotated.flat()
            ]
            out.append({"binding": bound, "expression": str(expr), "slice": slice_json})
        return json.dumps(out, indent=2, ensure_ascii=False) + "\n"


def _event_json(proc, c):
    return {
        "proc": proc,
        "line": c.state.line,
        "t": str(c.t),
        "values": {k: c.values[k] for k in sorted(c.values)},
    }


def minimal_repairs(formula, atoms, truth) -> list:
    """Subset-minimal sets of atoms whose joint flip makes ``formula`` true."""
    repairs = []
    for size in range(1, len(atoms) + 1):
        for subset in itertools.combinations(atoms, size):
            chosen = set(subset)
            if any(r <= chosen for r in repairs):
                continue
            if evaluate_formula(formula, lambda a: truth[a] != (a in chosen)):
                repairs.append(frozenset(chosen))
    return repairs


def falsifying_atoms_from_truth(spec: Specification, truth: dict) -> list:
    """Atoms belonging to some minimal repair of a false body, source order.

    For a conjunction this is every false atom; under ``not`` a true atom can
    be the culprit.
    """
    atoms = spec.atoms()
    culprits = set().union(*minimal_repairs(spec.body, atoms, truth))
    return [a for a in atoms if a in culprits]


def get_falsifying_atomic_constraints(trace, binding, spec, verdict=None) -> list:
    verdict = verdict if verdict is not None else evaluate_binding(trace, binding, spec)
    if verdict.value:
        raise InvariantViolation(f"binding {binding.describe(trace)} satisfies the specification")
    truth = {a: v is True for a, v in verdict.atom_values.items()}
    return falsifying_atoms_from_truth(spec, truth)


def annotate(fslice: FSlice, multiset: MultiplicityMultiset) -> AnnotatedFSlice:
    return AnnotatedFSlice(
        fslice, tuple(tuple((c, multiset[c.state]) for c in run.states) for run in fslice.runs)
    )


def compute_map(
    spec: Specification,
    trace: IotaTrace,
    plan: InstrumentationPlan,
    verdicts: VerdictMap = None,
) -> Diagnosis:
    """Build the diagnosis of every falsified binding.

    Slices depend only on the expression, so each is filtered once and
    shared between bindings.
    """
    verdicts = verdicts if verdicts is not None else check(trace, spec)
    slices = {}
    culprit_cache = {}
    diagnosis = Diagnosis(trace=trace)
    for binding in verdicts.falsified():
        verdict = verdicts[binding]
        truth = {a: v is True for a, v in verdict.atom_values.items()}
        signature = tuple(truth[a] for a in spec.atoms())
        if signature not in culprit_cache:
            culprit_cache[signature] = falsifying_atoms_from_truth(spec, truth)
        for atom in culprit_cache[signature]:
            for expr in atom.expressions:
                expr_plan = plan.for_expression(atom, expr)
                if expr not in slices:
                    slices[expr] = annotate(filter_trace(trace, expr_plan.points), expr_plan.multiset)
                    diagnosis.multisets[expr] = expr_plan.multiset
                diagnosis.entries[(binding, expr)] = slices[expr]
    return diagnosis


def diagnosis_statements(diag: Diagnosis, executed_only: bool = False) -> frozenset:
    """Program points a user has to inspect.

    By default this is every point in the diagnosed expressions' supports,
    including statically relevant ones that never ran (an untaken branch);
    ``executed_only`` keeps just the points that appear in some slice.
    """
    points = set()
    for annotated in diag.entries.values():
        for run in annotated.entries:
            points.update(c.state.point for c, _ in run)
    if not executed_only:
        for multiset in diag.multisets.values():
            points.update(s.point for s in multiset.support)
    points.discard(None)
    return frozenset(points)

