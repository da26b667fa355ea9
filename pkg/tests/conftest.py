import random
from pathlib import Path

import pytest

from statediag.miniproc import parse_program
from statediag.scfg import build_all
from statediag.specs import parse_spec
from statediag.testkit import GenConfig, gen_program, gen_spec_text

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"

SPEC_NEXT = "forall q in changes(y).during(g) : q(y) < 4 and q.next(changes(x).during(g)) < 10"
SPEC_Y = "forall q in changes(y).during(g) : q(y) < 4"


def fixture_text(name):
    return (FIXTURES / name).read_text(encoding="utf-8")


@pytest.fixture(scope="session")
def kmg():
    return parse_program(fixture_text("kmg.mp"))


@pytest.fixture(scope="session")
def kmg_graphs(kmg):
    return build_all(kmg)


@pytest.fixture(scope="session")
def spec_y(kmg):
    return parse_spec(SPEC_Y, kmg)


def corpus(n, start=0, **config):
    """Deterministic generated systems, seeds ``start .. start+n-1``."""
    return [gen_program(GenConfig(seed=s, **config)) for s in range(start, start + n)]


def corpus_with_specs(n, start=0):
    out = []
    seed = start
    while len(out) < n:
        system = gen_program(GenConfig(seed=seed))
        text = gen_spec_text(system, random.Random(seed))
        if text is not None:
            out.append((seed, system, parse_spec(text, system)))
        seed += 1
    return out


def pytest_terminal_summary(terminalreporter):
    from . import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in test_acceptance.RESULTS:
            terminalreporter.write_line(line)
