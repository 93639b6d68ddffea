import collections
import itertools
import json

import pytest
from scipy.stats import chisquare

from nctorus import verify
from nctorus.invariant import degree_vector
from nctorus.torus import SkewMatrix
from nctorus.verify import SUITES, SuiteConfig, coverage, gen_chain, run_suite


@pytest.fixture(scope="module")
def reports():
    cfg = SuiteConfig()
    return {name: run_suite(name, cfg) for name in SUITES}


@pytest.mark.parametrize("name", SUITES)
def test_suite_passes(reports, name):
    rep = reports[name]
    assert rep.passed, rep.table()
    assert all(c.samples > 0 for c in rep.checks)


def test_complex_suite_headline():
    rep = run_suite("complex", SuiteConfig(samples=100))
    assert rep.passed, rep.table()
    for c in rep.checks:
        assert c.tolerance <= 1e-5


def test_three_torus_suites():
    cfg = SuiteConfig(n=3, samples=6, degree_max=3, support=2)
    for name in ("complex", "operators", "invariant", "transport"):
        rep = run_suite(name, cfg)
        assert rep.passed, rep.table()


def test_headline_checks_present(reports):
    assert reports["operators"].check("Cartan homotopy formula").passed
    assert reports["operators"].check("two-derivation formula").passed
    assert reports["invariant"].check("invariant chain equivalence").passed
    assert reports["pairing"].check("winding pairing is t-independent").residual <= 1e-5
    assert reports["chern"].check("trace pairing is affine in t").passed
    with pytest.raises(KeyError):
        reports["ode"].check("no such identity")


def test_determinism(monkeypatch):
    cfg = SuiteConfig(samples=8, seed=3)
    monkeypatch.setenv("NCT_THREADS", "1")
    serial = {name: [c.residual for c in run_suite(name, cfg).checks] for name in SUITES}
    monkeypatch.setenv("NCT_THREADS", "8")
    threaded = {name: [c.residual for c in run_suite(name, cfg).checks] for name in SUITES}
    again = {name: [c.residual for c in run_suite(name, cfg).checks] for name in SUITES}
    assert serial == threaded == again


def test_seed_changes_samples():
    a = run_suite("complex", SuiteConfig(samples=5, seed=0))
    b = run_suite("complex", SuiteConfig(samples=5, seed=1))
    assert [c.residual for c in a.checks] != [c.residual for c in b.checks]


def test_coverage_unique():
    owner = coverage()
    assert set(owner.values()) == set(SUITES)
    total = sum(len(verify.suite_checks(s)) for s in SUITES)
    assert len(owner) == total


def test_unknown_suite():
    with pytest.raises(KeyError):
        run_suite("nope")
    with pytest.raises(KeyError):
        verify.suite_checks("nope")


def test_tolerance_override():
    cfg = SuiteConfig(samples=4, tolerances={"associativity": -1.0})
    rep = run_suite("complex", cfg)
    assert not rep.passed
    assert not rep.check("associativity").passed
    assert rep.check("unit").passed


def test_report_outputs(reports):
    rep = reports["ode"]
    data = json.loads(verify.report_json(rep))
    assert data["suite"] == "ode" and data["passed"] is True
    assert [c["name"] for c in data["checks"]] == [c.name for c in rep.checks]
    table = rep.table()
    assert table.splitlines()[0].startswith("suite ode: PASS")
    assert len(table.splitlines()) == len(rep.checks) + 2


class TestConfig:
    def test_json_round_trip(self):
        cfg = SuiteConfig(n=3, samples=7, seed=11, t=0.25, tolerances={"unit": 1e-3})
        back = SuiteConfig.from_json(json.loads(json.dumps(cfg.to_json())))
        assert back == cfg

    def test_default_theta(self):
        assert SuiteConfig().theta == SkewMatrix.two(verify.GOLDEN)
        th = verify.default_theta(4)
        assert all(-0.5 <= v < 0.5 and v != 0 for _, _, v in th.lower_pairs())

    def test_rejections(self):
        with pytest.raises(ValueError):
            SuiteConfig(samples=0)
        with pytest.raises(ValueError):
            SuiteConfig(n=3, theta=SkewMatrix.two(0.1))
        with pytest.raises(ValueError):
            SuiteConfig.from_json({"samples": 3, "bogus": 1})

    def test_worker_count(self, monkeypatch):
        monkeypatch.setenv("NCT_THREADS", "1")
        assert verify.worker_count() == 1
        monkeypatch.setenv("NCT_THREADS", "many")
        with pytest.raises(ValueError):
            verify.worker_count()


class TestGenerators:
    def test_same_seed_same_chain(self):
        assert gen_chain(42, 2, 3) == gen_chain(42, 2, 3)
        assert gen_chain(42, 2, 3) != gen_chain(43, 2, 3)

    def test_support_one(self):
        assert len(gen_chain(5, 3, 4, support=1)) == 1

    def test_interior_nonzero_and_bounded(self):
        for s in range(200):
            c = gen_chain(s, 2, 3, support=3, index_bound=2)
            for key in c.terms:
                assert all(any(a) for a in key[1:])
                assert all(abs(x) <= 2 for a in key for x in a)

    def test_invariant_flag(self):
        for s in range(50):
            c = gen_chain(s, 3, 2, invariant=True)
            assert all(degree_vector(key) == (0, 0, 0) for key in c.terms)

    def test_interior_indices_uniform(self):
        bound = 2
        cells = [a for a in itertools.product(range(-bound, bound + 1), repeat=2) if any(a)]
        counts = collections.Counter()
        for s in range(10_000):
            (key,) = gen_chain(s, 2, 1, support=1, index_bound=bound).terms
            counts[key[1]] += 1
        assert set(counts) <= set(cells)
        observed = [counts[a] for a in cells]
        assert chisquare(observed).pvalue > 1e-4

    def test_bad_bounds(self):
        with pytest.raises(ValueError):
            gen_chain(0, 2, 1, support=0)
        with pytest.raises(ValueError):
            gen_chain(0, 2, -1)
