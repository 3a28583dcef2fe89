import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from stablecube import cli
from stablecube.errors import InputError, InvariantViolation
from stablecube.export import canonical_json, export
from stablecube.generators import InstanceSpec, generate_instance, perturb, random_tree
from stablecube.geomgraph import MetricGraph, path_graph
from stablecube.hhsmodel import HHSInstance, segmented_path_hhs
from stablecube.suites import (
    SUITES,
    THREADS_ENV,
    SuiteResult,
    corrupt_rho,
    dual_complex_suite,
    fan_out,
    move_contract_suite,
    plateau,
    run_suite,
    stable_tree_suite,
)

from .strategies import seeds


class TestGenerators:
    @pytest.mark.parametrize("family,sizes", [
        ("path", (5,)), ("tree", (20,)), ("graph", (12,)), ("grid", (3, 4)),
        ("trivial", (10,)), ("tree-product", (4, 3)), ("tree-product", (2, 2, 2)), ("segmented", (50,)),
    ])
    def test_every_family_is_deterministic(self, family, sizes):
        spec = InstanceSpec(family, sizes)
        a, b = generate_instance(spec, seed=7), generate_instance(spec, seed=7)
        assert canonical_json(a) == canonical_json(b)

    def test_path_size_counts_edges(self):
        assert generate_instance(InstanceSpec("path", (100,))).n == 101

    def test_square_tree_product(self):
        assert isinstance(generate_instance(InstanceSpec("tree-product", (30, 30))), HHSInstance)

    def test_hhs_families_are_validated(self):
        assert isinstance(generate_instance(InstanceSpec("segmented", (50,))), HHSInstance)

    def test_seed_changes_random_trees(self):
        spec = InstanceSpec("tree", (30,))
        assert canonical_json(generate_instance(spec, 1)) != canonical_json(generate_instance(spec, 2))

    @pytest.mark.parametrize("family,sizes", [("grid", (3,)), ("path", (3, 4)), ("tree-product", (3,)), ("bogus", (3,))])
    def test_bad_specs(self, family, sizes):
        with pytest.raises(InputError):
            generate_instance(InstanceSpec(family, sizes))

    def test_random_tree_is_a_tree(self):
        t = random_tree(50, 3)
        assert t.n == 50 and t.is_tree()

    def test_bounded_degree(self):
        t = random_tree(80, 3, max_degree=3)
        assert max(len(a) for a in t.adj) <= 3


class TestPerturb:
    @given(st.lists(st.integers(0, 40), min_size=1, max_size=6, unique=True), seeds,
           st.sampled_from(["move-one", "move-all", "resample-within-1"]))
    def test_stays_within_one(self, F, seed, mode):
        from stablecube.geomgraph import hausdorff_distance
        g = path_graph(40)
        Fp = perturb(g, F, seed, mode)
        assert hausdorff_distance(g, F, Fp) <= 1
        assert len(Fp) <= len(F)

    def test_move_one_on_two_ends(self):
        g = path_graph(100)
        assert {tuple(perturb(g, [0, 100], s, "move-one")) for s in range(20)} == {(1, 100), (0, 99)}

    def test_deterministic(self):
        g = path_graph(40)
        assert perturb(g, [3, 20], 5, "move-all") == perturb(g, [3, 20], 5, "move-all")

    def test_unknown_mode(self):
        with pytest.raises(InputError):
            perturb(path_graph(4), [1], 0, "teleport")

    def test_empty(self):
        with pytest.raises(InputError):
            perturb(path_graph(4), [], 0)


class TestExport:
    def test_json_is_byte_stable(self):
        g = path_graph(4)
        assert canonical_json({"b": g, "a": {3, 1}}) == canonical_json({"a": {1, 3}, "b": g})

    def test_json_roundtrip_of_an_instance(self):
        h = segmented_path_hhs(40, [(8, 16), (24, 32)])
        again = HHSInstance.from_json(json.loads(canonical_json(h)))
        assert canonical_json(again) == canonical_json(h)

    def test_graph_roundtrip(self):
        g = random_tree(15, 2)
        assert MetricGraph.from_json(json.loads(export(g, "json"))).vertices == g.vertices

    def test_write_to_file(self, tmp_path):
        target = tmp_path / "g.dot"
        text = export(path_graph(2), "dot", target)
        assert target.read_text() == text
        assert text.startswith("graph")

    def test_stable_tree_dot_colours_both_forests(self):
        from stablecube.stabletree import StableTreeParams, build_stable_tree
        T = build_stable_tree(path_graph(100), [0, 100], [30, 34, 70], StableTreeParams(eps=1, eps_prime=1, E=8))
        colours = {line.split('color="')[1][:7] for line in export(T, "dot").splitlines() if "color=" in line}
        assert len(colours) == 2

    def test_unknown_format(self):
        with pytest.raises(InputError):
            export(path_graph(2), "yaml")

    def test_dot_needs_a_renderer(self):
        with pytest.raises(InputError):
            export({"a": 1}, "dot")


class TestSuites:
    def test_plateau(self):
        assert plateau({50: 4, 400: 5})[0]
        assert not plateau({50: 4, 400: 6})[0]
        assert plateau({50: 0, 400: 1}, factor=1, additive=1)[0]

    def test_fan_out_keeps_order(self, monkeypatch):
        monkeypatch.setenv(THREADS_ENV, "4")
        assert fan_out(lambda x: x * x, range(20)) == [x * x for x in range(20)]

    def test_bad_thread_count(self, monkeypatch):
        monkeypatch.setenv(THREADS_ENV, "many")
        with pytest.raises(InputError):
            fan_out(abs, [1])

    def test_threads_do_not_change_results(self, monkeypatch):
        one = dual_complex_suite(instances=12, seed=4).to_json()
        monkeypatch.setenv(THREADS_ENV, "3")
        many = dual_complex_suite(instances=12, seed=4).to_json()
        one.pop("runtime"), many.pop("runtime")
        assert one == many

    def test_small_suites_pass(self):
        for res in (dual_complex_suite(instances=15), move_contract_suite(instances=15),
                    stable_tree_suite(instances=10)):
            assert res.passed, res.checks
            assert res.runtime > 0

    def test_unknown_suite(self):
        with pytest.raises(InputError):
            run_suite("nothing")

    def test_corrupt_rho_changes_one_entry(self):
        h = segmented_path_hhs(60, [(10, 20), (30, 45)])
        bad, key = corrupt_rho(h, 1)
        assert bad.rho[key] != h.rho[key]
        assert all(bad.rho[k] == h.rho[k] for k in h.rho if k != key)

    def test_result_keeps_first_failure(self):
        res = SuiteResult("x")
        res.check("c", True)
        res.check("c", False, "first")
        res.check("c", False, "second")
        assert res.checks["c"] == (False, "first")
        assert not res.passed


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


class TestCLI:
    def test_gen_json(self, capsys):
        code, out, _ = run(capsys, "gen", "--family", "path", "--sizes", "3", "--json")
        assert code == 0
        assert json.loads(out)["instance"]["vertices"] == [0, 1, 2, 3]

    def test_gen_is_deterministic(self, capsys):
        a = run(capsys, "--seed", "5", "gen", "--family", "tree", "--sizes", "25", "--json")[1]
        b = run(capsys, "gen", "--family", "tree", "--sizes", "25", "--json", "--seed", "5")[1]
        assert a == b

    def test_gen_dot(self, capsys):
        code, out, _ = run(capsys, "gen", "--family", "path", "--sizes", "2", "--dot")
        assert code == 0 and out.startswith("graph")

    def test_tree(self, capsys):
        code, out, _ = run(capsys, "tree", "--family", "path", "--sizes", "100", "--points", "[0,100]",
                           "--anchors", "[50]", "--param", "E=8", "--param", "eps=1", "--param", "eps_prime=1", "--json")
        assert code == 0
        assert json.loads(out)["diagnostics"]["is_tree"]

    def test_cubulate(self, capsys):
        code, out, _ = run(capsys, "cubulate", "--sizes", "320", "--points", "[0,320]", "--json")
        assert code == 0
        assert len(json.loads(out)["cubulation"]["Q"]["vertices"]) == 10

    def test_bary(self, capsys):
        code, out, _ = run(capsys, "bary", "--sizes", "320", "--points", "[0,320]", "--json")
        assert code == 0 and json.loads(out)["barycenter"] == 144

    def test_bary_on_a_product(self, capsys):
        code, out, _ = run(capsys, "bary", "--family", "tree-product", "--sizes", "200", "150",
                           "--points", "[[0,0],[200,150]]", "--json")
        assert code == 0 and json.loads(out)["barycenter"] == [80, 48]

    def test_comb(self, capsys):
        code, out, _ = run(capsys, "comb", "--sizes", "20", "--x", "0", "--y", "20",
                           "--param", "M=2", "--param", "eps=1", "--json")
        assert code == 0
        assert json.loads(out)["path"]["steps"] == [0, 3, 5, 7, 9, 13, 15, 17, 20]

    def test_verify_one_suite(self, capsys):
        code, out, _ = run(capsys, "verify", "validator", "--json")
        assert code == 0 and json.loads(out)["passed"]

    @pytest.mark.parametrize("which,extra", [
        ("steiner", ["--points", "[0,5,9]"]), ("orientations", []), ("cube-moves", []), ("delta", []),
        ("hull", ["--family", "trivial", "--sizes", "30", "--points", "[0,30]"]),
    ])
    def test_oracles_agree_with_the_engine(self, capsys, which, extra):
        code, out, _ = run(capsys, "oracle", which, "--compare", "--json", *extra)
        assert code == 0, out
        assert json.loads(out)["agree"]

    @pytest.mark.parametrize("argv", [
        ["tree", "--points", "[0,999]"],
        ["tree", "--points", "not json"],
        ["tree", "--points", "[0,3]", "--param", "bogus=1"],
        ["tree", "--points", "[0,3]", "--param", "novalue"],
        ["gen", "--family", "nosuch"],
        ["verify", "nosuch"],
        ["comb", "--x", "0", "--y", "20", "--dot"],
    ])
    def test_input_errors_exit_two(self, capsys, argv):
        code, _, err = run(capsys, *argv)
        assert code == 2
        assert err.startswith("stablecube: error:")

    def test_argparse_errors_exit_two(self, capsys):
        with pytest.raises(SystemExit) as exc:
            cli.main(["oracle", "nonsense"])
        assert exc.value.code == 2

    def test_failed_suite_exits_one(self, capsys, monkeypatch):
        def failing(seed=0):
            res = SuiteResult("failing")
            res.check("always", False, "by construction")
            return res

        monkeypatch.setitem(SUITES, "failing", failing)
        code, out, _ = run(capsys, "verify", "failing", "--json")
        assert code == 1
        assert not json.loads(out)["passed"]

    def test_invariant_violation_exits_one(self, capsys, monkeypatch):
        def broken(args, params):
            raise InvariantViolation("planted", None)

        monkeypatch.setitem(cli.COMMANDS, "gen", broken)
        code, _, err = run(capsys, "gen")
        assert code == 1 and "check failed" in err
