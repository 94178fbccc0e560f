"""
Command-line surface: problem files, the four commands, reports, CSV output and exit codes.
"""

import argparse
import csv
import json
import os

import numpy as np
import pytest

from cli.cli_core import parse_n_list, run
from cli.cli_problem import load_problem, parse_problem, parse_state_arg, serialize_problem
from core.errors import ProblemParseError
from quantum.instrument import derived_observable
from quantum.linalg import max_norm
from quantum.povm import canonicalize
from quantum.preorder import equivalent

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")


def fixture(name: str) -> str:
    return os.path.join(FIXTURES, name)


def _run(tmp_path, *argv):
    out = tmp_path / "report.json"
    code = run(["--no-run-log", "--out", str(out), *argv])
    return code, json.loads(out.read_text(encoding="utf-8"))


def _write(tmp_path, name: str, doc) -> str:
    path = tmp_path / name
    path.write_text(doc if isinstance(doc, str) else json.dumps(doc), encoding="utf-8")
    return str(path)


def _read_csv(path):
    with open(path, newline="", encoding="utf-8") as f:
        return list(csv.reader(f))


# ===== PROBLEM FILES =====

class TestProblemFiles:

    def test_effect_problem(self):
        p = load_problem(fixture("luders_37.json"))
        assert p.kind == "effect"
        np.testing.assert_allclose(p.effect, np.diag([0.3, 0.7]))
        assert p.psi is not None and p.state.dim == 2
        assert p.as_povm().labels == (0, 1)
        assert p.as_instrument().labels == (0, 1)

    def test_builders(self):
        assert load_problem(fixture("ladder_3.json")).instrument.dim == 3
        mix = load_problem(fixture("mixture_sharp.json"))
        assert mix.instrument.labels == ("up", "down")
        assert mix.tolerance_overrides == {"feas_tol": 1e-8}
        # repeatable part contributes one Kraus operator; a pure prepared state two, a mixed one four
        assert len(mix.instrument.kraus_of("up")) == 1 + 2
        assert len(mix.instrument.kraus_of("down")) == 1 + 4

    def test_spectral_povm(self):
        p = load_problem(fixture("spectral_37.json"))
        assert sorted(p.povm.labels) == pytest.approx([0.3, 0.7])

    def test_instrument_as_povm(self):
        p = load_problem(fixture("explicit_kraus.json"))
        A = p.as_povm()
        assert max_norm(A.effect(1) - derived_observable(p.instrument).effect(1)) == 0.0

    def test_povm_is_not_an_instrument(self):
        with pytest.raises(ProblemParseError):
            load_problem(fixture("binary_37.json")).as_instrument()

    @pytest.mark.parametrize(
        "name",
        ["luders_37.json", "ladder_3.json", "binary_37.json", "spectral_37.json", "mixture_sharp.json", "explicit_kraus.json"],
    )
    def test_serialize_is_canonical(self, name):
        first = serialize_problem(load_problem(fixture(name)))
        again = serialize_problem(parse_problem(json.loads(json.dumps(first))))
        assert again == first
        assert first["version"] == 1

    @pytest.mark.parametrize(
        "doc, position",
        [
            ({"version": 2, "effect": [[1]]}, "/version"),
            ({"version": 1}, "/"),
            ({"version": 1, "effect": [[1]], "povm": {}}, "/"),
            ({"version": 1, "instrument": {"builder": "teleport"}}, "/instrument/builder"),
            ({"version": 1, "instrument": {"builder": "ladder", "d": "3"}}, "/instrument/d"),
            ({"version": 1, "instrument": {"builder": "ladder", "d": 1}}, "/instrument"),
            (
                {"version": 1, "instrument": {"labels": [0, 1], "kraus": [[[[1, 0], [0, 0]]], [[[0, 0], [0, "x"]]]]}},
                "/instrument/kraus/1/0/1/1",
            ),
            (
                {"version": 1, "instrument": {"labels": [0, 1], "kraus": [[[[1, 0], [0, 0]]], [[[0, 0], [0, 0.5]]]]}},
                "/instrument",
            ),
            ({"version": 1, "effect": [[1.5, 0], [0, 0]]}, "/effect"),
            ({"version": 1, "effect": [[float("nan"), 0], [0, 0.7]]}, "/effect/0/0"),
            ({"version": 1, "effect": [[1, [0, float("inf")]], [0, 0]]}, "/effect/0/1"),
            ({"version": 1, "effect": [[1, 0], [0, 0]], "state": {"vector": [float("-inf"), 0]}}, "/state/vector/0"),
            ({"version": 1, "effect": [[1, 0], [0, 0]], "state": {"vector": [1, 1]}}, "/state"),
            ({"version": 1, "effect": [[1, 0], [0]]}, "/effect/1"),
            ({"version": 1, "effect": [[1]], "tolerances": {"feas_tol": -1}}, "/tolerances"),
            (
                {
                    "version": 1,
                    "instrument": {
                        "builder": "preparative",
                        "povm": {"labels": [0], "effects": [[[1]]]},
                        "states": [{"label": 5, "state": {"vector": [1]}}],
                    },
                },
                "/instrument",
            ),
        ],
    )
    def test_parse_errors_are_positioned(self, doc, position):
        with pytest.raises(ProblemParseError) as exc:
            parse_problem(doc, "p.json")
        assert exc.value.position == position
        assert exc.value.path == "p.json"

    @pytest.mark.parametrize("name", sorted(os.listdir(FIXTURES)))
    def test_canonical_form_equivalent(self, name):
        P = load_problem(fixture(name)).as_povm()
        assert len(P) <= 8
        assert equivalent(P, canonicalize(P)).equivalent

    def test_json_syntax_error(self, tmp_path):
        path = _write(tmp_path, "broken.json", '{"version": 1,\n "effect": [[1]')
        with pytest.raises(ProblemParseError) as exc:
            load_problem(path)
        assert exc.value.position.startswith("2:")

    def test_missing_file(self, tmp_path):
        with pytest.raises(ProblemParseError) as exc:
            load_problem(str(tmp_path / "nope.json"))
        assert "cannot read file" in exc.value.detail

    def test_state_arg(self):
        psi = parse_state_arg("[0, [0, 1]]")
        np.testing.assert_allclose(psi.amplitudes, [0, 1j])
        with pytest.raises(ProblemParseError):
            parse_state_arg("[1, 1]")
        with pytest.raises(ProblemParseError):
            parse_state_arg("[1, 0]", dim=3)
        with pytest.raises(ProblemParseError):
            parse_state_arg("[1, 0")


class TestNList:

    @pytest.mark.parametrize(
        "text, expected",
        [("1-6", [1, 2, 3, 4, 5, 6]), ("1,2,4", [1, 2, 4]), ("1-3,8", [1, 2, 3, 8]), (" 5 ", [5])],
    )
    def test_parse(self, text, expected):
        assert parse_n_list(text) == expected

    @pytest.mark.parametrize("text", ["0", "a", "", "2-x"])
    def test_rejects(self, text):
        with pytest.raises(argparse.ArgumentTypeError):
            parse_n_list(text)


# ===== COMMANDS =====

class TestSaturationCommand:

    def test_ladder_finite(self, tmp_path):
        code, report = _run(tmp_path, "saturation", fixture("ladder_3.json"))
        assert code == 0
        assert report["result"]["verdict"] == "Finite"
        assert report["result"]["n"] == 2
        assert report["command"]["name"] == "saturation"
        assert report["config"]["n_max"] == 8
        assert "luders_class" not in report["result"]

    def test_ladder_builder_d4(self, tmp_path):
        doc = {"version": 1, "instrument": {"builder": "ladder", "d": 4}}
        code, report = _run(tmp_path, "saturation", _write(tmp_path, "ladder4.json", doc))
        assert code == 0
        assert report["result"]["verdict"] == "Finite"
        assert report["result"]["n"] == 3

    def test_luders_projection(self, tmp_path):
        code, report = _run(tmp_path, "saturation", fixture("luders_projection.json"))
        assert code == 0
        assert report["result"]["n"] == 1
        assert report["result"]["luders_class"] == 1

    def test_unsharp_exceeds_cap(self, tmp_path):
        code, report = _run(tmp_path, "saturation", fixture("luders_37.json"), "--n-max", "2")
        assert code == 2
        assert report["result"]["verdict"] == "ExceededCap"
        assert report["result"]["n"] == 2
        assert report["result"]["luders_class"] == "inf"
        assert all(not level["holds"] for level in report["result"]["chain"])

    def test_mixture_saturates_at_one(self, tmp_path):
        code, report = _run(tmp_path, "saturation", fixture("mixture_sharp.json"), "--n-max", "3")
        assert code == 0
        assert report["result"]["n"] == 1
        assert report["config"]["tolerances"]["feas_tol"] == 1e-8

    def test_parse_error_exit(self, tmp_path, capsys):
        bad = _write(tmp_path, "bad.json", {"version": 7, "effect": [[1]]})
        code, report = _run(tmp_path, "saturation", bad)
        assert code == 1
        assert report["error"]["type"] == "ProblemParseError"
        assert report["error"]["position"] == "/version"
        assert "satrep: error: ProblemParseError" in capsys.readouterr().err

    def test_non_finite_entry_is_reported(self, tmp_path):
        bad = _write(tmp_path, "nan.json", '{"version": 1, "effect": [[NaN, 0], [0, 0.7]]}')
        code, report = _run(tmp_path, "saturation", bad)
        assert code == 1
        assert report["error"]["type"] == "ProblemParseError"
        assert report["error"]["position"] == "/effect/0/0"

    def test_cap_error_is_exit_one(self, tmp_path):
        doc = {"version": 1, "instrument": {"builder": "ladder", "d": 3}, "tolerances": {"enumeration_cap": 4}}
        code, report = _run(tmp_path, "saturation", _write(tmp_path, "capped.json", doc))
        assert code == 1
        assert report["error"]["type"] == "CapExceededError"

    def test_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            run(["--no-run-log", "saturation"])
        assert exc.value.code == 1


class TestPreorderCommand:

    def test_binary_below_spectral(self, tmp_path):
        code, report = _run(tmp_path, "preorder", fixture("binary_37.json"), fixture("spectral_37.json"))
        assert code == 0
        cert = report["result"]["a_preceq_b"]
        assert cert["verdict"] == "Holds"
        assert cert["residual"] <= 1e-7
        assert cert["kernel"]["target_labels"] == [0, 1]
        assert "b_preceq_a" not in report["result"]

    def test_both_directions(self, tmp_path):
        code, report = _run(tmp_path, "preorder", fixture("spectral_37.json"), fixture("binary_37.json"), "--both")
        assert code == 0
        result = report["result"]
        assert result["a_preceq_b"]["verdict"] == "Fails"
        assert result["b_preceq_a"]["verdict"] == "Holds"
        assert result["equivalent"] is False

    def test_identity_kernel(self, tmp_path):
        code, report = _run(tmp_path, "preorder", fixture("binary_37.json"), fixture("binary_37.json"), "--both")
        assert code == 0
        assert report["result"]["equivalent"] is True
        np.testing.assert_allclose(report["result"]["a_preceq_b"]["kernel"]["matrix"], np.eye(2), atol=1e-9)

    def test_effect_problem_is_binary_observable(self, tmp_path):
        code, report = _run(tmp_path, "preorder", fixture("luders_37.json"), fixture("binary_37.json"), "--both")
        assert code == 0
        assert report["result"]["equivalent"] is True

    def test_dim_mismatch(self, tmp_path):
        code, report = _run(tmp_path, "preorder", fixture("ladder_3.json"), fixture("binary_37.json"))
        assert code == 1
        assert report["error"]["type"] == "DimMismatchError"


class TestSimulateCommand:

    def test_eigenstate_histogram_and_csv(self, tmp_path):
        csv_path = tmp_path / "freq.csv"
        code, report = _run(
            tmp_path, "simulate", fixture("luders_37.json"),
            "--psi", "[0, 1]", "--seed", "17", "--n-steps", "200", "--n-traj", "2000", "--csv", str(csv_path),
        )
        assert code == 0
        result = report["result"]
        lo, hi = result["mode_bin"]
        assert lo - 1e-9 <= 0.7 <= hi + 1e-9
        assert result["mean_frequency"] == pytest.approx(0.7, abs=0.01)
        assert sum(result["histogram"]["masses"]) == pytest.approx(1.0)
        masses = dict((round(lam, 6), m) for lam, m in result["spectral_masses"])
        assert masses[0.7] == pytest.approx(1.0, abs=0.01)
        assert report["config"]["seed"] == 17

        rows = _read_csv(csv_path)
        assert rows[0] == ["trajectory", "frequency"]
        assert len(rows) == 2001
        assert 0.0 <= float(rows[1][1]) <= 1.0

    def test_problem_state_used(self, tmp_path):
        code, report = _run(tmp_path, "simulate", fixture("ladder_3.json"), "--seed", "0", "--n-steps", "4", "--n-traj", "3")
        assert code == 0
        assert report["result"]["mean_frequency"] == pytest.approx(0.5)

    def test_no_trajectories(self, tmp_path):
        csv_path = tmp_path / "empty.csv"
        code, report = _run(
            tmp_path, "simulate", fixture("luders_37.json"), "--seed", "1", "--n-traj", "0", "--csv", str(csv_path)
        )
        assert code == 0
        assert report["result"]["mode_bin"] is None
        assert _read_csv(csv_path) == [["trajectory", "frequency"]]

    def test_non_binary_counts(self, tmp_path):
        code, report = _run(tmp_path, "simulate", fixture("mixture_sharp.json"), "--psi", "[1, 0]", "--seed", "3",
                            "--n-steps", "5", "--n-traj", "10")
        assert code == 0
        counts = dict((lab, c) for lab, c in report["result"]["outcome_counts"])
        assert counts["up"] + counts["down"] == 50
        assert "histogram" not in report["result"]

    def test_needs_state(self, tmp_path):
        code, report = _run(tmp_path, "simulate", fixture("explicit_kraus.json"), "--seed", "1")
        assert code == 1
        assert report["error"]["position"] == "/state"

    def test_reproducible(self, tmp_path):
        argv = ("simulate", fixture("luders_37.json"), "--seed", "42", "--n-steps", "50", "--n-traj", "100")
        _, first = _run(tmp_path, *argv)
        _, second = _run(tmp_path, *argv)
        assert first["result"] == second["result"]


class TestHellingerCommand:

    def test_luders_table(self, tmp_path):
        csv_path = tmp_path / "h2.csv"
        code, report = _run(
            tmp_path, "hellinger", fixture("luders_37.json"),
            "--psi1", "[1, 0]", "--psi2", "[0, 1]", "--n-list", "1-4", "--csv", str(csv_path),
        )
        assert code == 0
        result = report["result"]
        assert result["eigenvalues"] == pytest.approx([0.3, 0.7])
        by_n = {row["n"]: row for row in result["rows"]}
        assert abs(by_n[2]["h2_enumerated"] - 0.16) <= 1e-9
        assert abs(by_n[2]["h2_closed_form"] - 0.16) <= 1e-12
        assert by_n[1]["h2_enumerated"] == pytest.approx(0.0834849, abs=1e-6)
        assert result["strictly_increasing"] and result["all_below_one"]

        rows = _read_csv(csv_path)
        assert rows[0] == ["n", "h2_enumerated", "h2_closed_form"]
        assert [int(r[0]) for r in rows[1:]] == [1, 2, 3, 4]

    def test_no_closed_form_off_eigenbasis(self, tmp_path):
        code, report = _run(
            tmp_path, "hellinger", fixture("luders_37.json"),
            "--psi1", "[1, 0]", "--psi2", "[0.6, 0.8]", "--n-list", "1,2",
        )
        assert code == 0
        assert report["result"]["eigenvalues"] is None
        assert all(row["h2_closed_form"] is None for row in report["result"]["rows"])

    def test_bad_state_dimension(self, tmp_path):
        code, report = _run(tmp_path, "hellinger", fixture("ladder_3.json"), "--psi1", "[1, 0]", "--psi2", "[0, 1]")
        assert code == 1
        assert report["error"]["type"] == "ProblemParseError"


class TestToleranceFile:

    def test_merge(self, tmp_path):
        tol = _write(tmp_path, "tol.json", {"feas_tol": 1e-6, "enumeration_cap": 64})
        code, report = _run(tmp_path, "--tol-file", tol, "saturation", fixture("ladder_3.json"))
        assert code == 0
        assert report["config"]["tolerances"]["feas_tol"] == 1e-6
        assert report["config"]["tolerances"]["enumeration_cap"] == 64

    def test_problem_overrides_win(self, tmp_path):
        tol = _write(tmp_path, "tol.json", {"feas_tol": 1e-6})
        _, report = _run(tmp_path, "--tol-file", tol, "saturation", fixture("mixture_sharp.json"), "--n-max", "2")
        assert report["config"]["tolerances"]["feas_tol"] == 1e-8

    def test_unknown_key(self, tmp_path):
        tol = _write(tmp_path, "tol.json", {"no_such_tol": 1.0})
        code, report = _run(tmp_path, "--tol-file", tol, "saturation", fixture("ladder_3.json"))
        assert code == 1
        assert report["error"]["type"] == "ConfigError"

    def test_not_an_object(self, tmp_path):
        tol = _write(tmp_path, "tol.json", "[1, 2]")
        code, report = _run(tmp_path, "--tol-file", tol, "saturation", fixture("ladder_3.json"))
        assert code == 1
        assert report["error"]["position"] == "/"
