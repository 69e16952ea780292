import json

import pytest

from monodual.cli import main
from monodual.qmatrix import dual_qmatrix, ratematrix_to_dict

from conftest import birth_death

MODEL_DOC = {
    "b": "0",
    "nu": {
        "case": "decomposable",
        "a": "1+tanh(x)",
        "da": "4/(e^(x)+e^(-x))^2",
        "base": {
            "density": "e^(-y)",
            "support_sign": "positive",
            "tail": "e^(-a)",
        },
    },
    "growth_c": 3.0,
}

GROWTH_MODEL_DOC = {
    "mu": {
        "case": "decomposable",
        "a": "1",
        "base": {"atoms": [{"y": 1.0, "mass": 1.0}]},
    },
    "growth_c": 1.0,
}

BAD_CHAIN_DOC = {
    "lo": 0, "hi": 2, "boundary": "kill",
    "rates": [
        {"n": 0, "m": 2, "rate": 5.0},
        {"n": 1, "m": 1, "rate": 0.1},
    ],
}


@pytest.fixture
def files(tmp_path):
    def write(name, doc):
        p = tmp_path / name
        p.write_text(json.dumps(doc))
        return str(p)
    return write


@pytest.fixture
def chain_file(files):
    rm = birth_death(0, 12, up=1.0, down=0.5, boundary="absorb")
    return files("chain.json", ratematrix_to_dict(rm))


def run_json(capsys, argv):
    code = main(argv)
    out = capsys.readouterr().out
    return code, json.loads(out)


class TestChecks:
    def test_monotone_ok(self, capsys, chain_file):
        code, doc = run_json(capsys, ["monotone", "--in", chain_file])
        assert code == 0
        assert doc["command"] == "monotone" and doc["ok"] is True
        assert doc["report"]["monotone"] is True

    def test_monotone_violations(self, capsys, files):
        bad = files("bad.json", BAD_CHAIN_DOC)
        code, doc = run_json(capsys, ["monotone", "--in", bad])
        assert code == 1
        assert doc["ok"] is False
        assert doc["report"]["n_violations"] >= 1

    def test_monotone_model_route(self, capsys, files):
        path = files("model.json", MODEL_DOC)
        code, doc = run_json(
            capsys, ["monotone", "--in", path, "--h", "0.5", "--window=-4:4"]
        )
        assert code == 0 and doc["ok"] is True

    def test_validate_chain(self, capsys, chain_file):
        code, doc = run_json(capsys, ["validate", "--in", chain_file])
        assert code == 0
        assert doc["report"]["n_states"] == 13

    def test_validate_model_growth_violation(self, capsys, files):
        doc_in = dict(GROWTH_MODEL_DOC)
        doc_in["mu"] = dict(doc_in["mu"], a="x^2")
        path = files("viol.json", doc_in)
        code, doc = run_json(capsys, ["validate", "--in", path])
        assert code == 1
        assert doc["error"]["type"] == "GrowthViolated"

    def test_duality_check(self, capsys, chain_file):
        code, doc = run_json(capsys, ["duality", "--in", chain_file, "--t", "0.5"])
        assert code == 0
        assert doc["report"]["sup_full"] < 1e-12

    def test_duality_needs_t(self, capsys, chain_file):
        code, doc = run_json(capsys, ["duality", "--in", chain_file])
        assert code == 2

    def test_boundary_halfline(self, capsys, files):
        path = files("hl.json", {
            "G": "x^2", "support": "halfline",
            "asymptotics": {"G_order": 2},
        })
        code, doc = run_json(capsys, ["boundary", "--in", path])
        assert code == 0
        assert doc["report"]["label"] == "inaccessible"

    def test_boundary_line_rejected(self, capsys, files):
        path = files("line.json", {"G": "1"})
        code, doc = run_json(capsys, ["boundary", "--in", path])
        assert code == 2


class TestTransforms:
    def test_dual_is_bare_artifact(self, capsys, chain_file):
        code, doc = run_json(capsys, ["dual", "--in", chain_file])
        assert code == 0
        assert "command" not in doc
        assert set(doc) >= {"lo", "hi", "boundary", "rates"}
        rm = birth_death(0, 12, up=1.0, down=0.5, boundary="absorb")
        assert doc == ratematrix_to_dict(dual_qmatrix(rm))

    def test_dual_output_feeds_back(self, capsys, tmp_path, chain_file):
        out = str(tmp_path / "dual.json")
        assert main(["dual", "--in", chain_file, "--out", out]) == 0
        assert capsys.readouterr().out == ""
        code, doc = run_json(capsys, ["validate", "--in", out])
        assert code == 0

    def test_dual_not_monotone_envelope(self, capsys, files):
        bad = files("bad.json", BAD_CHAIN_DOC)
        code, doc = run_json(capsys, ["dual", "--in", bad])
        assert code == 1
        assert doc["error"]["type"] == "NotMonotone"
        assert doc["error"]["report"]["n_violations"] >= 1

    def test_discretize(self, capsys, files):
        path = files("model.json", MODEL_DOC)
        code, doc = run_json(
            capsys, ["discretize", "--in", path, "--h", "0.5", "--window=-4:4"]
        )
        assert code == 0
        assert doc["lo"] == -4 and doc["hi"] == 4
        assert doc["boundary"] == "absorb"
        assert len(doc["rates"]) > 0

    def test_discretize_needs_lattice_flags(self, capsys, files):
        path = files("model.json", MODEL_DOC)
        code, _doc = run_json(capsys, ["discretize", "--in", path])
        assert code == 2

    def test_discretize_rejects_chain_input(self, capsys, chain_file):
        code, doc = run_json(
            capsys, ["discretize", "--in", chain_file, "--h", "0.5",
                     "--window=0:4"]
        )
        assert code == 2

    def test_bad_window_format(self, capsys, files):
        path = files("model.json", MODEL_DOC)
        code, _doc = run_json(
            capsys, ["discretize", "--in", path, "--h", "0.5", "--window", "4"]
        )
        assert code == 2

    def test_evolve(self, capsys, chain_file):
        code, doc = run_json(capsys, ["evolve", "--in", chain_file, "--t", "0.5"])
        assert code == 0
        assert len(doc["P"]) == 13
        row = doc["P"][5]
        assert abs(sum(row) - 1.0) < 1e-9

    def test_evolve_needs_t(self, capsys, chain_file):
        code, _doc = run_json(capsys, ["evolve", "--in", chain_file])
        assert code == 2

    def test_dualgen_default_grid(self, capsys, files):
        path = files("model.json", MODEL_DOC)
        code, doc = run_json(capsys, ["dualgen", "--in", path])
        assert code == 0
        assert len(doc["x"]) == 33
        assert "nu_tilde" not in doc
        assert doc["case"] == "decomposable"

    def test_dualgen_lattice_grid(self, capsys, files):
        path = files("model.json", MODEL_DOC)
        code, doc = run_json(
            capsys, ["dualgen", "--in", path, "--h", "0.5", "--window=0:4"]
        )
        assert code == 0
        assert len(doc["x"]) == 5
        assert len(doc["y"]) == 8  # magnitudes up to 4 in steps of 0.5
        assert len(doc["nu_tilde"]) == 5

    def test_dualgen_csv(self, capsys, tmp_path, files):
        path = files("model.json", MODEL_DOC)
        out = str(tmp_path / "coeffs.csv")
        assert main(["dualgen", "--in", path, "--out", out]) == 0
        lines = open(out).read().strip().splitlines()
        assert lines[0] == "x,G,drift,correction"
        assert len(lines) == 34


class TestSimulate:
    def test_survival(self, capsys, files, chain_file):
        doc_in = {
            "op": "survival",
            "chain": json.load(open(chain_file)),
            "x0": 6, "y": 8, "t": 1.0, "reps": 2000, "seed": 5,
        }
        path = files("sim.json", doc_in)
        code, doc = run_json(capsys, ["simulate", "--in", path])
        assert code == 0
        assert 0.0 <= doc["report"]["value"] <= 1.0
        assert doc["report"]["seed"] == 5

    def test_flag_overrides_and_determinism(self, tmp_path, files, chain_file):
        doc_in = {
            "op": "survival",
            "chain": json.load(open(chain_file)),
            "x0": 6, "y": 8, "t": 1.0,
        }
        path = files("sim.json", doc_in)
        out1, out2 = str(tmp_path / "a.json"), str(tmp_path / "b.json")
        argv = ["simulate", "--in", path, "--reps", "3000", "--seed", "17"]
        assert main(argv + ["--out", out1]) == 0
        assert main(argv + ["--threads", "8", "--out", out2]) == 0
        assert open(out1, "rb").read() == open(out2, "rb").read()

    def test_duality_op(self, capsys, files, chain_file):
        doc_in = {
            "op": "duality",
            "chain": json.load(open(chain_file)),
            "pairs": [[6, 5], [6, 8]], "t": 0.5, "reps": 2000, "seed": 3,
        }
        path = files("sim.json", doc_in)
        code, doc = run_json(capsys, ["simulate", "--in", path])
        assert code == 0
        assert doc["report"]["max_abs_z"] <= 3.0

    def test_growth_op(self, capsys, files):
        doc_in = {
            "op": "growth",
            "model": GROWTH_MODEL_DOC,
            "lattice": {"h": 1.0, "lo": 0, "hi": 60},
            "x0": 5.0, "t": 1.0, "reps": 3000, "seed": 11,
        }
        path = files("sim.json", doc_in)
        code, doc = run_json(capsys, ["simulate", "--in", path])
        assert code == 0
        assert doc["report"]["ok"] is True
        assert doc["report"]["escape_fraction"] == 0.0

    def test_path_op(self, capsys, files, chain_file):
        doc_in = {
            "op": "path",
            "chain": json.load(open(chain_file)),
            "x0": 6, "t": 2.0, "seed": 1,
        }
        path = files("sim.json", doc_in)
        code, doc = run_json(capsys, ["simulate", "--in", path])
        assert code == 0
        assert doc["report"]["states"][0] == 6

    def test_model_plus_lattice_route(self, capsys, files):
        doc_in = {
            "op": "survival",
            "model": MODEL_DOC,
            "lattice": {"h": 0.5, "lo": -4, "hi": 4},
            "x0": 0, "y": 2, "t": 0.5, "reps": 1000, "seed": 2,
        }
        path = files("sim.json", doc_in)
        code, doc = run_json(capsys, ["simulate", "--in", path])
        assert code == 0

    def test_unknown_op(self, capsys, files):
        path = files("sim.json", {"op": "teleport", "t": 1.0})
        code, _doc = run_json(capsys, ["simulate", "--in", path])
        assert code == 2

    def test_missing_op(self, capsys, files):
        path = files("sim.json", {"t": 1.0})
        code, _doc = run_json(capsys, ["simulate", "--in", path])
        assert code == 2


class TestErrorPaths:
    def test_missing_file(self, capsys, tmp_path):
        code, doc = run_json(
            capsys, ["monotone", "--in", str(tmp_path / "nope.json")]
        )
        assert code == 2
        assert doc["error"]["type"] == "InputFormatError"

    def test_malformed_json(self, capsys, tmp_path):
        p = tmp_path / "broken.json"
        p.write_text("{not json")
        code, doc = run_json(capsys, ["monotone", "--in", str(p)])
        assert code == 2

    def test_internal_error_unresolved_tail(self, capsys, files):
        doc_in = {"nu": {"case": "tabulated", "right_tail": "0-1"}}
        path = files("neg.json", doc_in)
        code, doc = run_json(
            capsys, ["discretize", "--in", path, "--h", "0.5", "--window=0:4"]
        )
        assert code == 3
        assert doc["error"]["type"] == "TailMassUnresolved"

    def test_error_envelope_written_to_out(self, tmp_path, files, capsys):
        bad = files("bad.json", BAD_CHAIN_DOC)
        out = str(tmp_path / "err.json")
        assert main(["dual", "--in", bad, "--out", out]) == 1
        assert capsys.readouterr().out == ""
        doc = json.load(open(out))
        assert doc["error"]["type"] == "NotMonotone"
