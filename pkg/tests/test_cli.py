import json
import os

import pytest

from fraisse_forge import cli
from fraisse_forge.cli import CAP_EXHAUSTED, OK, PARSE_ERROR, VERIFY_FAILED, main


def manifest(d):
    return json.loads((d / "manifest.json").read_text())


def test_check_age_writes_verified_certificates(tmp_path, capsys):
    rc = main(["check-age", "--spec", "graphs", "--k", "2", "--properties", "hp,jep,ap", "--out", str(tmp_path)])
    assert rc == OK
    assert sorted(p.name for p in tmp_path.glob("*.cert.json")) == ["ap.cert.json", "hp.cert.json", "jep.cert.json"]
    m = manifest(tmp_path)
    assert m["partial"] is False and all(v["verified"] for v in m["verdicts"].values())
    assert "verified" in capsys.readouterr().out
    assert main(["verify", *map(str, tmp_path.glob("*.cert.json"))]) == OK


def test_check_age_from_spec_file(tmp_path):
    spec = tmp_path / "cat.json"
    k2 = {"signature": [{"name": "E", "arity": 2}], "size": 2, "relations": {"E": [[0, 1], [1, 0]]}}
    spec.write_text(json.dumps({"signature": [{"name": "E", "arity": 2}], "mode": {"catalogue": [k2]}, "flags": {}}))
    rc = main(["check-age", "--spec", str(spec), "--k", "2", "--properties", "hp", "--out", str(tmp_path / "o")])
    assert rc == OK
    assert manifest(tmp_path / "o")["verdicts"]["hp"]["verdict"] == "fails"


def test_unknown_property_is_usage_error(tmp_path):
    assert main(["check-age", "--spec", "graphs", "--properties", "nope"]) == PARSE_ERROR


def test_unknown_cap_is_usage_error():
    assert main(["check-age", "--spec", "graphs", "--k", "2", "--caps", "bogus=3"]) == PARSE_ERROR


def test_nonpositive_k_is_usage_error():
    assert main(["build-limit", "--spec", "graphs", "--k", "0"]) == PARSE_ERROR


def test_build_limit_converges_on_graphs(tmp_path):
    assert main(["build-limit", "--spec", "graphs", "--k", "2", "--out", str(tmp_path)]) == OK
    m = manifest(tmp_path)
    assert m["exhausted"] is False and m["final_size"] == 8
    assert (tmp_path / "extension.cert.json").exists()
    stage = json.loads((tmp_path / "stage_000.json").read_text())
    assert stage["index"] == 0 and stage["link"] is None


def test_build_limit_exhaustion_is_partial(tmp_path):
    rc = main(["build-limit", "--spec", "chains", "--k", "2", "--budget", "5", "--out", str(tmp_path)])
    assert rc == CAP_EXHAUSTED
    m = manifest(tmp_path)
    assert m["partial"] is True and m["exhausted"] is True and m["open_tasks"] > 0
    assert not list(tmp_path.glob("*.cert.json"))
    assert len(list(tmp_path.glob("stage_*.json"))) == m["stages"]


def test_build_universal_hom_k3(tmp_path):
    rc = main(["build-universal-hom", "--spec", "graphs", "--target", "K3", "--k", "2", "--budget", "40", "--out", str(tmp_path)])
    assert rc == OK
    m = manifest(tmp_path)
    assert m["verdicts"]["universality"]["verdict"] == "holds_up_to_bound"
    assert "section" in m["verdicts"]


def test_build_universal_hom_needs_target():
    assert main(["build-universal-hom", "--spec", "graphs"]) == PARSE_ERROR


def test_build_universal_hom_rejects_signature_mismatch():
    assert main(["build-universal-hom", "--spec", "graphs", "--target", "chain3"]) == PARSE_ERROR


def test_verify_rejects_deleted_witness_edge(tmp_path, capsys):
    main(["build-limit", "--spec", "graphs", "--k", "2", "--out", str(tmp_path)])
    path = tmp_path / "extension.cert.json"
    obj = json.loads(path.read_text())
    for w in obj["witnesses"]:
        rels = w["ext"]["$morphism"]["target"]["relations"]["E"]
        if rels:
            rels.pop(0)
            break
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(obj))
    capsys.readouterr()
    assert main(["verify", str(bad)]) == VERIFY_FAILED
    out = capsys.readouterr().out
    assert "REJECTED" in out and "witness:" in out


def test_verify_malformed_json_reports_position(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"kind": "age",\n')
    assert main(["verify", str(bad)]) == PARSE_ERROR
    assert "line" in capsys.readouterr().out


def test_verify_missing_file(tmp_path):
    assert main(["verify", str(tmp_path / "absent.json")]) == PARSE_ERROR


def test_bracket_closure_binary(tmp_path, capsys):
    assert main(["bracket-closure", "--q", "2", "--k", "3", "--out", str(tmp_path)]) == OK
    assert "depth 3; level sizes [3, 38, 232, 256]" in capsys.readouterr().out


def test_bracket_closure_projections_stall(tmp_path, capsys):
    gens = tmp_path / "gens.json"
    gens.write_text(json.dumps([{"q": 2, "arity": 2, "table": [0, 0, 1, 1]}]))
    assert main(["bracket-closure", "--q", "2", "--k", "2", "--generators", str(gens)]) == OK
    assert "depth None" in capsys.readouterr().out


def test_clone_decompose(tmp_path):
    assert main(["clone-decompose", "--count", "3", "--pool", "6", "--out", str(tmp_path)]) == OK
    assert manifest(tmp_path)["verdicts"]["decomposition"]["verified"]


def test_failed_rename_leaves_no_artifact(tmp_path, monkeypatch):
    def boom(src, dst):
        raise OSError("disk full")

    monkeypatch.setattr(cli.os, "replace", boom)
    with pytest.raises(OSError):
        main(["check-age", "--spec", "graphs", "--k", "2", "--properties", "hp", "--out", str(tmp_path)])
    assert os.listdir(tmp_path) == []


def test_module_entry_point():
    import subprocess
    import sys

    r = subprocess.run([sys.executable, "-m", "fraisse_forge", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.strip()
