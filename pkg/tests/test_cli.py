import hashlib
import json
import re

import pytest

from artik import cli
from artik.datagen import Manifest


def tree_digest(root):
    h = hashlib.sha256()
    for p in sorted(root.rglob("*")):
        if p.is_file():
            h.update(str(p.relative_to(root)).encode())
            h.update(p.read_bytes())
    return h.hexdigest()


@pytest.fixture(scope="module")
def generated(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli") / "d"
    code = cli.main(["generate", "--category", "builtin:hinge", "--seed", "7", "--out", str(out), "--profile", "smoke"])
    assert code == 0
    return out


@pytest.fixture(scope="module")
def trained(generated, tmp_path_factory):
    ck = tmp_path_factory.mktemp("ck") / "m.bin"
    code = cli.main(["train", "--manifest", str(generated / "manifest.json"), "--category", "hinge", "--seed", "7",
                     "--out", str(ck), "--profile", "smoke"])
    assert code == 0
    return ck


def test_generate_writes_dataset(generated):
    assert (generated / "manifest.json").exists() and (generated / "normalization.json").exists()
    assert list(generated.glob("train/*.ply")) and list(generated.glob("train/*.asdf"))
    assert list(generated.glob("seen/*.ply")) and list(generated.glob("unseen/*.ply"))
    run = json.loads((generated / "run.json").read_text())
    assert run["command"] == "generate" and run["config"]["seed"] == 7
    assert run["version"].startswith("artik ")


def test_missing_seed_is_usage_error(tmp_path, capsys):
    assert cli.main(["generate", "--category", "builtin:hinge", "--out", str(tmp_path)]) == 1
    err = capsys.readouterr().err
    assert "usage:" in err and "--seed" in err
    assert not (tmp_path / "manifest.json").exists()


def test_unknown_flag_and_command(capsys):
    assert cli.main(["generate", "--bogus"]) == 1
    assert cli.main(["frobnicate"]) == 1
    assert cli.main([]) == 1


def test_missing_file_is_user_error(tmp_path, capsys):
    code = cli.main(["eval", "--checkpoint", str(tmp_path / "nope.bin"), "--manifest", str(tmp_path / "m.json"),
                     "--split", "seen", "--report", str(tmp_path / "r.json")])
    assert code == 1
    assert "checkpoint not found" in capsys.readouterr().err


def test_unknown_category_is_user_error(tmp_path, capsys):
    assert cli.main(["generate", "--category", "builtin:toaster", "--seed", "1", "--out", str(tmp_path)]) == 1


def test_internal_error_exits_two(monkeypatch, tmp_path, capsys):
    def boom(path):
        raise RuntimeError("kaboom")

    monkeypatch.setattr(cli, "inspect_path", boom)
    assert cli.main(["inspect", str(tmp_path)]) == 2
    assert "internal error" in capsys.readouterr().err


def test_inspect_counts_match_files(generated, capsys):
    assert cli.main(["inspect", str(generated / "manifest.json")]) == 0
    out = capsys.readouterr().out
    m = Manifest.load(generated)
    for split, folder in (("train", "train"), ("seen", "seen"), ("unseen", "unseen")):
        on_disk = [p for p in (generated / folder).iterdir() if p.is_file()]
        n_samples = len({p.name.split(".")[0] for p in on_disk if p.suffix == ".ply"})
        line = next(ln for ln in out.splitlines() if ln.strip().startswith(split + ":"))
        got = re.search(r"(\d+) samples .* (\d+)/(\d+) files present", line)
        assert int(got.group(1)) == n_samples == len(m.select(split))
        assert int(got.group(2)) == int(got.group(3)) == len(on_disk)


def test_inspect_other_artifacts(generated, trained, capsys):
    for rel in ("normalization.json", "train/train_000.asdf", "train/train_000.ply"):
        assert cli.main(["inspect", str(generated / rel)]) == 0
    abn = sorted(generated.glob("seen/*_dent.ply"))[0]
    assert cli.main(["inspect", str(abn)]) == 0
    assert cli.main(["inspect", str(trained)]) == 0
    out = capsys.readouterr().out
    assert "sdf tuples: 3000 records" in out
    assert "anomalous points:" in out
    assert "checkpoint:" in out and "epoch 3" in out


def test_train_outputs(trained):
    run = json.loads((trained.parent / "m.bin.run.json").read_text())
    assert run["command"] == "train" and run["config"]["train"]["epochs"] == 3
    lines = trained.with_suffix(".loss.csv").read_text().splitlines()
    assert lines[0] == "epoch,l_sdf,l_latent,l_part,total" and len(lines) == 4


def test_train_category_mismatch(generated, tmp_path):
    assert cli.main(["train", "--manifest", str(generated), "--category", "drawer", "--seed", "1",
                     "--out", str(tmp_path / "x.bin"), "--profile", "smoke"]) == 1


def test_eval_and_heatmap_leave_inputs_untouched(generated, trained, tmp_path, capsys):
    before = tree_digest(generated)
    ck_before = trained.read_bytes()
    report = tmp_path / "rep" / "seen.json"
    assert cli.main(["eval", "--checkpoint", str(trained), "--manifest", str(generated), "--split", "seen",
                     "--report", str(report), "--profile", "smoke"]) == 0
    d = json.loads(report.read_text())
    assert 0.0 <= d["obj_auroc"] <= 1.0 and report.with_suffix(".csv").exists()
    assert json.loads((report.parent / "seen.json.run.json").read_text())["command"] == "eval"
    cloud = sorted(generated.glob("seen/*_bulge.ply"))[0]
    heat = tmp_path / "h.ply"
    assert cli.main(["heatmap", "--checkpoint", str(trained), "--cloud", str(cloud), "--out", str(heat),
                     "--profile", "smoke"]) == 0
    assert heat.exists() and (tmp_path / "h.ply.run.json").exists()
    assert tree_digest(generated) == before and trained.read_bytes() == ck_before


def test_bad_ablation_name(generated, tmp_path):
    assert cli.main(["train", "--manifest", str(generated), "--seed", "1", "--out", str(tmp_path / "x.bin"),
                     "--profile", "smoke", "--ablation", "A9"]) == 1


def test_pipeline_reusing_dataset(generated, tmp_path, capsys):
    out = tmp_path / "run"
    assert cli.main(["pipeline", "--seed", "7", "--out", str(out), "--profile", "smoke",
                     "--manifest", str(generated)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert {"Seen-Pt", "Seen-Obj", "Unseen-Pt", "Unseen-Obj"} <= set(summary)
    assert set(summary) - {"Seen-Pt", "Seen-Obj", "Unseen-Pt", "Unseen-Obj"} == {"meta"}
    printed = json.loads(capsys.readouterr().out)
    assert printed == {k: summary[k] for k in printed}
