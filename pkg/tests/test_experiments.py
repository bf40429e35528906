import csv
import json

import pytest
import yaml

from vlseg import cli
from vlseg.data.registry import ENDOSCOPY
from vlseg.data.synthetic import write_blob_dataset
from vlseg.experiments import (
    ExperimentPlan,
    Runner,
    RunnerConfig,
    RunSpec,
    collect_results,
    dataset_records,
    non_radiology_plan,
    full_plan,
    pooled_runs,
    radiology_plan,
    report,
    run_plan,
)
from vlseg.experiments.runner import load_handle
from vlseg.models import VARIANTS
from vlseg.prompts import PromptType

FAST = {"max_epochs": 2, "batch_size": 4, "early_stop_patience": 5}


@pytest.fixture(scope="module")
def data_root(tmp_path_factory):
    root = tmp_path_factory.mktemp("data")
    write_blob_dataset(root / "kvasir_seg", counts=(2, 1, 2), seed=1)
    write_blob_dataset(root / "clinicdb", counts=(2, 1, 2), seed=2)
    write_blob_dataset(root / "etis", counts=(0, 0, 2), seed=3)
    return root


def fast_config(data_root, **kw):
    return RunnerConfig(data_root=data_root, train_overrides={**FAST, **kw})


# ------------------------------------------------------------------------ plans


def test_plan_counts():
    non_rad = non_radiology_plan()
    assert len(non_rad) == 200
    assert set(non_rad.count_by("variant").values()) == {50}
    rad = radiology_plan()
    assert set(rad.count_by("variant").values()) == {22}
    pooled = pooled_runs(VARIANTS)
    # all members share P0..P6; the endoscopy members share P0..P9
    assert len(pooled) == len(VARIANTS) * (7 + 10)
    full = full_plan()
    assert full.count_by("kind") == {"individual": 200 + 88 + 200 + 8, "pooled": 28, "endoscopy-pooled": 40}
    assert full.count_by("freeze")["encoders"] == 200
    assert full.count_by("variant")["unet"] == 8


def test_run_spec_ids_and_eval_targets():
    spec = RunSpec("cris", ("Kvasir-SEG",), "P6", freeze="encoders", seed=2)
    assert spec.run_id == "cris_frozen-encoders_kvasir_seg_P6_s2"
    assert spec.ptype is PromptType.P6 and spec.eval_data == ("kvasir_seg",)
    assert RunSpec.from_json(spec.to_json()) == spec
    planned = next(r for r in non_radiology_plan(["clipseg"]) if r.train_data == ("bkai",))
    assert set(planned.eval_data) == set(ENDOSCOPY) and planned.eval_data[0] == "bkai"


@pytest.mark.parametrize(
    "kwargs,match",
    [
        (dict(variant="segformer"), "unknown model"),
        (dict(kind="federated"), "unknown train kind"),
        (dict(variant="unet", freeze="encoders"), "VLSM encoders"),
        (dict(train_data=("kvasir_seg", "bkai")), "exactly one"),
        (dict(train_data=("etis",)), "test-only"),
        (dict(train_data=("kvasir_seg", "isic"), kind="endoscopy-pooled"), "not an endoscopy"),
        (dict(train_data=("busi",), ptype="P8"), "unavailable"),
    ],
)
def test_run_spec_guards(kwargs, match):
    base = dict(variant="clipseg", train_data=("kvasir_seg",), ptype="P1")
    with pytest.raises(ValueError, match=match):
        RunSpec(**{**base, **kwargs})


def test_plan_save_load_and_duplicates(tmp_path):
    plan = radiology_plan(["cris"], seed=1)
    back = ExperimentPlan.load(plan.save(tmp_path / "plan.json"))
    assert [r.run_id for r in back] == [r.run_id for r in plan]
    with pytest.raises(ValueError, match="duplicate"):
        plan.add(plan.runs[0])
    with pytest.raises(ValueError, match="duplicate"):
        ExperimentPlan([plan.runs[0], plan.runs[0]])


def test_runner_config_validation(tmp_path):
    with pytest.raises(ValueError, match="scale"):
        RunnerConfig(tmp_path, scale="huge")
    with pytest.raises(KeyError):
        RunnerConfig(tmp_path, train_overrides={"epochs": 3})


# ----------------------------------------------------------------------- runner


def test_runner_idempotent_and_retrains_on_change(data_root, tmp_path):
    spec = RunSpec("clipseg", ("kvasir_seg",), "P3", eval_data=("kvasir_seg", "etis"))
    runner = Runner(tmp_path, fast_config(data_root))
    first = runner.execute(spec)
    assert first.status == "completed" and first.epochs_run == 2
    assert [r.test_data for r in first.reports] == ["kvasir_seg", "etis"]
    assert [r.in_distribution for r in first.reports] == [True, False]
    run_dir = tmp_path / "runs" / spec.run_id
    for name in ("config.json", "checkpoints/best.pt", "checkpoints/last.pt", "history.csv", "eval/etis.csv",
                 "eval/etis.json", "figs/history.png", "done.json"):
        assert (run_dir / name).exists(), name

    again = Runner(tmp_path, fast_config(data_root)).execute(spec)
    assert again.status == "skipped" and again.epochs_run == 0

    changed = Runner(tmp_path, fast_config(data_root, lr=1e-4)).execute(spec)
    assert changed.status == "completed" and changed.epochs_run == 2
    assert json.loads((run_dir / "config.json").read_text())["train"]["lr"] == 1e-4


def test_runs_are_reproducible_across_roots(data_root, tmp_path):
    spec = RunSpec("cris", ("clinicdb",), "P2", eval_data=("clinicdb",))
    outputs = []
    for name in ("a", "b"):
        Runner(tmp_path / name, fast_config(data_root)).execute(spec)
        outputs.append((tmp_path / name / "runs" / spec.run_id / "eval" / "clinicdb.csv").read_text())
    assert outputs[0] == outputs[1]


def test_unet_baseline_run(data_root, tmp_path):
    spec = RunSpec("unet", ("kvasir_seg",), "P0")
    res = Runner(tmp_path, fast_config(data_root)).execute(spec)
    assert res.status == "completed"
    assert json.loads((tmp_path / "runs" / spec.run_id / "config.json").read_text())["model_kind"] == "cnn"


def test_free_text_prompts_replace_templates(tmp_path):
    root = write_blob_dataset(tmp_path / "kvasir_seg", counts=(1, 1, 1))
    (root / "free_text.json").write_text(json.dumps({"train_blob000": "a written description"}))
    handle = load_handle("kvasir_seg", RunnerConfig(tmp_path))
    records = dataset_records(handle)
    assert records and all(r.prompt == "a written description" for r in records)
    assert PromptType.P0 not in {r.ptype for r in records}


# ---------------------------------------------------------------------- reports


@pytest.fixture(scope="module")
def results_root(data_root, tmp_path_factory):
    root = tmp_path_factory.mktemp("results")
    plan = ExperimentPlan([
        RunSpec("clipseg", ("kvasir_seg",), p, eval_data=("kvasir_seg", "etis")) for p in ("P0", "P1")
    ] + [RunSpec("clipseg", ("clinicdb",), "P1")])
    run_plan(plan, root, fast_config(data_root))
    return root


def test_run_plan_manifest(results_root):
    manifest = json.loads((results_root / "manifest.json").read_text())
    assert len(manifest["runs"]) == 3
    assert len(ExperimentPlan.load(results_root / "plan.json")) == 3


def test_report_tables(results_root, tmp_path):
    written = report(results_root, tmp_path)
    rows = collect_results(results_root)
    assert len(rows) == 5
    with open(tmp_path / "cross_clipseg.csv") as fh:
        table = list(csv.reader(fh))
    assert table[0] == ["train \\ test", *ENDOSCOPY]
    assert [r[0] for r in table[1:]] == ["kvasir_seg", "clinicdb"]
    kvasir = dict(zip(table[0], table[1]))
    assert kvasir["kvasir_seg"].endswith("*") and not kvasir["etis"].endswith("*")
    assert kvasir["bkai"] == "-"
    clinic = dict(zip(table[0], table[2]))
    assert clinic["etis"] == "-" and clinic["clinicdb"].endswith("*")
    # the best prompt type fills each cell
    best = max(r["dice_mean"] for r in rows if r["train_data"] == "kvasir_seg" and r["test_data"] == "kvasir_seg")
    assert kvasir["kvasir_seg"] == f"{best:.2f}*"
    regimes = (tmp_path / "regimes.md").read_text()
    assert "finetuned" in regimes and "etis" not in regimes.splitlines()[0]
    assert {"results", "regimes", "cross_clipseg"} <= set(written)


# -------------------------------------------------------------------------- cli


def test_cli_plan_and_config_mirroring(tmp_path, capsys):
    out = tmp_path / "plan.json"
    assert cli.main(["plan", "--preset", "radiology", "--variants", "cris", "--out", str(out)]) == 0
    assert len(ExperimentPlan.load(out)) == 22
    assert "22 runs" in capsys.readouterr().out

    cfg = tmp_path / "plan.yaml"
    cfg.write_text(yaml.safe_dump({"preset": "non-radiology", "variants": ["clipseg"], "seed": 4, "out": str(out)}))
    assert cli.main(["plan", "--config", str(cfg)]) == 0
    loaded = ExperimentPlan.load(out)
    assert len(loaded) == 50 and {r.seed for r in loaded} == {4}
    # explicit flags win over the file
    assert cli.main(["plan", "--config", str(cfg), "--seed", "7"]) == 0
    assert {r.seed for r in ExperimentPlan.load(out)} == {7}
    cfg.write_text(yaml.safe_dump({"presett": "full", "out": str(out)}))
    with pytest.raises(SystemExit):
        cli.main(["plan", "--config", str(cfg)])


def test_cli_train_evaluate_and_errors(data_root, tmp_path, capsys):
    argv = ["train", "--variant", "clipseg", "--dataset", "kvasir_seg", "--ptype", "P2", "--out", str(tmp_path),
            "--data-root", str(data_root), "--train", "max_epochs=1", "--train", "batch_size=4"]
    assert cli.main(argv) == 0
    assert "completed (1 epochs)" in capsys.readouterr().out
    assert cli.main(argv) == 0
    assert "skipped (0 epochs)" in capsys.readouterr().out

    ckpt = tmp_path / "runs" / "clipseg_kvasir_seg_P2_s0" / "checkpoints" / "best.pt"
    out = tmp_path / "eval.csv"
    assert cli.main(["evaluate", "--checkpoint", str(ckpt), "--dataset", "etis", "--ptype", "P2",
                     "--data-root", str(data_root), "--out", str(out)]) == 0
    assert out.exists() and out.with_suffix(".json").exists()

    suite = tmp_path / "suite.json"
    suite.write_text(json.dumps([{"mode": "identity"}, {"mode": "opposite", "target": "size"}]))
    assert cli.main(["perturb-eval", "--checkpoint", str(ckpt), "--dataset", "kvasir_seg", "--suite", str(suite),
                     "--data-root", str(data_root), "--out", str(tmp_path / "perturb")]) == 0
    assert (tmp_path / "perturb" / "perturbation_reports.csv").exists()
    assert cli.main(["cross-eval", "--checkpoint", f"kvasir_seg={ckpt}", "--test", "kvasir_seg", "etis",
                     "--data-root", str(data_root), "--out", str(tmp_path / "cross")]) == 0
    assert (tmp_path / "cross" / "cross_eval.md").read_text().startswith("| train \\ test | kvasir_seg | etis |")
    assert cli.main(["report", "--results", str(tmp_path)]) == 0
    assert (tmp_path / "report" / "regimes.md").exists()
    prompts = tmp_path / "prompts.jsonl"
    assert cli.main(["generate-prompts", "--dataset", "kvasir_seg", "--ptypes", "P1", "P6",
                     "--data-root", str(data_root), "--out", str(prompts)]) == 0
    assert len(prompts.read_text().splitlines()) == 2 * 5

    assert cli.main(["evaluate", "--checkpoint", str(tmp_path / "nope.pt"), "--dataset", "etis",
                     "--data-root", str(data_root), "--out", str(out)]) == 2
    assert cli.main(["train", "--variant", "clipseg", "--dataset", "etis", "--out", str(tmp_path),
                     "--data-root", str(data_root)]) == 2
    with pytest.raises(SystemExit):
        cli.main(["train", "--variant", "clipseg", "--dataset", "kvasir_seg", "--out", str(tmp_path),
                  "--data-root", str(data_root), "--train", "max_epochs"])


def test_cli_data_root_env(monkeypatch, tmp_path):
    monkeypatch.setenv(cli.DATA_ROOT_ENV, str(tmp_path))
    args = cli.parse_args(["evaluate", "--checkpoint", "c.pt", "--dataset", "etis", "--out", "o.csv"])
    assert args.data_root == str(tmp_path)
