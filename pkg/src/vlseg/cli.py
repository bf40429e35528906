"""Command-line entry point: ``vlseg <verb> [flags]``.

Every flag can also come from ``--config FILE`` (YAML or JSON, keys are
flag names with dashes or underscores); explicit flags win. The dataset
root defaults to ``$VLSEG_DATA_ROOT``.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Sequence

import yaml

DATA_ROOT_ENV = "VLSEG_DATA_ROOT"

log = logging.getLogger("vlseg")


def _data_root(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--data-root", default=os.environ.get(DATA_ROOT_ENV, "data"),
                        help=f"directory holding one folder per dataset (env: {DATA_ROOT_ENV})")


def _runner_flags(p: argparse.ArgumentParser) -> None:
    _data_root(p)
    p.add_argument("--scale", choices=("toy", "reference"), default="toy")
    p.add_argument("--provider-manifest", default=None, help="pretrained component manifest (JSON)")
    p.add_argument("--prompt-seed", type=int, default=0)
    p.add_argument("--train", action="append", default=[], metavar="KEY=VALUE",
                   help="training override, e.g. --train max_epochs=20 (repeatable)")
    p.add_argument("--eval-split", default="test")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vlseg", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate-prompts", help="write prompt records (JSON lines) for a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--masks", help="directory of masks (<id>.png or <id>.npy); default: all splits under --data-root")
    p.add_argument("--sidecar", help="attribute sidecar JSON")
    p.add_argument("--classes", help="class table JSON {name: label}")
    p.add_argument("--ptypes", nargs="*", help="prompt types (default: all available)")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    _data_root(p)

    p = sub.add_parser("train", help="finetune one model (one plan entry)")
    p.add_argument("--variant", required=True)
    p.add_argument("--dataset", nargs="+", required=True, help="training dataset(s)")
    p.add_argument("--kind", choices=("individual", "pooled", "endoscopy-pooled"), default="individual")
    p.add_argument("--ptype", default="P1")
    p.add_argument("--freeze", choices=("none", "encoders"), default="none")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eval", nargs="*", default=[], help="evaluation datasets (default: training sets)")
    p.add_argument("--out", required=True, help="results root")
    _runner_flags(p)

    p = sub.add_parser("evaluate", help="Dice of a checkpoint on one dataset split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--ptype", default="P0")
    p.add_argument("--prompt-seed", type=int, default=0)
    p.add_argument("--model-name", default=None)
    p.add_argument("--train-data", default="-")
    p.add_argument("--out", required=True, help="CSV path (a JSON twin is written alongside)")
    _data_root(p)

    p = sub.add_parser("perturb-eval", help="run a perturbation suite against a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--ptype", default="P6")
    p.add_argument("--suite", help="JSON list of specs; default: every applicable attribute and mode")
    p.add_argument("--prompt-seed", type=int, default=0)
    p.add_argument("--model-name", default=None)
    p.add_argument("--out", required=True)
    _data_root(p)

    p = sub.add_parser("cross-eval", help="evaluate checkpoints trained on several sets across test sets")
    p.add_argument("--checkpoint", action="append", required=True, metavar="TRAIN=PATH")
    p.add_argument("--test", nargs="+", required=True)
    p.add_argument("--ptype", default="P0")
    p.add_argument("--prompt-seed", type=int, default=0)
    p.add_argument("--model-name", default="model")
    p.add_argument("--out", required=True)
    _data_root(p)

    p = sub.add_parser("report", help="tables and charts from a results root")
    p.add_argument("--results", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--ptype", default=None, help="restrict to one prompt type (default: best per cell)")

    p = sub.add_parser("plan", help="write (and optionally execute) an experiment plan")
    p.add_argument("--preset", choices=("non-radiology", "radiology", "full"), default="full")
    p.add_argument("--variants", nargs="*", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--from-file", default=None, help="load a saved plan instead of a preset")
    p.add_argument("--out", required=True, help="plan JSON, or results root with --execute")
    p.add_argument("--execute", action="store_true")
    _runner_flags(p)

    for action in sub.choices.values():
        action.add_argument("--config", default=None, help="YAML/JSON file of flag values")
    return parser


def _coerce(text: str):
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError:
        return text


def _overrides(pairs: Sequence[str]) -> dict:
    out = {}
    for pair in pairs:
        key, sep, value = pair.partition("=")
        if not sep:
            raise SystemExit(f"--train expects KEY=VALUE, got {pair!r}")
        out[key.strip()] = _coerce(value)
    return out


def parse_args(argv: Sequence[str] | None = None) -> argparse.Namespace:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", default=None)
    config = pre.parse_known_args(argv)[0].config
    if config is None:
        return parser.parse_args(argv)
    data = yaml.safe_load(Path(config).read_text()) or {}
    if not isinstance(data, dict):
        raise SystemExit(f"{config}: expected a mapping")
    command = next((a for a in argv if a in COMMANDS), None)
    if command is None:
        return parser.parse_args(argv)
    sub = parser._subparsers._group_actions[0].choices[command]  # noqa: SLF001
    actions = {a.dest: a for a in sub._actions}  # noqa: SLF001
    defaults = {}
    for key, value in data.items():
        dest = key.replace("-", "_")
        if dest not in actions:
            raise SystemExit(f"{config}: unknown option {key!r} for {command}")
        defaults[dest] = value
        # a value from the file satisfies a required flag
        actions[dest].required = False
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def _runner_config(args):
    from .experiments.runner import RunnerConfig

    train = args.train if isinstance(args.train, dict) else _overrides(args.train)
    return RunnerConfig(Path(args.data_root), args.scale, args.provider_manifest, train, args.prompt_seed,
                        eval_split=args.eval_split)


def _records_for(handle, seed: int):
    from .experiments.runner import dataset_records
    from .prompts.generate import index_records

    return index_records(dataset_records(handle, seed))


def cmd_generate_prompts(args) -> int:
    from .data.datasets import load_label_mask
    from .data.registry import get_descriptor
    from .experiments.runner import RunnerConfig, dataset_records, load_handle
    from .prompts.generate import generate_prompt_records, write_jsonl
    from .prompts.sidecar import load_attribute_sidecar

    descriptor = get_descriptor(args.dataset)
    if args.masks is None:
        handle = load_handle(descriptor.name, RunnerConfig(Path(args.data_root)))
        records = dataset_records(handle, args.seed)
        if args.ptypes:
            wanted = set(args.ptypes)
            records = [r for r in records if r.ptype.value in wanted]
    else:
        classes = (json.loads(Path(args.classes).read_text()) if args.classes else descriptor.default_class_table())
        sidecar = load_attribute_sidecar(args.sidecar) if args.sidecar else {}
        files = sorted(p for p in Path(args.masks).iterdir() if p.suffix.lower() in (".png", ".npy", ".bmp", ".tif"))
        masks = ((p.stem, load_label_mask(p)) for p in files)
        records = generate_prompt_records(descriptor.family, classes, masks, sidecar, args.ptypes or None, args.seed)
    n = write_jsonl(records, args.out)
    print(f"wrote {n} prompt records to {args.out}")
    return 0


def cmd_train(args) -> int:
    from .experiments.plan import RunSpec
    from .experiments.runner import Runner

    spec = RunSpec(args.variant, tuple(args.dataset), args.ptype, args.kind, args.freeze, args.seed, tuple(args.eval))
    result = Runner(args.out, _runner_config(args)).execute(spec)
    print(f"{result.run_id}: {result.status} ({result.epochs_run} epochs)")
    for rep in result.reports:
        print(f"  {rep.test_data}: {rep.mean:.2f} ± {rep.std:.2f} (n={rep.n})")
    return 0


def _handle(name: str, data_root: str):
    from .experiments.runner import RunnerConfig, load_handle

    return load_handle(name, RunnerConfig(Path(data_root)))


def cmd_evaluate(args) -> int:
    from .evaluation.reports import evaluate_split, write_reports_csv, write_reports_json
    from .models.checkpoint import load_model

    handle = _handle(args.dataset, args.data_root)
    model = load_model(args.checkpoint)
    records = _records_for(handle, args.prompt_seed)
    rep = evaluate_split(model, handle, args.split, args.ptype, records,
                         model_name=args.model_name or Path(args.checkpoint).stem, train_data=args.train_data)
    write_reports_csv([rep], args.out)
    write_reports_json([rep], Path(args.out).with_suffix(".json"))
    print(f"{handle.name} {args.split} {rep.ptype}: {rep.mean:.2f} ± {rep.std:.2f} (n={rep.n})")
    return 0


def cmd_perturb_eval(args) -> int:
    from .models.checkpoint import load_model
    from .prompts.attributes import PromptType
    from .robustness import default_suite, load_suite, run_perturbation_suite

    handle = _handle(args.dataset, args.data_root)
    model = load_model(args.checkpoint)
    ptype = PromptType.parse(args.ptype)
    triplets = handle.triplets(args.split, _records_for(handle, args.prompt_seed), ptype)
    if args.suite:
        specs = load_suite(args.suite)
    else:
        keys = {k for t in triplets if t.attributes is not None for k in t.attributes}
        specs = default_suite(sorted(keys, key=lambda k: k.code))
    suite = run_perturbation_suite(model, triplets, ptype, specs, seed=args.prompt_seed,
                                   model_name=args.model_name or Path(args.checkpoint).stem,
                                   test_data=handle.name, out_dir=args.out)
    for r in suite.results:
        flag = " (base is zero: absolute change)" if r.base_zero else ""
        print(f"{r.spec.name:32s} {r.perturbed_mean:6.2f}  change {r.change:+.2f}{flag}")
    return 0


def cmd_cross_eval(args) -> int:
    from .evaluation.reports import cross_dataset_eval, write_reports_csv, write_reports_json
    from .experiments.report import markdown

    checkpoints = {}
    for pair in args.checkpoint:
        name, sep, path = pair.partition("=")
        if not sep:
            raise SystemExit(f"--checkpoint expects TRAIN=PATH, got {pair!r}")
        checkpoints[name] = path
    handles = [_handle(n, args.data_root) for n in args.test]
    records = {h.name: _records_for(h, args.prompt_seed) for h in handles}
    matrix = cross_dataset_eval(checkpoints, handles, ptype=args.ptype, records=records, model_name=args.model_name)
    out = Path(args.out)
    write_reports_csv(matrix.reports(), out / "cross_eval.csv")
    write_reports_json(matrix.reports(), out / "cross_eval.json")
    (out / "cross_eval.md").write_text(markdown(matrix.table()))
    print(markdown(matrix.table()))
    return 0


def cmd_report(args) -> int:
    from .experiments.report import report

    written = report(args.results, args.out, args.ptype)
    for name, path in written.items():
        print(f"{name}: {path}")
    return 0


def cmd_plan(args) -> int:
    from .experiments.plan import ExperimentPlan, non_radiology_plan, full_plan, radiology_plan
    from .experiments.runner import run_plan
    from .models.vlsm import VARIANTS

    if args.from_file:
        plan = ExperimentPlan.load(args.from_file)
    else:
        variants = tuple(args.variants) if args.variants else VARIANTS
        make = {"non-radiology": non_radiology_plan, "radiology": radiology_plan, "full": full_plan}[args.preset]
        plan = make(variants, seed=args.seed)
    if not args.execute:
        plan.save(args.out)
        print(f"{len(plan)} runs written to {args.out}")
        return 0
    results = run_plan(plan, args.out, _runner_config(args))
    done = sum(r.status == "completed" for r in results)
    print(f"{done} runs trained, {len(results) - done} already up to date")
    return 0


COMMANDS = {
    "generate-prompts": cmd_generate_prompts,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "perturb-eval": cmd_perturb_eval,
    "cross-eval": cmd_cross_eval,
    "report": cmd_report,
    "plan": cmd_plan,
}


def main(argv: Sequence[str] | None = None) -> int:
    args = parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (KeyError, ValueError, FileNotFoundError) as err:
        log.error("%s", err)
        return 2


if __name__ == "__main__":
    sys.exit(main())
