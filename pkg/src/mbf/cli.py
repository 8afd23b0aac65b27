"""Command line entry point: ``mbf run``, ``mbf fetch-data`` and ``mbf verify``."""

from __future__ import annotations

import argparse
import logging
import subprocess
import sys
from pathlib import Path

from .core import balanced_split
from .datasets import DOCWORD_FILES, fetch_docword
from .errors import DatasetMissingError, InvalidParameterError
from .experiments import DEFAULTS, EXPERIMENTS, ExperimentSpec, run, write_csv
from .experiments import _LIST_KEYS as LIST_KEYS

log = logging.getLogger("mbf")


def _scalar(text: str):
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    if low in ("none", ""):
        return None
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def _value(key: str, text: str):
    if key in LIST_KEYS:
        return [_scalar(t) for t in text.split(",") if t.strip()]
    return _scalar(text)


def _collect_params(args: argparse.Namespace) -> dict:
    accepted = DEFAULTS[args.experiment]
    params: dict = {}
    flags = {"n": args.n, "n1": args.n1, "n2": args.n2, "ratio": args.ratio, "j": args.j,
             "proportion": args.proportion, "dataset": args.dataset}
    for key, raw in flags.items():
        if raw is not None:
            params[key] = raw if key == "dataset" else _value(key, raw)
    if args.k is not None:
        if "k" in accepted:
            params["k"] = _value("k", args.k) if isinstance(accepted["k"], list) else int(args.k)
        else:
            params["k1"], params["k2"] = balanced_split(int(args.k))
    for item in args.param or []:
        key, sep, raw = item.partition("=")
        if not sep:
            raise InvalidParameterError(f"--param expects key=value, got {item!r}")
        params[key] = _value(key, raw)
    if "proportion" in params and not isinstance(accepted.get("proportion"), list) and isinstance(params["proportion"], list):
        if len(params["proportion"]) != 1:
            raise InvalidParameterError(f"{args.experiment} takes a single proportion")
        params["proportion"] = params["proportion"][0]
    if "n2" in params and args.experiment == "fpr-jmatrix" and isinstance(params["n2"], list):
        params["n2"] = params["n2"][0]
    return params


def cmd_run(args: argparse.Namespace) -> int:
    spec = ExperimentSpec(args.experiment, _collect_params(args), seed=args.seed, trials=args.trials,
                          out=args.out, full_size=args.full_size)
    try:
        rows = run(spec)
    except DatasetMissingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        print("hint: mbf fetch-data kos --out data/", file=sys.stderr)
        return 2
    if args.out is None:
        write_csv(rows, sys.stdout)
    else:
        log.info("wrote %d rows to %s", len(rows), args.out)
    return 0


def cmd_fetch(args: argparse.Namespace) -> int:
    path = fetch_docword(args.name, args.out, expected_sha256=args.sha256)
    print(path)
    return 0


def _acceptance_path() -> Path | None:
    root = Path(__file__).resolve().parents[2]
    candidate = root / "tests" / "test_acceptance.py"
    return candidate if candidate.exists() else None


def cmd_verify(args: argparse.Namespace) -> int:
    path = _acceptance_path()
    if path is None:
        print("error: tests/test_acceptance.py not found next to this installation", file=sys.stderr)
        return 2
    return subprocess.call([sys.executable, "-m", "pytest", str(path), "-s", "-q", *args.pytest_args])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mbf", description="Matrix Bloom filter experiments")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one experiment and emit CSV")
    r.add_argument("experiment", choices=EXPERIMENTS)
    r.add_argument("--n", help="tuple count (fpr-generic)")
    r.add_argument("--n1", help="distinct first components")
    r.add_argument("--n2", help="distinct second components (list for double-side)")
    r.add_argument("--k", help="hash count, or comma list where the experiment sweeps it")
    r.add_argument("--ratio", help="comma list of m1/m2 ratios")
    r.add_argument("--j", help="comma list of j values")
    r.add_argument("--proportion", help="section-one or fill proportion(s)")
    r.add_argument("--trials", type=int)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--dataset", help="docword file or x1<TAB>x2 file")
    r.add_argument("--out", help="CSV path (stdout if omitted)")
    r.add_argument("--full-size", action="store_true", help="use the original, larger sizes")
    r.add_argument("--param", action="append", metavar="KEY=VALUE", help="any other experiment parameter")
    r.set_defaults(func=cmd_run)

    f = sub.add_parser("fetch-data", help="download a UCI docword file")
    f.add_argument("name", choices=sorted(DOCWORD_FILES))
    f.add_argument("--out", required=True, help="target directory")
    f.add_argument("--sha256", help="expected digest (otherwise recorded on first download)")
    f.set_defaults(func=cmd_fetch)

    v = sub.add_parser("verify", help="run the acceptance suite")
    v.add_argument("pytest_args", nargs="*", help="extra pytest arguments, e.g. -k c07")
    v.set_defaults(func=cmd_verify)
    return parser


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    head = [a for a in argv[:2] if a in ("-v", "--verbose")]
    if argv[len(head):len(head) + 1] == ["verify"]:
        # everything after "verify" goes to pytest untouched
        args = parser.parse_args(argv[:len(head) + 1])
        args.pytest_args = argv[len(head) + 1:]
    else:
        args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except InvalidParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
