"""Command-line runner: ``maninkit verify | list-models | list-recipes``."""
import argparse
import difflib
import os
import sys
from dataclasses import dataclass, field

from .config import DEFAULT
from .errors import ManinError, RecipeParseError, UnknownModel
from .liegroup import MODELS, catalog_model
from .recipes import CALL_HELP, LEAF_HELP, build, cross_checks, parse, unparse
from .report import Report, emit_report, write_report


@dataclass
class RunConfig:
    model: str = "double-so3"
    recipe: str = "4gon"
    num_points: int = 20
    seed: int = 0
    tolerances: dict = field(default_factory=dict)
    out: str = None
    format: str = "json"

    def __post_init__(self):
        if self.num_points < 1:
            raise ValueError("num_points must be at least 1")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")


def load_model(key):
    if key not in MODELS:
        close = difflib.get_close_matches(key, list(MODELS), n=1)
        hint = f"; did you mean {close[0]!r}?" if close else ""
        raise UnknownModel(f"unknown model {key!r}{hint}")
    return catalog_model(key)


def run(config):
    """Build the recipe, sweep the axioms and the recipe's own identities."""
    from .hamspace import verify_quasi_symplectic
    tol = DEFAULT.with_overrides(config.tolerances)
    model = load_model(config.model)
    node = parse(config.recipe)
    space = build(model, node)
    axioms = verify_quasi_symplectic(space, config.num_points, config.seed, tol, strict=False)
    extra = cross_checks(model, node, space, config.num_points, config.seed, tol)
    echo = {
        "model": config.model,
        "recipe": unparse(node),
        "points": config.num_points,
        "seed": int(config.seed),
        "tolerances": dict(sorted(config.tolerances.items())),
    }
    notes = [f"space {space.label}: dim {space.dim}, target {'x'.join(space.target.kinds)}"]
    if any(c.name == "identity_law" for c in extra):
        notes.append("identity-law check: fusion with the 2-gon")
    return Report(echo, list(axioms.checks) + extra, notes)


def _parse_tol(items):
    out = {}
    for item in items or []:
        if "=" not in item:
            raise argparse.ArgumentTypeError(f"--tol expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        if k not in DEFAULT.as_dict():
            raise argparse.ArgumentTypeError(f"unknown tolerance {k!r}")
        out[k] = float(v)
    return out


def _default_seed():
    env = os.environ.get("MANINKIT_SEED")
    return int(env) if env not in (None, "") else 0


def make_parser():
    p = argparse.ArgumentParser(prog="maninkit", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    v = sub.add_parser("verify", help="build a recipe and run its verification suite")
    v.add_argument("--model", default="double-so3")
    v.add_argument("--recipe", required=True)
    v.add_argument("--points", type=int, default=20)
    v.add_argument("--seed", type=int, default=None, help="defaults to $MANINKIT_SEED or 0")
    v.add_argument("--tol", action="append", metavar="KEY=VALUE", help="override a tolerance")
    v.add_argument("--out", help="write the report here instead of stdout")
    v.add_argument("--format", choices=["json", "text"], default="json")
    v.add_argument("--figures", metavar="DIR", help="also write a residual bar chart to DIR")
    sub.add_parser("list-models", help="catalog of Manin pair models")
    sub.add_parser("list-recipes", help="recipe grammar and leaves")
    return p


def main(argv=None):
    parser = make_parser()
    args = parser.parse_args(argv)
    if args.command == "list-models":
        for key in MODELS:
            m = catalog_model(key)
            print(f"{key:14s} dim d = {m.dim}, dim g = {m.g_coords.shape[1]}")
        return 0
    if args.command == "list-recipes":
        for k, v in LEAF_HELP.items():
            print(f"{k:16s} {v}")
        for k, v in CALL_HELP.items():
            print(f"{k:16s} {v}")
        return 0
    try:
        tols = _parse_tol(args.tol)
        seed = args.seed if args.seed is not None else _default_seed()
        config = RunConfig(args.model, args.recipe, args.points, seed, tols, args.out, args.format)
        report = run(config)
        if args.out:
            write_report(report, args.out, args.format)
        else:
            sys.stdout.write(emit_report(report, args.format).decode("utf-8"))
        if args.figures:
            from .figures import residual_chart
            residual_chart(report, args.figures)
    except RecipeParseError as exc:
        print(f"recipe error: {exc}", file=sys.stderr)
        if exc.position is not None:
            print(f"  {args.recipe}\n  {' ' * exc.position}^", file=sys.stderr)
        return 2
    except (argparse.ArgumentTypeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ManinError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
