"""Command-line interface.

Exit codes: 0 success, 2 input/validation error, 3 infeasible configuration.
Table output prints numbers with 12 significant digits; JSON output uses the
shortest round-trip representation.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass

import numpy as np

from . import criteria, identifiability, selection, softmax
from .errors import InfeasibleError, ValidationError
from .io import dataset_to_csv, load_dataset, load_model, softmax_to_dict
from .network import DagStructure, Dataset, Variable, sample_dataset

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_INFEASIBLE = 3


@dataclass(frozen=True)
class RunConfig:
    seed: int | None = None
    completion_cap: int = criteria.DEFAULT_COMPLETION_CAP
    samples: int = 100_000
    step: float = identifiability.DEFAULT_STEP
    rank_tol: float = identifiability.DEFAULT_RANK_TOL
    output_format: str = "table"

    def __post_init__(self):
        for name in ("completion_cap", "samples", "step", "rank_tol"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name.replace('_', '-')} must be positive")

    def require_seed(self, command: str) -> int:
        if self.seed is None:
            raise ValidationError(f"{command} is randomized: pass --seed explicitly")
        return self.seed


def _num(v: float) -> str:
    return f"{v:.12g}"


def _table(rows) -> str:
    width = max(len(k) for k, _ in rows)
    return "\n".join(f"{k.ljust(width)}  {v}" for k, v in rows) + "\n"


def _config(args) -> RunConfig:
    return RunConfig(
        seed=getattr(args, "seed", None),
        completion_cap=getattr(args, "completion_cap", criteria.DEFAULT_COMPLETION_CAP),
        samples=getattr(args, "samples", 100_000),
        step=getattr(args, "step", identifiability.DEFAULT_STEP),
        rank_tol=getattr(args, "rank_tol", identifiability.DEFAULT_RANK_TOL),
        output_format=getattr(args, "format", "table"),
    )


def cmd_score(args, out) -> int:
    cfg = _config(args)
    model = load_model(args.model)
    data = load_dataset(args.dataset, model)
    s, prior = model.structure, model.prior
    if args.criterion == "cnm":
        report = criteria.conditional_node_monitor(s, prior, data)
    elif args.criterion == "csc":
        report = criteria.class_sequential_exact(s, prior, data, cfg.completion_cap)
    elif args.criterion == "csc-mc":
        report = criteria.class_sequential_monte_carlo(s, prior, data, cfg.samples, cfg.require_seed("csc-mc"))
    else:
        report = criteria.global_criterion(s, prior, data)
    if cfg.output_format == "json":
        out.write(json.dumps(report.as_dict(), indent=2) + "\n")
        return EXIT_OK
    rows = [("criterion", report.criterion_kind.value), ("value", _num(report.value)), ("cases", str(len(data)))]
    if report.std_error is not None:
        rows += [("std_error", _num(report.std_error)), ("samples", str(report.sample_count))]
    rows += [(f"term[{l}]", _num(t)) for l, t in enumerate(report.per_case_terms, start=1)]
    out.write(_table(rows))
    return EXIT_OK


def cmd_convert(args, out) -> int:
    model = load_model(args.model)
    if model.params is None:
        raise ValidationError("conversion needs explicit parameters in the model file")
    s = model.structure
    if args.form == "linear":
        sm = softmax.extract_linear_softmax(s, model.params)
    else:
        sm = softmax.extract_polynomial_softmax(s, model.params)
    doc = softmax_to_dict(sm, s.names[s.class_index])
    doc["form"] = args.form
    if args.check:
        doc["max_abs_deviation"] = softmax.max_deviation(s, model.params, sm)
    out.write(json.dumps(doc, indent=2) + "\n")
    return EXIT_OK


def cmd_identifiability(args, out) -> int:
    cfg = _config(args)
    model = load_model(args.model)
    report = identifiability.variational_dependence_probe(
        model.structure, args.points, cfg.require_seed("identifiability"), step=cfg.step, tolerance=cfg.rank_tol
    )
    if cfg.output_format == "json":
        out.write(json.dumps(report.as_dict(), indent=2) + "\n")
        return EXIT_OK
    rows = [
        ("points_tested", str(report.points_tested)),
        ("full_rank_count", str(report.full_rank_count)),
        ("expected_full_rank", str(report.expected_full_rank)),
        ("jacobian_shape", "x".join(str(d) for d in report.jacobian_shape)),
        ("rank_tolerance", _num(report.tolerance_used)),
        ("step", _num(report.step_used)),
        ("per_point_ranks", " ".join(str(r) for r in report.per_point_ranks)),
    ]
    out.write(_table(rows))
    return EXIT_OK


def _parse_predict(text: str, structure: DagStructure) -> dict:
    values = {}
    for part in filter(None, (p.strip() for p in text.split(","))):
        if "=" not in part:
            raise ValidationError(f"--predict entry {part!r} must look like NAME=STATE")
        name, state = (t.strip() for t in part.split("=", 1))
        structure.index_of(name)
        try:
            values[name] = int(state)
        except ValueError:
            raise ValidationError(f"--predict state {state!r} must be an integer index") from None
    wanted = [structure.names[i] for i in structure.input_indices]
    if sorted(values) != sorted(wanted):
        raise ValidationError(f"--predict must assign exactly the inputs {wanted}")
    return values


def _edge_text(s: DagStructure) -> str:
    return ";".join(f"{s.names[p]}->{s.names[j]}" for p, j in s.edges()) or "(none)"


def cmd_average(args, out) -> int:
    cfg = _config(args)
    model = load_model(args.variables)
    data = load_dataset(args.dataset, model)
    s = model.structure
    if s.n > args.max_nodes:
        raise InfeasibleError(f"{s.n} variables exceed --max-nodes {args.max_nodes}")
    variables: tuple[Variable, ...] = s.variables
    family = selection.enumerate_dags(variables, s.class_index, args.max_parents)
    table = selection.structure_log_posterior(family, selection.ModelPrior(), args.alpha, data)
    top = len(table) if args.top is None else args.top
    inputs = {"dataset": data, "dirichlet_defaults": args.alpha, "completion_cap": cfg.completion_cap}
    if args.criterion == "csc-mc":
        inputs.update(samples=cfg.samples, seed=cfg.require_seed("csc-mc ranking"))
    if not 1 <= top <= len(table):
        raise ValidationError(f"--top must lie in [1, {len(table)}]")
    ranked = selection.rank_structures(table, args.criterion, **inputs)[:top]
    by_key = {e.structure.key(): e for e in table.entries}

    predictive = None
    if args.predict is not None:
        x = _parse_predict(args.predict, s)
        chosen = [by_key[st.key()] for st in (st for st, _ in ranked)]
        if top == len(table):
            subset = table
        else:
            logs = np.array([e.log_posterior for e in chosen])
            norm = np.logaddexp.reduce(logs)
            subset = selection.PosteriorTable(
                tuple(selection.PosteriorEntry(e.structure, e.log_marginal_likelihood, e.log_prior,
                                               float(e.log_posterior - norm)) for e in chosen),
                float(table.log_normalizer + norm),
            )
        predictive = selection.averaged_class_predictive(subset, args.alpha, data, x)

    if cfg.output_format == "json":
        doc = {
            "structures": len(table),
            "criterion": args.criterion,
            "ranking": [
                {
                    "rank": r,
                    "key": st.key(),
                    "edges": _edge_text(st),
                    "log_marginal_likelihood": by_key[st.key()].log_marginal_likelihood,
                    "log_posterior": by_key[st.key()].log_posterior,
                    "posterior": float(np.exp(by_key[st.key()].log_posterior)),
                    "score": score,
                }
                for r, (st, score) in enumerate(ranked, start=1)
            ],
        }
        if predictive is not None:
            doc["averaged_over"] = top
            doc["predictive"] = [float(p) for p in predictive]
        out.write(json.dumps(doc, indent=2) + "\n")
        return EXIT_OK

    header = ["rank", "key", "log_ml", "log_posterior", "posterior", "score", "edges"]
    lines = ["\t".join(header)]
    for r, (st, score) in enumerate(ranked, start=1):
        e = by_key[st.key()]
        lines.append("\t".join([str(r), st.key(), _num(e.log_marginal_likelihood), _num(e.log_posterior),
                                _num(float(np.exp(e.log_posterior))), _num(score), _edge_text(st)]))
    out.write(f"structures\t{len(table)}\ncriterion\t{args.criterion}\n")
    out.write("\n".join(lines) + "\n")
    if predictive is not None:
        cls = s.names[s.class_index]
        out.write(f"predictive (averaged over {top} structures)\n")
        for k, p in enumerate(predictive):
            out.write(f"p({cls}={k})\t{_num(float(p))}\n")
    return EXIT_OK


def cmd_generate(args, out) -> int:
    cfg = _config(args)
    model = load_model(args.model)
    if model.params is None:
        raise ValidationError("generation needs explicit parameters in the model file")
    if args.cases < 0:
        raise ValidationError("--cases must be >= 0")
    data: Dataset = sample_dataset(model.structure, model.params, args.cases, cfg.require_seed("generate"))
    out.write(dataset_to_csv(data))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="brcnet", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def fmt(p):
        p.add_argument("--format", choices=("table", "json"), default="table")

    p = sub.add_parser("score", help="score a dataset with a prequential or global criterion")
    p.add_argument("model")
    p.add_argument("dataset")
    p.add_argument("--criterion", choices=("cnm", "csc", "csc-mc", "lml"), required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--completion-cap", type=int, default=criteria.DEFAULT_COMPLETION_CAP)
    fmt(p)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("convert", help="extract the softmax regression of a parameterized network")
    p.add_argument("model")
    p.add_argument("--to", choices=("softmax",), default="softmax")
    p.add_argument("--form", choices=("polynomial", "linear"), default="polynomial")
    p.add_argument("--check", action="store_true", help="report max deviation from enumeration")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("identifiability", help="Jacobian-rank probe of the parameter -> input-distribution map")
    p.add_argument("model")
    p.add_argument("--points", type=int, default=100)
    p.add_argument("--seed", type=int)
    p.add_argument("--step", type=float, default=identifiability.DEFAULT_STEP)
    p.add_argument("--rank-tol", type=float, default=identifiability.DEFAULT_RANK_TOL)
    fmt(p)
    p.set_defaults(func=cmd_identifiability)

    p = sub.add_parser("average", help="enumerate structures, compute posteriors, rank and average")
    p.add_argument("variables", help="model file whose variables and class define the family")
    p.add_argument("dataset")
    p.add_argument("--max-nodes", type=int, default=selection.MAX_UNCAPPED_NODES)
    p.add_argument("--max-parents", type=int)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--criterion", choices=selection.RANKING_CRITERIA, default="posterior")
    p.add_argument("--top", type=int)
    p.add_argument("--predict", help="input assignment, e.g. X1=0,X2=1")
    p.add_argument("--seed", type=int)
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--completion-cap", type=int, default=criteria.DEFAULT_COMPLETION_CAP)
    fmt(p)
    p.set_defaults(func=cmd_average)

    p = sub.add_parser("generate", help="sample a synthetic dataset as CSV")
    p.add_argument("model")
    p.add_argument("--cases", type=int, required=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_generate)
    return parser


def main(argv=None, out=None) -> int:
    out = sys.stdout if out is None else out
    args = build_parser().parse_args(argv)
    try:
        return args.func(args, out)
    except InfeasibleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
