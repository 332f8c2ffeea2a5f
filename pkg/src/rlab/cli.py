"""Experiment runner: every construction as a subcommand.

Each run writes a CSV of checkpoints and a JSON summary; identical
configs and seeds produce byte-identical outputs. Exit codes: 2 parse
error, 3 precondition violation, 4 budget exceeded.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from .errors import (
    BudgetError,
    ParseError,
    PreconditionError,
    RlabError,
)
from .core import partial_sums, PartialSumTrace
from .permutations import (
    bound_function_g,
    dominating_f_for,
    escape_layer_Ek,
    identity_perm,
    mixer,
    mixer2,
    parse_permutation,
    set_prefix_agrees,
    EVERYWHERE,
    INFINITELY_OFTEN,
)
from .prediction import (
    evader_against_family,
    evader_from_dominator,
    meager_layer_Ci,
    parse_function,
    parse_predictor,
    parse_trace_file,
    play_game,
    trace_predictor,
)
from .rationals import Rational, parse_rational, rational_str
from .series import orbit_points, pad_series, parse_series, parse_target, riemann_rearrange
from .stochastic import (
    compute_thresholds,
    dmeas_pair_check,
    kolmogorov_check,
    rademacher_convergence_experiment,
    SignSequence,
)

_WINDOW_ALL = 10 ** 12


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="JSON file whose keys override flags")
    sub.add_argument("--out-dir", default=".", help="output directory")
    sub.add_argument("--csv", help="checkpoint CSV path")
    sub.add_argument("--json", help="JSON summary path")
    sub.add_argument("--budget", type=int, help="search/enumeration budget")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rlab",
        description="deterministic rearrangement & prediction experiments",
    )
    subs = parser.add_subparsers(dest="subcommand", required=True)

    def sub(name: str, **kw) -> argparse.ArgumentParser:
        s = subs.add_parser(name, **kw)
        _add_common(s)
        return s

    s = sub("rearrange", help="partial sums + classification")
    s.add_argument("--series", required=True)
    s.add_argument("--perm", default="identity")
    s.add_argument("--horizon", type=int, default=100000)
    s.add_argument("--stride", type=int, default=1000)
    s.add_argument("--rounds", type=int, default=5)
    s.add_argument("--window", type=int)
    s.add_argument("--osc-gap", default="1/2")
    s.add_argument("--conv-radius")

    s = sub("riemann", help="greedy rearrangement to a target")
    s.add_argument("--series", required=True)
    s.add_argument("--target", required=True)
    s.add_argument("--horizon", type=int, default=10000)
    s.add_argument("--stride", type=int, default=100)
    s.add_argument("--window", type=int)
    s.add_argument("--osc-gap", default="1/2")

    for name in ("mix", "mix2"):
        s = sub(name, help="mixer with agreement-index audit")
        s.add_argument("--series", required=True)
        s.add_argument("--perm", required=True)
        if name == "mix2":
            s.add_argument("--perm2", required=True)
        s.add_argument("--rounds", type=int, default=5)
        s.add_argument("--horizon", type=int, default=100000)
        s.add_argument("--stride", type=int, default=1000)
        s.add_argument("--osc-gap", default="1/2")

    s = sub("pad", help="padding invariance report")
    s.add_argument("--series", required=True)
    s.add_argument("--perm", required=True)
    s.add_argument("--rounds", type=int, default=5)
    s.add_argument("--mode", choices=[EVERYWHERE, INFINITELY_OFTEN], default=EVERYWHERE)
    s.add_argument("--io-stride", type=int, default=4)
    s.add_argument("--depth", type=int, default=12)

    s = sub("gbound", help="bound function of a permutation")
    s.add_argument("--perm", required=True)
    s.add_argument("--series")
    s.add_argument("--rounds", type=int, default=5)
    s.add_argument("--n-max", type=int, default=20)

    s = sub("predict", help="prediction game ledger")
    s.add_argument("--pred", required=True)
    s.add_argument("--x", required=True)
    s.add_argument("--horizon", type=int, default=100)

    s = sub("evade", help="evader constructions + game replay")
    s.add_argument("--pred", required=True,
                   help="predictor spec, or diag:<p1>;<p2>;... for family evasion")
    s.add_argument("--horizon", type=int, default=100)

    s = sub("trace-pred", help="trace predictor audit")
    s.add_argument("--trace", required=True)

    s = sub("meager", help="mismatch-layer / escape-layer verdicts")
    s.add_argument("--pred")
    s.add_argument("--x")
    s.add_argument("--layer", type=int)
    s.add_argument("--series")
    s.add_argument("--perm")
    s.add_argument("--rounds", type=int, default=5)
    s.add_argument("--bound")
    s.add_argument("--horizon", type=int, default=100)

    s = sub("kolmogorov", help="maximal-inequality check")
    s.add_argument("--variances", help="comma-separated rationals")
    s.add_argument("--levels", type=int, help="use variances 4^-i for i < levels")
    s.add_argument("--epsilon", required=True)
    s.add_argument("--trials", type=int, default=100000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--mode", choices=["monte-carlo", "exact"], default="monte-carlo")

    s = sub("thresholds", help="approximation thresholds from the tail oracle")
    s.add_argument("--series", required=True)
    s.add_argument("--levels", type=int, default=5)

    s = sub("dmeas", help="pairwise level-distance check")
    s.add_argument("--series", required=True)
    s.add_argument("--levels", type=int, default=3)
    s.add_argument("--j", type=int, required=True)
    s.add_argument("--m", type=int, required=True)
    s.add_argument("--trials", type=int, default=10000)
    s.add_argument("--seed", type=int, default=0)

    s = sub("rademacher", help="random-sign two-horizon stability")
    s.add_argument("--series", default="harmonic-mags")
    s.add_argument("--perm")
    s.add_argument("--rounds", type=int, default=5)
    s.add_argument("--seeds", type=int, default=100)
    s.add_argument("--h1", type=int, default=10000)
    s.add_argument("--h2", type=int, default=1000000)
    s.add_argument("--tolerance", default="1/20")

    return parser


def resolve_config(args: argparse.Namespace) -> dict:
    """Materialize the run config: flags, overlaid by --config file keys."""
    config = {k: v for k, v in vars(args).items() if v is not None}
    path = config.pop("config", None)
    if path:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                overlay = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ParseError(f"bad config file {path}: {exc}") from exc
        if not isinstance(overlay, dict):
            raise ParseError(f"config file {path} must hold a JSON object")
        config.update(overlay)
    return config


def _out_paths(config: dict) -> tuple[Path, Path]:
    out = Path(config.get("out_dir", "."))
    out.mkdir(parents=True, exist_ok=True)
    name = config["subcommand"]
    csv_path = Path(config["csv"]) if config.get("csv") else out / f"{name}.csv"
    json_path = Path(config["json"]) if config.get("json") else out / f"{name}.json"
    return csv_path, json_path


def _write_csv(path: Path, rows, header=("index", "partial_sum_num",
                                          "partial_sum_den", "float_approx")) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _sum_rows(checkpoints):
    return [(m, s.numerator, s.denominator, repr(float(s))) for m, s in checkpoints]


def _write_json(path: Path, config: dict, results: dict) -> None:
    payload = {"operation": config["subcommand"], "config": config, "results": results}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _trace_results(trace: PartialSumTrace) -> dict:
    return {
        "horizon": trace.horizon,
        "checkpoints": len(trace.checkpoints),
        "classification": trace.classification.to_dict(),
        "final_sum": rational_str(trace.final_sum),
        "final_float": float(trace.final_sum),
    }


def _run_rearrange(config: dict) -> None:
    series = parse_series(config["series"])
    perm = parse_permutation(config.get("perm", "identity"), series,
                             config.get("rounds", 5), config.get("budget"))
    conv = config.get("conv_radius")
    trace = partial_sums(
        series, perm, config["horizon"], config["stride"],
        window=config.get("window"),
        osc_gap=parse_rational(config.get("osc_gap", "1/2")),
        conv_radius=parse_rational(conv) if conv else None,
        budget=config.get("budget"),
    )
    csv_path, json_path = _out_paths(config)
    _write_csv(csv_path, _sum_rows(trace.checkpoints))
    _write_json(json_path, config, _trace_results(trace))


def _run_riemann(config: dict) -> None:
    series = parse_series(config["series"])
    target = parse_target(config["target"])
    perm = riemann_rearrange(series, target, config["horizon"], config.get("budget"))
    trace = partial_sums(series, perm, config["horizon"], config["stride"],
                         window=config.get("window"),
                         osc_gap=parse_rational(config.get("osc_gap", "1/2")),
                         budget=config.get("budget"))
    prefix = perm.prefix(config["horizon"])
    csv_path, json_path = _out_paths(config)
    _write_csv(csv_path, _sum_rows(trace.checkpoints))
    _write_json(json_path, config, {
        **_trace_results(trace),
        "prefix_injective": len(set(prefix)) == len(prefix),
    })


def _run_mix(config: dict) -> None:
    series = parse_series(config["series"])
    rounds = config.get("rounds", 5)
    budget = config.get("budget")
    inner = parse_permutation(config["perm"], series, rounds, budget)
    if config["subcommand"] == "mix2":
        inner2 = parse_permutation(config["perm2"], series, rounds, budget)
        q = mixer2(inner, inner2, rounds, budget)
        targets = {"p1": inner, "p2": inner2}
    else:
        q = mixer(inner, rounds, budget)
        targets = {"identity": identity_perm(), "p": inner}
    audit = []
    for rec in q.stage_log:
        audit.append({
            "stage": rec.stage,
            "kind": rec.kind,
            "index": rec.index,
            "verified": set_prefix_agrees(q, targets[rec.kind], rec.index),
        })
    trace = partial_sums(
        series, q, config["horizon"], config["stride"],
        extra_checkpoints=[rec.index + 1 for rec in q.stage_log],
        window=_WINDOW_ALL,
        osc_gap=parse_rational(config.get("osc_gap", "1/2")),
        budget=budget,
    )
    sums = dict(trace.checkpoints)
    for entry in audit:
        s = sums[entry["index"] + 1]
        entry["sum"] = rational_str(s)
        entry["sum_float"] = float(s)
    csv_path, json_path = _out_paths(config)
    _write_csv(csv_path, _sum_rows(trace.checkpoints))
    _write_json(json_path, config, {**_trace_results(trace), "agreements": audit})


def _run_pad(config: dict) -> None:
    series = parse_series(config["series"])
    perm = parse_permutation(config["perm"], series, config.get("rounds", 5),
                             config.get("budget"))
    f = dominating_f_for([perm], config.get("mode", EVERYWHERE),
                         config.get("io_stride", 4), config.get("budget"))
    depth = config.get("depth", 12)
    orbit = orbit_points(f, depth + 1)
    padded = pad_series(series, f)
    checkpoints = []
    identity_matches = []
    acc = Rational(0)
    ident = Rational(0)
    pos = 0
    for m, point in enumerate(orbit):
        while pos <= point:
            acc = acc + padded.term_at(pos)
            pos += 1
        ident = ident + series.term_at(m)
        checkpoints.append((point + 1, acc))
        identity_matches.append(acc == ident)
    labels = sorted(range(len(orbit)), key=lambda m: perm.inverse_of(orbit[m]))
    inversions = [(labels[i], labels[j])
                  for i in range(len(labels))
                  for j in range(i + 1, len(labels))
                  if labels[i] > labels[j]]
    csv_path, json_path = _out_paths(config)
    _write_csv(csv_path, _sum_rows(checkpoints))
    _write_json(json_path, config, {
        "orbit": orbit,
        "identity_sum_matches": identity_matches,
        "label_order": labels,
        "inversions": inversions,
        "growth": f.name,
    })


def _run_gbound(config: dict) -> None:
    series = parse_series(config["series"]) if config.get("series") else None
    perm = parse_permutation(config["perm"], series, config.get("rounds", 5),
                             config.get("budget"))
    values = [bound_function_g(perm, n, config.get("budget"))
              for n in range(config["n_max"] + 1)]
    csv_path, json_path = _out_paths(config)
    _write_csv(csv_path, [(n, g, 1, repr(float(g))) for n, g in enumerate(values)])
    _write_json(json_path, config, {
        "g": values,
        "monotone": all(values[i] <= values[i + 1] for i in range(len(values) - 1)),
    })


def _run_predict(config: dict) -> None:
    pred = parse_predictor(config["pred"])
    x = parse_function(config["x"])
    horizon = config["horizon"]
    values = [x(n) for n in range(horizon)]
    report = play_game(pred, values, horizon)
    rows = []
    for n in report.inspected:
        guess = pred.predict(n, tuple(values[:n]))
        rows.append((n, "" if guess is None else guess, values[n],
                     int(guess == values[n])))
    csv_path, json_path = _out_paths(config)
    _write_csv(csv_path, rows, header=("index", "predicted", "actual", "match"))
    _write_json(json_path, config, report.to_dict())


def _run_evade(config: dict) -> None:
    spec = config["pred"]
    horizon = config["horizon"]
    if spec.startswith("diag:"):
        preds = [parse_predictor(s) for s in spec.split(":", 1)[1].split(";")]
        values = evader_against_family(preds, horizon)
    else:
        preds = [parse_predictor(spec)]
        values = evader_from_dominator(preds[0], horizon,
                                       budget=config.get("budget"))
    replays = {p.name: play_game(p, values, horizon).to_dict() for p in preds}
    csv_path, json_path = _out_paths(config)
    _write_csv(csv_path, [(n, v, 1, repr(float(v))) for n, v in enumerate(values)])
    _write_json(json_path, config, {"replays": replays})


def _run_trace_pred(config: dict) -> None:
    trace = parse_trace_file(config["trace"])
    pred = trace_predictor(trace)
    from .prediction import block_interval, first_difference_positions

    rows = []
    blocks = []
    for k, n in enumerate(sorted(trace.blocks)):
        members = sorted(trace.blocks[n])
        diffs = first_difference_positions(members)
        j = pred.domain(k)
        rows.append((n, len(diffs), j, block_interval(n)[0]))
        blocks.append({"block": n, "first_differences": len(diffs),
                       "selected_index": j, "pigeonhole_ok": len(diffs) <= n - 1})
    csv_path, json_path = _out_paths(config)
    _write_csv(csv_path, rows,
               header=("block", "first_differences", "selected_index", "block_start"))
    _write_json(json_path, config, {"blocks": blocks})


def _run_meager(config: dict) -> None:
    csv_path, json_path = _out_paths(config)
    if config.get("layer") is not None:
        if not config.get("pred") or not config.get("x"):
            raise PreconditionError("mismatch-layer verdicts need --pred and --x")
        pred = parse_predictor(config["pred"])
        x = parse_function(config["x"])
        horizon = config["horizon"]
        values = [x(n) for n in range(horizon)]
        report = meager_layer_Ci(pred, config["layer"], values, horizon)
        _write_csv(csv_path, [(n, v, 1, repr(float(v)))
                              for n, v in enumerate(values)])
        _write_json(json_path, config, report.to_dict())
        return
    if config.get("bound") is None:
        raise PreconditionError("meager needs either --layer or --bound")
    if not config.get("series") or not config.get("perm"):
        raise PreconditionError("escape-layer verdicts need --series and --perm")
    series = parse_series(config["series"])
    perm = parse_permutation(config["perm"], series, config.get("rounds", 5),
                             config.get("budget"))
    report = escape_layer_Ek(series, parse_rational(config["bound"]), perm,
                             config["horizon"], config.get("budget"))
    acc = Rational(0)
    rows = []
    for m in range(config["horizon"] + 1):
        acc = acc + series.term_at(perm.value(m))
        rows.append((m, acc.numerator, acc.denominator, repr(float(acc))))
    _write_csv(csv_path, rows)
    _write_json(json_path, config, {
        "member": report.member,
        "bound": rational_str(report.bound),
        "first_violation": None if report.first_violation is None else {
            "index": report.first_violation[0],
            "sum": rational_str(report.first_violation[1]),
        },
        "escape_block": list(report.escape_block or ()),
        "escape_sum": None if report.escape_sum is None
        else rational_str(report.escape_sum),
    })


def _variances(config: dict) -> list:
    if config.get("variances"):
        return [parse_rational(v) for v in config["variances"].split(",")]
    if config.get("levels"):
        return [Rational(1, 4 ** i) for i in range(config["levels"])]
    raise PreconditionError("kolmogorov needs --variances or --levels")


def _run_kolmogorov(config: dict) -> None:
    variances = _variances(config)
    report = kolmogorov_check(variances, parse_rational(config["epsilon"]),
                              config.get("trials", 100000),
                              config.get("seed", 0),
                              config.get("mode", "monte-carlo"))
    csv_path, json_path = _out_paths(config)
    _write_csv(csv_path, [(i, v.numerator, v.denominator, repr(float(v)))
                          for i, v in enumerate(variances)])
    _write_json(json_path, config, report.to_dict())


def _run_thresholds(config: dict) -> None:
    series = parse_series(config["series"])
    name = compute_thresholds(series, config["levels"])
    csv_path, json_path = _out_paths(config)
    _write_csv(csv_path, [(m, i, 1, repr(float(i)))
                          for m, i in enumerate(name.thresholds)])
    _write_json(json_path, config, {
        "thresholds": list(name.thresholds),
        "tail_bounds": [rational_str(b) for b in name.tail_bounds],
    })


def _run_dmeas(config: dict) -> None:
    series = parse_series(config["series"])
    name = compute_thresholds(series, config["levels"])
    report = dmeas_pair_check(name, SignSequence(config.get("seed", 0)),
                              config["j"], config["m"], config["trials"])
    csv_path, json_path = _out_paths(config)
    _write_csv(csv_path, [(m, i, 1, repr(float(i)))
                          for m, i in enumerate(name.thresholds)])
    _write_json(json_path, config, report.to_dict())


def _run_rademacher(config: dict) -> None:
    series = parse_series(config["series"])
    perm = None
    if config.get("perm"):
        perm = parse_permutation(config["perm"], series, config.get("rounds", 5),
                                 config.get("budget"))
    report = rademacher_convergence_experiment(
        series, config["seeds"], (config["h1"], config["h2"]),
        parse_rational(config["tolerance"]), perm,
    )
    csv_path, json_path = _out_paths(config)
    _write_csv(csv_path,
               [(seed, "", "", repr(delta)) for seed, delta in enumerate(report.deltas)],
               header=("seed", "unused_num", "unused_den", "delta"))
    _write_json(json_path, config, report.to_dict())


_HANDLERS = {
    "rearrange": _run_rearrange,
    "riemann": _run_riemann,
    "mix": _run_mix,
    "mix2": _run_mix,
    "pad": _run_pad,
    "gbound": _run_gbound,
    "predict": _run_predict,
    "evade": _run_evade,
    "trace-pred": _run_trace_pred,
    "meager": _run_meager,
    "kolmogorov": _run_kolmogorov,
    "thresholds": _run_thresholds,
    "dmeas": _run_dmeas,
    "rademacher": _run_rademacher,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = resolve_config(args)
        _HANDLERS[config["subcommand"]](config)
    except ParseError as exc:
        print(f"rlab: parse error: {exc}", file=sys.stderr)
        return 2
    except BudgetError as exc:
        print(f"rlab: budget exceeded: {exc}", file=sys.stderr)
        return 4
    except RlabError as exc:
        print(f"rlab: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
