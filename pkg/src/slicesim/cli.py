"""Command-line entry point: experiment orchestration and file outputs.

Subcommands: simulate, analyze, fit-iat, steady-state, sweep, optimize,
casestudy.  Every run writes deterministic artifacts (CSV with LF endings,
JSON with sorted keys, no timestamps) into the output directory, so a run can
be regenerated byte-for-byte from its recorded configuration, seed, and
package version.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import replace

from . import __version__
from .analytics import (
    QueueParams,
    acceptance_probabilities,
    impatient_queue_pmf_table,
    mean_wait_joined_identity,
    mm1_queue_pmf,
    wait_distributions,
    wait_means,
)
from .casestudy import case_study_rows, render_case_study
from .config import (
    OUTPUT_ROOT_ENV,
    ExperimentConfig,
    build_strategy,
    builtin_scenario,
    load_config,
)
from .engine import (
    RNG_METADATA,
    SimConfig,
    derived_seed,
    monte_carlo,
    pooled_queue_empty_probs,
    run,
)
from .errors import SliceSimError
from .experiments import default_bin_width, geometric_fit_table, iat_bin_widths
from .markov import strategy_steady_state
from .optimize import (
    evaluate_strategy,
    greedy_single_queue_baseline,
    local_search,
    random_sweep,
)
from .slice_model import enumerate_state_space
from .statfit import empirical_pmf, fit_geometric, kld_vs_geometric
from .strategy import naive_strategy, to_text


def _write_csv(path: str, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _write_meta(outdir: str, command: str, config: ExperimentConfig,
                extra: dict | None = None) -> None:
    meta = {
        "command": command,
        "config": config.raw,
        "scenario": config.scenario,
        "seed": config.seed,
        "version": __version__,
        "rng": RNG_METADATA,
    }
    if extra:
        meta.update(extra)
    with open(os.path.join(outdir, "run_meta.json"), "w", encoding="utf-8") as handle:
        json.dump(meta, handle, sort_keys=True, indent=2)
        handle.write("\n")


def _metric_rows(reports) -> tuple[list[str], list[list]]:
    n_types = len(reports[0].acceptance_rates)
    header = ["round", "seed", "utility_rate", "wait", "admission_rate"]
    for n in range(1, n_types + 1):
        header += [f"acceptance_rate_{n}", f"queue_length_{n}", f"wait_{n}",
                   f"arrivals_{n}", f"accepted_{n}", f"balked_{n}",
                   f"reneged_{n}", f"waiting_{n}"]
    rows = []
    for i, r in enumerate(reports):
        row = [i, r.seed, r.utility_rate_mean, r.wait_mean, r.admission_rate]
        for n in range(n_types):
            row += [r.acceptance_rates[n], r.queue_length_means[n], r.wait_means[n],
                    r.arrivals[n], r.accepted[n], r.balked[n], r.reneged[n],
                    r.still_waiting[n]]
        rows.append(row)
    count = len(reports)
    mean_row = ["mean", ""]
    for j in range(2, len(header)):
        mean_row.append(sum(row[j] for row in rows) / count)
    rows.append(mean_row)
    return header, rows


def _cmd_simulate(config: ExperimentConfig, outdir: str) -> int:
    block = config.block("simulate")
    space = enumerate_state_space(config.model)
    base_dir = os.path.dirname(config.source) or "."
    strategy = build_strategy(block["strategy"], space, base_dir)
    sim = SimConfig(
        model=config.model, strategy=strategy, horizon=block["horizon"],
        warmup=block["warmup"], seed=config.seed,
        initial_state=block["initial_state"],
        balking=block["balking"], reneging=block["reneging"],
    )
    result = monte_carlo(sim, block["rounds"], space)
    header, rows = _metric_rows(result.reports)
    _write_csv(os.path.join(outdir, "metrics.csv"), header, rows)

    iat_rows = []
    for q, samples in enumerate(result.iat_samples, start=1):
        iat_rows += [[q, value] for value in samples]
    _write_csv(os.path.join(outdir, "pooled_iat.csv"), ["queue", "iat"], iat_rows)

    widths = iat_bin_widths(config.model, block["bin_width_divisor"])
    fit_rows = [
        [row.queue, row.samples, row.bin_width, row.p_hat, row.divergence]
        for row in geometric_fit_table([result.iat_samples], widths)
    ]
    _write_csv(os.path.join(outdir, "iat_fit.csv"),
               ["queue", "samples", "bin_width", "p_hat", "kld"], fit_rows)

    if block["write_traces"]:
        for i in range(block["rounds"]):
            round_sim = replace(sim, seed=derived_seed(config.seed, i),
                                record_events=True)
            trace, _ = run(round_sim, space)
            rows = [
                [t, kind, slice_type, request_id,
                 " ".join(str(v) for v in state),
                 " ".join(str(v) for v in queues)]
                for t, kind, slice_type, request_id, state, queues in trace.events
            ]
            _write_csv(os.path.join(outdir, f"trace_round_{i}.csv"),
                       ["time", "event", "type", "request_id", "s", "queue_lengths"],
                       rows)
    _write_meta(outdir, "simulate", config)
    return 0


def _cmd_analyze(config: ExperimentConfig, outdir: str) -> int:
    block = config.block("analyze")
    law = block["law"]
    path = os.path.join(outdir, "analysis.csv")
    if law == "mm1-pmf":
        rho = block["arrival_rate"] / block["acceptance_rate"]
        rows = [[l, mm1_queue_pmf(rho, l)] for l in range(block["max_length"] + 1)]
        _write_csv(path, ["length", "probability"], rows)
    else:
        params = QueueParams(
            arrival_rate=block["arrival_rate"],
            acceptance_rate=block["acceptance_rate"],
            reneging_rate=block["reneging_rate"],
            balking_willingness=block["balking_willingness"],
        )
        if law == "impatient-pmf":
            table = impatient_queue_pmf_table(params)
            rows = [[l, p] for l, p in enumerate(table[: block["max_length"] + 1])]
            _write_csv(path, ["length", "probability"], rows)
        elif law == "wait-densities":
            dists = wait_distributions(params)
            rows = []
            steps = int(round(block["wait_stop"] / block["wait_step"]))
            for k in range(steps + 1):
                w = k * block["wait_step"]
                rows.append([w, dists.accepted(w), dists.reneged(w), dists.joined(w)])
            _write_csv(path, ["wait", "f_accepted", "f_reneged", "f_joined"], rows)
        elif law == "wait-means":
            means = wait_means(params)
            _write_csv(path,
                       ["mean_wait_accepted", "mean_wait_reneged",
                        "mean_wait_joined", "joined_identity"],
                       [[means.accepted, means.reneged, means.joined,
                         mean_wait_joined_identity(params)]])
        else:  # acceptance-probabilities
            probs = acceptance_probabilities(params)
            _write_csv(path,
                       ["p_accept", "p_accept_and_join", "p_accept_given_join"],
                       [[probs.accept, probs.accept_and_join,
                         probs.accept_given_join]])
    _write_meta(outdir, "analyze", config)
    return 0


def _read_samples(path: str, column: str) -> list[float]:
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        rows = [row for row in reader if row]
    if not rows:
        raise SliceSimError(f"no data in {path!r}")
    try:
        float(rows[0][0])
        index, start = 0, 0
    except ValueError:
        if column not in rows[0]:
            raise SliceSimError(f"{path!r} has no column {column!r}") from None
        index, start = rows[0].index(column), 1
    return [float(row[index]) for row in rows[start:]]


def _cmd_fit_iat(config: ExperimentConfig, outdir: str) -> int:
    block = config.block("fit_iat")
    base_dir = os.path.dirname(config.source) or "."
    samples = _read_samples(os.path.join(base_dir, block["samples"]), block["column"])
    width = block["bin_width"] or default_bin_width(config.model)
    pmf = empirical_pmf(samples, width)
    p_hat = fit_geometric(pmf)
    divergence = kld_vs_geometric(pmf, p_hat)
    rows = [
        [k, c / pmf.total, (1 - p_hat) ** k * p_hat]
        for k, c in pmf.counts
    ]
    _write_csv(os.path.join(outdir, "iat_fit.csv"),
               ["bin", "empirical", "fitted"], rows)
    summary = {"samples": pmf.total, "bin_width": width, "p_hat": p_hat,
               "kld": divergence}
    with open(os.path.join(outdir, "fit_summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, sort_keys=True, indent=2)
        fh.write("\n")
    print(f"fitted p={p_hat!r} kld={divergence!r} over {pmf.total} samples")
    _write_meta(outdir, "fit-iat", config)
    return 0


def _cmd_steady_state(config: ExperimentConfig, outdir: str) -> int:
    block = config.block("steady_state")
    space = enumerate_state_space(config.model)
    base_dir = os.path.dirname(config.source) or "."
    strategy = build_strategy(block["strategy"], space, base_dir)
    probs = block["queue_empty_probs"]
    if isinstance(probs, dict):
        sim_spec = probs["from_simulation"]
        sim = SimConfig(
            model=config.model, strategy=strategy, horizon=sim_spec["horizon"],
            seed=config.seed, initial_state="full",
            balking=sim_spec["balking"], reneging=sim_spec["reneging"],
        )
        result = monte_carlo(sim, sim_spec["rounds"], space)
        probs = list(pooled_queue_empty_probs(result.reports))
    if len(probs) != config.model.num_types:
        raise SliceSimError(
            f"need {config.model.num_types} queue-empty probabilities, got {len(probs)}"
        )
    estimate = strategy_steady_state(
        config.model, space, strategy, probs, mode=block["mode"],
        opportunity_rate=block["opportunity_rate"],
        p_init=block["initial_distribution"],
    )
    dist_rows = [
        [i, " ".join(str(v) for v in space.state_at(i)), p]
        for i, p in enumerate(estimate.distribution.probabilities)
    ]
    _write_csv(os.path.join(outdir, "distribution.csv"),
               ["index", "state", "probability"], dist_rows)
    est_rows = [
        [n + 1, probs[n], estimate.acceptance_rates[n],
         estimate.mean_active_slices[n]]
        for n in range(config.model.num_types)
    ]
    _write_csv(os.path.join(outdir, "estimates.csv"),
               ["type", "queue_empty_prob", "acceptance_rate", "mean_active"],
               est_rows)
    print(f"mean utility rate estimate: {estimate.utility_rate!r} "
          f"(converged={estimate.distribution.converged})")
    _write_meta(outdir, "steady-state", config,
                extra={"converged": estimate.distribution.converged,
                       "utility_rate": estimate.utility_rate,
                       "queue_empty_probs": list(probs)})
    return 0


_SCORE_COLUMNS = ["u_mean", "u_ci", "Wq_mean", "Wq_ci", "PA_mean", "PA_ci"]


def _score_cells(score) -> list:
    return [score.utility_mean, score.utility_halfwidth,
            score.wait_mean, score.wait_halfwidth,
            score.admission_mean, score.admission_halfwidth]


def _cmd_sweep(config: ExperimentConfig, outdir: str) -> int:
    block = config.block("sweep")
    space = enumerate_state_space(config.model)
    sim = SimConfig(
        model=config.model, strategy=None, horizon=block["horizon"],
        seed=config.seed, initial_state=block["initial_state"],
        balking=block["balking"], reneging=block["reneging"],
    )
    entries = random_sweep(config.model, block["count"], config.seed, sim,
                           block["rounds"], space)
    rows = [
        [e.index, e.strategy_seed] + _score_cells(e.score)
        for e in entries
    ]
    _write_csv(os.path.join(outdir, "sweep.csv"),
               ["index", "seed"] + _SCORE_COLUMNS, rows)

    baseline_rows = []
    if block["include_naive"]:
        for n in range(1, config.model.num_types + 1):
            kind = f"prefer-type-{n}"
            score = evaluate_strategy(config.model, naive_strategy(space, kind),
                                      sim, block["rounds"], space, label=kind)
            baseline_rows.append([kind] + _score_cells(score))
    if block["include_greedy_baseline"]:
        score = greedy_single_queue_baseline(config.model, sim, block["rounds"], space)
        baseline_rows.append(["greedy-single-queue"] + _score_cells(score))
    if baseline_rows:
        _write_csv(os.path.join(outdir, "baselines.csv"),
                   ["label"] + _SCORE_COLUMNS, baseline_rows)
    best = max(entries, key=lambda e: e.score.admission_mean)
    print(f"swept {len(entries)} strategies; "
          f"best admission {best.score.admission_mean!r} at index {best.index}")
    _write_meta(outdir, "sweep", config)
    return 0


def _cmd_optimize(config: ExperimentConfig, outdir: str) -> int:
    block = config.block("optimize")
    space = enumerate_state_space(config.model)
    base_dir = os.path.dirname(config.source) or "."
    start = build_strategy(block["start"], space, base_dir)
    sim = SimConfig(
        model=config.model, strategy=None, horizon=block["horizon"],
        seed=config.seed, initial_state=block["initial_state"],
        balking=block["balking"], reneging=block["reneging"],
    )
    trajectory = local_search(config.model, start, block["budget"], sim,
                              block["rounds"], metric=block["metric"], space=space)
    rows = [
        [step.evaluations] + _score_cells(step.score)
        for step in trajectory
    ]
    _write_csv(os.path.join(outdir, "trajectory.csv"),
               ["evaluations"] + _SCORE_COLUMNS, rows)
    with open(os.path.join(outdir, "best_strategy.txt"), "w", encoding="utf-8") as fh:
        fh.write(to_text(trajectory[-1].strategy))
    print(f"best {block['metric']}: {trajectory[-1].score.metric(block['metric'])!r} "
          f"after {trajectory[-1].evaluations} evaluations")
    _write_meta(outdir, "optimize", config)
    return 0


def _cmd_casestudy(config: ExperimentConfig | None, outdir: str) -> int:
    rows = case_study_rows()
    _write_csv(os.path.join(outdir, "casestudy.csv"),
               ["panel", "time", "event", "type", "request_id", "s", "queue_lengths"],
               [list(row) for row in rows])
    print(render_case_study(rows), end="")
    if config is not None:
        _write_meta(outdir, "casestudy", config)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="slicesim",
        description="Multi-queue slice admission control: simulation, "
                    "closed-form analytics, and strategy evaluation.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("simulate", "analyze", "fit-iat", "steady-state", "sweep",
                 "optimize", "casestudy"):
        p = sub.add_parser(name)
        p.add_argument("--config", help="experiment configuration file (YAML)",
                       required=name != "casestudy")
        p.add_argument("--seed", type=int, help="override the master seed")
        p.add_argument("--out", help="output directory (default from config or "
                                     f"${OUTPUT_ROOT_ENV})")
        p.add_argument("--rounds", type=int, help="override Monte-Carlo rounds")
        p.add_argument("--horizon", type=float, help="override the time horizon")
        p.add_argument("--scenario", help="override the built-in scenario name")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    command = args.command
    try:
        config = load_config(args.config) if args.config else None
        if config is not None:
            if args.scenario:
                config.model = builtin_scenario(args.scenario)
                config.scenario = args.scenario
                config.raw["scenario"] = args.scenario
            if args.seed is not None:
                config.seed = args.seed
                config.raw["seed"] = args.seed
            block_name = command.replace("-", "_")
            if block_name in config.blocks:
                block = config.blocks[block_name]
                if args.rounds is not None and "rounds" in block:
                    block["rounds"] = args.rounds
                if args.horizon is not None and "horizon" in block:
                    block["horizon"] = args.horizon
        outdir = args.out or (config.output_dir if config else
                              os.environ.get(OUTPUT_ROOT_ENV, "."))
        os.makedirs(outdir, exist_ok=True)
        if command == "simulate":
            return _cmd_simulate(config, outdir)
        if command == "analyze":
            return _cmd_analyze(config, outdir)
        if command == "fit-iat":
            return _cmd_fit_iat(config, outdir)
        if command == "steady-state":
            return _cmd_steady_state(config, outdir)
        if command == "sweep":
            return _cmd_sweep(config, outdir)
        if command == "optimize":
            return _cmd_optimize(config, outdir)
        return _cmd_casestudy(config, outdir)
    except SliceSimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
