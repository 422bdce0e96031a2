"""Command-line interface.

Subcommands: ``simulate``, ``fit``, ``prior-sample`` and ``diagnose``.
Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import datasets
from .dpp import sample_projection_dpp
from .errors import ConfigError, DataError, NumericalError
from .kernel import Domain, FourierProjectionKernel
from .mixture import Dataset, Hyperparameters
from .samplers import KINDS, SamplerKind, run_chain
from .summaries import effective_sample_size, make_grid, summarize

log = logging.getLogger("pdppmix")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERICAL = 0, 2, 3, 4

TRACE_COLUMNS = ("iteration", "k", "entropy", "u", "log_likelihood", "acceptance_rate")


def fmt(x) -> str:
    """Round-trip text form of a number (17 significant digits)."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return "%.17g" % float(x)


# ---------------------------------------------------------------------------
# CSV input / output
# ---------------------------------------------------------------------------


def read_data_csv(path) -> Dataset:
    """Read an ``n x d`` numeric CSV with a header row."""
    path = Path(path)
    try:
        handle = path.open(newline="")
    except OSError as exc:
        raise DataError(f"cannot open data file {path}: {exc}") from exc
    with handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if not header:
            raise DataError(f"{path}: empty file (a header row is required)")
        d = len(header)
        rows = []
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != d:
                raise DataError(f"{path}, line {line}: expected {d} fields, found {len(row)}")
            try:
                values = [float(c) for c in row]
            except ValueError as exc:
                raise DataError(f"{path}, line {line}: {exc}") from exc
            if not all(math.isfinite(v) for v in values):
                raise DataError(f"{path}, line {line}: non-finite value")
            rows.append(values)
    if not rows:
        raise DataError(f"{path}: no data rows")
    return Dataset(np.array(rows))


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


@dataclass
class RunConfig:
    input_path: str
    output_dir: str
    sampler: SamplerKind
    iterations: int = 10_000
    burn_in: int = 5_000
    thin: int = 1
    seed: int = 0
    hyper: Hyperparameters | None = None
    chains: int = 1
    workers: int | None = None
    chain_seeds: list | None = None
    grid_points: int | None = None
    snapshot_every: int = 10


_HYPER_FIELDS = {f.name for f in fields(Hyperparameters)}
_TOP_FIELDS = {"input_path", "output_dir", "sampler", "iterations", "burn_in", "thin", "seed",
               "hyper", "chains", "workers", "chain_seeds", "grid", "snapshot_every"}


def _int_field(cfg, name, default, problems, minimum):
    value = cfg.get(name, default)
    if isinstance(value, bool) or not isinstance(value, int):
        problems.append(f"{name} must be an integer (got {value!r})")
        return default
    if value < minimum:
        problems.append(f"{name} must be at least {minimum} (got {value})")
    return value


def parse_config(cfg: dict, d: int | None = None) -> RunConfig:
    """Validate a config document; every problem is reported at once.

    ``d`` (the data dimension) selects the default hyperparameters.
    """
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    problems = []
    unknown = set(cfg) - _TOP_FIELDS
    if unknown:
        problems.append(f"unknown field(s): {', '.join(sorted(unknown))}")
    for name in ("input_path", "output_dir"):
        if not isinstance(cfg.get(name), str):
            problems.append(f"{name} is required and must be a string")
    sampler_cfg = cfg.get("sampler", "marginal_b")
    if isinstance(sampler_cfg, str):
        sampler_cfg = {"name": sampler_cfg}
    sampler = None
    if not isinstance(sampler_cfg, dict) or sampler_cfg.get("name") not in KINDS:
        problems.append(f"sampler must be one of {', '.join(KINDS)} (got {cfg.get('sampler')!r})")
    else:
        try:
            sampler = SamplerKind(**sampler_cfg)
        except (TypeError, ConfigError) as exc:
            problems.append(f"sampler: {exc}")
    iterations = _int_field(cfg, "iterations", 10_000, problems, 1)
    burn_in = _int_field(cfg, "burn_in", 5_000, problems, 0)
    if isinstance(iterations, int) and isinstance(burn_in, int) and burn_in >= iterations:
        problems.append(f"burn_in ({burn_in}) must be smaller than iterations ({iterations})")
    thin = _int_field(cfg, "thin", 1, problems, 1)
    seed = _int_field(cfg, "seed", 0, problems, 0)
    if isinstance(seed, int) and seed >= 2**64:
        problems.append("seed must fit in 64 bits")
    chains = _int_field(cfg, "chains", 1, problems, 1)
    workers = cfg.get("workers")
    if workers is not None:
        workers = _int_field(cfg, "workers", 1, problems, 1)
    snapshot_every = _int_field(cfg, "snapshot_every", 10, problems, 1)
    chain_seeds = cfg.get("chain_seeds")
    if chain_seeds is not None:
        if (not isinstance(chain_seeds, list) or len(chain_seeds) != chains
                or not all(isinstance(s, int) and not isinstance(s, bool) and 0 <= s < 2**64 for s in chain_seeds)):
            problems.append("chain_seeds must be a list of one non-negative 64-bit integer per chain")
    grid = cfg.get("grid")
    grid_points = None
    if grid is not None:
        if not isinstance(grid, dict) or set(grid) - {"points"}:
            problems.append('grid must be an object like {"points": 1001}')
        else:
            grid_points = _int_field(grid, "points", 1001, problems, 2)
    hyper_cfg = cfg.get("hyper", {})
    hyper = None
    if not isinstance(hyper_cfg, dict):
        problems.append("hyper must be an object")
    else:
        bad = set(hyper_cfg) - _HYPER_FIELDS
        if bad:
            problems.append(f"unknown hyper field(s): {', '.join(sorted(bad))}")
        else:
            try:
                dim = d if d is not None else np.atleast_2d(hyper_cfg.get("omega", [[1.0]])).shape[0]
                hyper = Hyperparameters.default_for(dim, **hyper_cfg)
            except (ValueError, TypeError) as exc:
                problems.append(f"hyper: {exc}")
    if problems:
        raise ConfigError("invalid config:\n  - " + "\n  - ".join(problems))
    return RunConfig(
        input_path=cfg["input_path"], output_dir=cfg["output_dir"], sampler=sampler,
        iterations=iterations, burn_in=burn_in, thin=thin, seed=seed, hyper=hyper,
        chains=chains, workers=workers, chain_seeds=chain_seeds, grid_points=grid_points,
        snapshot_every=snapshot_every,
    )


def chain_seed(config: RunConfig, j: int) -> np.random.SeedSequence:
    if config.chain_seeds is not None:
        return np.random.SeedSequence(config.chain_seeds[j])
    return np.random.SeedSequence([config.seed, j])


# ---------------------------------------------------------------------------
# fit
# ---------------------------------------------------------------------------


def _run_one(args):
    j, config, y = args
    dataset = Dataset(y)
    trace = run_chain(config.sampler, dataset, config.hyper, config.iterations, config.burn_in,
                      chain_seed(config, j), thin=config.thin, snapshot_every=config.snapshot_every)
    out = Path(config.output_dir) / f"chain_{j + 1}"
    out.mkdir(parents=True, exist_ok=True)
    acc = trace.acceptance_rate()
    rows = [(config.burn_in + 1 + t * config.thin, r.k, r.entropy, r.u, r.log_likelihood, acc[t])
            for t, r in enumerate(trace.reports)]
    write_csv(out / "trace.csv", TRACE_COLUMNS, rows)
    write_csv(out / "allocations.csv", [f"c{i + 1}" for i in range(dataset.n)], trace.allocations)
    grid = make_grid(trace.domain, config.grid_points) if config.grid_points and dataset.d <= 2 else None
    summ = summarize(trace, grid=grid, seed=int(chain_seed(config, j).generate_state(1)[0]))
    secs = trace.wall_time_seconds
    summary = {
        "chain": j + 1,
        "sampler": config.sampler.name,
        "m": trace.m,
        "recorded_iterations": len(trace),
        "k_posterior": {str(h + 1): float(p) for h, p in enumerate(summ.k_posterior)},
        "k_mode": summ.k_mode,
        "ess": {
            "k": _ess_json(summ.ess_k, len(trace), secs),
            "entropy": _ess_json(summ.ess_entropy, len(trace), secs),
        },
        "point_partition": summ.point_partition.tolist(),
        "runtime_seconds": secs,
        "domain": {"lower": trace.domain.lower.tolist(), "upper": trace.domain.upper.tolist()},
    }
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2)
    if summ.density_grid is not None:
        g, dens = summ.density_grid
        write_csv(out / "density.csv", [f"x{e + 1}" for e in range(g.shape[1])] + ["density"],
                  np.column_stack([g, dens]))
    return summary


def _ess_json(ess, n, secs):
    return {
        "ess": ess.value,
        "per_iteration": ess.value / n,
        "per_second": ess.value / secs if secs > 0 else None,
        "degenerate": ess.degenerate,
    }


def cmd_fit(config_path) -> int:
    try:
        with open(config_path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {config_path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{config_path}: invalid JSON ({exc})") from exc
    input_path = raw.get("input_path") if isinstance(raw, dict) else None
    # a readable data file fixes d for the defaults; otherwise report config problems first
    dataset = read_data_csv(input_path) if isinstance(input_path, str) and os.path.exists(input_path) else None
    config = parse_config(raw, dataset.d if dataset is not None else None)
    if dataset is None:
        dataset = read_data_csv(config.input_path)
    if dataset.d != config.hyper.d:
        raise ConfigError(f"hyper.omega is {config.hyper.d}x{config.hyper.d} but the data have d = {dataset.d}")
    Path(config.output_dir).mkdir(parents=True, exist_ok=True)
    jobs = [(j, config, np.array(dataset.y)) for j in range(config.chains)]
    workers = config.workers or config.chains
    if workers == 1 or config.chains == 1:
        summaries = [_run_one(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            summaries = list(pool.map(_run_one, jobs))
    combined = {"chains": summaries}
    if len(summaries) > 1:
        combined["k_tv_distance_max"] = _max_tv([s["k_posterior"] for s in summaries])
    with open(Path(config.output_dir) / "summary.json", "w") as fh:
        json.dump(combined, fh, indent=2)
    for s in summaries:
        log.info("chain %d: mode(k) = %d, %.1f s", s["chain"], s["k_mode"], s["runtime_seconds"])
    return EXIT_OK


def _max_tv(posteriors) -> float:
    keys = sorted({k for p in posteriors for k in p}, key=int)
    P = np.array([[p.get(k, 0.0) for k in keys] for p in posteriors])
    best = 0.0
    for a in range(len(P)):
        for b in range(a + 1, len(P)):
            best = max(best, 0.5 * float(np.abs(P[a] - P[b]).sum()))
    return best


# ---------------------------------------------------------------------------
# simulate / prior-sample / diagnose
# ---------------------------------------------------------------------------


def cmd_simulate(generator: str, n: int, seed: int, output) -> int:
    y = datasets.simulate(generator, n, np.random.default_rng(seed))
    write_csv(output, [f"y{e + 1}" for e in range(y.shape[1])], y)
    return EXIT_OK


def cmd_prior_sample(ell: int, lower, upper, draws: int, seed: int, output) -> int:
    try:
        kernel = FourierProjectionKernel(Domain(lower, upper), ell)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    rng = np.random.default_rng(seed)
    rows = []
    for t in range(draws):
        for p in sample_projection_dpp(kernel, rng).points:
            rows.append([t + 1, *p])
    write_csv(output, ["draw"] + [f"x{e + 1}" for e in range(kernel.d)], rows)
    return EXIT_OK


def read_trace_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != TRACE_COLUMNS:
            raise DataError(f"{path}: header must be {','.join(TRACE_COLUMNS)}")
        rows = []
        for row in reader:
            try:
                if len(row) != len(TRACE_COLUMNS):
                    raise ValueError(f"expected {len(TRACE_COLUMNS)} fields, found {len(row)}")
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise DataError(f"{path}, line {reader.line_num}: malformed row {row!r} ({exc})") from exc
    if len(rows) < 10:
        raise DataError(f"{path}: need at least 10 rows, found {len(rows)}")
    return np.array(rows)


def cmd_diagnose(paths, output=None) -> int:
    report = {"chains": []}
    k_posts = []
    for path in paths:
        arr = read_trace_csv(path)
        n = len(arr)
        summary_path = Path(path).with_name("summary.json")
        secs = None
        if summary_path.exists():
            with open(summary_path) as fh:
                secs = json.load(fh).get("runtime_seconds")
        entry = {"trace": str(path), "iterations": n}
        for col, name in ((1, "k"), (2, "entropy")):
            ess = effective_sample_size(arr[:, col])
            entry[name] = {
                "ess": ess.value,
                "per_iteration": ess.value / n,
                "per_second": ess.value / secs if secs else None,
                "degenerate": ess.degenerate,
            }
        ks, counts = np.unique(arr[:, 1].astype(int), return_counts=True)
        k_posts.append({str(k): c / n for k, c in zip(ks, counts)})
        entry["k_posterior"] = k_posts[-1]
        report["chains"].append(entry)
    if len(k_posts) > 1:
        report["k_tv_distance_max"] = _max_tv(k_posts)
    text = json.dumps(report, indent=2)
    if output:
        Path(output).write_text(text + "\n")
    else:
        print(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pdppmix", description="Projection-DPP mixture models.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="simulate a benchmark dataset")
    s.add_argument("--generator", required=True, choices=datasets.GENERATORS)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--output", required=True)

    f = sub.add_parser("fit", help="run MCMC chains described by a JSON config")
    f.add_argument("config")

    q = sub.add_parser("prior-sample", help="exact draws from the projection DPP prior")
    q.add_argument("--ell", type=int, required=True)
    q.add_argument("--lower", type=float, nargs="+", required=True)
    q.add_argument("--upper", type=float, nargs="+", required=True)
    q.add_argument("--draws", type=int, default=1)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--output", required=True)

    g = sub.add_parser("diagnose", help="ESS and cross-chain agreement of trace files")
    g.add_argument("traces", nargs="+")
    g.add_argument("--output")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "simulate":
            if args.n < 1:
                parser.error("--n must be at least 1")
            return cmd_simulate(args.generator, args.n, args.seed, args.output)
        if args.command == "fit":
            return cmd_fit(args.config)
        if args.command == "prior-sample":
            if args.draws < 1:
                parser.error("--draws must be at least 1")
            return cmd_prior_sample(args.ell, args.lower, args.upper, args.draws, args.seed, args.output)
        return cmd_diagnose(args.traces, args.output)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
