"""``magnocool`` command line: simulate, baseline, train, evaluate, export, recipes."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .. import baselines
from ..dynamics import PERIOD
from ..env import replay
from ..sac import checkpoint as ckpt
from ..sac.train import (
    CURVE_COLUMNS,
    DimensionMismatchError,
    Trainer,
    TrainingDivergedError,
    evaluate,
    read_curve,
    warm_start,
)
from ..trace import TRACE_FORMAT_VERSION, TraceFormatError, read_trace, write_trace
from . import config as C
from . import recipes as R
from .manifest import MANIFEST_NAME, content_hash, file_digest, read_manifest, utc_now, write_manifest

log = logging.getLogger("magnocool")

OUT_ENV_VAR = "MAGNOCOOL_OUT"
DEFAULT_OUT_ROOT = "magnocool-runs"

EXIT_USAGE, EXIT_DIVERGED, EXIT_INCOMPATIBLE, EXIT_NUMERICAL = 2, 3, 4, 5


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_USAGE):
        super().__init__(message)
        self.code = code


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def write_table(path: Path, rows: list[dict]) -> Path:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(rows[0].keys())
        for r in rows:
            w.writerow([_fmt(v) for v in r.values()])
    return path


def write_json(path: Path, obj) -> Path:
    path.write_text(json.dumps(obj, indent=2, default=_json_default) + "\n", encoding="utf-8")
    return path


def _json_default(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(type(x))


# -- config resolution -------------------------------------------------------

def resolve(args, command: str) -> tuple[dict, R.Recipe | None, dict | None]:
    """Defaults <- recipe <- config file <- --seed; returns (config, recipe, manifest)."""
    recipe = None
    cfg = C.defaults()
    manifest = None
    if getattr(args, "recipe", None):
        try:
            recipe = R.get(args.recipe)
        except KeyError as exc:
            raise CliError(str(exc.args[0])) from None
        if recipe.command != command:
            raise CliError(f"recipe {recipe.name!r} is for `{recipe.command}`, not `{command}`")
        cfg = C.merge_overrides(cfg, recipe.overrides)
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.exists():
            raise CliError(f"config file {path} not found")
        file_cfg, manifest = C.load_config(path)
        if manifest is not None:
            cfg = file_cfg
        else:
            raw = C.parse_yaml(path.read_text(encoding="utf-8")) or {}
            cfg = C.merge_overrides(cfg, raw)
    if getattr(args, "seed", None) is not None:
        cfg["seed"] = int(args.seed)
    return cfg, recipe, manifest


def out_dir(args, command: str, cfg: dict, label: str, extra: dict | None = None) -> Path:
    if args.out:
        d = Path(args.out)
    else:
        root = Path(os.environ.get(OUT_ENV_VAR, DEFAULT_OUT_ROOT))
        d = root / f"{command}-{label}-{content_hash(command, cfg, extra)[:10]}"
    d.mkdir(parents=True, exist_ok=True)
    return d


# -- simulate ------------------------------------------------------------------

def builtin_schedule(cfg: dict, env_cfg) -> np.ndarray:
    sim = cfg["simulate"]
    steps = sim["steps"] or env_cfg.steps_per_episode
    n_slots = env_cfg.system.n_control_slots
    kind = sim["schedule"]
    if kind == "zero":
        return np.zeros((steps, n_slots), dtype=complex)
    if kind == "constant":
        v = sim["constant"]
        if cfg["kind"] == "bipartite":
            if len(v) not in (1, 2):
                raise CliError("simulate.constant: bipartite takes [Re G] or [Re G, Im G]")
            g = v[0] + 1j * (v[1] if len(v) == 2 else 0.0)
            return np.full((steps, 1), g)
        if len(v) != n_slots:
            raise CliError(f"simulate.constant: need {n_slots} values [Omega_S, Omega_P]")
        return np.tile(np.array(v, dtype=complex), (steps, 1))
    if cfg["kind"] != "tripartite":
        raise CliError("simulate.schedule 'stirap' needs kind: tripartite")
    return stirap_pulses(cfg, steps).sample(env_cfg.dt).astype(complex)


def stirap_pulses(cfg: dict, steps: int) -> baselines.GaussianPulsePair:
    sim = cfg["simulate"]
    total = steps * cfg["env"]["dt_periods"] * PERIOD
    c_s = sim["pulse_center_s"] * total
    return baselines.GaussianPulsePair(sim["pulse_peak"], sim["pulse_peak"], c_s,
                                       c_s + sim["pulse_delay"] * total, sim["pulse_width"] * total, total)


def cmd_simulate(args) -> int:
    started = utc_now()
    cfg, recipe, _ = resolve(args, "simulate")
    env_cfg = C.build_env_config(cfg)
    extra = {}
    if args.schedule:
        try:
            src = read_trace(Path(args.schedule))
        except (OSError, TraceFormatError, ValueError, KeyError) as exc:
            raise CliError(f"schedule {args.schedule}: {exc}") from None
        controls, actions = src.controls, src.actions
        if controls.shape[1] != env_cfg.system.n_control_slots:
            raise CliError(f"schedule {args.schedule} has {controls.shape[1]} control slots, "
                           f"system needs {env_cfg.system.n_control_slots}")
        extra["schedule_sha256"] = file_digest(args.schedule)
    else:
        controls, actions = builtin_schedule(cfg, env_cfg), None
    d = out_dir(args, "simulate", cfg, recipe.name if recipe else cfg["kind"], extra)
    trace = replay(env_cfg, controls, actions)
    path = d / "trace.csv"
    write_trace(trace, path)
    write_manifest(d, "simulate", cfg, [path], extra, started)
    print(f"trace: {path}  ({len(trace)} steps, min quotient {trace.min_quotient:.4g}, "
          f"final {trace.target_quotient[-1]:.4g})")
    return 0


# -- baseline --------------------------------------------------------------------

def _sideband_chunk(payload):
    cfg, gs = payload
    b = cfg["baseline"]
    return baselines.sideband_sweep(C.build_system(cfg), gs, b["horizon_periods"], b["target_quotient"],
                                    cfg["env"]["dt_periods"]).entries


def _stirap_one(payload):
    cfg, omega = payload
    b = cfg["baseline"]
    system = C.build_system(cfg)
    dt_p = cfg["env"]["dt_periods"]
    steps = b["horizon_steps"] or baselines.stirap_horizon_steps(system, omega, dt_p)
    opt = baselines.stirap_optimize(system, omega, steps, dt_p, b["restarts"], cfg["seed"], b["optimize_peaks"])
    trace = baselines.stirap_run(system, opt.pulses, dt_p)
    return omega, steps, opt, trace


def _map(fn, items, workers: int):
    if workers > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def cmd_baseline(args) -> int:
    started = utc_now()
    cfg, recipe, manifest = resolve(args, "baseline")
    mode = args.mode or (recipe.mode if recipe else None) or (manifest or {}).get("extra", {}).get("mode")
    if mode is None:
        raise CliError("baseline needs a mode: sideband, stirap or limits")
    extra = {"mode": mode}
    b = cfg["baseline"]
    d = out_dir(args, "baseline", cfg, mode, extra)
    outputs = []
    if mode == "sideband":
        if cfg["kind"] != "bipartite":
            raise CliError("sideband baseline needs kind: bipartite")
        grid = baselines.sideband_grid(b["g_lo"], b["g_hi"], b["per_decade"])
        chunks = [(cfg, list(c)) for c in np.array_split(grid, max(1, min(args.workers, len(grid))))]
        entries = [e for part in _map(_sideband_chunk, chunks, args.workers) for e in part]
        result = baselines.SidebandSweepResult(sorted(entries, key=lambda e: e.G), b["target_quotient"])
        outputs.append(write_table(d / "sideband_table.csv", result.table()))
        summary = {"target_quotient": b["target_quotient"], "criterion": b["criterion"],
                   "best_min_quotient": min(e.min_quotient for e in result.entries)}
        for crit in ("settle", "first"):
            try:
                summary[f"tau_sb_{crit}_periods"] = baselines.sideband_time_limit(result, None, crit)
            except baselines.UnreachableTargetError as exc:
                summary[f"tau_sb_{crit}_periods"] = None
                summary["note"] = str(exc)
        summary["tau_sb_periods"] = summary[f"tau_sb_{b['criterion']}_periods"]
        outputs.append(write_json(d / "summary.json", summary))
        print(f"sideband: best min quotient {summary['best_min_quotient']:.3e}; "
              f"tau_SB ({b['criterion']}, target {b['target_quotient']:g}) = {summary['tau_sb_periods']} periods")
    elif mode == "stirap":
        if cfg["kind"] != "tripartite":
            raise CliError("stirap baseline needs kind: tripartite")
        rows = []
        for omega, steps, opt, trace in _map(_stirap_one, [(cfg, w) for w in b["omega_max"]], args.workers):
            omega_m = cfg["system"]["omega_m"]
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                t_lim = baselines.raman_time_limit(omega_m, omega, omega)
            tpath = d / f"stirap_O{omega:g}.csv"
            write_trace(trace, tpath)
            outputs.append(tpath)
            t3 = trace.time_to_quotient(1e-3)
            p = opt.pulses
            rows.append({
                "omega_max": omega, "tau_lim_periods": t_lim / PERIOD, "horizon_periods": steps * cfg["env"]["dt_periods"],
                "final_quotient": opt.final_quotient, "min_quotient": opt.min_quotient,
                "time_to_1e-3_periods": None if t3 is None else t3 / PERIOD,
                "heating": opt.heating, "cooled_3_orders": opt.final_quotient < 1e-3, "converged": opt.converged,
                "center_s": p.center_s, "center_p": p.center_p, "width": p.width,
                "peak_s": p.peak_s, "peak_p": p.peak_p,
            })
            flag = "HEATING" if opt.heating else ("cooled" if opt.final_quotient < 1e-3 else "no 3-order cooling")
            print(f"stirap Omega_max={omega:g}: final quotient {opt.final_quotient:.3e} "
                  f"(tau_lim {t_lim / PERIOD:.3g} periods, horizon {steps} steps) [{flag}]")
        outputs.append(write_table(d / "stirap_table.csv", rows))
    elif mode == "limits":
        rows = []
        for omega_m in b["limits_omega_m"]:
            for w in b["limits_omega"]:
                with warnings.catch_warnings(record=True) as caught:
                    warnings.simplefilter("always")
                    t_lim = baselines.raman_time_limit(omega_m, w, w)
                d_eff, w_eff = baselines.effective_two_mode(omega_m, w, w)
                rows.append({"omega_m": omega_m, "omega_s": w, "omega_p": w, "tau_lim": t_lim,
                             "tau_lim_periods": t_lim / PERIOD, "delta_eff": d_eff, "omega_eff": w_eff,
                             "large_detuning_ok": not caught})
                print(f"limits omega_m={omega_m:g} Omega={w:g}: tau_lim = {t_lim:.6g} "
                      f"({t_lim / PERIOD:.4g} periods)")
        outputs.append(write_table(d / "limits_table.csv", rows))
    else:
        raise CliError(f"unknown baseline mode {mode!r}")
    write_manifest(d, "baseline", cfg, outputs, extra, started)
    print(f"outputs in {d}")
    return 0


# -- train -----------------------------------------------------------------------

def _train_one(payload) -> tuple[str, int, str]:
    cfg, d, teacher = payload
    started = utc_now()
    d = Path(d)
    d.mkdir(parents=True, exist_ok=True)
    env_cfg = C.build_env_config(cfg)
    hp = C.build_hyperparams(cfg)
    extra = {}
    agent = None
    if teacher:
        extra["teacher_sha256"] = file_digest(teacher)
        agent = warm_start(Path(teacher), env_cfg, hp)
    best, curve, final = d / "best.ckpt", d / "curve.csv", d / "final.ckpt"
    trainer = Trainer(env_cfg, agent=agent, hp=hp, curve_path=curve, checkpoint_path=best,
                      checkpoint_meta={"run_config": cfg})
    code, msg = 0, ""
    try:
        result = trainer.run(C.build_schedule(cfg))
        msg = f"best eval score {result.best_score:.6g} at episode {result.best_episode}"
    except TrainingDivergedError as exc:
        code, msg = EXIT_DIVERGED, f"training halted, last good checkpoint kept:\n{exc}"
    ckpt.save(final, trainer.agent, env_hash=env_cfg.config_hash(), interface_hash=env_cfg.interface_hash(),
              env_config=env_cfg.to_dict(), metadata={"run_config": cfg})
    outputs = [p for p in (best, curve, final) if p.exists()]
    write_manifest(d, "train", cfg, outputs, extra, started)
    return str(d), code, msg


def cmd_train(args) -> int:
    cfg, recipe, manifest = resolve(args, "train")
    if recipe is not None and recipe.needs_teacher and not args.teacher:
        raise CliError(f"recipe {recipe.name!r} needs --teacher <checkpoint>")
    if args.teacher and not Path(args.teacher).exists():
        raise CliError(f"teacher checkpoint {args.teacher} not found")
    label = recipe.name if recipe else cfg["kind"]
    extra = {"teacher_sha256": file_digest(args.teacher)} if args.teacher else {}
    d = out_dir(args, "train", cfg, label, extra)
    if recipe is not None and recipe.sweep:
        jobs = [(C.merge_overrides(cfg, ov), str(d / suffix), args.teacher) for suffix, ov in recipe.sweep]
    else:
        jobs = [(cfg, str(d), args.teacher)]
    code = 0
    try:
        results = _map(_train_one, jobs, args.workers)
    except DimensionMismatchError as exc:
        raise CliError(str(exc), EXIT_INCOMPATIBLE) from None
    for run_dir, rc, msg in results:
        stream = sys.stderr if rc else sys.stdout
        print(f"{run_dir}: {msg}", file=stream)
        code = max(code, rc)
    return code


# -- evaluate --------------------------------------------------------------------

def cmd_evaluate(args) -> int:
    started = utc_now()
    try:
        agent, header = ckpt.load(args.checkpoint)
    except (OSError, ckpt.CheckpointError) as exc:
        raise CliError(f"{args.checkpoint}: {exc}", EXIT_INCOMPATIBLE) from None
    if args.config or args.recipe:
        cfg, _, _ = resolve(args, "train" if args.recipe else "evaluate")
    else:
        run_cfg = header.get("metadata", {}).get("run_config")
        if run_cfg is None:
            raise CliError("checkpoint carries no run config; pass --config or --recipe")
        cfg = C.validate(run_cfg)
        if args.seed is not None:
            cfg["seed"] = int(args.seed)
    if args.episodes is not None:
        cfg["evaluate"]["episodes"] = int(args.episodes)
    env_cfg = C.build_env_config(cfg)
    if header["interface_hash"] != env_cfg.interface_hash() or agent.obs_dim != env_cfg.obs_dim:
        raise CliError(f"checkpoint interface (obs={header['obs_dim']}, act={header['act_dim']}) does not "
                       f"match config (obs={env_cfg.obs_dim}, act={env_cfg.action_dim})", EXIT_INCOMPATIBLE)
    if header["env_hash"] != env_cfg.config_hash():
        if not args.force:
            raise CliError(f"checkpoint env hash {header['env_hash']} != config hash {env_cfg.config_hash()} "
                           "(use --force to evaluate anyway)", EXIT_INCOMPATIBLE)
        log.warning("evaluating checkpoint trained on a different environment config (--force)")
    extra = {"checkpoint_sha256": file_digest(args.checkpoint)}
    d = out_dir(args, "evaluate", cfg, cfg["kind"], extra)
    traces = evaluate(agent, env_cfg, cfg["evaluate"]["episodes"])
    target = cfg["evaluate"]["target_quotient"]
    outputs, episodes = [], []
    for k, tr in enumerate(traces):
        p = d / f"trace_ep{k}.csv"
        write_trace(tr, p)
        outputs.append(p)
        t_hit = tr.time_to_quotient(target)
        ep = {"episode": k, "net_reward": tr.net_reward, "mean_reward": tr.mean_reward,
              "min_quotient": tr.min_quotient, "time_of_min_periods": tr.time_of_min / PERIOD,
              "tau_drl_periods": None if t_hit is None else t_hit / PERIOD}
        if env_cfg.magnon_mode is not None and cfg["kind"] == "tripartite":
            ep["max_magnon_occupancy"] = float(tr.occupancies[:, env_cfg.magnon_mode].max())
        episodes.append(ep)
        if cfg["kind"] == "bipartite":
            g = tr.controls[:, 0]
            polar = [{"step": i, "t_periods": t / PERIOD, "re_G": z.real, "im_G": z.imag,
                      "abs_G": abs(z), "arg_G": float(np.angle(z))} for i, (t, z) in enumerate(zip(tr.times, g))]
            outputs.append(write_table(d / f"polar_ep{k}.csv", polar))
    summary = {"target_quotient": target, "control_max": cfg["env"]["control_max"], "kind": cfg["kind"],
               "episodes": episodes}
    outputs.append(write_json(d / "summary.json", summary))
    write_manifest(d, "evaluate", cfg, outputs, extra, started)
    for ep in episodes:
        print(f"episode {ep['episode']}: min quotient {ep['min_quotient']:.4g} at "
              f"{ep['time_of_min_periods']:.3g} periods; tau_DRL({target:g}) = {ep['tau_drl_periods']}")
    print(f"outputs in {d}")
    return 0


# -- export ----------------------------------------------------------------------

TRACE_SCHEMA_DOC = {
    "t_periods": "time in phonon periods 2 pi / omega_b",
    "t": "time in units of 1/omega_b",
    "n_<mode>": "occupancy <c^dag c> of each mode",
    "q_<mode>": "occupancy divided by the phonon bath occupancy n_T",
    "control<k>[_re|_im]": "control-slot value held over the step (units of omega_b)",
    "action<k>": "raw agent action in [-1, 1]",
    "reward": "per-step reward on the post-step state",
}
CURVE_SCHEMA_DOC = {
    "episode": "training episode index (0 = before training)",
    "env_steps": "cumulative environment steps",
    "net_reward": "sum of rewards over the episode",
    "mean_reward": "per-step mean reward",
    "mean_quotient": "mean phonon quotient over the episode",
    "min_quotient": "minimum phonon quotient over the episode",
    "eval_score": "mean net reward of deterministic evaluation episodes (NaN when not evaluated)",
    "eval_min_quotient": "mean min quotient of evaluation episodes",
    "alpha": "entropy temperature after the episode",
    "q1_loss": "mean critic-1 loss over the episode's updates",
    "q2_loss": "mean critic-2 loss",
    "actor_loss": "mean actor loss",
}


def _sniff(path: Path) -> str:
    if path.is_dir():
        return "run"
    head = path.read_text(encoding="utf-8").split("\n", 1)[0]
    if head.startswith("# magnocool-trace"):
        return "trace"
    if head == ",".join(CURVE_COLUMNS):
        return "curve"
    raise CliError(f"{path}: not a trace, learning curve or run directory")


def read_trace_csv(path) -> dict[str, np.ndarray]:
    """Parse an exported plain-CSV trace back into columns."""
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    body = np.array(rows[1:], dtype=float).reshape(-1, len(rows[0]))
    return {h: body[:, i] for i, h in enumerate(rows[0])}


def cmd_export(args) -> int:
    started = utc_now()
    d = Path(args.out or Path(os.environ.get(OUT_ENV_VAR, DEFAULT_OUT_ROOT)) / "export")
    d.mkdir(parents=True, exist_ok=True)
    inputs = [Path(p) for p in args.inputs]
    kinds = [_sniff(p) for p in inputs]
    outputs = []
    runs = [p for p, k in zip(inputs, kinds) if k == "run"]
    for p, kind in zip(inputs, kinds):
        if kind == "trace":
            try:
                tr = read_trace(p)
            except TraceFormatError as exc:
                raise CliError(f"{p}: {exc}", EXIT_INCOMPATIBLE) from None
            cols = tr.columns()
            if args.format == "csv":
                out = d / f"{p.stem}.csv"
                with open(out, "w", encoding="utf-8", newline="") as fh:
                    w = csv.writer(fh, lineterminator="\n")
                    w.writerow(cols.keys())
                    for row in zip(*cols.values()):
                        w.writerow([_fmt(float(v)) for v in row])
            else:
                out = d / f"{p.stem}.json"
                write_json(out, {"schema": "magnocool-trace", "version": TRACE_FORMAT_VERSION,
                                 "target": tr.mode_labels[tr.target_mode], "n_thermal": tr.n_thermal,
                                 "columns": {k: v.tolist() for k, v in cols.items()}})
            outputs += [out, write_json(d / f"{out.name}.schema.json",
                                        {"schema": "magnocool-trace", "version": TRACE_FORMAT_VERSION,
                                         "columns": TRACE_SCHEMA_DOC})]
        elif kind == "curve":
            rows = read_curve(p)
            if args.format == "json":
                out = write_json(d / f"{p.stem}.json", {"schema": "magnocool-curve", "version": 1,
                                                        "records": [_nan_to_none(r) for r in rows]})
            else:
                out = write_table(d / f"{p.stem}.csv", rows)
            outputs += [out, write_json(d / f"{out.name}.schema.json",
                                        {"schema": "magnocool-curve", "version": 1, "columns": CURVE_SCHEMA_DOC})]
    if runs:
        outputs += export_sweep(runs, d, args.format)
    write_manifest(d, "export", {"seed": None, "inputs": [str(p) for p in inputs], "format": args.format},
                   outputs, {"input_sha256": {str(p): file_digest(p) for p in inputs if p.is_file()}}, started)
    for o in outputs:
        print(o)
    return 0


def _nan_to_none(row: dict) -> dict:
    return {k: (None if isinstance(v, float) and np.isnan(v) else v) for k, v in row.items()}


def export_sweep(run_dirs, d: Path, fmt: str) -> list[Path]:
    """Long-format table of evaluation traces from several runs, keyed by control_max."""
    rows = []
    for rd in run_dirs:
        m = read_manifest(rd)
        cfg = C.validate(m["config"])
        key = cfg["env"]["control_max"]
        if key is None:
            key = 5.0 if cfg["kind"] == "bipartite" else 10.0
        for tf in sorted(Path(rd).glob("trace*.csv")):
            tr = read_trace(tf)
            cols = tr.columns()
            for i in range(len(tr)):
                row = {"control_max": key, "run": Path(rd).name, "trace": tf.stem, "step": i}
                row.update({k: float(v[i]) for k, v in cols.items()})
                rows.append(row)
    if not rows:
        raise CliError("no trace files found in the given run directories")
    keys = list(dict.fromkeys(k for r in rows for k in r))
    rows = [{k: r.get(k) for k in keys} for r in rows]
    rows.sort(key=lambda r: (r["control_max"], r["run"], r["trace"], r["step"]))
    if fmt == "csv":
        out = write_table(d / "sweep_long.csv", rows)
    else:
        out = write_json(d / "sweep_long.json", {"schema": "magnocool-sweep", "version": 1, "records": rows})
    return [out, write_json(d / f"{out.name}.schema.json",
                            {"schema": "magnocool-sweep", "version": 1, "key": "control_max",
                             "columns": {"control_max": "G_max/sqrt2 (bipartite) or Omega_max (tripartite)",
                                         "run": "run directory name", "trace": "trace file stem",
                                         "step": "control step index", **TRACE_SCHEMA_DOC}})]


# -- recipes ---------------------------------------------------------------------

def cmd_recipes(args) -> int:
    if args.action == "list":
        width = max(len(n) for n in R.RECIPES)
        for r in R.RECIPES.values():
            mode = f" {r.mode}" if r.mode else ""
            print(f"{r.name:<{width}}  [{r.figure}]  {r.command}{mode}: {r.description}")
    elif args.action == "show":
        if not args.name:
            raise CliError("recipes show needs a recipe name")
        try:
            r = R.get(args.name)
        except KeyError as exc:
            raise CliError(str(exc.args[0])) from None
        print(f"# {r.name} [{r.figure}] -> magnocool {r.command}" + (f" {r.mode}" if r.mode else ""))
        print(C.dump_yaml(C.merge_overrides(C.defaults(), r.overrides)), end="")
    else:
        print(C.describe_defaults(), end="")
    return 0


# -- entry point -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="magnocool", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, recipe=True):
        sp.add_argument("--config", help="YAML config or a run manifest.json to re-execute")
        if recipe:
            sp.add_argument("--recipe", help="builtin recipe name (see `magnocool recipes list`)")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", help=f"output directory (default under ${OUT_ENV_VAR} or ./{DEFAULT_OUT_ROOT})")
        sp.add_argument("--workers", type=int, default=1)

    sp = sub.add_parser("simulate", help="propagate moments under a control schedule")
    common(sp)
    sp.add_argument("--schedule", help="trace file whose control columns are replayed")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("baseline", help="sideband sweep, STIRAP pulses or Raman limits")
    sp.add_argument("mode", nargs="?", choices=("sideband", "stirap", "limits"))
    common(sp)
    sp.set_defaults(func=cmd_baseline)

    sp = sub.add_parser("train", help="train a soft actor-critic agent")
    common(sp)
    sp.add_argument("--teacher", help="checkpoint of an auxiliary-system agent to warm-start from")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("evaluate", help="deterministic rollouts of a checkpoint")
    sp.add_argument("checkpoint")
    common(sp)
    sp.add_argument("-n", "--episodes", type=int)
    sp.add_argument("--force", action="store_true", help="evaluate even if the env config hash differs")
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("export", help="convert traces, curves and run sweeps to csv/json")
    sp.add_argument("inputs", nargs="+")
    sp.add_argument("--format", choices=("csv", "json"), default="csv")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_export)

    sp = sub.add_parser("recipes", help="list or show builtin recipes, or print config defaults")
    sp.add_argument("action", nargs="?", choices=("list", "show", "defaults"), default="list")
    sp.add_argument("name", nargs="?")
    sp.set_defaults(func=cmd_recipes)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"magnocool {args.command}: error: {exc}", file=sys.stderr)
        return exc.code
    except C.ConfigError as exc:
        print(f"magnocool {args.command}: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ArithmeticError as exc:
        print(f"magnocool {args.command}: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"magnocool {args.command}: invalid parameters: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
