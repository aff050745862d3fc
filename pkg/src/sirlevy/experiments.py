"""End-to-end simulation studies: data generation, batch estimation, reports.

All persistence lives here.  Trajectories go to CSV (header ``t,X,Y,Z``, 17
significant digits, exact float64 round-trip) with a flat ``key=value``
sidecar carrying the generating parameters; run configuration uses the same
flat text format.  Every random draw descends from the single master seed
through named spawn keys, so a rerun with the same seed and config reproduces
every output file byte for byte, independent of worker scheduling.
"""

from __future__ import annotations

import csv
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, replace

import numpy as np

from .contrast import ContrastConfig, SingularDesignError
from .estimator import BoxConstraints, EstimationError, EstimatorConfig, lsgd_estimate
from .levy import LevyPathNoise, sample_lambda
from .models import NUMBERS_X0, PROPORTIONS_X0, SirParams, get_model
from .simulate import SimulationError, Trajectory, predict_ensemble, simulate_sde, solve_ode
from .transmission import PERIOD_FLOOR, ThetaParams

FLOAT_FMT = "{:.17g}"

# parameter point exercised by the bundled prediction studies and tests
REFERENCE_THETA = ThetaParams(0.26836304, 0.15114833, 0.0621514, 0.096762)


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return FLOAT_FMT.format(float(x))
    return str(x)


# ---------------------------------------------------------------------------
# flat key=value + trajectory CSV persistence


def save_keyvalues(mapping: dict, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for key, val in mapping.items():
            fh.write(f"{key}={_fmt(val)}\n")


def load_keyvalues(path: str) -> dict[str, str]:
    out: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, val = line.partition("=")
            out[key.strip()] = val.strip()
    return out


def save_trajectory(traj: Trajectory, path: str, meta_path: str | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t,X,Y,Z\n")
        for t, (x, y, z) in zip(traj.times, traj.states):
            fh.write(f"{_fmt(t)},{_fmt(x)},{_fmt(y)},{_fmt(z)}\n")
    if meta_path is not None:
        save_trajectory_meta(traj, meta_path)


def save_trajectory_meta(traj: Trajectory, path: str) -> None:
    meta: dict = {"model": traj.model}
    if traj.theta is not None:
        th = traj.theta
        meta["theta0_period"] = th.period
        meta["theta0_base"] = th.base
        for k, (c, s) in enumerate(zip(th.cos_coeffs, th.sin_coeffs), start=1):
            meta[f"theta0_cos{k}"] = c
            meta[f"theta0_sin{k}"] = s
    if traj.lam is not None:
        meta["lambda"] = traj.lam
    if traj.seed is not None:
        meta["seed"] = traj.seed
    if traj.params is not None:
        p = traj.params
        meta.update(birth=p.birth, death=p.death, gamma=p.gamma, sigma=p.sigma, eps=p.eps)
    meta["clamp_count"] = traj.clamp_count
    for key, val in traj.meta.items():
        meta[f"meta_{key}"] = val
    save_keyvalues(meta, path)


def _theta_from_meta(meta: dict[str, str]) -> ThetaParams | None:
    if "theta0_period" not in meta:
        return None
    cos, sin = [], []
    k = 1
    while f"theta0_cos{k}" in meta:
        cos.append(float(meta[f"theta0_cos{k}"]))
        sin.append(float(meta[f"theta0_sin{k}"]))
        k += 1
    return ThetaParams(float(meta["theta0_period"]), float(meta["theta0_base"]), tuple(cos), tuple(sin))


def load_trajectory(path: str, meta_path: str | None = None) -> Trajectory:
    rows = []
    with open(path, encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["t", "X", "Y", "Z"]:
            raise ValueError(f"unexpected trajectory header {header} in {path}")
        for row in reader:
            rows.append([float(v) for v in row])
    arr = np.asarray(rows)
    model = "numbers"
    theta = params = None
    lam = seed = None
    clamps = 0
    if meta_path is not None and os.path.exists(meta_path):
        meta = load_keyvalues(meta_path)
        model = meta.get("model", model)
        theta = _theta_from_meta(meta)
        if "birth" in meta:
            params = SirParams(
                birth=float(meta["birth"]),
                death=float(meta["death"]),
                gamma=float(meta["gamma"]),
                sigma=float(meta["sigma"]),
                eps=float(meta.get("eps", 0.0)),
            )
        lam = float(meta["lambda"]) if "lambda" in meta else None
        seed = int(meta["seed"]) if "seed" in meta else None
        clamps = int(meta.get("clamp_count", 0))
    return Trajectory(
        times=arr[:, 0],
        states=arr[:, 1:4],
        model=model,
        theta=theta,
        params=params,
        seed=seed,
        lam=lam,
        clamp_count=clamps,
    )


# ---------------------------------------------------------------------------
# run configuration


@dataclass(frozen=True)
class RunConfig:
    """Everything one simulation study needs; round-trips through flat text."""

    model: str = "numbers"
    eps_list: tuple[float, ...] = (0.3, 0.1, 0.01, 0.001)
    n_obs: int = 100
    n_datasets: int = 100  # desk scale; --full restores 1000
    substeps: int = 10
    birth: float = 0.018
    death: float = 0.00042
    gamma: float = 0.07142
    sigma: float = 0.5
    x0: tuple[float, float, float] = NUMBERS_X0
    cells: int = 20
    inner_solver: str = "linear"
    contrast_form: str = "weighted"
    order: int = 1
    seed: int = 0
    jobs: int = 1

    def __post_init__(self):
        get_model(self.model)
        if self.model == "proportions" and self.contrast_form != "plain":
            # the proportional model's noise matrix is rank one
            object.__setattr__(self, "contrast_form", "plain")

    @classmethod
    def proportions_defaults(cls, **overrides) -> "RunConfig":
        base = dict(
            model="proportions",
            birth=0.0,
            death=0.0,
            x0=PROPORTIONS_X0,
            contrast_form="plain",
        )
        base.update(overrides)
        return cls(**base)

    def params(self, eps: float) -> SirParams:
        return SirParams(birth=self.birth, death=self.death, gamma=self.gamma, sigma=self.sigma, eps=eps)

    def estimator(self) -> EstimatorConfig:
        return EstimatorConfig(cells=self.cells, inner_solver=self.inner_solver, order=self.order)

    def contrast(self, eps: float) -> ContrastConfig:
        return ContrastConfig(form=self.contrast_form, eps=eps)

    def box(self) -> BoxConstraints:
        return BoxConstraints()

    def save(self, path: str) -> None:
        mapping = {}
        for f in fields(self):
            val = getattr(self, f.name)
            if isinstance(val, tuple):
                mapping[f.name] = ",".join(_fmt(v) for v in val)
            else:
                mapping[f.name] = val
        save_keyvalues(mapping, path)

    @classmethod
    def load(cls, path: str) -> "RunConfig":
        raw = load_keyvalues(path)
        kwargs = {}
        for f in fields(cls):
            if f.name not in raw:
                continue
            text = raw[f.name]
            if f.name == "eps_list":
                kwargs[f.name] = tuple(float(v) for v in text.split(","))
            elif f.name == "x0":
                kwargs[f.name] = tuple(float(v) for v in text.split(","))
            elif f.type in ("int",):
                kwargs[f.name] = int(text)
            elif f.type in ("float",):
                kwargs[f.name] = float(text)
            else:
                kwargs[f.name] = text
        return cls(**kwargs)


@dataclass
class DatasetRecord:
    dataset_id: int
    eps: float
    theta0: ThetaParams
    lam: float
    path: str
    meta_path: str
    model: str


def sample_true_theta(rng: np.random.Generator, order: int = 1) -> ThetaParams:
    """True-parameter sampler of the simulation studies.

    period ~ U(0, 1) clamped above the evaluation floor, base ~ U(0.1, 0.8),
    each oscillation coefficient ~ U(0, base / sqrt(2)) so the transmission
    rate stays nonnegative.
    """
    period = max(float(rng.uniform(0.0, 1.0)), PERIOD_FLOOR)
    base = float(rng.uniform(0.1, 0.8))
    hi = base / np.sqrt(2.0)
    cos = tuple(float(rng.uniform(0.0, hi)) for _ in range(order))
    sin = tuple(float(rng.uniform(0.0, hi)) for _ in range(order))
    return ThetaParams(period, base, cos, sin)


def _eps_tag(eps: float) -> str:
    return f"{eps:g}"


def generate_datasets(cfg: RunConfig, out_dir: str) -> list[DatasetRecord]:
    """Simulate n_datasets trajectories per eps; persist CSV + sidecar + index.

    A dataset whose simulation fails is skipped (recorded in the index as
    missing) and generation continues.
    """
    os.makedirs(out_dir, exist_ok=True)
    cfg.save(os.path.join(out_dir, "config.txt"))
    model = get_model(cfg.model)
    records: list[DatasetRecord] = []
    index_rows = []
    for ei, eps in enumerate(cfg.eps_list):
        eps_dir = os.path.join(out_dir, f"eps_{_eps_tag(eps)}")
        os.makedirs(eps_dir, exist_ok=True)
        params = cfg.params(eps)
        for i in range(cfg.n_datasets):
            # dataset i shares its true parameters and driving noise across
            # the eps sweep (common random numbers), so per-level medians
            # compare like with like at desk scale
            draw_rng = np.random.Generator(
                np.random.Philox(np.random.SeedSequence(entropy=cfg.seed, spawn_key=(i, 0)))
            )
            theta0 = sample_true_theta(draw_rng, cfg.order)
            lam = sample_lambda(draw_rng)
            noise = LevyPathNoise(
                np.random.SeedSequence(entropy=cfg.seed, spawn_key=(i, 1)), lam, 1.0, model.driver_dim
            )
            try:
                traj = simulate_sde(model, theta0, params, cfg.x0, 1.0, cfg.n_obs, noise, cfg.substeps)
            except SimulationError as err:
                index_rows.append([_eps_tag(eps), i, "FAILED", str(err)])
                continue
            path = os.path.join(eps_dir, f"dataset_{i:05d}.csv")
            meta_path = os.path.join(eps_dir, f"dataset_{i:05d}.meta")
            save_trajectory(traj, path, meta_path)
            records.append(DatasetRecord(i, eps, theta0, lam, path, meta_path, cfg.model))
            index_rows.append([_eps_tag(eps), i, os.path.relpath(path, out_dir), ""])
    with open(os.path.join(out_dir, "datasets.csv"), "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["eps", "dataset", "file", "error"])
        writer.writerows(index_rows)
    return records


def load_records(out_dir: str) -> list[DatasetRecord]:
    """Rebuild dataset records from a generated output tree."""
    index_path = os.path.join(out_dir, "datasets.csv")
    if not os.path.exists(index_path):
        raise FileNotFoundError(f"no dataset index at {index_path}")
    records = []
    with open(index_path, encoding="utf-8") as fh:
        reader = csv.reader(fh)
        next(reader)
        for eps_tag, ds, file, _err in reader:
            if file == "FAILED":
                continue
            path = os.path.join(out_dir, file)
            meta_path = os.path.splitext(path)[0] + ".meta"
            meta = load_keyvalues(meta_path)
            theta0 = _theta_from_meta(meta)
            records.append(
                DatasetRecord(
                    int(ds), float(eps_tag), theta0, float(meta["lambda"]), path, meta_path, meta["model"]
                )
            )
    return records


def _estimate_one(args) -> tuple[float, int, list]:
    record_path, record_meta, dataset_id, eps, cfg = args
    traj = load_trajectory(record_path, record_meta)
    params = cfg.params(eps)
    # common random numbers across the sweep here too: the line-search cell
    # draws for dataset i are shared between eps levels
    est_rng = np.random.Generator(
        np.random.Philox(np.random.SeedSequence(entropy=cfg.seed, spawn_key=(dataset_id, 7)))
    )
    theta0 = traj.theta
    true_vec = theta0.to_vector()
    try:
        result = lsgd_estimate(traj, cfg.estimator(), cfg.box(), cfg.contrast(eps), seed=est_rng, params=params)
        est_vec = result.theta.to_vector()
        row = [dataset_id]
        for tv, ev in zip(true_vec, est_vec):
            row.extend([tv, ev])
        row.extend([result.objective, result.converged, ""])
    except (EstimationError, SingularDesignError, np.linalg.LinAlgError) as err:
        row = [dataset_id]
        for tv in true_vec:
            row.extend([tv, float("nan")])
        row.extend([float("nan"), False, str(err)])
    return eps, dataset_id, row


def _result_header(order: int) -> list[str]:
    names = ["period", "base"] + [f"cos{k}" for k in range(1, order + 1)] + [
        f"sin{k}" for k in range(1, order + 1)
    ]
    cols = ["dataset"]
    for name in names:
        cols.extend([f"true_{name}", f"est_{name}"])
    cols.extend(["objective", "converged", "error"])
    return cols


def batch_estimate(records: list[DatasetRecord], cfg: RunConfig, out_dir: str) -> dict[float, str]:
    """Estimate every dataset; one results CSV per eps, rows ordered by dataset id."""
    os.makedirs(out_dir, exist_ok=True)
    tasks = [(r.path, r.meta_path, r.dataset_id, r.eps, cfg) for r in records]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            outcomes = list(pool.map(_estimate_one, tasks, chunksize=8))
    else:
        outcomes = [_estimate_one(t) for t in tasks]

    by_eps: dict[float, list] = {}
    for eps, dataset_id, row in outcomes:
        by_eps.setdefault(eps, []).append((dataset_id, row))
    paths = {}
    header = _result_header(cfg.order)
    for eps in cfg.eps_list:
        if eps not in by_eps:
            continue
        rows = [row for _, row in sorted(by_eps[eps], key=lambda t: t[0])]
        path = os.path.join(out_dir, f"results_eps_{_eps_tag(eps)}.csv")
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([_fmt(v) for v in row])
        paths[eps] = path
    return paths


def _sample_prediction_x0(rng: np.random.Generator, model_tag: str) -> tuple[float, float, float]:
    if model_tag == "numbers":
        return (float(rng.uniform(1, 4)), float(rng.uniform(0.1, 2)), float(rng.uniform(0.1, 1)))
    # uniform point of the probability simplex
    gaps = np.sort(rng.uniform(0.0, 1.0, size=2))
    return (float(gaps[0]), float(gaps[1] - gaps[0]), float(1.0 - gaps[1]))


def prediction_study(
    theta0: ThetaParams,
    cfg: RunConfig,
    out_dir: str,
    eps_values: tuple[float, ...] = (0.3, 0.001),
    n_paths: int = 100,
    predict_horizon: float = 3.0,
) -> dict:
    """Estimate at each eps from fresh data, then compare forward ensembles.

    Writes a parameter comparison table (one true row, one row per eps), the
    drift-only path of the true parameter on the prediction window, and the
    100-path ensemble mean for each estimate, all from one freshly drawn
    initial state.
    """
    os.makedirs(out_dir, exist_ok=True)
    model = get_model(cfg.model)
    names = ["period", "base"] + [f"cos{k}" for k in range(1, cfg.order + 1)] + [
        f"sin{k}" for k in range(1, cfg.order + 1)
    ]
    estimates: dict[float, ThetaParams] = {}
    for ei, eps in enumerate(eps_values):
        params = cfg.params(eps)
        rng = np.random.Generator(
            np.random.Philox(np.random.SeedSequence(entropy=cfg.seed, spawn_key=(50, ei)))
        )
        fit_x0 = _sample_prediction_x0(rng, model.tag)
        lam = sample_lambda(rng)
        noise = LevyPathNoise(
            np.random.SeedSequence(entropy=cfg.seed, spawn_key=(51, ei)), lam, 1.0, model.driver_dim
        )
        traj = simulate_sde(model, theta0, params, fit_x0, 1.0, cfg.n_obs, noise, cfg.substeps)
        result = lsgd_estimate(
            traj,
            cfg.estimator(),
            cfg.box(),
            cfg.contrast(eps),
            seed=np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy=cfg.seed, spawn_key=(52, ei)))),
            params=params,
        )
        estimates[eps] = result.theta

    table_path = os.path.join(out_dir, "parameter_table.csv")
    with open(table_path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["row", *names])
        writer.writerow(["true", *(_fmt(v) for v in theta0.to_vector())])
        for eps in eps_values:
            writer.writerow([f"estimate_eps_{_eps_tag(eps)}", *(_fmt(v) for v in estimates[eps].to_vector())])

    pred_rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy=cfg.seed, spawn_key=(53,))))
    pred_x0 = _sample_prediction_x0(pred_rng, model.tag)
    n_pred_obs = max(1, round(cfg.n_obs * predict_horizon))
    det = solve_ode(model, theta0, cfg.params(0.0), pred_x0, predict_horizon, n_pred_obs)
    det_path = os.path.join(out_dir, "deterministic_true.csv")
    save_trajectory(det, det_path)
    ensemble_paths = {}
    for ei, eps in enumerate(eps_values):
        mean = predict_ensemble(
            model,
            estimates[eps],
            cfg.params(eps),
            pred_x0,
            horizon=predict_horizon,
            n_obs=n_pred_obs,
            n_paths=n_paths,
            seed=int(
                np.random.SeedSequence(entropy=cfg.seed, spawn_key=(54, ei)).generate_state(1, np.uint32)[0]
            ),
            substeps=cfg.substeps,
        )
        path = os.path.join(out_dir, f"ensemble_eps_{_eps_tag(eps)}.csv")
        save_trajectory(mean, path)
        ensemble_paths[eps] = path
    return {
        "estimates": estimates,
        "table": table_path,
        "deterministic": det_path,
        "ensembles": ensemble_paths,
        "x0": pred_x0,
    }


def _read_results(path: str):
    with open(path, encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    return header, rows


def emit_reports(out_dir: str) -> dict:
    """Per-eps error summaries, the consistency-trend verdict, scatter CSVs.

    Expects the directory produced by generate/estimate (config.txt plus
    results_eps_*.csv); raises FileNotFoundError naming whatever is missing.
    """
    cfg_path = os.path.join(out_dir, "config.txt")
    if not os.path.exists(cfg_path):
        raise FileNotFoundError(f"missing {cfg_path}; run generation first")
    cfg = RunConfig.load(cfg_path)
    missing = []
    result_paths = {}
    for eps in cfg.eps_list:
        path = os.path.join(out_dir, f"results_eps_{_eps_tag(eps)}.csv")
        if os.path.exists(path):
            result_paths[eps] = path
        else:
            missing.append(path)
    if missing:
        raise FileNotFoundError(f"missing results files: {', '.join(missing)}")

    names = ["period", "base"] + [f"cos{k}" for k in range(1, cfg.order + 1)] + [
        f"sin{k}" for k in range(1, cfg.order + 1)
    ]
    summary_rows = []
    medians_l2 = {}
    for eps in cfg.eps_list:
        header, rows = _read_results(result_paths[eps])
        col = {name: header.index(name) for name in header}
        errs = {name: [] for name in names}
        l2 = []
        n_failed = 0
        for row in rows:
            if row[col["error"]]:
                n_failed += 1
                continue
            sq = 0.0
            for name in names:
                diff = float(row[col[f"est_{name}"]]) - float(row[col[f"true_{name}"]])
                errs[name].append(abs(diff))
                sq += diff * diff
            l2.append(np.sqrt(sq))
        med_l2 = float(np.median(l2)) if l2 else float("nan")
        medians_l2[eps] = med_l2
        srow = {"eps": eps, "n": len(l2), "failed": n_failed, "median_l2": med_l2}
        for name in names:
            arr = np.asarray(errs[name])
            srow[f"median_abs_{name}"] = float(np.median(arr)) if arr.size else float("nan")
            if arr.size:
                q75, q25 = np.percentile(arr, [75, 25])
                srow[f"iqr_abs_{name}"] = float(q75 - q25)
            else:
                srow[f"iqr_abs_{name}"] = float("nan")
        summary_rows.append(srow)

        scatter_path = os.path.join(out_dir, f"scatter_eps_{_eps_tag(eps)}.csv")
        with open(scatter_path, "w", encoding="utf-8", newline="\n") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["parameter", "true", "estimate"])
            for row in rows:
                if row[col["error"]]:
                    continue
                for name in names:
                    writer.writerow([name, row[col[f"true_{name}"]], row[col[f"est_{name}"]]])

    summary_path = os.path.join(out_dir, "summary.csv")
    keys = list(summary_rows[0].keys())
    with open(summary_path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(keys)
        for srow in summary_rows:
            writer.writerow([_fmt(srow[k]) for k in keys])

    # consistency trend: medians ordered by decreasing eps must not increase,
    # and the largest-to-smallest ratio must reach 5x
    eps_sorted = sorted(cfg.eps_list, reverse=True)
    meds = [medians_l2[e] for e in eps_sorted]
    non_increasing = all(a >= b or np.isnan(a) or np.isnan(b) for a, b in zip(meds, meds[1:]))
    ratio = meds[0] / meds[-1] if meds[-1] > 0 else float("inf")
    verdict = non_increasing and ratio >= 5.0
    verdict_path = os.path.join(out_dir, "consistency_verdict.txt")
    with open(verdict_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"non_increasing={_fmt(non_increasing)}\n")
        fh.write(f"ratio_largest_to_smallest={_fmt(ratio)}\n")
        fh.write(f"verdict={'PASS' if verdict else 'FAIL'}\n")
    return {
        "summary": summary_path,
        "verdict": verdict_path,
        "medians_l2": medians_l2,
        "consistency_pass": bool(verdict),
        "ratio": float(ratio),
    }
