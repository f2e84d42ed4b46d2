"""Experiment runner: analyze a JSON config, reproduce a catalog figure, or
run the full analytic-vs-Monte-Carlo validation suite.

Outputs are CSV tables plus a generated gnuplot script (no plotting
dependency), and a run manifest with per-output checksums.  Exit codes:
0 ok, 1 validation failure, 2 config error, 3 numerical failure.
"""

import argparse
import hashlib
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .core import ToleranceError, theta_db, theta_from_db, theta_from_mh, theta_mh
from .pointprocess import GPP, MCP, PPP, NetworkModel
from .simengine import SimConfig
from . import validate as _validate

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Config schema
# ---------------------------------------------------------------------------

_SIM_KEYS = {"trials", "master_seed", "window_radius", "worker_hint"}
_GRID_KEYS = {"kind", "start", "stop", "num", "values"}
_TOP_KEYS = {"version", "experiment", "params", "theta_grid", "sim", "output_dir"}


def _require_keys(obj, allowed, where):
    unknown = set(obj) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")


def parse_config(raw):
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    _require_keys(raw, _TOP_KEYS, "config")
    if raw.get("version") != 1:
        raise ConfigError("config version must be 1")
    if "experiment" not in raw:
        raise ConfigError("config needs an 'experiment' id")
    sim_raw = raw.get("sim", {})
    _require_keys(sim_raw, _SIM_KEYS, "sim")
    worker_hint = sim_raw.get("worker_hint")
    if worker_hint is None:
        worker_hint = int(os.environ.get("STOCHGEO_THREADS", "1"))
    sim = SimConfig(
        trials=int(sim_raw.get("trials", 10000)),
        master_seed=int(sim_raw.get("master_seed", 2024)),
        window_radius=sim_raw.get("window_radius"),
        worker_hint=worker_hint,
    )
    grid = None
    if "theta_grid" in raw:
        g = raw["theta_grid"]
        _require_keys(g, _GRID_KEYS, "theta_grid")
        kind = g.get("kind", "db")
        if kind not in ("db", "linear", "mh"):
            raise ConfigError("theta_grid.kind must be db, linear or mh")
        if "values" in g:
            vals = np.asarray(g["values"], dtype=float)
        else:
            try:
                vals = np.linspace(float(g["start"]), float(g["stop"]), int(g["num"]))
            except KeyError as e:
                raise ConfigError(f"theta_grid missing {e}")
        if kind == "db":
            grid = theta_from_db(vals)
        elif kind == "mh":
            grid = theta_from_mh(vals)
        else:
            grid = vals
        if np.any(grid <= 0):
            raise ConfigError("theta grid must be positive")
    return {
        "experiment": raw["experiment"],
        "params": raw.get("params", {}),
        "theta_grid": grid,
        "sim": sim,
        "output_dir": raw.get("output_dir", "."),
        "echo": raw,
    }


# ---------------------------------------------------------------------------
# Output helpers
# ---------------------------------------------------------------------------


def _fmt(x):
    if isinstance(x, float):
        return repr(x)
    return str(x)


def write_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_curve_csv(path, theta_grid, columns):
    """Standard curve table: theta in linear, dB and MH plus value columns."""
    header = ["theta_linear", "theta_db", "theta_mh", *columns.keys()]
    rows = []
    for i, t in enumerate(theta_grid):
        row = [float(t), float(theta_db(t)), float(theta_mh(t))]
        row.extend(float(col[i]) for col in columns.values())
        rows.append(row)
    write_csv(path, header, rows)


def write_estimates_csv(path, entries):
    """Estimate table with the `param,mean,stderr,n,seed` contract."""
    rows = [[k, e.mean, e.stderr, e.n, e.seed] for k, e in entries]
    write_csv(path, ["param", "mean", "stderr", "n", "seed"], rows)


def write_gnuplot(path, csv_files, title, ylabel="probability", logx=True):
    lines = [
        "set datafile separator ','",
        f"set title '{title}'",
        "set xlabel 'SIR threshold (dB)'",
        f"set ylabel '{ylabel}'",
        "set key below",
        "set grid",
    ]
    plots = []
    for fname, cols in csv_files:
        for idx, label in cols:
            plots.append(f"'{fname}' using 2:{idx} with linespoints title '{label}'")
    lines.append("plot " + ", \\\n     ".join(plots))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_dir, config_echo, outputs, seed, t_start):
    manifest = {
        "tool": "stochgeo",
        "version": __version__,
        "config": config_echo,
        "master_seed": seed,
        "wall_clock_s": round(time.time() - t_start, 3),
        "outputs": {os.path.basename(p): _sha256(p) for p in outputs},
    }
    tmp = os.path.join(out_dir, "manifest.json.tmp")
    final = os.path.join(out_dir, "manifest.json")
    with open(tmp, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, final)
    return final


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------


def _model_from_params(params, require_link=False):
    kind = params.get("field", "ppp")
    alpha = float(params.get("alpha", 4.0))
    r_t = params.get("r_t")
    if kind == "ppp":
        field = PPP(float(params.get("density", 0.1)))
    elif kind == "mcp":
        field = MCP(
            float(params.get("parent_density", 0.02)),
            float(params.get("mean_daughters", 5.0)),
            float(params.get("cluster_radius", 1.0)),
        )
    elif kind == "gpp":
        field = GPP(float(params.get("density", 0.1)), float(params.get("beta", 1.0)))
    else:
        raise ConfigError(f"unknown field kind: {kind}")
    if require_link and r_t is None:
        raise ConfigError("this experiment needs params.r_t")
    return NetworkModel(field, alpha=alpha, link_distance=r_t)


def _exp_moments_downlink(cfg, out_dir):
    from . import simengine, sir_analysis

    grid = cfg["theta_grid"]
    if grid is None:
        raise ConfigError("moments_downlink needs a theta_grid")
    p = cfg["params"]
    alpha = float(p.get("alpha", 4.0))
    b = float(p.get("b", 1.0))
    density = float(p.get("density", 1.0))
    model = NetworkModel(PPP(density), alpha=alpha)
    ana, mc_mean, mc_err = [], [], []
    for t in grid:
        ana.append(sir_analysis.moments_downlink_ppp(b, float(t), alpha))
        est = simengine.estimate_moment(model, b, float(t), "downlink", cfg["sim"])
        mc_mean.append(est.mean)
        mc_err.append(est.stderr)
    path = os.path.join(out_dir, "moments_downlink.csv")
    write_curve_csv(
        path, grid, {"analytic": ana, "mc_mean": mc_mean, "mc_stderr": mc_err}
    )
    gp = os.path.join(out_dir, "moments_downlink.gp")
    write_gnuplot(gp, [("moments_downlink.csv", [(4, "analytic"), (5, "simulation")])],
                  "Downlink success probability")
    return [path, gp]


def _exp_moments_adhoc(cfg, out_dir):
    from . import simengine, sir_analysis

    grid = cfg["theta_grid"]
    if grid is None:
        raise ConfigError("moments_adhoc needs a theta_grid")
    model = _model_from_params(cfg["params"], require_link=True)
    b = float(cfg["params"].get("b", 1.0))
    ana, mc_mean, mc_err = [], [], []
    for t in grid:
        ana.append(sir_analysis.moments_adhoc(model, b, float(t)))
        est = simengine.estimate_moment(model, b, float(t), "adhoc", cfg["sim"])
        mc_mean.append(est.mean)
        mc_err.append(est.stderr)
    path = os.path.join(out_dir, "moments_adhoc.csv")
    write_curve_csv(path, grid, {"analytic": ana, "mc_mean": mc_mean, "mc_stderr": mc_err})
    gp = os.path.join(out_dir, "moments_adhoc.gp")
    write_gnuplot(gp, [("moments_adhoc.csv", [(4, "analytic"), (5, "simulation")])],
                  "Ad hoc success probability")
    return [path, gp]


def _exp_meta(cfg, out_dir):
    from . import simengine, sir_analysis

    p = cfg["params"]
    model = _model_from_params(p, require_link=True)
    theta = float(p.get("theta", 1.0))
    x_grid = np.asarray(p.get("x_grid", np.arange(0.1, 0.95, 0.1)), dtype=float)
    ana = [sir_analysis.meta_distribution(model, theta, float(x)) for x in x_grid]
    emp = simengine.estimate_meta(model, theta, x_grid, cfg["sim"])
    path = os.path.join(out_dir, "meta_distribution.csv")
    write_csv(
        path,
        ["x", "analytic", "empirical", "ci_low", "ci_high"],
        [
            [float(x), float(a), float(e), float(lo), float(hi)]
            for x, a, e, lo, hi in zip(x_grid, ana, emp.values, emp.ci_low, emp.ci_high)
        ],
    )
    gp = os.path.join(out_dir, "meta_distribution.gp")
    with open(gp, "w") as fh:
        fh.write(
            "set datafile separator ','\nset xlabel 'target reliability x'\n"
            "set ylabel 'fraction of links'\nset grid\n"
            "plot 'meta_distribution.csv' using 1:2 with lines title 'analytic', "
            "'meta_distribution.csv' using 1:3 with points title 'empirical'\n"
        )
    return [path, gp]


def _exp_queueing_bipolar(cfg, out_dir):
    from . import queueing

    grid = cfg["theta_grid"]
    if grid is None:
        raise ConfigError("queueing_bipolar needs a theta_grid")
    p = cfg["params"]
    density = float(p.get("density", 0.001))
    r_t = float(p.get("r_t", 2.0))
    alpha = float(p.get("alpha", 4.0))
    xis = [float(x) for x in p.get("xi", [0.5, 0.85, 1.0])]
    cols = {}
    for xi in xis:
        cols[f"analytic_xi{xi}"] = [
            queueing.bipolar_success(xi, float(t), alpha, density, r_t).success for t in grid
        ]
    path = os.path.join(out_dir, "queueing_bipolar.csv")
    write_curve_csv(path, grid, cols)
    gp = os.path.join(out_dir, "queueing_bipolar.gp")
    write_gnuplot(
        gp,
        [("queueing_bipolar.csv", [(4 + i, f"xi={xi}") for i, xi in enumerate(xis)])],
        "Bipolar success probability with queues",
    )
    outputs = [path, gp]
    mc_trials = int(p.get("mc_trials", 0))
    if mc_trials > 0:
        # queue-simulation markers on a theta subset, in the estimate format
        marks = []
        qcfg = SimConfig(trials=mc_trials, master_seed=cfg["sim"].master_seed)
        for xi in xis:
            for t in grid[:: max(len(grid) // 4, 1)]:
                est = queueing.simulate_queues(
                    "bipolar", xi, float(t), alpha, qcfg, density=density,
                    r_t=r_t, slots=1000, warmup=250, n_target=100,
                )
                marks.append((f"xi={xi},theta_db={float(theta_db(t)):.2f}", est))
        mpath = os.path.join(out_dir, "queueing_bipolar_sim.csv")
        write_estimates_csv(mpath, marks)
        outputs.append(mpath)
    return outputs


def _exp_queueing_downlink(cfg, out_dir):
    from . import queueing

    grid = cfg["theta_grid"]
    if grid is None:
        raise ConfigError("queueing_downlink needs a theta_grid")
    p = cfg["params"]
    ratio = float(p.get("ratio", 5.0))
    alpha = float(p.get("alpha", 4.0))
    xis = [float(x) for x in p.get("xi", [0.01, 0.05])]
    cols = {}
    for xi in xis:
        cols[f"analytic_xi{xi}"] = [
            queueing.downlink_success(xi, float(t), alpha, ratio).success for t in grid
        ]
    path = os.path.join(out_dir, "queueing_downlink.csv")
    write_curve_csv(path, grid, cols)
    gp = os.path.join(out_dir, "queueing_downlink.gp")
    write_gnuplot(
        gp,
        [("queueing_downlink.csv", [(4 + i, f"xi={xi}") for i, xi in enumerate(xis)])],
        "Downlink success probability with queues",
    )
    return [path, gp]


def _exp_retx(cfg, out_dir):
    from . import relay_retx

    grid = cfg["theta_grid"]
    if grid is None:
        raise ConfigError("retx needs a theta_grid")
    p = cfg["params"]
    density = float(p.get("density", 0.1))
    r_t = float(p.get("r_t", 1.0))
    alpha = float(p.get("alpha", 4.0))
    ks = [int(k) for k in p.get("k", [2, 3, 4])]
    cols = {}
    for k in ks:
        cols[f"jsp_qsi_k{k}"] = [relay_retx.jsp_retx(k, "qsi", float(t), alpha, density, r_t) for t in grid]
        cols[f"jsp_fvi_k{k}"] = [relay_retx.jsp_retx(k, "fvi", float(t), alpha, density, r_t) for t in grid]
    path = os.path.join(out_dir, "retx_jsp.csv")
    write_curve_csv(path, grid, cols)
    gp = os.path.join(out_dir, "retx_jsp.gp")
    write_gnuplot(gp, [("retx_jsp.csv", [(4 + i, name) for i, name in enumerate(cols)])],
                  "Joint success probability of repeated transmissions")
    return [path, gp]


def _exp_harq(cfg, out_dir):
    from . import relay_retx

    grid = cfg["theta_grid"]
    if grid is None:
        raise ConfigError("harq needs a theta_grid")
    p = cfg["params"]
    density = float(p.get("density", 0.1))
    r_t = float(p.get("r_t", 1.0))
    alpha = float(p.get("alpha", 4.0))
    cols = {}
    for regime in ("qsi", "fvi"):
        cols[f"type1_{regime}"] = [
            relay_retx.harq_type1(float(t), alpha, density, r_t, regime) for t in grid
        ]
        cols[f"type2_{regime}"] = [
            relay_retx.harq_type2_cc(float(t), alpha, density, r_t, regime) for t in grid
        ]
    path = os.path.join(out_dir, "harq.csv")
    write_curve_csv(path, grid, cols)
    gp = os.path.join(out_dir, "harq.gp")
    write_gnuplot(gp, [("harq.csv", [(4 + i, name) for i, name in enumerate(cols)])],
                  "HARQ success probabilities")
    return [path, gp]


def _exp_relay(cfg, out_dir):
    from . import relay_retx

    grid = cfg["theta_grid"]
    if grid is None:
        raise ConfigError("relay needs a theta_grid")
    p = cfg["params"]
    density = float(p.get("density", 0.1))
    alpha = float(p.get("alpha", 4.0))
    hop_len = float(p.get("hop_length", 1.0))
    hops = [int(m) for m in p.get("hops", [1, 2, 4])]
    cols = {}
    for m in hops:
        route = relay_retx.linear_route(m, hop_len)
        cols[f"qsi_M{m}"] = [relay_retx.relay_moments(1.0, route, float(t), alpha, density, "qsi") for t in grid]
        cols[f"fvi_M{m}"] = [relay_retx.relay_moments(1.0, route, float(t), alpha, density, "fvi") for t in grid]
    path = os.path.join(out_dir, "relay.csv")
    write_curve_csv(path, grid, cols)
    gp = os.path.join(out_dir, "relay.gp")
    write_gnuplot(gp, [("relay.csv", [(4 + i, name) for i, name in enumerate(cols)])],
                  "End-to-end relaying success probability")
    return [path, gp]


def _exp_interference_corr(cfg, out_dir):
    from .interference import PathLossSpec, corr_coefficient

    p = cfg["params"]
    alpha = float(p.get("alpha", 4.0))
    eps = float(p.get("epsilon", 1.0))
    pl = PathLossSpec(alpha=alpha, epsilon=eps)
    u_grid = np.asarray(p.get("u_grid", np.linspace(0.0, 5.0, 11)), dtype=float)
    models = {
        "mcp": NetworkModel(MCP(0.02, 5.0, 1.0), alpha=alpha),
        "ppp": NetworkModel(PPP(0.1), alpha=alpha),
        "gpp": NetworkModel(GPP(0.1, 1.0), alpha=alpha),
    }
    rows = []
    for u in u_grid:
        row = [float(u)]
        for m in models.values():
            row.append(corr_coefficient(m, float(u), pl))
        rows.append(row)
    path = os.path.join(out_dir, "interference_corr.csv")
    write_csv(path, ["u", "zeta_mcp", "zeta_ppp", "zeta_gpp"], rows)
    gp = os.path.join(out_dir, "interference_corr.gp")
    with open(gp, "w") as fh:
        fh.write(
            "set datafile separator ','\nset xlabel 'displacement u'\n"
            "set ylabel 'correlation coefficient'\nset grid\n"
            "plot 'interference_corr.csv' using 1:2 with lines title 'cluster', "
            "'interference_corr.csv' using 1:3 with lines title 'poisson', "
            "'interference_corr.csv' using 1:4 with lines title 'ginibre'\n"
        )
    return [path, gp]


def _exp_mobility(cfg, out_dir):
    from .mobility import MobilitySpec, handoff_prob_avg, mobility_report

    p = cfg["params"]
    density = float(p.get("density", 0.001))
    alpha = float(p.get("alpha", 4.0))
    theta = float(p.get("theta", 10 ** (-0.1)))
    speeds = [float(v) for v in p.get("speeds", [0, 1, 2, 5, 10, 20, 50])]
    model = p.get("model", "downlink_mobile_user")
    link = p.get("link_distance", 8.0 if model == "bipolar_mobile_interferers" else None)
    rows = []
    for v in speeds:
        spec = MobilitySpec(v, model=model, link_distance=link)
        rep = mobility_report(spec, density, theta, alpha, cfg["sim"])
        row = [v, rep["csp"].mean, rep["csp"].stderr, rep["p2"].mean, rep["p2"].stderr]
        row.append(handoff_prob_avg(density, v) if model == "downlink_mobile_user" else "")
        rows.append(row)
    path = os.path.join(out_dir, "mobility_csp.csv")
    write_csv(path, ["speed", "csp", "csp_stderr", "baseline", "baseline_stderr", "handoff_analytic"], rows)
    gp = os.path.join(out_dir, "mobility_csp.gp")
    with open(gp, "w") as fh:
        fh.write(
            "set datafile separator ','\nset xlabel 'speed'\nset ylabel 'probability'\nset grid\n"
            "plot 'mobility_csp.csv' using 1:2 with linespoints title 'conditional', "
            "'mobility_csp.csv' using 1:4 with lines title 'baseline'\n"
        )
    return [path, gp]


def _exp_shadowing(cfg, out_dir):
    from .shadowing import BlockageModel, ShadowGrid, moments_shadowed

    grid_t = cfg["theta_grid"]
    if grid_t is None:
        raise ConfigError("shadowing needs a theta_grid")
    p = cfg["params"]
    sg = ShadowGrid(float(p.get("window_radius", 8.0)), float(p.get("cell_size", 1.0)))
    blk = BlockageModel(float(p.get("kappa", 0.5)), float(p.get("blockage_density", 1.0)))
    density = float(p.get("density", 1.0))
    alpha = float(p.get("alpha", 4.0))
    r_t = float(p.get("r_t", 1.0))
    cols = {
        "correlated": [moments_shadowed(1.0, float(t), r_t, sg, blk, density, alpha, "correlated") for t in grid_t],
        "independent": [moments_shadowed(1.0, float(t), r_t, sg, blk, density, alpha, "independent") for t in grid_t],
    }
    path = os.path.join(out_dir, "shadowing.csv")
    write_curve_csv(path, grid_t, cols)
    gp = os.path.join(out_dir, "shadowing.gp")
    write_gnuplot(gp, [("shadowing.csv", [(4, "correlated"), (5, "independent")])],
                  "Success probability under cell shadowing")
    return [path, gp]


_EXPERIMENTS = {
    "moments_downlink": _exp_moments_downlink,
    "moments_adhoc": _exp_moments_adhoc,
    "meta_distribution": _exp_meta,
    "interference_corr": _exp_interference_corr,
    "queueing_bipolar": _exp_queueing_bipolar,
    "queueing_downlink": _exp_queueing_downlink,
    "retx_jsp": _exp_retx,
    "harq": _exp_harq,
    "relay": _exp_relay,
    "mobility_csp": _exp_mobility,
    "shadowing": _exp_shadowing,
}


def cmd_analyze(config_path):
    t0 = time.time()
    try:
        with open(config_path) as fh:
            raw = json.load(fh)
        cfg = parse_config(raw)
        fn = _EXPERIMENTS.get(cfg["experiment"])
        if fn is None:
            raise ConfigError(
                f"unknown experiment id: {cfg['experiment']!r}; known: {sorted(_EXPERIMENTS)}"
            )
    except (OSError, json.JSONDecodeError, ConfigError, ValueError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    out_dir = cfg["output_dir"]
    os.makedirs(out_dir, exist_ok=True)
    try:
        outputs = fn(cfg, out_dir)
    except ToleranceError as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    write_manifest(out_dir, cfg["echo"], outputs, cfg["sim"].master_seed, t0)
    for p in outputs:
        print(p)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Figures
# ---------------------------------------------------------------------------


def _figure_config(key, seed, trials, out_dir):
    """Desk-scale parameterizations of the catalog figures."""
    db = lambda a, b, n: {"kind": "db", "start": a, "stop": b, "num": n}
    base = {"version": 1, "sim": {"trials": trials, "master_seed": seed}, "output_dir": out_dir}
    reg = {
        # pair correlation functions: handled specially below
        "fig11": {
            "experiment": "moments_adhoc",
            "params": {"field": "ppp", "density": 0.1, "alpha": 4.0, "r_t": 1.0},
            "theta_grid": db(-10, 15, 11),
        },
        "fig13": {
            "experiment": "meta_distribution",
            "params": {"field": "ppp", "density": 0.1, "alpha": 4.0, "r_t": 1.0, "theta": 1.0},
        },
        "fig23": {
            "experiment": "queueing_downlink",
            "params": {"ratio": 5.0, "alpha": 4.0, "xi": [0.01, 0.05, 0.1]},
            "theta_grid": db(-10, 20, 13),
        },
        "fig24": {
            "experiment": "queueing_bipolar",
            "params": {"density": 0.001, "r_t": 2.0, "alpha": 4.0, "xi": [0.5, 0.85, 1.0],
                       "mc_trials": 24},
            "theta_grid": db(-10, 30, 17),
        },
        "fig25": {
            "experiment": "queueing_bipolar",
            "params": {"density": 0.01, "r_t": 2.0, "alpha": 4.0, "xi": [0.5]},
            "theta_grid": db(-10, 30, 17),
        },
        "fig27": {
            "experiment": "relay",
            "params": {"density": 0.1, "alpha": 4.0, "hop_length": 1.0, "hops": [1, 2, 4]},
            "theta_grid": db(-10, 10, 9),
        },
        "fig32": {
            "experiment": "retx_jsp",
            "params": {"density": 0.1, "r_t": 1.0, "alpha": 4.0, "k": [2, 3, 4]},
            "theta_grid": db(-10, 10, 9),
        },
        "fig35": {
            "experiment": "harq",
            "params": {"density": 0.1, "r_t": 1.0, "alpha": 4.0},
            "theta_grid": db(-10, 10, 9),
        },
        "fig31": {
            "experiment": "mobility_csp",
            "params": {
                "model": "bipolar_mobile_interferers",
                "density": 0.001,
                "theta": 10 ** (-0.1),
                "link_distance": 8.0,
                "speeds": [0, 1, 2, 5, 10, 20, 50],
            },
        },
        "fig21": {
            "experiment": "shadowing",
            "params": {"window_radius": 8.0, "cell_size": 1.0, "kappa": 0.5,
                       "blockage_density": 1.0, "density": 1.0, "alpha": 4.0, "r_t": 1.0},
            "theta_grid": db(-10, 10, 9),
        },
    }
    if key not in reg and key not in _SPECIAL_FIGURES:
        raise ConfigError(f"unknown figure key: {key}")
    if key in reg:
        conf = dict(base)
        conf.update(reg[key])
        return conf
    return None


def _fig_pcf(cfg_sim, out_dir, seed):
    from .pointprocess import pcf_analytic, pcf_estimate, sample_mcp, sample_ppp
    from .simengine import seed_stream

    r_grid = np.linspace(0.05, 3.0, 30)
    mcp = MCP(0.2, 5.0, 1.0)
    rows = []
    rng = seed_stream(seed, 0, 41)
    pats_p = [sample_ppp(1.0, 10.0, rng) for _ in range(100)]
    pats_m = [sample_mcp(0.2, 5.0, 1.0, 10.0, rng) for _ in range(100)]
    est_p = pcf_estimate(pats_p, r_grid, bin_width=0.1)
    est_m = pcf_estimate(pats_m, r_grid, bin_width=0.1)
    for i, r in enumerate(r_grid):
        rows.append(
            [
                float(r),
                float(pcf_analytic(mcp, r)),
                1.0,
                float(pcf_analytic(GPP(1.0, 0.5), r)),
                float(est_m.values[i]),
                float(est_p.values[i]),
            ]
        )
    path = os.path.join(out_dir, "fig9_pcf.csv")
    write_csv(path, ["r", "mcp_analytic", "ppp_analytic", "gpp_analytic", "mcp_estimate", "ppp_estimate"], rows)
    gp = os.path.join(out_dir, "fig9_pcf.gp")
    with open(gp, "w") as fh:
        fh.write(
            "set datafile separator ','\nset xlabel 'r'\nset ylabel 'g(r)'\nset grid\n"
            "plot 'fig9_pcf.csv' using 1:2 w l t 'cluster', 'fig9_pcf.csv' using 1:3 w l t 'poisson', "
            "'fig9_pcf.csv' using 1:4 w l t 'ginibre', 'fig9_pcf.csv' using 1:5 w p t 'cluster est', "
            "'fig9_pcf.csv' using 1:6 w p t 'poisson est'\n"
        )
    return [path, gp]


def _fig_variance(out_dir):
    from .interference import PathLossSpec, interference_variance

    rows = []
    for alpha in np.linspace(2.5, 6.0, 8):
        pl = PathLossSpec(alpha=float(alpha), epsilon=1.0)
        rows.append(
            [
                float(alpha),
                interference_variance(NetworkModel(MCP(0.2, 5.0, 1.0), float(alpha)), pl),
                interference_variance(NetworkModel(PPP(1.0), float(alpha)), pl),
                interference_variance(NetworkModel(GPP(1.0, 1.0), float(alpha)), pl),
            ]
        )
    path = os.path.join(out_dir, "fig10_variance.csv")
    write_csv(path, ["alpha", "var_mcp", "var_ppp", "var_gpp"], rows)
    gp = os.path.join(out_dir, "fig10_variance.gp")
    with open(gp, "w") as fh:
        fh.write(
            "set datafile separator ','\nset xlabel 'alpha'\nset ylabel 'variance'\nset grid\n"
            "plot 'fig10_variance.csv' using 1:2 w l t 'cluster', "
            "'fig10_variance.csv' using 1:3 w l t 'poisson', "
            "'fig10_variance.csv' using 1:4 w l t 'ginibre'\n"
        )
    return [path, gp]


def _fig_adhoc_three_fields(cfg_sim, out_dir, key, b_over_b1=False):
    from . import simengine, sir_analysis

    grid = theta_from_db(np.linspace(-10, 15, 11))
    models = {
        "mcp": NetworkModel(MCP(0.02, 5.0, 1.0), 4.0, 1.0),
        "ppp": NetworkModel(PPP(0.1), 4.0, 1.0),
        "gpp": NetworkModel(GPP(0.1, 1.0), 4.0, 1.0),
    }
    cols = {}
    for name, m in models.items():
        if b_over_b1:
            cols[name] = [
                sir_analysis.moments_adhoc(m, 2.0, float(t)) / sir_analysis.moments_adhoc(m, 1.0, float(t))
                for t in grid
            ]
        else:
            cols[f"{name}_analytic"] = [sir_analysis.moments_adhoc(m, 1.0, float(t)) for t in grid]
            est = [simengine.estimate_success(m, float(t), "adhoc", cfg_sim) for t in grid]
            cols[f"{name}_mc"] = [e.mean for e in est]
    path = os.path.join(out_dir, f"{key}.csv")
    write_curve_csv(path, grid, cols)
    gp = os.path.join(out_dir, f"{key}.gp")
    write_gnuplot(gp, [(f"{key}.csv", [(4 + i, n) for i, n in enumerate(cols)])],
                  "Ad hoc fields" if not b_over_b1 else "Temporal conditional success")
    return [path, gp]


def _fig_asappp(cfg_sim, out_dir, key, meta=False):
    from . import simengine, sir_analysis

    g0 = 1.5  # ginibre beta = 1
    model = NetworkModel(GPP(0.1, 1.0), 4.0)
    if not meta:
        grid = theta_from_db(np.linspace(-10, 10, 9))
        shifted = [sir_analysis.moments_downlink_ppp(1.0, float(t) / g0, 4.0) for t in grid]
        mc = [simengine.estimate_success(model, float(t), "downlink", cfg_sim).mean for t in grid]
        path = os.path.join(out_dir, f"{key}.csv")
        write_curve_csv(path, grid, {"asappp_shifted": shifted, "gpp_mc": mc})
        cols = [(4, "shifted poisson"), (5, "ginibre simulation")]
    else:
        xs = np.arange(0.1, 0.95, 0.1)
        theta = 1.0
        shifted = [
            sir_analysis.meta_distribution(NetworkModel(PPP(0.1), 4.0), theta / g0, float(x), geometry="downlink")
            for x in xs
        ]
        emp = simengine.estimate_meta(model, theta, xs, cfg_sim, geometry="downlink")
        path = os.path.join(out_dir, f"{key}.csv")
        write_csv(path, ["x", "asappp_shifted", "gpp_empirical"],
                  [[float(x), float(s), float(e)] for x, s, e in zip(xs, shifted, emp.values)])
        cols = [(2, "shifted poisson"), (3, "ginibre empirical")]
    gp = os.path.join(out_dir, f"{key}.gp")
    with open(gp, "w") as fh:
        fh.write("set datafile separator ','\nset grid\nplot " + ", ".join(
            f"'{os.path.basename(path)}' using 1:{c} w lp t '{t}'" for c, t in cols) + "\n")
    return [path, gp]


def _fig_lsu(out_dir, key):
    from . import location_users as lsu

    if key == "fig17":
        grid = theta_from_db(np.linspace(-10, 15, 11))
        cols = {
            "general": [lsu.lsu_moments("general", 1.0, float(t), 4.0) for t in grid],
            "center_rho0.5": [lsu.lsu_moments("cell_center", 1.0, float(t), 4.0, rho=0.5) for t in grid],
            "boundary_rho0.5": [lsu.lsu_moments("cell_boundary", 1.0, float(t), 4.0, rho=0.5) for t in grid],
            "edge": [lsu.lsu_moments("edge", 1.0, float(t), 4.0) for t in grid],
            "vertex": [lsu.lsu_moments("vertex", 1.0, float(t), 4.0) for t in grid],
        }
        path = os.path.join(out_dir, "fig17_lsu.csv")
        write_curve_csv(path, grid, cols)
        gp = os.path.join(out_dir, "fig17_lsu.gp")
        write_gnuplot(gp, [("fig17_lsu.csv", [(4 + i, n) for i, n in enumerate(cols)])],
                      "Location-specific success probability")
        return [path, gp]
    rhos = np.linspace(0.05, 0.95, 10)
    rows = []
    for rho in rhos:
        cc = lsu.lsu_moments("cell_center", 2.0, 1.0, 4.0, rho=float(rho)) / lsu.lsu_moments(
            "cell_center", 1.0, 1.0, 4.0, rho=float(rho)
        )
        cb = lsu.lsu_moments("cell_boundary", 2.0, 1.0, 4.0, rho=float(rho)) / lsu.lsu_moments(
            "cell_boundary", 1.0, 1.0, 4.0, rho=float(rho)
        )
        rows.append([float(rho), cc, cb])
    path = os.path.join(out_dir, "fig18_lsu_csp.csv")
    write_csv(path, ["rho", "center_csp", "boundary_csp"], rows)
    gp = os.path.join(out_dir, "fig18_lsu_csp.gp")
    with open(gp, "w") as fh:
        fh.write(
            "set datafile separator ','\nset xlabel 'rho'\nset ylabel 'conditional success'\nset grid\n"
            "plot 'fig18_lsu_csp.csv' using 1:2 w l t 'center', 'fig18_lsu_csp.csv' using 1:3 w l t 'boundary'\n"
        )
    return [path, gp]


def _fig_shadow_csp(out_dir):
    from .shadowing import BlockageModel, ShadowGrid, moments_shadowed

    blk = BlockageModel(0.5, 1.0)
    rows = []
    for cell in (0.5, 1.0, 2.0, 4.0):
        sg = ShadowGrid(8.0, cell)
        mc2 = moments_shadowed(2.0, 1.0, 1.0, sg, blk, 1.0, 4.0, "correlated")
        mc1 = moments_shadowed(1.0, 1.0, 1.0, sg, blk, 1.0, 4.0, "correlated")
        mi2 = moments_shadowed(2.0, 1.0, 1.0, sg, blk, 1.0, 4.0, "independent")
        mi1 = moments_shadowed(1.0, 1.0, 1.0, sg, blk, 1.0, 4.0, "independent")
        rows.append([cell, mc2 / mc1, mi2 / mi1])
    path = os.path.join(out_dir, "fig22_shadow_csp.csv")
    write_csv(path, ["cell_size", "correlated_csp", "independent_csp"], rows)
    gp = os.path.join(out_dir, "fig22_shadow_csp.gp")
    with open(gp, "w") as fh:
        fh.write(
            "set datafile separator ','\nset xlabel 'cell size L'\nset ylabel 'conditional success'\nset grid\n"
            "plot 'fig22_shadow_csp.csv' using 1:2 w lp t 'correlated', "
            "'fig22_shadow_csp.csv' using 1:3 w lp t 'independent'\n"
        )
    return [path, gp]


def _fig_relay_csp(out_dir, key):
    from . import relay_retx

    rows = []
    if key == "fig28":
        grid = theta_from_db(np.linspace(-10, 10, 9))
        cols = {}
        for m in (2, 3, 4):
            num = [relay_retx.relay_moments(1.0, relay_retx.linear_route(m, 1.0), float(t), 4.0, 0.1, "qsi") for t in grid]
            den = [relay_retx.relay_moments(1.0, relay_retx.linear_route(m - 1, 1.0), float(t), 4.0, 0.1, "qsi") for t in grid]
            cols[f"hop{m}_csp"] = [a / b for a, b in zip(num, den)]
        path = os.path.join(out_dir, "fig28_relay_spatial_csp.csv")
        write_curve_csv(path, grid, cols)
        gp = os.path.join(out_dir, "fig28_relay_spatial_csp.gp")
        write_gnuplot(gp, [(os.path.basename(path), [(4 + i, n) for i, n in enumerate(cols)])],
                      "Per-hop conditional success")
        return [path, gp]
    for m in (1, 2, 3, 4):
        r = relay_retx.linear_route(m, 1.0)
        ratio = relay_retx.relay_moments(2.0, r, 1.0, 4.0, 0.1, "qsi") / relay_retx.relay_moments(
            1.0, r, 1.0, 4.0, 0.1, "qsi"
        )
        rows.append([m, ratio])
    path = os.path.join(out_dir, "fig29_relay_temporal_csp.csv")
    write_csv(path, ["hops", "temporal_csp"], rows)
    gp = os.path.join(out_dir, "fig29_relay_temporal_csp.gp")
    with open(gp, "w") as fh:
        fh.write(
            "set datafile separator ','\nset xlabel 'hops'\nset ylabel 'temporal conditional success'\n"
            "set grid\nplot 'fig29_relay_temporal_csp.csv' using 1:2 w lp t 'qsi'\n"
        )
    return [path, gp]


def _fig_retx_extra(out_dir, key):
    from . import relay_retx

    grid = theta_from_db(np.linspace(-10, 10, 9))
    if key == "fig33":
        cols = {
            f"csp_k{k}": [relay_retx.csp_retx(k, "qsi", float(t), 4.0, 0.1, 1.0) for t in grid]
            for k in (1, 2, 3, 4)
        }
        name = "fig33_retx_csp"
    else:
        cols = {}
        for k in (1, 2, 4):
            cols[f"p_qsi_k{k}"] = [relay_retx.p_retx(k, "qsi", float(t), 4.0, 0.1, 1.0) for t in grid]
            cols[f"p_fvi_k{k}"] = [relay_retx.p_retx(k, "fvi", float(t), 4.0, 0.1, 1.0) for t in grid]
        name = "fig34_retx_p"
    path = os.path.join(out_dir, f"{name}.csv")
    write_curve_csv(path, grid, cols)
    gp = os.path.join(out_dir, f"{name}.gp")
    write_gnuplot(gp, [(f"{name}.csv", [(4 + i, n) for i, n in enumerate(cols)])], "Retransmission")
    return [path, gp]


_SPECIAL_FIGURES = {"fig9", "fig10", "fig12", "fig14", "fig16", "fig17", "fig18", "fig22", "fig28", "fig29", "fig33", "fig34"}


def cmd_figure(key, seed, trials, out_dir):
    t0 = time.time()
    os.makedirs(out_dir, exist_ok=True)
    cfg_sim = SimConfig(trials=trials, master_seed=seed)
    try:
        if key in _SPECIAL_FIGURES:
            if key == "fig9":
                outputs = _fig_pcf(cfg_sim, out_dir, seed)
            elif key == "fig10":
                outputs = _fig_variance(out_dir)
            elif key == "fig12":
                outputs = _fig_adhoc_three_fields(cfg_sim, out_dir, "fig12_temporal_csp", b_over_b1=True)
            elif key == "fig14":
                outputs = _fig_asappp(cfg_sim, out_dir, "fig14_asappp")
            elif key == "fig16":
                outputs = _fig_asappp(cfg_sim, out_dir, "fig16_asappp_meta", meta=True)
            elif key in ("fig17", "fig18"):
                outputs = _fig_lsu(out_dir, key)
            elif key == "fig22":
                outputs = _fig_shadow_csp(out_dir)
            elif key in ("fig28", "fig29"):
                outputs = _fig_relay_csp(out_dir, key)
            else:
                outputs = _fig_retx_extra(out_dir, key)
            write_manifest(out_dir, {"figure": key, "seed": seed, "trials": trials}, outputs, seed, t0)
            for p in outputs:
                print(p)
            return EXIT_OK
        conf = _figure_config(key, seed, trials, out_dir)
        if key == "fig11":
            outputs = _fig_adhoc_three_fields(cfg_sim, out_dir, "fig11_adhoc")
            write_manifest(out_dir, {"figure": key, "seed": seed, "trials": trials}, outputs, seed, t0)
            for p in outputs:
                print(p)
            return EXIT_OK
        cfg = parse_config(conf)
        outputs = _EXPERIMENTS[cfg["experiment"]](cfg, out_dir)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except ToleranceError as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    write_manifest(out_dir, {"figure": key, "seed": seed, "trials": trials}, outputs, seed, t0)
    for p in outputs:
        print(p)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def main(argv=None):
    parser = argparse.ArgumentParser(prog="stochgeo", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_an = sub.add_parser("analyze", help="run an experiment from a JSON config")
    p_an.add_argument("config")

    p_fig = sub.add_parser("figure", help="reproduce a catalog figure at desk scale")
    p_fig.add_argument("key")
    p_fig.add_argument("--seed", type=int, default=2024)
    p_fig.add_argument("--trials", type=int, default=20000)
    p_fig.add_argument("--out", default=".")

    p_val = sub.add_parser("validate", help="run the analytic-vs-MC cross-check suite")
    p_val.add_argument("--quick", action="store_true")
    p_val.add_argument("--seed", type=int, default=2024)
    p_val.add_argument("--out", default=".")

    args = parser.parse_args(argv)
    if args.command == "analyze":
        return cmd_analyze(args.config)
    if args.command == "figure":
        return cmd_figure(args.key, args.seed, args.trials, args.out)
    if args.command == "validate":
        return _validate.run(quick=args.quick, seed=args.seed, out_dir=args.out)
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
