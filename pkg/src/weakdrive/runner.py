"""Task orchestration: solve, sweep, bounds, oracle comparison, validation.

Sweeps and oracle comparisons parallelise over grid points with a plain
ordered process map; every point is an independent pure computation, so
results are identical at any parallelism degree.
"""

from __future__ import annotations

import multiprocessing
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import __version__
from .basis import pair_arrays
from .checks import run_checks
from .config import RunConfig, build_drive, build_ensemble, build_partition
from .coupling import coupling_matrix
from .errors import ConfigError, WeakdriveError
from .exact import build_liouvillian, negativity_exact, reduce_state, steady_state_exact
from .farfield import bound_omega, farfield_parameters, lmin_bound, nmax_analytic
from .geometry import regime_check
from .negativity import (
    build_pt_matrix,
    build_V,
    lambda2_spectrum,
    lambda4_dilute,
    model_negativity_at,
    negativity_model,
    negativity_report,
    pt_negativity,
)
from .perturbation import PerturbState, restrict_state, steady_state
from .reporting import config_hash, ensure_dir, write_csv, write_json


@dataclass
class ResultBundle:
    report: dict
    tables: dict = field(default_factory=dict)

    def write(self, outdir: str) -> None:
        ensure_dir(outdir)
        write_json(os.path.join(outdir, "report.json"), self.report)
        for name, (header, rows) in self.tables.items():
            write_csv(os.path.join(outdir, f"{name}.csv"), header, rows)


def _provenance(cfg: RunConfig, parallelism: int) -> dict:
    return {
        "task": cfg.task,
        "config_sha256": config_hash(cfg.raw),
        "seed": cfg.seed,
        "version": __version__,
        "parallelism": parallelism,
    }


def _pmap(fn, payloads, parallelism: int):
    if parallelism <= 1 or len(payloads) <= 1:
        return [fn(p) for p in payloads]
    with multiprocessing.Pool(parallelism) as pool:
        return pool.map(fn, payloads)


# ----------------------------------------------------------------------
# solve
# ----------------------------------------------------------------------

def _amplitude_tables(state: PerturbState) -> dict:
    tables = {}
    tables["u"] = (
        ["mu", "re", "im"],
        [[a, state.u[i].real, state.u[i].imag] for i, a in enumerate(state.atoms)],
    )
    I, J = pair_arrays(state.n)
    tables["v"] = (
        ["mu", "nu", "re", "im"],
        [
            [state.atoms[i], state.atoms[j], state.v[k].real, state.v[k].imag]
            for k, (i, j) in enumerate(zip(I, J))
        ],
    )
    return tables


def run_solve(cfg: RunConfig, parallelism: int = 1) -> ResultBundle:
    ens = build_ensemble(cfg)
    drive = build_drive(cfg, ens)
    part = build_partition(cfg, ens)
    coupling = coupling_matrix(ens)
    state = steady_state(coupling, drive, ens)
    regime = regime_check(ens, drive, part, farfield=True)
    report = negativity_report(state, part, dilute_ok=regime.dilute_ok)

    tables = _amplitude_tables(state)
    tables["curve"] = (
        ["eta", "N_model"],
        [[e, v] for e, v in zip(report.curve.etas, report.curve.values)],
    )
    if cfg.dump_coupling and hasattr(coupling, "dense"):
        z = coupling.dense()
        rows = [
            [a, b, z[a, b].real, z[a, b].imag]
            for a in range(ens.n)
            for b in range(ens.n)
        ]
        tables["z"] = (["mu", "nu", "re", "im"], rows)

    bundle = ResultBundle(
        report={
            "provenance": _provenance(cfg, parallelism),
            "regime": regime.to_dict(),
            "negativity": report.to_dict(),
        },
        tables=tables,
    )
    return bundle


# ----------------------------------------------------------------------
# sweep
# ----------------------------------------------------------------------

def _sweep_point(payload: dict) -> dict:
    eta = payload["eta"]
    row = {"eta": eta}
    try:
        state = PerturbState(
            u=payload["u"].copy(),
            v=payload["v"].copy(),
            w=payload["w"].copy(),
            delta=payload["delta"],
            eta=eta,
            atoms=tuple(payload["atoms"]),
        )
        from .geometry import Partition

        part = Partition(tuple(payload["group_a"]), tuple(payload["group_b"]))
        l2 = payload["lambda2"]
        l4 = payload["lambda4"]
        row["n_model"] = float(model_negativity_at(l2, l4, eta)[0])
        lam = eta**2 * l2 + eta**4 * l4
        row["min_lambda_model"] = float(lam.min()) if len(lam) else 0.0
        n_pt, _ = pt_negativity(build_pt_matrix(state, part))
        row["n_pt"] = n_pt
        if payload["exact"]:
            z = payload["z"]
            from .coupling import CouplingMatrix

            liouv = build_liouvillian(
                CouplingMatrix(z.copy()), payload["delta"], payload["w"], eta
            )
            rho = steady_state_exact(liouv)
            keep = list(payload["group_a"]) + list(payload["group_b"])
            rho_ab = reduce_state(rho, keep, len(payload["atoms"]))
            b_local = list(range(len(payload["group_a"]), len(keep)))
            n_exact, _ = negativity_exact(rho_ab, b_local, len(keep))
            row["n_exact"] = n_exact
    except WeakdriveError as exc:
        row["error"] = str(exc)
    return row


def _interp_last_sign_change(x: np.ndarray, y: np.ndarray) -> Optional[float]:
    sign = np.sign(y)
    idx = np.where(sign[:-1] * sign[1:] < 0)[0]
    if len(idx) == 0:
        return None
    k = idx[-1]
    return float(x[k] - y[k] * (x[k + 1] - x[k]) / (y[k + 1] - y[k]))


def run_sweep(cfg: RunConfig, parallelism: int = 1) -> ResultBundle:
    ens = build_ensemble(cfg)
    drive = build_drive(cfg, ens, eta=cfg.eta_sweep.lo)
    part = build_partition(cfg, ens)
    if cfg.exact and ens.n > 5:
        raise ConfigError("exact", "exact columns need 5 atoms or fewer")
    coupling = coupling_matrix(ens)
    state = steady_state(coupling, drive, ens)
    regime = regime_check(ens, drive, part, farfield=True)

    V = build_V(state, part)
    l2, vecs = lambda2_spectrum(V)
    sub = restrict_state(
        state, tuple(sorted(part.group_a)) + tuple(sorted(part.group_b))
    )
    l4 = np.array(
        [lambda4_dilute(vecs[:, k], sub.w, state.delta) for k in range(len(l2))]
    )

    grid = cfg.eta_sweep.grid()
    base = {
        "u": state.u,
        "v": state.v,
        "w": state.w,
        "delta": state.delta,
        "atoms": state.atoms,
        "group_a": tuple(sorted(part.group_a)),
        "group_b": tuple(sorted(part.group_b)),
        "lambda2": l2,
        "lambda4": l4,
        "exact": cfg.exact,
    }
    if cfg.exact:
        base["z"] = coupling.dense()
    payloads = [{**base, "eta": float(e)} for e in grid]
    rows = _pmap(_sweep_point, payloads, parallelism)

    ok = [r for r in rows if "error" not in r]
    etas = np.array([r["eta"] for r in ok])
    min_lam = np.array([r["min_lambda_model"] for r in ok])
    model = negativity_model(l2, l4, grid)
    threshold_eta = _interp_last_sign_change(etas, min_lam) if len(ok) else None

    header = ["eta", "N_model", "N_pt"] + (["N_exact"] if cfg.exact else [])
    table_rows = []
    errors = []
    for r in rows:
        if "error" in r:
            errors.append({"eta": r["eta"], "error": r["error"]})
            continue
        line = [r["eta"], r["n_model"], r["n_pt"]]
        if cfg.exact:
            line.append(r["n_exact"])
        table_rows.append(line)

    report = {
        "provenance": _provenance(cfg, parallelism),
        "regime": regime.to_dict(),
        "modes": {"lambda2": l2.tolist(), "lambda4": l4.tolist()},
        "threshold": {
            "eta_sweep_estimate": threshold_eta,
            "omega_sweep_estimate": None if threshold_eta is None else 2.0 * threshold_eta,
            "eta_model": model.eta_threshold,
            "omega_model": model.omega_threshold,
        },
        "extremum": {"eta_max": model.eta_max, "n_max": model.n_max},
        "point_errors": errors,
    }
    return ResultBundle(report=report, tables={"sweep": (header, table_rows)})


# ----------------------------------------------------------------------
# oracle comparison
# ----------------------------------------------------------------------

def _oracle_point(payload: dict) -> dict:
    eta = payload["eta"]
    row = {"eta": eta}
    try:
        from .coupling import CouplingMatrix
        from .geometry import Partition

        z = CouplingMatrix(payload["z"].copy())
        liouv = build_liouvillian(z, payload["delta"], payload["w"], eta)
        rho = steady_state_exact(liouv)
        n_exact, _ = negativity_exact(rho, payload["b_atoms"], len(payload["w"]))
        state = PerturbState(
            u=payload["u"].copy(),
            v=payload["v"].copy(),
            w=payload["w"].copy(),
            delta=payload["delta"],
            eta=eta,
            atoms=tuple(range(len(payload["w"]))),
        )
        part = Partition(tuple(payload["group_a"]), tuple(payload["group_b"]))
        n_pt, _ = pt_negativity(build_pt_matrix(state, part))
        row["n_exact"] = n_exact
        row["n_pt"] = n_pt
    except WeakdriveError as exc:
        row["error"] = str(exc)
    return row


def run_oracle_compare(cfg: RunConfig, parallelism: int = 1) -> ResultBundle:
    ens = build_ensemble(cfg)
    drive = build_drive(cfg, ens, eta=cfg.eta_sweep.lo)
    part = build_partition(cfg, ens)
    if set(part.atoms) != set(range(ens.n)):
        raise ConfigError("partition", "oracle comparison needs A u B to cover all atoms")
    if ens.n > 5:
        from .errors import CapExceededError

        raise CapExceededError(f"exact solver capped at 5 atoms, got {ens.n}")
    coupling = coupling_matrix(ens)
    state = steady_state(coupling, drive, ens)

    base = {
        "z": coupling.dense(),
        "w": state.w,
        "u": state.u,
        "v": state.v,
        "delta": state.delta,
        "group_a": tuple(sorted(part.group_a)),
        "group_b": tuple(sorted(part.group_b)),
        "b_atoms": sorted(part.group_b),
    }
    payloads = [{**base, "eta": float(e)} for e in cfg.eta_sweep.grid()]
    rows = _pmap(_oracle_point, payloads, parallelism)

    table_rows = []
    errors = []
    for r in rows:
        if "error" in r:
            errors.append({"eta": r["eta"], "error": r["error"]})
            continue
        table_rows.append(
            [r["eta"], r["n_exact"], r["n_pt"], abs(r["n_exact"] - r["n_pt"])]
        )
    report = {
        "provenance": _provenance(cfg, parallelism),
        "point_errors": errors,
    }
    return ResultBundle(
        report=report,
        tables={"oracle": (["eta", "N_exact", "N_perturbative", "abs_error"], table_rows)},
    )


# ----------------------------------------------------------------------
# bounds
# ----------------------------------------------------------------------

def run_bounds(cfg: RunConfig, parallelism: int = 1) -> ResultBundle:
    ff = cfg.farfield
    if ff is None:
        raise ConfigError("farfield", "required for the bounds task")
    params = farfield_parameters(
        distance=ff["k0_distance"],
        theta=ff["theta"],
        n_a=ff["n_a"],
        n_b=ff["n_b"],
        delta=cfg.delta,
    )
    n_max, eta_max = nmax_analytic(params)
    l_min, n_min = lmin_bound(
        spacing=ff["mean_spacing"],
        delta=cfg.delta,
        k0_distance=ff["k0_distance"],
        omega_over_gamma=ff["omega_over_gamma"],
        theta=ff["theta"],
    )
    report = {
        "provenance": _provenance(cfg, parallelism),
        "D0": params.d0,
        "bound_omega": bound_omega(params),
        "N_max": n_max,
        "eta_max": eta_max,
        "L_min": l_min,
        "n_min": n_min,
    }
    return ResultBundle(report=report)


# ----------------------------------------------------------------------
# validation
# ----------------------------------------------------------------------

def run_validate(cfg: RunConfig, parallelism: int = 1, inject: Optional[str] = None) -> ResultBundle:
    results = run_checks(seed=cfg.seed if cfg.seed else 1, inject=inject)
    report = {
        "provenance": _provenance(cfg, parallelism),
        "checks": [r.to_dict() for r in results],
        "all_passed": all(r.passed for r in results),
    }
    return ResultBundle(report=report)


TASK_RUNNERS = {
    "solve": run_solve,
    "sweep": run_sweep,
    "bounds": run_bounds,
    "oracle-compare": run_oracle_compare,
    "validate": run_validate,
}
