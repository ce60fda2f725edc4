"""Bundled invariant suite: the acceptance scenarios as callable checks.

Each check returns a :class:`CheckResult` with the measured value, the
tolerance it is held to and the wall time, so the same scenarios back the
``validate`` subcommand and the acceptance tests.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .bath import BathSpec
from .blockade import BlockadeConfig, fit_log_slope, run_blockade
from .dynamics import distance_to, evolve, null_space_steady_state, relaxation_rate_estimate, restrict
from .fock import FockTruncation, displacement_matrix, oracle_displacement_matrix
from .models import (
    DispersiveSpec,
    NDModelSpec,
    build_dispersive,
    build_nd_model,
    coupling_matrix,
    nd_dense_model,
)
from .rate_graph import (
    build_rate_matrix,
    connectivity,
    detailed_balance_violation,
    mixture_state,
    predict_steady_state,
    verify_stationarity,
)
from .spectral_core import eigendecompose

# scenario parameters shared with the acceptance tests
FC_ALPHAS = (0.1, 0.5, 1.5, 3.0)
FC_N_MAX = 64
FC_BLOCK = 32
GRID_ALPHA = 1.5
GRID_MAX = 10
ND3 = dict(level_energies=[0.0, 0.7, 1.6], osc_freqs=[1.0], couplings=[[0.0], [0.4], [0.9]], n_max=12)
OHMIC = dict(family="ohmic_exp_cutoff", coupling=1.0, cutoff=10.0)
BETAS = (0.2, 1.0, 5.0)
DISPERSIVE = DispersiveSpec(qubit_gap=1.0, resonator_freq=5.0, dispersive_shift=0.1, n_max=6)
ND2 = dict(level_energies=[0.0, 1.3], osc_freqs=[1.0], couplings=[[0.3], [0.8]], n_max=20)
CROSS_N = 10


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    value: float
    tolerance: float
    seconds: float
    time_limit: float
    detail: str = ""

    @property
    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (
            f"{status}  {self.name}: value={self.value:.3e} tol={self.tolerance:.1e} "
            f"time={self.seconds:.2f}s/{self.time_limit:g}s {self.detail}".rstrip()
        )


def _timed(name: str, limit: float, fn: Callable[[], tuple[bool, float, float, str]]) -> CheckResult:
    t0 = time.perf_counter()
    ok, value, tol, detail = fn()
    dt = time.perf_counter() - t0
    return CheckResult(name, bool(ok) and dt < limit, float(value), float(tol), dt, limit, detail)


# -- scenario helpers -------------------------------------------------------


def fc_grid(alpha: float = GRID_ALPHA, size: int = GRID_MAX, method: str = "analytic") -> np.ndarray:
    """``|<n|D(alpha)|m>|`` for ``m, n <= size``; rows are ``m``."""
    if method == "oracle":
        table = oracle_displacement_matrix(alpha, FC_N_MAX)
    else:
        table = displacement_matrix(alpha, FockTruncation(FC_N_MAX)).entries
    return np.abs(table[: size + 1, : size + 1])


def nd3_rates(family: str = "ohmic_exp_cutoff", beta: float = 1.0):
    eig = build_nd_model(NDModelSpec(**ND3))
    bath = BathSpec(family=family, coupling=1.0, cutoff=OHMIC["cutoff"], beta=beta)
    return eig, build_rate_matrix(eig, bath=bath)


def dispersive_rates(beta: float = 1.0):
    model = build_dispersive(DISPERSIVE)
    return model, build_rate_matrix(model, bath=BathSpec("flat", 1.0, 1.0, beta))


def level_vector(labels, weights: dict) -> np.ndarray:
    p = np.zeros(len(labels))
    for label, w in weights.items():
        p[labels.index(label)] = w
    return p


def component_relaxation_time(rm, report) -> float:
    """``50 / min`` spectral gap over components that carry rates."""
    gaps = []
    for members in report.components:
        sub = restrict(rm, members)
        if sub.n_edges:
            gaps.append(relaxation_rate_estimate(sub))
    return 50.0 / min(gaps)


def dense_cross_check(params: dict = ND2, n_cut: int = CROSS_N) -> tuple[float, float]:
    """Max energy and coupling deviation, analytic vs dense, on levels with ``n <= n_cut``.

    Dense eigenstates are assigned to a branch ``p`` by their largest block
    weight and numbered within the branch by energy.
    """
    spec = NDModelSpec(**params)
    eig = build_nd_model(spec)
    h, channels = nd_dense_model(spec)
    basis = eigendecompose(h)
    n_lv, dim_b = spec.n_levels, spec.n_max[0] + 1
    weight = np.abs(basis.vectors) ** 2
    branch = weight.reshape(n_lv, dim_b, -1).sum(axis=1).argmax(axis=0)
    dense_index = {}
    for p in range(n_lv):
        for n, k in enumerate(np.flatnonzero(branch == p)):
            dense_index[(p, (n,))] = int(k)

    keep = [lv for lv in eig.levels if lv[1][0] <= n_cut]
    if any(lv not in dense_index for lv in keep):
        return np.inf, np.inf
    e_err = max(abs(basis.energies[dense_index[lv]] - eig.energies[eig.index(*lv)]) for lv in keep)

    a_eig = np.abs(sum(c.operator for c in channels[0].components(basis)))
    c = np.abs(coupling_matrix(eig))
    c_err = 0.0
    for la, lb in itertools.product(keep, keep):
        if la[0] == lb[0]:
            continue
        c_err = max(c_err, abs(a_eig[dense_index[la], dense_index[lb]] - c[eig.index(*la), eig.index(*lb)]))
    return float(e_err), float(c_err)


# -- checks -------------------------------------------------------------------


def check_fc_oracle() -> CheckResult:
    def run():
        worst = 0.0
        for a in FC_ALPHAS:
            ana = displacement_matrix(a, FockTruncation(FC_N_MAX)).entries
            ora = oracle_displacement_matrix(a, FC_N_MAX)
            worst = max(worst, float(np.abs(ana - ora)[:FC_BLOCK, :FC_BLOCK].max()))
        return worst <= 1e-8, worst, 1e-8, f"alphas={FC_ALPHAS}"

    return _timed("1 FC analytic vs oracle", 5.0, run)


def check_fc_grid(golden: np.ndarray | None = None) -> CheckResult:
    def run():
        ref = fc_grid(method="oracle") if golden is None else golden
        err = float(np.abs(fc_grid() - ref).max())
        return err <= 1e-12, err, 1e-12, "analytic grid vs oracle golden"

    return _timed("2 FC grid alpha=1.5", 1.0, run)


def check_detailed_balance() -> CheckResult:
    def run():
        worst = 0.0
        for family, beta in itertools.product(("flat", "ohmic_exp_cutoff"), BETAS):
            worst = max(worst, detailed_balance_violation(nd3_rates(family, beta)[1]))
        return worst <= 1e-9, worst, 1e-9, "flat+ohmic, beta in {0.2, 1, 5}"

    return _timed("3 detailed balance", 5.0, run)


def check_synchro_thermalization() -> CheckResult:
    def run():
        eig, rm = nd3_rates()
        report = connectivity(rm)
        gibbs_state = predict_steady_state(rm, report, np.full(rm.n_levels, 1.0 / rm.n_levels)).populations
        t_end = 50.0 / relaxation_rate_estimate(rm)
        starts = [
            level_vector(eig.levels, {(0, (0,)): 1.0}),
            level_vector(eig.levels, {(2, (3,)): 1.0}),
            np.full(rm.n_levels, 1.0 / rm.n_levels),
        ]
        finals = [evolve(rm, p0, [0.0, t_end]).final for p0 in starts]
        tv = max(distance_to(f, gibbs_state) for f in finals)
        spread = max(distance_to(a, b) for a, b in itertools.combinations(finals, 2))
        ok = report.connected and tv <= 1e-6 and spread <= 2e-6
        return ok, tv, 1e-6, f"spread={spread:.1e} (tol 2e-6) connected={report.connected}"

    return _timed("4 synchro-thermalization", 30.0, run)


def check_disconnected() -> CheckResult:
    def run():
        model, rm = dispersive_rates()
        report = connectivity(rm)
        labels = list(model.basis.labels)
        sideband = np.array([lab[1] for lab in labels])
        t_end = component_relaxation_time(rm, report)
        times = np.linspace(0.0, t_end, 201)
        starts = [
            level_vector(labels, {(1, 0): 1.0}),
            level_vector(labels, {(1, 2): 0.5, (0, 4): 0.5}),
        ]
        finals, drift, tv = [], 0.0, 0.0
        for p0 in starts:
            traj = evolve(rm, p0, times)
            mass = np.stack([traj.populations[:, sideband == n].sum(axis=1) for n in range(DISPERSIVE.n_max + 1)], 1)
            drift = max(drift, float(np.abs(mass - mass[0]).max()))
            pred = predict_steady_state(rm, report, p0)
            tv = max(tv, distance_to(traj.final, pred.populations))
            finals.append(traj.final)
        apart = distance_to(*finals)
        ok = report.n_components == 7 and drift <= 1e-10 and tv <= 1e-8 and apart >= 0.1
        detail = f"components={report.n_components} sideband_drift={drift:.1e} separation={apart:.3f}"
        return ok, tv, 1e-8, detail

    return _timed("5 disconnected mixture", 10.0, run)


def check_blockade() -> CheckResult:
    def run():
        cfg = BlockadeConfig()
        res = run_blockade(cfg)
        decreasing = all(np.all(np.diff(row) < 0) for row in res.log_factors)
        fits = [fit_log_slope(cfg.m_values, row) for row in res.log_factors]
        good = sum(1 for slope, _, r2 in fits if slope < 0 and r2 > 0.9)
        ok = decreasing and good >= 5
        detail = f"decreasing={decreasing} good_fits={good}/{cfg.n_groups} seed={cfg.seed}"
        return ok, min(r2 for *_, r2 in fits), 0.9, detail

    return _timed("6 FC blockade", 10.0, run)


def check_dense_cross() -> CheckResult:
    def run():
        e_err, c_err = dense_cross_check()
        worst = max(e_err, c_err)
        return worst <= 1e-6, worst, 1e-6, f"energy={e_err:.1e} coupling={c_err:.1e}"

    return _timed("7 analytic vs dense ND", 10.0, run)


def check_mixture_degeneracy() -> CheckResult:
    def run():
        _, rm = dispersive_rates()
        report = connectivity(rm)
        k = report.n_components
        w1 = np.full(k, 1.0 / k)
        w2 = np.zeros(k)
        w2[0], w2[-1] = 0.25, 0.75
        checks = [verify_stationarity(rm, mixture_state(rm, report, w)) for w in (w1, w2)]
        worst = max(c.residual / c.bound for c in checks)
        ok = all(c.accepted for c in checks)
        return ok, max(c.residual for c in checks), checks[0].bound, f"residual/bound={worst:.1e}"

    return _timed("8 mixture stationarity", 1.0, run)


def check_null_space() -> CheckResult:
    def run():
        worst = 0.0
        for beta in BETAS:
            _, rm = nd3_rates(beta=beta)
            p0 = np.full(rm.n_levels, 1.0 / rm.n_levels)
            pred = predict_steady_state(rm, connectivity(rm), p0)
            worst = max(worst, distance_to(pred.populations, null_space_steady_state(rm, p0)))
        return worst <= 1e-8, worst, 1e-8, "Gibbs prediction vs generator null space"

    return _timed("invariant: null space", 5.0, run)


def check_unitarity() -> CheckResult:
    def run():
        worst = 0.0
        for a in FC_ALPHAS:
            t = displacement_matrix(a, FockTruncation(FC_N_MAX))
            k = t.certified_max() + 1
            block = t.entries[:, :k]
            worst = max(worst, float(np.abs(block.T @ block - np.eye(k)).max()))
        return worst <= 1e-6, worst, 1e-6, "certified columns orthonormal"

    return _timed("invariant: FC unitarity", 5.0, run)


CHECKS = (
    check_fc_oracle,
    check_fc_grid,
    check_detailed_balance,
    check_synchro_thermalization,
    check_disconnected,
    check_blockade,
    check_dense_cross,
    check_mixture_degeneracy,
    check_null_space,
    check_unitarity,
)


def run_suite() -> list[CheckResult]:
    return [check() for check in CHECKS]
