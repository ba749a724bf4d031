"""Experiment harnesses: instability demo, data-MISE validation, rate tables.

Three desk-scale experiments, each deterministic given its seed:

* ``illposed_demo``  solves the contraction-nonlinearity problem from
  noise-only data with the blow-up mode count
  ``N(eps) = floor((2/a * ln(1/eps))^(beta/2)) + 1`` and tabulates the
  expected input energy against the Monte-Carlo output sup-norm: input
  drops to zero while output grows like eps^-2.
* ``convergence_table``  measures the Monte-Carlo MISE of the truncation
  regularizer against a manufactured finite-mode truth across a decreasing
  eps grid, next to the theoretical bound with pilot-calibrated constants and
  the predicted rate order.
* ``mise_check``  validates the exact expectation identity
  ``E||data - truth||^2 = eps^2 N + tail`` and its variance-bias bound.

Reports serialize to CSV with the fixed column set
``eps,t,mise,std_err,theory_bound,loglog_slope`` and to JSON with the full
metadata; identical configurations produce byte-identical files.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import DomainError
from .mild_solver import (
    FourierField,
    InitialData,
    NonlinearitySpec,
    ProblemSpec,
    manufacture,
    power_law_profile,
    solve_mild,
)
from .mittag_leffler import calibrate_growth_constants
from .noise_model import mise_bound_check, mise_mc, observe, replicate_seed, truncated_data
from .regularizer import (
    RateParams,
    RegConfig,
    admissibility_scan,
    choose_params,
    regularized_solve,
    theory_bound_hq,
    theory_bound_l2,
)
from .spectral import EigenSystem, hq_norm

#: Substream offset separating pilot replicates from the main sweep.
_PILOT_STREAM = 1_000_003

#: Exit-status contract of the CLI: 0 ok, 2 invariant violated, 1 error.
EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INVARIANT_FAILED = 2


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce one experiment run bit for bit."""

    kind: str
    eps_grid: tuple[float, ...]
    replicates: int
    seed: int
    beta: float
    a: float
    M: int = 64
    p_cap: int = 32
    norm: str = "l2"
    q: float = 0.0
    r: float = 0.1
    t_eval: tuple[float, ...] = ()
    rate: RateParams | None = None
    truth_modes: int = 4
    truth_decay: float = 2.0
    truth_u1_scale: float = 0.3
    lipschitz_K: float = 0.05
    eig_kind: str = "linear"
    eig_count: int = 160
    shared_noise: bool = False
    pilot_safety: float = 1.5
    mise_configs: tuple[tuple[float, int, int, float, float], ...] = (
        # (decay, modes, N, eps, gamma)
        (2.0, 64, 8, 0.05, 0.5),
        (2.0, 64, 16, 0.01, 0.5),
        (3.0, 64, 4, 0.2, 1.0),
    )

    def __post_init__(self):
        if self.kind not in ("illposed", "converge", "mise-check"):
            raise DomainError(f"unknown experiment kind {self.kind!r}")
        eps = tuple(float(e) for e in self.eps_grid)
        if self.kind != "mise-check":
            if len(eps) < 2 or any(b >= a for a, b in zip(eps, eps[1:])):
                raise DomainError("eps_grid must be strictly decreasing")
            if any(not (0 < e < 1) for e in eps):
                raise DomainError("eps values must lie in (0, 1)")
        if self.replicates < 8:
            raise DomainError("Monte-Carlo experiments need replicates >= 8")
        if not (1.0 < self.beta < 2.0) or self.a <= 0:
            raise DomainError("need beta in (1, 2) and a > 0")
        if self.norm not in ("l2", "hq"):
            raise DomainError("norm must be 'l2' or 'hq'")
        if self.norm == "hq" and (self.q < 0 or not self.r > 0):
            raise DomainError("hq norm needs q >= 0 and r > 0")
        object.__setattr__(self, "eps_grid", eps)
        object.__setattr__(self, "t_eval", tuple(float(t) for t in self.t_eval))

    def to_dict(self) -> dict:
        d = {
            "kind": self.kind,
            "eps_grid": list(self.eps_grid),
            "replicates": self.replicates,
            "seed": self.seed,
            "beta": self.beta,
            "a": self.a,
            "M": self.M,
            "p_cap": self.p_cap,
            "norm": self.norm,
            "q": self.q,
            "r": self.r,
            "t_eval": list(self.t_eval),
            "rate": None
            if self.rate is None
            else {
                "b": self.rate.b,
                "m": self.rate.m,
                "k": self.rate.k,
                "gamma": self.rate.gamma,
                "d": self.rate.d,
                "mu": self.rate.mu,
            },
            "truth_modes": self.truth_modes,
            "truth_decay": self.truth_decay,
            "truth_u1_scale": self.truth_u1_scale,
            "lipschitz_K": self.lipschitz_K,
            "eig_kind": self.eig_kind,
            "eig_count": self.eig_count,
            "shared_noise": self.shared_noise,
            "pilot_safety": self.pilot_safety,
            "mise_configs": [list(c) for c in self.mise_configs],
        }
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        rate = d.get("rate")
        if rate is not None:
            d["rate"] = RateParams(**rate)
        if "eps_grid" in d:
            d["eps_grid"] = tuple(d["eps_grid"])
        if "t_eval" in d:
            d["t_eval"] = tuple(d["t_eval"])
        if "mise_configs" in d:
            d["mise_configs"] = tuple(tuple(c) for c in d["mise_configs"])
        try:
            return cls(**d)
        except TypeError as exc:  # unknown keys in a config file
            raise DomainError(f"bad experiment configuration: {exc}") from None


@dataclass(frozen=True)
class ReportRow:
    eps: float
    t: float
    mise: float
    std_err: float
    theory_bound: float | None
    loglog_slope: float | None


@dataclass
class ErrorReport:
    """Experiment rows plus metadata; rendered in eps-descending order."""

    rows: list[ReportRow] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def _render_order(self) -> list[ReportRow]:
        # stable, so rows sharing a noise level keep their relative order
        return sorted(self.rows, key=lambda row: -row.eps)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("eps,t,mise,std_err,theory_bound,loglog_slope\n")
        for row in self._render_order():
            tb = "" if row.theory_bound is None else repr(float(row.theory_bound))
            sl = "" if row.loglog_slope is None else repr(float(row.loglog_slope))
            buf.write(
                f"{float(row.eps)!r},{float(row.t)!r},{float(row.mise)!r},"
                f"{float(row.std_err)!r},{tb},{sl}\n"
            )
        return buf.getvalue()

    def to_json(self) -> str:
        payload = {
            "meta": self.meta,
            "rows": [
                {
                    "eps": row.eps,
                    "t": row.t,
                    "mise": row.mise,
                    "std_err": row.std_err,
                    "theory_bound": row.theory_bound,
                    "loglog_slope": row.loglog_slope,
                }
                for row in self._render_order()
            ],
        }
        return json.dumps(payload, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "ErrorReport":
        payload = json.loads(text)
        rows = [ReportRow(**r) for r in payload["rows"]]
        return cls(rows=rows, meta=payload["meta"])


def emit(report: ErrorReport, path: str, fmt: str = "csv") -> None:
    """Write the report; identical inputs give byte-identical files."""
    if fmt not in ("csv", "json"):
        raise DomainError(f"format must be 'csv' or 'json', got {fmt!r}")
    text = report.to_csv() if fmt == "csv" else report.to_json()
    with open(path, "w", newline="") as handle:
        handle.write(text)


def least_squares_slope(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Ordinary least-squares slope of ys against xs."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.size < 2:
        raise DomainError("need at least two points for a slope")
    xm = x - x.mean()
    return float(np.dot(xm, y - y.mean()) / np.dot(xm, xm))


def _attach_window_slopes(rows: list[ReportRow], window: int = 3) -> list[ReportRow]:
    """Per-row log-log slope of mise vs eps over trailing windows of 3.

    Rows are grouped by evaluation time; the first ``window - 1`` rows of a
    group (and any window touching a nonpositive mise) carry no slope.
    """
    by_t: dict[float, list[int]] = {}
    for i, row in enumerate(rows):
        by_t.setdefault(row.t, []).append(i)
    out = list(rows)
    for idxs in by_t.values():
        for j, i in enumerate(idxs):
            if j < window - 1:
                continue
            chunk = [rows[idxs[j - k]] for k in range(window)]
            if any(r.mise <= 0 or r.eps <= 0 for r in chunk):
                continue
            slope = least_squares_slope(
                [math.log(r.eps) for r in chunk], [math.log(r.mise) for r in chunk]
            )
            out[i] = replace(rows[i], loglog_slope=slope)
    return out


def remark_rate_exponent(rp: RateParams, a: float, t: float) -> float:
    """Predicted MISE order in eps at time t under the a-priori rule.

    The error is of order ``eps**E`` with
    ``E = 4bm(a-t)/((2m+1)a) + min(2-2b, 2b(4 gamma - 2 m d)/((2m+1)d),
    4 b mu/((2m+1)d))`` (the max of eps powers is the smallest exponent).
    """
    pre = 4.0 * rp.b * rp.m * (a - t) / ((2.0 * rp.m + 1.0) * a)
    candidates = (
        2.0 - 2.0 * rp.b,
        2.0 * rp.b * (4.0 * rp.gamma - 2.0 * rp.m * rp.d) / ((2.0 * rp.m + 1.0) * rp.d),
        4.0 * rp.b * rp.mu / ((2.0 * rp.m + 1.0) * rp.d),
    )
    return pre + min(candidates)


def illposed_mode_count(eps: float, a: float, beta: float) -> int:
    """Blow-up observation count: floor((2/a ln(1/eps))^(beta/2)) + 1."""
    if not (0 < eps < 1):
        raise DomainError("eps must lie in (0, 1)")
    return math.floor((2.0 / a * math.log(1.0 / eps)) ** (beta / 2.0)) + 1


# ---------------------------------------------------------------------------
# Instability demonstration
# ---------------------------------------------------------------------------


def illposed_demo(cfg: ExperimentConfig) -> ErrorReport:
    """Noise-only data through the contraction-forced problem: the input
    expectation ``eps^2 N(eps)`` vanishes while the output sup-norm-squared
    blows up like ``eps^-2`` (log-log slope at most -1.8 is asserted into
    the metadata; theoretical value -2).

    Report rows carry the Monte-Carlo output in ``mise`` and the analytic
    input expectation in ``theory_bound`` (the two columns whose divergence
    is the instability signature); per-eps input statistics live in the
    metadata.
    """
    if cfg.kind != "illposed":
        raise DomainError("config kind must be 'illposed'")
    counts = [illposed_mode_count(e, cfg.a, cfg.beta) for e in cfg.eps_grid]
    if max(counts) > cfg.p_cap:
        raise DomainError(
            f"mode count {max(counts)} exceeds the desk-scale cap {cfg.p_cap}"
        )
    gc = calibrate_growth_constants(cfg.beta, cfg.a)
    eig = EigenSystem.dirichlet_laplace_1d(max(counts))
    spec = ProblemSpec(cfg.beta, cfg.a, eig, NonlinearitySpec.gbar(gc.C3))

    per_eps = []
    rows = []
    for idx, eps in enumerate(cfg.eps_grid):
        N = counts[idx]
        eps_seed = replicate_seed(cfg.seed, idx)
        inputs = np.empty(cfg.replicates)
        outputs = np.empty(cfg.replicates)
        for r in range(cfg.replicates):
            obs = observe(np.zeros(1), np.zeros(1), eps, N, replicate_seed(eps_seed, r))
            inputs[r] = float(np.sum(obs.obs0**2))
            data = InitialData(obs.obs0, np.zeros(N))
            fld = solve_mild(spec, data, P=N, M=cfg.M)
            outputs[r] = float(np.max(np.sum(fld.coeffs**2, axis=1)))
        stats = {
            "eps": eps,
            "N": N,
            "input_analytic": eps * eps * N,
            "input_mc": float(np.mean(inputs)),
            "input_se": float(np.std(inputs, ddof=1) / math.sqrt(cfg.replicates)),
            "output_mc": float(np.mean(outputs)),
            "output_se": float(np.std(outputs, ddof=1) / math.sqrt(cfg.replicates)),
        }
        per_eps.append(stats)
        rows.append(
            ReportRow(
                eps=eps,
                t=cfg.a,
                mise=stats["output_mc"],
                std_err=stats["output_se"],
                theory_bound=stats["input_analytic"],
                loglog_slope=None,
            )
        )
    rows = _attach_window_slopes(rows)

    out_slope = least_squares_slope(
        [math.log(s["eps"]) for s in per_eps], [math.log(s["output_mc"]) for s in per_eps]
    )
    analytic = [s["input_analytic"] for s in per_eps]
    checks = {
        "input_strictly_decreasing": all(b < a for a, b in zip(analytic, analytic[1:])),
        "input_matches_analytic_4se": all(
            abs(s["input_mc"] - s["input_analytic"]) <= 4.0 * s["input_se"] for s in per_eps
        ),
        "output_strictly_increasing": all(
            b["output_mc"] > a["output_mc"] for a, b in zip(per_eps, per_eps[1:])
        ),
        "output_rises_two_decades": (
            per_eps[-1]["output_mc"] >= 100.0 * per_eps[0]["output_mc"]
        ),
        "output_slope_at_most_minus_1p8": out_slope <= -1.8,
    }
    meta = {
        "experiment": "illposed",
        "config": cfg.to_dict(),
        "growth_constant_C3": gc.C3,
        "per_eps": per_eps,
        "output_loglog_slope": out_slope,
        "checks": checks,
        "invariants_ok": all(checks.values()),
    }
    return ErrorReport(rows=rows, meta=meta)


# ---------------------------------------------------------------------------
# Convergence-rate tables
# ---------------------------------------------------------------------------


def _convergence_eig(cfg: ExperimentConfig) -> EigenSystem:
    if cfg.eig_kind == "dirichlet":
        return EigenSystem.dirichlet_laplace_1d(cfg.eig_count)
    if cfg.eig_kind == "linear":
        return EigenSystem.from_eigenvalues(np.arange(1, cfg.eig_count + 1, dtype=float))
    raise DomainError(f"unknown eig_kind {cfg.eig_kind!r}")


def _t_index(t: float, a: float, M: int) -> int:
    it = round(t / a * M)
    if not (0 <= it <= M) or abs(t - it * a / M) > 1e-9 * a:
        raise DomainError(f"t={t} does not sit on the M={M} grid")
    return int(it)


def _source_constants(
    truth: FourierField, lam: np.ndarray, beta: float, a: float, mu: float, r: float
) -> tuple[float, float]:
    """Source-condition sums of the manufactured truth (finitely many modes,
    so both are finite and computable): the mu-weighted and the r-margin
    exponentially weighted spectral sums, maximized over the time grid."""
    growth = lam ** (1.0 / beta)
    u_sq = truth.coeffs**2
    w_mu = lam**mu * np.exp(
        2.0 * (a - truth.t_grid)[:, None] * growth[None, :]
    )
    m_src = float(np.max(np.sum(w_mu * u_sq, axis=1)))
    w_r = np.exp(2.0 * (a - truth.t_grid + r)[:, None] * growth[None, :])
    m1 = float(np.max(np.sum(w_r * u_sq, axis=1)))
    return m_src, m1


def convergence_table(cfg: ExperimentConfig) -> ErrorReport:
    """Monte-Carlo MISE of the regularized solution against manufactured
    truth across the eps grid, with the theoretical bound at pilot-calibrated
    constants and the predicted rate order in the metadata.

    ``norm='l2'`` measures plain coefficient distance; ``norm='hq'`` weights
    it by ``lam^q`` (with ``q = 0`` the two paths are bit-identical).
    """
    if cfg.kind != "converge":
        raise DomainError("config kind must be 'converge'")
    if cfg.rate is None:
        raise DomainError("convergence experiment needs rate parameters")
    rp = cfg.rate
    eig = _convergence_eig(cfg)
    lam_full = eig.eigenvalues
    K = cfg.lipschitz_K

    def evaluator(t, c):
        return K * c / (1.0 + lam_full[: c.size])

    nl = NonlinearitySpec.lipschitz(K, evaluator) if K > 0 else NonlinearitySpec.zero()
    spec = ProblemSpec(cfg.beta, cfg.a, eig, nl)
    profile = power_law_profile(cfg.truth_decay, cfg.truth_modes, u1_scale=cfg.truth_u1_scale)
    data, truth = manufacture(spec, cfg.truth_modes, profile, M=cfg.M)

    t_eval = cfg.t_eval or (cfg.a / 2.0,)
    t_idx = {t: _t_index(t, cfg.a, cfg.M) for t in t_eval}
    q_eff = cfg.q if cfg.norm == "hq" else 0.0

    gamma2 = 2.0 * rp.gamma
    M0 = hq_norm(data.u0, gamma2, eig) ** 2 + hq_norm(data.u1, gamma2, eig) ** 2
    lam_truth = lam_full[: cfg.truth_modes]
    M_src, M1 = _source_constants(truth, lam_truth, cfg.beta, cfg.a, rp.mu, cfg.r)

    reg_cfgs: list[RegConfig] = []
    for eps in cfg.eps_grid:
        rc = choose_params(eps, rp, cfg.a, cfg.beta, eig, M=cfg.M)
        if rc.N > eig.count:
            raise DomainError(
                f"rule gives N={rc.N} but the eigensystem stores {eig.count}; "
                "raise eig_count"
            )
        reg_cfgs.append(rc)

    def mc_pass(stream: int) -> list[dict]:
        """One full Monte-Carlo sweep over the eps grid on its own substream."""
        out: list[dict] = []
        for idx, eps in enumerate(cfg.eps_grid):
            rc = reg_cfgs[idx]
            eps_seed = replicate_seed(cfg.seed, stream + idx)
            per_t = {t: np.empty(cfg.replicates) for t in t_eval}
            for r in range(cfg.replicates):
                obs = observe(data.u0, data.u1, eps, rc.N, replicate_seed(eps_seed, r),
                              shared_noise=cfg.shared_noise)
                fld = regularized_solve(spec, obs, rc)
                for t in t_eval:
                    row = fld.coeffs[t_idx[t]]
                    ref = truth.coeffs[2 * t_idx[t]]
                    n = max(row.size, ref.size)
                    diff = np.zeros(n)
                    diff[: row.size] = row
                    diff[: ref.size] -= ref
                    per_t[t][r] = hq_norm(diff, q_eff, eig) ** 2
            for t in t_eval:
                vals = per_t[t]
                out.append(
                    {
                        "eps": eps,
                        "t": t,
                        "N": rc.N,
                        "B_N": rc.B_N,
                        "P_retained": rc.P_retained,
                        "mise": float(np.mean(vals)),
                        "se": float(np.std(vals, ddof=1) / math.sqrt(cfg.replicates)),
                    }
                )
        return out

    def unit_bound(s: dict) -> float:
        """Bound value at C1 = D1 = 1 for a stat row."""
        rc = reg_cfgs[cfg.eps_grid.index(s["eps"])]
        if cfg.norm == "l2":
            return theory_bound_l2(
                rp, rc, s["t"], s["eps"], M0, M_src, 1.0, 1.0, cfg.a, cfg.beta
            ).l2_bound
        return theory_bound_hq(
            rp, rc, s["t"], cfg.r, q_eff, s["eps"], M0, M1, 1.0, 1.0, cfg.a, cfg.beta
        ).hq_bound

    # Out-of-sample pilot: an independent Monte-Carlo sweep of the same grid
    # calibrates the undetermined bound constants as the max empirical
    # ratio times a safety factor; the main sweep is then checked against
    # the frozen constants.
    pilot = mc_pass(_PILOT_STREAM)
    c_req = max(s["mise"] / unit_bound(s) for s in pilot)
    c_cal = cfg.pilot_safety * max(c_req, 1e-12)

    stats = mc_pass(0)

    rows = []
    for s in stats:
        rc = reg_cfgs[cfg.eps_grid.index(s["eps"])]
        if cfg.norm == "l2":
            tb = theory_bound_l2(
                rp, rc, s["t"], s["eps"], M0, M_src, c_cal, c_cal, cfg.a, cfg.beta
            )
            bound = tb.l2_bound
        else:
            tb = theory_bound_hq(
                rp, rc, s["t"], cfg.r, q_eff, s["eps"], M0, M1, c_cal, c_cal, cfg.a, cfg.beta
            )
            bound = tb.hq_bound
        s["bound"] = bound
        rows.append(
            ReportRow(
                eps=s["eps"],
                t=s["t"],
                mise=s["mise"],
                std_err=s["se"],
                theory_bound=bound,
                loglog_slope=None,
            )
        )
    rows = _attach_window_slopes(rows)

    per_t_checks = {}
    for t in t_eval:
        grp = [s for s in stats if s["t"] == t]
        slope = least_squares_slope(
            [math.log(s["eps"]) for s in grp], [math.log(s["mise"]) for s in grp]
        )
        predicted = remark_rate_exponent(rp, cfg.a, t)
        per_t_checks[repr(t)] = {
            "observed_slope": slope,
            "predicted_order": predicted,
            "slope_within_quarter": abs(slope - predicted) <= 0.25,
            "monotone_decreasing": all(
                b["mise"] < a["mise"] for a, b in zip(grp, grp[1:])
            ),
            "bound_satisfied": all(s["mise"] <= s["bound"] for s in grp),
        }
    scan = admissibility_scan(rp, cfg.a, cfg.beta, eig, cfg.eps_grid)
    meta = {
        "experiment": "converge",
        "config": cfg.to_dict(),
        "norm": cfg.norm,
        "q": q_eff,
        "constants": {"M0": M0, "M_source": M_src, "M1": M1, "C1": c_cal, "D1": c_cal},
        "rows_detail": stats,
        "per_t": per_t_checks,
        "admissibility": scan,
        "invariants_ok": all(
            c["monotone_decreasing"] and c["bound_satisfied"] and c["slope_within_quarter"]
            for c in per_t_checks.values()
        ),
    }
    return ErrorReport(rows=rows, meta=meta)


# ---------------------------------------------------------------------------
# Data-MISE identity validation
# ---------------------------------------------------------------------------


def mise_check(cfg: ExperimentConfig) -> ErrorReport:
    """Monte-Carlo vs analytic data MISE for several (u0, N, eps) settings.

    The expectation identity is exact, so agreement within four standard
    errors at the configured replicate count is the pass condition; the
    variance-bias bound must hold on every setting.
    """
    if cfg.kind != "mise-check":
        raise DomainError("config kind must be 'mise-check'")
    rows = []
    details = []
    for idx, (decay, modes, N, eps, gamma) in enumerate(cfg.mise_configs):
        eig = EigenSystem.dirichlet_laplace_1d(int(modes))
        u0 = np.arange(1, int(modes) + 1, dtype=float) ** -float(decay)
        analytic, bound = mise_bound_check(u0, float(gamma), float(eps), int(N), eig)

        def estimator(s, _u0=u0, _eps=eps, _N=N):
            return truncated_data(
                observe(_u0, np.zeros(1), float(_eps), int(_N), s,
                        shared_noise=cfg.shared_noise)
            )[0]

        est = mise_mc(u0, estimator, cfg.replicates, replicate_seed(cfg.seed, idx))
        agree = abs(est.mean_sq_err - analytic) <= 4.0 * est.std_err
        details.append(
            {
                "decay": decay,
                "modes": modes,
                "N": N,
                "eps": eps,
                "gamma": gamma,
                "analytic": analytic,
                "variance_bias_bound": bound,
                "mc": est.mean_sq_err,
                "se": est.std_err,
                "agrees_4se": agree,
                "bound_holds": analytic <= bound,
            }
        )
        rows.append(
            ReportRow(
                eps=float(eps),
                t=0.0,
                mise=est.mean_sq_err,
                std_err=est.std_err,
                theory_bound=bound,
                loglog_slope=None,
            )
        )
    meta = {
        "experiment": "mise-check",
        "config": cfg.to_dict(),
        "settings": details,
        "invariants_ok": all(d["agrees_4se"] and d["bound_holds"] for d in details),
    }
    return ErrorReport(rows=rows, meta=meta)
