"""
campaign.py
-----------
Seeded sampling campaigns over the pointwise lemmas.

Each sample is reproducible from (seed, K, index). Sec-bounded curvature tensors are drawn
from a per-K pool so the expensive max-sectional estimation is amortized; differentials
and symmetric forms are fresh for every sample.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Sequence

import numpy as np
import pandas as pd

from lemmas.checks import (
    EqualityCase,
    EqualitySub,
    chain_margins,
    classify_equality_case,
    q0_value,
    q1_value,
)
from lemmas.sampling import (
    LemmaSample,
    algebraic_sectional,
    conformal_differential,
    constant_curvature_tensor,
    random_differential,
    random_psd,
    sample_curvature_with_bound,
)
from utils.logger_config import get_logger

logger = get_logger(__name__)

Q0_TOL = 1e-12
Q1_TOL = 1e-10
EQUALITY_FIT_TOL = 1e-8
STRICT_POSITIVITY_FLOOR = 1e-12
POOL_SIZE = 1000
BOUND_CHECK_PLANES = 1000


@dataclass
class _Tally:
    """Running violation count and worst slack for one check."""

    check: str
    K: float
    tolerance: float
    samples: int = 0
    violations: int = 0
    worst: float = np.inf
    worst_index: int = -1

    def record(self, slack: float, index: int) -> bool:
        self.samples += 1
        if slack < self.worst:
            self.worst, self.worst_index = float(slack), index
        violated = bool(slack < -self.tolerance)
        self.violations += int(violated)
        return violated

    def row(self) -> dict:
        return {
            "check": self.check,
            "K": self.K,
            "samples": self.samples,
            "violations": self.violations,
            "worst_slack": self.worst if self.samples else np.nan,
            "worst_index": self.worst_index,
            "tolerance": self.tolerance,
        }


@dataclass(frozen=True, eq=False)
class LemmaCampaignResult:
    summary: pd.DataFrame
    witnesses: List[dict] = field(default_factory=list)
    params: Dict[str, object] = field(default_factory=dict)

    @property
    def total_violations(self) -> int:
        return int(self.summary["violations"].sum()) if not self.summary.empty else 0

    @property
    def passed(self) -> bool:
        return self.total_violations == 0


def curvature_pool(n: int, K: float, seed: int, size: int = POOL_SIZE) -> List[np.ndarray]:
    rng = np.random.default_rng([seed, 7919, int(round(K * 1e6)) & 0xFFFFFFFF])
    return [sample_curvature_with_bound(n, K, seed, method="operator", rng=rng) for _ in range(size)]


def _witness(check: str, sample: LemmaSample, slack: float, campaign_seed: int) -> dict:
    logger.error(f"Lemma check '{check}' violated (slack {slack:.3e}) for K={sample.K}, seed={sample.seed}")
    witness = sample.to_dict()
    witness.update({"check": check, "slack": float(slack), "campaign_seed": campaign_seed})
    return witness


def run_lemma_campaign(m: int, n: int, Ks: Sequence[float], samples: int, seed: int,
                       pool_size: int = POOL_SIZE, q0_tol: float = Q0_TOL, q1_tol: float = Q1_TOL,
                       equality_tol: float = EQUALITY_FIT_TOL) -> LemmaCampaignResult:
    """
    Run every pointwise check over `samples` draws per K and return a summary table.

    Checks: q0_sign, q1_sign, q1_summands, q1_forms, bound_sample (sampled planes of the
    pool tensors), chain_nonpositive, chain_positive, and for K > 0 rank1_positive,
    equality_forcing, equality_rejection and rank_dichotomy.

    Sec-bounded tensors are drawn from a pool of min(pool_size, samples) tensors per K and
    reused cyclically; the differentials and forms are fresh for every sample. The pool size
    actually used is reported in params.
    """
    if m < 2:
        raise ValueError(f"Lemma campaigns need m >= 2, got {m}")
    if samples <= 0:
        raise ValueError("samples must be positive")
    logger.info(f"Lemma campaign m={m} n={n} K={list(Ks)} samples={samples} seed={seed}")

    tallies: List[_Tally] = []
    witnesses: List[dict] = []

    for K in Ks:
        K = float(K)
        tally = {name: _Tally(name, K, tol) for name, tol in (
            ("q0_sign", q0_tol), ("q1_sign", q1_tol), ("q1_summands", q1_tol), ("q1_forms", q1_tol),
            ("bound_sample", 1e-9), ("chain_nonpositive", q1_tol), ("chain_positive", q1_tol),
        )}
        if K > 0.0:
            for name in ("rank1_positive", "equality_forcing", "equality_rejection", "rank_dichotomy"):
                tally[name] = _Tally(name, K, {"rank1_positive": q1_tol, "equality_forcing": equality_tol,
                                              "equality_rejection": 0.0, "rank_dichotomy": 0.0}[name])

        pool = curvature_pool(n, K, seed, min(pool_size, samples)) if K >= 0.0 else []
        bound_rng = np.random.default_rng([seed, 104729])
        for index, R in enumerate(pool):
            xs, ys = bound_rng.normal(size=(BOUND_CHECK_PLANES, n)), bound_rng.normal(size=(BOUND_CHECK_PLANES, n))
            top = float(np.nanmax(algebraic_sectional(R, xs, ys)))
            tally["bound_sample"].record(K - top, index)

        constant = constant_curvature_tensor(n, K)
        for index in range(samples):
            rng = np.random.default_rng([seed, index, int(round(K * 1e6)) & 0xFFFFFFFF])
            R = pool[index % len(pool)] if pool else constant
            sample = LemmaSample(m=m, n=n, dphi=random_differential(n, m, rng), A=random_psd(m, rng),
                                 R=R, K=K, seed=index, sec_bounded=bool(pool))

            q0 = q0_value(sample.A, sample.dphi)
            if tally["q0_sign"].record(q0, index):
                witnesses.append(_witness("q0_sign", sample, q0, seed))

            if not pool:
                continue
            breakdown = q1_value(sample.dphi, R, K)
            scale = max(1.0, float(np.sum(breakdown.c ** 2)))
            checks = {
                "q1_sign": breakdown.value / scale,
                "q1_summands": breakdown.min_summand / scale,
                "q1_forms": -breakdown.forms_gap / scale,
            }
            margins = chain_margins(breakdown)
            if np.isfinite(margins["nonpositive_kappa"]):
                checks["chain_nonpositive"] = margins["nonpositive_kappa"] / scale
            if np.isfinite(margins["positive_kappa"]):
                checks["chain_positive"] = margins["positive_kappa"] / scale
            for name, slack in checks.items():
                if tally[name].record(slack, index):
                    witnesses.append(_witness(name, sample, slack, seed))

            if K <= 0.0:
                continue
            rank1 = random_differential(n, m, rng, rank=1)
            ones = q1_value(rank1, R, K)
            floor = K * float(np.max(np.diag(ones.c))) ** 2
            slack = (ones.value - floor) / max(1.0, floor)
            if tally["rank1_positive"].record(slack, index):
                witnesses.append(_witness("rank1_positive", sample, slack, seed))

            if n >= m:
                mu = float(rng.uniform(0.1, 3.0))
                conformal = conformal_differential(n, m, mu, rng)
                verdict = classify_equality_case(conformal, constant, K, seed=index)
                ok = (verdict.case == EqualityCase.RANK_GE2_CONST_CURV_K
                      and verdict.sub == EqualitySub.CONFORMAL_AT_POINT
                      and verdict.mu_estimate is not None)
                gap = abs(verdict.mu_estimate - mu) if ok else np.inf
                if tally["equality_forcing"].record(-gap, index):
                    witnesses.append(_witness("equality_forcing", sample, -gap, seed))

            # a claimed equality case must have |Q1| within the equality tolerance
            if min(n, m) >= 2:
                generic = random_differential(n, m, rng, rank=int(rng.integers(2, min(n, m) + 1)))
                verdict = classify_equality_case(generic, R, K, tol=equality_tol, seed=index)
                q1_generic = abs(q1_value(generic, R, K).value)
                if verdict.case == EqualityCase.NOT_EQUALITY:
                    slack = q1_generic
                else:
                    slack = equality_tol - q1_generic
                if tally["equality_rejection"].record(slack, index):
                    witnesses.append(_witness("equality_rejection", sample, slack, seed))

            rank = int(rng.integers(1, m))
            partial = random_differential(n, m, rng, rank=rank)
            strict = q1_value(partial, constant, K).value
            slack = strict - STRICT_POSITIVITY_FLOOR
            if tally["rank_dichotomy"].record(slack, index):
                witnesses.append(_witness("rank_dichotomy", sample, slack, seed))

        tallies.extend(tally.values())

    summary = pd.DataFrame([t.row() for t in tallies])
    result = LemmaCampaignResult(
        summary=summary,
        witnesses=witnesses,
        params={"m": m, "n": n, "Ks": [float(K) for K in Ks], "samples": samples, "seed": seed,
                "pool_size": pool_size, "distinct_curvature_tensors_per_K": min(pool_size, samples),
                "curvature_tensor_reuse": "cyclic"},
    )
    if result.passed:
        logger.info(f"Lemma campaign finished: {len(summary)} checks, 0 violations")
    else:
        logger.warning(f"Lemma campaign finished with {result.total_violations} violations")
    return result
