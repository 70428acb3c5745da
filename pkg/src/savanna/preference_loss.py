"""DPO and IRPO preference losses over externally supplied log-probabilities.

Pure numeric functions: no model, no backprop.  The IRPO variant adds an
alpha-weighted, length-normalized negative log-likelihood term on the
chosen response to the standard DPO log-sigmoid margin loss.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable


@dataclass
class PairLogps:
    policy_chosen: list[float]
    policy_rejected: list[float]
    ref_chosen: list[float]
    ref_rejected: list[float]

    def __post_init__(self) -> None:
        for name in ("policy_chosen", "policy_rejected", "ref_chosen", "ref_rejected"):
            values = getattr(self, name)
            if len(values) < 1:
                raise ValueError(f"{name} must have at least one entry")
            if any(v > 0 for v in values):
                raise ValueError(f"{name} contains a positive log-probability")
        if len(self.policy_chosen) != len(self.ref_chosen):
            raise ValueError("policy_chosen and ref_chosen lengths differ")
        if len(self.policy_rejected) != len(self.ref_rejected):
            raise ValueError("policy_rejected and ref_rejected lengths differ")


@dataclass
class LossParams:
    beta: float = 0.1
    alpha_rpo: float = 1.0

    def __post_init__(self) -> None:
        if self.beta <= 0:
            raise ValueError("beta must be > 0")
        if self.alpha_rpo < 0:
            raise ValueError("alpha_rpo must be >= 0")


def _softplus(x: float) -> float:
    # log(1 + exp(x)), overflow-safe
    if x > 0:
        return x + math.log1p(math.exp(-x))
    return math.log1p(math.exp(x))


def _sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def margin(p: PairLogps) -> float:
    """Scalar preference margin: (chosen log-ratio) - (rejected log-ratio)."""
    return (sum(p.policy_chosen) - sum(p.ref_chosen)) - (
        sum(p.policy_rejected) - sum(p.ref_rejected)
    )


def dpo_loss(p: PairLogps, params: LossParams = LossParams()) -> float:
    """-log sigmoid(beta * margin), numerically stabilized."""
    return _softplus(-params.beta * margin(p))


def nll_chosen(p: PairLogps) -> float:
    """Length-normalized negative log-likelihood of the chosen response."""
    return -sum(p.policy_chosen) / len(p.policy_chosen)


def irpo_loss(p: PairLogps, params: LossParams = LossParams()) -> float:
    """DPO loss plus alpha_rpo times the chosen-response NLL."""
    return dpo_loss(p, params) + params.alpha_rpo * nll_chosen(p)


@dataclass
class PairGradients:
    """Gradients with respect to each per-token log-probability entry."""

    policy_chosen: list[float] = field(default_factory=list)
    policy_rejected: list[float] = field(default_factory=list)
    ref_chosen: list[float] = field(default_factory=list)
    ref_rejected: list[float] = field(default_factory=list)


def loss_gradients(p: PairLogps, params: LossParams = LossParams(),
                   kind: str = "irpo") -> PairGradients:
    """Analytic gradients of ``dpo_loss`` or ``irpo_loss``."""
    if kind not in ("dpo", "irpo"):
        raise ValueError(f"unknown loss kind: {kind!r}")
    z = params.beta * margin(p)
    s = _sigmoid(-z)  # = 1 - sigmoid(z); d(-log sigmoid(z))/dz = -s
    g_pc = -params.beta * s
    if kind == "irpo":
        g_pc -= params.alpha_rpo / len(p.policy_chosen)
    return PairGradients(
        policy_chosen=[g_pc] * len(p.policy_chosen),
        policy_rejected=[params.beta * s] * len(p.policy_rejected),
        ref_chosen=[params.beta * s] * len(p.ref_chosen),
        ref_rejected=[-params.beta * s] * len(p.ref_rejected),
    )


def audit_pairs(pairs: Iterable[PairLogps], params: LossParams = LossParams()) -> dict:
    """Per-pair DPO/IRPO losses and their means, for offline auditing."""
    rows = []
    for p in pairs:
        rows.append({
            "margin": margin(p),
            "nll_chosen": nll_chosen(p),
            "dpo_loss": dpo_loss(p, params),
            "irpo_loss": irpo_loss(p, params),
        })
    if not rows:
        raise ValueError("no pairs to audit")
    return {
        "params": {"beta": params.beta, "alpha_rpo": params.alpha_rpo},
        "pairs": rows,
        "mean_dpo_loss": sum(r["dpo_loss"] for r in rows) / len(rows),
        "mean_irpo_loss": sum(r["irpo_loss"] for r in rows) / len(rows),
    }


def read_pair_logps_jsonl(path: str | Path) -> list[PairLogps]:
    pairs = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.strip():
                pairs.append(PairLogps(**json.loads(line)))
    return pairs


def write_pair_logps_jsonl(pairs: Iterable[PairLogps], path: str | Path) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as f:
        for p in pairs:
            f.write(json.dumps(p.__dict__) + "\n")
            n += 1
    return n
