"""Explore the DPO and IRPO losses on hand-built log-probability pairs.

Shows the ln(2) zero-margin fixture, how the margin moves the loss, the
alpha-weighted NLL term that separates IRPO from DPO, and a finite-difference
check of the analytic gradients.
"""

import math

from savanna.preference_loss import (
    LossParams,
    PairLogps,
    dpo_loss,
    irpo_loss,
    loss_gradients,
    margin,
    nll_chosen,
)


def main():
    params = LossParams(beta=0.1, alpha_rpo=1.0)

    # zero margin: policy and reference agree, DPO sits exactly at ln 2
    p0 = PairLogps(policy_chosen=[-0.5, -1.5], policy_rejected=[-2.0],
                   ref_chosen=[-0.5, -1.5], ref_rejected=[-2.0])
    print("zero-margin fixture")
    print(f"  margin     = {margin(p0):.4f}")
    print(f"  dpo_loss   = {dpo_loss(p0, params):.12f}  (ln 2 = {math.log(2):.12f})")
    print(f"  nll_chosen = {nll_chosen(p0):.4f}")
    print(f"  irpo_loss  = {irpo_loss(p0, params):.12f}  (ln 2 + 1)")

    # sweeping the policy's preference for the chosen response
    print("\nloss vs margin (beta = 0.1)")
    print(f"  {'policy_chosen':>14} {'margin':>8} {'dpo':>8} {'irpo':>8}")
    for pc in (-4.0, -2.0, -1.0, -0.5, -0.1):
        p = PairLogps([pc], [-2.0], [-1.0], [-2.0])
        print(f"  {pc:>14.1f} {margin(p):>8.2f} {dpo_loss(p, params):>8.4f} "
              f"{irpo_loss(p, params):>8.4f}")

    # analytic gradient vs central finite differences
    p = PairLogps([-0.8, -1.2], [-2.5, -0.3], [-1.0, -1.0], [-2.0, -0.5])
    grads = loss_gradients(p, params, "irpo")
    step = 1e-6
    up = irpo_loss(PairLogps([-0.8 + step, -1.2], p.policy_rejected,
                             p.ref_chosen, p.ref_rejected), params)
    down = irpo_loss(PairLogps([-0.8 - step, -1.2], p.policy_rejected,
                               p.ref_chosen, p.ref_rejected), params)
    numeric = (up - down) / (2 * step)
    print("\ngradient check (d irpo / d policy_chosen[0])")
    print(f"  analytic = {grads.policy_chosen[0]:.10f}")
    print(f"  numeric  = {numeric:.10f}")


if __name__ == "__main__":
    main()
