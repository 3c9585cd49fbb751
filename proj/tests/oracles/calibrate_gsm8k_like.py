"""Brute-force calibration of the gsm8k_like simulation scenario.

Enumerates the draft-length distribution exactly to get E[longest of n drafts]
and E[accepted draft], then derives the rethink fraction and selection cost
that place the latency split at target/draft/selection = 33.9/60.2/5.9 with a
5:1 draft:target token-rate ratio. Prints the frozen constants used by the
acceptance suite.
"""
from fractions import Fraction as F

TARGET_TPS = 11.4          # 302 tokens / 26.5 s
DRAFT_TPS = 5 * TARGET_TPS
RETHINK_TOKENS = 302
N = 5
SHARE = {"target": 0.339, "draft": 0.602, "selection": 0.059}


def expected_max(lo, hi, n):
    w = hi - lo + 1
    total = F(0)
    for k in range(lo, hi + 1):
        # P(max == k) = (k-lo+1)^n - (k-lo)^n over w^n
        total += k * (F(k - lo + 1) ** n - F(k - lo) ** n) / F(w) ** n
    return total


def scenario(lo, hi, questions=500):
    emax = float(expected_max(lo, hi, N))
    eacc = (lo + hi) / 2
    draft_s = emax / DRAFT_TPS
    sel_s = draft_s * SHARE["selection"] / SHARE["draft"]
    target_s = draft_s * SHARE["target"] / SHARE["draft"]
    rho = target_s / (RETHINK_TOKENS / TARGET_TPS)
    hard = round(rho * questions)
    rho_q = hard / questions
    t_target = rho_q * RETHINK_TOKENS / TARGET_TPS
    total = draft_s + sel_s + t_target
    valid = (1 - rho_q) * eacc + rho_q * RETHINK_TOKENS + 1
    s_scot = valid / total
    return dict(lo=lo, hi=hi, emax=emax, eacc=eacc, sel_ms=sel_s * 1000, rho=rho,
                hard=hard, frac=(t_target / total, draft_s / total, sel_s / total),
                r_prime=s_scot / TARGET_TPS, t_scot=total,
                r=(RETHINK_TOKENS / TARGET_TPS) / total)


best = None
for lo in range(1, 200):
    for hi in range(240, 320):
        s = scenario(lo, hi)
        err = abs(s["emax"] - 265) + 100 * abs(s["r_prime"] - 2.10)
        if best is None or err < best[0]:
            best = (err, s)
s = best[1]
for k, v in s.items():
    print(f"{k} = {v}")
