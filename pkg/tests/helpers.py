import numpy as np
from scipy.stats import chi2


def chi2_pvalue(samples, probs, min_expected=5.0):
    """Pearson goodness-of-fit p-value of integer samples against ``probs``.

    Bins are merged from the right until every merged bin expects at least
    ``min_expected`` counts; mass beyond ``probs`` joins the last bin.
    """
    samples = np.asarray(samples, dtype=np.int64)
    probs = np.asarray(probs, dtype=float)
    total = samples.size
    counts = np.bincount(samples, minlength=probs.size).astype(float)
    overflow = counts[probs.size:].sum()
    counts = counts[: probs.size]
    counts[-1] += overflow
    expected = probs * total
    expected[-1] += max(0.0, total - expected.sum())

    obs, exp, acc_o, acc_e = [], [], 0.0, 0.0
    for o, e in zip(counts[::-1], expected[::-1]):
        acc_o += o
        acc_e += e
        if acc_e >= min_expected:
            obs.append(acc_o)
            exp.append(acc_e)
            acc_o = acc_e = 0.0
    if acc_e > 0 or acc_o > 0:
        if obs:
            obs[-1] += acc_o
            exp[-1] += acc_e
        else:
            obs.append(acc_o)
            exp.append(acc_e)
    obs, exp = np.array(obs), np.array(exp)
    if obs.size < 2:
        return 1.0
    stat = float(np.sum((obs - exp) ** 2 / exp))
    return float(chi2.sf(stat, obs.size - 1))
