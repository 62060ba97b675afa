"""Quality metrics for inferred topic compositions.

Support metrics compare "prominent" topic sets (the smallest head of the
sorted composition covering a mass threshold); distance metrics compare
the full distributions; corpus-level metrics check consistency with the
prior's second moment.
"""

import math
from dataclasses import dataclass

import numpy as np

from .model import CompositionMatrix

KL_EPS = 1e-10  # smoothing applied to predictions so KL stays finite

METRIC_ORDER = (
    "precision",
    "recall",
    "f1",
    "l1_error",
    "linf_error",
    "hellinger",
    "kl",
    "nonsupp_mass",
)


def prominent_topics(w, mass=0.8):
    """Indices of the smallest prefix of topics, sorted by decreasing
    weight (ties broken by index), whose cumulative weight reaches `mass`.
    """
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 1 or w.size < 1:
        raise ValueError("expected a nonempty vector")
    if not (0.0 < mass <= 1.0):
        raise ValueError(f"mass must lie in (0, 1], got {mass!r}")
    order = np.argsort(-w, kind="stable")
    csum = np.cumsum(w[order])
    # first index whose cumulative sum reaches the mass; rounding may keep
    # the total just under it, in which case all topics are prominent
    head = min(int(np.searchsorted(csum, mass, side="left")), w.size - 1)
    return set(int(k) for k in order[: head + 1])


def set_prf(truth, pred):
    """Precision, recall and F1 of a predicted topic set against the truth."""
    truth, pred = set(truth), set(pred)
    if not truth:
        raise ValueError("truth set must be nonempty")
    hits = len(truth & pred)
    precision = hits / len(pred) if pred else 0.0
    recall = hits / len(truth)
    f1 = 0.0 if hits == 0 else 2.0 * precision * recall / (precision + recall)
    return precision, recall, f1


def l1_error(wt, wp):
    return float(np.abs(wt - wp).sum())


def linf_error(wt, wp):
    return float(np.abs(wt - wp).max())


def hellinger(wt, wp):
    bc = float(np.sqrt(wt * wp).sum())
    return math.sqrt(max(1.0 - bc, 0.0))


def kl_divergence(wt, wp):
    """KL(truth || smoothed prediction); zero-weight truth terms drop out."""
    K = wt.size
    q = (wp + KL_EPS) / (1.0 + K * KL_EPS)
    mask = wt > 0.0
    return float(np.sum(wt[mask] * np.log(wt[mask] / q[mask])))


def distribution_metrics(wt, wp):
    """(l1, linf, hellinger, kl) between a truth and a predicted composition."""
    wt = np.asarray(wt, dtype=np.float64)
    wp = np.asarray(wp, dtype=np.float64)
    return l1_error(wt, wp), linf_error(wt, wp), hellinger(wt, wp), kl_divergence(wt, wp)


def nonsupport_mass(wt, wp, mass=0.8):
    """Predicted weight landing outside the truth's prominent topic set."""
    keep = np.ones(wt.size, dtype=bool)
    keep[list(prominent_topics(wt, mass))] = False
    return float(wp[keep].sum())


def prior_distance(A0, comp):
    """Frobenius distance between the prior second moment A0 and the
    empirical second moment of the inferred compositions."""
    W = comp.W if isinstance(comp, CompositionMatrix) else np.asarray(comp, dtype=np.float64)
    A0 = np.asarray(A0, dtype=np.float64)
    if A0.shape != (W.shape[0], W.shape[0]):
        raise ValueError(f"A0 has shape {A0.shape}, expected ({W.shape[0]}, {W.shape[0]})")
    return float(np.linalg.norm(A0 - (W @ W.T) / W.shape[1]))


def random_baseline(K, M, seed=0):
    """Compositions drawn uniformly from the simplex; the floor any real
    estimator should beat."""
    rng = np.random.default_rng(seed)
    W = rng.dirichlet(np.ones(K), size=M).T
    return CompositionMatrix(W)


@dataclass(frozen=True)
class EvalReport:
    """Per-document metric arrays plus corpus-level numbers."""

    per_doc: dict
    prior_dist: object  # float, or None when no prior was supplied
    prominent_mass: float

    def __post_init__(self):
        if set(self.per_doc) != set(METRIC_ORDER):
            raise ValueError(f"per_doc must have exactly the keys {METRIC_ORDER}")
        converted = {}
        for name in METRIC_ORDER:
            v = np.asarray(self.per_doc[name], dtype=np.float64).ravel()
            if not np.isfinite(v).all():
                raise ValueError(f"metric {name} has non-finite entries")
            converted[name] = v
        sizes = {len(v) for v in converted.values()}
        if len(sizes) != 1 or 0 in sizes:
            raise ValueError("per-document arrays must share one nonzero length")
        object.__setattr__(self, "per_doc", converted)
        unit = ("precision", "recall", "f1", "linf_error", "hellinger", "nonsupp_mass")
        slack = 1e-12
        for name in unit:
            v = self.per_doc[name]
            if v.min() < -slack or v.max() > 1.0 + slack:
                raise ValueError(f"metric {name} outside [0, 1]")
        v = self.per_doc["l1_error"]
        if v.min() < -slack or v.max() > 2.0 + slack:
            raise ValueError("metric l1_error outside [0, 2]")
        if self.per_doc["kl"].min() < -1e-9:
            raise ValueError("negative KL divergence")
        if self.prior_dist is not None and not (float(self.prior_dist) >= 0.0):
            raise ValueError(f"prior_dist must be >= 0, got {self.prior_dist!r}")

    @property
    def M(self):
        return len(self.per_doc["precision"])

    def mean(self, name):
        return float(self.per_doc[name].mean())

    def std(self, name):
        return float(self.per_doc[name].std())


def evaluate_compositions(truth, pred, prior=None, prominent_mass=0.8):
    """Compare predicted compositions against the truth, column by column.

    `prior`, if given, is the target second moment used for the
    corpus-level prior_dist number.
    """
    Wt, Wp = truth.W, pred.W
    if Wt.shape != Wp.shape:
        raise ValueError(f"truth is {Wt.shape}, prediction is {Wp.shape}")
    M = Wt.shape[1]
    per_doc = {name: np.empty(M) for name in METRIC_ORDER}
    for m in range(M):
        wt, wp = Wt[:, m], Wp[:, m]
        ts = prominent_topics(wt, prominent_mass)
        ps = prominent_topics(wp, prominent_mass)
        p, r, f = set_prf(ts, ps)
        per_doc["precision"][m] = p
        per_doc["recall"][m] = r
        per_doc["f1"][m] = f
        l1, linf, h, kl = distribution_metrics(wt, wp)
        per_doc["l1_error"][m] = l1
        per_doc["linf_error"][m] = linf
        per_doc["hellinger"][m] = h
        per_doc["kl"][m] = kl
        per_doc["nonsupp_mass"][m] = nonsupport_mass(wt, wp, prominent_mass)
    prior_dist = None if prior is None else prior_distance(prior, pred)
    return EvalReport(per_doc=per_doc, prior_dist=prior_dist,
                      prominent_mass=prominent_mass)


def write_report_tsv(report, path):
    """Corpus-level summary: metric, mean, std rows in METRIC_ORDER, then
    prior_dist (std column 0) when a prior was supplied."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write("metric\tmean\tstd\n")
        for name in METRIC_ORDER:
            fh.write(f"{name}\t{report.mean(name):.17g}\t{report.std(name):.17g}\n")
        if report.prior_dist is not None:
            fh.write(f"prior_dist\t{float(report.prior_dist):.17g}\t0\n")


def write_per_doc_tsv(report, path):
    """One row per document with every metric column, in corpus order."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write("doc\t" + "\t".join(METRIC_ORDER) + "\n")
        for m in range(report.M):
            vals = "\t".join(f"{report.per_doc[name][m]:.17g}" for name in METRIC_ORDER)
            fh.write(f"{m + 1}\t{vals}\n")
