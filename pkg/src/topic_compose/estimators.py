"""Single-pass linear estimators of document topic compositions.

Two estimators share the pattern `W = T @ Htilde` for a K x N matrix T:

* the posterior estimator applies the word-topic posterior, so every
  output column is automatically a distribution;
* the left-inverse estimator applies a minimum-infinity-norm approximate
  left inverse of B, then thresholds small entries at a level calibrated
  to the document length before renormalizing.
"""

import math
from dataclasses import dataclass

import numpy as np
import scipy.optimize
import scipy.sparse as sparse

from .model import CompositionMatrix, normalize_corpus, word_topic_posterior
from .parallel import map_chunks

LP_SOLVERS = ("lp", "pseudoinverse")


@dataclass(frozen=True)
class TliConfig:
    """Settings for the thresholded left-inverse estimator.

    delta bounds the worst-case bias |B_dagger B - I| allowed when
    minimizing the inverse's magnitude; threshold_divisor scales down the
    worst-case noise level to reach a usable threshold; solver picks how
    the inverse is computed ("lp" exact row programs, "pseudoinverse"
    least-squares surrogate).
    """

    delta: float = 0.0
    threshold_divisor: float = 4.5
    solver: str = "lp"

    def __post_init__(self):
        if not (self.delta >= 0.0 and math.isfinite(self.delta)):
            raise ValueError(f"delta must be >= 0, got {self.delta!r}")
        if not (self.threshold_divisor > 0.0 and math.isfinite(self.threshold_divisor)):
            raise ValueError(f"threshold_divisor must be > 0, got {self.threshold_divisor!r}")
        if self.solver not in LP_SOLVERS:
            raise ValueError(f"solver must be one of {LP_SOLVERS}, got {self.solver!r}")


@dataclass(frozen=True)
class TliInverse:
    """Approximate left inverse of B with its magnitude bound.

    Bdagger is K x N with |Bdagger @ B - I| <= delta entrywise;
    magnitude is the largest absolute entry, which controls how much a
    finite-sample frequency error can be amplified.
    """

    Bdagger: np.ndarray
    delta: float
    magnitude: float
    solver: str

    def __post_init__(self):
        Bd = np.array(self.Bdagger, dtype=np.float64, order="C")
        if Bd.ndim != 2:
            raise ValueError("Bdagger must be a matrix")
        if not np.isfinite(Bd).all():
            raise ValueError("Bdagger contains non-finite entries")
        Bd.setflags(write=False)
        object.__setattr__(self, "Bdagger", Bd)


def spi_infer(model, corpus):
    """Posterior composition estimate: average the word-topic posterior
    over each document's observed words."""
    if corpus.N != model.N:
        raise ValueError(f"corpus vocabulary {corpus.N} != model vocabulary {model.N}")
    Bb = word_topic_posterior(model).Bbreve
    W = Bb @ normalize_corpus(corpus)
    return CompositionMatrix(W)


def _row_program(B, k, delta):
    """Smallest-magnitude row b with (B^T b)_l within delta of 1{l == k}.

    Variables are (b, t) with t an upper bound on |b_j|; minimize t.
    """
    N, K = B.shape
    c = np.zeros(N + 1)
    c[N] = 1.0
    # |b_j| <= t  as  b_j - t <= 0  and  -b_j - t <= 0
    eye = sparse.eye_array(N, format="csr")
    ones = np.ones((N, 1))
    bound_rows = sparse.block_array([[eye, -ones], [-eye, -ones]], format="csr")
    target = np.zeros(K)
    target[k] = 1.0
    Bt = sparse.csr_array(B.T)
    zero_col = sparse.csr_array((K, 1))
    if delta == 0.0:
        A_eq = sparse.hstack([Bt, zero_col], format="csr")
        res = scipy.optimize.linprog(
            c,
            A_ub=bound_rows,
            b_ub=np.zeros(2 * N),
            A_eq=A_eq,
            b_eq=target,
            bounds=(None, None),
            method="highs",
        )
    else:
        bias_rows = sparse.hstack([Bt, zero_col], format="csr")
        A_ub = sparse.vstack([bound_rows, bias_rows, -bias_rows], format="csr")
        b_ub = np.concatenate([np.zeros(2 * N), target + delta, delta - target])
        res = scipy.optimize.linprog(
            c, A_ub=A_ub, b_ub=b_ub, bounds=(None, None), method="highs"
        )
    if res.status != 0 or res.x is None or not np.isfinite(res.x).all():
        smin = float(np.linalg.svd(B, compute_uv=False)[-1])
        raise RuntimeError(
            f"left-inverse program for topic {k} failed (status {res.status}: "
            f"{res.message}); smallest singular value of B is {smin:.3e}"
        )
    return res.x[:N]


def tli_compute_inverse(model, config=None, threads=1):
    """Minimum-infinity-norm approximate left inverse of the model's B.

    Solved one row at a time; rows are independent, so they are farmed out
    to the worker pool. The "pseudoinverse" solver uses (B^T B)^-1 B^T
    instead, which is cheaper but has no magnitude guarantee.
    """
    config = config or TliConfig()
    B = model.B
    K = model.K
    if config.solver == "pseudoinverse":
        BtB = B.T @ B
        try:
            Bd = np.linalg.solve(BtB, B.T)
        except np.linalg.LinAlgError:
            raise RuntimeError(
                f"B^T B is singular (condition {np.linalg.cond(BtB):.3e}); "
                "the pseudoinverse left inverse does not exist"
            ) from None
        if not np.isfinite(Bd).all():
            raise RuntimeError("pseudoinverse produced non-finite entries")
        resid = float(np.abs(Bd @ B - np.eye(K)).max())
        if resid > config.delta + 1e-6:
            raise RuntimeError(
                f"pseudoinverse bias {resid:.3e} exceeds delta={config.delta}; "
                "B is too ill-conditioned for this solver"
            )
    else:
        Bd = np.empty((K, B.shape[0]))

        def solve_rows(span):
            for k in range(*span):
                Bd[k] = _row_program(B, k, config.delta)

        map_chunks(K, 1, solve_rows, threads)
    return TliInverse(
        Bdagger=Bd,
        delta=config.delta,
        magnitude=float(np.abs(Bd).max()),
        solver=config.solver,
    )


def tli_thresholds(inverse, lengths, config=None):
    """Per-document threshold below which estimated weights are considered
    noise: a two-sigma-style bound on the worst-case frequency deviation,
    amplified by the inverse magnitude, plus the bias allowance, scaled
    down by the configured divisor."""
    config = config or TliConfig()
    K = inverse.Bdagger.shape[0]
    n = np.asarray(lengths, dtype=np.float64)
    raw = 2.0 * inverse.magnitude * np.sqrt(math.log(K) / n) + inverse.delta
    return raw / config.threshold_divisor


def tli_infer(inverse, model, corpus, config=None):
    """Apply the left inverse to document frequencies, zero entries below
    the per-document threshold, and renormalize.

    Documents whose entries are all thresholded away fall back to the
    uniform composition.
    """
    config = config or TliConfig()
    if corpus.N != model.N:
        raise ValueError(f"corpus vocabulary {corpus.N} != model vocabulary {model.N}")
    if inverse.Bdagger.shape != (model.K, model.N):
        raise ValueError(
            f"inverse has shape {inverse.Bdagger.shape}, expected ({model.K}, {model.N})"
        )
    raw = inverse.Bdagger @ normalize_corpus(corpus)
    if not np.isfinite(raw).all():
        raise RuntimeError("left-inverse estimate produced non-finite entries")
    tau = tli_thresholds(inverse, corpus.lengths, config)
    W = np.where(raw < tau[None, :], 0.0, raw)
    sums = W.sum(axis=0)
    kept = sums > 0.0
    W[:, kept] /= sums[kept]
    W[:, ~kept] = 1.0 / model.K
    return CompositionMatrix(W)
