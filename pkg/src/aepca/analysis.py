"""Reference PCA, loading-vector recovery from autoencoder weights, and diagnostics.

Variance convention: ``variances`` hold eigenvalues of the unnormalized scatter
matrix ``Y0 Y0^T`` (equivalently per-row sums of squared centered scores).
Anything reported per observation (covariances, reconstruction errors, the
Eckart-Young bound, whitening denominators) divides by N explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace

import numpy as np

from .autoencoder import AutoencoderParams
from .dataio import Dataset, write_csv_matrix
from .matrix import DimensionError, center_columns, column_mean, frobenius_norm_sq
from .spectral import DEGENERATE_GAP, pseudoinverse, sym_eigen, thin_svd

ORTHONORMAL_TOL = 1e-6


class RankDeficiencyError(ArithmeticError):
    """The weight matrix has fewer than m usable singular directions."""

    def __init__(self, rank: int, m: int):
        super().__init__(
            f"weight matrix has numerical rank {rank} < {m}; "
            "train for more epochs or lower the weight decay"
        )
        self.rank = rank
        self.m = m


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray | None
    loading_vectors: np.ndarray
    variances: np.ndarray | None
    provenance: str
    degenerate: bool = False
    # singular values of the source weight matrix (recovered models only), never used as variances
    singular_values: np.ndarray | None = None
    # full eigenvalue list of Y0 Y0^T (oracle models only), reused by eckart_young_gap
    spectrum: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.loading_vectors.shape[0]

    @property
    def m(self) -> int:
        return self.loading_vectors.shape[1]

    def truncate(self, k: int) -> "PcaModel":
        if not 1 <= k <= self.m:
            raise ValueError(f"cannot truncate a rank-{self.m} model to {k} columns")
        return replace(
            self,
            loading_vectors=self.loading_vectors[:, :k].copy(),
            variances=None if self.variances is None else self.variances[:k].copy(),
            singular_values=None if self.singular_values is None else self.singular_values[:k].copy(),
        )


@dataclass
class DiagnosticsReport:
    offdiag_ratio: float
    descending_ok: bool
    principal_angles_deg: list[float]
    recon_error: float
    eckart_young_bound: float
    eckart_young_gap: float
    pseudoinverse_residual: float
    covariance: np.ndarray | None = None

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            if f.name == "covariance":
                continue
            value = getattr(self, f.name)
            if isinstance(value, list):
                value = ",".join(repr(float(v)) for v in value)
            elif isinstance(value, bool):
                value = str(value).lower()
            else:
                value = repr(float(value))
            lines.append(f"{f.name}={value}")
        if self.principal_angles_deg:
            lines.append(f"max_principal_angle_deg={max(self.principal_angles_deg)!r}")
        return "\n".join(lines) + "\n"

    def write(self, report_path, covariance_path=None) -> None:
        with open(report_path, "w") as fh:
            fh.write(self.to_text())
        if covariance_path is not None and self.covariance is not None:
            write_csv_matrix(self.covariance, covariance_path)


def canonicalize_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip columns so each column's largest-magnitude entry is positive (ties: lowest index)."""
    out = np.array(vectors, dtype=np.float64, copy=True)
    if out.size == 0:
        return out
    lead = np.argmax(np.abs(out), axis=0)
    signs = np.where(out[lead, np.arange(out.shape[1])] < 0, -1.0, 1.0)
    return out * signs


def _observations(dataset) -> np.ndarray:
    return dataset.observations if isinstance(dataset, Dataset) else np.asarray(dataset, dtype=np.float64)


def _gap_degenerate(values: np.ndarray) -> bool:
    top = float(values[0]) if values.size else 0.0
    if top <= 0.0:
        return True
    return bool(np.any(-np.diff(values) < DEGENERATE_GAP * top))


def oracle_pca(dataset, m: int) -> PcaModel:
    """Eigendecomposition of the centered scatter matrix, first m eigenpairs.

    ``degenerate`` is set when any gap among the first ``min(m + 1, n)``
    eigenvalues is below ``1e-6 * lambda_1``, including the gap that decides
    which subspace is kept.
    """
    y = _observations(dataset)
    n, count = y.shape
    if not 1 <= m <= n:
        raise ValueError(f"need 1 <= m <= n, got m={m}, n={n}")
    if count < 2:
        raise ValueError(f"oracle PCA needs at least 2 observations, got {count}")
    mean = column_mean(y)
    y0 = y - mean[:, None]
    eig = sym_eigen(y0 @ y0.T)
    spectrum = np.clip(eig.values, 0.0, None)
    return PcaModel(
        mean=mean,
        loading_vectors=canonicalize_signs(eig.vectors[:, :m]),
        variances=spectrum[:m].copy(),
        provenance="oracle",
        degenerate=_gap_degenerate(spectrum[: min(m + 1, n)]),
        spectrum=spectrum,
    )


def recover_loading_vectors(params: AutoencoderParams, source: str = "w2", m: int | None = None) -> PcaModel:
    """Left singular vectors of W2 (or of W1^T), sign-canonicalized, variances unset."""
    source = source.lower()
    if source not in ("w1", "w2"):
        raise ValueError(f"source must be 'w1' or 'w2', got {source!r}")
    m = params.m if m is None else m
    if not 1 <= m <= params.m:
        raise ValueError(f"cannot recover {m} vectors from a bottleneck of {params.m}")
    weights = params.w2 if source == "w2" else params.w1.T
    svd = thin_svd(weights)
    if svd.rank < m:
        raise RankDeficiencyError(svd.rank, m)
    return PcaModel(
        mean=None,
        loading_vectors=canonicalize_signs(svd.u[:, :m]),
        variances=None,
        provenance=f"recovered-from-{source.upper()}",
        degenerate=svd.degenerate,
        singular_values=svd.sigma[:m].copy(),
    )


def _check_dims(model: PcaModel, y: np.ndarray) -> None:
    if y.ndim != 2 or y.shape[0] != model.n:
        raise DimensionError(f"model dimension {model.n} does not match data of shape {y.shape}")


def estimate_variances(model: PcaModel, dataset) -> PcaModel:
    """Fill variances from the data, reorder columns by them, and set the mean to the data mean."""
    y = _observations(dataset)
    _check_dims(model, y)
    mean = column_mean(y)
    scores = model.loading_vectors.T @ (y - mean[:, None])
    variances = np.sum(scores * scores, axis=1)
    order = np.argsort(-variances, kind="stable")
    sv = model.singular_values
    return replace(
        model,
        mean=mean,
        loading_vectors=canonicalize_signs(model.loading_vectors[:, order]),
        variances=variances[order],
        singular_values=None if sv is None else sv[order],
    )


def transform(model: PcaModel, dataset) -> np.ndarray:
    """Centered scores ``P^T (Y - mean 1^T)``."""
    y = _observations(dataset)
    _check_dims(model, y)
    if model.mean is None:
        raise ValueError("model has no mean; run estimate_variances against a dataset first")
    return model.loading_vectors.T @ (y - model.mean[:, None])


def whiten(model: PcaModel, dataset, epsilon: float = 0.0) -> np.ndarray:
    """Scores divided row-wise by ``sqrt(variance / N + epsilon)``; zero-variance rows stay zero."""
    if model.variances is None:
        raise ValueError("model variances are unset; run estimate_variances first")
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    scores = transform(model, dataset)
    scale = np.sqrt(model.variances / scores.shape[1] + epsilon)
    safe = np.where(scale > 0, scale, 1.0)
    return np.where(scale[:, None] > 0, scores / safe[:, None], 0.0)


def _check_orthonormal(a: np.ndarray, name: str) -> None:
    if a.ndim != 2:
        raise DimensionError(f"{name} must be 2-D")
    if np.max(np.abs(a.T @ a - np.eye(a.shape[1])), initial=0.0) > ORTHONORMAL_TOL:
        raise ValueError(f"{name} does not have orthonormal columns")


def principal_angles(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Canonical angles in degrees between span(a) and span(b), smallest first.

    Cosines come from the singular values of ``a^T b``. Angles whose cosine
    exceeds 1/sqrt(2) are taken from the sines (singular values of
    ``b - a a^T b``) instead, which keeps tiny angles accurate.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape[0] != b.shape[0]:
        raise DimensionError(f"bases live in different spaces: {a.shape} vs {b.shape}")
    _check_orthonormal(a, "a")
    _check_orthonormal(b, "b")
    if a.shape[1] < b.shape[1]:
        a, b = b, a
    k = b.shape[1]
    cosines = np.clip(thin_svd(a.T @ b).sigma[:k], 0.0, 1.0)
    sines = np.clip(np.sort(thin_svd(b - a @ (a.T @ b)).sigma)[:k], 0.0, 1.0)
    angles = np.where(cosines * cosines > 0.5, np.arcsin(sines), np.arccos(cosines))
    return np.degrees(angles)


def covariance_report(scores: np.ndarray) -> tuple[np.ndarray, float, bool]:
    """Covariance (1/N) of centered scores, off-diagonal Frobenius ratio, diagonal-descending flag."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 2 or scores.shape[1] < 2:
        raise ValueError(f"covariance_report needs at least 2 observations, got shape {scores.shape}")
    centered = center_columns(scores)
    cov = centered @ centered.T / scores.shape[1]
    total = frobenius_norm_sq(cov)
    diag = np.diag(cov)
    off = max(total - float(np.sum(diag * diag)), 0.0)
    ratio = float(np.sqrt(off / total)) if total > 0 else 0.0
    return cov, ratio, bool(np.all(np.diff(diag) <= 0))


@dataclass(frozen=True)
class EckartYoung:
    recon_error: float
    bound: float
    gap: float
    # False when the bound is zero and ``gap`` is the absolute difference
    relative: bool


def _projector_residual(target, y0: np.ndarray) -> tuple[float, int]:
    if isinstance(target, AutoencoderParams):
        if target.n != y0.shape[0]:
            raise DimensionError(f"params dimension {target.n} does not match data dimension {y0.shape[0]}")
        w2 = target.w2
        coords = pseudoinverse(w2) @ y0
        return frobenius_norm_sq(y0 - w2 @ coords), target.m
    _check_dims(target, y0)
    p = target.loading_vectors
    return frobenius_norm_sq(y0 - p @ (p.T @ y0)), target.m


def eckart_young_gap(dataset, target, spectrum: np.ndarray | None = None) -> EckartYoung:
    """Per-observation reconstruction error of the target's projector against the rank-m optimum.

    ``target`` is a PcaModel (projector P P^T) or AutoencoderParams (W2 W2^+).
    ``spectrum`` is the full eigenvalue list of ``Y0 Y0^T``; it is computed when omitted.
    """
    y = _observations(dataset)
    y0 = center_columns(y)
    count = y.shape[1]
    residual, m = _projector_residual(target, y0)
    if spectrum is None:
        spectrum = np.clip(sym_eigen(y0 @ y0.T).values, 0.0, None)
    recon = residual / count
    bound = float(np.sum(spectrum[m:])) / count
    # the bound is zero up to round-off when the data has rank <= m
    if bound <= 1e-12 * max(float(np.sum(spectrum)) / count, np.finfo(float).tiny):
        return EckartYoung(recon, 0.0, recon, relative=False)
    return EckartYoung(recon, bound, (recon - bound) / bound, relative=True)


def nestedness_check(model_m1: PcaModel, model_m2: PcaModel) -> float:
    """Largest principal angle (degrees) between the first m2 columns of model_m1 and model_m2."""
    m1, m2 = model_m1.m, model_m2.m
    if m2 >= m1:
        raise ValueError(f"nestedness needs m2 < m1, got m1={m1}, m2={m2}")
    if model_m1.n != model_m2.n:
        raise DimensionError("models have different input dimensions")
    return float(np.max(principal_angles(model_m1.loading_vectors[:, :m2], model_m2.loading_vectors)))


def pseudoinverse_residual(params: AutoencoderParams) -> float:
    """``|W1 - W2^+|_F / |W1|_F``."""
    norm = np.sqrt(frobenius_norm_sq(params.w1))
    return float(np.sqrt(frobenius_norm_sq(params.w1 - pseudoinverse(params.w2))) / norm) if norm > 0 else float("inf")


def raw_weight_scores(params: AutoencoderParams, dataset) -> np.ndarray:
    """Centered data mapped through W2^T with no SVD (the non-diagonal negative control)."""
    y = _observations(dataset)
    return params.w2.T @ center_columns(y)


def diagnose(
    model: PcaModel,
    dataset,
    *,
    params: AutoencoderParams | None = None,
    reference: PcaModel | None = None,
    no_svd: bool = False,
    spectrum: np.ndarray | None = None,
) -> DiagnosticsReport:
    """Collect every diagnostic for one model on one dataset.

    With ``no_svd`` the covariance is taken of the raw ``W2^T Y0`` scores.
    Principal angles are against ``reference`` (truncated to the smaller rank).
    """
    if no_svd:
        if params is None:
            raise ValueError("the raw-weight transform needs autoencoder params")
        scores = raw_weight_scores(params, dataset)
    else:
        scores = transform(model, dataset)
    cov, ratio, descending = covariance_report(scores)
    if spectrum is None:
        spectrum = model.spectrum if model.spectrum is not None else (reference.spectrum if reference else None)
    ey = eckart_young_gap(dataset, params if (no_svd and params is not None) else model, spectrum)
    angles: list[float] = []
    if reference is not None:
        k = min(model.m, reference.m)
        angles = [float(a) for a in principal_angles(model.loading_vectors[:, :k], reference.loading_vectors[:, :k])]
    return DiagnosticsReport(
        offdiag_ratio=ratio,
        descending_ok=descending,
        principal_angles_deg=angles,
        recon_error=ey.recon_error,
        eckart_young_bound=ey.bound,
        eckart_young_gap=ey.gap,
        pseudoinverse_residual=pseudoinverse_residual(params) if params is not None else float("nan"),
        covariance=cov,
    )
