"""Monte Carlo check of Cramér-Rao saturation by maximum likelihood.

Random streams are counter-based (Philox) and keyed by (master seed, trial),
so a batch is bit-for-bit reproducible and independent of execution order.
"""
from __future__ import annotations

import csv
import itertools
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import fim as _fim
from . import metrology as _met
from .fim import Scenario, SymMatrix
from .model import MIXED, Detection, SourceModel
from .quadrature import QuadratureSpec

LOW_STATISTICS_TRIALS = 30
_MLE_STREAM = 1


def trial_rng(seed, trial, stream=0):
    """Generator for one trial; ``stream`` separates sampling from optimizer draws."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(trial), int(stream)))
    return np.random.Generator(np.random.Philox(ss))


@dataclass
class PhotonSample:
    coords: np.ndarray      # (N, dim)
    window: np.ndarray      # (N,) 1-based source index, 0 for cofluorescent photons

    def detections(self):
        return [Detection(tuple(c), MIXED if w == 0 else int(w))
                for c, w in zip(self.coords.tolist(), self.window.tolist())]


def sample_photons(model, scenario, seed, trial=0):
    """Draw one session of N detected photons."""
    rng = trial_rng(seed, trial)
    N, dim, K = model.photons, model.dim, model.n_sources
    if scenario.is_blinking:
        counts = scenario.counts_for(model)
        src = np.repeat(np.arange(K), counts)
        window = src + 1
    else:
        src = rng.choice(K, size=N, p=model.weights)
        window = np.zeros(N, dtype=int)
    coords = model.positions[src] + model.sigma * rng.standard_normal((N, dim))
    return PhotonSample(coords, window)


def mle_blinking(sample, n_sources):
    """Per-window mean of detection coordinates; NaN (unestimable) for empty windows."""
    dim = sample.coords.shape[1]
    est = np.full((n_sources, dim), np.nan)
    for k in range(n_sources):
        sel = sample.window == k + 1
        if sel.any():
            est[k] = sample.coords[sel].mean(axis=0)
    return est.ravel()


@dataclass(frozen=True)
class OptimizerSettings:
    starts: int = 8
    max_iter: int = 200
    grad_tol: float = 1e-8      # on |grad log L|, in units of N / sigma
    perturbation: float = 0.5   # start jitter, in units of sigma


@dataclass
class MLEResult:
    theta: np.ndarray
    loglik: float
    converged: bool
    iterations: int


def _component_logs(theta, coords, model):
    pos = np.reshape(theta, model.positions.shape)
    s2 = model.sigma**2
    diff = coords[:, None, :] - pos[None, :, :]                      # (n, K, dim)
    with np.errstate(divide="ignore"):
        lw = np.log(model.weights)
    lc = lw - 0.5 * (diff**2).sum(axis=2) / s2 - 0.5 * model.dim * np.log(2 * np.pi * s2)
    peak = lc.max(axis=1, keepdims=True)
    lse = peak[:, 0] + np.log(np.exp(lc - peak).sum(axis=1))
    return diff, lc, lse


def log_likelihood(theta, coords, model):
    return float(_component_logs(theta, coords, model)[2].sum())


def _derivatives(theta, coords, model):
    """Log-likelihood, gradient and Hessian of the mixture at ``theta``."""
    diff, lc, lse = _component_logs(theta, coords, model)
    n, K, dim = diff.shape
    s2 = model.sigma**2
    w = np.exp(lc - lse[:, None])                                    # responsibilities
    diff = diff / s2
    score = (w[:, :, None] * diff).reshape(n, K * dim)
    g = score.sum(axis=0)
    H = -score.T @ score
    wd = (w[:, :, None] * diff).reshape(n, K * dim)
    dd = diff.reshape(n, K * dim)
    blockmask = np.kron(np.eye(K), np.ones((dim, dim)))
    H += (wd.T @ dd) * blockmask
    H -= np.diag(np.repeat(w.sum(axis=0), dim)) / s2
    return float(lse.sum()), g, H


def _ascend(theta, coords, model, settings):
    N, sigma = len(coords), model.sigma
    tol = settings.grad_tol * N / sigma
    ll, g, H = _derivatives(theta, coords, model)
    for it in range(settings.max_iter):
        if np.linalg.norm(g) < tol:
            return MLEResult(theta, ll, True, it)
        step = None
        try:
            if np.all(np.linalg.eigvalsh(H) < 0):
                step = -np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            pass
        if step is None:
            step = g * sigma**2 / N
        t = 1.0
        while t > 1e-12:
            cand = theta + t * step
            ll_new = log_likelihood(cand, coords, model)
            if ll_new >= ll + 1e-4 * t * float(g @ step):
                break
            t *= 0.5
        else:
            return MLEResult(theta, ll, np.linalg.norm(g) < tol, it)
        theta = cand
        ll, g, H = _derivatives(theta, coords, model)
    return MLEResult(theta, ll, bool(np.linalg.norm(g) < tol), settings.max_iter)


def _split_start(coords, weights, order):
    """Group means after sorting detections along their principal axis."""
    c = coords - coords.mean(axis=0)
    if coords.shape[1] > 1:
        _, _, vt = np.linalg.svd(c, full_matrices=False)
        proj = c @ vt[0]
    else:
        proj = c[:, 0]
    idx = np.argsort(proj, kind="stable")
    w = np.asarray(weights)[list(order)]
    edges = np.round(np.cumsum(np.concatenate([[0], w])) * len(coords)).astype(int)
    start = np.empty((len(w), coords.shape[1]))
    for j, k in enumerate(order):
        grp = idx[edges[j]:max(edges[j + 1], edges[j] + 1)]
        start[k] = coords[grp].mean(axis=0)
    return start


def _moment_start(coords, weights, sigma, swap):
    """Two 1D sources from sample mean and variance: var = sigma^2 + mu1 mu2 s^2."""
    mu1, mu2 = weights
    m, v = coords[:, 0].mean(), coords[:, 0].var()
    if mu1 * mu2 == 0:
        return np.array([[m], [m]])
    d = np.sqrt(max(v - sigma**2, 0.0) / (mu1 * mu2))
    if swap:
        d = -d
    return np.array([[m - mu2 * d], [m + mu1 * d]])


def start_points(coords, model, settings, rng):
    K = model.n_sources
    base = []
    if model.dim == 1 and K == 2:
        base += [_moment_start(coords, model.weights, model.sigma, sw) for sw in (False, True)]
    orders = list(itertools.permutations(range(K)))
    for order in orders[:max(1, settings.starts - len(base))]:
        base.append(_split_start(coords, model.weights, order))
    starts = base[:settings.starts]
    i = 0
    while len(starts) < settings.starts:
        jitter = settings.perturbation * model.sigma * rng.standard_normal(base[0].shape)
        starts.append(base[i % len(base)] + jitter)
        i += 1
    return [s.ravel() for s in starts]


def mle_cofluorescent(coords, model, settings=OptimizerSettings(), rng=None):
    """Multi-start maximum likelihood for source positions with known brightnesses."""
    coords = np.asarray(coords, dtype=float).reshape(-1, model.dim)
    rng = rng if rng is not None else np.random.default_rng(0)
    best = None
    for th0 in start_points(coords, model, settings, rng):
        res = _ascend(th0, coords, model, settings)
        if not res.converged:
            continue
        if best is None or res.loglik > best.loglik:
            best = res
    if best is None:
        th = np.full(model.n_params, np.nan)
        return MLEResult(th, np.nan, False, settings.max_iter)
    return best


def align_labels(theta_hat, theta, n_sources, dim):
    """Relabel sources to the permutation closest to the truth (exchange symmetry)."""
    est = np.reshape(theta_hat, (n_sources, dim))
    tru = np.reshape(theta, (n_sources, dim))
    best, best_err = None, np.inf
    for perm in itertools.permutations(range(n_sources)):
        err = float(((est[list(perm)] - tru) ** 2).sum())
        if err < best_err:
            best, best_err = perm, err
    return est[list(best)].ravel()


@dataclass
class TrialBatch:
    model: SourceModel
    scenario: Scenario
    trials: int
    seed: int
    estimates: np.ndarray           # (trials, M), NaN rows for flagged trials
    loglik: np.ndarray
    converged: np.ndarray
    settings: OptimizerSettings = field(default_factory=OptimizerSettings)

    @property
    def errors(self):
        return self.estimates[self.converged] - self.model.theta[None, :]

    @property
    def n_flagged(self):
        return int((~self.converged).sum())

    @property
    def low_statistics(self):
        return int(self.converged.sum()) < LOW_STATISTICS_TRIALS

    @property
    def covariance(self):
        e = self.errors
        return SymMatrix(e.T @ e / len(e), self.model.labels, check=False)

    def covariance_standard_errors(self):
        e = self.errors
        prods = e[:, :, None] * e[:, None, :]
        return prods.std(axis=0, ddof=1) / np.sqrt(len(e))

    def bias(self):
        e = self.errors
        return e.mean(axis=0), e.std(axis=0, ddof=1) / np.sqrt(len(e))

    def crb(self, quad=QuadratureSpec()):
        if self.scenario.is_blinking:
            return _fim.fim_blinking(self.model, self.scenario.counts_for(self.model))
        return _fim.fim_cofluorescent(self.model, quad)

    def excess_min_eigenvalue(self, F=None):
        """Min eigenvalue of (Cov_emp - F^-1) and its standard error.

        The error uses the spread of (v . e)^2 over trials for the minimizing
        eigenvector v.
        """
        F = self.crb() if F is None else F
        bound = _met.invert_info(F)
        D = np.asarray(self.covariance) - np.asarray(bound.covariance)
        lam, V = np.linalg.eigh(D)
        v = V[:, 0]
        proj = (self.errors @ v) ** 2
        return float(lam[0]), float(proj.std(ddof=1) / np.sqrt(len(proj)))

    def efficiency(self, F=None):
        return _met.efficiency(self.covariance, F)

    def bootstrap_efficiency(self, n_boot=200, seed=0):
        """Bootstrap standard errors of H_tot, H_ind, H_eig over trials."""
        e = self.errors
        rng = np.random.default_rng(seed)
        out = np.empty((n_boot, 3))
        for b in range(n_boot):
            s = e[rng.integers(0, len(e), len(e))]
            C = s.T @ s / len(s)
            out[b] = (_met.h_tot(C), _met.h_ind(C), _met.h_eig(C))
        return out.std(axis=0, ddof=1)

    def csv_table(self):
        """Header and string rows: trial, estimates, log-likelihood, converged flag."""
        header = ["trial"] + [f"{l}_hat" for l in self.model.labels] + ["loglik", "converged"]
        rows = []
        for i in range(self.trials):
            rows.append([str(i)] + [repr(float(v)) for v in self.estimates[i]]
                        + [repr(float(self.loglik[i])), str(int(self.converged[i]))])
        return header, rows

    def to_csv(self, path):
        write_csv_atomic(path, *self.csv_table())

    def summary(self, quad=QuadratureSpec()):
        F = self.crb(quad)
        bound = _met.invert_info(F)
        emp = self.efficiency(F)
        sat = _met.saturated_efficiency(F)
        labels = self.model.labels
        rec = {"scenario": self.scenario.tag, "trials": self.trials, "seed": self.seed,
               "flagged": self.n_flagged, "low_statistics": self.low_statistics}
        C = np.asarray(self.covariance)
        B = np.asarray(bound.covariance)
        for i, j in itertools.combinations_with_replacement(range(len(labels)), 2):
            rec[f"cov_{labels[i]}_{labels[j]}"] = float(C[i, j])
            rec[f"crb_{labels[i]}_{labels[j]}"] = float(np.inf if bound.unbounded[i]
                                                        or bound.unbounded[j] else B[i, j])
        for i, l in enumerate(labels):
            rec[f"var_ratio_{l}"] = float(C[i, i] / bound.variances[i])
        for name in ("h_tot", "h_ind", "h_eig"):
            rec[f"emp_{name}"] = getattr(emp, name)
            rec[f"crb_{name}"] = getattr(sat, name)
        return rec


def _run_trial(args):
    model, scenario, seed, trial, settings = args
    sample = sample_photons(model, scenario, seed, trial)
    if scenario.is_blinking:
        th = mle_blinking(sample, model.n_sources)
        ok = bool(np.all(np.isfinite(th)))
        ll = log_likelihood_blinking(th, sample, model) if ok else np.nan
        return th, ll, ok
    res = mle_cofluorescent(sample.coords, model, settings, trial_rng(seed, trial, _MLE_STREAM))
    return res.theta, res.loglik, res.converged


def log_likelihood_blinking(theta, sample, model):
    est = np.reshape(theta, model.positions.shape)
    d = sample.coords - est[sample.window - 1]
    dim = model.dim
    n = len(d)
    return float(-0.5 * n * dim * np.log(2 * np.pi * model.sigma**2)
                 - (d**2).sum() / (2 * model.sigma**2))


def run_batch(model, scenario, trials, seed, settings=OptimizerSettings(), workers=1):
    """Independent estimation sessions; errors accumulated about the true positions."""
    if trials < 2:
        raise ValueError("a batch needs at least two trials")
    jobs = [(model, scenario, seed, t, settings) for t in range(trials)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            results = list(ex.map(_run_trial, jobs, chunksize=16))
    else:
        results = [_run_trial(j) for j in jobs]
    est = np.array([r[0] for r in results], dtype=float)
    ll = np.array([r[1] for r in results], dtype=float)
    ok = np.array([r[2] for r in results], dtype=bool)
    symmetric = model.n_sources > 1 and np.allclose(model.weights, model.weights[0])
    if symmetric and not scenario.is_blinking:
        for i in np.flatnonzero(ok):
            est[i] = align_labels(est[i], model.theta, model.n_sources, model.dim)
    return TrialBatch(model, scenario, trials, seed, est, ll, ok, settings)


def write_csv_atomic(path, header, rows):
    """Write CSV via a temporary file so a failure leaves no partial output."""
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", suffix=".csv", dir=d)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
