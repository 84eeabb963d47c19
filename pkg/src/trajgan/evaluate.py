"""Displacement-error metrics, min-of-k evaluation, and embedding analysis.

ADE is the mean over trajectories of the per-trajectory RMSE; FDE is the
root-mean-square over trajectories of the final-point error.  Both operate
on absolute positions in data units.
"""

import csv
import io
import warnings

from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .tensor import ContractError
from .data import CLASS_NAMES
from .model import class_embedding_matrix, generator_forward

FDE_FORMS = ("rms", "mean")

# Full-scale training results reported by the original study, shipped for
# context in reports.  Not reproduced here: they required hours of GPU
# training on the complete drone dataset.
REFERENCE_RESULTS = (
    ("original SGAN (ReLU)", 23.56, 46.86),
    ("GAN (leakyReLU)", 21.98, 43.53),
    ("GAN + labels", 23.05, 45.73),
    ("GAN + transformer", 23.06, 45.77),
    ("noGAN", 23.02, 46.83),
    ("noGAN + labels", 23.00, 47.19),
    ("noGAN + transformer", 22.73, 46.90),
)
REFERENCE_MARKER = "paper, not reproduced"


# ---------------------------------------------------------------------------
# metrics

def _check_pair(pred, truth):
    pred = np.asarray(pred, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if pred.shape != truth.shape:
        raise ContractError(f"prediction shape {pred.shape} != truth {truth.shape}")
    if pred.ndim != 2 or pred.shape[1] != 2 or pred.shape[0] < 1:
        raise ContractError(f"expected (T, 2) trajectories, got {pred.shape}")
    return pred, truth


def rmse_trajectory(pred, truth):
    """Root mean square of the pointwise Euclidean errors of one trajectory."""
    pred, truth = _check_pair(pred, truth)
    return float(np.sqrt(np.mean(np.sum((pred - truth) ** 2, axis=1))))


def ade(pairs):
    """Mean per-trajectory RMSE over a dataset of (pred, truth) pairs."""
    if not pairs:
        raise ContractError("ade needs at least one trajectory")
    return float(np.mean([rmse_trajectory(p, t) for p, t in pairs]))


def fde(pairs, form="rms"):
    """Final-point error over a dataset.

    ``rms`` takes the root mean square of final-point distances; ``mean``
    averages the distances instead, for comparison with work that reports
    the arithmetic form.
    """
    if not pairs:
        raise ContractError("fde needs at least one trajectory")
    if form not in FDE_FORMS:
        raise ContractError(f"fde form must be one of {FDE_FORMS}, got {form!r}")
    finals = []
    for p, t in pairs:
        p, t = _check_pair(p, t)
        finals.append(np.sum((p[-1] - t[-1]) ** 2))
    if form == "rms":
        return float(np.sqrt(np.mean(finals)))
    return float(np.mean(np.sqrt(finals)))


# ---------------------------------------------------------------------------
# baselines

def constant_velocity_baseline(window):
    """Extrapolate each agent's last observed velocity, (N, t_pred, 2)."""
    if window.t_obs < 2:
        raise ContractError("constant-velocity baseline needs t_obs >= 2")
    v = window.observed[:, -1] - window.observed[:, -2]
    steps = np.arange(1, window.t_pred + 1)
    return window.observed[:, -1][:, None, :] + steps[None, :, None] * v[:, None, :]


def baseline_metrics(windows, fde_form="rms"):
    """(ADE, FDE) of the constant-velocity baseline over the given windows."""
    pairs = []
    for w in windows:
        pred = constant_velocity_baseline(w)
        pairs.extend((pred[a], w.future[a]) for a in range(w.n_agents))
    return ade(pairs), fde(pairs, form=fde_form)


# ---------------------------------------------------------------------------
# min-of-k model evaluation

@dataclass
class ClassMetrics:
    ade: float
    fde: float
    n: int


@dataclass
class EvalReport:
    ade: float
    fde: float
    n_trajectories: int
    k: int
    fde_form: str = "rms"
    per_class: dict = field(default_factory=dict)
    baseline_ade: float = None
    baseline_fde: float = None

    def to_csv(self):
        out = io.StringIO()
        w = csv.writer(out)
        w.writerow(["scope", "ade", "fde", "n", "k"])
        w.writerow(["model", repr(self.ade), repr(self.fde),
                    self.n_trajectories, self.k])
        if self.baseline_ade is not None:
            w.writerow(["constant_velocity", repr(self.baseline_ade),
                        repr(self.baseline_fde), self.n_trajectories, 1])
        for name, m in self.per_class.items():
            w.writerow([f"class:{name}", repr(m.ade), repr(m.fde), m.n, self.k])
        return out.getvalue()

    def to_text(self, model_name="this run"):
        lines = [f"{'model':<28}{'ADE':>9}{'FDE':>9}",
                 f"{model_name:<28}{self.ade:>9.2f}{self.fde:>9.2f}"]
        if self.baseline_ade is not None:
            lines.append(f"{'constant velocity':<28}"
                         f"{self.baseline_ade:>9.2f}{self.baseline_fde:>9.2f}")
        lines.append(f"reference, full-scale training ({REFERENCE_MARKER}):")
        for name, a, f in REFERENCE_RESULTS:
            lines.append(f"{name:<28}{a:>9.2f}{f:>9.2f}")
        lines.append(f"n={self.n_trajectories} trajectories, best of k={self.k}, "
                     f"fde={self.fde_form}")
        return "\n".join(lines) + "\n"


def eval_min_of_k(gen, windows, k, seed=0, fde_form="rms", include_baseline=True):
    """Sample k futures per agent, keep the one closest to truth, report metrics.

    Each window draws from its own seeded stream, sample-major, so the noise
    set for a larger k extends the smaller one and min-of-k can only improve.
    """
    if k < 1:
        raise ContractError(f"need k >= 1, got {k}")
    if not windows:
        raise ContractError("no windows to evaluate")
    picked, classes = [], []
    for i, w in enumerate(windows):
        rng = np.random.default_rng([seed, i])
        with T.no_grad():
            preds = generator_forward(gen, w, k=k, rng=rng)
        trajs = preds.trajectories()
        err = trajs - w.future[:, None]
        best = (err ** 2).sum(axis=(2, 3)).argmin(axis=1)
        for a in range(w.n_agents):
            picked.append((trajs[a, best[a]], w.future[a]))
            classes.append(w.class_indices[a])

    per_class = {}
    classes = np.asarray(classes)
    for ci in sorted(set(classes.tolist())):
        sub = [picked[j] for j in np.nonzero(classes == ci)[0]]
        per_class[CLASS_NAMES[ci]] = ClassMetrics(
            ade(sub), fde(sub, form=fde_form), len(sub))

    report = EvalReport(ade(picked), fde(picked, form=fde_form),
                        len(picked), k, fde_form, per_class)
    if include_baseline:
        report.baseline_ade, report.baseline_fde = baseline_metrics(
            windows, fde_form=fde_form)
    return report


# ---------------------------------------------------------------------------
# class-embedding analysis

def pca_project(embeddings):
    """Project rows onto their top-2 principal components.

    Rows are centered first.  Sign convention: the first loading of each
    component with magnitude above 1e-12 is made positive, so the output
    is deterministic.  Zero-variance input projects to all zeros and warns.
    """
    e = np.asarray(embeddings, dtype=float)
    if e.ndim != 2 or e.shape[1] < 2:
        raise ContractError(f"need (n, d>=2) embeddings, got {e.shape}")
    x = e - e.mean(axis=0)
    cov = x.T @ x / x.shape[0]
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    evals, evecs = evals[order], evecs[:, order]
    if evals[0] <= 1e-24:
        warnings.warn("embeddings have zero variance; PCA projection degenerate")
        return np.zeros((e.shape[0], 2))
    comps = evecs[:, :2].copy()
    for j in range(2):
        nz = np.nonzero(np.abs(comps[:, j]) > 1e-12)[0]
        if nz.size and comps[nz[0], j] < 0:
            comps[:, j] = -comps[:, j]
    return x @ comps


def embedding_distances(embeddings):
    """Pairwise Euclidean distance matrix between embedding rows."""
    e = np.asarray(embeddings, dtype=float)
    diff = e[:, None, :] - e[None, :, :]
    return np.sqrt((diff ** 2).sum(axis=-1))


@dataclass
class EmbeddingAnalysis:
    class_names: tuple
    pca_coords: np.ndarray    # (n_classes, 2)
    distance_table: np.ndarray  # (n_classes, n_classes)
    degenerate: bool = False

    def pca_csv(self):
        out = io.StringIO()
        w = csv.writer(out)
        w.writerow(["class", "pc1", "pc2"])
        for name, (a, b) in zip(self.class_names, self.pca_coords):
            w.writerow([name, repr(float(a)), repr(float(b))])
        return out.getvalue()

    def distances_csv(self):
        out = io.StringIO()
        w = csv.writer(out)
        w.writerow(["class"] + list(self.class_names))
        for name, row in zip(self.class_names, self.distance_table):
            w.writerow([name] + [repr(float(v)) for v in row])
        return out.getvalue()


def analyze_embeddings(gen):
    """PCA projection and distance table of a generator's class embeddings."""
    emb = class_embedding_matrix(gen)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        coords = pca_project(emb)
    return EmbeddingAnalysis(tuple(CLASS_NAMES), coords,
                             embedding_distances(emb), bool(caught))
