"""Pool-based active learning simulation and run records."""
import csv
import hashlib
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import fileio
from .baselines import CLASSIFICATION_ONLY, STRATEGIES, select
from .embedding import ClassProbabilities, EmbeddingPool
from .errors import ConfigError
from .models import LinearModel, one_hot

RUN_COLUMNS = ["seed", "strategy", "round", "labeled", "metric", "select_seconds"]
SELECTION_COLUMNS = ["seed", "strategy", "config_hash", "round", "selected"]

CONFIG_KEYS = (
    "strategy", "batch_size", "seed_size", "rounds", "lambda", "mode", "seeds",
    "embeddings", "labels", "test_indices", "projection_dim", "projection_seed", "out_dir",
)
REQUIRED_KEYS = ("strategy", "batch_size", "rounds", "embeddings", "labels")


@dataclass
class ExperimentConfig:
    embeddings: str
    labels: str
    strategies: list
    batch_size: int
    rounds: int
    seed_size: int = 100
    lam: float = 1.0
    mode: str = "classification"
    seeds: list = field(default_factory=lambda: [0])
    test_indices: str = None
    projection_dim: int = 0
    projection_seed: int = 0
    out_dir: str = "runs"

    def __post_init__(self):
        if isinstance(self.strategies, str):
            self.strategies = [self.strategies]
        for s in self.strategies:
            if s not in STRATEGIES:
                raise ConfigError(f"unknown strategy {s!r}; choose from {', '.join(STRATEGIES)}")
            if self.mode == "regression" and s in CLASSIFICATION_ONLY:
                raise ConfigError(f"strategy {s!r} is not available in regression mode")
        if self.mode not in ("classification", "regression"):
            raise ConfigError(f"mode must be classification or regression, got {self.mode!r}")
        if self.batch_size < 1 or self.rounds < 0 or self.seed_size < 1:
            raise ConfigError("batch_size and seed_size must be positive, rounds non-negative")
        if not self.lam >= 0:
            raise ConfigError("lambda must be non-negative")
        if self.projection_dim < 0:
            raise ConfigError("projection_dim must be non-negative")

    def canonical(self):
        items = [
            ("strategy", ",".join(self.strategies)), ("batch_size", self.batch_size),
            ("seed_size", self.seed_size), ("rounds", self.rounds), ("lambda", repr(float(self.lam))),
            ("mode", self.mode), ("seeds", ",".join(map(str, self.seeds))),
            ("embeddings", Path(self.embeddings).name), ("labels", Path(self.labels).name),
            ("test_indices", Path(self.test_indices).name if self.test_indices else ""),
            ("projection_dim", self.projection_dim), ("projection_seed", self.projection_seed),
        ]
        return "\n".join(f"{k} = {v}" for k, v in items)

    def config_hash(self):
        return hashlib.sha256(self.canonical().encode("utf-8")).hexdigest()[:16]


def _int_list(text):
    return [int(v) for v in text.replace(" ", "").split(",") if v]


def parse_config(text, base_dir="."):
    """Parse flat ``key = value`` text; '#' starts a comment. Unknown keys are errors."""
    raw = {}
    for ln, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {ln}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ConfigError(f"line {ln}: unknown key {key!r}")
        if key in raw:
            raise ConfigError(f"line {ln}: duplicate key {key!r}")
        raw[key] = value
    missing = [k for k in REQUIRED_KEYS if k not in raw]
    if missing:
        raise ConfigError(f"missing required keys: {', '.join(missing)}")
    base = Path(base_dir)

    def path(key):
        v = raw.get(key)
        if not v:
            return None
        p = Path(v)
        return str(p if p.is_absolute() else base / p)

    try:
        return ExperimentConfig(
            embeddings=path("embeddings"),
            labels=path("labels"),
            strategies=[s for s in raw["strategy"].replace(" ", "").split(",") if s],
            batch_size=int(raw["batch_size"]),
            rounds=int(raw["rounds"]),
            seed_size=int(raw.get("seed_size", 100)),
            lam=float(raw.get("lambda", 1.0)),
            mode=raw.get("mode", "classification"),
            seeds=_int_list(raw.get("seeds", "0")),
            test_indices=path("test_indices"),
            projection_dim=int(raw.get("projection_dim", 0)),
            projection_seed=int(raw.get("projection_seed", 0)),
            out_dir=path("out_dir") or str(base / "runs"),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None


def load_config(path):
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"{path}: no such config file")
    return parse_config(path.read_text(encoding="utf-8"), base_dir=path.parent)


@dataclass(frozen=True)
class RoundRecord:
    round: int
    labeled: int
    metric: float
    select_seconds: float = 0.0
    selected: tuple = ()


@dataclass
class RunRecord:
    seed: int
    strategy: str
    config_hash: str = ""
    rounds: list = field(default_factory=list)

    def metrics(self):
        return [r.metric for r in self.rounds]

    def labeled_counts(self):
        return [r.labeled for r in self.rounds]


def random_projection(pool, target_dim, seed, orthogonalize=False):
    """Project rows through a standard Gaussian matrix scaled by 1/sqrt(target_dim).

    With ``orthogonalize`` the matrix is replaced by the Q factor of its QR
    decomposition (orthonormal columns when target_dim <= d, rows otherwise).
    """
    X = pool.data if isinstance(pool, EmbeddingPool) else np.asarray(pool, dtype=np.float64)
    if target_dim < 1:
        raise ConfigError("target_dim must be positive")
    rng = np.random.Generator(np.random.PCG64(seed))
    R = rng.standard_normal((X.shape[1], target_dim))
    if orthogonalize:
        if target_dim <= X.shape[1]:
            R = np.linalg.qr(R)[0]
        else:
            R = np.linalg.qr(R.T)[0].T
    else:
        R = R / np.sqrt(target_dim)
    return EmbeddingPool(X @ R)


def make_gaussian_mixture(n, d, k, seed, separation=3.0, nuisance_dims=8, nuisance_scale=6.0):
    """Labeled k-class Gaussian mixture with high-variance nuisance directions.

    Class means live in a random k-dimensional subspace at ``separation``
    spread; ``nuisance_dims`` extra directions carry large label-independent
    variance. Returns (X, y) with classes drawn uniformly.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    means = rng.standard_normal((k, d)) * (separation / np.sqrt(d))
    y = rng.integers(0, k, size=n)
    X = means[y] + rng.standard_normal((n, d))
    if nuisance_dims:
        basis = np.linalg.qr(rng.standard_normal((d, nuisance_dims)))[0]
        X += (rng.standard_normal((n, nuisance_dims)) * nuisance_scale) @ basis.T
    return X, y


def _random_seed(seed, rnd):
    return int(np.random.SeedSequence([seed, rnd]).generate_state(1, dtype=np.uint64)[0])


class Dataset:
    """Pool rows, test rows and targets after representation and split."""

    def __init__(self, X, targets, test_ids=None, mode="classification"):
        X = np.asarray(X, dtype=np.float64)
        if len(targets) != X.shape[0]:
            raise ConfigError(f"{X.shape[0]} embeddings but {len(targets)} labels")
        self.mode = mode
        n = X.shape[0]
        test = np.array(sorted(set(int(i) for i in test_ids)), dtype=np.intp) if test_ids else np.array([], dtype=np.intp)
        if len(test) and (test[0] < 0 or test[-1] >= n):
            raise ConfigError("test index out of range")
        mask = np.ones(n, dtype=bool)
        mask[test] = False
        self.pool_rows = np.flatnonzero(mask)
        self.test_rows = test if len(test) else self.pool_rows
        if mode == "classification":
            y = np.asarray(targets)
            if y.ndim != 1 or not np.issubdtype(y.dtype, np.integer):
                raise ConfigError("classification needs integer labels")
            self.n_classes = int(y.max()) + 1
            self.y = y
        else:
            y = np.asarray(targets)
            if y.ndim == 1 and np.issubdtype(y.dtype, np.integer):
                y = one_hot(y, int(y.max()) + 1)
            self.y = np.asarray(y, dtype=np.float64).reshape(n, -1)
            self.n_classes = self.y.shape[1]
        self.X = X
        self.pool = EmbeddingPool(X[self.pool_rows])

    def train_model(self, labeled_local):
        rows = self.pool_rows[np.asarray(labeled_local, dtype=np.intp)]
        model = LinearModel(mode=self.mode, n_classes=self.n_classes)
        return model.fit(self.X[rows], self.y[rows])

    def score(self, model):
        return model.evaluate(self.X[self.test_rows], self.y[self.test_rows])


def load_dataset(cfg):
    X = fileio.read_matrix(cfg.embeddings)
    targets = fileio.read_labels(cfg.labels)
    if cfg.projection_dim:
        X = random_projection(X, cfg.projection_dim, cfg.projection_seed).data
    test = fileio.read_ids(cfg.test_indices) if cfg.test_indices else None
    return Dataset(X, targets, test, cfg.mode)


def run_single(data, strategy, seed, batch_size, rounds, seed_size, lam, config_hash=""):
    """One active-learning run; returns a RunRecord with round 0 = seed set only."""
    n = data.pool.n
    if seed_size + rounds * batch_size > n:
        raise ConfigError(
            f"seed_size + rounds * batch_size = {seed_size + rounds * batch_size} exceeds the pool size {n}"
        )
    rng = np.random.Generator(np.random.PCG64(seed))
    labeled = [int(i) for i in rng.choice(n, size=seed_size, replace=False)]
    record = RunRecord(seed=seed, strategy=strategy, config_hash=config_hash)
    model = data.train_model(labeled)
    record.rounds.append(RoundRecord(0, len(labeled), data.score(model), 0.0, tuple(labeled)))
    for t in range(1, rounds + 1):
        probs = None
        if data.mode == "classification":
            probs = ClassProbabilities(model.predict_proba(data.pool.data))
        t0 = time.perf_counter()
        picked = select(strategy, data.pool, probs, labeled, batch_size, lam=lam, mode=data.mode,
                        seed=_random_seed(seed, t))
        elapsed = time.perf_counter() - t0
        labeled.extend(picked)
        model = data.train_model(labeled)
        record.rounds.append(RoundRecord(t, len(labeled), data.score(model), elapsed, tuple(picked)))
    return record


def _run_job(args):
    data, strategy, seed, cfg = args
    return run_single(data, strategy, seed, cfg.batch_size, cfg.rounds, cfg.seed_size, cfg.lam,
                      cfg.config_hash())


def run_experiment(cfg, data=None, jobs=1, write=True):
    """Run every (strategy, seed) pair; writes run-scoped CSVs when ``write``."""
    if data is None:
        data = load_dataset(cfg)
    if cfg.seed_size + cfg.rounds * cfg.batch_size > data.pool.n:
        raise ConfigError("seed_size + rounds * batch_size exceeds the pool size")
    tasks = [(data, s, seed, cfg) for s in cfg.strategies for seed in cfg.seeds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            records = list(ex.map(_run_job, tasks))
    else:
        records = [_run_job(t) for t in tasks]
    if write:
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for rec in records:
            stem = f"{rec.strategy}_seed{rec.seed}"
            write_records(out / f"runs_{stem}.csv", [rec])
            write_selections(out / f"selections_{stem}.csv", [rec])
        write_records(out / "runs.csv", records)
    return records


def _fmt(v):
    return repr(float(v))


def write_records(path, records):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RUN_COLUMNS)
        for rec in records:
            for r in rec.rounds:
                w.writerow([rec.seed, rec.strategy, r.round, r.labeled, _fmt(r.metric), _fmt(r.select_seconds)])


def write_selections(path, records):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SELECTION_COLUMNS)
        for rec in records:
            for r in rec.rounds:
                w.writerow([rec.seed, rec.strategy, rec.config_hash, r.round, " ".join(map(str, r.selected))])


def read_records(path, selections=None):
    """Parse a runs CSV (and optionally its selections CSV) back into RunRecords."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"{path}: no such file")
    runs = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != RUN_COLUMNS:
            raise ConfigError(f"{path}: expected columns {','.join(RUN_COLUMNS)}")
        for row in reader:
            key = (int(row["seed"]), row["strategy"])
            rec = runs.setdefault(key, RunRecord(seed=key[0], strategy=key[1]))
            rec.rounds.append(RoundRecord(int(row["round"]), int(row["labeled"]), float(row["metric"]),
                                          float(row["select_seconds"])))
    if selections is not None:
        with open(selections, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                rec = runs[(int(row["seed"]), row["strategy"])]
                rec.config_hash = row["config_hash"]
                rnd = int(row["round"])
                ids = tuple(int(v) for v in row["selected"].split())
                rec.rounds = [replace(r, selected=ids) if r.round == rnd else r for r in rec.rounds]
    return list(runs.values())
