"""Synthetic CTR data, typed-user simulation and recommendation-list metrics."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError
from .featurespace import Dataset, FeatureSchema, FieldSpec, encode
from .numerics import make_rng, sigmoid


# ---------------------------------------------------------------------------
# planted-interaction CTR data


@dataclass
class SyntheticSpec:
    """Generator description; feature indices are global ids.

    ``pairs`` and ``triples`` hold ``(id, id, weight)`` and
    ``(id, id, id, weight)`` rows; the true logit of an instance is
    ``bias + sum linear[id] + planted pair/triple weights it activates + noise``.
    """

    cardinalities: list[int]
    n_train: int
    n_test: int
    linear: np.ndarray
    pairs: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    triples: np.ndarray = field(default_factory=lambda: np.zeros((0, 4)))
    bias: float = 0.0
    noise: float = 0.0
    seed: int = 0

    def __post_init__(self):
        self.linear = np.asarray(self.linear, dtype=np.float64)
        self.pairs = np.asarray(self.pairs, dtype=np.float64).reshape(-1, 3)
        self.triples = np.asarray(self.triples, dtype=np.float64).reshape(-1, 4)
        d = self.d
        if self.linear.shape != (d,):
            raise ParameterError(f"linear weights must have length {d}")
        for rows, width in ((self.pairs, 2), (self.triples, 3)):
            if rows.size and (rows[:, :width].min() < 0 or rows[:, :width].max() >= d):
                raise ParameterError("planted feature index outside [0, d)")

    @property
    def m(self) -> int:
        return len(self.cardinalities)

    @property
    def d(self) -> int:
        return int(sum(self.cardinalities))

    @property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.cardinalities)[:-1]]).astype(np.int64)


def planted_spec(m=10, cardinality=20, n_train=100_000, n_test=20_000, seed=0,
                 pair_rank=4, pair_scale=0.2, pair_fields=None,
                 n_triple_fields=2, triple_scale=2.0,
                 linear_scale=0.3, bias=-0.5, noise=0.0) -> SyntheticSpec:
    """Random ground truth with low-rank pairwise and rank-one triple effects.

    Every feature pair across ``pair_fields`` field pairs gets weight
    ``<U_a, U_b>``; each of ``n_triple_fields`` random field triples plants
    ``triple_scale * u_a * u_b * u_c`` on all its feature triples.
    """
    rng = make_rng(seed)
    cards = [cardinality] * m
    d = m * cardinality
    offsets = np.arange(m) * cardinality
    linear = rng.normal(0.0, linear_scale, d)
    U = rng.normal(0.0, (pair_scale / np.sqrt(pair_rank)) ** 0.5, (d, pair_rank))
    field_pairs = list(itertools.combinations(range(m), 2))
    if pair_fields is not None:
        picks = rng.choice(len(field_pairs), size=pair_fields, replace=False)
        field_pairs = [field_pairs[i] for i in sorted(picks)]
    pairs = []
    for fa, fb in field_pairs:
        a = offsets[fa] + np.arange(cardinality)
        b = offsets[fb] + np.arange(cardinality)
        A, B = np.meshgrid(a, b, indexing="ij")
        W = U[a] @ U[b].T
        pairs.append(np.stack([A.ravel(), B.ravel(), W.ravel()], axis=1))
    triples = []
    all_triples = list(itertools.combinations(range(m), 3))
    if n_triple_fields > len(all_triples):
        raise ParameterError(f"{m} fields allow at most {len(all_triples)} planted field triples")
    for t in rng.choice(len(all_triples), size=n_triple_fields, replace=False):
        fa, fb, fc = all_triples[t]
        u = [rng.choice([-1.0, 1.0], cardinality) * rng.uniform(0.5, 1.0, cardinality) for _ in range(3)]
        a = offsets[fa] + np.arange(cardinality)
        b = offsets[fb] + np.arange(cardinality)
        c = offsets[fc] + np.arange(cardinality)
        A, B, C = np.meshgrid(a, b, c, indexing="ij")
        W = triple_scale * np.einsum("i,j,k->ijk", *u)
        triples.append(np.stack([A.ravel(), B.ravel(), C.ravel(), W.ravel()], axis=1))
    return SyntheticSpec(
        cards, n_train, n_test, linear,
        np.concatenate(pairs) if pairs else np.zeros((0, 3)),
        np.concatenate(triples) if triples else np.zeros((0, 4)),
        bias=bias, noise=noise, seed=seed,
    )


def _lookup(keys: np.ndarray, table_keys: np.ndarray, table_w: np.ndarray) -> np.ndarray:
    pos = np.searchsorted(table_keys, keys)
    pos = np.minimum(pos, len(table_keys) - 1)
    hit = table_keys[pos] == keys
    return np.where(hit, table_w[pos], 0.0)


def true_logits(spec: SyntheticSpec, ids: np.ndarray) -> np.ndarray:
    """Noise-free ground-truth logit of each row of ``ids``."""
    d = spec.d
    z = spec.bias + spec.linear[ids].sum(axis=1)
    m = ids.shape[1]
    if len(spec.pairs):
        p = spec.pairs
        keys = np.minimum(p[:, 0], p[:, 1]).astype(np.int64) * d + np.maximum(p[:, 0], p[:, 1]).astype(np.int64)
        order = np.argsort(keys, kind="stable")
        tk, tw = keys[order], p[order, 2]
        for i, j in itertools.combinations(range(m), 2):
            a, b = ids[:, i], ids[:, j]
            z += _lookup(np.minimum(a, b) * d + np.maximum(a, b), tk, tw)
    if len(spec.triples):
        t = spec.triples
        s = np.sort(t[:, :3].astype(np.int64), axis=1)
        keys = (s[:, 0] * d + s[:, 1]) * d + s[:, 2]
        order = np.argsort(keys, kind="stable")
        tk, tw = keys[order], t[order, 3]
        fields = sorted({int(f) for f in np.unique(_fields_of(spec, s.ravel()))})
        for i, j, k in itertools.combinations(range(m), 3):
            if not {i, j, k} <= set(fields):
                continue
            trip = np.sort(ids[:, [i, j, k]], axis=1)
            z += _lookup((trip[:, 0] * d + trip[:, 1]) * d + trip[:, 2], tk, tw)
    return z


def _fields_of(spec: SyntheticSpec, gids):
    return np.searchsorted(np.cumsum(spec.cardinalities), gids, side="right")


@dataclass
class SyntheticData:
    train: Dataset
    test: Dataset
    train_logits: np.ndarray
    test_logits: np.ndarray

    @property
    def bayes_auc(self) -> float:
        """AUC of the true (noise-free) scores on the test split."""
        from .metrics import auc

        return auc(self.test_logits, self.test.labels)


def generate_synthetic(spec: SyntheticSpec) -> SyntheticData:
    """Uniform features per field; labels ~ Bernoulli(sigmoid(true logit + noise))."""
    rng = make_rng(spec.seed)
    n = spec.n_train + spec.n_test
    ids = np.stack(
        [off + rng.integers(0, c, n) for off, c in zip(spec.offsets, spec.cardinalities)], axis=1
    )
    z = true_logits(spec, ids)
    noisy = z + (rng.normal(0.0, spec.noise, n) if spec.noise > 0 else 0.0)
    labels = (rng.random(n) < sigmoid(noisy)).astype(np.float64)
    values = np.ones(ids.shape)
    full = Dataset(ids, values, labels)
    cut = spec.n_train
    return SyntheticData(full.take(slice(0, cut)), full.take(slice(cut, None)), z[:cut], z[cut:])


def synthetic_schema(spec: SyntheticSpec) -> FeatureSchema:
    """Categorical schema whose global ids coincide with the generator's ids."""
    fields = [
        FieldSpec(f"f{i}", "categorical", c, vocab={f"v{j}": j for j in range(c)}, reserve_unknown=False)
        for i, c in enumerate(spec.cardinalities)
    ]
    return FeatureSchema(fields)


# ---------------------------------------------------------------------------
# typed users, app catalog and click logs


@dataclass
class AppCatalog:
    """Candidate apps with a type label and historical download counts."""

    types: np.ndarray
    downloads: np.ndarray

    def __post_init__(self):
        self.types = np.asarray(self.types, dtype=np.int64)
        self.downloads = np.asarray(self.downloads, dtype=np.float64)
        if self.types.shape != self.downloads.shape:
            raise ParameterError("catalog types and downloads differ in length")
        if self.downloads.size and self.downloads.min() < 0:
            raise ParameterError("download counts must be >= 0")

    @property
    def n_apps(self) -> int:
        return self.types.size

    @property
    def n_types(self) -> int:
        return int(self.types.max()) + 1 if self.types.size else 0

    @property
    def d_max(self) -> float:
        return float(self.downloads.max())

    def pool(self, t: int) -> np.ndarray:
        return np.flatnonzero(self.types == t)

    def to_dict(self) -> dict:
        return {
            "apps": [
                {"id": i, "type": int(t), "downloads": float(d)}
                for i, (t, d) in enumerate(zip(self.types, self.downloads))
            ]
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AppCatalog":
        apps = sorted(d["apps"], key=lambda a: a["id"])
        if [a["id"] for a in apps] != list(range(len(apps))):
            raise ParameterError("catalog app ids must be 0..n-1")
        return cls([a["type"] for a in apps], [a["downloads"] for a in apps])


def make_catalog(n_types=6, apps_per_type=20, seed=0, zipf=1.1) -> AppCatalog:
    """Apps grouped by type with Zipf-like download counts in random order."""
    rng = make_rng(seed)
    n = n_types * apps_per_type
    types = np.repeat(np.arange(n_types), apps_per_type)
    ranks = rng.permutation(n) + 1
    downloads = np.round(1e6 / ranks ** zipf)
    return AppCatalog(types, downloads)


@dataclass
class UserGroupSet:
    t: int
    n: int
    types: np.ndarray
    histories: list

    @property
    def groups(self) -> list[np.ndarray]:
        return [np.flatnonzero(self.types == i) for i in range(self.t)]

    def __len__(self):
        return len(self.histories)


def generate_users(t: int, n: int, catalog: AppCatalog, history_len: int = 3, seed=0) -> UserGroupSet:
    """``n`` users of each of ``t`` types; a type-i history samples type-i apps."""
    rng = make_rng(seed)
    histories, types = [], []
    for i in range(t):
        pool = catalog.pool(i)
        if pool.size == 0:
            raise ParameterError(f"type {i} has no apps")
        if pool.size < history_len:
            raise ParameterError(f"type {i} pool has {pool.size} apps, history needs {history_len}")
        for _ in range(n):
            histories.append([int(a) for a in rng.choice(pool, size=history_len, replace=False)])
            types.append(i)
    return UserGroupSet(t, n, np.asarray(types, dtype=np.int64), histories)


def user_item_tokens(history, app: int, catalog: AppCatalog, history_len: int) -> list[str]:
    """One field per history slot, then the candidate app and its type."""
    slots = [f"a{a}" for a in history] + ["none"] * (history_len - len(history))
    return slots + [f"a{app}", f"t{catalog.types[app]}"]


def user_item_kinds(history_len: int) -> list[str]:
    return ["categorical"] * (history_len + 2)


@dataclass
class ClickModel:
    """Ground-truth click probability of a user-app impression.

    ``sigmoid(bias + popularity * log(D_k / D_max) + affinity * share)``
    where ``share`` is the fraction of the user's history with the app's type.
    """

    affinity: float = 3.0
    popularity: float = 0.5
    bias: float = -1.0

    def prob(self, catalog: AppCatalog, history, apps) -> np.ndarray:
        apps = np.asarray(apps, dtype=np.int64)
        pop = np.log(np.maximum(catalog.downloads[apps], 1.0) / max(catalog.d_max, 1.0))
        share = np.zeros(catalog.n_types)
        for a in history:
            share[catalog.types[a]] += 1.0 / len(history)
        return sigmoid(self.bias + self.popularity * pop + self.affinity * share[catalog.types[apps]])


def simulate_click_log(catalog: AppCatalog, users: UserGroupSet, impressions: int = 20, seed=0,
                       click_model: ClickModel | None = None):
    """Random-impression log of ``(label, tokens)`` records.

    Returns the records plus ``(downloads, impressions, users)`` counts.
    """
    rng = make_rng(seed)
    click_model = click_model or ClickModel()
    hist_len = max((len(h) for h in users.histories), default=0)
    records = []
    clicks = 0
    for h in users.histories:
        apps = rng.integers(0, catalog.n_apps, impressions)
        ys = rng.random(impressions) < click_model.prob(catalog, h, apps)
        clicks += int(ys.sum())
        records.extend((int(y), user_item_tokens(h, int(a), catalog, hist_len)) for a, y in zip(apps, ys))
    return records, (clicks, len(records), len(users))


def serve_lists(lists, users: UserGroupSet, catalog: AppCatalog, L: int, seed=0,
                click_model: ClickModel | None = None) -> tuple[int, int, int]:
    """Show each user its top-L apps; count ``(downloads, impressions, users)``."""
    rng = make_rng(seed)
    click_model = click_model or ClickModel()
    downloads = impressions = 0
    for h, r in zip(users.histories, _top(lists, L)):
        p = click_model.prob(catalog, h, r)
        downloads += int((rng.random(len(r)) < p).sum())
        impressions += len(r)
    return downloads, impressions, len(users)


def ctr(downloads: int, impressions: int) -> float:
    return downloads / impressions if impressions else 0.0


def cvr(downloads: int, users: int) -> float:
    return downloads / users if users else 0.0


# ---------------------------------------------------------------------------
# recommendation lists and their metrics


@dataclass
class RecommendationList:
    """One user's ranked apps; slicing and len() act on ``apps``."""

    user: int
    apps: np.ndarray
    downloads: np.ndarray

    def __len__(self):
        return len(self.apps)

    def __getitem__(self, item):
        return self.apps[item]


def recommend(score_fn, users: UserGroupSet, candidates, catalog: AppCatalog | None = None):
    """Rank ``candidates`` for each user by descending score, ties by app id."""
    candidates = np.asarray(candidates, dtype=np.int64)
    if np.unique(candidates).size != candidates.size:
        raise ParameterError("duplicate candidate apps")
    lists = []
    for u, h in enumerate(users.histories):
        scores = np.asarray(score_fn(h, candidates), dtype=np.float64)
        order = np.lexsort((candidates, -scores))
        apps = candidates[order]
        dl = catalog.downloads[apps] if catalog is not None else np.zeros(apps.size)
        lists.append(RecommendationList(u, apps, dl))
    return lists


def model_scorer(model, store, schema, catalog: AppCatalog, history_len: int):
    """Score function over encoded user-item instances for :func:`recommend`."""
    def score(history, cands):
        insts = [encode(schema, user_item_tokens(history, int(a), catalog, history_len)) for a in cands]
        return model.predict(store, Dataset.from_instances(insts).as_batch())

    return score


def _top(lists, L: int) -> list[np.ndarray]:
    out = []
    for r in lists:
        if len(r) < L:
            raise ParameterError(f"recommendation list of length {len(r)} is shorter than L={L}")
        out.append(np.asarray(r[:L]))
    return out


def _group_indices(groups) -> list[np.ndarray]:
    if isinstance(groups, UserGroupSet):
        return groups.groups
    return [np.asarray(g, dtype=np.int64) for g in groups]


def personalization_at(lists, groups, L: int) -> float:
    """Mean inter-group distance ``1 - common@L / L`` over all group pairs."""
    groups = _group_indices(groups)
    t = len(groups)
    if t < 2:
        raise ParameterError("personalization needs at least two user groups")
    top = _top(lists, L)
    items = np.unique(np.concatenate(top))
    X = np.zeros((len(top), items.size))
    for u, r in enumerate(top):
        X[u, np.searchsorted(items, r)] = 1.0
    total = 0.0
    for i in range(t):
        for j in range(i + 1, t):
            common = X[groups[i]] @ X[groups[j]].T
            total += float((1.0 - common / L).mean())
    return 2.0 * total / (t * (t - 1))


def coverage_at(lists, n_candidates: int, L: int) -> float:
    """Fraction of candidates appearing in at least one top-L list."""
    if n_candidates <= 0:
        raise ParameterError("candidate count must be positive")
    top = _top(lists, L)
    return np.unique(np.concatenate(top)).size / n_candidates


def popularity_at(lists, L: int, downloads, d_max: float) -> tuple[float, float]:
    """Mean ``D_k / D_max`` over all top-L slots, and its variance across lists."""
    if d_max <= 0:
        raise ParameterError("D_max must be positive")
    downloads = np.asarray(downloads, dtype=np.float64)
    per_list = np.array([(downloads[r] / d_max).mean() for r in _top(lists, L)])
    return float(per_list.mean()), float(per_list.var())


def ab_report(lists_a, lists_b, groups, catalog: AppCatalog, Ls=(5, 10, 20),
              names=("LR", "DeepFM-D"), logs=None) -> list[dict]:
    """Personalization, coverage and popularity of two list sets at each L.

    ``logs`` optionally maps a model name to ``(downloads, impressions,
    users)`` for the CTR and CVR columns. Delta rows are B minus A.
    """
    if len(lists_a) != len(lists_b):
        raise ParameterError(f"list sets cover {len(lists_a)} vs {len(lists_b)} users")
    rows = []
    for L in Ls:
        by_model = {}
        for name, lists in zip(names, (lists_a, lists_b)):
            pop_mean, pop_var = popularity_at(lists, L, catalog.downloads, catalog.d_max)
            row = {
                "L": L,
                "model": name,
                "personalization": personalization_at(lists, groups, L),
                "coverage": coverage_at(lists, catalog.n_apps, L),
                "popularity_mean": pop_mean,
                "popularity_var": pop_var,
            }
            if logs and name in logs:
                dl, imp, us = logs[name]
                row["ctr"] = ctr(dl, imp)
                row["cvr"] = cvr(dl, us)
            by_model[name] = row
            rows.append(row)
        a, b = by_model[names[0]], by_model[names[1]]
        delta = {"L": L, "model": "delta"}
        for key in a:
            if key not in ("L", "model") and key in b:
                delta[key] = b[key] - a[key]
        rows.append(delta)
    return rows
