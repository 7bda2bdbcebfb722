"""Black-box structure discovery for lagged input-output models.

Candidate one-step functions are multigene expression trees over the
lagged outputs and inputs; each output channel is an affine combination
of its genes with weights fitted by least squares on one-step-ahead
windows.  Fitness of a candidate is its free-run squared error, i.e.
the window is seeded with measurements once and then rolled forward on
its own predictions, which punishes unstable structures that one-step
errors hide.

Two drivers.  The plain one evolves against free-run error and scales
the uncertainty template afterwards.  The conformance-aware one first
evolves the same way on a training split, then keeps the best
structures and continues evolution scoring each candidate by the summed
white-box conformance cost over held-out subdatasets, so that the final
structure is selected for small conformant reach sets rather than small
residuals alone.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .conform import ConformResult, identify_white
from .models import NarxModel, TestSuite, UncertaintySpec

__all__ = [
    "GPConfig",
    "GeneModel",
    "BlackResult",
    "PRIMITIVES",
    "feature_names",
    "random_tree",
    "eval_tree",
    "tree_nodes",
    "tree_to_sexpr",
    "sexpr_to_tree",
    "model_to_text",
    "model_from_text",
    "conformance_score",
    "identify_black_gp",
    "identify_black_cgp",
]

_DIV_EPS = 1e-9
_DIVERGED = 1e8
_INFEASIBLE_PENALTY = 1e9


def _pdiv(a, b):
    small = np.abs(b) < _DIV_EPS
    return np.where(small, a, a / np.where(small, 1.0, b))


PRIMITIVES = {
    "add": (2, np.add),
    "sub": (2, np.subtract),
    "mul": (2, np.multiply),
    "pdiv": (2, _pdiv),
    "cos": (1, np.cos),
    "sin": (1, np.sin),
    "sqrtabs": (1, lambda a: np.sqrt(np.abs(a))),
}

_PRIM_NAMES = tuple(sorted(PRIMITIVES))


@dataclass(frozen=True)
class GPConfig:
    population: int = 60
    generations: int = 20
    refine_population: int = 20
    refine_generations: int = 3
    n_subdatasets: int = 5
    max_genes: int = 3
    max_depth: int = 5
    max_nodes: int = 25
    p_crossover: float = 0.85
    p_mutation: float = 0.10
    tournament: int = 4
    const_low: float = -10.0
    const_high: float = 10.0

    @classmethod
    def desk(cls) -> "GPConfig":
        return cls()

    @classmethod
    def paper(cls) -> "GPConfig":
        return cls(population=300, generations=95,
                   refine_population=100, refine_generations=5)


# ---------------------------------------------------------------------------
# trees


def feature_names(n_p: int, n_y: int, n_u: int) -> list[str]:
    """Column order of the regressor vector: output lags 1..n_p, then
    input lags 0..n_p, dimensions fastest."""
    names = [f"y{j + 1}_lag{lag}" for lag in range(1, n_p + 1) for j in range(n_y)]
    names += [f"u{j + 1}_lag{lag}" for lag in range(n_p + 1) for j in range(n_u)]
    return names


def random_tree(rng, n_feat: int, max_depth: int, const_low: float,
                const_high: float, p_leaf: float = 0.25):
    if max_depth <= 0 or rng.random() < p_leaf:
        if rng.random() < 0.2:
            return ("const", float(rng.uniform(const_low, const_high)))
        return ("var", int(rng.integers(n_feat)))
    name = _PRIM_NAMES[rng.integers(len(_PRIM_NAMES))]
    arity = PRIMITIVES[name][0]
    children = tuple(
        random_tree(rng, n_feat, max_depth - 1, const_low, const_high, p_leaf)
        for _ in range(arity))
    return (name,) + children


def eval_tree(tree, X: np.ndarray) -> np.ndarray:
    tag = tree[0]
    if tag == "var":
        return X[:, tree[1]]
    if tag == "const":
        return np.full(X.shape[0], tree[1])
    fn = PRIMITIVES[tag][1]
    args = [eval_tree(c, X) for c in tree[1:]]
    with np.errstate(all="ignore"):
        return fn(*args)


def tree_nodes(tree) -> int:
    if tree[0] in ("var", "const"):
        return 1
    return 1 + sum(tree_nodes(c) for c in tree[1:])


def tree_depth(tree) -> int:
    if tree[0] in ("var", "const"):
        return 0
    return 1 + max(tree_depth(c) for c in tree[1:])


def _paths(tree, prefix=()):
    yield prefix
    if tree[0] not in ("var", "const"):
        for i, c in enumerate(tree[1:]):
            yield from _paths(c, prefix + (i,))


def _subtree(tree, path):
    for i in path:
        tree = tree[i + 1]
    return tree


def _replace(tree, path, sub):
    if not path:
        return sub
    i = path[0]
    kids = list(tree[1:])
    kids[i] = _replace(kids[i], path[1:], sub)
    return (tree[0],) + tuple(kids)


# ---------------------------------------------------------------------------
# serialization


def tree_to_sexpr(tree, names: list[str]) -> str:
    tag = tree[0]
    if tag == "var":
        return names[tree[1]]
    if tag == "const":
        return repr(tree[1])
    return "(" + " ".join([tag] + [tree_to_sexpr(c, names) for c in tree[1:]]) + ")"


_TOKEN_RE = re.compile(r"\(|\)|[^\s()]+")
_VAR_RE = re.compile(r"^[yu]\d+_lag\d+$")


def _tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text)


def _parse_expr(tokens: list[str], pos: int, name_idx: dict):
    tok = tokens[pos]
    if tok == "(":
        name = tokens[pos + 1]
        if name not in PRIMITIVES:
            raise ValueError(f"unknown operator {name!r}")
        arity = PRIMITIVES[name][0]
        pos += 2
        kids = []
        for _ in range(arity):
            child, pos = _parse_expr(tokens, pos, name_idx)
            kids.append(child)
        if tokens[pos] != ")":
            raise ValueError("malformed expression: missing ')'")
        return (name,) + tuple(kids), pos + 1
    if _VAR_RE.match(tok):
        if tok not in name_idx:
            raise ValueError(f"unknown regressor {tok!r}")
        return ("var", name_idx[tok]), pos + 1
    return ("const", float(tok)), pos + 1


def sexpr_to_tree(text: str, names: list[str]):
    tokens = _tokenize(text)
    name_idx = {n: i for i, n in enumerate(names)}
    tree, pos = _parse_expr(tokens, 0, name_idx)
    if pos != len(tokens):
        raise ValueError("trailing tokens after expression")
    return tree


@dataclass(frozen=True)
class GeneModel:
    """Multigene model: per output a bias, gene weights and gene trees."""

    n_p: int
    n_y: int
    n_u: int
    genes: tuple          # genes[o] = tuple of trees
    weights: tuple        # weights[o] = array of length 1 + len(genes[o]), bias first
    names: tuple = field(default=())

    def __post_init__(self):
        if not self.names:
            object.__setattr__(
                self, "names", tuple(feature_names(self.n_p, self.n_y, self.n_u)))

    def as_model(self) -> NarxModel:
        genes, weights = self.genes, self.weights
        n_p, n_y, n_u = self.n_p, self.n_y, self.n_u

        def f(y_hist, u_hist, p):
            x = np.concatenate(
                [y_hist[n_p - lag] for lag in range(1, n_p + 1)]
                + [u_hist[n_p - lag] for lag in range(n_p + 1)])[None, :]
            out = np.empty(n_y)
            for o in range(n_y):
                acc = weights[o][0]
                for w, g in zip(weights[o][1:], genes[o]):
                    acc = acc + w * float(eval_tree(g, x)[0])
                out[o] = acc
            return out

        return NarxModel(f=f, n_p=n_p, n_u=n_u, n_y=n_y, linear=False,
                         name="genemodel")

    def total_nodes(self) -> int:
        return sum(tree_nodes(g) for gs in self.genes for g in gs)


def model_to_text(model: GeneModel) -> str:
    names = list(model.names)
    parts = [f"(narx {model.n_p} {model.n_y} {model.n_u}"]
    for o in range(model.n_y):
        terms = [f"(term {float(model.weights[o][j + 1])!r} "
                 f"{tree_to_sexpr(model.genes[o][j], names)})"
                 for j in range(len(model.genes[o]))]
        parts.append(f"  (output {float(model.weights[o][0])!r} " + " ".join(terms) + ")")
    return "\n".join(parts) + ")"


def model_from_text(text: str) -> GeneModel:
    tokens = _tokenize(text)
    if tokens[:2] != ["(", "narx"]:
        raise ValueError("model text must start with '(narx'")
    n_p, n_y, n_u = (int(t) for t in tokens[2:5])
    names = feature_names(n_p, n_y, n_u)
    name_idx = {n: i for i, n in enumerate(names)}
    pos = 5
    genes, weights = [], []
    for _ in range(n_y):
        if tokens[pos : pos + 2] != ["(", "output"]:
            raise ValueError("expected '(output'")
        pos += 2
        bias = float(tokens[pos])
        pos += 1
        out_genes, out_w = [], [bias]
        while tokens[pos] == "(":
            if tokens[pos + 1] != "term":
                raise ValueError("expected '(term'")
            out_w.append(float(tokens[pos + 2]))
            tree, pos = _parse_expr(tokens, pos + 3, name_idx)
            if tokens[pos] != ")":
                raise ValueError("unterminated term")
            pos += 1
            out_genes.append(tree)
        if tokens[pos] != ")":
            raise ValueError("unterminated output block")
        pos += 1
        genes.append(tuple(out_genes))
        weights.append(np.asarray(out_w))
    if tokens[pos] != ")":
        raise ValueError("unterminated model")
    return GeneModel(n_p=n_p, n_y=n_y, n_u=n_u,
                     genes=tuple(genes), weights=tuple(weights))


# ---------------------------------------------------------------------------
# data preparation


def _one_step_windows(suite: TestSuite, n_p: int):
    """Regressor matrix and targets over all (case, sample, step) rows."""
    rows, targets = [], []
    for case in suite.cases:
        n_s, n_k, _ = case.samples.shape
        for s in range(n_s):
            for k in range(n_p, n_k):
                y_lags = [case.samples[s, k - lag] for lag in range(1, n_p + 1)]
                u_lags = [case.nominal_u[k - lag] for lag in range(n_p + 1)]
                rows.append(np.concatenate(y_lags + u_lags))
                targets.append(case.samples[s, k])
    return np.asarray(rows), np.asarray(targets)


def _freerun_arrays(suite: TestSuite, n_p: int):
    """Stacked windows and inputs for simulating all (case, sample) pairs at once."""
    H0, U, Y = [], [], []
    for case in suite.cases:
        n_s = case.samples.shape[0]
        for s in range(n_s):
            H0.append(case.samples[s, :n_p])
            U.append(case.nominal_u)
            Y.append(case.samples[s])
    return np.asarray(H0), np.asarray(U), np.asarray(Y)


def _features_batch(H: np.ndarray, U: np.ndarray, k: int, n_p: int) -> np.ndarray:
    cols = [H[:, n_p - lag, :] for lag in range(1, n_p + 1)]
    cols += [U[:, k - lag, :] for lag in range(n_p + 1)]
    return np.concatenate(cols, axis=1)


class _Candidate:
    """Gene trees plus lazily fitted weights and cached scores."""

    __slots__ = ("genes", "weights", "fitness", "score")

    def __init__(self, genes):
        self.genes = genes
        self.weights = None
        self.fitness = None
        self.score = None

    def nodes(self) -> int:
        return sum(tree_nodes(g) for gs in self.genes for g in gs)


def _fit_weights(cand: _Candidate, X: np.ndarray, T: np.ndarray) -> bool:
    weights = []
    for o, gs in enumerate(cand.genes):
        cols = [np.ones(X.shape[0])]
        for g in gs:
            v = eval_tree(g, X)
            if not np.all(np.isfinite(v)):
                return False
            cols.append(v)
        A = np.stack(cols, axis=1)
        w, *_ = np.linalg.lstsq(A, T[:, o], rcond=None)
        if not np.all(np.isfinite(w)):
            return False
        weights.append(w)
    cand.weights = tuple(weights)
    return True


def _freerun_cost(cand: _Candidate, H0, U, Y, n_p: int) -> float:
    n_rows, n_k = Y.shape[0], Y.shape[1]
    n_y = Y.shape[2]
    H = H0.copy()
    total = 0.0
    for k in range(n_p, n_k):
        X = _features_batch(H, U, k, n_p)
        pred = np.empty((n_rows, n_y))
        for o in range(n_y):
            acc = np.full(n_rows, cand.weights[o][0])
            for w, g in zip(cand.weights[o][1:], cand.genes[o]):
                acc = acc + w * eval_tree(g, X)
            pred[:, o] = acc
        if not np.all(np.isfinite(pred)) or np.abs(pred).max() > _DIVERGED:
            return np.inf
        total += float(((pred - Y[:, k, :]) ** 2).sum())
        H = np.concatenate([H[:, 1:, :], pred[:, None, :]], axis=1)
    return total


def _gene_model(cand: _Candidate, n_p: int, n_y: int, n_u: int) -> GeneModel:
    return GeneModel(n_p=n_p, n_y=n_y, n_u=n_u, genes=cand.genes,
                     weights=cand.weights)


# ---------------------------------------------------------------------------
# evolution


def _random_genes(rng, cfg: GPConfig, n_y: int, n_feat: int):
    genes = []
    for _ in range(n_y):
        n_g = int(rng.integers(1, cfg.max_genes + 1))
        genes.append(tuple(
            random_tree(rng, n_feat, int(rng.integers(2, 4)),
                        cfg.const_low, cfg.const_high)
            for _ in range(n_g)))
    return tuple(genes)


def _tournament(rng, scored: list, k: int) -> _Candidate:
    idx = rng.integers(len(scored), size=k)
    best = min(idx, key=lambda i: (scored[i][0], scored[i][1].nodes()))
    return scored[best][1]


def _legal(tree, cfg: GPConfig) -> bool:
    return tree_depth(tree) <= cfg.max_depth and tree_nodes(tree) <= cfg.max_nodes


def _crossover(rng, a: _Candidate, b: _Candidate, cfg: GPConfig) -> _Candidate:
    o = int(rng.integers(len(a.genes)))
    ga = list(a.genes[o])
    gb = b.genes[o]
    i = int(rng.integers(len(ga)))
    j = int(rng.integers(len(gb)))
    pa = list(_paths(ga[i]))
    pb = list(_paths(gb[j]))
    cut_a = pa[rng.integers(len(pa))]
    cut_b = pb[rng.integers(len(pb))]
    child = _replace(ga[i], cut_a, _subtree(gb[j], cut_b))
    if not _legal(child, cfg):
        return a
    ga[i] = child
    genes = list(a.genes)
    genes[o] = tuple(ga)
    return _Candidate(tuple(genes))


def _mutate(rng, a: _Candidate, cfg: GPConfig, n_feat: int) -> _Candidate:
    o = int(rng.integers(len(a.genes)))
    gs = list(a.genes[o])
    i = int(rng.integers(len(gs)))
    paths = list(_paths(gs[i]))
    cut = paths[rng.integers(len(paths))]
    sub = random_tree(rng, n_feat, 2, cfg.const_low, cfg.const_high)
    child = _replace(gs[i], cut, sub)
    if not _legal(child, cfg):
        return a
    gs[i] = child
    genes = list(a.genes)
    genes[o] = tuple(gs)
    return _Candidate(tuple(genes))


def _evolve(rng, population: list, score_fn, cfg: GPConfig, generations: int,
            n_feat: int) -> list:
    """Generational loop with elitism; returns (score, candidate) sorted."""
    scored = sorted(((score_fn(c), c) for c in population),
                    key=lambda t: (t[0], t[1].nodes()))
    for _ in range(generations):
        nxt = [scored[0][1]]  # elite
        while len(nxt) < len(population):
            r = rng.random()
            if r < cfg.p_crossover:
                a = _tournament(rng, scored, cfg.tournament)
                b = _tournament(rng, scored, cfg.tournament)
                child = _crossover(rng, a, b, cfg)
            elif r < cfg.p_crossover + cfg.p_mutation:
                child = _mutate(rng, _tournament(rng, scored, cfg.tournament),
                                cfg, n_feat)
            else:
                child = _tournament(rng, scored, cfg.tournament)
            nxt.append(child)
        scored = sorted(((score_fn(c), c) for c in nxt),
                        key=lambda t: (t[0], t[1].nodes()))
    return scored


@dataclass(frozen=True)
class BlackResult:
    """Discovered structure plus its terminal conformance outcome."""

    status: str
    alpha: np.ndarray | None
    cdelta: np.ndarray | None
    cost: float
    containment_rate: float | None
    spec: UncertaintySpec | None
    model: GeneModel
    text: str
    fitness: float
    white: ConformResult


def _finish(cand: _Candidate, suite, template, n_p, n_y, n_u,
            constraints, weights, engine) -> BlackResult:
    gm = _gene_model(cand, n_p, n_y, n_u)
    white = identify_white(gm.as_model(), suite, template,
                           constraints=constraints, weights=weights,
                           engine=engine, recheck=True)
    return BlackResult(status=white.status, alpha=white.alpha,
                       cdelta=white.cdelta, cost=white.cost,
                       containment_rate=white.containment_rate, spec=white.spec,
                       model=gm, text=model_to_text(gm),
                       fitness=cand.fitness if cand.fitness is not None else np.nan,
                       white=white)


def _make_scorer(X, T, H0, U, Y, n_p):
    def score(cand: _Candidate) -> float:
        if cand.fitness is None:
            if cand.weights is None and not _fit_weights(cand, X, T):
                cand.fitness = np.inf
                return cand.fitness
            cand.fitness = _freerun_cost(cand, H0, U, Y, n_p)
        return cand.fitness
    return score


def _seed_candidates(seed_models, n_p, n_y, n_u):
    cands = []
    for sm in seed_models or ():
        gm = model_from_text(sm) if isinstance(sm, str) else sm
        if (gm.n_p, gm.n_y, gm.n_u) != (n_p, n_y, n_u):
            raise ValueError("seed model dimensions do not match the suite")
        cand = _Candidate(gm.genes)
        cand.weights = tuple(np.asarray(w, dtype=float) for w in gm.weights)
        cands.append(cand)
    return cands


def _initial_population(rng, cfg, n_y, n_feat, seeded):
    if len(seeded) > cfg.population:
        raise ValueError("more seed models than population slots")
    fill = cfg.population - len(seeded)
    return seeded + [_Candidate(_random_genes(rng, cfg, n_y, n_feat))
                     for _ in range(fill)]


def conformance_score(model, suites, template: UncertaintySpec, *,
                      constraints: str = "halfspace", weights=None,
                      engine: str = "auto") -> float:
    """Summed white-box cost over subdatasets; infeasible or crashing
    solves contribute a large constant penalty instead of aborting, so
    structures with exploding reach sets lose comparisons but stay ordered."""
    if isinstance(model, GeneModel):
        model = model.as_model()
    total = 0.0
    for sub in suites:
        try:
            res = identify_white(model, sub, template,
                                 constraints=constraints, weights=weights,
                                 recheck=False, engine=engine)
            total += res.cost if res.status == "feasible" else _INFEASIBLE_PENALTY
        except (np.linalg.LinAlgError, FloatingPointError, ValueError,
                OverflowError):
            total += _INFEASIBLE_PENALTY
    return total


def identify_black_gp(suite: TestSuite, template: UncertaintySpec, n_p: int = 2,
                      *, config: GPConfig | None = None, seed: int = 0,
                      constraints: str = "halfspace", weights=None,
                      engine: str = "auto", suite_t1: TestSuite | None = None,
                      seed_models=None) -> BlackResult:
    """Evolve against free-run error, then scale the template once at the end.

    ``suite`` is the conformance data for the terminal white-box call;
    evolution trains on ``suite_t1`` (defaults to the same data).
    ``seed_models`` places known structures into the initial population.
    """
    cfg = config or GPConfig.desk()
    rng = np.random.default_rng(seed)
    n_y, n_u = suite.n_y, suite.n_u
    n_feat = n_p * n_y + (n_p + 1) * n_u
    train = suite if suite_t1 is None else suite_t1
    X, T = _one_step_windows(train, n_p)
    H0, U, Y = _freerun_arrays(train, n_p)
    pop = _initial_population(rng, cfg, n_y, n_feat,
                              _seed_candidates(seed_models, n_p, n_y, n_u))
    scored = _evolve(rng, pop, _make_scorer(X, T, H0, U, Y, n_p), cfg,
                     cfg.generations, n_feat)
    best = scored[0][1]
    return _finish(best, suite, template, n_p, n_y, n_u,
                   constraints, weights, engine)


def _split_cases(suite: TestSuite, n_v: int):
    half = max(1, suite.n_m // 2)
    t1 = suite.subset(range(half))
    t2 = suite.subset(range(half, suite.n_m)) if half < suite.n_m else t1
    return t1, t2


def _partition(suite: TestSuite, n_v: int):
    groups = [list(range(l, suite.n_m, n_v)) for l in range(min(n_v, suite.n_m))]
    return [suite.subset(g) for g in groups if g]


def identify_black_cgp(suite: TestSuite, template: UncertaintySpec, n_p: int = 2,
                       *, config: GPConfig | None = None, seed: int = 0,
                       constraints: str = "halfspace", weights=None,
                       engine: str = "auto", suite_t1: TestSuite | None = None,
                       suite_t2: TestSuite | None = None,
                       seed_models=None) -> BlackResult:
    """Two-phase search: free-run error first, conformance cost second.

    Phase one trains on ``suite_t1``, phase two keeps the best structures
    and evolves them further, scoring by the summed white-box cost over
    round-robin subdatasets of ``suite_t2``; the winner is finalized with
    a white-box solve on ``suite``.  When the training splits are not
    given, the cases of ``suite`` are halved.
    """
    cfg = config or GPConfig.desk()
    rng = np.random.default_rng(seed)
    n_y, n_u = suite.n_y, suite.n_u
    n_feat = n_p * n_y + (n_p + 1) * n_u
    if (suite_t1 is None) != (suite_t2 is None):
        raise ValueError("provide both training splits or neither")
    if suite_t1 is None:
        suite_t1, suite_t2 = _split_cases(suite, cfg.n_subdatasets)
    subs = _partition(suite_t2, cfg.n_subdatasets)
    X, T = _one_step_windows(suite_t1, n_p)
    H0, U, Y = _freerun_arrays(suite_t1, n_p)
    ls_score = _make_scorer(X, T, H0, U, Y, n_p)
    pop = _initial_population(rng, cfg, n_y, n_feat,
                              _seed_candidates(seed_models, n_p, n_y, n_u))
    scored = _evolve(rng, pop, ls_score, cfg, cfg.generations, n_feat)
    keep = [c for _, c in scored[: cfg.refine_population]]

    def conf_score(cand: _Candidate) -> float:
        if cand.score is not None:
            return cand.score
        if cand.weights is None and not _fit_weights(cand, X, T):
            cand.score = len(subs) * _INFEASIBLE_PENALTY
            return cand.score
        cand.score = conformance_score(
            _gene_model(cand, n_p, n_y, n_u), subs, template,
            constraints=constraints, weights=weights, engine=engine)
        return cand.score

    refined = _evolve(rng, keep, conf_score, cfg, cfg.refine_generations, n_feat)
    best = refined[0][1]
    if best.weights is None:
        _fit_weights(best, X, T)
    return _finish(best, suite, template, n_p, n_y, n_u,
                   constraints, weights, engine)
