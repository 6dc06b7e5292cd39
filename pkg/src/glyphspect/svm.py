"""RBF-kernel binary SVMs trained by sequential minimal optimization.

The solver is the simplified SMO schedule: sweep all samples, flag the ones
violating their KKT condition beyond tolerance, pick the second multiplier
at random (falling back to a scan when the random partner cannot move),
update the pair analytically, and apply Platt's clipping rules to the bias.
Training ends on the first violation-free sweep; `max_passes` update-free
sweeps with violations still present raise instead. Per-pair training sets
here are tiny (a couple dozen glyphs), so the unsophisticated working-set
choice converges quickly and stays reproducible from the seed.

A PairwiseModel bundles one binary machine per confusable class pair and
predicts by majority vote.
"""
from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass
from typing import Sequence

__all__ = [
    "FORMAT_VERSION",
    "DegenerateTrainingError",
    "ConvergenceError",
    "ModelFormatError",
    "KernelParams",
    "TrainingSet",
    "SvmModel",
    "ModelMeta",
    "PairwiseModel",
    "default_gamma",
    "rbf_kernel",
    "train_smo",
    "decision",
    "predict_pair",
    "train_pairwise",
    "predict_multiclass",
    "save_model",
    "load_model",
]

FORMAT_VERSION = 1

_ZERO_ALPHA = 1e-8  # multipliers at or below this count as zero and are dropped
_MIN_STEP = 1e-5  # smallest multiplier change worth accepting
_EQUALITY_TOL = 1e-6  # bound on |sum(alpha_i * y_i)| for stored models
_HARD_SWEEP_CAP = 100_000


class DegenerateTrainingError(ValueError):
    """Training data does not define a two-class problem."""


class ConvergenceError(RuntimeError):
    """The SMO loop could not reach a KKT-feasible state."""


class ModelFormatError(ValueError):
    """A serialized model violates the file schema or a stored invariant."""


def default_gamma(dim: int) -> float:
    """Scale-aware RBF width default: 1/d for d-dimensional features."""
    if dim < 1:
        raise ValueError("feature dimension must be positive")
    return 1.0 / dim


def _snap_to_bounds(a: float, c: float) -> float:
    if a < _ZERO_ALPHA:
        return 0.0
    if a > c - _ZERO_ALPHA:
        return c
    return a


@dataclass(frozen=True)
class KernelParams:
    """RBF width, box constraint, and SMO stopping controls."""

    gamma: float
    c: float = 10.0
    kkt_tol: float = 1e-3
    max_passes: int = 50

    def __post_init__(self):
        if self.gamma <= 0.0:
            raise ValueError("gamma must be positive")
        if self.c <= 0.0:
            raise ValueError("c must be positive")
        if self.kkt_tol <= 0.0:
            raise ValueError("kkt_tol must be positive")
        if self.max_passes < 1:
            raise ValueError("max_passes must be at least 1")


def rbf_kernel(x: Sequence[float], y: Sequence[float], gamma: float) -> float:
    """exp(-gamma * ||x - y||^2); equals 1 at zero distance."""
    if len(x) != len(y):
        raise ValueError(f"dimension mismatch: {len(x)} vs {len(y)}")
    if gamma <= 0.0:
        raise ValueError("gamma must be positive")
    d2 = 0.0
    for a, b in zip(x, y):
        diff = a - b
        d2 += diff * diff
    return math.exp(-gamma * d2)


@dataclass(frozen=True)
class TrainingSet:
    """Feature rows with labels in {-1, +1}; both labels must occur."""

    x: tuple[tuple[float, ...], ...]
    y: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(
            self, "x", tuple(tuple(float(v) for v in row) for row in self.x)
        )
        object.__setattr__(self, "y", tuple(int(v) for v in self.y))
        if len(self.x) != len(self.y):
            raise ValueError("x and y lengths differ")
        if not self.x:
            raise ValueError("training set is empty")
        for label in self.y:
            if label not in (-1, 1):
                raise ValueError(f"label {label} not in {{-1, +1}}")
        dim = len(self.x[0])
        for row in self.x:
            if len(row) != dim:
                raise ValueError("feature rows have differing dimensionality")
        if len(set(self.y)) < 2:
            raise DegenerateTrainingError(
                "degenerate training set: only one class present"
            )

    @property
    def dim(self) -> int:
        return len(self.x[0])


@dataclass(frozen=True)
class SvmModel:
    """Trained dual solution: support vectors, multipliers, bias, kernel width.

    Only structural invariants are enforced here (hand-built stub models are
    legitimate for testing); the dual equality constraint is asserted by the
    trainer and validated by the model-file loader.
    """

    support_x: tuple[tuple[float, ...], ...]
    support_y: tuple[int, ...]
    alpha: tuple[float, ...]
    bias: float
    gamma: float
    dim: int
    pos_class: str
    neg_class: str
    c: float

    def __post_init__(self):
        object.__setattr__(
            self,
            "support_x",
            tuple(tuple(float(v) for v in row) for row in self.support_x),
        )
        object.__setattr__(self, "support_y", tuple(int(v) for v in self.support_y))
        object.__setattr__(self, "alpha", tuple(float(a) for a in self.alpha))
        if not (len(self.support_x) == len(self.support_y) == len(self.alpha) >= 1):
            raise ValueError("support vectors, labels, and alphas must align")
        if self.gamma <= 0.0 or self.c <= 0.0:
            raise ValueError("gamma and c must be positive")
        if self.pos_class == self.neg_class:
            raise ValueError("pos_class and neg_class must differ")
        if not math.isfinite(self.bias):
            raise ValueError("bias must be finite")
        for row in self.support_x:
            if len(row) != self.dim:
                raise ValueError("support vector dimension mismatch")
            for v in row:
                if not math.isfinite(v):
                    raise ValueError("non-finite support vector component")
        for label in self.support_y:
            if label not in (-1, 1):
                raise ValueError(f"label {label} not in {{-1, +1}}")
        for a in self.alpha:
            if not math.isfinite(a):
                raise ValueError("non-finite multiplier")
            if a <= 0.0:
                raise ValueError("stored multipliers must be positive")
            if a > self.c:
                raise ValueError(f"multiplier {a} exceeds box constraint {self.c}")


def train_smo(
    data: TrainingSet,
    params: KernelParams,
    seed: int,
    pos_class: str = "pos",
    neg_class: str = "neg",
    debug: bool = False,
) -> SvmModel:
    """Solve the soft-margin dual by simplified SMO, reproducibly from seed.

    Returns only once a full sweep finds every sample within kkt_tol of its
    KKT condition, so the advertised optimality contract actually holds on
    the returned model; if max_passes consecutive sweeps make no accepted
    update while violations remain, ConvergenceError is raised instead of
    silently returning a bad solution. The model keeps only samples with a
    nonzero multiplier. With `debug` the dual objective is recomputed
    around every accepted update and asserted non-decreasing.
    """
    if pos_class == neg_class:
        raise ValueError("pos_class and neg_class must differ")
    x, y = data.x, data.y
    m = len(x)
    gamma, c, tol = params.gamma, params.c, params.kkt_tol

    kern = [[0.0] * m for _ in range(m)]
    for i in range(m):
        kern[i][i] = 1.0
        for j in range(i + 1, m):
            kij = rbf_kernel(x[i], x[j], gamma)
            kern[i][j] = kij
            kern[j][i] = kij

    alphas = [0.0] * m
    bias = 0.0
    rng = random.Random(seed)

    def output(i: int) -> float:
        s = bias
        for j in range(m):
            aj = alphas[j]
            if aj != 0.0:
                s += aj * y[j] * kern[j][i]
        return s

    def objective() -> float:
        linear = sum(alphas)
        quad = 0.0
        for i in range(m):
            ai = alphas[i]
            if ai == 0.0:
                continue
            for j in range(m):
                aj = alphas[j]
                if aj != 0.0:
                    quad += ai * aj * y[i] * y[j] * kern[i][j]
        return linear - 0.5 * quad

    def take_step(i: int, j: int, e_i: float) -> bool:
        nonlocal bias
        e_j = output(j) - y[j]
        a_i, a_j = alphas[i], alphas[j]
        if y[i] != y[j]:
            lo = max(0.0, a_j - a_i)
            hi = min(c, c + a_j - a_i)
        else:
            lo = max(0.0, a_i + a_j - c)
            hi = min(c, a_i + a_j)
        if lo >= hi:
            return False
        eta = 2.0 * kern[i][j] - kern[i][i] - kern[j][j]
        if eta >= 0.0:
            return False
        a_j_new = a_j - y[j] * (e_i - e_j) / eta
        a_j_new = min(hi, max(lo, a_j_new))
        a_j_new = _snap_to_bounds(a_j_new, c)
        if abs(a_j_new - a_j) < _MIN_STEP:
            return False
        a_i_new = a_i + y[i] * y[j] * (a_j - a_j_new)
        # rounding in the update can land an ulp outside the box
        a_i_new = _snap_to_bounds(min(c, max(0.0, a_i_new)), c)
        if debug:
            before = objective()
        b1 = (
            bias
            - e_i
            - y[i] * (a_i_new - a_i) * kern[i][i]
            - y[j] * (a_j_new - a_j) * kern[i][j]
        )
        b2 = (
            bias
            - e_j
            - y[i] * (a_i_new - a_i) * kern[i][j]
            - y[j] * (a_j_new - a_j) * kern[j][j]
        )
        alphas[i], alphas[j] = a_i_new, a_j_new
        if 0.0 < a_i_new < c:
            bias = b1
        elif 0.0 < a_j_new < c:
            bias = b2
        else:
            bias = (b1 + b2) / 2.0
        if debug:
            after = objective()
            assert after >= before - 1e-9 * max(1.0, abs(before)), (
                f"dual objective decreased: {before} -> {after}"
            )
        return True

    quiet_sweeps = 0
    total_sweeps = 0
    while True:
        total_sweeps += 1
        if total_sweeps > _HARD_SWEEP_CAP:
            raise ConvergenceError(
                f"no convergence after {_HARD_SWEEP_CAP} SMO sweeps"
            )
        changed = 0
        flagged = 0
        for i in range(m):
            e_i = output(i) - y[i]
            r_i = y[i] * e_i
            # Multipliers within _ZERO_ALPHA of a bound count as at-bound,
            # matching how support vectors are extracted below.
            at_lo = alphas[i] <= _ZERO_ALPHA
            at_hi = alphas[i] >= c - _ZERO_ALPHA
            if not ((r_i < -tol and not at_hi) or (r_i > tol and not at_lo)):
                continue
            flagged += 1
            # Random partner first; if that step is rejected, scan the rest
            # from a random offset so a fixable violation is never stranded.
            j = rng.randrange(m - 1)
            if j >= i:
                j += 1
            if take_step(i, j, e_i):
                changed += 1
                continue
            start = rng.randrange(m)
            for off in range(m):
                k = (start + off) % m
                if k == i or k == j:
                    continue
                if take_step(i, k, e_i):
                    changed += 1
                    break
        if flagged == 0:
            break
        quiet_sweeps = quiet_sweeps + 1 if changed == 0 else 0
        if quiet_sweeps >= params.max_passes:
            raise ConvergenceError(
                f"{flagged} sample(s) still violate KKT after "
                f"{params.max_passes} update-free sweeps"
            )

    keep = [i for i in range(m) if alphas[i] > _ZERO_ALPHA]
    if not keep:
        raise ConvergenceError("solver finished with no support vectors")
    balance = sum(alphas[i] * y[i] for i in keep)
    if abs(balance) > _EQUALITY_TOL:
        raise ConvergenceError(
            f"dual equality constraint violated after training: {balance}"
        )
    return SvmModel(
        support_x=tuple(x[i] for i in keep),
        support_y=tuple(y[i] for i in keep),
        alpha=tuple(alphas[i] for i in keep),
        bias=bias,
        gamma=gamma,
        dim=data.dim,
        pos_class=pos_class,
        neg_class=neg_class,
        c=c,
    )


def decision(model: SvmModel, x: Sequence[float]) -> float:
    """sum_i alpha_i * y_i * K(s_i, x) + bias."""
    if len(x) != model.dim:
        raise ValueError(f"dimension mismatch: expected {model.dim}, got {len(x)}")
    s = 0.0
    for sv, label, a in zip(model.support_x, model.support_y, model.alpha):
        s += a * label * rbf_kernel(sv, x, model.gamma)
    return s + model.bias


def predict_pair(model: SvmModel, x: Sequence[float]) -> str:
    """Positive class on decision >= 0 (ties at exactly zero go positive)."""
    return model.pos_class if decision(model, x) >= 0.0 else model.neg_class


@dataclass(frozen=True)
class ModelMeta:
    """Pipeline facts baked into a model file: raster side, coefficient count,
    the split seed, and whether feature vectors were L2-normalized."""

    n: int
    m: int
    seed: int
    normalize: bool = False

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be positive")
        if not 1 <= self.m <= self.n:
            raise ValueError(f"m must satisfy 1 <= m <= {self.n}, got {self.m}")


@dataclass(frozen=True)
class PairwiseModel:
    """One binary machine per confusable class pair, voting for prediction."""

    models: tuple[SvmModel, ...]
    classes: tuple[str, ...]
    meta: ModelMeta | None = None

    def __post_init__(self):
        object.__setattr__(self, "models", tuple(self.models))
        object.__setattr__(self, "classes", tuple(self.classes))
        if not self.models:
            raise ValueError("pairwise model needs at least one pair machine")
        if not self.classes:
            raise ValueError("pairwise model needs at least one class")
        if len(set(self.classes)) != len(self.classes):
            raise ValueError("duplicate class names")
        known = set(self.classes)
        seen_pairs = set()
        first = self.models[0]
        for mdl in self.models:
            if mdl.pos_class not in known or mdl.neg_class not in known:
                raise ValueError(
                    f"pair {mdl.pos_class}/{mdl.neg_class} uses an unlisted class"
                )
            key = frozenset((mdl.pos_class, mdl.neg_class))
            if key in seen_pairs:
                raise ValueError(
                    f"duplicate pair {mdl.pos_class}/{mdl.neg_class}"
                )
            seen_pairs.add(key)
            if mdl.dim != first.dim:
                raise ValueError("pair machines disagree on feature dimension")
            if mdl.gamma != first.gamma or mdl.c != first.c:
                raise ValueError("pair machines disagree on kernel parameters")

    @property
    def dim(self) -> int:
        return self.models[0].dim

    def pair_model(self, a: str, b: str) -> SvmModel:
        """Look up the machine for an unordered class pair."""
        want = frozenset((a, b))
        for mdl in self.models:
            if frozenset((mdl.pos_class, mdl.neg_class)) == want:
                return mdl
        raise KeyError(f"no model for pair {a}/{b}")


def train_pairwise(
    features: Sequence[Sequence[float]],
    labels: Sequence[str],
    params: KernelParams,
    seed: int,
    pairs: Sequence[tuple[str, str]] | None = None,
    meta: ModelMeta | None = None,
) -> PairwiseModel:
    """Train one binary machine per class pair.

    With `pairs=None` every unordered pair of observed classes gets a
    machine (classes ordered by first appearance). Passing an explicit pair
    list restricts training to just those confusable pairs; the first class
    of each pair is bound to +1. Deterministic given the seed.
    """
    if len(features) != len(labels):
        raise ValueError("features and labels lengths differ")
    observed: list[str] = []
    for label in labels:
        if label not in observed:
            observed.append(label)

    if pairs is None:
        if len(observed) < 2:
            raise DegenerateTrainingError("fewer than 2 classes in training data")
        pair_list = [
            (observed[i], observed[j])
            for i in range(len(observed))
            for j in range(i + 1, len(observed))
        ]
        class_order = list(observed)
    else:
        pair_list = [(str(a), str(b)) for a, b in pairs]
        if not pair_list:
            raise ValueError("empty pair list")
        seen = set()
        class_order = []
        for a, b in pair_list:
            if a == b:
                raise ValueError(f"pair {a}/{b}: classes must differ")
            key = frozenset((a, b))
            if key in seen:
                raise ValueError(f"duplicate pair {a}/{b}")
            seen.add(key)
            for cls in (a, b):
                if cls not in class_order:
                    class_order.append(cls)
        present = set(observed)
        for cls in class_order:
            if cls not in present:
                raise DegenerateTrainingError(f"class '{cls}' has no samples")

    models = []
    for idx, (pos, neg) in enumerate(pair_list):
        xs = []
        ys = []
        for row, label in zip(features, labels):
            if label == pos:
                xs.append(tuple(float(v) for v in row))
                ys.append(1)
            elif label == neg:
                xs.append(tuple(float(v) for v in row))
                ys.append(-1)
        data = TrainingSet(tuple(xs), tuple(ys))
        models.append(
            train_smo(data, params, seed + idx, pos_class=pos, neg_class=neg)
        )
    return PairwiseModel(tuple(models), tuple(class_order), meta)


def predict_multiclass(
    pm: PairwiseModel, x: Sequence[float]
) -> tuple[str, dict[str, int]]:
    """Majority vote over pair machines; ties go to the earliest class."""
    if len(x) != pm.dim:
        raise ValueError(f"dimension mismatch: expected {pm.dim}, got {len(x)}")
    votes = {cls: 0 for cls in pm.classes}
    for mdl in pm.models:
        votes[predict_pair(mdl, x)] += 1
    winner = pm.classes[0]
    for cls in pm.classes[1:]:
        if votes[cls] > votes[winner]:
            winner = cls
    return winner, votes


def _format_real(value: float) -> str:
    if not math.isfinite(value):
        raise ValueError("non-finite real cannot be serialized")
    return format(float(value), ".17g")


def _emit(value, parts: list[str], level: int) -> None:
    pad = "  " * level
    if isinstance(value, dict):
        if not value:
            parts.append("{}")
            return
        parts.append("{\n")
        items = list(value.items())
        for idx, (key, val) in enumerate(items):
            parts.append("  " * (level + 1) + json.dumps(key) + ": ")
            _emit(val, parts, level + 1)
            parts.append(",\n" if idx < len(items) - 1 else "\n")
        parts.append(pad + "}")
    elif isinstance(value, (list, tuple)):
        if not value:
            parts.append("[]")
            return
        if all(not isinstance(v, (dict, list, tuple)) for v in value):
            parts.append("[" + ", ".join(_scalar(v) for v in value) + "]")
            return
        parts.append("[\n")
        for idx, val in enumerate(value):
            parts.append("  " * (level + 1))
            _emit(val, parts, level + 1)
            parts.append(",\n" if idx < len(value) - 1 else "\n")
        parts.append(pad + "]")
    else:
        parts.append(_scalar(value))


def _scalar(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return _format_real(value)
    if isinstance(value, str):
        return json.dumps(value)
    raise TypeError(f"unsupported scalar {value!r}")


def save_model(pm: PairwiseModel) -> bytes:
    """Serialize to versioned JSON; reals carry 17 significant digits."""
    if pm.meta is None:
        raise ValueError("pairwise model carries no metadata; cannot serialize")
    doc = {
        "format_version": FORMAT_VERSION,
        "n": pm.meta.n,
        "m": pm.meta.m,
        "gamma": float(pm.models[0].gamma),
        "c": float(pm.models[0].c),
        "seed": pm.meta.seed,
        "normalize": pm.meta.normalize,
        "classes": list(pm.classes),
        "pairs": [
            {
                "pos_class": mdl.pos_class,
                "neg_class": mdl.neg_class,
                "bias": float(mdl.bias),
                "support": [
                    {"y": label, "alpha": float(a), "x": [float(v) for v in sv]}
                    for sv, label, a in zip(mdl.support_x, mdl.support_y, mdl.alpha)
                ],
            }
            for mdl in pm.models
        ],
    }
    parts: list[str] = []
    _emit(doc, parts, 0)
    parts.append("\n")
    return "".join(parts).encode("utf-8")


def _field(doc: dict, key: str, kinds, what: str):
    if key not in doc:
        raise ModelFormatError(f"missing field '{key}'")
    value = doc[key]
    if isinstance(value, bool) and bool not in (
        kinds if isinstance(kinds, tuple) else (kinds,)
    ):
        raise ModelFormatError(f"field '{key}' must be {what}")
    if not isinstance(value, kinds):
        raise ModelFormatError(f"field '{key}' must be {what}")
    return value


def _finite_real(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ModelFormatError(f"{where} must be a real number")
    value = float(value)
    if not math.isfinite(value):
        raise ModelFormatError(f"{where} is not finite")
    return value


def load_model(data: bytes) -> PairwiseModel:
    """Parse and validate a serialized PairwiseModel.

    Every stored invariant is checked: version, parameter ranges,
    0 < alpha <= c, the dual equality constraint per pair, finite reals,
    and consistent feature dimensions.
    """
    try:
        doc = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"invalid model file: {exc}") from None
    if not isinstance(doc, dict):
        raise ModelFormatError("model file must contain a JSON object")

    version = _field(doc, "format_version", int, "an integer")
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported model format version: {version}")
    n = _field(doc, "n", int, "an integer")
    m = _field(doc, "m", int, "an integer")
    gamma = _finite_real(doc.get("gamma"), "field 'gamma'")
    c = _finite_real(doc.get("c"), "field 'c'")
    if gamma <= 0.0:
        raise ModelFormatError("gamma must be positive")
    if c <= 0.0:
        raise ModelFormatError("c must be positive")
    seed = _field(doc, "seed", int, "an integer")
    normalize = _field(doc, "normalize", bool, "a boolean")
    try:
        meta = ModelMeta(n=n, m=m, seed=seed, normalize=normalize)
    except ValueError as exc:
        raise ModelFormatError(str(exc)) from None

    classes = _field(doc, "classes", list, "a list")
    if not classes or not all(isinstance(cls, str) and cls for cls in classes):
        raise ModelFormatError("classes must be a non-empty list of names")
    if len(set(classes)) != len(classes):
        raise ModelFormatError("duplicate class names")

    raw_pairs = _field(doc, "pairs", list, "a list")
    if not raw_pairs:
        raise ModelFormatError("model stores no pairs")
    models = []
    dim = None
    for entry in raw_pairs:
        if not isinstance(entry, dict):
            raise ModelFormatError("each pair must be a JSON object")
        pos = _field(entry, "pos_class", str, "a string")
        neg = _field(entry, "neg_class", str, "a string")
        where = f"pair {pos}/{neg}"
        bias = _finite_real(entry.get("bias"), f"{where} bias")
        support = _field(entry, "support", list, "a list")
        if not support:
            raise ModelFormatError(f"{where} has no support vectors")
        xs, ys, alphas = [], [], []
        for sv in support:
            if not isinstance(sv, dict):
                raise ModelFormatError(f"{where}: support entries must be objects")
            label = sv.get("y")
            if label not in (-1, 1):
                raise ModelFormatError(f"{where}: label must be -1 or +1")
            a = _finite_real(sv.get("alpha"), f"{where} alpha")
            if a <= 0.0:
                raise ModelFormatError(f"{where}: alpha must be positive")
            if a > c:
                raise ModelFormatError(
                    f"{where}: alpha {a} exceeds box constraint {c}"
                )
            row = sv.get("x")
            if not isinstance(row, list) or not row:
                raise ModelFormatError(f"{where}: support vector must be a list")
            vec = tuple(
                _finite_real(v, f"{where} support component") for v in row
            )
            if dim is None:
                dim = len(vec)
            elif len(vec) != dim:
                raise ModelFormatError(f"{where}: support vector dimension mismatch")
            xs.append(vec)
            ys.append(int(label))
            alphas.append(a)
        balance = sum(a * label for a, label in zip(alphas, ys))
        if abs(balance) > _EQUALITY_TOL:
            raise ModelFormatError(
                f"{where}: dual equality constraint violated ({balance})"
            )
        try:
            models.append(
                SvmModel(
                    support_x=tuple(xs),
                    support_y=tuple(ys),
                    alpha=tuple(alphas),
                    bias=bias,
                    gamma=gamma,
                    dim=dim,
                    pos_class=pos,
                    neg_class=neg,
                    c=c,
                )
            )
        except ValueError as exc:
            raise ModelFormatError(f"{where}: {exc}") from None

    try:
        return PairwiseModel(tuple(models), tuple(classes), meta)
    except ValueError as exc:
        raise ModelFormatError(str(exc)) from None
