"""Synthetic per-minute match states with known win probability.

Each sample is one minute of a two-team match: in-game minute, gold and
experience differences, kill counts, a sparse champion-composition block
and filler context features. A latent advantage combines the difference
features; dividing it by an input-dependent noise temperature that shrinks
as the game progresses (early states are genuinely harder to call) gives
the ground-truth win probability, and the label is a Bernoulli draw from
it. Because that probability is stored with every sample, calibration can
be measured against the truth instead of only against noisy labels.

Difference features are team-red minus team-blue, so a positive latent
advantage favors the red team and p_true is the probability of label 1
(red win). Feature values are quantized at generation time, and the stored
probability is computed from the quantized features, so a written dataset
is exactly reproducible from its own file.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .duloss import sigmoid

SCALAR_COLUMNS = ["minute", "gold_diff", "xp_diff", "kills_blue", "kills_red"]

# feature magnitudes (gold and xp differences are in thousands)
GOLD_STD_PER_SQRT_MINUTE = 0.8
XP_STD_PER_SQRT_MINUTE = 0.5
KILL_RATE_PER_MINUTE = 0.35

# latent-advantage weights
C_GOLD = 0.55
C_XP = 0.35
C_KILL = 0.18
C_INTERACTION = 0.30  # gold_diff * minute / 40
COMP_COEF_STD = 0.05  # per-champion latent effect, deliberately small

_PICKS_PER_TEAM = 5


class DatasetFormatError(ValueError):
    """Raised for malformed dataset files; the message names the line."""


@dataclass
class Sample:
    """One match-minute: feature vector, outcome label, optional truth.

    ``p_true`` is the generator's win probability for label 1; it is absent
    for datasets of real matches.
    """

    features: np.ndarray
    label: int
    p_true: float | None = None


@dataclass
class SyntheticConfig:
    """Generator knobs. The noise temperature is
    noise_floor + noise_gain / (1 + minute / 10), so earlier minutes carry
    at least as much label noise as later ones."""

    n_matches: int
    n_features: int = 295
    roster_size: int = 160
    coef_scale: float = 1.0
    noise_floor: float = 0.4
    noise_gain: float = 7.0
    minute_min: int = 1
    minute_max: int = 40
    rng_seed: int = 0

    def __post_init__(self):
        if self.n_matches < 1:
            raise ValueError("n_matches must be at least 1")
        if self.roster_size < 2 * _PICKS_PER_TEAM:
            raise ValueError("roster_size must allow ten distinct picks")
        if self.n_features < len(SCALAR_COLUMNS) + self.roster_size:
            raise ValueError("n_features too small for the scalar and roster blocks")
        if self.noise_floor < 0 or self.noise_gain < 0:
            raise ValueError("noise parameters must be nonnegative")
        if self.noise_floor + self.noise_gain <= 0:
            raise ValueError("noise temperature must be strictly positive")
        if self.minute_max < self.minute_min or self.minute_min < 0:
            raise ValueError("minute range is empty")

    @property
    def filler_size(self) -> int:
        return self.n_features - len(SCALAR_COLUMNS) - self.roster_size


def noise_temperature(minute, config: SyntheticConfig):
    """Input-dependent label-noise temperature; decreasing in the minute."""
    minute = np.asarray(minute, dtype=float)
    tau = config.noise_floor + config.noise_gain / (1.0 + minute / 10.0)
    return float(tau) if tau.ndim == 0 else tau


def champion_coefficients(config: SyntheticConfig) -> np.ndarray:
    """Per-champion latent effects, derived from the top-level seed so the
    same seed always describes the same roster."""
    rng = np.random.default_rng([config.rng_seed, 17])
    return rng.normal(0.0, COMP_COEF_STD, size=config.roster_size)


def latent_advantage(
    minute, gold_diff, xp_diff, kills_blue, kills_red, comp, champ_coef, config
):
    """Red-team advantage combining the difference features."""
    minute = np.asarray(minute, dtype=float)
    kill_diff = np.asarray(kills_red, dtype=float) - np.asarray(kills_blue, dtype=float)
    a = (
        C_GOLD * np.asarray(gold_diff, dtype=float)
        + C_XP * np.asarray(xp_diff, dtype=float)
        + C_KILL * kill_diff
        + C_INTERACTION * np.asarray(gold_diff, dtype=float) * minute / 40.0
    )
    return config.coef_scale * a + np.asarray(comp, dtype=float) @ champ_coef


def win_probability(
    minute, gold_diff, xp_diff, kills_blue, kills_red, comp, champ_coef, config
):
    """Ground-truth probability of label 1 (red win) for given features."""
    a = latent_advantage(
        minute, gold_diff, xp_diff, kills_blue, kills_red, comp, champ_coef, config
    )
    return sigmoid(a / noise_temperature(minute, config))


def generate_dataset(config: SyntheticConfig) -> list[Sample]:
    """Draw a seeded dataset with p_true populated.

    Draw order is fixed (minute, gold, xp, kills, picks, filler, labels), so
    a config reproduces its dataset exactly.
    """
    n = config.n_matches
    rng = np.random.default_rng(config.rng_seed)
    minute = rng.integers(config.minute_min, config.minute_max + 1, size=n)
    scale = np.sqrt(np.maximum(minute, 1))
    gold_diff = np.round(rng.normal(0.0, GOLD_STD_PER_SQRT_MINUTE * scale), 3)
    xp_diff = np.round(rng.normal(0.0, XP_STD_PER_SQRT_MINUTE * scale), 3)
    kills_blue = rng.poisson(KILL_RATE_PER_MINUTE * minute)
    kills_red = rng.poisson(KILL_RATE_PER_MINUTE * minute)

    order = np.argsort(rng.random((n, config.roster_size)), axis=1)
    comp = np.zeros((n, config.roster_size))
    rows = np.arange(n)[:, None]
    comp[rows, order[:, :_PICKS_PER_TEAM]] = 1.0  # red picks
    comp[rows, order[:, _PICKS_PER_TEAM : 2 * _PICKS_PER_TEAM]] = -1.0  # blue picks

    filler = np.round(rng.standard_normal((n, config.filler_size)), 4)

    champ_coef = champion_coefficients(config)
    p_true = win_probability(
        minute, gold_diff, xp_diff, kills_blue, kills_red, comp, champ_coef, config
    )
    labels = (rng.random(n) < p_true).astype(int)

    features = np.column_stack(
        [
            minute.astype(float),
            gold_diff,
            xp_diff,
            kills_blue.astype(float),
            kills_red.astype(float),
            comp,
            filler,
        ]
    )
    return [
        Sample(features=features[i], label=int(labels[i]), p_true=float(p_true[i]))
        for i in range(n)
    ]


def to_arrays(samples: list[Sample]):
    """Stack samples into (X, y, p_true); p_true is None if any sample lacks it."""
    if not samples:
        raise ValueError("samples must be nonempty")
    x = np.stack([s.features for s in samples])
    y = np.array([s.label for s in samples], dtype=int)
    if any(s.p_true is None for s in samples):
        return x, y, None
    return x, y, np.array([s.p_true for s in samples])


def oracle_ece(pairs) -> float:
    """Mean absolute gap between predicted confidence and the true
    confidence of the predicted class.

    Takes (predicted confidence, ground-truth confidence) pairs; being an
    expectation over the known per-sample truth, it needs no binning and no
    labels, so it has none of the label-noise of the binned estimate.
    """
    pairs = list(pairs)
    if not pairs:
        raise ValueError("pairs must be nonempty")
    total = 0.0
    for conf, true_conf in pairs:
        if true_conf is None:
            raise ValueError("p_true is required for every pair")
        total += abs(float(conf) - float(true_conf))
    return total / len(pairs)


def oracle_confidences(predicted_labels, confidences, p_true):
    """Build oracle_ece pairs: the truth for the predicted class is p_true
    for class 1 and 1 - p_true for class 0."""
    pairs = []
    for pred, conf, p in zip(predicted_labels, confidences, p_true):
        if p is None:
            raise ValueError("p_true is required for every sample")
        true_conf = float(p) if int(pred) == 1 else 1.0 - float(p)
        pairs.append((float(conf), true_conf))
    return pairs


def split(dataset: list, fractions, seed: int):
    """Seeded disjoint partition into (train, val, test).

    ``fractions`` lists (train, val[, test]) shares; they must be
    nonnegative and sum to at most 1. The val and test sizes are exact
    floors; whatever remains goes to train.
    """
    fracs = list(fractions)
    if len(fracs) == 2:
        fracs.append(0.0)
    if len(fracs) != 3:
        raise ValueError("fractions must list (train, val[, test]) shares")
    if any(f < 0 for f in fracs):
        raise ValueError("fractions must be nonnegative")
    if sum(fracs) > 1.0 + 1e-12:
        raise ValueError("fractions must sum to at most 1")
    n = len(dataset)
    n_val = int(np.floor(fracs[1] * n))
    n_test = int(np.floor(fracs[2] * n))
    perm = np.random.default_rng(seed).permutation(n)
    n_train = n - n_val - n_test
    train = [dataset[i] for i in perm[:n_train]]
    val = [dataset[i] for i in perm[n_train : n_train + n_val]]
    test = [dataset[i] for i in perm[n_train + n_val :]]
    return train, val, test


def _fmt(v: float) -> str:
    v = float(v)
    return str(int(v)) if v.is_integer() else repr(v)


def dataset_header(roster_size: int, filler_size: int, with_p_true: bool) -> str:
    cols = list(SCALAR_COLUMNS)
    cols += [f"comp_{i}" for i in range(roster_size)]
    cols += [f"filler_{i}" for i in range(filler_size)]
    cols.append("label")
    if with_p_true:
        cols.append("p_true")
    return ",".join(cols)


def write_dataset(
    path, samples: list[Sample], roster_size: int, comment: str | None = None
) -> None:
    """Write samples as CSV. The p_true column is included exactly when
    every sample carries it. Values round-trip exactly through read_dataset."""
    with_p_true = bool(samples) and all(s.p_true is not None for s in samples)
    n_features = samples[0].features.shape[0] if samples else None
    lines = []
    if comment:
        lines.append(f"# {comment}")
    if n_features is None:
        raise ValueError("cannot infer the schema of an empty sample list")
    filler_size = n_features - len(SCALAR_COLUMNS) - roster_size
    if filler_size < 0:
        raise ValueError("roster_size larger than the feature vector allows")
    lines.append(dataset_header(roster_size, filler_size, with_p_true))
    for s in samples:
        if s.features.shape[0] != n_features:
            raise ValueError("all samples must share one feature width")
        fields = [_fmt(v) for v in s.features]
        fields.append(str(int(s.label)))
        if with_p_true:
            fields.append(repr(float(s.p_true)))
        lines.append(",".join(fields))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_dataset(path) -> list[Sample]:
    """Parse a dataset CSV back into samples.

    Raises DatasetFormatError naming the 1-based line for a malformed row,
    a wrong column count, or a bad header. Leading '#' comment lines are
    skipped; a header-only file yields an empty list.
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    idx = 0
    while idx < len(lines) and lines[idx].startswith("#"):
        idx += 1
    if idx >= len(lines) or not lines[idx]:
        raise DatasetFormatError(f"{path}: line {idx + 1}: missing header")
    header = lines[idx].split(",")
    if header[: len(SCALAR_COLUMNS)] != SCALAR_COLUMNS:
        raise DatasetFormatError(
            f"{path}: line {idx + 1}: header must start with {','.join(SCALAR_COLUMNS)}"
        )
    rest = header[len(SCALAR_COLUMNS) :]
    with_p_true = bool(rest) and rest[-1] == "p_true"
    if with_p_true:
        rest = rest[:-1]
    if not rest or rest[-1] != "label":
        raise DatasetFormatError(f"{path}: line {idx + 1}: header must contain label")
    rest = rest[:-1]
    n_comp = sum(1 for c in rest if c.startswith("comp_"))
    n_filler = len(rest) - n_comp
    expected = [f"comp_{i}" for i in range(n_comp)] + [
        f"filler_{i}" for i in range(n_filler)
    ]
    if rest != expected:
        raise DatasetFormatError(
            f"{path}: line {idx + 1}: malformed comp/filler column block"
        )
    n_cols = len(header)
    n_feat = len(SCALAR_COLUMNS) + n_comp + n_filler

    samples = []
    for line_no in range(idx + 1, len(lines)):
        line = lines[line_no]
        if not line:
            continue
        fields = line.split(",")
        if len(fields) != n_cols:
            raise DatasetFormatError(
                f"{path}: line {line_no + 1}: expected {n_cols} columns, got {len(fields)}"
            )
        try:
            values = [float(v) for v in fields[:n_feat]]
            label = int(fields[n_feat])
            p_true = float(fields[n_feat + 1]) if with_p_true else None
        except ValueError as exc:
            raise DatasetFormatError(f"{path}: line {line_no + 1}: {exc}") from exc
        if label not in (0, 1):
            raise DatasetFormatError(
                f"{path}: line {line_no + 1}: label must be 0 or 1"
            )
        samples.append(
            Sample(features=np.array(values), label=label, p_true=p_true)
        )
    return samples
