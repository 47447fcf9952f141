"""Synthetic prototype distributions with a known Bayes-optimal reference.

Generates Gaussian class clouds labeled with the canonical class names, so
the whole pipeline (FPRO files, splits, grids, training, attribution,
explanations) runs at desk scale with no image data. Gaussians keep the
maximum-likelihood oracle exact, which upper-bounds what any classifier can
legitimately score on the same draw.

The standard construction puts the real class at the origin and each fake
class at (shared fake axis) + (its own generator axis), so any two fake
classes sit exactly `separation * sigma` apart while every fake also carries
a common component that lets detection transfer across generators, the way
shared fingerprint traits do in real prototype features. Non-discriminative
background coordinates get a reduced noise scale; full-strength noise on a
thousand irrelevant dimensions would drown nearest-neighbor distance
rankings (the oracle is immune, so the gap would be uninformative). A family
mode moves one diffusion-model pair close together to mimic near-duplicate
generators.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .feature_store import (
    ATTRIBUTION_CLASSES,
    Authenticity,
    FeatureSet,
    Generator,
    PrototypeRecord,
)

SYNTHETIC_LAYER_TAG = "synthetic"

_FAMILY_PAIR = ("SDV14", "SDV15")


@dataclass
class ClassSpec:
    """One Gaussian class: label, mean vector, per-dimension standard deviation.

    `scale` is a positive scalar (isotropic) or a positive length-D vector
    (diagonal covariance).
    """

    label: str
    mean: np.ndarray
    scale: float | np.ndarray = 1.0

    def __post_init__(self) -> None:
        if self.label not in ATTRIBUTION_CLASSES:
            raise ValueError(f"label must be one of {ATTRIBUTION_CLASSES}, got {self.label!r}")
        self.mean = np.asarray(self.mean, dtype=np.float64)
        if self.mean.ndim != 1 or not np.all(np.isfinite(self.mean)):
            raise ValueError("mean must be a finite vector")
        self.scale = np.asarray(self.scale, dtype=np.float64)
        if self.scale.ndim not in (0, 1) or np.any(self.scale <= 0):
            raise ValueError("scale must be positive (scalar or vector)")
        if self.scale.ndim == 1 and self.scale.shape != self.mean.shape:
            raise ValueError("diagonal scale must match mean length")

    def std_vector(self) -> np.ndarray:
        if self.scale.ndim == 0:
            return np.full(self.mean.shape[0], float(self.scale))
        return self.scale


@dataclass
class WorldSpec:
    dim: int
    classes: list[ClassSpec]
    samples_per_class: int
    seed: int

    def __post_init__(self) -> None:
        if self.dim <= 1:
            raise ValueError("dim must be >= 2")
        if self.samples_per_class <= 0:
            raise ValueError("samples_per_class must be positive")
        labels = [c.label for c in self.classes]
        if len(set(labels)) != len(labels):
            raise ValueError("duplicate class label")
        for c in self.classes:
            if c.mean.shape[0] != self.dim:
                raise ValueError(f"class {c.label!r} mean length != dim")

    @property
    def class_names(self) -> tuple[str, ...]:
        return tuple(c.label for c in self.classes)


def grid_world(
    dim: int = 1280,
    separation: float = 6.0,
    sigma: float = 1.0,
    samples_per_class: int = 150,
    seed: int = 7,
    family: bool = False,
    family_separation: float = 0.5,
    shared_separation: float = 7.5,
    background_scale: float = 0.2,
    classes: tuple[str, ...] | None = None,
) -> WorldSpec:
    """Standard world over the canonical class labels.

    Coordinate layout: axis 0 is the shared fake component (every fake mean
    is shifted shared_separation*sigma there; real stays at 0), axes 1..8
    are per-generator axes (shift separation*sigma/sqrt(2), so fake pairs
    are exactly separation*sigma apart), axis 9 is the family axis, and the
    rest is background noise at background_scale*sigma. Real-to-fake mean
    distance works out above separation*sigma, and the minimum pairwise
    separation of the nine classes is exactly separation*sigma.

    With family=True the SDV15 mean reuses the SDV14 generator axis and
    differs only by family_separation*sigma along the family axis, making
    that pair nearly indistinguishable on purpose.
    """
    names = ATTRIBUTION_CLASSES if classes is None else tuple(classes)
    n_signal = len(ATTRIBUTION_CLASSES) + 1  # shared axis + 8 generators + family
    if dim < n_signal + 1:
        raise ValueError(f"dim must be at least {n_signal + 1} for this construction")
    if separation <= 0 or sigma <= 0 or shared_separation < 0:
        raise ValueError("separation, sigma must be positive; shared_separation >= 0")
    if not 0 < background_scale <= 1:
        raise ValueError("background_scale must be in (0, 1]")

    scale = np.full(dim, background_scale * sigma)
    scale[:n_signal] = sigma
    radius = separation * sigma / np.sqrt(2.0)
    family_axis = n_signal - 1
    specs: list[ClassSpec] = []
    for name in names:
        mean = np.zeros(dim)
        if name != "Real":
            mean[0] = shared_separation * sigma
            gen_axis = ATTRIBUTION_CLASSES.index(name)  # 1..8; axis 0 is the shared one
            if family and name == _FAMILY_PAIR[1]:
                gen_axis = ATTRIBUTION_CLASSES.index(_FAMILY_PAIR[0])
                mean[family_axis] = family_separation * sigma
            mean[gen_axis] = radius
        specs.append(ClassSpec(name, mean, scale))
    return WorldSpec(dim=dim, classes=specs, samples_per_class=samples_per_class, seed=seed)


def generate(spec: WorldSpec) -> dict[str, FeatureSet]:
    """Draw every class's samples; deterministic per (seed, class label).

    Each class uses its own seed stream keyed by the label's canonical index,
    so adding or dropping classes never changes the others' draws.
    """
    out: dict[str, FeatureSet] = {}
    for cls in spec.classes:
        axis = ATTRIBUTION_CLASSES.index(cls.label)
        rng = np.random.default_rng([spec.seed, axis])
        samples = cls.mean + cls.std_vector() * rng.standard_normal(
            (spec.samples_per_class, spec.dim)
        )
        records = []
        for i in range(spec.samples_per_class):
            records.append(
                PrototypeRecord(
                    features=samples[i].astype(np.float32),
                    authenticity=Authenticity.REAL if cls.label == "Real" else Authenticity.FAKE,
                    generator=None if cls.label == "Real" else Generator(cls.label),
                    image_id=f"{cls.label}-{i:06d}",
                )
            )
        out[cls.label] = FeatureSet(spec.dim, SYNTHETIC_LAYER_TAG, records)
    return out


def detection_pairs(sets: dict[str, FeatureSet]) -> dict[str, FeatureSet]:
    """Per-generator balanced real/fake sets sharing one real pool.

    Mirrors a corpus where each generator subset reuses the same real images.
    """
    if "Real" not in sets:
        raise ValueError("need a 'Real' class set")
    real = sets["Real"]
    out: dict[str, FeatureSet] = {}
    for name, fset in sets.items():
        if name == "Real":
            continue
        if len(fset) != len(real):
            raise ValueError(f"{name} has {len(fset)} records but Real has {len(real)}")
        out[name] = FeatureSet(real.dim, real.layer_tag, real.records + fset.records)
    return out


def log_likelihoods(spec: WorldSpec, queries: np.ndarray) -> np.ndarray:
    """(N, C) log density per class, up to one shared constant."""
    q = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    if q.shape[1] != spec.dim:
        raise ValueError("query dimension mismatch")
    out = np.empty((q.shape[0], len(spec.classes)))
    for ci, cls in enumerate(spec.classes):
        std = cls.std_vector()
        z = (q - cls.mean) / std
        out[:, ci] = -0.5 * np.sum(z * z, axis=1) - np.sum(np.log(std))
    return out


def classify_bayes(
    spec: WorldSpec, queries: np.ndarray, class_indices: list[int] | None = None
) -> np.ndarray:
    """Maximum-likelihood labels; ties go to the smallest class index.

    With class_indices given, the decision is restricted to that subset and
    the returned labels are positions within it (e.g. [real, fake] -> 0/1).
    """
    ll = log_likelihoods(spec, queries)
    if class_indices is not None:
        ll = ll[:, class_indices]
    return np.argmax(ll, axis=1).astype(np.int64)  # argmax: first max wins


def bayes_oracle(spec: WorldSpec, query: np.ndarray) -> int:
    """Single-query ML label (index into spec.classes)."""
    return int(classify_bayes(spec, np.asarray(query)[None, :])[0])


# ---------------------------------------------------------------------------
# Plain-text config: key = value lines, '#' comments.
# ---------------------------------------------------------------------------

_CONFIG_KEYS = {
    "dim": int,
    "separation": float,
    "sigma": float,
    "samples_per_class": int,
    "seed": int,
    "family": None,  # bool, parsed specially
    "family_separation": float,
    "shared_separation": float,
    "background_scale": float,
    "classes": None,  # comma list, parsed specially
}


def parse_world_kwargs(text: str) -> dict:
    """Read `key = value` lines into grid_world keyword arguments.

    Recognized keys: dim, separation, sigma, samples_per_class, seed, family
    (true/false), family_separation, classes (comma-separated labels).
    Unknown keys and malformed lines are errors.
    """
    kwargs: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _CONFIG_KEYS:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
        if key == "family":
            if value.lower() not in ("true", "false"):
                raise ValueError(f"line {lineno}: family must be true or false")
            kwargs[key] = value.lower() == "true"
        elif key == "classes":
            kwargs[key] = tuple(v.strip() for v in value.split(",") if v.strip())
        else:
            try:
                kwargs[key] = _CONFIG_KEYS[key](value)
            except ValueError as exc:
                raise ValueError(f"line {lineno}: bad value for {key}: {value!r}") from exc
    return kwargs


def parse_world_config(text: str) -> WorldSpec:
    """Build the standard world from `key = value` config text."""
    return grid_world(**parse_world_kwargs(text))


def format_world_config(
    dim: int,
    separation: float,
    sigma: float,
    samples_per_class: int,
    seed: int,
    family: bool = False,
    family_separation: float = 0.5,
    shared_separation: float = 7.5,
    background_scale: float = 0.2,
    classes: tuple[str, ...] | None = None,
) -> str:
    lines = [
        f"dim = {dim}",
        f"separation = {separation}",
        f"sigma = {sigma}",
        f"samples_per_class = {samples_per_class}",
        f"seed = {seed}",
        f"family = {'true' if family else 'false'}",
        f"family_separation = {family_separation}",
        f"shared_separation = {shared_separation}",
        f"background_scale = {background_scale}",
    ]
    if classes is not None:
        lines.append("classes = " + ",".join(classes))
    return "\n".join(lines) + "\n"
