"""Synthetic desk-scale datasets for the shipped example domains.

Generators return plain sample dicts in the instance JSON shape, so they
can be dumped to files for the CLI or fed straight to a program.
"""

from __future__ import annotations

import numpy as np

ENTITY_DSL = """\
# Toy entity/relation domain: phrases inside sentences, phrase pairs,
# entity classes on phrases and one relation class on pairs.
concept sentence;
concept phrase;
concept pair;
sentence contains phrase;
pair has_a (arg1=phrase, arg2=phrase);
concept people : phrase;
concept organization : phrase;
concept location : phrase;
concept work_for : pair;

ifL(work_for('x'), andL(people(path=('x', arg1)), organization(path=('x', arg2))))
disjoint(people, organization, location)
"""

FIRESTATION_DSL = """\
# Facility placement: every city needs a fire station in town or next door.
concept city;
concept neighbor;
neighbor has_a (arg1=city, arg2=city);
concept firestationCity : city;

orL(firestationCity('x'), existsL(firestationCity(path=('x', neighbor.arg2))))
"""

SYMQA_DSL = """\
# Paired questions whose answers mirror each other.
concept paragraph;
concept question;
concept symmetric;
paragraph contains question;
symmetric has_a (arg1=question, arg2=question);
concept is_more : question;
concept is_less : question;
concept no_effect : question;

disjoint(is_more, is_less, no_effect)
ifL(andL(symmetric('s'), is_more(path=('s', arg1))), is_less(path=('s', arg2)))
"""

ENTITY_CLASSES = ("people", "organization", "location", "none")
FEATURE_DIM = 4

_PROTO = {
    "people": np.array([2.0, 0.0, 0.0, 0.0]),
    "organization": np.array([0.0, 2.0, 0.0, 0.0]),
    "location": np.array([0.0, 0.0, 2.0, 0.0]),
    "none": np.array([0.0, 0.0, 0.0, 2.0]),
}


def firestation_ring(n_cities: int = 6, station_prob: float = 0.3) -> tuple[dict, dict]:
    """Ring of cities with both orientations of every neighbor edge.

    Returns (sample, scores); the uniform below-threshold scores make
    placing a station locally unattractive, so only the constraint layer
    forces a covering placement.
    """
    nodes = [{"id": f"city{i}", "concept": "city", "features": []} for i in range(n_cities)]
    has_a = []
    k = 0
    for i in range(n_cities):
        for j in ((i + 1) % n_cities, (i - 1) % n_cities):
            nodes.append({"id": f"nb{k}", "concept": "neighbor", "features": []})
            has_a.append([f"nb{k}", "arg1", f"city{i}"])
            has_a.append([f"nb{k}", "arg2", f"city{j}"])
            k += 1
    sample = {"nodes": nodes, "contains": [], "has_a": has_a}
    scores = {f"city{i}": {"firestationCity": station_prob} for i in range(n_cities)}
    return sample, scores


def _phrase_features(rng: np.random.Generator, cls: str, jitter: float) -> list:
    vec = _PROTO[cls] + rng.normal(0.0, jitter, FEATURE_DIM)
    return [float(x) for x in vec]


def _mixed_features(rng: np.random.Generator, a: str, b: str, jitter: float) -> list:
    vec = 0.9 * (_PROTO[a] + _PROTO[b]) + rng.normal(0.0, jitter, FEATURE_DIM)
    return [float(x) for x in vec]


def _flip(rng: np.random.Generator, value: int, noise: float) -> int:
    return 1 - value if noise > 0 and rng.random() < noise else value


def make_entity_samples(
    n_samples: int,
    seed: int = 0,
    noise: float = 0.1,
    jitter: float = 0.3,
    n_ambiguous: int = 0,
    prefix: str = "s",
) -> list[dict]:
    """Sentences with two phrases and both phrase orderings as pairs.

    Phrase classes are drawn uniformly; work_for holds when the first
    member is people and the second an organization. ``noise`` flips
    each label bit independently. The last ``n_ambiguous`` samples give
    one phrase a two-class feature mixture: an independently thresholded
    model co-fires the sibling classes on it, while its labels stay
    single-class, so constrained and unconstrained inference differ.
    """
    rng = np.random.default_rng(seed)
    samples = []
    for s in range(n_samples):
        sid = f"{prefix}{s}"
        ambiguous = s >= n_samples - n_ambiguous
        classes = [str(rng.choice(ENTITY_CLASSES)) for _ in range(2)]
        nodes = [{"id": f"{sid}_sent", "concept": "sentence", "features": []}]
        contains = []
        for i, cls in enumerate(classes):
            if ambiguous and i == 0:
                feats = _mixed_features(rng, "people", "location", jitter)
                cls = "people"
                classes[i] = cls
            else:
                feats = _phrase_features(rng, cls, jitter)
            labels = {
                name: _flip(rng, 1 if cls == name else 0, noise)
                for name in ("people", "organization", "location")
            }
            nodes.append(
                {
                    "id": f"{sid}_p{i}",
                    "concept": "phrase",
                    "features": feats,
                    "labels": labels,
                }
            )
            contains.append([f"{sid}_sent", f"{sid}_p{i}"])
        has_a = []
        for k, (i, j) in enumerate(((0, 1), (1, 0))):
            wf = 1 if classes[i] == "people" and classes[j] == "organization" else 0
            nodes.append(
                {
                    "id": f"{sid}_pr{k}",
                    "concept": "pair",
                    "features": [],
                    "labels": {"work_for": _flip(rng, wf, noise)},
                }
            )
            has_a.append([f"{sid}_pr{k}", "arg1", f"{sid}_p{i}"])
            has_a.append([f"{sid}_pr{k}", "arg2", f"{sid}_p{j}"])
        samples.append({"nodes": nodes, "contains": contains, "has_a": has_a})
    return samples


SYMQA_CLASSES = ("is_more", "is_less", "no_effect")

_QA_PROTO = {
    "is_more": np.array([2.0, 0.0, 0.0]),
    "is_less": np.array([0.0, 2.0, 0.0]),
    "no_effect": np.array([0.0, 0.0, 2.0]),
}

_OPPOSITE = {"is_more": "is_less", "is_less": "is_more", "no_effect": "no_effect"}


def make_symqa_samples(
    n_samples: int, seed: int = 0, noise: float = 0.0, jitter: float = 0.3, prefix: str = "q"
) -> list[dict]:
    """Paragraphs holding one mirrored question pair each."""
    rng = np.random.default_rng(seed)
    samples = []
    for s in range(n_samples):
        sid = f"{prefix}{s}"
        cls0 = str(rng.choice(SYMQA_CLASSES))
        cls1 = _OPPOSITE[cls0]
        nodes = [{"id": f"{sid}_par", "concept": "paragraph", "features": []}]
        contains = []
        for i, cls in enumerate((cls0, cls1)):
            vec = _QA_PROTO[cls] + rng.normal(0.0, jitter, 3)
            nodes.append(
                {
                    "id": f"{sid}_q{i}",
                    "concept": "question",
                    "features": [float(x) for x in vec],
                    "labels": {
                        name: _flip(rng, 1 if cls == name else 0, noise)
                        for name in SYMQA_CLASSES
                    },
                }
            )
            contains.append([f"{sid}_par", f"{sid}_q{i}"])
        has_a = []
        for k, (i, j) in enumerate(((0, 1), (1, 0))):
            nodes.append({"id": f"{sid}_sym{k}", "concept": "symmetric", "features": []})
            has_a.append([f"{sid}_sym{k}", "arg1", f"{sid}_q{i}"])
            has_a.append([f"{sid}_sym{k}", "arg2", f"{sid}_q{j}"])
        samples.append({"nodes": nodes, "contains": contains, "has_a": has_a})
    return samples
