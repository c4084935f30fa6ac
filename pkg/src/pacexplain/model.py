"""Black-box classifiers and datasets.

Models are immutable wrappers around three JSON-described classifier kinds:
decision trees (``x[feature] <= threshold`` goes left), small MLPs
(relu/identity layers, argmax output with ties to the lowest class index),
and exact-match lookup tables. The explanation engine only ever calls
`classify`, so anything exposing the same surface can be plugged in.

Datasets come from RFC-4180 CSV files with a header row; the last column is
the class. Features are min-max normalized to [0, 1]; columns whose raw
values lie in {0, 1} are tagged boolean and kept as-is; non-numeric columns
are label-encoded by sorted category name before normalization. The
normalization bounds and encodings are recorded in a manifest so queries
and grammars written against feature names resolve consistently.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .formula import Formula, evaluate
from .query import Query, TrueQuery


class ModelFormatError(ValueError):
    pass


class DatasetFormatError(ValueError):
    pass


class Model:
    """Base classifier: `classify` maps a feature vector to a class label."""

    arity: int
    classes: tuple

    def classify(self, x: Sequence[float]):
        raise NotImplementedError

    def to_json(self) -> dict:
        raise NotImplementedError

    def _check_arity(self, x: Sequence[float]):
        if len(x) != self.arity:
            raise ValueError(f"expected {self.arity} features, got {len(x)}")


class DecisionTreeModel(Model):
    def __init__(self, arity: int, classes: Sequence, root: dict):
        self.arity = int(arity)
        self.classes = tuple(classes)
        self.root = root
        _validate_tree_node(root, self.arity, set(self.classes))

    def classify(self, x: Sequence[float]):
        self._check_arity(x)
        node = self.root
        while "leaf" not in node:
            node = node["le"] if x[node["feature"]] <= node["threshold"] else node["gt"]
        return node["leaf"]

    def to_json(self) -> dict:
        return {
            "type": "tree",
            "arity": self.arity,
            "classes": list(self.classes),
            "root": self.root,
        }

    def positive_paths(self, target_class) -> list:
        """Root-to-leaf constraint lists for leaves labeled target_class.

        Each path is a list of (feature, "<="|">", threshold) triples.
        """
        paths = []

        def walk(node, constraints):
            if "leaf" in node:
                if node["leaf"] == target_class:
                    paths.append(list(constraints))
                return
            j, t = node["feature"], node["threshold"]
            walk(node["le"], constraints + [(j, "<=", t)])
            walk(node["gt"], constraints + [(j, ">", t)])

        walk(self.root, [])
        return paths


def _validate_tree_node(node, arity: int, classes: set):
    if not isinstance(node, dict):
        raise ModelFormatError(f"tree node must be an object, got {node!r}")
    if "leaf" in node:
        if node["leaf"] not in classes:
            raise ModelFormatError(f"leaf class {node['leaf']!r} not in classes")
        return
    for key in ("feature", "threshold", "le", "gt"):
        if key not in node:
            raise ModelFormatError(f"tree node missing {key!r}")
    j = node["feature"]
    if not isinstance(j, int) or not 0 <= j < arity:
        raise ModelFormatError(f"tree split feature {j!r} out of range")
    if not isinstance(node["threshold"], (int, float)):
        raise ModelFormatError("tree threshold must be numeric")
    _validate_tree_node(node["le"], arity, classes)
    _validate_tree_node(node["gt"], arity, classes)


_ACTIVATIONS = ("relu", "id")


class MlpModel(Model):
    def __init__(self, arity: int, classes: Sequence, layers: Sequence[dict]):
        self.arity = int(arity)
        self.classes = tuple(classes)
        self.layers = []
        width = self.arity
        for k, layer in enumerate(layers):
            try:
                w = np.asarray(layer["w"], dtype=float)
                b = np.asarray(layer["b"], dtype=float)
                act = layer["act"]
            except (KeyError, TypeError) as exc:
                raise ModelFormatError(f"layer {k}: {exc}") from exc
            if w.ndim != 2 or b.ndim != 1 or w.shape[0] != b.shape[0]:
                raise ModelFormatError(f"layer {k}: weight/bias shapes disagree")
            if w.shape[1] != width:
                raise ModelFormatError(
                    f"layer {k}: expects {w.shape[1]} inputs, previous width is {width}"
                )
            if act not in _ACTIVATIONS:
                raise ModelFormatError(f"layer {k}: unknown activation {act!r}")
            self.layers.append((w, b, act))
            width = w.shape[0]
        if not self.layers:
            raise ModelFormatError("mlp needs at least one layer")
        if width != len(self.classes):
            raise ModelFormatError(
                f"final layer width {width} != number of classes {len(self.classes)}"
            )

    def classify(self, x: Sequence[float]):
        self._check_arity(x)
        v = np.asarray(x, dtype=float)
        for w, b, act in self.layers:
            v = w @ v + b
            if act == "relu":
                v = np.maximum(v, 0.0)
        # ties go to the lowest class index; np.argmax already does that
        return self.classes[int(np.argmax(v))]

    def to_json(self) -> dict:
        return {
            "type": "mlp",
            "arity": self.arity,
            "classes": list(self.classes),
            "layers": [
                {"w": w.tolist(), "b": b.tolist(), "act": act}
                for w, b, act in self.layers
            ],
        }


class TableModel(Model):
    """Exact-match lookup table with a default class for unseen inputs."""

    def __init__(self, arity: int, classes: Sequence, entries: Sequence, default):
        self.arity = int(arity)
        self.classes = tuple(classes)
        if default not in self.classes:
            raise ModelFormatError(f"default class {default!r} not in classes")
        self.default = default
        self.table = {}
        for k, entry in enumerate(entries):
            x = tuple(float(v) for v in entry["x"])
            if len(x) != self.arity:
                raise ModelFormatError(f"entry {k}: wrong arity")
            if entry["class"] not in self.classes:
                raise ModelFormatError(f"entry {k}: class {entry['class']!r} unknown")
            self.table[x] = entry["class"]

    def classify(self, x: Sequence[float]):
        self._check_arity(x)
        return self.table.get(tuple(float(v) for v in x), self.default)

    def to_json(self) -> dict:
        return {
            "type": "table",
            "arity": self.arity,
            "classes": list(self.classes),
            "entries": [
                {"x": list(x), "class": c} for x, c in sorted(self.table.items())
            ],
            "default": self.default,
        }


def model_from_json(obj: dict) -> Model:
    if not isinstance(obj, dict):
        raise ModelFormatError("model JSON must be an object")
    for key in ("type", "arity", "classes"):
        if key not in obj:
            raise ModelFormatError(f"model JSON missing {key!r}")
    kind = obj["type"]
    if kind == "tree":
        if "root" not in obj:
            raise ModelFormatError("tree model missing 'root'")
        return DecisionTreeModel(obj["arity"], obj["classes"], obj["root"])
    if kind == "mlp":
        if "layers" not in obj:
            raise ModelFormatError("mlp model missing 'layers'")
        return MlpModel(obj["arity"], obj["classes"], obj["layers"])
    if kind == "table":
        if "entries" not in obj or "default" not in obj:
            raise ModelFormatError("table model missing 'entries' or 'default'")
        return TableModel(obj["arity"], obj["classes"], obj["entries"], obj["default"])
    raise ModelFormatError(f"unknown model type {kind!r}")


def load_model(path: str) -> Model:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ModelFormatError(f"{path}: invalid JSON: {exc}") from exc
    return model_from_json(obj)


def save_model(model: Model, path: str):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model.to_json(), fh, indent=2, sort_keys=True)
        fh.write("\n")


# --- datasets ----------------------------------------------------------------


@dataclass
class Dataset:
    feature_names: list
    kinds: list  # "bool" | "real" per feature
    rows: list  # (normalized tuple, class label)
    bounds: list  # (raw_min, raw_max) per feature
    categorical: dict  # feature name -> {category: code}
    classes: list = field(default_factory=list)

    @property
    def arity(self) -> int:
        return len(self.feature_names)

    def manifest(self) -> dict:
        return {
            "featureNames": list(self.feature_names),
            "kinds": list(self.kinds),
            "bounds": [[lo, hi] for lo, hi in self.bounds],
            "categorical": {
                name: dict(mapping) for name, mapping in self.categorical.items()
            },
            "classes": list(self.classes),
        }


def save_manifest(data: Dataset, path: str):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data.manifest(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_manifest(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def load_dataset(path: str, manifest: Optional[dict] = None) -> Dataset:
    """Load a CSV dataset; header row names features, last column is the class.

    With `manifest`, its bounds and categorical encodings are applied instead
    of being inferred (unknown categories are an error).
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetFormatError(f"{path}: empty file") from None
        raw_rows = [row for row in reader if row]
    if len(header) < 2:
        raise DatasetFormatError(f"{path}: need at least one feature and a class column")
    feature_names = header[:-1]
    n = len(feature_names)
    for k, row in enumerate(raw_rows):
        if len(row) != n + 1:
            raise DatasetFormatError(
                f"{path}: row {k + 2} has {len(row)} cells, expected {n + 1}"
            )
    if not raw_rows:
        raise DatasetFormatError(f"{path}: no data rows")

    labels = [row[-1] for row in raw_rows]
    columns = [[row[j] for row in raw_rows] for j in range(n)]

    if manifest is not None:
        return _apply_manifest(path, feature_names, columns, labels, manifest)

    categorical = {}
    numeric_cols = []
    for j, col in enumerate(columns):
        values = []
        is_numeric = True
        for cell in col:
            try:
                values.append(float(cell))
            except ValueError:
                is_numeric = False
                break
        if is_numeric:
            numeric_cols.append(values)
        else:
            mapping = {name: code for code, name in enumerate(sorted(set(col)))}
            categorical[feature_names[j]] = mapping
            numeric_cols.append([float(mapping[cell]) for cell in col])

    kinds = []
    bounds = []
    normalized = []
    for j, values in enumerate(numeric_cols):
        lo, hi = min(values), max(values)
        if set(values) <= {0.0, 1.0}:
            kinds.append("bool")
            bounds.append((0.0, 1.0))
            normalized.append(values)
        else:
            kinds.append("real")
            bounds.append((lo, hi))
            if lo == hi:
                normalized.append([0.0] * len(values))
            else:
                normalized.append([(v - lo) / (hi - lo) for v in values])

    rows = [
        (tuple(normalized[j][k] for j in range(n)), labels[k])
        for k in range(len(raw_rows))
    ]
    classes = sorted(set(labels))
    return Dataset(feature_names, kinds, rows, bounds, categorical, classes)


def _apply_manifest(path, feature_names, columns, labels, manifest) -> Dataset:
    if manifest.get("featureNames") != list(feature_names):
        raise DatasetFormatError(f"{path}: feature names do not match manifest")
    kinds = list(manifest["kinds"])
    bounds = [(lo, hi) for lo, hi in manifest["bounds"]]
    categorical = {k: dict(v) for k, v in manifest.get("categorical", {}).items()}
    n = len(feature_names)
    normalized = []
    for j in range(n):
        name = feature_names[j]
        out = []
        for cell in columns[j]:
            if name in categorical:
                if cell not in categorical[name]:
                    raise DatasetFormatError(
                        f"{path}: category {cell!r} for feature {name!r}"
                        " has no mapping in the manifest"
                    )
                v = float(categorical[name][cell])
            else:
                try:
                    v = float(cell)
                except ValueError:
                    raise DatasetFormatError(
                        f"{path}: non-numeric cell {cell!r} for feature {name!r}"
                        " without a categorical mapping"
                    ) from None
            lo, hi = bounds[j]
            if kinds[j] == "bool":
                out.append(v)
            elif lo == hi:
                out.append(0.0)
            else:
                out.append((v - lo) / (hi - lo))
        normalized.append(out)
    rows = [
        (tuple(normalized[j][k] for j in range(n)), labels[k])
        for k in range(len(labels))
    ]
    classes = manifest.get("classes") or sorted(set(labels))
    return Dataset(list(feature_names), kinds, rows, bounds, categorical, list(classes))


def relabel(data: Dataset, model: Model) -> Dataset:
    """Copy of `data` with class labels replaced by model predictions."""
    rows = [(x, model.classify(x)) for x, _ in data.rows]
    classes = sorted(set(label for _, label in rows), key=repr)
    return Dataset(
        list(data.feature_names),
        list(data.kinds),
        rows,
        list(data.bounds),
        dict(data.categorical),
        classes,
    )


def accuracy_on(classifier, data: Dataset, query: Optional[Query], target_class):
    """Agreement of a classifier with dataset labels on the target class.

    `classifier` is a Formula (satisfied = predicts target_class) or a Model.
    Only rows inside `query` count; returns None when no row qualifies.
    """
    if query is None:
        query = TrueQuery()
    if isinstance(classifier, Formula):
        predicts = lambda x: evaluate(classifier, x)
    elif isinstance(classifier, Model):
        predicts = lambda x: classifier.classify(x) == target_class
    else:
        raise TypeError("classifier must be a Formula or a Model")
    total = 0
    agree = 0
    for x, label in data.rows:
        if not query.contains(x):
            continue
        total += 1
        if predicts(x) == (label == target_class):
            agree += 1
    if total == 0:
        return None
    return agree / total
