"""Model files (JSON), datasets (CSV) and softmax-model serialization.

Model file layout::

    {
      "schema_version": 1,
      "variables": [{"name": "Y", "cardinality": 2, "states": ["no", "yes"]}, ...],
      "edges": [["Y", "X1"], ...],
      "class": "Y",
      "prior": 1.0,                       # or {"alpha": 1.0, "nodes": {"X1": [[...], ...]}}
      "parameters": {"Y": [[0.3, 0.7]], ...}   # optional
    }

The parents of a node are ordered as their edges appear in the file.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .network import DagStructure, Dataset, DirichletSpec, ParameterSet, Variable
from .softmax import Monomial, SoftmaxModel

SCHEMA_VERSION = 1


@dataclass(frozen=True, eq=False)
class Model:
    structure: DagStructure
    prior_alpha: float = 1.0
    prior_overrides: dict = field(default_factory=dict)
    params: ParameterSet | None = None
    state_labels: tuple = ()

    @property
    def prior(self) -> DirichletSpec:
        s = self.structure
        tables = []
        for i, name in enumerate(s.names):
            if name in self.prior_overrides:
                tables.append(self.prior_overrides[name])
            else:
                tables.append(np.full(s.table_shape(i), self.prior_alpha))
        spec = DirichletSpec(tuple(tables))
        spec.check_shapes(s)
        return spec

    def __eq__(self, other):
        if not isinstance(other, Model):
            return NotImplemented
        return (
            self.structure == other.structure
            and self.prior_alpha == other.prior_alpha
            and self.prior_overrides.keys() == other.prior_overrides.keys()
            and all(np.array_equal(self.prior_overrides[k], other.prior_overrides[k]) for k in self.prior_overrides)
            and self.params == other.params
            and self.state_labels == other.state_labels
        )

    __hash__ = None


def _require(obj, key, where):
    if key not in obj:
        raise ValidationError(f"{where}: missing required field {key!r}")
    return obj[key]


def model_from_dict(data: dict) -> Model:
    if not isinstance(data, dict):
        raise ValidationError("model file must contain a JSON object")
    version = data.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ValidationError(f"unsupported schema_version {version!r}")
    variables, labels = [], []
    for entry in _require(data, "variables", "model"):
        states = entry.get("states")
        card = entry.get("cardinality", len(states) if states else None)
        if card is None:
            raise ValidationError(f"variable {entry.get('name')!r} needs a cardinality or state labels")
        variables.append(Variable(_require(entry, "name", "variable"), card))
        if states is not None:
            states = tuple(str(s) for s in states)
            if len(states) != card or len(set(states)) != card:
                raise ValidationError(f"variable {entry['name']!r}: state labels must be {card} distinct strings")
        labels.append(states)
    edges = data.get("edges", [])
    for e in edges:
        if not (isinstance(e, (list, tuple)) and len(e) == 2):
            raise ValidationError(f"edge {e!r} must be a [parent, child] pair")
    structure = DagStructure.from_edges(variables, [tuple(e) for e in edges], _require(data, "class", "model"))

    prior = data.get("prior", 1.0)
    overrides = {}
    if isinstance(prior, (int, float)) and not isinstance(prior, bool):
        alpha = float(prior)
    elif isinstance(prior, dict):
        alpha = float(prior.get("alpha", 1.0))
        for name, table in prior.get("nodes", {}).items():
            i = structure.index_of(name)
            arr = np.array(table, dtype=float)
            if arr.shape != structure.table_shape(i):
                raise ValidationError(f"prior table for {name!r} has shape {arr.shape}, "
                                      f"expected {structure.table_shape(i)}")
            arr.setflags(write=False)
            overrides[name] = arr
    else:
        raise ValidationError("prior must be a number or an object")
    if not alpha > 0:
        raise ValidationError("prior alpha must be > 0")

    params = None
    if data.get("parameters") is not None:
        tables_in = data["parameters"]
        missing = [n for n in structure.names if n not in tables_in]
        if missing:
            raise ValidationError(f"parameters missing for {missing}")
        params = ParameterSet(tuple(np.array(tables_in[n], dtype=float) for n in structure.names))
        params.check_shapes(structure)

    model = Model(structure, alpha, overrides, params, tuple(labels))
    model.prior  # validates override hyperparameters
    return model


def model_to_dict(model: Model) -> dict:
    s = model.structure
    variables = []
    for i, v in enumerate(s.variables):
        entry = {"name": v.name, "cardinality": v.cardinality}
        if model.state_labels and model.state_labels[i] is not None:
            entry["states"] = list(model.state_labels[i])
        variables.append(entry)
    out = {
        "schema_version": SCHEMA_VERSION,
        "variables": variables,
        "edges": [[s.names[p], s.names[j]] for j in range(s.n) for p in s.parents[j]],
        "class": s.names[s.class_index],
    }
    if model.prior_overrides:
        out["prior"] = {"alpha": model.prior_alpha,
                        "nodes": {k: v.tolist() for k, v in model.prior_overrides.items()}}
    else:
        out["prior"] = model.prior_alpha
    if model.params is not None:
        out["parameters"] = {name: t.tolist() for name, t in zip(s.names, model.params.tables)}
    return out


def load_model(path) -> Model:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from None
    except OSError as exc:
        raise ValidationError(f"{path}: {exc.strerror}") from None
    return model_from_dict(data)


def dumps_model(model: Model) -> str:
    return json.dumps(model_to_dict(model), indent=2)


def parse_dataset(text: str, model: Model) -> Dataset:
    """CSV with a header of variable names; cells are state indices or declared labels."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise ValidationError("dataset is empty (no header row)") from None
    s = model.structure
    unknown = [h for h in header if h not in s.names]
    if unknown or sorted(header) != sorted(s.names):
        raise ValidationError(f"dataset header {header} does not match model variables {list(s.names)}")
    lookups = []
    for h in header:
        i = s.index_of(h)
        labels = model.state_labels[i] if model.state_labels else None
        lookups.append((h, s.cardinalities[i], {lab: k for k, lab in enumerate(labels)} if labels else {}))
    rows = []
    for line_no, raw in enumerate(reader, start=2):
        if not raw or all(not c.strip() for c in raw):
            continue
        if len(raw) != len(header):
            raise ValidationError(f"line {line_no}: expected {len(header)} cells, got {len(raw)}")
        row = []
        for cell, (name, card, labels) in zip(raw, lookups):
            cell = cell.strip()
            if cell == "":
                raise ValidationError(f"line {line_no}: missing value for {name!r}")
            if cell in labels:
                state = labels[cell]
            else:
                try:
                    state = int(cell)
                except ValueError:
                    raise ValidationError(f"line {line_no}: {cell!r} is not a state of {name!r}") from None
            if not 0 <= state < card:
                raise ValidationError(f"line {line_no}: state {state} invalid for {name!r}")
            row.append(state)
        rows.append(row)
    return Dataset(tuple(header), np.array(rows, dtype=np.int64).reshape(-1, len(header)))


def load_dataset(path, model: Model) -> Dataset:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ValidationError(f"{path}: {exc.strerror}") from None
    return parse_dataset(text, model)


def dataset_to_csv(dataset: Dataset) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(dataset.columns)
    writer.writerows(dataset.rows.tolist())
    return buf.getvalue()


def softmax_to_dict(model: SoftmaxModel, class_name: str) -> dict:
    names = {i: name for i, name, _ in model.variable_catalog}
    return {
        "class_variable": class_name,
        "class_cardinality": model.class_cardinality,
        "inputs": [{"index": i, "name": name, "cardinality": c} for i, name, c in model.variable_catalog],
        "classes": [
            {
                "class_state": k,
                "terms": [
                    {"literals": [[names[v], s] for v, s in m.literals], "coefficient": m.coefficient}
                    for m in terms
                ],
            }
            for k, terms in enumerate(model.per_class_terms, start=1)
        ],
    }


def softmax_from_dict(data: dict) -> SoftmaxModel:
    catalog = tuple((int(e["index"]), e["name"], int(e["cardinality"])) for e in data["inputs"])
    index = {name: i for i, name, _ in catalog}
    classes = sorted(data["classes"], key=lambda c: c["class_state"])
    per_class = tuple(
        tuple(Monomial(tuple((index[v], int(s)) for v, s in t["literals"]), float(t["coefficient"]))
              for t in c["terms"])
        for c in classes
    )
    return SoftmaxModel(int(data["class_cardinality"]), per_class, catalog)
