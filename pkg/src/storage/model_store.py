"""
Model and report files.

Models are JSON documents holding, for every node of the fitted tree, the
per-group next-symbol counts, probabilities and radii. Floats are written
by orjson in shortest round-trip form, so a loaded model predicts
bit-for-bit what the saved one did.
"""

import logging
from pathlib import Path
from typing import Any, Dict, List, Union

import numpy as np
import orjson
from tabulate import tabulate

from src.config.exceptions import ErrorCode, GroupTreeException, SystemError, data_error
from src.confidence.radius_table import RadiusTable
from src.core.alphabet import Alphabet
from src.core.tree_shape import TreeShape
from src.models.estimation import EstimationConfig
from src.pruning.context_model import ContextTreeModel
from src.truth.study import StudyReport
from src.utils.error_handler import handle_exceptions

logger = logging.getLogger(__name__)

MODEL_FORMAT = "grouptree-model/1"
JSON_OPTIONS = orjson.OPT_INDENT_2 | orjson.OPT_SORT_KEYS | orjson.OPT_SERIALIZE_NUMPY


def dumps(obj: Any) -> bytes:
    return orjson.dumps(obj, option=JSON_OPTIONS)


@handle_exceptions(SystemError, ErrorCode.OUTPUT_WRITE_FAILED, catch=(OSError,))
def write_json(obj: Any, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(dumps(obj))
    return path


def read_json(path: Union[str, Path]) -> Any:
    path = Path(path)
    if not path.exists():
        raise data_error(f"File not found: {path}", ErrorCode.MODEL_FILE_INVALID, path=str(path))
    try:
        return orjson.loads(path.read_bytes())
    except orjson.JSONDecodeError as e:
        raise data_error(f"Invalid JSON in {path}: {e}", ErrorCode.MODEL_FILE_INVALID, path=str(path)) from e


# ============================================================================
# Models
# ============================================================================

def model_to_dict(model: ContextTreeModel) -> Dict[str, Any]:
    alphabet = model.alphabet
    nodes = []
    for w in model.shape.sorted_nodes():
        nodes.append({
            "context": alphabet.format(w),
            "path": list(w),
            "leaf": model.shape.is_leaf(w),
            "synthetic": w in model.synthetic,
            "counts": np.asarray(model.counts_ctx[w]).tolist(),
            "next_counts": np.asarray(model.next_counts[w]).tolist(),
            "probabilities": np.asarray(model.distributions[w]).tolist(),
            "radii": model.radii.get(w).tolist(),
        })
    return {
        "format": MODEL_FORMAT,
        "alphabet": list(alphabet.symbols),
        "config": model.config.echo(),
        "lengths": list(model.lengths),
        "completed": model.completed,
        "l2_fallback": model.radii.l2_fallback,
        "height": model.height,
        "nodes": nodes,
    }


def model_from_dict(data: Dict[str, Any]) -> ContextTreeModel:
    if not isinstance(data, dict) or data.get("format") != MODEL_FORMAT:
        raise data_error("Not a group context tree model document", ErrorCode.MODEL_FILE_INVALID)
    try:
        alphabet = Alphabet(tuple(data["alphabet"]))
        lengths = tuple(int(n) for n in data["lengths"])
        distributions = {}
        counts_ctx = {}
        next_counts = {}
        radii = {}
        synthetic = set()
        for node in data["nodes"]:
            w = tuple(int(a) for a in node["path"])
            distributions[w] = np.array(node["probabilities"], dtype=np.float64)
            counts_ctx[w] = np.array(node["counts"], dtype=np.int64)
            next_counts[w] = np.array(node["next_counts"], dtype=np.int64)
            radii[w] = np.array(node["radii"], dtype=np.float64)
            if node.get("synthetic"):
                synthetic.add(w)
        shape = TreeShape(frozenset(distributions), alphabet.size)
        return ContextTreeModel(
            alphabet=alphabet,
            shape=shape,
            distributions=distributions,
            counts_ctx=counts_ctx,
            next_counts=next_counts,
            radii=RadiusTable(radii, len(lengths), bool(data.get("l2_fallback", False))),
            config=EstimationConfig(**data["config"]),
            lengths=lengths,
            completed=bool(data.get("completed", False)),
            synthetic=frozenset(synthetic),
        )
    except GroupTreeException:
        raise
    except (KeyError, TypeError, ValueError) as e:
        raise data_error(f"Malformed model document: {e}", ErrorCode.MODEL_FILE_INVALID) from e


def save_model(model: ContextTreeModel, path: Union[str, Path]) -> Path:
    path = write_json(model_to_dict(model), path)
    logger.info("Model saved", extra={"path": str(path), "nodes": len(model.shape)})
    return path


def load_model(path: Union[str, Path]) -> ContextTreeModel:
    model = model_from_dict(read_json(path))
    logger.info("Model loaded", extra={"path": str(path), "nodes": len(model.shape)})
    return model


def _format_law(law: np.ndarray) -> str:
    return "(" + ", ".join(f"{p:.3f}" for p in law) + ")"


def model_to_dot(model: ContextTreeModel) -> str:
    """Graphviz tree; leaves carry their per-group distributions."""
    alphabet = model.alphabet
    names = {w: f"n{i}" for i, w in enumerate(model.shape.sorted_nodes())}
    lines = ["digraph context_tree {", "  node [shape=box, fontname=monospace];"]
    for w, name in names.items():
        label = alphabet.format(w)
        if model.shape.is_leaf(w):
            laws = "\\n".join(
                f"g{g + 1}: {_format_law(law)}" for g, law in enumerate(model.distributions[w])
            )
            label = f"{label}\\n{laws}"
        style = ", style=dashed" if w in model.synthetic else ""
        lines.append(f'  {name} [label="{label}"{style}];')
    for w, name in names.items():
        if w:
            lines.append(f"  {names[w[1:]]} -> {name} [label=\"{alphabet.symbols[w[0]]}\"];")
    lines.append("}")
    return "\n".join(lines) + "\n"


# ============================================================================
# Reports
# ============================================================================

def study_table(report: StudyReport) -> str:
    """Selection frequencies in tracked order, then the 'others' and 'extra' rows."""
    rows: List[List[Any]] = report.rows()
    rows.append(["good", report.good_frequency])
    return tabulate(rows, headers=["node", "frequency"], floatfmt=".2f", tablefmt="simple")


@handle_exceptions(SystemError, ErrorCode.OUTPUT_WRITE_FAILED, catch=(OSError,))
def write_report_table(report: StudyReport, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(study_table(report) + "\n", encoding="utf-8")
    return path
