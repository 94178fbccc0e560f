# quantum/kernel.py
# Markov kernels kappa(target | source) as column-stochastic matrices over outcome labels.

from dataclasses import dataclass
from typing import Any, Callable, Dict, Hashable, List, Mapping, Sequence, Tuple, Union

import numpy as np

from core.errors import LabelMismatchError, NotStochasticError, PartialMapError
from core.settings import Tolerances, tolerances

Label = Hashable

# most negative entry still accepted as a probability
_NEG_FLOOR = 1e-12


def same_label(a: Label, b: Label, cluster_tol: float = tolerances.cluster_tol) -> bool:
    """
    Structural label equality: tuples compare elementwise, reals within cluster_tol,
    everything else by ==.
    """
    if isinstance(a, tuple) and isinstance(b, tuple):
        return len(a) == len(b) and all(same_label(x, y, cluster_tol) for x, y in zip(a, b))
    if isinstance(a, float) or isinstance(b, float):
        if isinstance(a, (int, float)) and isinstance(b, (int, float)) \
                and not isinstance(a, bool) and not isinstance(b, bool):
            return abs(float(a) - float(b)) <= cluster_tol
        return False
    return a == b


def labels_match(xs: Sequence[Label], ys: Sequence[Label], cluster_tol: float = tolerances.cluster_tol) -> bool:
    return len(xs) == len(ys) and all(same_label(x, y, cluster_tol) for x, y in zip(xs, ys))


@dataclass(frozen=True, eq=False)
class MarkovKernel:
    """
    kappa(omega | omega') stored as matrix[target_index, source_index].
    Columns sum to 1; entries are probabilities.
    """

    source_labels: Tuple[Label, ...]
    target_labels: Tuple[Label, ...]
    matrix: np.ndarray

    def __post_init__(self) -> None:
        mat = np.array(self.matrix, dtype=float)
        if mat.shape != (len(self.target_labels), len(self.source_labels)):
            raise LabelMismatchError(
                f"kernel matrix shape {mat.shape} does not match "
                f"{len(self.target_labels)} targets x {len(self.source_labels)} sources"
            )
        mat.flags.writeable = False
        object.__setattr__(self, "source_labels", tuple(self.source_labels))
        object.__setattr__(self, "target_labels", tuple(self.target_labels))
        object.__setattr__(self, "matrix", mat)

    # ----- constructors -----

    @classmethod
    def identity(cls, labels: Sequence[Label]) -> "MarkovKernel":
        return cls(tuple(labels), tuple(labels), np.eye(len(labels)))

    @classmethod
    def from_relabeling(
        cls,
        source_labels: Sequence[Label],
        f: Union[Mapping[Label, Label], Callable[[Label], Label]],
    ) -> "MarkovKernel":
        """Deterministic kernel kappa_f(omega | omega') = delta(omega, f(omega'))."""
        images = [apply_map(f, lab) for lab in source_labels]
        targets: List[Label] = []
        for img in images:
            if img not in targets:
                targets.append(img)
        mat = np.zeros((len(targets), len(source_labels)))
        for j, img in enumerate(images):
            mat[targets.index(img), j] = 1.0
        return cls(tuple(source_labels), tuple(targets), mat)

    # ----- queries -----

    def stochasticity_residual(self) -> float:
        if self.matrix.size == 0:
            return 0.0
        return float(np.max(np.abs(self.matrix.sum(axis=0) - 1.0)))

    def validate(self, tols: Tolerances = tolerances) -> None:
        """Raise NotStochasticError unless columns sum to 1 within stoch_tol and entries >= -1e-12."""
        if self.matrix.size and float(self.matrix.min()) < -_NEG_FLOOR:
            raise NotStochasticError(f"negative kernel entry {float(self.matrix.min()):.3e}")
        res = self.stochasticity_residual()
        if res > tols.stoch_tol:
            raise NotStochasticError(f"column sums deviate from 1 by {res:.3e}")

    def column(self, source: Label) -> Dict[Label, float]:
        j = self.source_labels.index(source)
        return {t: float(self.matrix[i, j]) for i, t in enumerate(self.target_labels)}

    def compose(self, other: "MarkovKernel", tols: Tolerances = tolerances) -> "MarkovKernel":
        """
        self o other: other maps C -> B, self maps B -> A; result maps C -> A (matrix product).
        """
        if not labels_match(self.source_labels, other.target_labels, tols.cluster_tol):
            raise LabelMismatchError("inner labels of the composed kernels differ")
        return MarkovKernel(other.source_labels, self.target_labels, self.matrix @ other.matrix)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "source_labels": [label_to_json(x) for x in self.source_labels],
            "target_labels": [label_to_json(x) for x in self.target_labels],
            "matrix": self.matrix.tolist(),
        }


def apply_map(f: Union[Mapping[Label, Label], Callable[[Label], Label]], label: Label) -> Label:
    """Evaluate a relabeling given as a mapping or a callable; unmapped labels raise PartialMapError."""
    try:
        if isinstance(f, Mapping):
            return f[label]
        return f(label)
    except KeyError:
        raise PartialMapError(f"label {label!r} is not mapped") from None


def label_to_json(label: Label) -> Any:
    """Tuples become lists (recursively); atoms pass through."""
    if isinstance(label, tuple):
        return [label_to_json(x) for x in label]
    return label


def label_from_json(raw: Any) -> Label:
    if isinstance(raw, list):
        return tuple(label_from_json(x) for x in raw)
    return raw
