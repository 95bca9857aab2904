"""One-dimensional meshes made of non-overlapping elements."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Mesh:
    """Partition of ``[x_left, x_right]`` into sorted elements.

    ``elements`` is an ``(n, 2)`` array of ``(left, right)`` pairs. Non-uniform
    partitions are allowed as long as neighbouring elements touch.
    """

    x_left: float
    x_right: float
    elements: np.ndarray
    periodic: bool = False

    def __post_init__(self):
        elements = np.array(self.elements, dtype=float).reshape(-1, 2)
        elements.setflags(write=False)
        object.__setattr__(self, "elements", elements)
        if len(elements) == 0:
            raise ValueError("mesh needs at least one element")
        if not self.x_left < self.x_right:
            raise ValueError(f"inverted domain ({self.x_left}, {self.x_right})")
        widths = elements[:, 1] - elements[:, 0]
        if np.any(widths <= 0):
            raise ValueError("element widths must be strictly positive")
        scale = self.x_right - self.x_left
        tol = 1e-13 * max(1.0, abs(self.x_left), abs(self.x_right))
        if abs(elements[0, 0] - self.x_left) > tol or abs(elements[-1, 1] - self.x_right) > tol:
            raise ValueError("elements must cover the domain endpoints")
        if np.any(np.abs(elements[1:, 0] - elements[:-1, 1]) > 1e-13 * max(1.0, scale)):
            raise ValueError("elements must be sorted and contiguous")

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    @property
    def widths(self) -> np.ndarray:
        return self.elements[:, 1] - self.elements[:, 0]

    @property
    def length(self) -> float:
        return self.x_right - self.x_left

    def jacobian(self, element_index: int) -> float:
        """Derivative of the affine map from ``[-1, 1]`` onto the element."""
        left, right = self._element(element_index)
        return 0.5 * (right - left)

    def _element(self, element_index):
        if not 0 <= element_index < self.n_elements:
            raise IndexError(f"element index {element_index} out of range 0..{self.n_elements - 1}")
        return self.elements[element_index]


def build_uniform_mesh(x_left, x_right, n_elements, periodic=False) -> Mesh:
    """Split ``[x_left, x_right]`` into ``n_elements`` equal elements."""
    if int(n_elements) != n_elements or n_elements < 1:
        raise ValueError(f"n_elements must be a positive integer, got {n_elements}")
    if not x_left < x_right:
        raise ValueError(f"inverted domain ({x_left}, {x_right})")
    n_elements = int(n_elements)
    edges = x_left + (x_right - x_left) * np.arange(n_elements + 1) / n_elements
    edges[-1] = x_right
    elements = np.column_stack([edges[:-1], edges[1:]])
    return Mesh(float(x_left), float(x_right), elements, bool(periodic))


def physical_nodes(mesh: Mesh, element_index, reference_nodes):
    """Map reference nodes in ``[-1, 1]`` into an element.

    Returns ``(coordinates, jacobian)`` where the jacobian is half the element
    width.
    """
    left, right = mesh._element(element_index)
    xi = np.asarray(reference_nodes, dtype=float)
    if np.any(xi < -1 - 1e-14) or np.any(xi > 1 + 1e-14):
        raise ValueError("reference nodes must lie in [-1, 1]")
    jac = 0.5 * (right - left)
    return left + (xi + 1.0) * jac, jac
