"""
Graph topology of a frame: a clique over persons plus a star from the scene node.
"""

import logging
from functools import lru_cache
from typing import Tuple

from pydantic import BaseModel, ConfigDict

from .exceptions import InvalidArgumentError
from .models import Dims

logger = logging.getLogger(__name__)

SCENE = -1


class GraphTopology(BaseModel):
    """Undirected edges of the scene-plus-persons graph for ``M`` persons."""

    model_config = ConfigDict(frozen=True)

    M: int
    person_edges: Tuple[Tuple[int, int], ...]
    scene_edges: Tuple[int, ...]

    @property
    def edge_count(self) -> int:
        return len(self.person_edges) + len(self.scene_edges)

    def degree(self, node: int) -> int:
        """Degree of a person node, or of the scene node when ``node`` is ``SCENE``."""
        if node == SCENE:
            return len(self.scene_edges)
        if not 0 <= node < self.M:
            raise InvalidArgumentError(f"Person index {node} out of range for M={self.M}")
        return sum(1 for i, j in self.person_edges if node in (i, j)) + 1


@lru_cache(maxsize=128)
def build_topology(M: int) -> GraphTopology:
    """
    Build the fixed topology for a frame with ``M`` persons.

    Args:
        M: Number of person nodes (at least 1)

    Returns:
        The person clique (pairs ``i < j`` in lexicographic order) plus one scene edge per person

    Raises:
        InvalidArgumentError: If ``M`` is smaller than 1
    """
    if M < 1:
        raise InvalidArgumentError(f"A frame needs at least one person, got M={M}")
    person_edges = tuple((i, j) for i in range(M) for j in range(i + 1, M))
    topology = GraphTopology(M=M, person_edges=person_edges, scene_edges=tuple(range(M)))
    logger.debug(f"Built topology for M={M} with {topology.edge_count} edges")
    return topology


def network_width(topology: GraphTopology, dims: Dims) -> int:
    """
    Number of message neurons per recurrent layer: the sum over edges of the state counts
    of both endpoints.
    """
    return len(topology.person_edges) * 2 * dims.A + len(topology.scene_edges) * (
        dims.A + dims.S
    )
