import copy
import logging
from typing import Dict, List

from ..exceptions import PersistenceError
from ..interfaces import CheckpointStore, DatasetItems, DatasetStore
from ..models import DatasetFile, Dims, SynthInstance
from ..params import Checkpoint
from ..validation import validate_instance


class MemoryStore(DatasetStore, CheckpointStore):
    """
    In-memory implementation of both store interfaces.

    Everything is deep-copied on the way in and on the way out, so callers never share
    state with the store.
    """

    def __init__(self):
        self.logger = logging.getLogger(__name__)
        self.datasets: Dict[str, DatasetFile] = {}
        self.checkpoints: Dict[str, Checkpoint] = {}
        self.logger.debug("MemoryStore initialized")

    def save_dataset(self, instances: DatasetItems, dims: Dims, location: str) -> str:
        records: List[SynthInstance] = []
        for item in instances:
            record = item if isinstance(item, SynthInstance) else SynthInstance(frame=item)
            validate_instance(record.frame, dims)
            records.append(copy.deepcopy(record))
        self.datasets[location] = DatasetFile(dims=dims, instances=records)
        self.logger.info(f"Saved {len(records)} frames to memory as '{location}'")
        return location

    def load_dataset(self, location: str) -> DatasetFile:
        if location not in self.datasets:
            self.logger.error(f"Dataset '{location}' not found")
            raise PersistenceError(f"Dataset '{location}' not found")
        return copy.deepcopy(self.datasets[location])

    def save_checkpoint(self, checkpoint: Checkpoint, location: str) -> str:
        self.checkpoints[location] = copy.deepcopy(checkpoint)
        self.logger.info(f"Saved checkpoint to memory as '{location}'")
        return location

    def load_checkpoint(self, location: str) -> Checkpoint:
        if location not in self.checkpoints:
            self.logger.error(f"Checkpoint '{location}' not found")
            raise PersistenceError(f"Checkpoint '{location}' not found")
        return copy.deepcopy(self.checkpoints[location])

    def list_checkpoints(self) -> List[str]:
        return list(self.checkpoints)

    def delete(self, location: str) -> bool:
        """Remove a dataset and/or checkpoint stored under ``location``."""
        found = self.datasets.pop(location, None) is not None
        found = (self.checkpoints.pop(location, None) is not None) or found
        if not found:
            self.logger.warning(f"Cannot delete: '{location}' not found")
        return found

    def clear_all(self) -> int:
        count = len(self.datasets) + len(self.checkpoints)
        self.datasets.clear()
        self.checkpoints.clear()
        self.logger.info(f"Cleared {count} entries from memory")
        return count
