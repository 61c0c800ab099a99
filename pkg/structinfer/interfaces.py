from abc import ABC, abstractmethod
from typing import List, Sequence, Union

from .models import DatasetFile, Dims, FrameInstance, SynthInstance
from .params import Checkpoint

DatasetItems = Sequence[Union[FrameInstance, SynthInstance]]


class DatasetStore(ABC):
    """Interface for saving and loading labeled frame collections."""

    @abstractmethod
    def save_dataset(self, instances: DatasetItems, dims: Dims, location: str) -> str:
        """
        Save a dataset.

        Args:
            instances: Frames, optionally carrying relevance flags
            dims: Dimensions recorded in the header
            location: Path or identifier to save under

        Returns:
            The location the dataset was saved to

        Raises:
            PersistenceError: If the dataset cannot be written
        """
        pass

    @abstractmethod
    def load_dataset(self, location: str) -> DatasetFile:
        """
        Load a dataset, validating every record against the header dimensions.

        Args:
            location: Path or identifier to load from

        Returns:
            The header dimensions and every record

        Raises:
            PersistenceError: If the dataset is missing or malformed
        """
        pass


class CheckpointStore(ABC):
    """Interface for saving and loading trained parameters."""

    @abstractmethod
    def save_checkpoint(self, checkpoint: Checkpoint, location: str) -> str:
        """
        Save a checkpoint.

        Args:
            checkpoint: Parameters plus optimizer state and run settings
            location: Path or identifier to save under

        Returns:
            The location the checkpoint was saved to
        """
        pass

    @abstractmethod
    def load_checkpoint(self, location: str) -> Checkpoint:
        """
        Load a checkpoint. A failed load never returns partial parameters.

        Args:
            location: Path or identifier to load from

        Returns:
            The checkpoint

        Raises:
            PersistenceError: If the checkpoint is missing or malformed
            UnsupportedVersionError: If the file declares an unknown format version
        """
        pass

    def list_checkpoints(self) -> List[str]:
        """Identifiers of stored checkpoints, when the backend can enumerate them."""
        return []
