"""
LongVie Core - Abstract Interfaces

Pluggable storage interfaces. The core never touches files; the command-line
driver wires in the local implementations from adapters/local.
"""

from abc import ABC, abstractmethod
from typing import Any, Dict, List, Sequence

import numpy as np


class ITensorStore(ABC):
    """
    Interface for tensor persistence.

    Implementations:
    - LocalTensorStore: LVTF files on disk
    """

    @abstractmethod
    def write(self, path: str, tensor: np.ndarray) -> None:
        """
        Write a tensor.

        Args:
            path: Destination
            tensor: Array of any shape; stored as little-endian float32
        """
        pass

    @abstractmethod
    def read(self, path: str) -> np.ndarray:
        """
        Read a tensor.

        Args:
            path: Source

        Returns:
            float32 array with the stored shape

        Raises:
            FormatError: on bad magic, unsupported version or dtype, or a
                payload that does not match the header
        """
        pass


class ICheckpointStore(ABC):
    """
    Interface for model checkpoints.

    Implementations:
    - LocalCheckpointStore: LVCK containers
    """

    @abstractmethod
    def save(self, path: str, config: Dict[str, Any], weights: Dict[str, np.ndarray]) -> None:
        """
        Save a model.

        Args:
            path: Destination
            config: Serialized ModelConfig
            weights: Named weight tensors, written in the given order
        """
        pass

    @abstractmethod
    def load(self, path: str) -> Dict[str, Any]:
        """
        Load a model.

        Returns:
            Dictionary with:
            - config: dict, the serialized ModelConfig
            - weights: dict of name -> float32 array

        Raises:
            FormatError: on a corrupt container or checksum mismatch
        """
        pass


class IDatasetStore(ABC):
    """
    Interface for training corpora.

    Implementations:
    - LocalDatasetStore: LVTF files plus manifest.json
    """

    @abstractmethod
    def save(self, directory: str, pairs: Sequence[Any], metadata: Dict[str, Any]) -> None:
        pass

    @abstractmethod
    def load(self, directory: str) -> List[Any]:
        pass


class IReportWriter(ABC):
    """
    Interface for result emission.

    Implementations:
    - LocalReportWriter: canonical JSON and flat CSV
    """

    @abstractmethod
    def write_reports(self, directory: str, reports: Sequence[Any]) -> List[str]:
        """
        Write one JSON and one CSV file per MetricsReport.

        Returns:
            Paths written, in order
        """
        pass

    @abstractmethod
    def write_json(self, path: str, data: Dict[str, Any]) -> None:
        """Write a JSON document with sorted keys."""
        pass
