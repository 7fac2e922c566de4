"""Core package initialization."""
from .interfaces import ICheckpointStore, IDatasetStore, IReportWriter, ITensorStore

__all__ = ['ITensorStore', 'ICheckpointStore', 'IDatasetStore', 'IReportWriter']
