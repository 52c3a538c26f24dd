__all__ = [
    'ResourceManager',
    'RunManager',
    'StudyManager',
]

from .resource_manager import ResourceManager
from .run_manager import RunManager
from .study_manager import StudyManager
