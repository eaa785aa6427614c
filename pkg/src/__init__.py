"""
LGV Localization - reflector particle-filter localization for laser-guided
vehicles, with a laser-only baseline, a deterministic simulator and an
evaluation pipeline.
"""

from world import Pose2D, ReflectorMap
from pf import ParticleFilter
from lasernav import LaserNavigator
from config import RunConfig, load_run_config

__version__ = "1.0.0"
__all__ = ["Pose2D", "ReflectorMap", "ParticleFilter", "LaserNavigator", "RunConfig", "load_run_config"]
