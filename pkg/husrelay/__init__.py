# husrelay - Harvest-Use-Store Power Splitting Relay Simulator
__version__ = "1.0.0"

from husrelay.engine import ExperimentEngine, create_engine

__all__ = ['ExperimentEngine', 'create_engine']
