"""Token-based execution of integration flows."""

from eipflow.engine.runtime import Engine, EngineConfig, ProcessInstance, Status
from eipflow.engine.trace import EngineEvent, TraceLog

__all__ = ["Engine", "EngineConfig", "EngineEvent", "ProcessInstance", "Status", "TraceLog"]
