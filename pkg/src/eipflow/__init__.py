"""Integration flows built from Enterprise Integration Patterns, modelled in BPMN."""

__version__ = "0.1.0"
