"""Knowledge-graph driven task-solving agent."""

__version__ = "0.1.0"
