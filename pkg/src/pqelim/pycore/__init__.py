from .queue import PyQueueCore

__all__ = ["PyQueueCore"]
