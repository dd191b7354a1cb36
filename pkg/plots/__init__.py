"""Figure generation for solver CSV artifacts.

Standalone secondary package: it reads only the documented CSV schemas
written by the ``aderdg`` command line tool and has no import dependency
on the solver package itself.
"""

from .figures import plot_convergence, plot_task_timeline, plot_traffic_ratio

__all__ = ["plot_traffic_ratio", "plot_convergence", "plot_task_timeline"]
