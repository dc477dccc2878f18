"""Simulator for an optical front end with discrete offset-current calibration.

Typical use goes through :func:`ppgafe.simulation.run_simulation` or the
``ppgafe`` command line tool.
"""

__version__ = "0.1.0"
