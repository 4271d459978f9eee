"""simdesk: headless multi-view simulation desk.

Subpackages stay import-light on purpose: ``view3d`` is an optional unit
that nothing here imports at module level, so dropping it from a build
leaves the rest fully functional.
"""

__version__ = "0.1.0"
