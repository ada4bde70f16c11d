"""Federated hypergraph micro-segmentation with risk-scored zero-trust policies.

The heavy lifting lives in the compiled extension ``ztseg._ztseg``; this
package re-exports it and adds a small convenience wrapper for running the
pipeline from a config dict.
"""

import json as _json

from ._ztseg import *  # noqa: F401,F403
from . import _ztseg as _core

__all__ = [name for name in dir(_core) if not name.startswith("_")] + ["run"]


def run(config, **overrides):
    """Run the full pipeline from a config dict; returns stage timings."""
    cfg = dict(config)
    cfg.update(overrides)
    return _core.run_pipeline(_json.dumps(cfg))
