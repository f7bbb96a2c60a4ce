"""Multi-slab MRI reconstruction.

Thin layer over the C++ core: volumes are ``Volume`` objects backed by
[x, y, z] arrays (y is the slice axis), JSON results come back as dicts.
"""

import json

from . import _mslab
from ._mslab import (
    DegenerateInput,
    EmptyOverlap,
    EmptyROI,
    Error,
    InvalidInput,
    LayoutMismatch,
    ParseError,
    RegistrationFailed,
    RigidTransform,
    UnsupportedFormat,
    Volume,
    nmi,
    preset_names,
    read_volume,
    write_volume,
)

__version__ = _mslab.__version__

__all__ = [
    "DegenerateInput",
    "EmptyOverlap",
    "EmptyROI",
    "Error",
    "InvalidInput",
    "LayoutMismatch",
    "ParseError",
    "RegistrationFailed",
    "RigidTransform",
    "UnsupportedFormat",
    "Volume",
    "canonical_rois",
    "default_phantom",
    "evaluate_rois",
    "generate_phantom",
    "layout",
    "nmi",
    "placement",
    "preset",
    "preset_names",
    "read_volume",
    "reconstruct",
    "register_slab",
    "run_cli",
    "shift_index",
    "simulate",
    "write_volume",
]


def _layout_arg(layout):
    return layout if isinstance(layout, str) else json.dumps(layout)


def _config_text(config):
    if config is None:
        return ""
    if isinstance(config, str):
        return config
    return "".join(f"{k} = {json.dumps(v)}\n" for k, v in config.items())


def preset(name):
    return json.loads(_mslab.preset_json(name))


def layout(preset_or_layout):
    return json.loads(_mslab.layout_json(_layout_arg(preset_or_layout)))


def placement(preset_or_layout):
    """Final slice index of every acquired slice, per slab."""
    return _mslab.layout_placement(_layout_arg(preset_or_layout))


def default_phantom():
    return json.loads(_mslab.default_phantom_json())


def generate_phantom(spec=None):
    """Phantom on the default 0.3 x 1.2 x 0.3 mm grid."""
    return _mslab.generate_phantom(json.dumps(spec) if spec else "")


def canonical_rois(spec=None):
    return json.loads(_mslab.canonical_rois_json(json.dumps(spec) if spec else ""))


def simulate(config=None):
    """Returns (truth, slabs, lr, scenario, rois).

    ``config`` is a dict or text of configuration keys, e.g.
    ``{"seed": 3, "sim.motion": [[0, 0, 0, 0, 0, 0], [0, 1.2, 0, 0, 0, 0]]}``.
    """
    truth, slabs, lr, scenario, rois = _mslab.simulate(_config_text(config))
    return truth, slabs, lr, json.loads(scenario), json.loads(rois)


def reconstruct(slabs, layout, lr, config=None):
    """Returns (fused, coverage, mask_sum, info)."""
    fused, coverage, mask_sum, info = _mslab.reconstruct(slabs, _layout_arg(layout), lr, _config_text(config))
    return fused, coverage, mask_sum, json.loads(info)


def register_slab(slab, layout, index, lr, config=None):
    """Returns (RigidTransform, result dict) mapping slab into reference space."""
    t, info = _mslab.register_slab(slab, _layout_arg(layout), index, lr, _config_text(config))
    return t, json.loads(info)


def shift_index(slabs, layout):
    return json.loads(_mslab.shift_index_json(slabs, _layout_arg(layout)))


def evaluate_rois(volume, rois):
    return json.loads(_mslab.evaluate_rois_json(volume, json.dumps(rois)))


def run_cli(*args):
    """Runs the command-line tool in-process; returns (exit_code, stdout, stderr)."""
    return _mslab.run_cli([str(a) for a in args])
