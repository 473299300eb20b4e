"""
Built-in parameter sets, one per figure of the reference comparison runs.

Figure numbers that occur twice in the source (5, 6, 31, 33) carry ``a``/``b``
suffixes in order of appearance. Every tag is unique.

Roles:

``potential``   static landscape, no forcing
``dynamics``    classical vs quasiclassical trajectories
``delta``       the distance curve between the two
``wiener``      a recorded Wiener realization
``stochastic``  noise-driven trajectory vs stochastic quasiclassical path
"""
from dataclasses import dataclass, field

__all__ = ["Preset", "PRESETS", "get_preset", "list_presets", "format_table"]


@dataclass(frozen=True)
class Preset:
    tag: str
    model: str  # "cubic" or "double_well"
    role: str
    params: dict = field(hash=False)
    D: float = 0.0
    wiener_seed: int = None

    @property
    def forcing_amplitude(self):
        return self.params.get("A", 0.0)


def _cubic(tag, role, a=1.0, b=1.0, A=0.0, omega=5.0, B=0.0, theta=0.0, x0=0.0, D=0.0, wiener_seed=None):
    params = dict(a=a, b=b, A=A, omega=omega, B=B, theta=theta, x0=x0)
    return Preset(tag, "cubic", role, params, D, wiener_seed)


def _dwell(tag, role, a=1.0, b=1.0, c=0.0, A=0.0, omega=5.0, B=0.0, theta=0.0, x0=0.0, D=0.0,
           wiener_seed=None):
    params = dict(a=a, b=b, c=c, A=A, omega=omega, B=B, theta=theta, x0=x0)
    return Preset(tag, "double_well", role, params, D, wiener_seed)


_ALL = [
    # cubic well with escape
    _cubic("Fig.2", "potential"),
    _cubic("Fig.3", "dynamics", A=0.3),
    _cubic("Fig.4", "delta", A=0.3),
    _cubic("Fig.5a", "dynamics", A=0.7),
    _cubic("Fig.6a", "delta", A=0.7),
    _cubic("Fig.5b", "dynamics", A=1.3),
    _cubic("Fig.6b", "delta", A=1.3),
    _cubic("Fig.9", "dynamics", A=3.0),
    _cubic("Fig.10", "delta", A=3.0),
    _cubic("Fig.11", "dynamics", b=2.0, A=4.0),
    _cubic("Fig.12", "delta", b=2.0, A=4.0),
    _cubic("Fig.13", "dynamics", b=2.0, A=5.0),
    _cubic("Fig.14", "dynamics", b=2.0, A=7.0, omega=10.0),
    # double well
    _dwell("Fig.15", "potential"),
    _dwell("Fig.16", "dynamics", A=0.3),
    _dwell("Fig.17", "dynamics", A=0.3, x0=-0.1),
    _dwell("Fig.18", "dynamics", A=0.3),
    _dwell("Fig.19", "delta", A=0.3),
    _dwell("Fig.20", "dynamics", A=0.5),
    _dwell("Fig.21", "delta", A=0.5),
    _dwell("Fig.22", "dynamics", A=1.0),
    _dwell("Fig.23", "delta", A=1.0),
    _dwell("Fig.24", "dynamics", A=2.0),
    _dwell("Fig.25", "delta", A=2.0),
    _dwell("Fig.26", "dynamics", A=2.5),
    _dwell("Fig.27", "delta", A=2.5),
    _dwell("Fig.28", "dynamics", A=3.0),
    _dwell("Fig.29", "delta", A=3.0),
    _dwell("Fig.30", "dynamics", c=5.0, A=3.0),
    _dwell("Fig.31a", "delta", c=5.0, A=3.0),
    _dwell("Fig.31b", "dynamics", b=2.0, c=5.0, A=4.0),
    _dwell("Fig.32", "delta", b=2.0, c=5.0, A=4.0),
    _dwell("Fig.33a", "dynamics", A=0.5, B=0.2, omega=2.0, theta=10.0),
    _dwell("Fig.34", "delta", A=0.5, B=0.2, omega=2.0, theta=10.0),
    _dwell("Fig.33b", "dynamics", A=0.5, B=0.3, omega=2.0, theta=20.0),
    _dwell("Fig.36", "delta", A=0.5, B=0.3, omega=2.0, theta=20.0),
    _dwell("Fig.37", "dynamics", c=1.0, A=0.5, B=0.3, omega=2.0, theta=20.0),
    _dwell("Fig.38", "delta", c=1.0, A=0.5, B=0.3, omega=2.0, theta=20.0),
    _dwell("Fig.39", "dynamics", c=1.0, A=1.0, B=0.5, omega=2.0, theta=20.0),
    _dwell("Fig.40", "delta", c=1.0, A=1.0, B=0.5, omega=2.0, theta=20.0),
    _dwell("Fig.41", "dynamics", c=2.0, A=3.0, B=1.0, omega=2.0, theta=10.0),
    _dwell("Fig.42", "delta", c=1.0, A=3.0, B=1.0, omega=2.0, theta=10.0),
    # recorded noise; each realization feeds the stochastic runs that follow it
    _cubic("Fig.52", "wiener", A=0.3, D=1e-3, wiener_seed=52),
    _cubic("Fig.53", "stochastic", A=0.3, D=1e-3, wiener_seed=52),
    _cubic("Fig.54", "delta", A=0.3, D=1e-3, wiener_seed=52),
    _cubic("Fig.55", "wiener", A=0.3, D=1e-2, wiener_seed=55),
    _cubic("Fig.56", "stochastic", A=0.3, D=1e-2, wiener_seed=55),
    _cubic("Fig.57", "delta", A=0.3, D=1e-2, wiener_seed=55),
    _dwell("Fig.58", "wiener", A=0.3, D=1e-2, wiener_seed=58),
    _dwell("Fig.59", "stochastic", A=0.3, D=1e-2, wiener_seed=58),
    _dwell("Fig.60", "delta", A=0.3, D=1e-2, wiener_seed=58),
]

PRESETS = {p.tag: p for p in _ALL}
assert len(PRESETS) == len(_ALL), "duplicate preset tag"


def get_preset(tag):
    try:
        return PRESETS[tag]
    except KeyError:
        raise KeyError(f"unknown preset {tag!r}; run 'presets' for the list") from None


def list_presets():
    """All presets in catalog order."""
    return list(_ALL)


def format_table(presets=None):
    """Plain-text table of presets, one line each."""
    presets = list_presets() if presets is None else presets
    keys = ["a", "b", "c", "A", "omega", "B", "theta", "x0"]
    head = ["tag", "model", "role"] + keys + ["D"]
    rows = []
    for p in presets:
        vals = [p.params.get(k) for k in keys]
        rows.append([p.tag, p.model, p.role] + ["-" if v is None else f"{v:g}" for v in vals]
                    + [f"{p.D:g}"])
    widths = [max(len(str(r[i])) for r in rows + [head]) for i in range(len(head))]
    lines = ["  ".join(str(v).ljust(w) for v, w in zip(r, widths)).rstrip() for r in [head] + rows]
    return "\n".join(lines)
