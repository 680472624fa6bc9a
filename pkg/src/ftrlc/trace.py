"""Per-step run traces: the unit of analysis and the CSV file format.

CSV layout: leading ``# key: <json>`` comment lines carry the resolved
scenario, bound constants, controller and seed; then a header row and one
row per step.  Floats are written with shortest round-trip formatting so
identical runs produce byte-identical files.  Cells that do not apply to a
controller (schedule columns for the baselines, prediction error outside the
optimistic controller) are left empty and read back as NaN.  The in-memory
trace additionally carries the policy iterate history, which is not
serialized.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError


def _fmt(v):
    if isinstance(v, float) and math.isnan(v):
        return ""
    return repr(float(v))


@dataclass
class RunTrace:
    scenario_name: str
    controller: str
    seed: int
    scenario_dict: dict
    constants_dict: dict
    x: np.ndarray
    u: np.ndarray
    w: np.ndarray
    cost: np.ndarray
    cum_cost: np.ndarray
    grad_norm: np.ndarray
    signal: np.ndarray
    h: np.ndarray
    sigma_t: np.ndarray
    pred_err: np.ndarray
    nu: np.ndarray
    nu_hat: np.ndarray
    M_hist: np.ndarray = None
    sigma_scale: float = None

    @property
    def T(self):
        return self.cost.shape[0]

    @property
    def d_x(self):
        return self.x.shape[1]

    @property
    def d_u(self):
        return self.u.shape[1]

    @property
    def learner_cost(self):
        return float(self.cum_cost[-1])

    def h1_first(self):
        """First nonzero h value (the re-based h_1); 0.0 if none."""
        vals = self.h[~np.isnan(self.h)]
        nz = vals[vals > 0.0]
        return float(nz[0]) if nz.size else 0.0

    def columns(self):
        cols = ["t"]
        cols += [f"x_{i}" for i in range(self.d_x)]
        cols += [f"u_{i}" for i in range(self.d_u)]
        cols += [f"w_{i}" for i in range(self.d_x)]
        cols += ["cost", "cum_cost", "grad_norm", "signal", "h", "sigma",
                 "pred_err", "nu", "nu_hat"]
        return cols

    def check(self):
        """Internal consistency: T rows, cumulative = prefix sum of cost."""
        if not np.allclose(np.cumsum(self.cost), self.cum_cost, rtol=0, atol=1e-9 * max(1.0, float(np.abs(self.cum_cost).max()))):
            raise ConfigError("cumulative cost column is not the prefix sum of cost")
        return True

    def to_csv(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"# scenario: {json.dumps(self.scenario_dict, sort_keys=True)}\n")
            fh.write(f"# constants: {json.dumps(self.constants_dict, sort_keys=True)}\n")
            fh.write(f"# controller: {json.dumps({'kind': self.controller, 'seed': self.seed, 'sigma_scale': self.sigma_scale})}\n")
            fh.write(",".join(self.columns()) + "\n")
            for t in range(self.T):
                row = [str(t + 1)]
                row += [_fmt(v) for v in self.x[t]]
                row += [_fmt(v) for v in self.u[t]]
                row += [_fmt(v) for v in self.w[t]]
                row += [_fmt(self.cost[t]), _fmt(self.cum_cost[t]),
                        _fmt(self.grad_norm[t]), _fmt(self.signal[t]),
                        _fmt(self.h[t]), _fmt(self.sigma_t[t]),
                        _fmt(self.pred_err[t]), _fmt(self.nu[t]),
                        _fmt(self.nu_hat[t])]
                fh.write(",".join(row) + "\n")

    @classmethod
    def from_csv(cls, path):
        meta = {}
        rows = []
        header = None
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.rstrip("\n")
                if line.startswith("# "):
                    key, payload = line[2:].split(": ", 1)
                    meta[key] = json.loads(payload)
                    continue
                if header is None:
                    header = line.split(",")
                    continue
                rows.append([float(c) if c != "" else math.nan for c in line.split(",")])
        if header is None:
            raise ConfigError(f"no header row in {path}")
        data = np.asarray(rows, dtype=float)
        d_x = sum(1 for c in header if c.startswith("x_"))
        d_u = sum(1 for c in header if c.startswith("u_"))
        idx = {name: i for i, name in enumerate(header)}
        ctl = meta.get("controller", {})
        return cls(
            scenario_name=meta.get("scenario", {}).get("name", "?"),
            controller=ctl.get("kind", "?"),
            seed=ctl.get("seed", 0),
            scenario_dict=meta.get("scenario", {}),
            constants_dict=meta.get("constants", {}),
            x=data[:, idx["x_0"]: idx["x_0"] + d_x],
            u=data[:, idx["u_0"]: idx["u_0"] + d_u],
            w=data[:, idx["w_0"]: idx["w_0"] + d_x],
            cost=data[:, idx["cost"]],
            cum_cost=data[:, idx["cum_cost"]],
            grad_norm=data[:, idx["grad_norm"]],
            signal=data[:, idx["signal"]],
            h=data[:, idx["h"]],
            sigma_t=data[:, idx["sigma"]],
            pred_err=data[:, idx["pred_err"]],
            nu=data[:, idx["nu"]],
            nu_hat=data[:, idx["nu_hat"]],
            M_hist=None,
            sigma_scale=ctl.get("sigma_scale"),
        )
