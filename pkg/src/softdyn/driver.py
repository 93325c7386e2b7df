"""Simulation driving: unified step dispatch over all integrators and a
frame-producing run loop with CSV-friendly diagnostics."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import contact as ct
from . import expo, reduction, steppers
from .reduction import ModalSplit, RefreshPolicy
from .steppers import Method, NewtonConfig
from .system import SimState

ONE_STEP = {"BE", "SI", "TR", "TRBDF2", "STRBDF2", "SDIRK", "SSDIRK",
            "ERE", "SIERE", "BEERE", "STRSBDF2ERE"}
TWO_STEP = {"BDF2", "SBDF2", "BDF2ERE", "SBDF2ERE"}
REDUCTION_METHODS = {"SIERE", "BEERE", "BDF2ERE", "SBDF2ERE", "STRSBDF2ERE"}
ALL_METHODS = ONE_STEP | TWO_STEP


@dataclass
class ReductionConfig:
    s: int = 5
    policy: RefreshPolicy = RefreshPolicy.ONCE
    every_n: int = 1


class Advancer:
    """Advances one simulation with a fixed method and step size."""

    def __init__(self, model, method: str, h: float,
                 newton: NewtonConfig = NewtonConfig(),
                 red: ReductionConfig | None = None,
                 bootstrap: Method = Method.SDIRK,
                 krylov_m: int = expo.DEFAULT_KRYLOV_DIM,
                 krylov_tol: float = expo.DEFAULT_KRYLOV_TOL):
        method = method.upper().replace("-", "")
        if method not in ALL_METHODS:
            raise ValueError(f"unknown method {method!r}")
        self.model = model
        self.method = method
        self.h = h
        self.newton = newton
        self.bootstrap = bootstrap
        self.krylov_m = krylov_m
        self.krylov_tol = krylov_tol
        self.split: ModalSplit | None = None
        if method in REDUCTION_METHODS:
            self.red = red or ReductionConfig()
        else:
            self.red = None
        self.last_diag: dict = {}

    def _ensure_split(self, u):
        if self.split is None:
            self.split = reduction.modal_split(
                self.model, u, self.red.s, self.red.policy, self.red.every_n)
        else:
            self.split = reduction.refresh_split(self.model, u, self.split)
        return self.split

    def step(self, state: SimState) -> SimState:
        m, h, model = self.method, self.h, self.model
        u0 = state.u
        um1 = state.history.u if state.history is not None else None
        diag: dict = {}
        if m in TWO_STEP and um1 is None:
            # the bootstrap forward step is the first step of the run
            u0_new, um1 = steppers.bootstrap_history(
                model, u0, h, self.bootstrap, self.newton)
            self.last_diag = {"bootstrap": 1}
            return SimState.from_u(u0_new, state.t + h,
                                   history=SimState.from_u(um1, state.t))

        if m in REDUCTION_METHODS:
            ms = self._ensure_split(u0)
            diag["s"] = ms.s
            diag["lam_min"] = float(ms.lam.min()) if ms.s else 0.0
            diag["lam_max"] = float(ms.lam.max()) if ms.s else 0.0
            diag["refreshes"] = ms.refresh_count

        if m == "BE":
            u1 = steppers.step_be(model, u0, h, self.newton)
        elif m == "SI":
            u1 = steppers.step_si(model, u0, h)
        elif m == "TR":
            u1 = steppers.step_tr(model, u0, h, self.newton)
        elif m == "TRBDF2":
            u1 = steppers.step_trbdf2(model, u0, h, self.newton)
        elif m == "STRBDF2":
            u1 = steppers.step_strbdf2(model, u0, h)
        elif m == "SDIRK":
            u1 = steppers.step_sdirk(model, u0, h, self.newton)
        elif m == "SSDIRK":
            u1 = steppers.step_ssdirk(model, u0, h)
        elif m == "BDF2":
            u1 = steppers.step_bdf2(model, u0, um1, h, self.newton)
        elif m == "SBDF2":
            u1 = steppers.step_sbdf2(model, u0, um1, h)
        elif m == "ERE":
            u1 = expo.ere_step(model, u0, h, self.krylov_m, self.krylov_tol)
        elif m == "SIERE":
            u1 = reduction.siere_step(model, u0, h, self.split, diag)
        elif m == "BEERE":
            u1 = reduction.beere_step(model, u0, h, self.split, self.newton)
        elif m == "BDF2ERE":
            u1 = reduction.bdf2ere_step(model, u0, um1, h, self.split,
                                        self.newton)
        elif m == "SBDF2ERE":
            u1 = reduction.sbdf2ere_step(model, u0, um1, h, self.split, diag)
        elif m == "STRSBDF2ERE":
            u1 = reduction.strsbdf2ere_step(model, u0, h, self.split, diag)
        else:  # pragma: no cover
            raise AssertionError(m)

        if self.model.contact is not None:
            n = model.ndof
            q1, v1 = u1[:n], u1[n:]
            cs = model._contact_set(q1)
            diag["n_contacts"] = cs.count
            diag["min_gap"] = float(cs.gaps.min()) if cs.count else np.nan
            lam = ct.contact_lambda(cs, model.contact) if cs.count else np.zeros(0)
            diag["max_lambda"] = float(lam.max()) if cs.count else 0.0
            ff = ct.friction_force(model.mesh, cs, model.contact, q1, v1)
            diag["friction_power"] = float(np.dot(v1, ff))
        self.last_diag = diag
        return SimState.from_u(u1, state.t + h,
                               history=SimState.from_u(u0, state.t))


def run_simulation(model, method, h, duration,
                   newton: NewtonConfig = NewtonConfig(),
                   red: ReductionConfig | None = None,
                   initial: SimState | None = None,
                   cadence: float | None = None,
                   on_step=None):
    """Run for ``duration`` seconds; returns (frames, diagnostics rows).

    Frames are captured every 1/cadence seconds (every step if cadence is
    None). ``on_step(state, diag)`` is called after each step.
    """
    if initial is None:
        q0 = model.q_rest.copy()
        initial = SimState(q0, np.zeros_like(q0), 0.0)
    adv = Advancer(model, method, h, newton, red)
    nsteps = int(round(duration / h))
    frame_every = 1 if cadence is None else max(1, int(round(1.0 / (cadence * h))))
    state = initial
    frames = [state]
    diags = []
    for k in range(nsteps):
        state = adv.step(state)
        row = {"step": k + 1, "t": state.t}
        row.update(adv.last_diag)
        diags.append(row)
        if on_step is not None:
            on_step(state, adv.last_diag)
        if (k + 1) % frame_every == 0:
            frames.append(state)
    return frames, diags
