"""Desk-scale environments: a counting chain, a velocity-tracking point mass, a pendulum."""

from __future__ import annotations

import numpy as np

from .base import VecEnv


class ChainEnv(VecEnv):
    """Deterministic counter ``k -> k + 1``; never fails, times out at the horizon.

    Observation is ``[k]``. With a constant reward the true discounted value
    is known in closed form, which makes timeout handling testable.
    """

    obs_dim = 1

    def __init__(self, spec, seed=0):
        super().__init__(spec, seed)
        self.counter = np.zeros(self.num_envs)

    def _reset_envs(self, ids):
        self.counter[ids] = 0.0

    def _advance(self, targets, actions):
        self.counter = self.counter + 1.0
        return {}, np.zeros(self.num_envs, bool)

    def _observe(self):
        return self.counter[:, None].copy()

    def _state_arrays(self):
        return {"counter": self.counter}


class PointMassTracker(VecEnv):
    """Planar double integrator that must track a commanded velocity.

    Actions are accelerations (one synthetic joint per axis). The command is
    drawn uniformly from ``[-command_range, command_range]^2`` at every
    reset. Leaving the square arena is a failure.

    Observation: ``[velocity(2), command(2), position / arena(2), previous action(2)]``.
    """

    obs_dim = 8

    def __init__(self, spec, seed=0):
        super().__init__(spec, seed)
        p = spec.params
        self.arena = float(p.get("arena", 5.0))
        self.command_range = float(p.get("command_range", 1.0))
        n = self.num_envs
        self.pos = np.zeros((n, 2))
        self.vel = np.zeros((n, 2))
        self.cmd = np.zeros((n, 2))

    def _reset_envs(self, ids):
        self.pos[ids] = 0.0
        self.vel[ids] = 0.0
        for e in ids:
            self.cmd[e] = self.rngs[e].uniform(-self.command_range, self.command_range, size=2)

    def _advance(self, targets, actions):
        dt = self.spec.dt
        self.vel = self.vel + targets * dt
        self.pos = self.pos + self.vel * dt
        failure = np.max(np.abs(self.pos), axis=1) > self.arena
        return {"cmd_lin_vel_xy": self.cmd.copy(), "lin_vel_xy": self.vel.copy()}, failure

    def _observe(self):
        return np.concatenate([self.vel, self.cmd, self.pos / self.arena, self.prev_action],
                              axis=1)

    def _state_arrays(self):
        return {"pos": self.pos, "vel": self.vel, "cmd": self.cmd}


def angle_normalize(x):
    return ((x + np.pi) % (2 * np.pi)) - np.pi


class PendulumSwingup(VecEnv):
    """Torque-limited pendulum, angle measured from upright.

    Observation ``[cos(theta), sin(theta), theta_dot]``. Starts at a uniform
    random angle; there is no failure condition, only the horizon.
    """

    obs_dim = 3

    def __init__(self, spec, seed=0):
        super().__init__(spec, seed)
        p = spec.params
        self.g = float(p.get("gravity", 10.0))
        self.m = float(p.get("mass", 1.0))
        self.length = float(p.get("length", 1.0))
        self.max_speed = float(p.get("max_speed", 8.0))
        self.theta = np.zeros(self.num_envs)
        self.theta_dot = np.zeros(self.num_envs)

    def _reset_envs(self, ids):
        for e in ids:
            self.theta[e] = self.rngs[e].uniform(-np.pi, np.pi)
            self.theta_dot[e] = self.rngs[e].uniform(-1.0, 1.0)

    def _advance(self, targets, actions):
        u = targets[:, 0]
        dt = self.spec.dt
        acc = 3 * self.g / (2 * self.length) * np.sin(self.theta) + 3.0 / (self.m * self.length ** 2) * u
        self.theta_dot = np.clip(self.theta_dot + acc * dt, -self.max_speed, self.max_speed)
        self.theta = self.theta + self.theta_dot * dt
        return {"angle": angle_normalize(self.theta), "angular_velocity": self.theta_dot.copy(),
                "joint_torque": targets.copy()}, np.zeros(self.num_envs, bool)

    def _observe(self):
        return np.stack([np.cos(self.theta), np.sin(self.theta), self.theta_dot], axis=1)

    def _state_arrays(self):
        return {"theta": self.theta, "theta_dot": self.theta_dot}
