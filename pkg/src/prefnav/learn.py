"""TD3 with demonstration-mixed behavioral cloning.

Twin critics with clipped double-Q targets, delayed actor updates, soft
target updates, a FIFO experience buffer plus a static demonstration
buffer, and the balanced actor gradient that mixes the policy gradient
with a behavioral cloning pull toward demonstrated actions.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field, asdict

import numpy as np

from . import nn, sim
from .sim import Action, HumanMode, Source, V_MAX, OMEGA_MAX


@dataclass
class TD3Config:
    """Learning constants; the published values are kept verbatim and
    the ones the source setup leaves open (delay, tau, clip, hidden
    sizes, update ratio) use the standard choices."""

    gamma: float = 0.99
    lr_actor: float = 1e-4
    lr_critic: float = 8e-4
    buffer_e: int = 200_000
    batch_e: int = 64
    batch_d: int = 64
    sigma_explore: float = 0.2
    sigma_target: float = 0.05
    lambda_rl: float = 30.0 / 4.0
    lambda_bc: float = 10.0 / 4.0
    n_ep: int = 150
    warmup: int = 5_000
    policy_delay: int = 2
    tau: float = 0.005
    noise_clip: float = 0.5
    hidden: tuple = (256, 256)
    q_guard: float = 1e6
    # share of demo rows mixed into critic batches: demo-goal values stay
    # critic-visible without letting a few hundred demo transitions
    # dominate the regression (full b_E:b_D mixing inflates Q badly)
    critic_demo_fraction: float = 0.125
    # trainer schedule
    max_steps: int = 200_000
    scene_rotation: int = 50
    demo_replay_prob: float = 0.3
    eval_every: int = 5_000
    eval_episodes: int = 100
    stop_success: float | None = None

    def to_json_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d


def normalized_from_action(a: Action) -> np.ndarray:
    """Map a physical command into the tanh-shaped [-1, 1]^2 box."""
    return np.array([2.0 * a.v / V_MAX - 1.0, a.omega / OMEGA_MAX])


def action_from_normalized(u) -> Action:
    """Affine map of tanh outputs onto v in [0, V_MAX], omega in
    [-OMEGA_MAX, OMEGA_MAX]."""
    u = np.clip(np.asarray(u, dtype=float), -1.0, 1.0)
    return Action(0.5 * V_MAX * (u[0] + 1.0), OMEGA_MAX * u[1])


def select_action(actor: nn.Mlp, state, explore: bool = False, rng=None,
                  sigma: float = 0.2) -> Action:
    """Policy head evaluation with optional exploration noise.

    Noise is Gaussian in the normalized action space and the result is
    re-clamped, so commands never leave the control limits.
    """
    vec = state.vector if hasattr(state, "vector") else np.asarray(state, dtype=float)
    u = actor.forward(vec)
    if not np.all(np.isfinite(u)):
        raise sim.PolicyDivergenceError("policy divergence")
    if explore:
        u = u + (rng or np.random.default_rng()).normal(0.0, sigma, 2)
    return action_from_normalized(u)


class GreedyPolicy:
    """Picklable StateVec -> Action wrapper around an actor network."""

    def __init__(self, actor: nn.Mlp):
        self.actor = actor

    def __call__(self, state) -> Action:
        return select_action(self.actor, state, explore=False)


class ReplayBuffer:
    """Preallocated ring buffer of (s, u, r, s', done) rows.

    kind "experience" evicts FIFO at capacity; kind "demo" is sealed
    after loading and refuses further writes.
    """

    def __init__(self, capacity: int, state_dim: int, kind: str = "experience"):
        self.capacity = int(capacity)
        self.kind = kind
        self.s = np.zeros((self.capacity, state_dim))
        self.u = np.zeros((self.capacity, 2))
        self.r = np.zeros(self.capacity)
        self.s2 = np.zeros((self.capacity, state_dim))
        self.done = np.zeros(self.capacity)
        self.idx = 0
        self.size = 0
        self._sealed = False

    def __len__(self):
        return self.size

    def add(self, s_vec, u, r, s2_vec, done):
        if self._sealed:
            raise RuntimeError("demo buffer is static after loading")
        self.s[self.idx] = s_vec
        self.u[self.idx] = u
        self.r[self.idx] = r
        self.s2[self.idx] = s2_vec
        self.done[self.idx] = 1.0 if done else 0.0
        self.idx = (self.idx + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def add_transition(self, tr: sim.Transition):
        self.add(tr.s.vector, normalized_from_action(tr.a), tr.r, tr.s_next.vector, tr.done)

    def seal(self):
        self._sealed = True

    def sample(self, rng, n: int):
        idx = rng.integers(0, self.size, n)
        return (self.s[idx].copy(), self.u[idx].copy(), self.r[idx].copy(),
                self.s2[idx].copy(), self.done[idx].copy())

    def content_digest(self) -> bytes:
        """Stable byte digest of the stored rows (static-buffer checks)."""
        import hashlib
        h = hashlib.sha256()
        for arr in (self.s[:self.size], self.u[:self.size], self.r[:self.size],
                    self.s2[:self.size], self.done[:self.size]):
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.digest()


class PolicyBundle:
    """Actor, twin critics, their targets and optimizer states."""

    def __init__(self, state_dim: int, cfg: TD3Config, seed: int = 0):
        rng = np.random.default_rng(seed)
        h = list(cfg.hidden)
        self.state_dim = state_dim
        self.actor = nn.Mlp([state_dim, *h, 2], hidden_act="relu", out_act="tanh", rng=rng)
        self.critic1 = nn.Mlp([state_dim + 2, *h, 1], hidden_act="relu", out_act="linear", rng=rng)
        self.critic2 = nn.Mlp([state_dim + 2, *h, 1], hidden_act="relu", out_act="linear", rng=rng)
        self.target_actor = self.actor.clone()
        self.target_critic1 = self.critic1.clone()
        self.target_critic2 = self.critic2.clone()
        self.opt_actor = nn.AdamState(self.actor.parameters(), lr=cfg.lr_actor)
        self.opt_critic1 = nn.AdamState(self.critic1.parameters(), lr=cfg.lr_critic)
        self.opt_critic2 = nn.AdamState(self.critic2.parameters(), lr=cfg.lr_critic)
        self.critic_updates = 0
        self.env_steps = 0

    def soft_update_targets(self, tau: float):
        nn.soft_update(self.target_actor, self.actor, tau)
        nn.soft_update(self.target_critic1, self.critic1, tau)
        nn.soft_update(self.target_critic2, self.critic2, tau)

    def state_arrays(self) -> dict:
        out = {}
        for name, net in (("actor", self.actor), ("critic1", self.critic1), ("critic2", self.critic2),
                          ("tactor", self.target_actor), ("tcritic1", self.target_critic1),
                          ("tcritic2", self.target_critic2)):
            for k, v in net.state_arrays().items():
                out[f"{name}_{k}"] = v
        return out

    def load_arrays(self, arrays: dict):
        for name, net in (("actor", self.actor), ("critic1", self.critic1), ("critic2", self.critic2),
                          ("tactor", self.target_actor), ("tcritic1", self.target_critic1),
                          ("tcritic2", self.target_critic2)):
            prefix = f"{name}_"
            net.load_arrays({k[len(prefix):]: v for k, v in arrays.items() if k.startswith(prefix)})

    def save(self, path, seed=None, extra=None):
        nn.save_checkpoint(path, "td3_policy", self.state_arrays(), seed=seed,
                           train_steps=self.env_steps, extra=extra)

    @classmethod
    def load(cls, path, cfg: TD3Config | None = None):
        manifest, arrays = nn.load_checkpoint(path)
        extra = manifest.get("extra", {})
        state_dim = int(extra.get("state_dim") or arrays["actor_w0"].shape[0])
        cfg = cfg or TD3Config()
        if "hidden" in extra:
            cfg.hidden = tuple(extra["hidden"])
        bundle = cls(state_dim, cfg, seed=manifest.get("seed") or 0)
        bundle.load_arrays(arrays)
        bundle.env_steps = manifest.get("train_steps", 0)
        return bundle, manifest


def critic_update(bundle: PolicyBundle, batch, cfg: TD3Config, rng) -> dict:
    """Clipped double-Q regression on one mixed batch.

    Target actions add clipped smoothing noise; y = r + gamma * (1 -
    done) * min(Q1', Q2'). Returns loss and q statistics.
    """
    s, u, r, s2, done = batch
    noise = np.clip(rng.normal(0.0, cfg.sigma_target, u.shape), -cfg.noise_clip, cfg.noise_clip)
    u2 = np.clip(bundle.target_actor.forward(s2) + noise, -1.0, 1.0)
    sa2 = np.concatenate([s2, u2], axis=1)
    q1t = bundle.target_critic1.forward(sa2)[:, 0]
    q2t = bundle.target_critic2.forward(sa2)[:, 0]
    y = r + cfg.gamma * (1.0 - done) * np.minimum(q1t, q2t)
    sa = np.concatenate([s, u], axis=1)
    losses = []
    for critic, opt in ((bundle.critic1, bundle.opt_critic1), (bundle.critic2, bundle.opt_critic2)):
        q = critic.forward(sa)[:, 0]
        diff = q - y
        losses.append(float(np.mean(diff * diff)))
        grads, _ = critic.backward((2.0 * diff / diff.size)[:, None])
        nn.adam_step(opt, critic.parameters(), grads)
    q_abs = float(np.max(np.abs(y)))
    if q_abs > cfg.q_guard:
        raise RuntimeError(f"critic divergence: |Q| reached {q_abs:.3e}")
    bundle.critic_updates += 1
    return {"critic1_loss": losses[0], "critic2_loss": losses[1], "q_mean": float(np.mean(y))}


def actor_gradients(bundle: PolicyBundle, states_e: np.ndarray, demo_batch, cfg: TD3Config):
    """The two actor gradient branches, kept separate for inspection.

    g_rl descends the summed -Q1(s, pi(s)) over the experience batch,
    g_bc descends the summed squared BC error over the demo batch
    (zeros when no demonstrations are given). Both branches are batch
    sums so the published weighting ratio applies to commensurate
    quantities; the adaptive optimizer absorbs the common batch factor.
    """
    u_pi = bundle.actor.forward(states_e)
    sa = np.concatenate([states_e, u_pi], axis=1)
    q = bundle.critic1.forward(sa)
    _, d_sa = bundle.critic1.backward(-np.ones_like(q))
    d_u = d_sa[:, bundle.state_dim:]
    g_rl, _ = bundle.actor.backward(d_u)
    stats = {"actor_q_mean": float(np.mean(q))}
    if demo_batch is not None:
        s_d, u_d = demo_batch
        u_pred = bundle.actor.forward(s_d)
        diff = u_pred - u_d
        g_bc, _ = bundle.actor.backward(2.0 * diff)  # summed over the batch
        stats["bc_loss"] = float(np.sum(diff * diff))
    else:
        g_bc = [np.zeros_like(p) for p in bundle.actor.parameters()]
        stats["bc_loss"] = 0.0
    return g_rl, g_bc, stats


def actor_update(bundle: PolicyBundle, states_e: np.ndarray, demo_batch, cfg: TD3Config) -> dict:
    """Delayed actor step with the balanced gradient, then soft target
    updates. demo_batch is (states, normalized demo actions) or None
    for the plain-TD3 (no demonstration) mode."""
    g_rl, g_bc, stats = actor_gradients(bundle, states_e, demo_batch, cfg)
    combined = [cfg.lambda_rl * a + cfg.lambda_bc * b for a, b in zip(g_rl, g_bc)]
    nn.adam_step(bundle.opt_actor, bundle.actor.parameters(), combined)
    bundle.soft_update_targets(cfg.tau)
    stats["actor_grad_norm"] = float(math.sqrt(sum(float(np.sum(g * g)) for g in combined)))
    return stats


# ---------------------------------------------------------------------------
# Training loop


@dataclass
class TrainResult:
    checkpoint: str
    log_path: str
    env_steps: int
    episodes: int
    eval_history: list = field(default_factory=list)
    stopped_early: bool = False


class Trainer:
    """Owns the full training loop: warmup, episodic interaction with
    per-step critic updates and delayed actor updates, scene rotation,
    periodic evaluation snapshots and the divergence guard."""

    def __init__(self, cfg: TD3Config, scenes: list, pipeline, demos=None,
                 sim_cfg: sim.SimConfig | None = None, seed: int = 0, out_dir=None):
        self.cfg = cfg
        self.scenes = list(scenes)
        self.pipeline = pipeline
        self.demos = list(demos) if demos else []
        self.sim_cfg = sim_cfg or sim.SimConfig()
        self.seed = seed
        self.rng = np.random.default_rng(seed)
        self.out_dir = out_dir
        state_dim = pipeline.state_dim
        self.bundle = PolicyBundle(state_dim, cfg, seed=seed)
        self.buffer_e = ReplayBuffer(cfg.buffer_e, state_dim, "experience")
        self.buffer_d = None
        if self.demos:
            self.buffer_d = ReplayBuffer(max(sum(1 for _ in self.demos) * 2000, 1024),
                                         state_dim, "demo")
            for demo in self.demos:
                scene = self._scene_by_id(demo.scene_id)
                for tr in sim.demo_to_transitions(demo, scene, pipeline, self.sim_cfg):
                    self.buffer_d.add_transition(tr)
            self.buffer_d.seal()
        self.log_rows = []

    def _scene_by_id(self, scene_id):
        for s in self.scenes:
            if s.id == scene_id:
                return s
        raise KeyError(scene_id)

    def _mode_weights(self, allow_demo: bool):
        base = {HumanMode.OPPOSITE_ASTAR: 1.0, HumanMode.RANDOM_ASTAR: 1.0,
                HumanMode.STATIC: 1.0, HumanMode.ABSENT: 1.0}
        if allow_demo and self.demos:
            return base, True
        return base, False

    def _sample_init(self, scene):
        weights, can_demo = self._mode_weights(allow_demo=True)
        scene_demos = [d for d in self.demos if d.scene_id == scene.id]
        if can_demo and scene_demos and self.rng.random() < self.cfg.demo_replay_prob:
            demo = scene_demos[int(self.rng.integers(len(scene_demos)))]
            return demo.episode_init(int(self.rng.integers(2 ** 31 - 1)))
        return sim.sample_episode(scene, self.rng, self.sim_cfg, weights)

    def _critic_batch(self):
        cfg = self.cfg
        s, u, r, s2, dn = self.buffer_e.sample(self.rng, cfg.batch_e)
        n_demo = int(round(cfg.batch_d * cfg.critic_demo_fraction))
        if self.buffer_d is not None and len(self.buffer_d) > 0 and n_demo > 0:
            sd, ud, rd, sd2, dnd = self.buffer_d.sample(self.rng, n_demo)
            s = np.concatenate([s, sd])
            u = np.concatenate([u, ud])
            r = np.concatenate([r, rd])
            s2 = np.concatenate([s2, sd2])
            dn = np.concatenate([dn, dnd])
        return (s, u, r, s2, dn)

    def warmup(self):
        """Fill the experience buffer with uniformly random actions."""
        cfg = self.cfg
        while self.bundle.env_steps < cfg.warmup:
            scene = self.scenes[0] if len(self.scenes) == 1 else self.scenes[
                int(self.rng.integers(len(self.scenes)))]
            init = sim.sample_episode(scene, self.rng, self.sim_cfg)
            engine = sim.EpisodeEngine(scene, self.pipeline, self.sim_cfg)
            state = engine.reset(init)
            for _ in range(cfg.n_ep):
                u = self.rng.uniform(-1.0, 1.0, 2)
                action = action_from_normalized(u)
                nxt, reward, done, info = engine.step(action)
                self.buffer_e.add(state.vector, u, reward, nxt.vector, done)
                state = nxt
                self.bundle.env_steps += 1
                if done or self.bundle.env_steps >= cfg.warmup:
                    break

    def evaluate(self, n: int | None = None, seed: int = 10_000) -> float:
        """Greedy success rate over seeded episodes with human modes 1-4."""
        n = n or self.cfg.eval_episodes
        policy = GreedyPolicy(self.bundle.actor)
        successes = 0
        for i in range(n):
            rng = np.random.default_rng([seed, i])
            scene = self.scenes[i % len(self.scenes)]
            init = sim.sample_episode(scene, rng, self.sim_cfg)
            result, _ = sim.run_episode(policy, init, scene, self.pipeline, self.sim_cfg)
            successes += result.outcome is sim.Outcome.SUCCESS
        return successes / n

    def train(self) -> TrainResult:
        cfg = self.cfg
        self.warmup()
        episodes = 0
        eval_history = []
        stopped = False
        log_file = None
        log_writer = None
        log_path = ""
        if self.out_dir:
            os.makedirs(self.out_dir, exist_ok=True)
            log_path = os.path.join(self.out_dir, "training_log.csv")
            log_file = open(log_path, "w", newline="")
            log_writer = csv.DictWriter(log_file, fieldnames=[
                "step", "episode", "return", "outcome",
                "critic_loss", "actor_loss", "bc_loss", "q_mean"])
            log_writer.writeheader()
        next_eval = (self.bundle.env_steps // cfg.eval_every + 1) * cfg.eval_every
        while self.bundle.env_steps < cfg.max_steps and not stopped:
            scene = self.scenes[(episodes // cfg.scene_rotation) % len(self.scenes)]
            init = self._sample_init(scene)
            engine = sim.EpisodeEngine(scene, self.pipeline, self.sim_cfg)
            state = engine.reset(init)
            ep_return = 0.0
            ep_rewards = []
            stats = {}
            for _ in range(cfg.n_ep):
                action = select_action(self.bundle.actor, state, explore=True,
                                       rng=self.rng, sigma=cfg.sigma_explore)
                u = normalized_from_action(action)
                nxt, reward, done, info = engine.step(action)
                self.buffer_e.add(state.vector, u, reward, nxt.vector, done)
                state = nxt
                ep_rewards.append(reward)
                self.bundle.env_steps += 1
                stats = critic_update(self.bundle, self._critic_batch(), cfg, self.rng)
                if self.bundle.critic_updates % cfg.policy_delay == 0:
                    s_e, *_ = self.buffer_e.sample(self.rng, cfg.batch_e)
                    demo_batch = None
                    if self.buffer_d is not None and len(self.buffer_d) > 0 and cfg.lambda_bc > 0:
                        sd, ud, *_ = self.buffer_d.sample(self.rng, cfg.batch_d)
                        demo_batch = (sd, ud)
                    stats.update(actor_update(self.bundle, s_e, demo_batch, cfg))
                if self.bundle.env_steps >= next_eval:
                    rate = self.evaluate()
                    eval_history.append((self.bundle.env_steps, rate))
                    next_eval += cfg.eval_every
                    if cfg.stop_success is not None and rate >= cfg.stop_success:
                        stopped = True
                if done or self.bundle.env_steps >= cfg.max_steps or stopped:
                    break
            episodes += 1
            for i, r in enumerate(ep_rewards):
                ep_return += (self.sim_cfg.gamma ** i) * r
            outcome = engine.outcome.value if engine.outcome else "cutoff"
            row = {
                "step": self.bundle.env_steps,
                "episode": episodes,
                "return": ep_return,
                "outcome": outcome,
                "critic_loss": stats.get("critic1_loss", ""),
                "actor_loss": stats.get("actor_q_mean", ""),
                "bc_loss": stats.get("bc_loss", ""),
                "q_mean": stats.get("q_mean", ""),
            }
            self.log_rows.append(row)
            if log_writer is not None:
                log_writer.writerow(row)
                log_file.flush()
        checkpoint_path = ""
        if self.out_dir:
            log_file.close()
            checkpoint_path = os.path.join(self.out_dir, "policy.npz")
            extra = {"state_dim": self.bundle.state_dim, "hidden": list(cfg.hidden)}
            self.bundle.save(checkpoint_path, seed=self.seed, extra=extra)
        return TrainResult(checkpoint_path, log_path, self.bundle.env_steps, episodes,
                           eval_history, stopped)


def train(cfg: TD3Config, scenes, pipeline, demos=None, sim_cfg=None, seed=0, out_dir=None) -> TrainResult:
    """Convenience wrapper constructing a Trainer and running it."""
    return Trainer(cfg, scenes, pipeline, demos, sim_cfg, seed, out_dir).train()
