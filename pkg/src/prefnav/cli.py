"""Command-line entry point.

Subcommands: gen-dataset, train-vae, train-predictor, train-policy,
rollout, evaluate, frechet, serve. Every run takes --seed, resolves its
configuration (flags > config file > defaults) and writes the resolved
snapshot next to its outputs, so identical invocations reproduce
byte-identical artifacts.
"""

from __future__ import annotations

import argparse
import json
import os
import sys


import numpy as np

from . import evaluation, learn, perception, scenes, sim
from .geom import Scene, Trajectory


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def data_root() -> str:
    return os.environ.get("PREFNAV_DATA_DIR", os.path.join(os.getcwd(), "prefnav_data"))


def _load_scenes(path: str | None) -> list:
    """Scene JSON file, directory of them, or the built-in set."""
    if not path:
        return scenes.scene_set()
    if os.path.isdir(path):
        out = []
        for name in sorted(os.listdir(path)):
            if name.endswith(".json"):
                out.append(Scene.load(os.path.join(path, name)))
        if not out:
            raise FileNotFoundError(f"no scene files in {path}")
        return out
    return [Scene.load(path)]


def _load_demos(path: str | None) -> list:
    if not path:
        return scenes.demo_catalog()
    if os.path.isdir(path):
        out = []
        for name in sorted(os.listdir(path)):
            if name.endswith(".json"):
                out.append(sim.Demonstration.load(os.path.join(path, name)))
        return out
    return [sim.Demonstration.load(path)]


def _write_config_snapshot(out_dir: str, payload: dict):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "resolved_config.json"), "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True)


def _build_pipeline(args, variant: perception.ControllerVariant, eval_mode: bool = False):
    cfg = variant.perception
    vae = perception.vae_from_checkpoint(args.vae)
    predictor = None
    if cfg.variant == "s_lstm":
        if not getattr(args, "predictor", None):
            raise SystemExit("variant lstm-hp needs --predictor")
        predictor = perception.predictor_from_checkpoint(args.predictor)
    if eval_mode and variant.disable_human_at_eval:
        from dataclasses import replace
        cfg = replace(cfg, human_fields_live=False)
    return perception.PerceptionPipeline(cfg, vae, predictor)


def _load_trajectory(path: str) -> Trajectory:
    with open(path) as f:
        first = f.read(1)
        f.seek(0)
        if first == "{":
            payload = json.load(f)
            if "robot" in payload:
                return Trajectory.from_rows(payload["robot"])
            raise ValueError(f"{path}: no trajectory found")
        if first == "[":
            return Trajectory.from_rows(json.load(f))
        # JSON-lines rollout log: the header carries the episode record
        rows = [json.loads(line) for line in f if line.strip()]
        for rec in rows:
            if rec.get("kind") == "result" and rec.get("robot"):
                return Trajectory.from_rows(rec["robot"])
        raise ValueError(f"{path}: no trajectory found")


# ---------------------------------------------------------------------------
# Subcommands


def cmd_gen_dataset(args) -> int:
    scene_list = _load_scenes(args.scene)
    cfg = perception.PerceptionConfig(fov_deg=args.fov, n_rays=args.rays)
    os.makedirs(os.path.dirname(os.path.abspath(args.out)) or ".", exist_ok=True)
    stats = perception.generate_dataset(scene_list, args.n, args.out, cfg, seed=args.seed)
    _write_config_snapshot(os.path.dirname(os.path.abspath(args.out)),
                           {"command": "gen-dataset", "n": args.n, "seed": args.seed,
                            "fov": args.fov, "rays": args.rays})
    print(f"wrote {stats['n_frames']} frames to {args.out} "
          f"(baseline MSE {stats['mean_baseline_mse']:.5f})")
    return 0


def cmd_train_vae(args) -> int:
    cfg = perception.PerceptionConfig(fov_deg=args.fov, n_rays=args.rays, latent_dim=args.latent)
    data = perception.load_dataset(args.dataset)
    model, history = perception.train_vae(data["scans"], cfg, epochs=args.epochs,
                                          seed=args.seed, log_every=max(args.epochs // 5, 1))
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "vae.npz")
    perception.save_vae(model, path, seed=args.seed, train_steps=args.epochs)
    _write_config_snapshot(args.out, {"command": "train-vae", "epochs": args.epochs,
                                      "seed": args.seed, "final_loss": history[-1]})
    print(f"saved {path} (final loss {history[-1]:.4f})")
    return 0


def cmd_train_predictor(args) -> int:
    cfg = perception.PerceptionConfig(latent_dim=args.latent, n_rays=args.rays)
    vae = perception.vae_from_checkpoint(args.vae)
    data = perception.load_dataset(args.dataset)
    windows, t_lat, t_pose, _ = perception.build_predictor_windows(data, vae)
    model, history = perception.train_predictor(windows, t_lat, t_pose, cfg.latent_dim,
                                                epochs=args.epochs, seed=args.seed,
                                                log_every=max(args.epochs // 5, 1))
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "predictor.npz")
    perception.save_predictor(model, path, seed=args.seed, train_steps=args.epochs)
    _write_config_snapshot(args.out, {"command": "train-predictor", "epochs": args.epochs,
                                      "seed": args.seed, "final_loss": history[-1]})
    print(f"saved {path} (final loss {history[-1]:.4f})")
    return 0


def cmd_train_policy(args) -> int:
    variant = perception.controller_variant(args.variant)
    if args.no_demos and variant.uses_demos:
        raise SystemExit(f"variant {variant.name} requires demonstrations; "
                         f"use --variant vae-nd for the no-demonstration controller")
    pipeline = _build_pipeline(args, variant)
    demos = [] if (args.no_demos or not variant.uses_demos) else _load_demos(args.demos)
    cfg = learn.TD3Config(max_steps=args.max_steps, warmup=args.warmup,
                          eval_every=args.eval_every, eval_episodes=args.eval_episodes,
                          stop_success=args.stop_success)
    if not demos:
        cfg.lambda_bc = 0.0
    scene_list = _load_scenes(args.scene)
    result = learn.train(cfg, scene_list, pipeline, demos, seed=args.seed, out_dir=args.out)
    _write_config_snapshot(args.out, {"command": "train-policy", "variant": variant.name,
                                      "seed": args.seed, "config": cfg.to_json_dict(),
                                      "env_steps": result.env_steps,
                                      "eval_history": result.eval_history})
    print(f"trained {result.env_steps} steps -> {result.checkpoint}")
    return 0


def _policy_from_checkpoint(path: str) -> learn.GreedyPolicy:
    bundle, _ = learn.PolicyBundle.load(path)
    return learn.GreedyPolicy(bundle.actor)


def cmd_rollout(args) -> int:
    variant = perception.controller_variant(args.variant)
    pipeline = _build_pipeline(args, variant, eval_mode=True)
    policy = _policy_from_checkpoint(args.policy)
    scene_list = _load_scenes(args.scene)
    scene = scene_list[0]
    rng = np.random.default_rng(args.seed)
    init = sim.sample_episode(scene, rng)
    result, transitions = sim.run_episode(policy, init, scene, pipeline)
    os.makedirs(os.path.dirname(os.path.abspath(args.out)) or ".", exist_ok=True)
    with open(args.out, "w") as f:
        f.write(json.dumps({"kind": "init", **init.to_json_dict()}) + "\n")
        for tr in transitions:
            f.write(json.dumps({
                "kind": "transition",
                "s": [float(x) for x in tr.s.vector],
                "a": [tr.a.v, tr.a.omega],
                "r": tr.r,
                "s_next": [float(x) for x in tr.s_next.vector],
                "done": tr.done,
                "source": tr.source.value,
            }) + "\n")
        f.write(json.dumps({"kind": "result", **result.to_json_dict()}) + "\n")
    print(f"{result.outcome.value} in {result.steps} steps, return {result.return_:.3f}")
    return 0


def cmd_evaluate(args) -> int:
    variant = perception.controller_variant(args.variant)
    pipeline = _build_pipeline(args, variant, eval_mode=True)
    policy = _policy_from_checkpoint(args.policy)
    scene_list = _load_scenes(args.scene)
    demos = _load_demos(args.demos) if args.demos != "none" else []
    scenario_list = []
    for scene in scene_list:
        scenario_list.append(evaluation.EvalScenario(
            f"{scene.id}/random", scene,
            mode_weights={sim.HumanMode.OPPOSITE_ASTAR: 1, sim.HumanMode.RANDOM_ASTAR: 1,
                          sim.HumanMode.STATIC: 1, sim.HumanMode.ABSENT: 1}))
    for demo in demos:
        try:
            scene = next(s for s in scene_list if s.id == demo.scene_id)
        except StopIteration:
            continue
        scenario_list.append(evaluation.EvalScenario(
            f"{demo.scene_id}/demo-{demos.index(demo)}", scene, demo=demo))
    report = evaluation.evaluate_controller(policy, pipeline, scenario_list, n=args.n,
                                            base_seed=args.seed, workers=args.workers)
    os.makedirs(args.out, exist_ok=True)
    report.save(os.path.join(args.out, "eval_report.json"),
                os.path.join(args.out, "eval_rates.csv"))
    _write_config_snapshot(args.out, {"command": "evaluate", "n": args.n, "seed": args.seed,
                                      "variant": variant.name})
    for s in report.scenarios:
        print(f"{s.name}: success {s.success_rate:.2f} collision {s.collision_rate:.2f} "
              f"timeout {s.timeout_rate:.2f}")
    return 0


def cmd_frechet(args) -> int:
    A = _load_trajectory(args.a)
    B = _load_trajectory(args.b)
    report = evaluation.deviation_aware_frechet(A, B, endpoint_mode=args.mode)
    print(f"F_full      = {report.f_full:.4f} m")
    print(f"t_star      = {report.t_star:.4f}")
    print(f"f(t_star)   = {report.f_at_t_star:.4f} m")
    print(f"reversed    = {report.reversed}")
    if args.out:
        report.write_curve_csv(args.out)
        print(f"curve -> {args.out}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(args.data)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> _Parser:
    p = _Parser(prog="prefnav", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_default=None):
        sp.add_argument("--seed", type=int, default=0)
        if out_default is not None:
            sp.add_argument("--out", default=out_default)

    sp = sub.add_parser("gen-dataset", help="record depth frames with a scripted driver")
    sp.add_argument("--scene", help="scene JSON file or directory (default: built-in set)")
    sp.add_argument("--n", type=int, default=50_000)
    sp.add_argument("--fov", type=float, default=87.0)
    sp.add_argument("--rays", type=int, default=64)
    common(sp, os.path.join(data_root(), "dataset", "frames.jsonl"))
    sp.set_defaults(fn=cmd_gen_dataset)

    sp = sub.add_parser("train-vae", help="train the denoising scan autoencoder")
    sp.add_argument("--dataset", required=True)
    sp.add_argument("--epochs", type=int, default=30)
    sp.add_argument("--fov", type=float, default=87.0)
    sp.add_argument("--rays", type=int, default=64)
    sp.add_argument("--latent", type=int, default=8)
    common(sp, os.path.join(data_root(), "models"))
    sp.set_defaults(fn=cmd_train_vae)

    sp = sub.add_parser("train-predictor", help="train the next-step sequence model")
    sp.add_argument("--dataset", required=True)
    sp.add_argument("--vae", required=True)
    sp.add_argument("--epochs", type=int, default=15)
    sp.add_argument("--rays", type=int, default=64)
    sp.add_argument("--latent", type=int, default=8)
    common(sp, os.path.join(data_root(), "models"))
    sp.set_defaults(fn=cmd_train_predictor)

    sp = sub.add_parser("train-policy", help="train a navigation controller")
    sp.add_argument("--variant", default="vae-ha",
                    choices=["vae-ha", "vae-hu", "vae-nd", "lstm-hp", "vae-fov-120", "vae-ng"])
    sp.add_argument("--vae", required=True)
    sp.add_argument("--predictor")
    sp.add_argument("--scene")
    sp.add_argument("--demos", help="demo JSON file or directory (default: built-in)")
    sp.add_argument("--no-demos", action="store_true")
    sp.add_argument("--max-steps", type=int, default=200_000)
    sp.add_argument("--warmup", type=int, default=5_000)
    sp.add_argument("--eval-every", type=int, default=5_000)
    sp.add_argument("--eval-episodes", type=int, default=100)
    sp.add_argument("--stop-success", type=float, default=None)
    common(sp, os.path.join(data_root(), "policy"))
    sp.set_defaults(fn=cmd_train_policy)

    sp = sub.add_parser("rollout", help="run one seeded episode and log it")
    sp.add_argument("--policy", required=True)
    sp.add_argument("--vae", required=True)
    sp.add_argument("--predictor")
    sp.add_argument("--variant", default="vae-ha",
                    choices=["vae-ha", "vae-hu", "vae-nd", "lstm-hp", "vae-fov-120", "vae-ng"])
    sp.add_argument("--scene")
    common(sp, os.path.join(data_root(), "rollout.jsonl"))
    sp.set_defaults(fn=cmd_rollout)

    sp = sub.add_parser("evaluate", help="rates + preference metric over scenarios")
    sp.add_argument("--policy", required=True)
    sp.add_argument("--vae", required=True)
    sp.add_argument("--predictor")
    sp.add_argument("--variant", default="vae-ha",
                    choices=["vae-ha", "vae-hu", "vae-nd", "lstm-hp", "vae-fov-120", "vae-ng"])
    sp.add_argument("--scene")
    sp.add_argument("--demos", default=None, help="'none' disables demo scenarios")
    sp.add_argument("--n", type=int, default=50)
    sp.add_argument("--workers", type=int, default=1)
    common(sp, os.path.join(data_root(), "eval"))
    sp.set_defaults(fn=cmd_evaluate)

    sp = sub.add_parser("frechet", help="deviation-aware similarity of two trajectories")
    sp.add_argument("--a", required=True, help="rollout log, demo file, or [[t,x,y],...] JSON")
    sp.add_argument("--b", required=True)
    sp.add_argument("--mode", default="auto", choices=["auto", "forward", "reversed"])
    sp.add_argument("--out", help="write the similarity curve CSV here")
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(fn=cmd_frechet)

    sp = sub.add_parser("serve", help="local demonstration-authoring service")
    sp.add_argument("--data", default=data_root())
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--port", type=int, default=8208)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(fn=cmd_serve)

    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.fn(args)
    except SystemExit as e:
        if isinstance(e.code, str):
            print(e.code, file=sys.stderr)
            return 1
        return int(e.code or 0)
    except (FileNotFoundError, ValueError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except RuntimeError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
