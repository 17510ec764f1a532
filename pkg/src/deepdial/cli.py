"""Operator entry point: train, evaluate, serve, chat, replay.

Exit codes: 0 success, 1 usage error, 2 data or config error, 3 runtime
fault. All randomness flows from one --seed.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from deepdial import dqn, report
from deepdial.acts import CATALOG
from deepdial.config import EngineConfig, load_config
from deepdial.constraints import (DemonstrationCorpus, NaiveBayesModel,
                                  train_nb)
from deepdial.datapack import DataError, DataPack, load_data_pack
from deepdial.environment import DialogueEnvironment
from deepdial.evaluate import evaluate, summarize
from deepdial.expert import generate_demonstrations
from deepdial.net import (PolicyFormatError, load_policy, save_policy)
from deepdial.policy import ExpertDriver, GreedyQPolicy
from deepdial.server import (DialogueServer, Session, SessionFactory,
                             format_transcript)
from deepdial.simulator import NoiseConfig
from deepdial.text import VocabularyError

USAGE_ERROR, DATA_ERROR, RUNTIME_ERROR = 1, 2, 3

DEMO_FILENAME = "demonstrations.json"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_ERROR)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="deepdial",
                     description="Task-oriented dialogue policy engine")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", metavar="PATH", help="INI configuration file")
        p.add_argument("--seed", type=int, metavar="N")
        p.add_argument("--noise", choices=["on", "off"])
        p.add_argument("--lang", metavar="L", help="data pack language tag")
        p.add_argument("--data-dir", metavar="DIR", help="data pack directory")

    p_train = sub.add_parser("train", help="train a policy against the simulator")
    common(p_train)
    p_train.add_argument("--steps", type=int, metavar="N", help="learning steps")
    p_train.add_argument("--episodes", type=int, metavar="N", help="episode cap")
    p_train.add_argument("--out", metavar="DIR", default=".",
                         help="output directory (policy, curve, figure)")
    p_train.add_argument("--connect", metavar="HOST:PORT",
                         help="train against a remote environment server")

    p_eval = sub.add_parser("eval", help="evaluate a policy with greedy rollouts")
    common(p_eval)
    p_eval.add_argument("--policy", required=True, metavar="PATH",
                        help="policy file, or 'expert'")
    p_eval.add_argument("--episodes", type=int, default=100, metavar="N")
    p_eval.add_argument("--out", metavar="DIR", default=".",
                        help="output directory (report csv + figure)")

    p_serve = sub.add_parser("serve", help="run the environment server")
    common(p_serve)
    p_serve.add_argument("--port", type=int, metavar="N")
    p_serve.add_argument("--ws-port", type=int, metavar="N")
    p_serve.add_argument("--policy", metavar="PATH",
                         help="policy for interactive sessions ('expert' allowed)")
    p_serve.add_argument("--transcript", metavar="PATH",
                         help="append episode transcripts to this file")

    p_chat = sub.add_parser("chat", help="talk to a policy in the terminal")
    common(p_chat)
    p_chat.add_argument("--policy", required=True, metavar="PATH",
                        help="policy file, or 'expert'")
    p_chat.add_argument("--debug", action="store_true",
                        help="show acts and rewards")

    p_replay = sub.add_parser("replay", help="print the demonstration dialogues")
    common(p_replay)
    p_replay.add_argument("--regenerate", action="store_true",
                          help="rebuild the demonstration corpus file")

    return parser


# -- shared loading ----------------------------------------------------------


def _load_engine_config(args) -> EngineConfig:
    cfg = load_config(args.config) if args.config else EngineConfig()
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "noise", None) is not None:
        cfg.noise = NoiseConfig(cfg.noise.distortion_threshold,
                                enabled=args.noise == "on")
    if getattr(args, "lang", None) is not None:
        cfg.language = args.lang
    if getattr(args, "data_dir", None) is not None:
        cfg.data_dir = args.data_dir
    if getattr(args, "steps", None) is not None:
        cfg.hyper = dqn.HyperParams(**{
            **_hyper_dict(cfg.hyper), "total_learning_steps": args.steps})
    if getattr(args, "episodes", None) is not None and args.command == "train":
        cfg.hyper = dqn.HyperParams(**{
            **_hyper_dict(cfg.hyper), "max_episodes": args.episodes})
    if getattr(args, "port", None) is not None:
        cfg.port = args.port
    if getattr(args, "ws_port", None) is not None:
        cfg.ws_port = args.ws_port
    return cfg


def _hyper_dict(hp: dqn.HyperParams) -> dict:
    from dataclasses import asdict
    return asdict(hp)


def _demo_path(cfg: EngineConfig) -> Path:
    from deepdial.datapack import default_data_dir
    directory = Path(cfg.data_dir) if cfg.data_dir else default_data_dir()
    return directory / DEMO_FILENAME


def _load_model(cfg: EngineConfig, pack: DataPack) -> NaiveBayesModel:
    path = _demo_path(cfg)
    if path.exists():
        corpus = DemonstrationCorpus.from_json(path.read_text(encoding="utf-8"))
        if corpus.dialogues and len(corpus.dialogues[0][0][0]) != len(pack.vocab):
            raise DataError(
                f"{path}: demonstration states have "
                f"{len(corpus.dialogues[0][0][0])} features, vocabulary has "
                f"{len(pack.vocab)}; regenerate with 'deepdial replay --regenerate'")
    else:
        corpus = generate_demonstrations(pack, cfg.demo_dialogues, cfg.demo_seed)
    return train_nb(corpus)


def _load_system_policy(spec: str, pack: DataPack, rng: np.random.Generator):
    if spec == "expert":
        return ExpertDriver(rng)
    net, vocab = load_policy(spec)
    if vocab.words != pack.vocab.words:
        raise DataError(
            f"policy {spec} was trained with a different vocabulary "
            f"({len(vocab)} words vs {len(pack.vocab)} in the data pack)")
    return GreedyQPolicy(net)


# -- commands -----------------------------------------------------------------


def cmd_train(args) -> int:
    cfg = _load_engine_config(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    seeds = np.random.SeedSequence(cfg.seed)
    env_rng, learn_rng = (np.random.default_rng(c) for c in seeds.spawn(2))

    remote = None
    if args.connect:
        from deepdial.client import RemoteEnvironment
        host, _, port = args.connect.rpartition(":")
        remote = RemoteEnvironment(host or "127.0.0.1", int(port))
        env = remote
        vocab_words = tuple(remote.vocabulary)
        from deepdial.text import Vocabulary
        vocab = Vocabulary(vocab_words)
    else:
        pack = load_data_pack(cfg.data_dir, cfg.language)
        model = _load_model(cfg, pack)
        env = DialogueEnvironment(pack, model, cfg.env_config(), env_rng)
        vocab = pack.vocab

    policy_path = out_dir / "policy.txt"
    curve_path = out_dir / "curve.csv"
    try:
        result = dqn.run_training(env, cfg.hyper, learn_rng)
    except dqn.TrainingInterrupted as exc:
        checkpoint = out_dir / "policy.checkpoint.txt"
        save_policy(exc.partial.net, vocab, str(checkpoint))
        dqn.write_curve(exc.partial.curve, str(curve_path))
        print(f"training interrupted: {exc.cause}", file=sys.stderr)
        print(f"checkpoint written to {checkpoint}", file=sys.stderr)
        return RUNTIME_ERROR
    finally:
        if remote is not None:
            remote.close()

    save_policy(result.net, vocab, str(policy_path))
    dqn.write_curve(result.curve, str(curve_path))
    report.render_learning_curve(result.curve, str(out_dir / "curve.png"))
    tail = result.curve[-100:]
    tail_mean = (sum(r.total_reward for r in tail) / len(tail)) if tail else 0.0
    print(f"episodes: {result.episodes_done}  steps: {result.steps_done}")
    print(f"final-100-episode mean reward: {tail_mean:.3f}")
    print(f"policy: {policy_path}")
    print(f"curve:  {curve_path}")
    return 0


def cmd_eval(args) -> int:
    cfg = _load_engine_config(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    pack = load_data_pack(cfg.data_dir, cfg.language)
    model = _load_model(cfg, pack)
    seeds = np.random.SeedSequence(cfg.seed)
    env_rng, pol_rng = (np.random.default_rng(c) for c in seeds.spawn(2))
    policy = _load_system_policy(args.policy, pack, pol_rng)
    env = DialogueEnvironment(pack, model, cfg.env_config(), env_rng)

    outcomes = evaluate(env, policy, args.episodes)
    summary = summarize(outcomes)
    print(f"episodes:     {summary.episodes}")
    print(f"mean reward:  {summary.mean_reward:.3f}")
    print(f"task success: {summary.success_rate:.3f}")
    print(f"mean length:  {summary.mean_turns:.2f}")

    report_path = out_dir / "eval.csv"
    with open(report_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["episode", "total_reward", "turns", "all_confirmed",
                         "info_provided", "closed"])
        for i, o in enumerate(outcomes):
            writer.writerow([i, repr(o.total_reward), o.turns,
                             int(o.all_confirmed), int(o.info_provided),
                             int(o.closed)])
    if outcomes:
        report.render_eval_report(outcomes, str(out_dir / "eval.png"))
    return 0


def cmd_serve(args) -> int:
    cfg = _load_engine_config(args)
    pack = load_data_pack(cfg.data_dir, cfg.language)
    model = _load_model(cfg, pack)
    policy = None
    if args.policy:
        policy = _load_system_policy(args.policy, pack,
                                     np.random.default_rng(cfg.seed))
    sink = None
    if args.transcript:
        transcript_path = Path(args.transcript)

        def sink(entries):
            with open(transcript_path, "a", encoding="utf-8") as fh:
                fh.write(format_transcript(entries) + "\n")

    factory = SessionFactory(pack, model, cfg.env_config(), seed=cfg.seed,
                             policy=policy, transcript_sink=sink)
    server = DialogueServer(factory, host=cfg.host, port=cfg.port,
                            ws_port=cfg.ws_port,
                            idle_timeout=cfg.idle_timeout or None)
    print(f"listening on {cfg.host}:{server.port} (tcp), "
          f"{cfg.host}:{server.ws_port} (websocket)", flush=True)
    server.serve_forever()
    return 0


def cmd_chat(args) -> int:
    cfg = _load_engine_config(args)
    pack = load_data_pack(cfg.data_dir, cfg.language)
    model = _load_model(cfg, pack)
    seeds = np.random.SeedSequence(cfg.seed)
    env_rng, pol_rng = (np.random.default_rng(c) for c in seeds.spawn(2))
    policy = _load_system_policy(args.policy, pack, pol_rng)
    env = DialogueEnvironment(pack, model, cfg.env_config(), env_rng)
    session = Session(env, policy=policy)

    def show(reply: dict) -> None:
        for turn in reply.get("system_turns", []):
            if turn.get("completed"):
                continue
            if args.debug and turn.get("act"):
                r = turn.get("reward")
                badge = f"  [{turn['act']}" + (f" r={r:+.2f}]" if r is not None else "]")
            else:
                badge = ""
            print(f"system: {turn['text']}{badge}")

    next_id = 0

    def send(payload: dict) -> dict:
        nonlocal next_id
        payload["id"] = next_id
        next_id += 1
        return json.loads(session.handle_line(json.dumps(payload)))

    hello = send({"type": "hello", "mode": "interactive"})
    if hello["type"] == "error":
        print(f"error: {hello['detail']}", file=sys.stderr)
        return RUNTIME_ERROR
    reply = send({"type": "reset"})
    show(reply)
    while True:
        if reply.get("terminal"):
            print("(dialogue finished)")
            return 0
        try:
            text = input("you: ").strip()
        except EOFError:
            print()
            return 0
        if not text:
            continue
        reply = send({"type": "user_text", "text": text})
        if reply["type"] == "error":
            print(f"error: {reply['detail']}", file=sys.stderr)
            continue
        show(reply)


def cmd_replay(args) -> int:
    cfg = _load_engine_config(args)
    pack = load_data_pack(cfg.data_dir, cfg.language)
    path = _demo_path(cfg)
    if args.regenerate:
        corpus = generate_demonstrations(pack, cfg.demo_dialogues, cfg.demo_seed)
        path.write_text(corpus.to_json() + "\n", encoding="utf-8")
        print(f"wrote {len(corpus.dialogues)} dialogues "
              f"({corpus.num_pairs()} pairs) to {path}")
        return 0
    if not path.exists():
        raise DataError(f"no demonstration corpus at {path}")
    corpus = DemonstrationCorpus.from_json(path.read_text(encoding="utf-8"))
    for d, dialogue in enumerate(corpus.dialogues):
        print(f"--- dialogue {d} ---")
        for state, action in dialogue:
            active = ",".join(f"{v:g}" for v in state if v) or "-"
            print(f"  {str(CATALOG[action]):32s} features-on: {active}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else USAGE_ERROR
    try:
        handler = {
            "train": cmd_train, "eval": cmd_eval, "serve": cmd_serve,
            "chat": cmd_chat, "replay": cmd_replay,
        }[args.command]
        return handler(args)
    except (DataError, PolicyFormatError, VocabularyError) as exc:
        print(f"data/config error: {exc}", file=sys.stderr)
        return DATA_ERROR
    except KeyboardInterrupt:
        return 0
    except Exception as exc:
        print(f"runtime fault: {exc}", file=sys.stderr)
        return RUNTIME_ERROR


if __name__ == "__main__":
    sys.exit(main())
