"""Terminal entry points: interactive REPL, benchmark runner, security check."""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import bench as bench_mod
from . import orchestrator as orch
from .errors import KernelAgentError, SuiteSchemaError
from .gateway import HttpChatBackend, scripted_model
from .orchestrator import AgentConfig, new_agent
from .runtime import RuntimeConfig, Snapshot, create_runtime, restore
from .security import SecurityPolicy, check, default_policy
from .semantic import ObservationKind, PromptTemplateSet

EXIT_OK = 0
EXIT_FINDINGS = 1
EXIT_USAGE = 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kernelagent",
        description="Code-acting agent over a persistent Python kernel",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    repl = sub.add_parser("repl", help="interactive agent session")
    _add_model_flags(repl, default_backend=None)
    repl.add_argument("--transcript", help="where to write the session transcript")

    bench = sub.add_parser("bench", help="run a benchmark suite")
    _add_model_flags(bench, default_backend="oracle")
    bench.add_argument("--suite", help="suite directory or file (default: bundled)")
    bench.add_argument("--category", action="append", help="run only these categories")
    bench.add_argument("--report", help="write the structured report JSON here")
    bench.add_argument("--jobs", type=int, default=1, help="cases run in parallel")

    chk = sub.add_parser("check", help="static security check of a source file")
    chk.add_argument("source", help="path of the file to check")
    chk.add_argument("--policy", help="policy JSON (banned imports/calls/attributes)")

    return parser


def _add_model_flags(parser: argparse.ArgumentParser, default_backend: str | None) -> None:
    parser.add_argument(
        "--backend",
        default=default_backend,
        help="live | oracle | scripted:PATH (JSON list of responses)",
    )
    parser.add_argument("--base-url", default="https://api.openai.com/v1")
    parser.add_argument("--model", default="gpt-4o-mini")
    parser.add_argument("--temperature", type=float, default=0.2)
    parser.add_argument("--max-turns", type=int, default=10)
    parser.add_argument("--max-output", type=int, default=4000)
    parser.add_argument("--policy", dest="policy_path", default=None)
    parser.add_argument("--templates", dest="templates_path", default=None)


def _agent_config(args, fixed_time: str | None) -> AgentConfig:
    policy = (
        SecurityPolicy.from_file(args.policy_path)
        if args.policy_path
        else default_policy()
    )
    tset = (
        PromptTemplateSet.from_file(args.templates_path)
        if args.templates_path
        else PromptTemplateSet.defaults()
    )
    return AgentConfig(
        t_max=args.max_turns,
        l_max=args.max_output,
        policy=policy,
        templates=tset,
        model_id=args.model,
        temperature=args.temperature,
        current_time=fixed_time,
    )


def _make_backend(args):
    spec = args.backend
    if spec == "live":
        return HttpChatBackend(base_url=args.base_url, model_id=args.model)
    if spec.startswith("scripted:"):
        path = spec.split(":", 1)[1]
        script = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(script, list):
            raise KernelAgentError("scripted backend file must hold a JSON list")
        return scripted_model(script)
    raise KernelAgentError(f"unknown backend {spec!r}")


# ---------------------------------------------------------------------------
# repl
# ---------------------------------------------------------------------------


def cmd_repl(args) -> int:
    if not args.backend:
        print("repl needs --backend live or --backend scripted:PATH", file=sys.stderr)
        return EXIT_USAGE
    fixed_time = "1970-01-01 00:00:00" if args.backend.startswith("scripted:") else None
    try:
        backend = _make_backend(args)
    except (KernelAgentError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    config = _agent_config(args, fixed_time)
    agent = new_agent(config, create_runtime(RuntimeConfig()), backend)
    last_result = None

    print("kernelagent repl. /vars /save PATH /load PATH /quit")
    while True:
        try:
            line = input("> ").strip()
        except EOFError:
            print()
            break
        if not line:
            continue
        if line == "/quit":
            break
        if line == "/vars":
            for entry in agent.runtime.list_entries():
                print(f"  {entry.name}: {entry.type_name} ({entry.origin}) = {entry.summary}")
            continue
        if line.startswith("/save "):
            path = line.split(" ", 1)[1].strip()
            agent.runtime.snapshot().save(path)
            print(f"saved snapshot to {path}")
            continue
        if line.startswith("/load "):
            path = line.split(" ", 1)[1].strip()
            try:
                agent.runtime = restore(Snapshot.load(path), RuntimeConfig())
            except KernelAgentError as exc:
                print(f"load failed: {exc}")
                continue
            print(f"restored snapshot from {path}")
            continue

        try:
            result = orch.step(agent, line)
        except KernelAgentError as exc:
            print(f"backend failure: {exc}", file=sys.stderr)
            if last_result is not None and args.transcript:
                orch.export_transcript(last_result, args.transcript)
                print(f"partial transcript saved to {args.transcript}", file=sys.stderr)
            return 1
        last_result = result
        for turn in result.turns:
            if turn.action.code is not None:
                print(f"[cell {turn.index}]")
                print(turn.action.code)
            if turn.observation is not None:
                label = (
                    "output"
                    if turn.observation.kind is ObservationKind.OUTPUT
                    else turn.observation.kind.value
                )
                print(f"[{label}]")
                print(turn.observation.text)
        print(f"[final] {result.final_text}")

    if args.transcript and last_result is not None:
        orch.export_transcript(last_result, args.transcript)
    return EXIT_OK


# ---------------------------------------------------------------------------
# bench
# ---------------------------------------------------------------------------


def cmd_bench(args) -> int:
    suite_path = args.suite or bench_mod.bundled_suite_path()
    try:
        cases = bench_mod.load_suite(suite_path)
    except SuiteSchemaError as exc:
        print(f"suite error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    if args.category:
        unknown = set(args.category) - set(bench_mod.harness.CATEGORIES)
        if unknown:
            print(f"unknown categories: {sorted(unknown)}", file=sys.stderr)
            return EXIT_USAGE
        cases = [c for c in cases if c.category in args.category]
    runnable = []
    for case in cases:
        missing = bench_mod.missing_requirements(case)
        if missing:
            print(
                f"skipping {case.id}: requires {', '.join(missing)}", file=sys.stderr
            )
            continue
        runnable.append(case)
    cases = runnable
    if not cases:
        print("no cases selected", file=sys.stderr)
        return EXIT_USAGE

    if args.backend == "oracle":
        factory = bench_mod.oracle_factory(config=_agent_config(args, "2026-01-05 00:00:00"))
    elif args.backend.startswith("scripted:"):
        path = args.backend.split(":", 1)[1]
        script = json.loads(Path(path).read_text(encoding="utf-8"))
        factory = bench_mod.scripted_factory(script, config=_agent_config(args, "2026-01-05 00:00:00"))
    elif args.backend == "live":

        def factory(case):
            return new_agent(
                _agent_config(args, None),
                create_runtime(RuntimeConfig()),
                HttpChatBackend(base_url=args.base_url, model_id=args.model),
            )

    else:
        print(f"unknown backend {args.backend!r}", file=sys.stderr)
        return EXIT_USAGE

    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(lambda c: bench_mod.run_case(c, factory), cases))
    else:
        results = [bench_mod.run_case(case, factory) for case in cases]

    rep = bench_mod.report(results)
    print(bench_mod.render_table(rep))
    if args.report:
        Path(args.report).write_text(
            json.dumps(rep.to_dict(), indent=2), encoding="utf-8"
        )
        print(f"report written to {args.report}")

    executed_all = all(r.error is None for r in results)
    for result in results:
        if result.error:
            print(f"case {result.case_id}: {result.error}", file=sys.stderr)
    return EXIT_OK if executed_all else 1


# ---------------------------------------------------------------------------
# check
# ---------------------------------------------------------------------------


def cmd_check(args) -> int:
    try:
        source = Path(args.source).read_text(encoding="utf-8")
    except OSError as exc:
        print(f"cannot read source: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        policy = (
            SecurityPolicy.from_file(args.policy) if args.policy else default_policy()
        )
    except (OSError, ValueError, TypeError) as exc:
        print(f"cannot load policy: {exc}", file=sys.stderr)
        return EXIT_USAGE

    violations = check(source, policy)
    for v in violations:
        print(
            f"{args.source}:{v.location[0]}:{v.location[1]}: "
            f"{v.rule_kind.value}: {v.message}"
        )
    if violations:
        return EXIT_FINDINGS
    print(f"{args.source}: clean")
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command == "repl":
        return cmd_repl(args)
    if args.command == "bench":
        return cmd_bench(args)
    if args.command == "check":
        return cmd_check(args)
    parser.error(f"unknown command {args.command!r}")  # pragma: no cover
    return EXIT_USAGE  # pragma: no cover


if __name__ == "__main__":
    sys.exit(main())
