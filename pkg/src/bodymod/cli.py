"""Operator command line: corpus generation, training, morphing, simulation,
analysis, and serving.

Exit codes: 0 ok, 2 usage error, 3 data error, 4 numeric failure.
"""
from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from . import service as service_mod
from . import shapemodel, tasks
from .config import Config, load_config
from .interaction import ModMethod
from .mesh import MeshError, SolveError, load_mesh, load_region, save_mesh
from .shapemodel import (
    AnthroVector,
    Corpus,
    ModelError,
    generate_synthetic_corpus,
    load_model,
    save_model,
    train_shape_model,
)
from .stats import StatsError
from .tasks import TaskError

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_DATA):
        super().__init__(message)
        self.code = code


def cmd_gen_corpus(args, cfg: Config) -> int:
    corpus = generate_synthetic_corpus(args.subjects, args.seed, rings=args.rings,
                                       segments=args.segments, noise=args.noise)
    corpus.save(args.out)
    print(f"wrote {corpus.size} subjects to {args.out}")
    return EXIT_OK


def cmd_train(args, cfg: Config) -> int:
    corpus = Corpus.load(args.corpus)
    face_region = corpus.face_region
    if args.face_region:
        face_region = load_region(args.face_region, corpus.meshes[0].vertex_count)
    if face_region is None:
        raise CliError("no face region: corpus carries none and --face-region not given",
                       EXIT_USAGE)
    k = args.k
    if k is not None and k > corpus.size - 1:
        warnings.warn(f"k={k} capped to M-1={corpus.size - 1}")
        k = corpus.size - 1
    model = train_shape_model(corpus, face_region, k)
    d = corpus.measurement_matrix().mean(axis=0)
    model.base_anthro = AnthroVector(*d)
    save_model(model, args.out)
    print(f"trained model with k={model.component_count} on M={corpus.size}; "
          f"wrote {args.out}")
    return EXIT_OK


def cmd_morph(args, cfg: Config) -> int:
    model = load_model(args.model)
    mesh = load_mesh(args.mesh)
    deltas = [args.delta_kg] if args.sweep is None else list(
        np.arange(args.sweep[0], args.sweep[1] + 1e-9, args.sweep[2]))
    if len(deltas) == 1:
        out = model.modify_weight(mesh, deltas[0])
        save_mesh(out, args.out)
        print(f"wrote {args.out}")
    else:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        for dw in deltas:
            out = model.modify_weight(mesh, float(dw))
            path = out_dir / f"morph_{dw:+07.2f}kg.obj"
            save_mesh(out, path)
            print(f"wrote {path}")
    return EXIT_OK


def cmd_simulate(args, cfg: Config) -> int:
    method = ModMethod(args.method) if args.method else None
    kind = "amt" if method else "pet"
    records = tasks.simulate_estimator(
        gain=args.gain, reference_weight=args.reference or args.base_weight,
        noise_sd=args.noise, seed=args.seed, base_weight=args.base_weight,
        participants=args.participants, kind=kind, method=method)
    with open(args.out, "w", newline="") as fh:
        tasks.records_to_csv(records, fh)
    print(f"wrote {len(records)} records to {args.out}")
    return EXIT_OK


def _load_records(path: Path):
    text = path.read_text()
    if not text.strip():
        raise CliError(f"{path}: empty records file", EXIT_USAGE)
    if path.suffix == ".csv":
        import io
        return tasks.records_from_csv(io.StringIO(text))
    first = json.loads(text.strip().splitlines()[0])
    if first.get("type") == "header":
        return service_mod.records_from_session_log(text)
    return [tasks.EstimationRecord.from_json(line)
            for line in text.splitlines() if line.strip()]


def cmd_analyze(args, cfg: Config) -> int:
    records = _load_records(Path(args.records))
    if not records:
        raise CliError(f"{args.records}: no records found", EXIT_USAGE)
    report = service_mod.build_report(records)
    output = service_mod.report_json(report)
    if args.out:
        Path(args.out).write_text(output)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(output)
    return EXIT_OK


def cmd_serve(args, cfg: Config) -> int:
    from . import server
    from .service import Service

    model = load_model(args.model)
    svc = Service(args.data_dir, morph_spacing_kg=cfg.morph_spacing_kg)
    svc.register_model(args.model_id, model)
    print(f"serving model {args.model_id!r} on port {args.port}")
    server.run(svc, host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bodymod")
    parser.add_argument("--config", help="key=value config file")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-corpus", help="generate a synthetic registered corpus")
    p.add_argument("--subjects", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rings", type=int, default=48)
    p.add_argument("--segments", type=int, default=48)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_gen_corpus)

    p = sub.add_parser("train", help="train a shape model from a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--face-region", help="region file; defaults to the corpus's")
    p.add_argument("--k", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("morph", help="modify a mesh's weight")
    p.add_argument("--model", required=True)
    p.add_argument("--mesh", required=True)
    p.add_argument("--delta-kg", type=float, default=0.0)
    p.add_argument("--sweep", type=float, nargs=3, metavar=("FROM", "TO", "STEP"),
                   help="emit a series of meshes instead of one")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_morph)

    p = sub.add_parser("simulate", help="simulate estimation-task records")
    p.add_argument("--method", choices=[m.value for m in ModMethod],
                   help="active-task method; omit for the passive task")
    p.add_argument("--gain", type=float, default=1.0)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--participants", type=int, default=12)
    p.add_argument("--base-weight", type=float, default=75.0)
    p.add_argument("--reference", type=float)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("analyze", help="summaries and regressions from records")
    p.add_argument("--records", required=True,
                   help="records .csv/.jsonl or an exported session log")
    p.add_argument("--out", help="write the JSON report here instead of stdout")
    p.set_defaults(fn=cmd_analyze)

    p = sub.add_parser("serve", help="run the session service")
    p.add_argument("--model", required=True)
    p.add_argument("--model-id", default="default")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--data-dir", required=True)
    p.set_defaults(fn=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0
    cfg = Config()
    try:
        if args.config:
            cfg = load_config(args.config)
        return args.fn(args, cfg)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (ModelError, MeshError, TaskError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (SolveError, StatsError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
