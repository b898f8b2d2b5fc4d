"""Command-line pipeline: load image and labels, solve, resample, write.

Exit codes: 0 success, 2 input error, 3 solver failure, 4 foldover detected.

Dump formats:
  --dump-mesh: OBJ-style text, an ``o source`` group (``v x y 0`` and 1-based
    ``f i j k`` lines) followed by an ``o warped`` group with the same faces.
  --dump-mu: one header line ``# face rho tau abs_mu`` then one line per face
    with the face index and the prescribed dilatation's real part, imaginary
    part and magnitude.
"""

from __future__ import annotations

import argparse
import sys

from .errors import FoldoverError, InputError, RetargetError, SolverError
from .pipeline import DEFAULT_MESH_VERTICES, JobSpec, run_retarget, self_check


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qcretarget",
        description=(
            "Content-aware image retargeting: a sparse elliptic solve "
            "reconstructs a foldover-free warp from a prescribed local "
            "distortion field, preserving labeled objects and lines."
        ),
    )
    parser.add_argument("--input", metavar="PATH", help="source image (PNG or JPEG)")
    parser.add_argument("--output", metavar="PATH", help="output image path")
    parser.add_argument("--labels", metavar="PATH", help="label document (JSON)")
    parser.add_argument("--ratio", type=float, metavar="R", help="target width / source width")
    parser.add_argument("--width", type=int, metavar="W", help="explicit target width")
    parser.add_argument("--height", type=int, metavar="H", help="explicit target height")
    parser.add_argument(
        "--choice",
        choices=("even", "weak", "strong"),
        default="even",
        help="distortion distribution mode (default: even)",
    )
    parser.add_argument(
        "--chessboard",
        action="store_true",
        help="keep horizontal/vertical background structures axis-aligned",
    )
    parser.add_argument(
        "--extremal",
        action="store_true",
        help="force the extremal regime (targets narrower than the objects)",
    )
    parser.add_argument(
        "--beta",
        type=float,
        metavar="B",
        help="percent of the target width the objects occupy in extremal mode",
    )
    parser.add_argument(
        "--mesh-vertices",
        type=int,
        default=DEFAULT_MESH_VERTICES,
        metavar="N",
        help=f"approximate mesh vertex count (default: {DEFAULT_MESH_VERTICES})",
    )
    parser.add_argument("--dump-mesh", metavar="PATH", help="write source+warped meshes (OBJ text)")
    parser.add_argument("--dump-mu", metavar="PATH", help="write the per-face dilatation table")
    parser.add_argument(
        "--seed-check",
        action="store_true",
        help="run the built-in invariant self-tests and exit",
    )
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.seed_check:
        results = self_check()
        ok = True
        for name, passed, detail in results:
            print(f"{'PASS' if passed else 'FAIL'} {name}: {detail}")
            ok = ok and passed
        return 0 if ok else 1

    if not args.input or not args.output:
        parser.error("--input and --output are required (or use --seed-check)")

    try:
        job = JobSpec(
            input_path=args.input,
            output_path=args.output,
            label_path=args.labels,
            ratio=args.ratio,
            width=args.width,
            height=args.height,
            choice=args.choice,
            chessboard=args.chessboard,
            mesh_vertices=args.mesh_vertices,
            extremal="on" if args.extremal else "auto",
            beta=args.beta,
            dump_mesh=args.dump_mesh,
            dump_mu=args.dump_mu,
        )
        result = run_retarget(job)
    except FoldoverError as exc:
        print(str(exc), file=sys.stderr)
        return exc.exit_status
    except SolverError as exc:
        print(str(exc), file=sys.stderr)
        return exc.exit_status
    except (InputError, RetargetError) as exc:
        print(str(exc), file=sys.stderr)
        return exc.exit_status
    except OSError as exc:
        print(f"[E_IO] {exc}", file=sys.stderr)
        return 2

    m = result.metrics
    print(
        f"wrote {args.output} ({m['output_size'][0]}x{m['output_size'][1]}), "
        f"solve {m['solve_ms']:.1f} ms, min Jacobian {m['min_jacobian']:.4g}, "
        f"max |mu| {m['max_abs_mu']:.4g}"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
