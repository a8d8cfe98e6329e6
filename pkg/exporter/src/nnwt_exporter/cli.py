"""nnwt-export: convert zoo weights to NNWT archives and verify taps."""

from __future__ import annotations

import argparse
import json
import sys

from .export import SourceError, export
from .verify import VerificationError, verify
from .writer import ArchiveError


def main(argv=None) -> int:
    p = argparse.ArgumentParser(prog="nnwt-export")
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("export", help="write a weight archive")
    e.add_argument("--backbone", required=True, choices=("vgg16", "clip-rn50"))
    e.add_argument("--out", required=True)
    e.add_argument("--init", choices=("pretrained", "seeded"), default="pretrained")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--checkpoint", default=None, help="local zoo state dict")

    v = sub.add_parser("verify", help="run the zoo forward pass and check taps")
    v.add_argument("--archive", required=True)
    v.add_argument("--image", required=True)
    v.add_argument("--fixtures", required=True, help="tap summary JSON")
    v.add_argument("--write-fixtures", action="store_true",
                   help="write the fixture file instead of comparing")
    v.add_argument("--init", choices=("pretrained", "seeded"), default="seeded")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--checkpoint", default=None)
    v.add_argument("--report", default=None, help="write the JSON report here")

    args = p.parse_args(argv)
    try:
        if args.command == "export":
            export(args.backbone, args.out, args.init, args.seed, args.checkpoint)
            print(f"wrote {args.out}")
            return 0
        report = verify(args.archive, args.image, args.fixtures,
                        init=args.init, seed=args.seed, checkpoint=args.checkpoint,
                        write_fixtures=args.write_fixtures)
        if args.report:
            with open(args.report, "w", encoding="utf-8") as f:
                json.dump(report, f, indent=1, sort_keys=True)
        if report["divergent"]:
            print("divergent taps: " + ", ".join(report["divergent"]), file=sys.stderr)
            return 1
        print(f"verified {len(report['taps'])} taps")
        return 0
    except (SourceError, ArchiveError, VerificationError, FileNotFoundError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
