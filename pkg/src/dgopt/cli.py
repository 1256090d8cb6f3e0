"""Command-line driver: ``python -m dgopt COMMAND [options]``."""

import argparse
import sys

from . import experiments as X

RUNNERS = {
    "denoise": X.run_denoise,
    "inpaint": X.run_inpaint,
    "scaling": X.run_scaling,
    "orderings": X.run_orderings,
    "compare": X.run_compare,
}


def build_parser():
    p = argparse.ArgumentParser(
        prog="dgopt",
        description="Itoh-Abe discrete-gradient solvers for elastica and "
                    "TV_eps imaging problems.")
    p.add_argument("command", choices=sorted(RUNNERS))
    p.add_argument("--config", metavar="PATH",
                   help="key = value configuration file")
    p.add_argument("--preset", choices=sorted(X.PRESETS),
                   help="start from a built-in parameter set")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--trace", metavar="PATH", help="write the trace CSV here")
    p.add_argument("--input", metavar="PGM")
    p.add_argument("--output", metavar="PATH",
                   help="restored image, or CSV table for the studies")
    p.add_argument("--results", metavar="PATH",
                   help="append the metrics line to this file")
    p.add_argument("--init", choices=("data", "random", "unicolor", "file"))
    p.add_argument("--init-file", metavar="PGM")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a single configuration key (repeatable)")
    return p


def _report(command, out):
    if command in ("denoise", "inpaint"):
        print(out["line"])
    elif command == "scaling":
        print("m,n,rate,predicted_rate")
        for r in out["rows"]:
            flag = "" if r["fit_ok"] else "  # non-monotone tail"
            print(f"{r['m']},{int(r['n'])},{r['rate']:.6g},"
                  f"{r['predicted_rate']:.6g}{flag}")
    elif command == "orderings":
        for k, s in out["slopes"].items():
            print(f"{k}: final={out['relative'][k][-1]:.3e} slope={s:.4g}")
    else:
        print(f"target energy {out['target']:.8g}")
        for r in out["rows"]:
            its = "-" if r["iterations"] is None else r["iterations"]
            print(f"{r['solver']}: iterations={its} "
                  f"final={r['final_energy']:.8g} seconds={r['seconds']:.2f}")


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        text = "\n".join(args.set)
        overrides = X.parse_config(text) if text else {}
        overrides.update(command=args.command, seed=args.seed,
                         workers=args.workers, trace=args.trace,
                         input=args.input, output=args.output,
                         results=args.results, init=args.init,
                         init_file=args.init_file)
        cfg = X.load_config(args.config, args.preset, overrides)
        out = RUNNERS[cfg.command](cfg)
    except (X.ConfigError, OSError, ValueError) as e:
        print(f"dgopt: error: {e}", file=sys.stderr)
        return 2
    except RuntimeError as e:
        print(f"dgopt: solver aborted: {e}", file=sys.stderr)
        return 1
    _report(cfg.command, out)
    if cfg.command == "scaling" and not all(r["fit_ok"] for r in out["rows"]):
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
