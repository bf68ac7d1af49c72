#!/usr/bin/env python3

import argparse
import sys
import traceback

import singer

from ps_teleport.commands import COMMANDS
from ps_teleport.config import load_config, resolve
from ps_teleport.exceptions import (ConfigError, HeraldingError, ParameterError, QuadratureError, TruncationError,
                                    ValidationError)

logger = singer.get_logger()

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_USAGE = 2
EXIT_DOMAIN = 3
EXIT_VALIDATION = 4
EXIT_NUMERICAL = 5


def build_parser():
    parser = argparse.ArgumentParser(prog="ps-teleport",
                                     description="Teleportation fidelity with photon-subtracted TMSV resources")

    # every option defaults to None: None means "not supplied", so the config file value (or the built-in default)
    # is used instead. Setting a real default here would make the config file setting ineffective
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", help="key=value or .json config file", required=False)
    common.add_argument("--detector", help="spd, onoff or both")
    common.add_argument("--lambda", dest="lambda", help="squeezing lambda = tanh r, a value or lo:hi")
    common.add_argument("--T", dest="T", help="beam splitter transmissivity, a value or lo:hi")
    common.add_argument("--eta", help="detector efficiency, a value or lo:hi")
    common.add_argument("--grid", help="grid steps AxB (lambda x T)")
    common.add_argument("--out", help="output file, - for stdout")
    common.add_argument("--json", help="print JSON", dest="json", action="store_true", default=None)

    subparsers = parser.add_subparsers(dest="command", metavar="command")
    subparsers.required = True

    subparsers.add_parser("eval", parents=[common], help="all metrics at one point")

    sweep = subparsers.add_parser("sweep", parents=[common], help="metrics over a lambda x T (x eta) grid as CSV")
    sweep.add_argument("--eta-steps", dest="eta_steps", type=int, help="steps of an eta range")
    sweep.add_argument("--quantities", help="comma separated subset of F,P,dF,R,N,dN")
    sweep.add_argument("--literature", help="add the T_eff-substituted on-off fidelity as F_lit",
                       dest="literature", action="store_true", default=None)
    sweep.add_argument("--emit-plot", dest="emit_plot", action="store_true", default=None,
                       help="write a matplotlib script next to the CSV")

    contour = subparsers.add_parser("contours", parents=[common], help="level sets of dF / dN as CSV")
    contour.add_argument("--quantity", choices=["dF", "dN", "both"])
    contour.add_argument("--levels", help="comma separated levels (default 0)")
    contour.add_argument("--emit-plot", dest="emit_plot", action="store_true", default=None)

    fvsn = subparsers.add_parser("fvsn", parents=[common], help="fidelity against mean photon number as CSV")
    fvsn.add_argument("--emit-plot", dest="emit_plot", action="store_true", default=None)

    for name, help_text in (("optimize", "maximise R for one detector and efficiency"),
                            ("table2", "maximise R for each (detector, eta) row and compare")):
        sub = subparsers.add_parser(name, parents=[common], help=help_text)
        sub.add_argument("--tol", type=float, help="Nelder-Mead tolerance on coordinates")
        sub.add_argument("--max-evaluations", dest="max_evaluations", type=int, help="Nelder-Mead budget")
        if name == "table2":
            sub.add_argument("--rows", help="detector:eta pairs, e.g. spd:1,onoff:0.6")

    oracle = subparsers.add_parser("oracle-check", parents=[common], help="Fock oracle against the closed forms")
    oracle.add_argument("--samples", type=int, help="random points per (detector, eta) case")
    oracle.add_argument("--seed", type=int, help="random seed")
    oracle.add_argument("--nmax", type=int, help="fixed Fock cutoff (default: chosen from lambda)")
    oracle.add_argument("--tol", "--oracle-tol", dest="oracle_tol", type=float,
                        help="fidelity tolerance (probability tolerance is tol / 100); config key oracle_tol")

    return parser


def main():
    parser = build_parser()
    try:
        flags = parser.parse_args()
    except SystemExit as e:
        # argparse exits on its own for usage errors and --help
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE

    try:
        config = load_config(flags.config) if flags.config else {}
        settings = resolve(flags, config)
        logger.debug(f"{flags.command}: {settings}")

        COMMANDS[flags.command](settings)

    except ConfigError as e:
        logger.critical(e)
        return EXIT_USAGE
    except ParameterError as e:
        logger.critical(e)
        return EXIT_DOMAIN
    except ValidationError as e:
        logger.critical(e)
        return EXIT_VALIDATION
    except (TruncationError, QuadratureError, HeraldingError) as e:
        logger.critical(e)
        return EXIT_NUMERICAL
    except OSError as e:
        # unwritable --out path
        logger.critical(e)
        return EXIT_USAGE
    except Exception as e:
        logger.critical(e)
        exc_type, exc_value, exc_traceback = sys.exc_info()
        logger.critical(repr(traceback.format_exception(exc_type, exc_value, exc_traceback)))
        return EXIT_UNEXPECTED

    return EXIT_OK


if __name__ == "__main__":
    ret = main()
    sys.exit(ret)
