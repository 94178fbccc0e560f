# main.py
# Entry point: configure logging, then run one satrep command (see cli/cli_core.py).

import logging
import sys

from config import LOG_LEVEL
from cli.cli_core import run


def main() -> None:
    """
    python main.py saturation problem.json --n-max 6
    python main.py preorder a.json b.json --both
    python main.py simulate problem.json --seed 7 --n-steps 200 --n-traj 10000 --csv freqs.csv
    python main.py hellinger problem.json --n-list 1-8 --psi1 '[1, 0]' --psi2 '[0, 1]'
    """
    logging.basicConfig(
        level=getattr(logging, LOG_LEVEL, logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        code = run()
    except KeyboardInterrupt:
        print("Interrupted (CTRL+C).", file=sys.stderr)
        code = 1
    sys.exit(code)


if __name__ == "__main__":
    main()
