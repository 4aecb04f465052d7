#!/usr/bin/env python3
"""
hyperrecon entry point.

    python main.py generate worst --cliques 20 --size 5 --promote 0.19 --seed 1 -o worst.txt
    python main.py observe --structure worst.txt --mu 0.01 20 30 --seed 1 -o worst.csv
    python main.py infer --observations worst.csv --model hypergraph --desk -o result.json
    python main.py evaluate --result result.json --truth worst.txt --out-json metrics.json
"""
import sys

from hyper_core_modules.recon_cli import main

if __name__ == "__main__":
    sys.exit(main())
