"""Compile and instantiate programs against in-memory datasets."""

import os

from layerslang import ir, sema
from layerslang.engine import Engine
from layerslang.parser import parse_source


def data_block(datasets):
    entries = " ".join(f'{k} [filename="{k}.bin", binary]' for k in datasets)
    return f"data {{ {entries} }}\n"


def compile_program(source, datasets, const=""):
    """``source`` holds networks and scripts; the data block is generated."""
    infos = {f"{k}.bin": ds.info for k, ds in datasets.items()}
    exp = parse_source(const + data_block(datasets) + source)
    analysis = sema.analyze(exp, data_info=lambda path, fmt: infos[os.path.basename(path)])
    return ir.lower(analysis)


def make_engine(source, datasets, const="", seed=42, threads=1, log_path=os.devnull, **kw):
    prog = compile_program(source, datasets, const)
    own = {k: ds.copy() for k, ds in datasets.items()}
    return Engine(prog, seed=seed, threads=threads, log_path=log_path, datasets=own, **kw)
