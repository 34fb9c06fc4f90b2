"""Syntax tree for Layers programs.

Nodes mirror the grammar directly and carry no semantic interpretation.
Spans are excluded from equality so that trees built from different
renderings of the same program compare equal.
"""

from dataclasses import dataclass, field
from decimal import Decimal

from .diagnostics import Span


def _span():
    return field(default=None, compare=False, repr=False)


# -- constants ---------------------------------------------------------------

@dataclass
class ConstEntry:
    name: str                      # batch | threads | log
    value: Decimal | str
    span: Span = _span()


@dataclass
class ConstBlock:
    entries: list[ConstEntry]
    span: Span = _span()


# -- data --------------------------------------------------------------------

@dataclass
class DatumParam:
    name: str                      # filename | ascii | binary
    value: str | None = None       # path for filename
    span: Span = _span()


@dataclass
class DatumDef:
    name: str
    params: list[DatumParam]
    span: Span = _span()


@dataclass
class DataBlock:
    entries: list[DatumDef]
    span: Span = _span()


# -- networks ----------------------------------------------------------------

@dataclass
class NetData:
    role: str                      # tr | va | ts
    data: str
    span: Span = _span()


@dataclass
class LayerParam:
    name: str
    value: Decimal | None = None   # None for flags (local, classification, ...)
    span: Span = _span()


@dataclass
class LayerDecl:
    kind: str                      # FI CI F FO C MP CA
    name: str
    params: list[LayerParam] | None = None   # None for FI and CA
    span: Span = _span()


@dataclass
class NameLayer:
    layer: str
    net: str | None = None
    span: Span = _span()

    def __str__(self):
        return f"{self.net}.{self.layer}" if self.net else self.layer


@dataclass
class EdgeDecl:
    src: NameLayer
    dst: NameLayer
    span: Span = _span()


@dataclass
class NetworkDef:
    name: str
    netdata: list[NetData]         # first entry is always the tr binding
    statements: list[LayerDecl | EdgeDecl]
    span: Span = _span()


# -- scripts -----------------------------------------------------------------

REAL_PARAMS = ("mu", "mmu", "l2", "l1", "maxn", "drop", "noiser", "noisesd",
               "noiseb", "brightness", "contrast", "lambda")
INT_PARAMS = ("bn", "act", "shift", "flip", "balance")


@dataclass
class Amendment:
    net: str
    layer: str | None
    param: str
    value: Decimal
    span: Span = _span()


@dataclass
class PrintKernels:
    net: str
    layer: str
    file: str
    span: Span = _span()


@dataclass
class JointTrain:
    epochs: Decimal
    batches: Decimal
    nets: list[str]
    span: Span = _span()


@dataclass
class Train:
    net: str
    epochs: Decimal
    span: Span = _span()


@dataclass
class Test:
    net: str
    data: str | None = None
    span: Span = _span()


@dataclass
class Load:
    net: str
    file: str
    span: Span = _span()


@dataclass
class Save:
    net: str
    file: str
    span: Span = _span()


@dataclass
class TestOut:
    net: str
    file: str
    span: Span = _span()


@dataclass
class Zscore:
    data: str
    ref: str | None = None
    span: Span = _span()


@dataclass
class Center:
    data: str
    ref: str | None = None
    span: Span = _span()


@dataclass
class Yuv:
    data: str
    span: Span = _span()


@dataclass
class Div:
    data: str
    value: Decimal
    span: Span = _span()


Command = (PrintKernels | JointTrain | Train | Test | Load | Save | TestOut
           | Zscore | Center | Yuv | Div)


@dataclass
class ScriptBlock:
    actions: list
    span: Span = _span()


@dataclass
class Experiment:
    constants: ConstBlock | None
    definitions: list[DataBlock | NetworkDef | ScriptBlock]
    span: Span = _span()

    def blocks(self, kind):
        return [d for d in self.definitions if isinstance(d, kind)]
