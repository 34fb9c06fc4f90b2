"""Graphviz rendering of compiled networks."""


def _quote(text):
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _shape(shape):
    return "x".join(str(s) for s in shape)


def to_dot(prog):
    """One cluster per network; layers shared across networks are drawn in
    the cluster of the network that declares them."""
    out = ["digraph layers {", "  rankdir=TB;", "  node [shape=box, fontname=monospace];"]
    for net in prog.networks:
        out.append(f"  subgraph {_quote('cluster_' + net.name)} {{")
        out.append(f"    label={_quote(net.name)};")
        for i in net.layers:
            l = prog.layers[i]
            label = f"{l.name}\\n{l.kind} {_shape(l.shape)}"
            out.append(f"    {_quote(l.qualname)} [label=\"{label}\"];")
        out.append("  }")
    for l in prog.layers:
        for p in l.parents:
            out.append(f"  {_quote(prog.layers[p].qualname)} -> {_quote(l.qualname)};")
    out.append("}")
    return "\n".join(out) + "\n"
